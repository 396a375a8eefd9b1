//! Edge model: one pulse with slew limiting, area error against pulse width,
//! and the bundled fig15 comparison of single, four- and five-DAC outputs.

use muxdac::harness::{bundled, run_case};
use muxdac::pulseshape::{relative_pulse_area_error, shape_element, ShapeParams};

fn main() -> muxdac::Result<()> {
    let sp = ShapeParams::symmetric(0.5, 1.5);
    let k = 8;
    let w = shape_element(&[-1.0, 1.0, 1.0, -1.0, -1.0, -1.0], &sp, 1.0, k)?;
    println!("pulse of two ticks, tau = 0.5 T_H, SR = 1.5 V_S f_H:");
    for (j, v) in w.samples.iter().enumerate() {
        println!("  t = {:5.3}  {v:+.4}", (j + 1) as f64 / k as f64);
    }

    let fast = ShapeParams {
        tau_p: 0.05,
        tau_n: 0.0525,
        sr_p: 15.0,
        sr_n: 0.75 / 0.0525,
    };
    println!("relative area error with settled edges:");
    for width in [1, 2, 4, 8] {
        println!("  width {width}: {:.3e}", relative_pulse_area_error(&fast, 1.0, 1.0, width, 64));
    }

    let scenario = bundled("fig15").expect("bundled scenario");
    for cfg in scenario.configs()? {
        let run = run_case(&cfg)?;
        println!(
            "{:<9} {:>2} DACs  SNDR {:6.2} dB  h2 {:7.2} dB  h3 {:7.2} dB",
            cfg.name,
            run.params.len(),
            run.metrics.sndr_db,
            run.metrics.h2.level_db,
            run.metrics.h3.level_db
        );
    }
    Ok(())
}
