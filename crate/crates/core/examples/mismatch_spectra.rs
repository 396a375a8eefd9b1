//! Four mismatched DACs with and without rotation, using the bundled fig10
//! scenario. Pass an output directory to also write the CSV files.

use muxdac::harness::{bundled, run_case, run_scenario};

fn main() -> muxdac::Result<()> {
    let scenario = bundled("fig10").expect("bundled scenario");
    if let Some(dir) = std::env::args().nth(1) {
        let report = run_scenario(&scenario, dir.as_ref())?;
        print!("{}", report.summary());
        return Ok(());
    }
    for cfg in scenario.configs()? {
        let run = run_case(&cfg)?;
        let m = &run.metrics;
        println!(
            "{:<9} SNDR {:6.2} dB   h2 {:7.2} dB   h3 {:7.2} dB   slope {:5.1} dB/dec",
            cfg.name,
            m.sndr_db,
            m.h2.level_db,
            m.h3.level_db,
            m.slope_db_per_decade.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
