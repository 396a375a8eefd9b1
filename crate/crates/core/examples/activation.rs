//! Which DAC holds a duty pulse at each tick, for the phase-assigned,
//! rotated (DWA) and return-to-idle (M + 1 DACs) schedules.

use muxdac::dacbank::{dwa_schedule, phase_assigned_schedule, rz_schedule, ActivationSchedule};
use muxdac::interleave::demultiplex;
use muxdac::modulator::{CodeStream, Quantizer, Rate};

fn chart(title: &str, s: &ActivationSchedule) {
    println!("{title} ({} elements, duty {} ticks)", s.elements(), s.duty_len);
    for e in 0..s.elements() {
        let row: String = s.duty_mask(e).iter().map(|&on| if on { '#' } else { '.' }).collect();
        println!("  DAC{e} {row}");
    }
}

fn main() -> muxdac::Result<()> {
    let m = 4;
    let codes = vec![1, 1, 0, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 0, 1, 0, 0, 1];
    let y = CodeStream::new(Rate::High, codes, Quantizer::single_bit())?;
    let bits: String = y.codes.iter().map(|c| char::from(b'0' + *c as u8)).collect();
    println!("y         {bits}\n");
    chart("phase-assigned", &phase_assigned_schedule(&demultiplex(&y, m))?);
    chart("data weighted averaging", &dwa_schedule(&y, m, m)?);
    let rz = rz_schedule(&y, m)?;
    chart("return to idle", &rz);
    rz.validate()?;
    println!("\ntrigger counts with rotation: {:?}", dwa_schedule(&y, m, m)?.trigger_counts());
    Ok(())
}
