//! Second-order single-bit modulator on a coherent sine: loop filter taps,
//! NTF, and the SNDR of the bipolar output stream.

use muxdac::analysis::{coherent_sine, dbfs_to_amplitude, psd_windowed, sndr, Window};
use muxdac::modulator::{design_loop_filter, modulate, Quantizer};

fn main() -> muxdac::Result<()> {
    let n = 1 << 15;
    let osr = 64.0;
    let filter = design_loop_filter(2, None, 0)?;
    println!("feedback taps h[1..]: {:?}", filter.taps());
    println!("NTF numerator:        {:?}", filter.ntf());

    let x = coherent_sine(n, dbfs_to_amplitude(-3.0, 1.0), 61, n);
    let out = modulate(&x, &filter, &Quantizer::single_bit())?;
    let ones = out.stream.codes.iter().filter(|&&c| c == 1).count();
    println!("{n} samples, {:.1} % ones", 100.0 * ones as f64 / n as f64);

    let report = psd_windowed(&out.stream.levels(), 1.0, n, 1.0, Window::Hann)?;
    println!("SNDR at OSR {osr}: {:.2} dB", sndr(&report, report.freq_of(61), osr)?);

    // an order-3 loop needs a stable denominator
    let third = design_loop_filter(3, Some(&[1.0, -0.5]), 0)?;
    println!("third order, D(z) = 1 - 0.5 z^-1: {} taps, first {:?}", third.taps().len(), &third.taps()[..3]);
    Ok(())
}
