//! Time-interleaved modulation with M = 4 paths: polyphase components,
//! pseudo-circulant block filter, and bit-exact agreement with the direct loop.

use muxdac::analysis::coherent_sine;
use muxdac::interleave::{polyphase_decompose, ti_modulate, BlockFilter};
use muxdac::modulator::{design_loop_filter, modulate, Quantizer};

fn main() -> muxdac::Result<()> {
    let m = 4;
    let filter = design_loop_filter(2, None, 0)?;
    let set = polyphase_decompose(filter.impulse(), m)?;
    for k in 0..m {
        println!("H_{k}: {:?}", set.component(k));
    }
    let bf = BlockFilter::new(&set);
    println!("block filter (entry r,c as coefficients of z^-1 in the low-rate clock):");
    for r in 0..m {
        let row: Vec<String> = (0..m).map(|c| format!("{:?}", bf.entry(r, c))).collect();
        println!("  {}", row.join("  "));
    }

    let n = 4096;
    let x = coherent_sine(n, 0.5, 7, n);
    let q = Quantizer::single_bit();
    let ti = ti_modulate(&x, m, &filter, &q)?;
    let direct = modulate(&x, &filter, &q)?;
    let same = ti.multiplexed.codes[m..] == direct.stream.codes[..n - m];
    println!("multiplexed stream == direct stream delayed by {}: {same}", ti.delay);
    for (p, y) in ti.paths.iter().enumerate() {
        println!("Y_{p}: {:?} ...", &y.codes[..12]);
    }
    Ok(())
}
