//! Dynamic-range curves of the 3-bit, 28-element bank (bundled fig11).

use muxdac::harness::{bundled, sweep_curves};

fn main() -> muxdac::Result<()> {
    let scenario = bundled("fig11").expect("bundled scenario");
    let (amps, curves) = sweep_curves(&scenario)?;
    print!("{:>8}", "dBfs");
    for (name, _) in &curves {
        print!("{name:>10}");
    }
    println!();
    for (i, a) in amps.iter().enumerate() {
        print!("{a:>8}");
        for (_, c) in &curves {
            print!("{:>10.2}", c[i]);
        }
        println!();
    }
    Ok(())
}
