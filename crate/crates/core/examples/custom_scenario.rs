//! Builds a scenario from text, validates it, and runs it with two seeds.

use muxdac::harness::{run_case, Scenario};

const TEXT: &str = "
[run]
name = custom
seed = 3

[modulator]
order = 2
osr = 64

[dac]
paths = 8
mode = dwa

[mismatch]
gain_std = 0.02
offset_std = 0.01

[case rotated]

[case fixed]
dac.mode = phase
";

fn main() -> muxdac::Result<()> {
    let mut scenario = Scenario::parse(TEXT, "inline")?;
    scenario.validate()?;
    print!("{}", scenario.canonical());
    for seed in ["3", "4"] {
        scenario.set_all("run", "seed", seed)?;
        for cfg in scenario.configs()? {
            let run = run_case(&cfg)?;
            let gains: Vec<String> = run.params.iter().map(|p| format!("{:.3}", p.gain)).collect();
            println!("seed {seed} {:<8} SNDR {:6.2} dB  gains [{}]", cfg.name, run.metrics.sndr_db, gains.join(", "));
        }
    }
    Ok(())
}
