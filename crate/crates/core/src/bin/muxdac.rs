//! Command-line front end for bundled and user scenarios.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use muxdac::harness::{self, Scenario};

/// Parent of the output directory when neither `--out-dir` nor the scenario sets one.
const OUT_DIR_ENV: &str = "MUXDAC_OUT_DIR";

#[derive(Parser)]
#[command(name = "muxdac", version, about = "Multiplexed sigma-delta DAC simulator")]
struct Cli {
    /// Override the seed of every case.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: the scenario's run.out_dir, then
    /// $MUXDAC_OUT_DIR/<scenario name>, then out/<scenario name>).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Override the record length N.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Override the analog sub-samples per tick.
    #[arg(long, global = true)]
    oversample: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every case; write spectra, metrics and a manifest.
    Run { scenario: String },
    /// Sweep the input amplitude; write dr.csv and a manifest.
    Sweep { scenario: String },
    /// List bundled scenarios.
    ListScenarios,
    /// Parse and check a scenario without simulating.
    Validate { scenario: String },
}

fn load(cli: &Cli, arg: &str) -> muxdac::Result<Scenario> {
    let mut s = harness::resolve(arg)?;
    if let Some(seed) = cli.seed {
        s.set_all("run", "seed", &seed.to_string())?;
    }
    if let Some(n) = cli.samples {
        s.set_all("analysis", "samples", &n.to_string())?;
    }
    if let Some(k) = cli.oversample {
        s.set_all("analysis", "oversample", &k.to_string())?;
    }
    Ok(s)
}

fn out_dir(cli: &Cli, s: &Scenario) -> PathBuf {
    cli.out_dir
        .clone()
        .or_else(|| s.base.out_dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(s.name())))
        .unwrap_or_else(|| PathBuf::from("out").join(s.name()))
}

fn execute(cli: &Cli) -> muxdac::Result<()> {
    match &cli.command {
        Command::Run { scenario } => {
            let s = load(cli, scenario)?;
            let report = harness::run_scenario(&s, &out_dir(cli, &s))?;
            print!("{}", report.summary());
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep { scenario } => {
            let s = load(cli, scenario)?;
            let report = harness::sweep_scenario(&s, &out_dir(cli, &s))?;
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Command::ListScenarios => {
            for (name, _) in harness::BUNDLED {
                let s = harness::bundled(name).expect("bundled");
                println!("{name}\t{}", s.base.description);
            }
        }
        Command::Validate { scenario } => {
            let s = load(cli, scenario)?;
            s.validate()?;
            println!("ok {} ({} cases)", s.origin, s.configs()?.len());
        }
    }
    Ok(())
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("muxdac: error[usage]: {}", one_line(first));
            return ExitCode::from(2);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("muxdac: error[{}]: {}", e.kind(), one_line(&e.to_string()));
            ExitCode::FAILURE
        }
    }
}
