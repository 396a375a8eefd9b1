//! Scenario files, seeded parameter draws and end-to-end runs that write
//! spectra, metrics and a reproducibility manifest.

mod mismatch;
mod run;
mod scenario;

pub use mismatch::{gen_mismatch, Spread, MISMATCH_STREAM};
pub use run::{
    analyze, case_schedule, element_params, fmt_num, manifest, output_full_scale, render_case, run_case,
    run_scenario, sndr_at, sweep_curves, sweep_scenario, CaseRun, Curves, Metrics, Report, SweepReport, F_H,
};
pub use scenario::{
    AnalysisSpec, CaseConfig, CaseDef, DacSpec, Domain, InputSpec, MismatchSpec, ModulatorSpec, Override,
    PulseShape, PulseSpec, Scenario, KEYS,
};

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("fig10", include_str!("../../scenarios/fig10.scenario")),
    ("fig11", include_str!("../../scenarios/fig11.scenario")),
    ("fig15", include_str!("../../scenarios/fig15.scenario")),
];

/// Looks up a bundled scenario; a trailing `.scenario` is ignored.
pub fn bundled(name: &str) -> Option<Scenario> {
    let key = name.strip_suffix(".scenario").unwrap_or(name);
    BUNDLED
        .iter()
        .find(|(n, _)| *n == key)
        .map(|(n, text)| Scenario::parse(text, &format!("{n}.scenario")).expect("bundled scenario parses"))
}

/// Loads a scenario file, falling back to the bundled set when no such file
/// exists.
pub fn resolve(arg: &str) -> crate::Result<Scenario> {
    let path = std::path::Path::new(arg);
    if !path.exists() {
        if let Some(s) = bundled(arg) {
            return Ok(s);
        }
    }
    Scenario::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_validate() {
        for (name, _) in BUNDLED {
            let s = bundled(name).unwrap();
            s.validate().unwrap();
            assert_eq!(s.name(), *name);
        }
        assert!(bundled("fig10.scenario").is_some());
        assert!(bundled("fig99").is_none());
    }
}
