//! Scenario execution and output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{
    band_edge, coherent_sine, dbfs_to_amplitude, dr_sweep, harmonic_bin, harmonic_reading, inband_slope,
    psd_windowed, sndr, HarmonicReading, SpectrumReport,
};
use crate::dacbank::{
    dwa_schedule, dwa_schedule_multibit, phase_assigned_schedule, render_dt, rz_schedule, ActivationSchedule,
    ElementParams, Mode,
};
use crate::error::{Error, Result};
use crate::interleave::ti_modulate_dithered;
use crate::modulator::{design_loop_filter, Dither, DITHER_STREAM};
use crate::pulseshape::render_analog;

use super::mismatch::{gen_mismatch, MISMATCH_STREAM};
use super::scenario::{CaseConfig, Domain, Scenario};

/// High-rate clock; all times are in units of `1 / f_H`.
pub const F_H: f64 = 1.0;

/// Highest harmonic order masked out of the slope fit.
const MASKED_HARMONICS: usize = 5;

/// Element parameters of a case, drawn from its seed.
pub fn element_params(cfg: &CaseConfig) -> Result<Vec<ElementParams>> {
    gen_mismatch(
        cfg.seed,
        &cfg.mismatch,
        &cfg.pulse,
        cfg.elements(),
        cfg.modulator.full_scale,
    )
}

/// Activation schedule of a case, covering `samples + paths` ticks.
pub fn case_schedule(cfg: &CaseConfig) -> Result<ActivationSchedule> {
    let m = &cfg.modulator;
    let paths = cfg.dac.paths;
    let filter = design_loop_filter(m.order, m.denominator.as_deref(), m.truncation)?;
    let q = cfg.quantizer()?;
    let amp = dbfs_to_amplitude(cfg.input.amplitude_dbfs, m.full_scale);
    let n = cfg.analysis.samples;
    let x = coherent_sine(n + paths, amp, cfg.input.bin, n);
    let dither = (m.dither > 0.0).then_some(Dither {
        amplitude: m.dither,
        seed: cfg.seed,
    });
    let ti = ti_modulate_dithered(&x, paths, &filter, &q, dither)?;
    match cfg.dac.mode {
        Mode::Single | Mode::PhaseAssigned => phase_assigned_schedule(&ti.paths),
        Mode::Dwa => dwa_schedule(&ti.multiplexed, paths, paths),
        Mode::MultibitDwa => dwa_schedule_multibit(&ti.multiplexed, paths),
        Mode::Rz => rz_schedule(&ti.multiplexed, paths),
    }
}

/// Output of the analog adder with the warm-up block removed, and its sample
/// rate. Discrete runs give one sample per tick, analog runs `oversample`.
pub fn render_case(cfg: &CaseConfig, params: &[ElementParams]) -> Result<(Vec<f64>, f64)> {
    let schedule = case_schedule(cfg)?;
    let v_s = cfg.modulator.full_scale;
    let skip = cfg.dac.paths;
    match cfg.analysis.domain {
        Domain::Discrete => {
            let out = render_dt(&schedule, params, v_s)?;
            Ok((out[skip..].to_vec(), F_H))
        }
        Domain::Analog => {
            let k = cfg.analysis.oversample;
            let wave = render_analog(&schedule, params, v_s, F_H, k)?;
            Ok((wave.samples[skip * k..].to_vec(), wave.rate))
        }
    }
}

/// Figures of merit of one spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub f_in: f64,
    pub band_edge: f64,
    pub sndr_db: f64,
    pub h2: HarmonicReading,
    pub h3: HarmonicReading,
    /// In-band PSD slope over the last decade of the band, tones masked.
    /// `None` when the band holds too few bins.
    pub slope_db_per_decade: Option<f64>,
}

/// Full-scale output amplitude: `M` DACs of `V_S` each.
pub fn output_full_scale(cfg: &CaseConfig) -> f64 {
    cfg.dac.paths as f64 * cfg.modulator.full_scale
}

pub fn analyze(cfg: &CaseConfig, signal: &[f64], rate: f64) -> Result<(SpectrumReport, Metrics)> {
    let k = (rate / F_H).round() as usize;
    let len = cfg.analysis.samples * k;
    let report = psd_windowed(signal, rate, len, output_full_scale(cfg), cfg.analysis.window)?;
    let osr = cfg.modulator.osr * k as f64;
    let f_b = band_edge(rate, osr);
    let f_in = report.freq_of(cfg.input.bin);
    let sndr_db = sndr(&report, f_in, osr)?;
    let hw = cfg.analysis.floor_halfwidth;
    let masked: Vec<usize> = (1..=MASKED_HARMONICS)
        .flat_map(|h| report.tone_bins(harmonic_bin(&report, f_in, h)))
        .collect();
    let metrics = Metrics {
        f_in,
        band_edge: f_b,
        sndr_db,
        h2: harmonic_reading(&report, f_in, 2, hw),
        h3: harmonic_reading(&report, f_in, 3, hw),
        slope_db_per_decade: inband_slope(&report, f_b / 10.0, f_b, &masked).ok(),
    };
    Ok((report, metrics))
}

/// Result of one case.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub config: CaseConfig,
    pub params: Vec<ElementParams>,
    pub spectrum: SpectrumReport,
    pub metrics: Metrics,
}

pub fn run_case(cfg: &CaseConfig) -> Result<CaseRun> {
    let inner = || -> Result<CaseRun> {
        cfg.validate()?;
        let params = element_params(cfg)?;
        let (signal, rate) = render_case(cfg, &params)?;
        let (spectrum, metrics) = analyze(cfg, &signal, rate)?;
        Ok(CaseRun {
            config: cfg.clone(),
            params,
            spectrum,
            metrics,
        })
    };
    inner().map_err(|e| e.in_case(&cfg.name))
}

/// SNDR of a case at `amplitude_dbfs`, element parameters unchanged.
pub fn sndr_at(cfg: &CaseConfig, amplitude_dbfs: f64) -> Result<f64> {
    let mut c = cfg.clone();
    c.input.amplitude_dbfs = amplitude_dbfs;
    let params = element_params(&c)?;
    let (signal, rate) = render_case(&c, &params)?;
    Ok(analyze(&c, &signal, rate)?.1.sndr_db)
}

/// Decimal with 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        v.to_string()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_owned(),
        source: e.into(),
    }
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_psd(path: &Path, run: &CaseRun) -> Result<()> {
    let r = &run.spectrum;
    // Up to f_H / 2 regardless of the analysis oversampling.
    let last = r.bin_of(F_H / 2.0).min(r.power.len() - 1);
    write_csv(
        path,
        &["frequency", "psd_db"],
        (0..=last).map(|b| vec![fmt_num(r.freq_of(b)), fmt_num(r.db(b))]),
    )
}

fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_else(|| "NaN".into())
}

fn write_metrics(path: &Path, runs: &[CaseRun]) -> Result<()> {
    write_csv(
        path,
        &[
            "case",
            "mode",
            "paths",
            "elements",
            "amplitude_dbfs",
            "sndr_db",
            "h2_db",
            "h2_floor_db",
            "h3_db",
            "h3_floor_db",
            "slope_db_per_decade",
        ],
        runs.iter().map(|r| {
            let m = &r.metrics;
            vec![
                r.config.name.clone(),
                r.config.dac.mode.name().to_owned(),
                r.config.dac.paths.to_string(),
                r.params.len().to_string(),
                fmt_num(r.config.input.amplitude_dbfs),
                fmt_num(m.sndr_db),
                fmt_num(m.h2.level_db),
                fmt_num(m.h2.floor_db),
                fmt_num(m.h3.level_db),
                fmt_num(m.h3.floor_db),
                opt_num(m.slope_db_per_decade),
            ]
        }),
    )
}

/// Manifest text: the canonical scenario plus every element parameter, each
/// float in shortest round-trip form.
pub fn manifest(s: &Scenario, cases: &[(String, Vec<ElementParams>)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# muxdac {} run manifest", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# source: {}", s.origin);
    let _ = writeln!(
        out,
        "# generator: ChaCha8 seed_from_u64(seed); stream {MISMATCH_STREAM} element parameters, stream {DITHER_STREAM} dither"
    );
    out.push('\n');
    out.push_str(&s.canonical());
    for (name, params) in cases {
        let _ = writeln!(out, "\n# elements of case {name}: index, gain, offset, tau_p, tau_n, sr_p, sr_n");
        for (i, p) in params.iter().enumerate() {
            let _ = writeln!(
                out,
                "# {i}, {}, {}, {}, {}, {}, {}",
                p.gain, p.offset, p.tau_p, p.tau_n, p.sr_p, p.sr_n
            );
        }
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn prepare(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Files and results of a scenario run.
#[derive(Debug, Clone)]
pub struct Report {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub cases: Vec<CaseRun>,
}

impl Report {
    /// One line per case.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for r in &self.cases {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{:<16} SNDR {:7.2} dB  h2 {:7.2} dB  h3 {:7.2} dB",
                r.config.name, m.sndr_db, m.h2.level_db, m.h3.level_db
            );
        }
        out
    }
}

/// Runs every case (in parallel) and writes `psd_<case>.csv`, `metrics.csv`
/// and `manifest.txt` into `out_dir`.
pub fn run_scenario(s: &Scenario, out_dir: &Path) -> Result<Report> {
    s.validate()?;
    let configs = s.configs()?;
    let runs: Vec<CaseRun> = configs.par_iter().map(run_case).collect::<Result<_>>()?;
    prepare(out_dir)?;
    let mut files = Vec::new();
    for r in &runs {
        let path = out_dir.join(format!("psd_{}.csv", r.config.name));
        write_psd(&path, r)?;
        files.push(path);
    }
    let path = out_dir.join("metrics.csv");
    write_metrics(&path, &runs)?;
    files.push(path);
    let params: Vec<_> = runs.iter().map(|r| (r.config.name.clone(), r.params.clone())).collect();
    let path = out_dir.join("manifest.txt");
    write_text(&path, &manifest(s, &params))?;
    files.push(path);
    Ok(Report {
        out_dir: out_dir.to_owned(),
        files,
        cases: runs,
    })
}

/// Dynamic-range curves: SNDR per amplitude for every case.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub out_dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub amplitudes: Vec<f64>,
    pub curves: Curves,
}

impl SweepReport {
    pub fn curve(&self, case: &str) -> Option<&[f64]> {
        self.curves.iter().find(|(n, _)| n == case).map(|(_, c)| c.as_slice())
    }
}

/// SNDR curves by case name, one value per sweep amplitude.
pub type Curves = Vec<(String, Vec<f64>)>;

/// Computes the dynamic-range curves without writing anything.
pub fn sweep_curves(s: &Scenario) -> Result<(Vec<f64>, Curves)> {
    s.validate()?;
    let configs = s.configs()?;
    let amplitudes = configs[0].analysis.sweep.clone();
    if amplitudes.is_empty() {
        return Err(Error::Config("analysis.sweep lists no amplitudes".into()));
    }
    if let Some(c) = configs.iter().find(|c| c.analysis.sweep != amplitudes) {
        return Err(Error::Config(format!("case '{}' uses a different sweep list", c.name)));
    }
    let mut curves = Vec::with_capacity(configs.len());
    for cfg in &configs {
        let points = dr_sweep(&amplitudes, |a| sndr_at(cfg, a)).map_err(|e| e.in_case(&cfg.name))?;
        curves.push((cfg.name.clone(), points.into_iter().map(|(_, v)| v).collect()));
    }
    Ok((amplitudes, curves))
}

/// Writes `dr.csv` (one row per amplitude, one column per case) and
/// `manifest.txt`.
pub fn sweep_scenario(s: &Scenario, out_dir: &Path) -> Result<SweepReport> {
    let (amplitudes, curves) = sweep_curves(s)?;
    prepare(out_dir)?;
    let path = out_dir.join("dr.csv");
    let mut header = vec!["amplitude_dbfs"];
    header.extend(curves.iter().map(|(n, _)| n.as_str()));
    write_csv(
        &path,
        &header,
        amplitudes.iter().enumerate().map(|(i, a)| {
            let mut row = vec![fmt_num(*a)];
            row.extend(curves.iter().map(|(_, c)| fmt_num(c[i])));
            row
        }),
    )?;
    let params = s
        .configs()?
        .iter()
        .map(|c| element_params(c).map(|p| (c.name.clone(), p)))
        .collect::<Result<Vec<_>>>()?;
    let manifest_path = out_dir.join("manifest.txt");
    write_text(&manifest_path, &manifest(s, &params))?;
    Ok(SweepReport {
        out_dir: out_dir.to_owned(),
        files: vec![path, manifest_path],
        amplitudes,
        curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(1.0), "1.00000000000e0");
        assert_eq!(fmt_num(-0.000123456789012345), "-1.23456789012e-4");
        assert_eq!(fmt_num(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn small_discrete_case() {
        let text = "[analysis]\nsamples = 4096\n[input]\nbin = 13\n[modulator]\nosr = 16\n";
        let s = Scenario::parse(text, "t").unwrap();
        let run = run_case(&s.configs().unwrap()[0]).unwrap();
        assert!(run.metrics.sndr_db > 35.0, "{}", run.metrics.sndr_db);
        assert_eq!(run.params.len(), 4);
    }

    #[test]
    fn case_errors_name_the_case() {
        let text = "[analysis]\nsamples = 4096\n[case bad]\ninput.bin = 3000\n";
        let s = Scenario::parse(text, "t").unwrap();
        let e = run_case(&s.configs().unwrap()[0]).unwrap_err();
        assert!(e.to_string().starts_with("case 'bad'"), "{e}");
    }
}
