//! Scenario files.
//!
//! A scenario is a line-oriented text file: `[section]` headers, `key = value`
//! lines and `#` comments. Sections are `run`, `modulator`, `dac`,
//! `mismatch`, `pulse`, `input` and `analysis`. A `[case NAME]` header opens a
//! case whose lines override the base configuration as `section.key = value`.
//! A scenario without cases runs a single case named `base`.
//!
//! The canonical form (see [`Scenario::canonical`]) lists every base key in a
//! fixed order followed by each case's overrides, with floats written in their
//! shortest round-trip representation. Parsing the canonical text reproduces
//! the scenario exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::Window;
use crate::dacbank::Mode;
use crate::error::{Error, Result};
use crate::modulator::{design_loop_filter, Quantizer};

use super::mismatch::{gen_mismatch, Spread};

/// Every configurable key, in canonical order.
pub const KEYS: &[(&str, &str)] = &[
    ("run", "name"),
    ("run", "description"),
    ("run", "seed"),
    ("run", "out_dir"),
    ("modulator", "order"),
    ("modulator", "osr"),
    ("modulator", "bits"),
    ("modulator", "full_scale"),
    ("modulator", "denominator"),
    ("modulator", "truncation"),
    ("modulator", "dither"),
    ("dac", "paths"),
    ("dac", "mode"),
    ("mismatch", "gains"),
    ("mismatch", "offsets"),
    ("mismatch", "gain_range"),
    ("mismatch", "gain_std"),
    ("mismatch", "offset_range"),
    ("mismatch", "offset_std"),
    ("pulse", "shape"),
    ("pulse", "slew_rate"),
    ("pulse", "tau"),
    ("pulse", "range"),
    ("pulse", "std"),
    ("pulse", "split"),
    ("input", "amplitude_dbfs"),
    ("input", "bin"),
    ("analysis", "samples"),
    ("analysis", "oversample"),
    ("analysis", "domain"),
    ("analysis", "window"),
    ("analysis", "floor_halfwidth"),
    ("analysis", "sweep"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct ModulatorSpec {
    pub order: usize,
    pub osr: f64,
    pub bits: u32,
    /// `V_S`: quantizer full scale and DAC reference, volts.
    pub full_scale: f64,
    /// Monic `D(z)` coefficients; required for orders above 2.
    pub denominator: Option<Vec<f64>>,
    /// Impulse-response length cap, 0 for automatic.
    pub truncation: usize,
    /// Uniform dither half-width in volts, 0 for none.
    pub dither: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DacSpec {
    pub paths: usize,
    pub mode: Mode,
}

/// Element gain and offset errors. Explicit vectors take precedence over the
/// random spreads. Offsets are in units of `V_S`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MismatchSpec {
    pub gains: Option<Vec<f64>>,
    pub offsets: Option<Vec<f64>>,
    pub gain: Spread,
    pub offset: Spread,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseShape {
    /// Rectangular edges.
    Ideal,
    /// Nominal `(tau, SR)` on every element and edge.
    Nominal,
    /// Rising edge nominal, falling edge `tau (1 + split)`, `SR (1 - split)`.
    Split,
    /// Each of the four edge values drawn as `nominal (1 + delta)`.
    Random,
}

impl PulseShape {
    pub fn name(&self) -> &'static str {
        match self {
            PulseShape::Ideal => "ideal",
            PulseShape::Nominal => "nominal",
            PulseShape::Split => "split",
            PulseShape::Random => "random",
        }
    }

    pub fn from_name(s: &str) -> Option<PulseShape> {
        [PulseShape::Ideal, PulseShape::Nominal, PulseShape::Split, PulseShape::Random]
            .into_iter()
            .find(|p| p.name() == s)
    }
}

/// Edge parameters; `slew_rate` is in units of `V_S f_H`, `tau` in `1 / f_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    pub shape: PulseShape,
    pub slew_rate: f64,
    pub tau: f64,
    pub deviation: Spread,
    pub split: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub amplitude_dbfs: f64,
    /// Input frequency as an FFT bin index.
    pub bin: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// One sample per high-rate tick, ideal edges.
    Discrete,
    /// `oversample` points per tick through the edge model.
    Analog,
}

impl Domain {
    pub fn name(&self) -> &'static str {
        match self {
            Domain::Discrete => "discrete",
            Domain::Analog => "analog",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSpec {
    /// Record length `N` in high-rate ticks.
    pub samples: usize,
    pub oversample: usize,
    pub domain: Domain,
    pub window: Window,
    /// Bins on each side used for harmonic noise floors.
    pub floor_halfwidth: usize,
    /// Amplitudes (dBfs) for dynamic-range sweeps, ascending.
    pub sweep: Vec<f64>,
}

/// Fully resolved configuration of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub name: String,
    pub description: String,
    pub seed: u64,
    pub out_dir: Option<String>,
    pub modulator: ModulatorSpec,
    pub dac: DacSpec,
    pub mismatch: MismatchSpec,
    pub pulse: PulseSpec,
    pub input: InputSpec,
    pub analysis: AnalysisSpec,
}

impl Default for CaseConfig {
    fn default() -> Self {
        CaseConfig {
            name: "scenario".into(),
            description: String::new(),
            seed: 1,
            out_dir: None,
            modulator: ModulatorSpec {
                order: 2,
                osr: 64.0,
                bits: 1,
                full_scale: 1.0,
                denominator: None,
                truncation: 0,
                dither: 0.0,
            },
            dac: DacSpec {
                paths: 4,
                mode: Mode::PhaseAssigned,
            },
            mismatch: MismatchSpec::default(),
            pulse: PulseSpec {
                shape: PulseShape::Ideal,
                slew_rate: 1.5,
                tau: 0.5,
                deviation: Spread::default(),
                split: 0.05,
            },
            input: InputSpec {
                amplitude_dbfs: -3.0,
                bin: 61,
            },
            analysis: AnalysisSpec {
                samples: crate::analysis::DEFAULT_FFT_LEN,
                oversample: crate::pulseshape::DEFAULT_OVERSAMPLE,
                domain: Domain::Discrete,
                window: Window::Hann,
                floor_halfwidth: 16,
                sweep: Vec::new(),
            },
        }
    }
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn opt_list(v: &Option<Vec<f64>>) -> String {
    v.as_deref().map(list).unwrap_or_default()
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("invalid number '{v}'"))
}

fn opt_f64(v: &str) -> std::result::Result<Option<f64>, String> {
    if v.is_empty() {
        Ok(None)
    } else {
        num(v).map(Some)
    }
}

fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|s| num(s.trim())).collect()
}

fn opt_vec(v: &str) -> std::result::Result<Option<Vec<f64>>, String> {
    if v.is_empty() {
        Ok(None)
    } else {
        parse_list(v).map(Some)
    }
}

impl CaseConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match (section, key) {
            ("run", "name") => self.name = v.to_owned(),
            ("run", "description") => self.description = v.to_owned(),
            ("run", "seed") => self.seed = num(v)?,
            ("run", "out_dir") => self.out_dir = (!v.is_empty()).then(|| v.to_owned()),
            ("modulator", "order") => self.modulator.order = num(v)?,
            ("modulator", "osr") => self.modulator.osr = num(v)?,
            ("modulator", "bits") => self.modulator.bits = num(v)?,
            ("modulator", "full_scale") => self.modulator.full_scale = num(v)?,
            ("modulator", "denominator") => self.modulator.denominator = opt_vec(v)?,
            ("modulator", "truncation") => self.modulator.truncation = num(v)?,
            ("modulator", "dither") => self.modulator.dither = num(v)?,
            ("dac", "paths") => self.dac.paths = num(v)?,
            ("dac", "mode") => {
                self.dac.mode = Mode::from_name(v).ok_or_else(|| {
                    format!("unknown mode '{v}' (single, phase, dwa, multibit-dwa, rz)")
                })?
            }
            ("mismatch", "gains") => self.mismatch.gains = opt_vec(v)?,
            ("mismatch", "offsets") => self.mismatch.offsets = opt_vec(v)?,
            ("mismatch", "gain_range") => self.mismatch.gain.range = opt_f64(v)?,
            ("mismatch", "gain_std") => self.mismatch.gain.std = opt_f64(v)?,
            ("mismatch", "offset_range") => self.mismatch.offset.range = opt_f64(v)?,
            ("mismatch", "offset_std") => self.mismatch.offset.std = opt_f64(v)?,
            ("pulse", "shape") => {
                self.pulse.shape = PulseShape::from_name(v)
                    .ok_or_else(|| format!("unknown pulse shape '{v}' (ideal, nominal, split, random)"))?
            }
            ("pulse", "slew_rate") => self.pulse.slew_rate = num(v)?,
            ("pulse", "tau") => self.pulse.tau = num(v)?,
            ("pulse", "range") => self.pulse.deviation.range = opt_f64(v)?,
            ("pulse", "std") => self.pulse.deviation.std = opt_f64(v)?,
            ("pulse", "split") => self.pulse.split = num(v)?,
            ("input", "amplitude_dbfs") => self.input.amplitude_dbfs = num(v)?,
            ("input", "bin") => self.input.bin = num(v)?,
            ("analysis", "samples") => self.analysis.samples = num(v)?,
            ("analysis", "oversample") => self.analysis.oversample = num(v)?,
            ("analysis", "domain") => {
                self.analysis.domain = match v {
                    "discrete" => Domain::Discrete,
                    "analog" => Domain::Analog,
                    _ => return Err(format!("unknown domain '{v}' (discrete, analog)")),
                }
            }
            ("analysis", "window") => {
                self.analysis.window =
                    Window::from_name(v).ok_or_else(|| format!("unknown window '{v}' (rectangular, hann)"))?
            }
            ("analysis", "floor_halfwidth") => self.analysis.floor_halfwidth = num(v)?,
            ("analysis", "sweep") => {
                self.analysis.sweep = if v.is_empty() { Vec::new() } else { parse_list(v)? }
            }
            _ => return Err(format!("unknown key '{key}' in section [{section}]")),
        }
        Ok(())
    }

    /// Canonical text of one key.
    pub fn get(&self, section: &str, key: &str) -> Option<String> {
        let m = &self.modulator;
        Some(match (section, key) {
            ("run", "name") => self.name.clone(),
            ("run", "description") => self.description.clone(),
            ("run", "seed") => self.seed.to_string(),
            ("run", "out_dir") => self.out_dir.clone().unwrap_or_default(),
            ("modulator", "order") => m.order.to_string(),
            ("modulator", "osr") => m.osr.to_string(),
            ("modulator", "bits") => m.bits.to_string(),
            ("modulator", "full_scale") => m.full_scale.to_string(),
            ("modulator", "denominator") => opt_list(&m.denominator),
            ("modulator", "truncation") => m.truncation.to_string(),
            ("modulator", "dither") => m.dither.to_string(),
            ("dac", "paths") => self.dac.paths.to_string(),
            ("dac", "mode") => self.dac.mode.name().to_owned(),
            ("mismatch", "gains") => opt_list(&self.mismatch.gains),
            ("mismatch", "offsets") => opt_list(&self.mismatch.offsets),
            ("mismatch", "gain_range") => opt_num(self.mismatch.gain.range),
            ("mismatch", "gain_std") => opt_num(self.mismatch.gain.std),
            ("mismatch", "offset_range") => opt_num(self.mismatch.offset.range),
            ("mismatch", "offset_std") => opt_num(self.mismatch.offset.std),
            ("pulse", "shape") => self.pulse.shape.name().to_owned(),
            ("pulse", "slew_rate") => self.pulse.slew_rate.to_string(),
            ("pulse", "tau") => self.pulse.tau.to_string(),
            ("pulse", "range") => opt_num(self.pulse.deviation.range),
            ("pulse", "std") => opt_num(self.pulse.deviation.std),
            ("pulse", "split") => self.pulse.split.to_string(),
            ("input", "amplitude_dbfs") => self.input.amplitude_dbfs.to_string(),
            ("input", "bin") => self.input.bin.to_string(),
            ("analysis", "samples") => self.analysis.samples.to_string(),
            ("analysis", "oversample") => self.analysis.oversample.to_string(),
            ("analysis", "domain") => self.analysis.domain.name().to_owned(),
            ("analysis", "window") => self.analysis.window.name().to_owned(),
            ("analysis", "floor_halfwidth") => self.analysis.floor_halfwidth.to_string(),
            ("analysis", "sweep") => list(&self.analysis.sweep),
            _ => return None,
        })
    }

    /// Number of unit elements in the bank.
    pub fn elements(&self) -> usize {
        let m = self.dac.paths;
        let d = (1usize << self.modulator.bits.min(16)) - 1;
        match self.dac.mode {
            Mode::Single => 1,
            Mode::PhaseAssigned | Mode::MultibitDwa => m * d,
            Mode::Dwa => m,
            Mode::Rz => m + 1,
        }
    }

    pub fn quantizer(&self) -> Result<Quantizer> {
        Quantizer::new(self.modulator.bits, self.modulator.full_scale)
    }

    /// Checks everything a run needs, short of simulating.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let m = &self.modulator;
        design_loop_filter(m.order, m.denominator.as_deref(), m.truncation)?;
        self.quantizer()?;
        if !(m.osr > 1.0) {
            return bad(format!("OSR {} must exceed 1", m.osr));
        }
        if !(m.dither >= 0.0) {
            return bad("dither amplitude must be non-negative".into());
        }
        let paths = self.dac.paths;
        if paths == 0 {
            return bad("dac.paths must be at least 1".into());
        }
        match self.dac.mode {
            Mode::Single if paths != 1 => return bad("single mode requires dac.paths = 1".into()),
            Mode::Dwa | Mode::Rz if m.bits != 1 => {
                return bad(format!("{} mode requires a single-bit quantizer (bits = 1)", self.dac.mode.name()))
            }
            Mode::MultibitDwa if m.bits < 2 => return bad("multibit-dwa mode requires bits >= 2".into()),
            _ => {}
        }
        let a = &self.analysis;
        if a.samples < 64 || !a.samples.is_multiple_of(paths) {
            return bad(format!("analysis.samples = {} must be at least 64 and a multiple of dac.paths", a.samples));
        }
        if a.domain == Domain::Analog && a.oversample < 2 {
            return bad("analysis.oversample must be at least 2 for the analog domain".into());
        }
        if a.sweep.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("analysis.sweep must be strictly ascending".into());
        }
        let edge_bin = a.samples as f64 / (2.0 * m.osr);
        let bin = self.input.bin;
        if bin == 0 || bin as f64 >= edge_bin {
            return bad(format!("input.bin = {bin} must lie inside the signal band (below bin {edge_bin})"));
        }
        if bin <= a.window.tone_halfwidth() {
            return bad("input.bin overlaps the DC bins".into());
        }
        if self.input.amplitude_dbfs > 0.0 {
            return bad("input.amplitude_dbfs must not exceed 0".into());
        }
        let p = &self.pulse;
        if p.shape != PulseShape::Ideal && !(p.tau >= 0.0 && p.slew_rate > 0.0) {
            return bad("pulse.tau must be >= 0 and pulse.slew_rate > 0".into());
        }
        if !(p.split > -1.0 && p.split < 1.0) {
            return bad("pulse.split must lie in (-1, 1)".into());
        }
        let params = gen_mismatch(self.seed, &self.mismatch, &self.pulse, self.elements(), m.full_scale)?;
        for e in &params {
            e.validate()?;
        }
        Ok(())
    }

    /// Canonical text of the whole configuration.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (section, key) in KEYS {
            if *section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let v = self.get(section, key).unwrap_or_default();
            if v.is_empty() {
                let _ = writeln!(out, "{key} =");
            } else {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }
}

/// One `section.key = value` override inside a case.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseDef {
    pub name: String,
    pub overrides: Vec<Override>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// File path or bundled name, used in error messages.
    pub origin: String,
    pub base: CaseConfig,
    pub cases: Vec<CaseDef>,
}

fn valid_case_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl Scenario {
    pub fn parse(text: &str, origin: &str) -> Result<Scenario> {
        let err = |line: usize, msg: String| Error::Parse {
            path: origin.to_owned(),
            line,
            msg,
        };
        let mut base = CaseConfig::default();
        let mut cases: Vec<CaseDef> = Vec::new();
        // None: before any header; Some(Ok(section)) or Some(Err(case index))
        let mut ctx: Option<std::result::Result<String, usize>> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if let Some(header) = s.strip_prefix('[') {
                let header = header
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, "unterminated section header".into()))?
                    .trim();
                if let Some(name) = header.strip_prefix("case ") {
                    let name = name.trim();
                    if !valid_case_name(name) {
                        return Err(err(line, format!("invalid case name '{name}' (letters, digits, '-', '_')")));
                    }
                    if cases.iter().any(|c| c.name == name) {
                        return Err(err(line, format!("duplicate case '{name}'")));
                    }
                    cases.push(CaseDef {
                        name: name.to_owned(),
                        overrides: Vec::new(),
                    });
                    ctx = Some(Err(cases.len() - 1));
                } else if KEYS.iter().any(|(sec, _)| *sec == header) {
                    if matches!(ctx, Some(Err(_))) {
                        return Err(err(line, format!("section [{header}] after a case; put base sections first")));
                    }
                    ctx = Some(Ok(header.to_owned()));
                } else {
                    return Err(err(line, format!("unknown section [{header}]")));
                }
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected 'key = value', found '{s}'")))?;
            let (key, value) = (key.trim(), value.trim());
            match &ctx {
                None => return Err(err(line, "key outside of any section".into())),
                Some(Ok(section)) => base.set(section, key, value).map_err(|m| err(line, m))?,
                Some(Err(idx)) => {
                    let (section, k) = key
                        .split_once('.')
                        .ok_or_else(|| err(line, format!("case overrides take the form section.key, found '{key}'")))?;
                    if !KEYS.contains(&(section, k)) {
                        return Err(err(line, format!("unknown key '{k}' in section [{section}]")));
                    }
                    if (section, k) == ("run", "name") {
                        return Err(err(line, "cases cannot rename the scenario".into()));
                    }
                    cases[*idx].overrides.push(Override {
                        section: section.to_owned(),
                        key: k.to_owned(),
                        value: value.to_owned(),
                        line,
                    });
                }
            }
        }
        let scenario = Scenario {
            origin: origin.to_owned(),
            base,
            cases,
        };
        scenario.configs()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Scenario::parse(&text, &path.display().to_string())
    }

    pub fn name(&self) -> &str {
        &self.base.name
    }

    /// Resolved configuration of every case, in file order.
    pub fn configs(&self) -> Result<Vec<CaseConfig>> {
        if self.cases.is_empty() {
            let mut c = self.base.clone();
            c.name = "base".into();
            return Ok(vec![c]);
        }
        self.cases
            .iter()
            .map(|case| {
                let mut c = self.base.clone();
                for o in &case.overrides {
                    c.set(&o.section, &o.key, &o.value).map_err(|msg| Error::Parse {
                        path: self.origin.clone(),
                        line: o.line,
                        msg,
                    })?;
                }
                c.name = case.name.clone();
                Ok(c)
            })
            .collect()
    }

    /// Sets a key in the base and in every case that overrides it.
    pub fn set_all(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        self.base
            .set(section, key, value)
            .map_err(|m| Error::Config(format!("{section}.{key}: {m}")))?;
        for case in &mut self.cases {
            for o in case.overrides.iter_mut().filter(|o| o.section == section && o.key == key) {
                o.value = value.to_owned();
            }
        }
        self.configs().map(|_| ())
    }

    /// Validates every case; errors name the offending case.
    pub fn validate(&self) -> Result<()> {
        for c in self.configs()? {
            c.validate().map_err(|e| e.in_case(&c.name))?;
        }
        Ok(())
    }

    /// Canonical text: every base key, then each case's overrides in
    /// normalized form.
    pub fn canonical(&self) -> String {
        let mut out = self.base.canonical();
        let configs = self.configs().unwrap_or_default();
        for (case, cfg) in self.cases.iter().zip(&configs) {
            let _ = write!(out, "\n[case {}]\n", case.name);
            let mut seen: Vec<(&str, &str)> = Vec::new();
            for o in case.overrides.iter().rev() {
                let k = (o.section.as_str(), o.key.as_str());
                if !seen.contains(&k) {
                    seen.push(k);
                }
            }
            for (section, key) in KEYS.iter().filter(|k| seen.contains(k)) {
                let v = cfg.get(section, key).unwrap_or_default();
                if v.is_empty() {
                    let _ = writeln!(out, "{section}.{key} =");
                } else {
                    let _ = writeln!(out, "{section}.{key} = {v}");
                }
            }
        }
        out
    }
}
