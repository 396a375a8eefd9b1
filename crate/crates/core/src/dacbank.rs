//! Bank of low-rate DACs summed by an analog adder.
//!
//! Each element converts to `+unit` while in duty and `-unit` while idle, where
//! `unit = V_S` for single-bit operation and `V_S / (2^d - 1)` for unit
//! elements of a `d`-bit thermometric DAC. Every duty pulse lasts `M` high-rate
//! ticks (`T_L = M T_H`). Element `m` is modelled as `g_m * level + V_off,m`.

use crate::error::{Error, Result};
use crate::modulator::CodeStream;

/// Static and dynamic parameters of one DAC element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementParams {
    pub gain: f64,
    pub offset: f64,
    /// Rising (idle to duty) time constant, seconds.
    pub tau_p: f64,
    /// Falling time constant, seconds.
    pub tau_n: f64,
    /// Rising slew rate, volts per second.
    pub sr_p: f64,
    pub sr_n: f64,
}

impl ElementParams {
    /// Unit gain, no offset, rectangular edges.
    pub const IDEAL: ElementParams = ElementParams {
        gain: 1.0,
        offset: 0.0,
        tau_p: 0.0,
        tau_n: 0.0,
        sr_p: f64::INFINITY,
        sr_n: f64::INFINITY,
    };

    pub fn with_gain_offset(gain: f64, offset: f64) -> Self {
        ElementParams {
            gain,
            offset,
            ..Self::IDEAL
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::Config(format!("element gain {} must be positive", self.gain)));
        }
        if !(self.tau_p >= 0.0 && self.tau_n >= 0.0) {
            return Err(Error::Config("time constants must be non-negative".into()));
        }
        if !(self.sr_p > 0.0 && self.sr_n > 0.0) {
            return Err(Error::Config("slew rates must be positive".into()));
        }
        Ok(())
    }
}

impl Default for ElementParams {
    fn default() -> Self {
        Self::IDEAL
    }
}

/// Element selection policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// One DAC clocked at the high rate (pulse width `T_H`).
    Single,
    /// DAC `p` converts low-rate stream `Y_p` on clock phase `p`.
    PhaseAssigned,
    /// Rotating pointer over `M` single-bit elements.
    Dwa,
    /// Rotating pointer over `M (2^d - 1)` shared unit elements.
    MultibitDwa,
    /// Rotating pointer over `M + 1` elements; every pulse returns to idle.
    Rz,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::PhaseAssigned => "phase",
            Mode::Dwa => "dwa",
            Mode::MultibitDwa => "multibit-dwa",
            Mode::Rz => "rz",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        Some(match s {
            "single" => Mode::Single,
            "phase" | "phase-assigned" => Mode::PhaseAssigned,
            "dwa" => Mode::Dwa,
            "multibit-dwa" => Mode::MultibitDwa,
            "rz" => Mode::Rz,
            _ => return None,
        })
    }
}

/// Duty intervals for every element of the bank.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSchedule {
    pub mode: Mode,
    /// Pulse width in high-rate ticks.
    pub duty_len: usize,
    pub ticks: usize,
    /// `2^d - 1` for unit-element banks, 1 for single-bit DACs.
    pub unit_divisor: u32,
    /// Sorted duty start ticks per element.
    pub starts: Vec<Vec<usize>>,
}

impl ActivationSchedule {
    pub fn elements(&self) -> usize {
        self.starts.len()
    }

    /// Per-element output magnitude for a full scale of `v_s`.
    pub fn unit_level(&self, v_s: f64) -> f64 {
        v_s / self.unit_divisor as f64
    }

    /// `true` at every tick where `element` is in duty.
    pub fn duty_mask(&self, element: usize) -> Vec<bool> {
        let mut mask = vec![false; self.ticks];
        for &s in &self.starts[element] {
            let end = (s + self.duty_len).min(self.ticks);
            mask[s.min(self.ticks)..end].iter_mut().for_each(|b| *b = true);
        }
        mask
    }

    /// Number of elements in duty at each tick.
    pub fn duty_count(&self) -> Vec<usize> {
        let mut diff = vec![0isize; self.ticks + 1];
        for starts in &self.starts {
            for &s in starts {
                if s < self.ticks {
                    diff[s] += 1;
                    diff[(s + self.duty_len).min(self.ticks)] -= 1;
                }
            }
        }
        let mut acc = 0isize;
        diff[..self.ticks]
            .iter()
            .map(|d| {
                acc += d;
                acc as usize
            })
            .collect()
    }

    pub fn trigger_counts(&self) -> Vec<usize> {
        self.starts.iter().map(Vec::len).collect()
    }

    /// Checks that no element holds two overlapping duty intervals.
    pub fn validate(&self) -> Result<()> {
        for (element, starts) in self.starts.iter().enumerate() {
            for w in starts.windows(2) {
                if w[1] < w[0] + self.duty_len {
                    return Err(Error::Collision {
                        element,
                        tick: w[1],
                        busy_until: w[0] + self.duty_len,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Pointer automaton shared by the rotating schedules.
struct Rotation {
    elements: usize,
    duty_len: usize,
    pointer: usize,
    busy_until: Vec<usize>,
    starts: Vec<Vec<usize>>,
}

impl Rotation {
    fn new(elements: usize, duty_len: usize) -> Self {
        Rotation {
            elements,
            duty_len,
            pointer: 0,
            busy_until: vec![0; elements],
            starts: vec![Vec::new(); elements],
        }
    }

    /// Triggers `count` consecutive elements at `tick` and advances the pointer.
    fn fire(&mut self, tick: usize, count: usize) -> Result<()> {
        for _ in 0..count {
            let e = self.pointer;
            if self.busy_until[e] > tick {
                return Err(Error::Collision {
                    element: e,
                    tick,
                    busy_until: self.busy_until[e],
                });
            }
            self.busy_until[e] = tick + self.duty_len;
            self.starts[e].push(tick);
            self.pointer = (self.pointer + 1) % self.elements;
        }
        Ok(())
    }
}

fn require_single_bit(stream: &CodeStream, what: &str) -> Result<()> {
    if stream.quantizer.bits() != 1 {
        return Err(Error::Config(format!(
            "{what} requires a single-bit stream, got {} bits",
            stream.quantizer.bits()
        )));
    }
    Ok(())
}

/// Element `p` converts `Y_p`, starting an `M`-tick interval at `p, p + M, ...`.
///
/// Multibit streams use a private thermometric bank of `2^d - 1` unit elements
/// per DAC (elements `p D .. p D + D`), always filled from the first element.
pub fn phase_assigned_schedule(streams: &[CodeStream]) -> Result<ActivationSchedule> {
    let m = streams.len();
    if m == 0 {
        return Err(Error::Config("at least one low-rate stream required".into()));
    }
    let len = streams[0].len();
    let q = streams[0].quantizer;
    if streams.iter().any(|s| s.len() != len || s.quantizer != q) {
        return Err(Error::Config("low-rate streams must share length and quantizer".into()));
    }
    let d = q.max_code() as usize;
    let mut starts = vec![Vec::new(); m * d];
    for (p, s) in streams.iter().enumerate() {
        for (j, &code) in s.codes.iter().enumerate() {
            for k in 0..code as usize {
                starts[p * d + k].push(j * m + p);
            }
        }
    }
    Ok(ActivationSchedule {
        mode: if m == 1 { Mode::Single } else { Mode::PhaseAssigned },
        duty_len: m,
        ticks: len * m,
        unit_divisor: q.max_code(),
        starts,
    })
}

/// Single DAC clocked at the high rate: one element, pulse width one tick.
pub fn single_dac_schedule(y: &CodeStream) -> Result<ActivationSchedule> {
    phase_assigned_schedule(std::slice::from_ref(y))
}

fn rotating(y: &CodeStream, elements: usize, duty_len: usize, mode: Mode) -> Result<ActivationSchedule> {
    let mut rot = Rotation::new(elements, duty_len);
    for (tick, &code) in y.codes.iter().enumerate() {
        rot.fire(tick, code as usize)?;
    }
    Ok(ActivationSchedule {
        mode,
        duty_len,
        ticks: y.len(),
        unit_divisor: y.quantizer.max_code(),
        starts: rot.starts,
    })
}

/// Single-bit rotation over `elements` DACs (normally `M`).
///
/// Every logic one triggers the element at the pointer for `M` ticks and
/// advances the pointer modulo the element count.
pub fn dwa_schedule(y: &CodeStream, paths: usize, elements: usize) -> Result<ActivationSchedule> {
    require_single_bit(y, "DWA")?;
    if paths == 0 || elements == 0 {
        return Err(Error::Config("paths and elements must be positive".into()));
    }
    rotating(y, elements, paths, Mode::Dwa)
}

/// Multibit rotation: `y(n)` consecutive elements of the shared
/// `M (2^d - 1)`-element bank fire together at tick `n`.
pub fn dwa_schedule_multibit(y: &CodeStream, paths: usize) -> Result<ActivationSchedule> {
    if y.quantizer.bits() < 2 {
        return Err(Error::Config("multibit DWA requires at least 2 bits".into()));
    }
    if paths == 0 {
        return Err(Error::Config("paths must be positive".into()));
    }
    let elements = paths * y.quantizer.max_code() as usize;
    rotating(y, elements, paths, Mode::MultibitDwa)
}

/// Return-to-idle rotation over `M + 1` elements.
pub fn rz_schedule(y: &CodeStream, paths: usize) -> Result<ActivationSchedule> {
    require_single_bit(y, "RZ")?;
    if paths == 0 {
        return Err(Error::Config("paths must be positive".into()));
    }
    rotating(y, paths + 1, paths, Mode::Rz)
}

/// Per-tick target level of one element, including its gain and offset.
pub fn element_levels(
    schedule: &ActivationSchedule,
    element: usize,
    params: &ElementParams,
    v_s: f64,
) -> Vec<f64> {
    let unit = schedule.unit_level(v_s);
    let hi = params.gain * unit + params.offset;
    let lo = -params.gain * unit + params.offset;
    schedule
        .duty_mask(element)
        .into_iter()
        .map(|on| if on { hi } else { lo })
        .collect()
}

/// Ideal sampled output of the analog adder, one value per high-rate tick.
pub fn render_dt(schedule: &ActivationSchedule, params: &[ElementParams], v_s: f64) -> Result<Vec<f64>> {
    if params.len() != schedule.elements() {
        return Err(Error::Config(format!(
            "{} element parameter sets for {} elements",
            params.len(),
            schedule.elements()
        )));
    }
    let mut out = vec![0.0; schedule.ticks];
    for (m, p) in params.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(element_levels(schedule, m, p, v_s)) {
            *o += v;
        }
    }
    Ok(out)
}
