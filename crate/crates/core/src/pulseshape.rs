//! Behavioral edge model of the DAC output stage.
//!
//! The shaping stage is a saturated integrator in a unity feedback loop: with
//! error `v_e = target - v`, the output obeys `dv/dt = v_e / tau` while
//! `|v_e| < V_o` and slews at `SR = V_o / tau` otherwise. Each sub-step is
//! integrated in closed form (linear slew segment, then exponential settling),
//! so waveforms carry no numerical ODE error. Rising and falling transitions
//! use separate `(tau, SR)` pairs.

use crate::dacbank::{element_levels, ActivationSchedule, ElementParams};
use crate::error::{Error, Result};

/// Default sub-samples per high-rate tick.
pub const DEFAULT_OVERSAMPLE: usize = 16;

/// Edge parameters in seconds and volts per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeParams {
    pub tau_p: f64,
    pub tau_n: f64,
    pub sr_p: f64,
    pub sr_n: f64,
}

impl ShapeParams {
    /// Rectangular edges.
    pub const IDEAL: ShapeParams = ShapeParams {
        tau_p: 0.0,
        tau_n: 0.0,
        sr_p: f64::INFINITY,
        sr_n: f64::INFINITY,
    };

    /// Same `(tau, SR)` for both directions.
    pub fn symmetric(tau: f64, slew_rate: f64) -> Self {
        ShapeParams {
            tau_p: tau,
            tau_n: tau,
            sr_p: slew_rate,
            sr_n: slew_rate,
        }
    }

    /// Parameterizes by time constant and saturation level, `SR = V_o / tau`.
    pub fn from_saturation(tau: f64, v_o: f64) -> Self {
        Self::symmetric(tau, v_o / tau)
    }

    pub fn from_element(p: &ElementParams) -> Self {
        ShapeParams {
            tau_p: p.tau_p,
            tau_n: p.tau_n,
            sr_p: p.sr_p,
            sr_n: p.sr_n,
        }
    }

    /// Integrator saturation level `V_o = SR tau` for a rising or falling edge.
    pub fn saturation(&self, rising: bool) -> f64 {
        let (tau, sr) = if rising {
            (self.tau_p, self.sr_p)
        } else {
            (self.tau_n, self.sr_n)
        };
        if tau == 0.0 {
            0.0
        } else {
            sr * tau
        }
    }

    pub fn is_ideal(&self) -> bool {
        self.tau_p == 0.0 && self.tau_n == 0.0 && self.sr_p.is_infinite() && self.sr_n.is_infinite()
    }
}

/// Edge parameters rescaled to ticks (time unit `T_H`).
#[derive(Debug, Clone, Copy)]
struct TickEdges {
    tau: [f64; 2],
    sr: [f64; 2],
    v_o: [f64; 2],
}

impl TickEdges {
    fn new(sp: &ShapeParams, f_h: f64) -> Self {
        let tau = [sp.tau_n * f_h, sp.tau_p * f_h];
        let sr = [sp.sr_n / f_h, sp.sr_p / f_h];
        TickEdges {
            tau,
            sr,
            v_o: [sp.saturation(false), sp.saturation(true)],
        }
    }

    /// Advances `v` toward `target` for `dt` ticks. Returns the end value and
    /// the exact integral of `v` over the interval.
    fn settle(&self, v: f64, target: f64, dt: f64) -> (f64, f64) {
        let diff = target - v;
        if diff == 0.0 {
            return (v, v * dt);
        }
        let dir = usize::from(diff > 0.0);
        let sign = diff.signum();
        let (tau, sr, v_o) = (self.tau[dir], self.sr[dir], self.v_o[dir]);
        let mut v = v;
        let mut rem = dt;
        let mut area = 0.0;
        if diff.abs() > v_o {
            let t_s = (diff.abs() - v_o) / sr;
            if t_s >= rem {
                let end = v + sign * sr * rem;
                return (end, 0.5 * (v + end) * rem);
            }
            let end = target - sign * v_o;
            area += 0.5 * (v + end) * t_s;
            v = end;
            rem -= t_s;
        }
        if tau == 0.0 {
            return (target, area + target * rem);
        }
        let decay = (-rem / tau).exp();
        let gap = v - target;
        let end = target + gap * decay;
        area += target * rem + gap * tau * (1.0 - decay);
        (end, area)
    }
}

/// Densely sampled analog waveform, `oversample` points per high-rate tick.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogWaveform {
    /// Sample rate, `oversample * f_H`.
    pub rate: f64,
    pub oversample: usize,
    pub ticks: usize,
    /// Sample `j` is taken at the end of sub-step `j`.
    pub samples: Vec<f64>,
}

impl AnalogWaveform {
    /// Samples at the end of every tick.
    pub fn at_tick_ends(&self) -> Vec<f64> {
        self.samples
            .iter()
            .skip(self.oversample - 1)
            .step_by(self.oversample)
            .copied()
            .collect()
    }

    /// Sub-range covering ticks `start..start + len`.
    pub fn ticks_range(&self, start: usize, len: usize) -> AnalogWaveform {
        let k = self.oversample;
        AnalogWaveform {
            rate: self.rate,
            oversample: k,
            ticks: len,
            samples: self.samples[start * k..(start + len) * k].to_vec(),
        }
    }
}

fn check_oversample(oversample: usize) -> Result<()> {
    if oversample < 2 {
        return Err(Error::Config(format!("oversampling factor {oversample} must be at least 2")));
    }
    Ok(())
}

/// Shapes one element's per-tick target levels. Targets change exactly at
/// tick starts; the output starts settled at the first target.
pub fn shape_element(levels: &[f64], sp: &ShapeParams, f_h: f64, oversample: usize) -> Result<AnalogWaveform> {
    check_oversample(oversample)?;
    let edges = TickEdges::new(sp, f_h);
    let dt = 1.0 / oversample as f64;
    let mut v = levels.first().copied().unwrap_or(0.0);
    let mut samples = Vec::with_capacity(levels.len() * oversample);
    for &target in levels {
        for _ in 0..oversample {
            v = edges.settle(v, target, dt).0;
            samples.push(v);
        }
    }
    Ok(AnalogWaveform {
        rate: f_h * oversample as f64,
        oversample,
        ticks: levels.len(),
        samples,
    })
}

/// Shapes every element (gain and offset included) and sums them.
pub fn render_analog(
    schedule: &ActivationSchedule,
    params: &[ElementParams],
    v_s: f64,
    f_h: f64,
    oversample: usize,
) -> Result<AnalogWaveform> {
    check_oversample(oversample)?;
    if params.len() != schedule.elements() {
        return Err(Error::Config(format!(
            "{} element parameter sets for {} elements",
            params.len(),
            schedule.elements()
        )));
    }
    let mut total = vec![0.0; schedule.ticks * oversample];
    for (m, p) in params.iter().enumerate() {
        let levels = element_levels(schedule, m, p, v_s);
        let wave = shape_element(&levels, &ShapeParams::from_element(p), f_h, oversample)?;
        for (t, s) in total.iter_mut().zip(&wave.samples) {
            *t += s;
        }
    }
    Ok(AnalogWaveform {
        rate: f_h * oversample as f64,
        oversample,
        ticks: schedule.ticks,
        samples: total,
    })
}

/// Exact area error (volt-seconds) of an isolated pulse of `width` ticks from
/// `-v_s` to `+v_s`, integrated until `tail` ticks after the falling edge.
pub fn isolated_pulse_area_error(sp: &ShapeParams, v_s: f64, f_h: f64, width: usize, tail: usize) -> f64 {
    let edges = TickEdges::new(sp, f_h);
    let mut v = -v_s;
    let mut err = 0.0;
    for n in 0..width + tail {
        let target = if n < width { v_s } else { -v_s };
        let (end, area) = edges.settle(v, target, 1.0);
        err += area - target;
        v = end;
    }
    err / f_h
}

/// Area error relative to the ideal pulse area `2 v_s width / f_H`.
pub fn relative_pulse_area_error(sp: &ShapeParams, v_s: f64, f_h: f64, width: usize, tail: usize) -> f64 {
    isolated_pulse_area_error(sp, v_s, f_h, width, tail) / (2.0 * v_s * width as f64 / f_h)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FH: f64 = 1.0;

    #[test]
    fn linear_step_response() {
        // V_o >= 2 V_S: no slew limiting
        let sp = ShapeParams::from_saturation(0.5, 2.5);
        let w = shape_element(&[-1.0, 1.0, 1.0, 1.0], &sp, FH, 8).unwrap();
        for (j, v) in w.samples[8..].iter().enumerate() {
            let t = (j + 1) as f64 / 8.0;
            let expect = 1.0 - 2.0 * (-t / 0.5).exp();
            assert!((v - expect).abs() < 1e-14, "t={t}: {v} vs {expect}");
        }
    }

    #[test]
    fn slewing_then_exponential() {
        // SR = 1.5 V/tick, V_o = 0.75: slews for (2 - 0.75) / 1.5 ticks
        let sp = ShapeParams::symmetric(0.5, 1.5);
        let k = 64;
        let w = shape_element(&[-1.0, 1.0, 1.0], &sp, FH, k).unwrap();
        let t_s = 1.25 / 1.5;
        for j in 0..2 * k {
            let t = (j + 1) as f64 / k as f64;
            let v = w.samples[k + j];
            let expect = if t <= t_s {
                -1.0 + 1.5 * t
            } else {
                1.0 - 0.75 * (-(t - t_s) / 0.5).exp()
            };
            assert!((v - expect).abs() < 1e-13, "t={t}");
        }
    }

    #[test]
    fn ideal_edges_are_rectangular() {
        let levels = [-1.0, 1.0, 1.0, -1.0, 1.0, -1.0];
        let w = shape_element(&levels, &ShapeParams::IDEAL, FH, 4).unwrap();
        for (n, l) in levels.iter().enumerate() {
            assert!(w.samples[n * 4..n * 4 + 4].iter().all(|v| v == l));
        }
        let tiny = ShapeParams::symmetric(1e-9, 1e12);
        let w2 = shape_element(&levels, &tiny, FH, 4).unwrap();
        for (a, b) in w.samples.iter().zip(&w2.samples) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn asymmetric_directions() {
        let sp = ShapeParams {
            tau_p: 0.5,
            tau_n: 0.25,
            sr_p: f64::INFINITY,
            sr_n: f64::INFINITY,
        };
        let w = shape_element(&[0.0, 1.0, 0.0], &sp, FH, 2).unwrap();
        assert!((w.samples[3] - (1.0 - (-2.0f64).exp())).abs() < 1e-14);
        let start = 1.0 - (-2.0f64).exp();
        assert!((w.samples[5] - start * (-4.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn settle_area_matches_fine_sum() {
        let sp = ShapeParams::symmetric(0.5, 1.5);
        let edges = TickEdges::new(&sp, FH);
        let (_, area) = edges.settle(-1.0, 1.0, 1.0);
        let k = 200_000;
        let w = shape_element(&[-1.0, 1.0], &sp, FH, k).unwrap();
        let riemann: f64 = w.samples[k..].iter().sum::<f64>() / k as f64;
        assert!((area - riemann).abs() < 1e-5);
    }

    #[test]
    fn oversample_must_be_at_least_two() {
        assert!(shape_element(&[0.0], &ShapeParams::IDEAL, FH, 1).is_err());
    }

    #[test]
    fn symmetric_linear_pulse_has_no_area_error() {
        let sp = ShapeParams::from_saturation(0.2, 10.0);
        let err = isolated_pulse_area_error(&sp, 1.0, FH, 3, 60);
        assert!(err.abs() < 1e-12);
    }
}
