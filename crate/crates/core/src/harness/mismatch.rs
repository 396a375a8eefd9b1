//! Seeded element-parameter draws.
//!
//! Draws come from ChaCha8 (`rand_chacha`) seeded with `seed_from_u64(seed)`
//! on stream 0. Each element consumes exactly six uniform values on `[-1, 1)`
//! in the order gain, offset, `tau_p`, `tau_n`, `SR_p`, `SR_n`, whether or not
//! they are used. A bank of `n + 1` elements therefore starts with the same `n`
//! parameter sets as a bank of `n`, and switching one component on or off does
//! not shift the others.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dacbank::ElementParams;
use crate::error::{Error, Result};

use super::scenario::{MismatchSpec, PulseShape, PulseSpec};

/// Stream id of the mismatch generator.
pub const MISMATCH_STREAM: u64 = 0;

const DRAWS_PER_ELEMENT: usize = 6;

/// Relative consistency required when both range and std are given.
const SPREAD_TOLERANCE: f64 = 0.01;

/// Zero-mean uniform spread, given by its half-width `range` or its standard
/// deviation `std = range / sqrt(3)`, or both if they agree within 1 %.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Spread {
    pub range: Option<f64>,
    pub std: Option<f64>,
}

impl Spread {
    pub fn uniform(range: f64) -> Self {
        Spread {
            range: Some(range),
            std: None,
        }
    }

    pub fn with_std(std: f64) -> Self {
        Spread {
            range: None,
            std: Some(std),
        }
    }

    /// Half-width of the uniform distribution.
    pub fn half_width(&self) -> Result<f64> {
        let from_std = self.std.map(|s| s * 3f64.sqrt());
        let hw = match (self.range, from_std) {
            (None, None) => 0.0,
            (Some(r), None) => r,
            (None, Some(s)) => s,
            (Some(r), Some(s)) => {
                if (r - s).abs() > SPREAD_TOLERANCE * r.abs().max(s.abs()) {
                    return Err(Error::Config(format!(
                        "range {r} and std {} disagree: a uniform range of {r} has std {}",
                        self.std.unwrap_or_default(),
                        r / 3f64.sqrt()
                    )));
                }
                r
            }
        };
        if !(hw >= 0.0 && hw.is_finite()) {
            return Err(Error::Config(format!("spread {hw} must be finite and non-negative")));
        }
        Ok(hw)
    }
}

fn explicit(v: &Option<Vec<f64>>, what: &str, elements: usize) -> Result<()> {
    match v {
        Some(v) if v.len() != elements => Err(Error::Config(format!(
            "{} explicit {what} for a bank of {elements} elements",
            v.len()
        ))),
        _ => Ok(()),
    }
}

/// Parameter sets for `elements` elements. `v_s` scales offsets and slew
/// rates; `f_H` is normalized to 1, so time constants are in ticks.
pub fn gen_mismatch(
    seed: u64,
    spec: &MismatchSpec,
    pulse: &PulseSpec,
    elements: usize,
    v_s: f64,
) -> Result<Vec<ElementParams>> {
    explicit(&spec.gains, "gains", elements)?;
    explicit(&spec.offsets, "offsets", elements)?;
    let hg = spec.gain.half_width()?;
    let ho = spec.offset.half_width()?;
    let hs = pulse.deviation.half_width()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(MISMATCH_STREAM);

    let tau = pulse.tau;
    let sr = pulse.slew_rate * v_s;
    let mut out = Vec::with_capacity(elements);
    for i in 0..elements {
        let mut u = [0.0; DRAWS_PER_ELEMENT];
        for d in &mut u {
            *d = rng.gen::<f64>() * 2.0 - 1.0;
        }
        let gain = match &spec.gains {
            Some(g) => g[i],
            None => 1.0 + hg * u[0],
        };
        let offset = v_s
            * match &spec.offsets {
                Some(o) => o[i],
                None => ho * u[1],
            };
        let (tau_p, tau_n, sr_p, sr_n) = match pulse.shape {
            PulseShape::Ideal => (0.0, 0.0, f64::INFINITY, f64::INFINITY),
            PulseShape::Nominal => (tau, tau, sr, sr),
            PulseShape::Split => (tau, tau * (1.0 + pulse.split), sr, sr * (1.0 - pulse.split)),
            PulseShape::Random => (
                tau * (1.0 + hs * u[2]),
                tau * (1.0 + hs * u[3]),
                sr * (1.0 + hs * u[4]),
                sr * (1.0 + hs * u[5]),
            ),
        };
        out.push(ElementParams {
            gain,
            offset,
            tau_p,
            tau_n,
            sr_p,
            sr_n,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pulse(shape: PulseShape) -> PulseSpec {
        PulseSpec {
            shape,
            slew_rate: 1.5,
            tau: 0.5,
            deviation: Spread::with_std(0.05),
            split: 0.05,
        }
    }

    #[test]
    fn range_and_std_conversions() {
        let s = Spread::uniform(0.09);
        assert_eq!(s.half_width().unwrap(), 0.09);
        let std = 0.09 / 3f64.sqrt();
        assert!((std - 0.05196).abs() < 1e-5);
        let both = Spread {
            range: Some(0.09),
            std: Some(0.052),
        };
        assert!((both.half_width().unwrap() - 0.09).abs() < 1e-15);
        let four = Spread::uniform(0.07);
        assert!((four.range.unwrap() / 3f64.sqrt() - 0.0404).abs() < 1e-4);
        let bad = Spread {
            range: Some(0.09),
            std: Some(0.04),
        };
        assert!(bad.half_width().is_err());
    }

    #[test]
    fn deterministic_and_bounded() {
        let spec = MismatchSpec {
            gain: Spread::uniform(0.09),
            offset: Spread::uniform(0.09),
            ..Default::default()
        };
        let a = gen_mismatch(5, &spec, &pulse(PulseShape::Ideal), 4, 1.0).unwrap();
        let b = gen_mismatch(5, &spec, &pulse(PulseShape::Ideal), 4, 1.0).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|e| (e.gain - 1.0).abs() <= 0.09 && e.offset.abs() <= 0.09));
        let c = gen_mismatch(6, &spec, &pulse(PulseShape::Ideal), 4, 1.0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn five_element_draw_extends_four() {
        let spec = MismatchSpec::default();
        let four = gen_mismatch(3, &spec, &pulse(PulseShape::Random), 4, 1.0).unwrap();
        let five = gen_mismatch(3, &spec, &pulse(PulseShape::Random), 5, 1.0).unwrap();
        assert_eq!(&five[..4], &four[..]);
        for e in &five {
            assert!((e.tau_p / 0.5 - 1.0).abs() <= 0.05 * 3f64.sqrt() + 1e-12);
            assert!((e.sr_n / 1.5 - 1.0).abs() <= 0.05 * 3f64.sqrt() + 1e-12);
        }
    }

    #[test]
    fn explicit_vectors_bypass_generation() {
        let spec = MismatchSpec {
            gains: Some(vec![1.07, 0.93, 0.98, 0.96]),
            offsets: Some(vec![0.05, -0.01, 0.07, -0.06]),
            gain: Spread::uniform(0.5),
            ..Default::default()
        };
        let p = gen_mismatch(0, &spec, &pulse(PulseShape::Ideal), 4, 1.0).unwrap();
        assert_eq!(p[2].gain, 0.98);
        assert_eq!(p[3].offset, -0.06);
        assert!(gen_mismatch(0, &spec, &pulse(PulseShape::Ideal), 5, 1.0).is_err());
    }

    #[test]
    fn split_slows_the_falling_edge() {
        let p = gen_mismatch(0, &MismatchSpec::default(), &pulse(PulseShape::Split), 1, 1.0).unwrap();
        assert_eq!((p[0].tau_p, p[0].sr_p), (0.5, 1.5));
        assert!((p[0].tau_n - 0.525).abs() < 1e-15);
        assert!((p[0].sr_n - 1.425).abs() < 1e-15);
    }
}
