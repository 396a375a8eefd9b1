//! Error-feedback sigma-delta modulator clocked at the high rate.
//!
//! The quantization error `e(n)` is filtered by `H(z) = NTF(z) - 1` and added
//! back to the input, so that `Y(z) = X(z) + NTF(z) E(z)` with
//! `NTF(z) = (1 - z^-1)^L / D(z)`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Relative tail tolerance used when truncating `(1 - z^-1)^L / D(z) - 1`.
pub const TRUNCATION_TOLERANCE: f64 = 1e-12;

/// Feedback filter `H(z)` of the error-feedback loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopFilter {
    order: usize,
    /// `impulse[k]` is the coefficient of `z^-k`; `impulse[0]` is always zero.
    impulse: Vec<f64>,
    denominator: Vec<f64>,
}

impl LoopFilter {
    /// Noise-shaping order `L`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Full impulse response including the (zero) tap at lag 0.
    pub fn impulse(&self) -> &[f64] {
        &self.impulse
    }

    /// Feedback taps `h[1..=K]`.
    pub fn taps(&self) -> &[f64] {
        &self.impulse[1..]
    }

    /// Truncation length `K` (number of feedback taps).
    pub fn len(&self) -> usize {
        self.impulse.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coefficients of `D(z)`, leading 1.
    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    /// NTF impulse response, i.e. `1 + H(z)`.
    pub fn ntf(&self) -> Vec<f64> {
        let mut ntf = self.impulse.clone();
        ntf[0] = 1.0;
        ntf
    }
}

fn binomial_ntf(order: usize) -> Vec<f64> {
    // coefficients of (1 - z^-1)^order
    let mut c = vec![1.0];
    for _ in 0..order {
        let mut next = vec![0.0; c.len() + 1];
        for (i, &v) in c.iter().enumerate() {
            next[i] += v;
            next[i + 1] -= v;
        }
        c = next;
    }
    c
}

/// Roots of `z^n + d1 z^(n-1) + ... + dn`, as (re, im) pairs.
fn denominator_roots(den: &[f64]) -> Vec<(f64, f64)> {
    let n = den.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        companion[(0, j)] = -den[j + 1] / den[0];
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| (z.re, z.im))
        .collect()
}

/// Quotient `N(z) / D(z)` to `truncation` taps. The division is carried to
/// twice that length so the discarded tail can be checked.
fn long_division(numerator: &[f64], den: &[f64], truncation: usize) -> Result<Vec<f64>> {
    if truncation < numerator.len() - 1 {
        return Err(Error::Config(format!(
            "truncation length {truncation} shorter than the NTF numerator"
        )));
    }
    let total = 2 * truncation + den.len();
    let mut q = vec![0.0; total];
    for n in 0..total {
        let mut acc = numerator.get(n).copied().unwrap_or(0.0);
        for j in 1..den.len().min(n + 1) {
            acc -= den[j] * q[n - j];
        }
        q[n] = acc;
    }
    let peak = q[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tail = q[truncation + 1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if tail >= TRUNCATION_TOLERANCE * peak {
        return Err(Error::Config(format!(
            "truncation length {truncation} leaves tail {tail:e} (peak {peak:e})"
        )));
    }
    q.truncate(truncation + 1);
    Ok(q)
}

const MAX_TRUNCATION: usize = 1 << 16;

/// Shortest power-of-two length, starting from the decay estimate of the
/// slowest pole, whose tail passes the tolerance.
fn auto_truncation(numerator: &[f64], den: &[f64], magnitudes: &[f64]) -> Result<usize> {
    let r = magnitudes.iter().copied().fold(0.0f64, f64::max);
    let estimate = if r > 0.0 {
        (TRUNCATION_TOLERANCE.ln() / r.ln()).ceil() as usize
    } else {
        0
    };
    let mut k = (estimate + numerator.len() + den.len()).next_power_of_two();
    while k <= MAX_TRUNCATION {
        if long_division(numerator, den, k).is_ok() {
            return Ok(k);
        }
        k *= 2;
    }
    Err(Error::Config(format!(
        "impulse response does not decay within {MAX_TRUNCATION} taps"
    )))
}

/// Builds `H(z) = (1 - z^-1)^L / D(z) - 1`.
///
/// For `L <= 2` the denominator must be absent (or exactly `[1]`) and the
/// result is exact. For `L > 2` the denominator is required, must have all
/// roots strictly inside the unit circle, and the quotient is truncated to
/// `truncation` taps (0 picks a length automatically); the tail beyond that
/// must fall below [`TRUNCATION_TOLERANCE`] of the largest coefficient.
pub fn design_loop_filter(
    order: usize,
    denominator: Option<&[f64]>,
    truncation: usize,
) -> Result<LoopFilter> {
    if order == 0 {
        return Err(Error::Config("modulator order must be at least 1".into()));
    }
    let numerator = binomial_ntf(order);
    let den: Vec<f64> = match denominator {
        None if order > 2 => {
            return Err(Error::Config(format!(
                "order {order} requires a stabilizing denominator D(z)"
            )))
        }
        None => vec![1.0],
        Some(d) if order <= 2 => {
            if d != [1.0] {
                return Err(Error::Config(format!(
                    "order {order} uses D(z) = 1; got {d:?}"
                )));
            }
            vec![1.0]
        }
        Some(d) => {
            if d.is_empty() || d[0] != 1.0 {
                return Err(Error::Config(
                    "denominator must be monic (leading coefficient 1)".into(),
                ));
            }
            d.to_vec()
        }
    };

    if order <= 2 {
        let mut impulse = numerator;
        impulse[0] = 0.0;
        return Ok(LoopFilter {
            order,
            impulse,
            denominator: den,
        });
    }

    let roots = denominator_roots(&den);
    let magnitudes: Vec<f64> = roots.iter().map(|(re, im)| re.hypot(*im)).collect();
    if magnitudes.iter().any(|&m| m >= 1.0) {
        return Err(Error::UnstableDenominator { roots, magnitudes });
    }
    let truncation = if truncation == 0 {
        auto_truncation(&numerator, &den, &magnitudes)?
    } else {
        truncation
    };
    let mut q = long_division(&numerator, &den, truncation)?;
    q[0] = 0.0;
    Ok(LoopFilter {
        order,
        impulse: q,
        denominator: den,
    })
}

/// Uniform mid-rise quantizer spanning `[-V_S, +V_S]` with `2^d` levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    bits: u32,
    full_scale: f64,
}

impl Quantizer {
    pub fn new(bits: u32, full_scale: f64) -> Result<Self> {
        if !(1..=16).contains(&bits) {
            return Err(Error::Config(format!("quantizer bits {bits} outside 1..=16")));
        }
        if !(full_scale > 0.0 && full_scale.is_finite()) {
            return Err(Error::Config(format!("full scale {full_scale} must be positive")));
        }
        Ok(Quantizer { bits, full_scale })
    }

    pub fn single_bit() -> Self {
        Quantizer {
            bits: 1,
            full_scale: 1.0,
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn full_scale(&self) -> f64 {
        self.full_scale
    }

    /// Largest code, `2^d - 1`.
    pub fn max_code(&self) -> u32 {
        (1u32 << self.bits) - 1
    }

    /// Spacing between adjacent levels.
    pub fn step(&self) -> f64 {
        2.0 * self.full_scale / self.max_code() as f64
    }

    pub fn level(&self, code: u32) -> f64 {
        -self.full_scale + code as f64 * self.step()
    }

    /// Nearest code, ties toward the higher code, overload clipped.
    pub fn quantize(&self, w: f64) -> u32 {
        let u = (w + self.full_scale) / self.step();
        let c = (u + 0.5).floor();
        if c <= 0.0 {
            0
        } else if c >= self.max_code() as f64 {
            self.max_code()
        } else {
            c as u32
        }
    }
}

/// Rate a [`CodeStream`] is clocked at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rate {
    High,
    /// Path `path` of `paths` low-rate streams.
    Low { path: usize, paths: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeStream {
    pub rate: Rate,
    pub codes: Vec<u32>,
    pub quantizer: Quantizer,
}

impl CodeStream {
    pub fn new(rate: Rate, codes: Vec<u32>, quantizer: Quantizer) -> Result<Self> {
        if let Some(pos) = codes.iter().position(|&c| c > quantizer.max_code()) {
            return Err(Error::Config(format!(
                "code {} at index {pos} exceeds {}",
                codes[pos],
                quantizer.max_code()
            )));
        }
        Ok(CodeStream {
            rate,
            codes,
            quantizer,
        })
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Quantizer output voltages.
    pub fn levels(&self) -> Vec<f64> {
        self.codes.iter().map(|&c| self.quantizer.level(c)).collect()
    }
}

/// Generator stream used for dither draws (mismatch draws use stream 0).
pub const DITHER_STREAM: u64 = 1;

/// Optional uniform dither added at the quantizer input. Off by default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dither {
    /// Half-width of the uniform distribution, in volts.
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug)]
pub(crate) struct DitherSource(Option<(f64, ChaCha8Rng)>);

impl DitherSource {
    pub(crate) fn new(dither: Option<Dither>) -> Self {
        DitherSource(
            dither
                .filter(|d| d.amplitude > 0.0)
                .map(|d| {
                    let mut rng = ChaCha8Rng::seed_from_u64(d.seed);
                    rng.set_stream(DITHER_STREAM);
                    (d.amplitude, rng)
                }),
        )
    }

    pub(crate) fn next(&mut self) -> f64 {
        match &mut self.0 {
            Some((a, rng)) => rng.gen_range(-*a..*a),
            None => 0.0,
        }
    }
}

/// Streaming error-feedback modulator.
#[derive(Debug)]
pub struct Modulator {
    filter: LoopFilter,
    quantizer: Quantizer,
    /// Ring buffer of past errors; `history[(pos + K - k) % K]` holds `e(n - k)`.
    history: Vec<f64>,
    pos: usize,
    tick: usize,
    dither: DitherSource,
}

/// Output of a full modulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Modulated {
    pub stream: CodeStream,
    /// Quantization error `e(n) = level(y(n)) - w(n)`.
    pub errors: Vec<f64>,
}

impl Modulator {
    pub fn new(filter: LoopFilter, quantizer: Quantizer) -> Self {
        Self::with_dither(filter, quantizer, None)
    }

    pub fn with_dither(filter: LoopFilter, quantizer: Quantizer, dither: Option<Dither>) -> Self {
        let k = filter.len().max(1);
        Modulator {
            filter,
            quantizer,
            history: vec![0.0; k],
            pos: 0,
            tick: 0,
            dither: DitherSource::new(dither),
        }
    }

    /// Processes one high-rate sample, returning `(code, error)`.
    pub fn step(&mut self, x: f64) -> Result<(u32, f64)> {
        let taps = self.filter.taps();
        let k_len = self.history.len();
        let mut fb = 0.0;
        for (k, &h) in taps.iter().enumerate() {
            // lag k + 1
            let idx = (self.pos + k_len - 1 - k) % k_len;
            fb += h * self.history[idx];
        }
        let w = x + fb;
        let code = self.quantizer.quantize(w + self.dither.next());
        let e = self.quantizer.level(code) - w;
        if !e.is_finite() {
            return Err(Error::Diverged { tick: self.tick });
        }
        self.history[self.pos] = e;
        self.pos = (self.pos + 1) % k_len;
        self.tick += 1;
        Ok((code, e))
    }
}

/// Runs the modulator over `x` from zero state.
pub fn modulate(x: &[f64], filter: &LoopFilter, quantizer: &Quantizer) -> Result<Modulated> {
    modulate_dithered(x, filter, quantizer, None)
}

pub fn modulate_dithered(
    x: &[f64],
    filter: &LoopFilter,
    quantizer: &Quantizer,
    dither: Option<Dither>,
) -> Result<Modulated> {
    let mut m = Modulator::with_dither(filter.clone(), *quantizer, dither);
    let mut codes = Vec::with_capacity(x.len());
    let mut errors = Vec::with_capacity(x.len());
    for &xn in x {
        let (c, e) = m.step(xn)?;
        codes.push(c);
        errors.push(e);
    }
    Ok(Modulated {
        stream: CodeStream {
            rate: Rate::High,
            codes,
            quantizer: *quantizer,
        },
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_and_second_order_taps() {
        let f1 = design_loop_filter(1, None, 0).unwrap();
        assert_eq!(f1.taps(), &[-1.0]);
        let f2 = design_loop_filter(2, Some(&[1.0]), 0).unwrap();
        assert_eq!(f2.taps(), &[-2.0, 1.0]);
        assert_eq!(f2.impulse(), &[0.0, -2.0, 1.0]);
        assert_eq!(f2.ntf(), vec![1.0, -2.0, 1.0]);
    }

    #[test]
    fn third_order_long_division() {
        // oracle: (1 - z^-1)^3 convolved with the geometric series of 1/(1 - 0.5 z^-1)
        let num = [1.0, -3.0, 3.0, -1.0];
        let oracle: Vec<f64> = (0..12)
            .map(|n| {
                (0..=n.min(3))
                    .map(|j| num[j] * 0.5f64.powi((n - j) as i32))
                    .sum()
            })
            .collect();
        let f = design_loop_filter(3, Some(&[1.0, -0.5]), 64).unwrap();
        let frozen = [-2.5, 1.75, -0.125, -0.0625, -0.03125];
        for (k, v) in frozen.iter().enumerate() {
            assert_eq!(f.taps()[k], *v);
            assert!((oracle[k + 1] - v).abs() < 1e-15);
        }
        for n in 1..12 {
            assert!((f.impulse()[n] - oracle[n]).abs() < 1e-15);
        }
        // convolving the NTF with D(z) gives back (1 - z^-1)^3 up to truncation
        let ntf = f.ntf();
        for n in 0..60 {
            let prev = if n > 0 { ntf[n - 1] } else { 0.0 };
            let conv = ntf[n] - 0.5 * prev;
            let expect = num.get(n).copied().unwrap_or(0.0);
            assert!((conv - expect).abs() < 1e-14, "n={n}");
        }
        let auto = design_loop_filter(3, Some(&[1.0, -0.5]), 0).unwrap();
        assert_eq!(&auto.impulse()[..f.impulse().len()], f.impulse());
        let tail = auto.impulse().last().unwrap().abs();
        assert!(tail < TRUNCATION_TOLERANCE * 2.5);
    }

    #[test]
    fn design_errors() {
        assert!(matches!(design_loop_filter(3, None, 32), Err(Error::Config(_))));
        assert!(matches!(design_loop_filter(0, None, 32), Err(Error::Config(_))));
        assert!(matches!(
            design_loop_filter(2, Some(&[1.0, 0.3]), 32),
            Err(Error::Config(_))
        ));
        match design_loop_filter(3, Some(&[1.0, -1.5, 0.2]), 64) {
            Err(Error::UnstableDenominator { magnitudes, .. }) => {
                assert!(magnitudes.iter().any(|&m| m > 1.0));
            }
            other => panic!("expected rejection, got {other:?}"),
        }
        // 0.9^K with K = 32 is far from 1e-12
        assert!(matches!(
            design_loop_filter(3, Some(&[1.0, -0.9]), 32),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn quantizer_examples() {
        let q1 = Quantizer::single_bit();
        assert_eq!(q1.quantize(0.2), 1);
        assert_eq!(q1.level(1), 1.0);
        assert_eq!(q1.quantize(0.0), 1);
        assert_eq!(q1.quantize(-1e-9), 0);
        assert_eq!((q1.level(0), q1.level(1)), (-1.0, 1.0));
        let q3 = Quantizer::new(3, 1.0).unwrap();
        assert_eq!(q3.quantize(-3.0), 0);
        assert_eq!(q3.quantize(3.0), 7);
        assert!((q3.level(7) - 1.0).abs() < 1e-15);
        // midpoint between codes 3 and 4 is 0
        assert_eq!(q3.quantize(0.0), 4);
        for c in 0..=7 {
            assert_eq!(q3.quantize(q3.level(c)), c);
        }
        assert!(Quantizer::new(0, 1.0).is_err());
    }

    #[test]
    fn code_stream_rejects_out_of_range() {
        let q = Quantizer::single_bit();
        assert!(CodeStream::new(Rate::High, vec![0, 1, 2], q).is_err());
    }

    #[test]
    fn zero_input_limit_cycle() {
        let f = design_loop_filter(2, None, 0).unwrap();
        let out = modulate(&[0.0; 12], &f, &Quantizer::single_bit()).unwrap();
        assert_eq!(out.stream.codes, vec![1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1]);
    }

    #[test]
    fn diverged_reports_tick() {
        let f = design_loop_filter(1, None, 0).unwrap();
        let x = [0.1, 0.2, f64::NAN, 0.0];
        match modulate(&x, &f, &Quantizer::single_bit()) {
            Err(Error::Diverged { tick }) => assert_eq!(tick, 2),
            other => panic!("{other:?}"),
        }
    }
}
