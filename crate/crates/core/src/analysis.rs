//! Spectral metrics: periodogram, SNDR over the signal band, harmonic levels,
//! in-band slope fits and dynamic-range sweeps.
//!
//! All measurements assume coherent sampling (the test tone sits exactly on a
//! bin). With the rectangular window a tone occupies one bin; with the Hann
//! window it occupies the bin and its two neighbours. Sigma-delta streams are
//! not periodic over the record, so the wrap-around discontinuity leaks into
//! the band under a rectangular window; metric runs use Hann.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};

/// Default FFT length in high-rate samples.
pub const DEFAULT_FFT_LEN: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
}

impl Window {
    fn coefficient(&self, i: usize, len: usize) -> f64 {
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / len as f64).cos(),
        }
    }

    /// Bins on each side of a coherent tone that carry tone power.
    pub fn tone_halfwidth(&self) -> usize {
        match self {
            Window::Rectangular => 0,
            Window::Hann => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }

    pub fn from_name(s: &str) -> Option<Window> {
        match s {
            "rectangular" | "rect" => Some(Window::Rectangular),
            "hann" => Some(Window::Hann),
            _ => None,
        }
    }
}

/// One-sided periodogram.
///
/// Bins are scaled by the window energy, so a coherent sine of amplitude `A`
/// sums to `A^2 / 2` over its tone bins and broadband noise keeps its power
/// density. With the rectangular window the bins sum exactly to the
/// mean-square value.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// FFT length.
    pub len: usize,
    /// Sample rate of the analyzed signal.
    pub rate: f64,
    /// Amplitude that reads 0 dB for a sine.
    pub full_scale: f64,
    pub window: Window,
    /// Power per bin, `len / 2 + 1` entries; DC first.
    pub power: Vec<f64>,
}

impl SpectrumReport {
    pub fn resolution(&self) -> f64 {
        self.rate / self.len as f64
    }

    pub fn bin_of(&self, freq: f64) -> usize {
        (freq / self.resolution()).round() as usize
    }

    pub fn freq_of(&self, bin: usize) -> f64 {
        bin as f64 * self.resolution()
    }

    /// Bin level in dB relative to a full-scale sine.
    pub fn db(&self, bin: usize) -> f64 {
        power_db(self.power[bin], self.full_scale)
    }

    /// Bins holding the power of a coherent tone at `bin`.
    pub fn tone_bins(&self, bin: usize) -> std::ops::RangeInclusive<usize> {
        let h = self.window.tone_halfwidth();
        bin.saturating_sub(h)..=(bin + h).min(self.power.len() - 1)
    }

    /// Power of a coherent tone at `bin`.
    pub fn tone_power(&self, bin: usize) -> f64 {
        self.tone_bins(bin).map(|b| self.power[b]).sum()
    }

    /// Highest bin inside the band `(0, band_edge]`.
    pub fn band_edge_bin(&self, band_edge: f64) -> usize {
        ((band_edge / self.resolution()) + 1e-9).floor() as usize
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }

    /// Mean power of the bins within `half_width` of `bin`, excluding `bin`
    /// itself, DC and any bin in `exclude`.
    pub fn local_floor(&self, bin: usize, half_width: usize, exclude: &[usize]) -> f64 {
        let lo = bin.saturating_sub(half_width).max(1);
        let hi = (bin + half_width).min(self.power.len() - 1);
        let (sum, count) = (lo..=hi)
            .filter(|&b| b != bin && !exclude.contains(&b))
            .fold((0.0, 0usize), |(s, c), b| (s + self.power[b], c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }
}

fn power_db(power: f64, full_scale: f64) -> f64 {
    10.0 * (power / (0.5 * full_scale * full_scale)).log10()
}

/// Signal band edge `f_B = rate / (2 OSR)`.
pub fn band_edge(rate: f64, osr: f64) -> f64 {
    rate / (2.0 * osr)
}

pub fn dbfs_to_amplitude(dbfs: f64, full_scale: f64) -> f64 {
    full_scale * 10f64.powf(dbfs / 20.0)
}

/// `amplitude * sin(2 pi bin n / period)` for `n` in `0..len`.
pub fn coherent_sine(len: usize, amplitude: f64, bin: usize, period: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            // reduce the phase index first so long runs keep full precision
            let idx = (n as u64 * bin as u64) % period as u64;
            amplitude * (std::f64::consts::TAU * idx as f64 / period as f64).sin()
        })
        .collect()
}

/// Rectangular-window periodogram of the first `len` samples.
pub fn psd(signal: &[f64], rate: f64, len: usize, full_scale: f64) -> Result<SpectrumReport> {
    psd_windowed(signal, rate, len, full_scale, Window::Rectangular)
}

pub fn psd_windowed(
    signal: &[f64],
    rate: f64,
    len: usize,
    full_scale: f64,
    window: Window,
) -> Result<SpectrumReport> {
    if len < 2 || signal.len() < len {
        return Err(Error::Config(format!(
            "need at least {len} samples (got {}), FFT length at least 2",
            signal.len()
        )));
    }
    if let Some(index) = signal[..len].iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut energy = 0.0;
    let mut buf: Vec<Complex<f64>> = signal[..len]
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let w = window.coefficient(i, len);
            energy += w * w;
            Complex::new(v * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let norm = len as f64 * energy;
    let half = len / 2;
    let power = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() / norm;
            if k == 0 || (len.is_multiple_of(2) && k == half) {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    Ok(SpectrumReport {
        len,
        rate,
        full_scale,
        window,
        power,
    })
}

/// Signal-to-noise-and-distortion ratio in dB over `(0, f_B]`.
///
/// The signal is the tone at `f_in` (one bin, or three under Hann); every
/// other in-band bin outside the DC tone bins counts as noise plus distortion.
pub fn sndr(report: &SpectrumReport, f_in: f64, osr: f64) -> Result<f64> {
    let edge = band_edge(report.rate, osr);
    if !(f_in > 0.0 && f_in < edge) {
        return Err(Error::OutOfBand { freq: f_in, band_edge: edge });
    }
    let sig = report.bin_of(f_in);
    let tone = report.tone_bins(sig);
    let first = report.window.tone_halfwidth() + 1;
    let top = report.band_edge_bin(edge);
    let noise: f64 = (first..=top)
        .filter(|b| !tone.contains(b))
        .map(|b| report.power[b])
        .sum();
    Ok(10.0 * (report.tone_power(sig) / noise).log10())
}

/// Bin of the `k`-th harmonic of `f_in`, folded into `[0, rate / 2]`.
pub fn harmonic_bin(report: &SpectrumReport, f_in: f64, k: usize) -> usize {
    let f = (k as f64 * f_in).rem_euclid(report.rate);
    let folded = if f > report.rate / 2.0 { report.rate - f } else { f };
    report.bin_of(folded)
}

/// Level in dB (full-scale sine = 0 dB) of the `k`-th harmonic.
pub fn harmonic_level(report: &SpectrumReport, f_in: f64, k: usize) -> f64 {
    power_db(report.tone_power(harmonic_bin(report, f_in, k)), report.full_scale)
}

/// Harmonic level and the noise floor next to it, both measured over the
/// tone bins of the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicReading {
    pub order: usize,
    pub bin: usize,
    pub level_db: f64,
    pub floor_db: f64,
}

impl HarmonicReading {
    /// Height above the local floor in dB.
    pub fn prominence(&self) -> f64 {
        self.level_db - self.floor_db
    }
}

/// The floor is the mean bin power within `half_width` bins of the harmonic
/// (tone bins of the harmonic and of the carrier excluded), scaled to the
/// number of tone bins.
pub fn harmonic_reading(report: &SpectrumReport, f_in: f64, k: usize, half_width: usize) -> HarmonicReading {
    let bin = harmonic_bin(report, f_in, k);
    let sig = report.bin_of(f_in);
    let exclude: Vec<usize> = report.tone_bins(bin).chain(report.tone_bins(sig)).collect();
    let floor = report.local_floor(bin, half_width, &exclude);
    let width = report.tone_bins(bin).count() as f64;
    HarmonicReading {
        order: k,
        bin,
        level_db: power_db(report.tone_power(bin), report.full_scale),
        floor_db: power_db(floor * width, report.full_scale),
    }
}

/// Least-squares slope in dB per decade of the PSD between `f_lo` and `f_hi`.
/// Bins listed in `masked`, the DC tone bins and empty bins are skipped.
pub fn inband_slope(report: &SpectrumReport, f_lo: f64, f_hi: f64, masked: &[usize]) -> Result<f64> {
    if !(f_lo > 0.0 && f_hi >= 10.0 * f_lo * (1.0 - 1e-12)) {
        return Err(Error::InsufficientBins(0));
    }
    let lo = ((f_lo / report.resolution()).ceil() as usize).max(report.window.tone_halfwidth() + 1);
    let hi = report.band_edge_bin(f_hi).min(report.power.len() - 1);
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .filter(|b| !masked.contains(b) && report.power[*b] > 0.0)
        .map(|b| (report.freq_of(b).log10(), report.db(b)))
        .collect();
    if pts.len() < 8 {
        return Err(Error::InsufficientBins(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// One SNDR per amplitude (dBfs). Points run in parallel; the returned order
/// follows `amplitudes`.
pub fn dr_sweep<F>(amplitudes: &[f64], measure: F) -> Result<Vec<(f64, f64)>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if amplitudes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("sweep amplitudes must be sorted".into()));
    }
    amplitudes
        .par_iter()
        .map(|&a| measure(a).map(|s| (a, s)))
        .collect()
}
