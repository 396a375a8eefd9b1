//! Time-interleaved realization of the modulator at the low rate `f_L = f_H / M`.
//!
//! `H(z)` is split into polyphase components `H(z) = sum_k z^-k H_k(z^M)` and
//! arranged as a pseudo-circulant block filter. The interleaved modulator
//! consumes one `M`-sample block per low-rate cycle and its multiplexed output
//! is the direct modulator output delayed by `M` high-rate samples.

use crate::error::{Error, Result};
use crate::modulator::{CodeStream, Dither, DitherSource, LoopFilter, Quantizer, Rate};

#[derive(Debug, Clone, PartialEq)]
pub struct PolyphaseSet {
    paths: usize,
    components: Vec<Vec<f64>>,
}

impl PolyphaseSet {
    pub fn paths(&self) -> usize {
        self.paths
    }

    /// `H_k(z)` coefficients: `h[k], h[k + M], h[k + 2M], ...`.
    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k]
    }

    /// Re-interleaves the components into the original response.
    pub fn interleave(&self) -> Vec<f64> {
        let len = self.components.iter().map(Vec::len).sum();
        let mut h = vec![0.0; len];
        for (k, comp) in self.components.iter().enumerate() {
            for (i, &v) in comp.iter().enumerate() {
                h[i * self.paths + k] = v;
            }
        }
        h
    }
}

/// Splits `h` (lag 0 first) into `paths` polyphase components.
///
/// Components are zero-padded to a common length so every `H_k` has the same
/// number of coefficients.
pub fn polyphase_decompose(h: &[f64], paths: usize) -> Result<PolyphaseSet> {
    if paths == 0 {
        return Err(Error::Config("number of paths must be at least 1".into()));
    }
    let per = h.len().div_ceil(paths).max(1);
    let components = (0..paths)
        .map(|k| (0..per).map(|i| h.get(i * paths + k).copied().unwrap_or(0.0)).collect())
        .collect();
    Ok(PolyphaseSet { paths, components })
}

/// Pseudo-circulant `M x M` block filter.
///
/// Entry `(r, c)` is `H_{r-c}(z)` when `r >= c` and `z^-1 H_{M+r-c}(z)` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFilter {
    paths: usize,
    entries: Vec<Vec<Vec<f64>>>,
    /// Longest lag with a coefficient, in high-rate samples.
    max_lag: usize,
}

impl BlockFilter {
    pub fn new(set: &PolyphaseSet) -> Self {
        let m = set.paths;
        let entries = (0..m)
            .map(|r| {
                (0..m)
                    .map(|c| {
                        if r >= c {
                            set.components[r - c].clone()
                        } else {
                            let mut delayed = vec![0.0];
                            delayed.extend_from_slice(&set.components[m + r - c]);
                            delayed
                        }
                    })
                    .collect()
            })
            .collect();
        let per = set.components[0].len();
        BlockFilter {
            paths: m,
            entries,
            max_lag: per * m,
        }
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    /// Coefficient list of entry `(r, c)`.
    pub fn entry(&self, r: usize, c: usize) -> &[f64] {
        &self.entries[r][c]
    }

    /// Output sample `r` of block `block`, where `input(b, c)` returns sample `c`
    /// of block `b`. Terms are accumulated in ascending high-rate lag, the same
    /// order the direct-form filter uses. Lags reaching before block 0 are skipped.
    fn accumulate_row<F>(&self, block: usize, r: usize, min_lag: usize, input: F) -> f64
    where
        F: Fn(usize, usize) -> f64,
    {
        let m = self.paths;
        let here = block * m + r;
        let mut acc = 0.0;
        for lag in min_lag..=self.max_lag.min(here) {
            let src = here - lag;
            let (b, c) = (src / m, src % m);
            let delay = block - b;
            let coeff = self.entries[r][c].get(delay).copied().unwrap_or(0.0);
            acc += coeff * input(b, c);
        }
        acc
    }

    /// Filters a stream of `M`-blocks from zero state.
    pub fn apply(&self, blocks: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if let Some(b) = blocks.iter().position(|b| b.len() != self.paths) {
            return Err(Error::Config(format!(
                "block {b} has {} samples, expected {}",
                blocks[b].len(),
                self.paths
            )));
        }
        Ok((0..blocks.len())
            .map(|j| {
                (0..self.paths)
                    .map(|r| self.accumulate_row(j, r, 0, |b, c| blocks[b][c]))
                    .collect()
            })
            .collect())
    }
}

/// Splits a high-rate sequence into `M`-sample blocks.
pub fn to_blocks(x: &[f64], paths: usize) -> Vec<Vec<f64>> {
    x.chunks(paths).map(<[f64]>::to_vec).collect()
}

/// Concatenates blocks back into a high-rate sequence.
pub fn serialize(blocks: &[Vec<f64>]) -> Vec<f64> {
    blocks.iter().flatten().copied().collect()
}

/// Result of a time-interleaved modulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Interleaved {
    /// Low-rate streams `Y_0..Y_{M-1}`; `Y_p[j] = y[j M + p]`.
    pub paths: Vec<CodeStream>,
    /// Multiplexed high-rate stream, delayed by `M` samples relative to the
    /// direct modulator. The first block holds the zero-state idle code.
    pub multiplexed: CodeStream,
    pub errors: Vec<f64>,
    /// Latency of the multiplexed stream in high-rate ticks (always `M`).
    pub delay: usize,
}

pub fn ti_modulate(
    x: &[f64],
    paths: usize,
    filter: &LoopFilter,
    quantizer: &Quantizer,
) -> Result<Interleaved> {
    ti_modulate_dithered(x, paths, filter, quantizer, None)
}

/// Time-interleaved modulation. Each low-rate cycle takes one input block,
/// adds the feedback from previous blocks through the block filter, and
/// resolves the strictly lower-triangular zero-delay part sequentially.
pub fn ti_modulate_dithered(
    x: &[f64],
    paths: usize,
    filter: &LoopFilter,
    quantizer: &Quantizer,
    dither: Option<Dither>,
) -> Result<Interleaved> {
    if paths == 0 {
        return Err(Error::Config("number of paths must be at least 1".into()));
    }
    if !x.len().is_multiple_of(paths) {
        return Err(Error::Config(format!(
            "stream length {} is not a multiple of M = {paths}",
            x.len()
        )));
    }
    let bf = BlockFilter::new(&polyphase_decompose(filter.impulse(), paths)?);
    let mut dither = DitherSource::new(dither);
    let n_blocks = x.len() / paths;
    let mut err_blocks: Vec<Vec<f64>> = Vec::with_capacity(n_blocks);
    let mut code_blocks: Vec<Vec<u32>> = Vec::with_capacity(n_blocks);

    for (j, xb) in x.chunks(paths).enumerate() {
        let mut eb = vec![0.0; paths];
        let mut cb = vec![0; paths];
        for p in 0..paths {
            let fb = bf.accumulate_row(j, p, 1, |b, c| {
                if b == j {
                    eb[c]
                } else {
                    err_blocks[b][c]
                }
            });
            let w = xb[p] + fb;
            let code = quantizer.quantize(w + dither.next());
            let e = quantizer.level(code) - w;
            if !e.is_finite() {
                return Err(Error::Diverged { tick: j * paths + p });
            }
            eb[p] = e;
            cb[p] = code;
        }
        err_blocks.push(eb);
        code_blocks.push(cb);
    }

    // latency: block j leaves the multiplexer during cycle j + 1
    let idle = quantizer.quantize(0.0);
    let mut multiplexed = vec![idle; paths];
    multiplexed.extend(code_blocks.iter().take(n_blocks.saturating_sub(1)).flatten());
    multiplexed.truncate(x.len());

    let path_streams = (0..paths)
        .map(|p| CodeStream {
            rate: Rate::Low { path: p, paths },
            codes: multiplexed.iter().skip(p).step_by(paths).copied().collect(),
            quantizer: *quantizer,
        })
        .collect();

    Ok(Interleaved {
        paths: path_streams,
        multiplexed: CodeStream {
            rate: Rate::High,
            codes: multiplexed,
            quantizer: *quantizer,
        },
        errors: serialize(&err_blocks),
        delay: paths,
    })
}

/// Multiplexes equal-length low-rate streams back into one high-rate sequence.
pub fn multiplex(paths: &[CodeStream]) -> Vec<u32> {
    let m = paths.len();
    let len = paths.first().map_or(0, CodeStream::len);
    (0..len * m).map(|n| paths[n % m].codes[n / m]).collect()
}

/// Splits a high-rate code sequence into `M` low-rate streams.
pub fn demultiplex(stream: &CodeStream, paths: usize) -> Vec<CodeStream> {
    (0..paths)
        .map(|p| CodeStream {
            rate: Rate::Low { path: p, paths },
            codes: stream.codes.iter().skip(p).step_by(paths).copied().collect(),
            quantizer: stream.quantizer,
        })
        .collect()
}
