//! Exact solver for the univariate (vector-valued) Potts problem
//!
//! ```text
//! minimize  γ·J(v) + Σᵢ ‖zᵢ − vᵢ‖²
//! ```
//!
//! where `J(v)` counts the positions where the whole vector `vᵢ₊₁ ≠ vᵢ`.
//! The minimizer is piecewise constant with segment values equal to the
//! per-channel means, so the problem reduces to choosing breakpoints, which
//! is a shortest-path style dynamic program over the last segment start.
//!
//! Equal-energy solutions are resolved toward fewer segments, then toward
//! the lexicographically smallest breakpoint sequence. Energies closer than
//! a small relative tolerance count as equal.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Largest signal the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_LEN: usize = 14;

/// A sequence of `len` samples with `channels` values each, interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal1D {
    channels: usize,
    samples: Vec<f64>,
}

impl Signal1D {
    pub fn new(channels: usize, samples: Vec<f64>) -> Result<Self> {
        if channels == 0 || samples.is_empty() || !samples.len().is_multiple_of(channels) {
            return Err(Error::InvalidConfig(format!(
                "signal needs a positive whole number of {channels}-channel samples, got {} values",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: i / channels,
                col: i % channels,
            });
        }
        Ok(Self { channels, samples })
    }

    /// A one-channel signal.
    pub fn scalar(samples: &[f64]) -> Result<Self> {
        Self::new(1, samples.to_vec())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.samples.len() / self.channels
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    #[inline]
    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.channels..(i + 1) * self.channels]
    }
}

/// A piecewise-constant fit of a [`Signal1D`].
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation1D {
    /// Exclusive end of each segment; strictly increasing, last equals the
    /// signal length.
    pub breakpoints: Vec<usize>,
    /// One `channels`-vector per segment, interleaved.
    pub values: Vec<f64>,
    pub channels: usize,
    /// `γ·J(v) + Σ‖zᵢ − vᵢ‖²` evaluated directly from the fitted values.
    pub energy: f64,
}

impl Segmentation1D {
    pub fn num_segments(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn segment_value(&self, k: usize) -> &[f64] {
        &self.values[k * self.channels..(k + 1) * self.channels]
    }

    /// Segment `k` as a half-open sample range.
    pub fn segment_range(&self, k: usize) -> std::ops::Range<usize> {
        let start = if k == 0 { 0 } else { self.breakpoints[k - 1] };
        start..self.breakpoints[k]
    }

    /// The fitted signal, one value per sample and channel.
    pub fn expand(&self) -> Vec<f64> {
        let n = *self.breakpoints.last().unwrap_or(&0);
        let mut out = Vec::with_capacity(n * self.channels);
        for k in 0..self.num_segments() {
            for _ in self.segment_range(k) {
                out.extend_from_slice(self.segment_value(k));
            }
        }
        out
    }
}

/// `γ·J(v) + Σᵢ ‖zᵢ − vᵢ‖²` with grouped jump counting.
pub fn potts_energy_1d(signal: &Signal1D, values: &[f64], gamma: f64) -> Result<f64> {
    if values.len() != signal.samples.len() {
        return Err(Error::LengthMismatch {
            left: signal.samples.len(),
            right: values.len(),
        });
    }
    Ok(energy_raw(&signal.samples, values, signal.channels, gamma))
}

fn energy_raw(samples: &[f64], values: &[f64], channels: usize, gamma: f64) -> f64 {
    let residual: f64 = samples
        .iter()
        .zip(values)
        .map(|(z, v)| (z - v) * (z - v))
        .sum();
    let jumps = values
        .chunks(channels)
        .zip(values.chunks(channels).skip(1))
        .filter(|(a, b)| a != b)
        .count();
    gamma * jumps as f64 + residual
}

/// Global minimizer of the univariate Potts energy for `gamma ≥ 0`.
pub fn solve_potts_1d(signal: &Signal1D, gamma: f64) -> Segmentation1D {
    solve_potts_1d_with(signal, gamma, true)
}

/// [`solve_potts_1d`] with the candidate pruning switchable; the result does
/// not depend on `pruning`.
pub fn solve_potts_1d_with(signal: &Signal1D, gamma: f64, pruning: bool) -> Segmentation1D {
    let mut ws = PottsWorkspace::default();
    ws.run(&signal.samples, signal.channels, gamma, pruning);
    let breakpoints = ws.breakpoints();
    segmentation_from_breakpoints(&signal.samples, signal.channels, breakpoints, gamma)
}

fn segmentation_from_breakpoints(
    samples: &[f64],
    channels: usize,
    breakpoints: Vec<usize>,
    gamma: f64,
) -> Segmentation1D {
    let mut values = Vec::with_capacity(breakpoints.len() * channels);
    let mut start = 0;
    for &end in &breakpoints {
        push_mean(samples, channels, start, end, &mut values);
        start = end;
    }
    let mut seg = Segmentation1D {
        breakpoints,
        values,
        channels,
        energy: 0.0,
    };
    seg.energy = energy_raw(samples, &seg.expand(), channels, gamma);
    seg
}

fn push_mean(samples: &[f64], channels: usize, start: usize, end: usize, out: &mut Vec<f64>) {
    let len = (end - start) as f64;
    for c in 0..channels {
        let sum: f64 = (start..end).map(|i| samples[i * channels + c]).sum();
        out.push(sum / len);
    }
}

/// Tolerance under which two candidate energies are treated as equal.
fn tie_tolerance(samples: &[f64], channels: usize, gamma: f64) -> f64 {
    let n = samples.len() / channels;
    let mut spread = 0.0;
    for c in 0..channels {
        let mean = (0..n).map(|i| samples[i * channels + c]).sum::<f64>() / n as f64;
        spread += (0..n)
            .map(|i| {
                let d = samples[i * channels + c] - mean;
                d * d
            })
            .sum::<f64>();
    }
    1e-12 * (1.0 + spread + gamma * n as f64)
}

/// Orders candidates by (energy within `tol`, segment count). Breakpoint
/// order is left to the caller.
fn compare_key(e1: f64, k1: usize, e2: f64, k2: usize, tol: f64) -> Ordering {
    if e1 < e2 - tol {
        Ordering::Less
    } else if e1 > e2 + tol {
        Ordering::Greater
    } else {
        k1.cmp(&k2)
    }
}

/// Reusable scratch buffers for the dynamic program.
///
/// The solver maps this over many rows and columns, so keeping one per
/// worker avoids reallocating prefix sums for every line.
#[derive(Debug, Default, Clone)]
pub struct PottsWorkspace {
    s1: Vec<f64>,
    s2: Vec<f64>,
    best: Vec<f64>,
    nseg: Vec<usize>,
    start: Vec<usize>,
    lhs: Vec<usize>,
    rhs: Vec<usize>,
    channels: usize,
}

impl PottsWorkspace {
    /// Solves in place: `out` receives the fitted values for `samples`.
    pub fn fit(&mut self, samples: &[f64], channels: usize, gamma: f64, out: &mut [f64]) {
        debug_assert_eq!(samples.len(), out.len());
        self.run(samples, channels, gamma, true);
        let n = samples.len() / channels;
        let mut end = n;
        let mut mean = vec![0.0; channels];
        while end > 0 {
            let start = self.start[end];
            let len = (end - start) as f64;
            for (c, m) in mean.iter_mut().enumerate() {
                *m = (start..end).map(|i| samples[i * channels + c]).sum::<f64>() / len;
            }
            for i in start..end {
                out[i * channels..(i + 1) * channels].copy_from_slice(&mean);
            }
            end = start;
        }
    }

    fn run(&mut self, samples: &[f64], channels: usize, gamma: f64, pruning: bool) {
        let n = samples.len() / channels;
        self.channels = channels;
        self.prefix_sums(samples, channels, n);
        let tol = tie_tolerance(samples, channels, gamma);

        self.best.clear();
        self.best.resize(n + 1, 0.0);
        self.nseg.clear();
        self.nseg.resize(n + 1, 0);
        self.start.clear();
        self.start.resize(n + 1, 0);
        self.best[0] = -gamma;

        for r in 1..=n {
            let mut cur_e = f64::INFINITY;
            let mut cur_k = usize::MAX;
            let mut cur_l = usize::MAX;
            let mut l = r - 1;
            loop {
                let cost = self.segment_cost(l, r);
                if pruning && l > 0 && cost + gamma > cur_e + 2.0 * tol {
                    // Segment costs only grow as l decreases and every prefix
                    // energy past the first is nonnegative, so only l = 0 can
                    // still compete.
                    l = 0;
                    continue;
                }
                let e = self.best[l] + gamma + cost;
                let k = self.nseg[l] + 1;
                let better = match compare_key(e, k, cur_e, cur_k, tol) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => self.prefix_lex_less(l, cur_l),
                };
                if better {
                    cur_e = e;
                    cur_k = k;
                    cur_l = l;
                }
                if l == 0 {
                    break;
                }
                l -= 1;
            }
            self.best[r] = cur_e;
            self.nseg[r] = cur_k;
            self.start[r] = cur_l;
        }
    }

    fn prefix_sums(&mut self, samples: &[f64], channels: usize, n: usize) {
        // Centering keeps the prefix-sum cancellation small.
        let mut mean = vec![0.0; channels];
        for (c, m) in mean.iter_mut().enumerate() {
            *m = (0..n).map(|i| samples[i * channels + c]).sum::<f64>() / n as f64;
        }
        self.s1.clear();
        self.s1.resize((n + 1) * channels, 0.0);
        self.s2.clear();
        self.s2.resize(n + 1, 0.0);
        for i in 0..n {
            let mut sq = 0.0;
            for c in 0..channels {
                let z = samples[i * channels + c] - mean[c];
                self.s1[(i + 1) * channels + c] = self.s1[i * channels + c] + z;
                sq += z * z;
            }
            self.s2[i + 1] = self.s2[i] + sq;
        }
    }

    /// Squared deviation of samples `l..r` from their mean.
    #[inline]
    fn segment_cost(&self, l: usize, r: usize) -> f64 {
        let ch = self.channels;
        let len = (r - l) as f64;
        let mut dev = self.s2[r] - self.s2[l];
        for c in 0..ch {
            let s = self.s1[r * ch + c] - self.s1[l * ch + c];
            dev -= s * s / len;
        }
        dev.max(0.0)
    }

    /// Whether the stored breakpoints of prefix `a` precede those of prefix
    /// `b` lexicographically. Only reached on energy and count ties.
    fn prefix_lex_less(&mut self, a: usize, b: usize) -> bool {
        if b == usize::MAX {
            return true;
        }
        fill_breakpoints(&self.start, a, &mut self.lhs);
        fill_breakpoints(&self.start, b, &mut self.rhs);
        self.lhs < self.rhs
    }

    fn breakpoints(&self) -> Vec<usize> {
        let mut bp = Vec::new();
        fill_breakpoints(&self.start, self.start.len() - 1, &mut bp);
        bp
    }
}

fn fill_breakpoints(start: &[usize], prefix: usize, out: &mut Vec<usize>) {
    out.clear();
    let mut end = prefix;
    while end > 0 {
        out.push(end);
        end = start[end];
    }
    out.reverse();
}

/// Exhaustive minimizer over all `2^(n−1)` interval partitions, with the
/// same tie-break as [`solve_potts_1d`].
pub fn brute_force_potts(signal: &Signal1D, gamma: f64) -> Result<Segmentation1D> {
    let n = signal.len();
    if n > BRUTE_FORCE_MAX_LEN {
        return Err(Error::LengthCap {
            len: n,
            cap: BRUTE_FORCE_MAX_LEN,
        });
    }
    let tol = tie_tolerance(&signal.samples, signal.channels, gamma);
    let mut best: Option<Segmentation1D> = None;
    for mask in 0u32..(1u32 << (n - 1)) {
        let mut bp: Vec<usize> = (1..n).filter(|&i| mask & (1 << (i - 1)) != 0).collect();
        bp.push(n);
        let k = bp.len();
        // Segment means, then the energy with one γ per boundary.
        let mut values = Vec::with_capacity(k * signal.channels);
        let mut s = 0;
        for &e in &bp {
            push_mean(&signal.samples, signal.channels, s, e, &mut values);
            s = e;
        }
        let mut residual = 0.0;
        let mut s = 0;
        for (seg, &e) in bp.iter().enumerate() {
            for i in s..e {
                for c in 0..signal.channels {
                    let d =
                        signal.samples[i * signal.channels + c] - values[seg * signal.channels + c];
                    residual += d * d;
                }
            }
            s = e;
        }
        let energy = gamma * (k - 1) as f64 + residual;
        let better = match &best {
            None => true,
            Some(b) => match compare_key(energy, k, b.energy, b.num_segments(), tol) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => bp < b.breakpoints,
            },
        };
        if better {
            best = Some(Segmentation1D {
                breakpoints: bp,
                values,
                channels: signal.channels,
                energy,
            });
        }
    }
    let best = best.expect("at least one partition");
    Ok(segmentation_from_breakpoints(
        &signal.samples,
        signal.channels,
        best.breakpoints,
        gamma,
    ))
}
