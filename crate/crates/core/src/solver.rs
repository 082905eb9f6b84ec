//! ADMM-like splitting for the Potts-regularized linearized energy
//!
//! ```text
//! E(u) = ½‖Au − b‖² + μ·ι_box(u) + λ(‖∇₁u‖₀ + ‖∇₂u‖₀)
//! ```
//!
//! The prior is split as `v = u` (vertical differences) and `w = u`
//! (horizontal differences). Each iteration
//!
//! 1. solves the pixelwise quadratic for `u` given `v − q₁` and `w − q₂`,
//! 2. fits every column of `u + q₁` with a univariate Potts model (`v`),
//! 3. fits every row of `u + q₂` the same way (`w`),
//! 4. updates the duals `q₁ += u − v`, `q₂ += u − w`,
//! 5. multiplies the coupling weight `η` by `σ > 1`.
//!
//! Rescaling `λ‖∇v‖₀ + η/2‖z − v‖²` by `2/η` gives the univariate problems
//! their jump penalty `γ = 2λ/η`.
//!
//! Within a step all lines (or pixels) are independent and may run in
//! parallel; every output slot is written by one task, so the result is
//! identical for any thread count.

use std::io::Write;

use crate::dataterm::{data_energy, LinearizedData, Mode};
use crate::error::{Error, Result};
use crate::exec::{for_each_chunk, map_range, Execution};
use crate::imagecore::{count_jumps_h, count_jumps_v, VectorField};
use crate::potts1d::PottsWorkspace;

/// Relative tolerance for the in-run normal-equation check.
const NORMAL_EQ_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Weight of the Potts prior.
    pub lambda: f64,
    /// Initial coupling weight.
    pub eta0: f64,
    /// Growth factor of the coupling weight, must exceed 1.
    pub sigma: f64,
    pub iterations: usize,
    /// `Some((min, max))` enables the box constraint (disparity only).
    pub box_bounds: Option<(f64, f64)>,
    /// Check the dual/residual bounds and the u-update every iteration.
    pub check_invariants: bool,
    /// Stop once `max(‖u−v‖∞, ‖u−w‖∞)` drops below this value.
    pub stop_tolerance: Option<f64>,
    pub execution: Execution,
}

impl SolverConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            eta0: 0.01,
            sigma: 1.05,
            iterations: 100,
            box_bounds: None,
            check_invariants: false,
            stop_tolerance: None,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.eta0 > 0.0 && self.eta0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "eta0 must be > 0, got {}",
                self.eta0
            )));
        }
        if !(self.sigma > 1.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be > 1, got {}",
                self.sigma
            )));
        }
        if let Some((lo, hi)) = self.box_bounds {
            if mode == Mode::Flow {
                return Err(Error::BoxFlowUnsupported);
            }
            if lo.partial_cmp(&hi).is_none_or(|o| o.is_gt()) {
                return Err(Error::InvalidConfig(format!("empty box [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Primal, split and dual variables of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: VectorField,
    pub v: VectorField,
    pub w: VectorField,
    pub q1: VectorField,
    pub q2: VectorField,
    pub eta: f64,
    pub iteration: usize,
}

impl SolverState {
    /// `u = v = w = init`, zero duals, `η = eta0`.
    pub fn new(init: &VectorField, eta0: f64) -> Self {
        let zeros = VectorField::zeros(init.rows(), init.cols(), init.channels());
        Self {
            u: init.clone(),
            v: init.clone(),
            w: init.clone(),
            q1: zeros.clone(),
            q2: zeros,
            eta: eta0,
            iteration: 0,
        }
    }
}

/// One row of the iteration trace, recorded after iteration `iteration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Total energy of the new `u`.
    pub energy: f64,
    pub data_energy: f64,
    pub potts_term: f64,
    /// `‖u − v‖₂`
    pub ru: f64,
    /// `‖u − w‖₂`
    pub rw: f64,
    pub q1: f64,
    pub q2: f64,
    /// Coupling weight used by this iteration.
    pub eta: f64,
    /// `‖u_new − u_old‖₂`
    pub du: f64,
    /// `max(‖u − v‖∞, ‖u − w‖∞)`
    pub split_gap: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    /// CSV with header
    /// `iteration,energy,data_energy,potts_term,ru,rw,q1,q2,eta` and reals
    /// printed with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "iteration,energy,data_energy,potts_term,ru,rw,q1,q2,eta"
        )?;
        for r in &self.records {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.iteration, r.energy, r.data_energy, r.potts_term, r.ru, r.rw, r.q1, r.q2, r.eta
            )?;
        }
        Ok(())
    }
}

/// Final variables of a run.
#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub u: VectorField,
    pub v: VectorField,
    pub w: VectorField,
    pub trace: IterationTrace,
}

/// Pixelwise minimizer of
/// `½(g·u − rhs)² + η/2(‖u − r₁‖² + ‖u − r₂‖²)` with `r₁ = v − q₁`,
/// `r₂ = w − q₂`, clamped to the box when one is configured.
pub fn u_update(
    data: &LinearizedData,
    state: &SolverState,
    cfg: &SolverConfig,
) -> Result<VectorField> {
    data.check_field(&state.u)?;
    if cfg.box_bounds.is_some() && data.mode == Mode::Flow {
        return Err(Error::BoxFlowUnsupported);
    }
    let eta = state.eta;
    let ch = data.channels();
    let cols = data.cols();
    let g = data.coeffs.as_slice();
    let rhs = data.rhs.as_slice();
    let (v, w) = (state.v.as_slice(), state.w.as_slice());
    let (q1, q2) = (state.q1.as_slice(), state.q2.as_slice());
    let mut out = vec![0.0; v.len()];
    for_each_chunk(cfg.execution, &mut out, cols * ch, |row, chunk| {
        for (k, px) in chunk.chunks_mut(ch).enumerate() {
            let p = row * cols + k;
            let i = p * ch;
            let target = |c: usize| (v[i + c] - q1[i + c]) + (w[i + c] - q2[i + c]);
            match data.mode {
                Mode::Disparity => {
                    let g1 = g[p];
                    let mut u = (g1 * rhs[p] + eta * target(0)) / (g1 * g1 + 2.0 * eta);
                    if let Some((lo, hi)) = cfg.box_bounds {
                        u = u.min(hi).max(lo);
                    }
                    px[0] = u;
                }
                Mode::Flow => {
                    let (g1, g2) = (g[i], g[i + 1]);
                    let a11 = g1 * g1 + 2.0 * eta;
                    let a22 = g2 * g2 + 2.0 * eta;
                    let a12 = g1 * g2;
                    let b1 = g1 * rhs[p] + eta * target(0);
                    let b2 = g2 * rhs[p] + eta * target(1);
                    let det = 2.0 * eta * (g1 * g1 + g2 * g2) + 4.0 * eta * eta;
                    px[0] = (a22 * b1 - a12 * b2) / det;
                    px[1] = (a11 * b2 - a12 * b1) / det;
                }
            }
        }
    });
    if let Some(i) = out.iter().position(|x| !x.is_finite()) {
        let p = i / ch;
        return Err(Error::NonfinitePixel {
            row: p / cols,
            col: p % cols,
        });
    }
    Ok(VectorField::from_raw(data.rows(), cols, ch, out))
}

/// Largest pixelwise residual of `(AᵀA + 2ηI)u − (Aᵀb + η(v − q₁ + w − q₂))`
/// for the `u` produced from `state`. Pixels held at a box bound are skipped.
///
/// The second value is the magnitude of the terms involved, for relative
/// comparisons.
pub fn normal_equation_residual(
    data: &LinearizedData,
    state: &SolverState,
    u: &VectorField,
    box_bounds: Option<(f64, f64)>,
) -> (f64, f64) {
    let ch = data.channels();
    let eta = state.eta;
    let g = data.coeffs.as_slice();
    let rhs = data.rhs.as_slice();
    let (v, w) = (state.v.as_slice(), state.w.as_slice());
    let (q1, q2) = (state.q1.as_slice(), state.q2.as_slice());
    let us = u.as_slice();
    let (mut worst, mut scale) = (0.0f64, 0.0f64);
    for (p, &b) in rhs.iter().enumerate() {
        let i = p * ch;
        let up = &us[i..i + ch];
        if let Some((lo, hi)) = box_bounds {
            if up.iter().any(|&x| x <= lo || x >= hi) {
                continue;
            }
        }
        let gu: f64 = (0..ch).map(|c| g[i + c] * up[c]).sum();
        for c in 0..ch {
            let lhs = g[i + c] * gu + 2.0 * eta * up[c];
            let target = v[i + c] - q1[i + c] + w[i + c] - q2[i + c];
            let right = g[i + c] * b + eta * target;
            worst = worst.max((lhs - right).abs());
            scale = scale
                .max((g[i + c] * gu).abs())
                .max((2.0 * eta * up[c]).abs())
                .max((g[i + c] * b).abs())
                .max((eta * target).abs());
        }
    }
    (worst, scale)
}

/// Column-wise univariate Potts fits of `z = u + q₁` with `γ = 2λ/η`.
pub fn v_update(state: &SolverState, cfg: &SolverConfig) -> VectorField {
    let z = state.u.add(&state.q1);
    let gamma = 2.0 * cfg.lambda / state.eta;
    fit_columns(&z, gamma, cfg.execution)
}

/// Row-wise univariate Potts fits of `z = u + q₂` with `γ = 2λ/η`.
pub fn w_update(state: &SolverState, cfg: &SolverConfig) -> VectorField {
    let z = state.u.add(&state.q2);
    let gamma = 2.0 * cfg.lambda / state.eta;
    fit_rows(&z, gamma, cfg.execution)
}

pub(crate) fn fit_columns(z: &VectorField, gamma: f64, exec: Execution) -> VectorField {
    let (rows, cols, ch) = (z.rows(), z.cols(), z.channels());
    let zs = z.as_slice();
    let fitted = map_range(exec, cols, |c| {
        let column: Vec<f64> = (0..rows)
            .flat_map(|r| {
                zs[(r * cols + c) * ch..(r * cols + c + 1) * ch]
                    .iter()
                    .copied()
            })
            .collect();
        let mut out = vec![0.0; column.len()];
        PottsWorkspace::default().fit(&column, ch, gamma, &mut out);
        out
    });
    let mut data = vec![0.0; zs.len()];
    for (c, column) in fitted.iter().enumerate() {
        for r in 0..rows {
            let dst = (r * cols + c) * ch;
            data[dst..dst + ch].copy_from_slice(&column[r * ch..(r + 1) * ch]);
        }
    }
    VectorField::from_raw(rows, cols, ch, data)
}

pub(crate) fn fit_rows(z: &VectorField, gamma: f64, exec: Execution) -> VectorField {
    let (rows, cols, ch) = (z.rows(), z.cols(), z.channels());
    let zs = z.as_slice();
    let mut data = vec![0.0; zs.len()];
    let stride = cols * ch;
    for_each_chunk(exec, &mut data, stride, |r, out| {
        PottsWorkspace::default().fit(&zs[r * stride..(r + 1) * stride], ch, gamma, out);
    });
    VectorField::from_raw(rows, cols, ch, data)
}

/// Dual ascent `q₁ + u − v`, `q₂ + u − w`.
pub fn dual_update(state: &SolverState) -> (VectorField, VectorField) {
    let q1 = state.q1.add(&state.u.sub(&state.v));
    let q2 = state.q2.add(&state.u.sub(&state.w));
    (q1, q2)
}

/// `½‖Au − b‖² + λ(‖∇₁u‖₀ + ‖∇₂u‖₀)`, or `+∞` when a configured box is
/// violated.
pub fn total_energy(data: &LinearizedData, u: &VectorField, cfg: &SolverConfig) -> Result<f64> {
    let (data_e, potts) = energy_parts(data, u, cfg.lambda)?;
    if let Some((lo, hi)) = cfg.box_bounds {
        if u.as_slice().iter().any(|&x| x < lo || x > hi) {
            return Ok(f64::INFINITY);
        }
    }
    Ok(data_e + potts)
}

fn energy_parts(data: &LinearizedData, u: &VectorField, lambda: f64) -> Result<(f64, f64)> {
    let data_e = data_energy(data, u)?;
    let jumps = count_jumps_v(u) + count_jumps_h(u);
    Ok((data_e, lambda * jumps as f64))
}

fn max_abs_diff(a: &VectorField, b: &VectorField) -> f64 {
    a.max_abs_diff(b)
}

/// Runs the splitting iterations from `v = w = init`, `q = 0`.
pub fn run(data: &LinearizedData, init: &VectorField, cfg: &SolverConfig) -> Result<SolverOutput> {
    cfg.validate(data.mode)?;
    data.check_field(init)?;
    let pixels = data.pixel_count() as f64;
    let mut state = SolverState::new(init, cfg.eta0);
    let mut trace = IterationTrace::default();
    let mut prev_eta = None;

    for k in 0..cfg.iterations {
        let u_new = u_update(data, &state, cfg)?;
        if cfg.check_invariants {
            let (res, scale) = normal_equation_residual(data, &state, &u_new, cfg.box_bounds);
            let bound = NORMAL_EQ_RTOL * (1.0 + scale);
            if res > bound {
                return Err(Error::InvariantViolated {
                    iteration: k + 1,
                    what: "u-update normal equations",
                    lhs: res,
                    rhs: bound,
                });
            }
        }
        let du = u_new.distance(&state.u);
        state.u = u_new;
        state.v = v_update(&state, cfg);
        state.w = w_update(&state, cfg);
        let (q1, q2) = dual_update(&state);
        state.q1 = q1;
        state.q2 = q2;

        let eta = state.eta;
        let (data_e, potts) = energy_parts(data, &state.u, cfg.lambda)?;
        let record = IterationRecord {
            iteration: k + 1,
            energy: data_e + potts,
            data_energy: data_e,
            potts_term: potts,
            ru: state.u.distance(&state.v),
            rw: state.u.distance(&state.w),
            q1: state.q1.norm(),
            q2: state.q2.norm(),
            eta,
            du,
            split_gap: max_abs_diff(&state.u, &state.v).max(max_abs_diff(&state.u, &state.w)),
        };

        if cfg.check_invariants {
            check_bounds(&record, cfg.lambda, pixels, prev_eta)?;
        }
        trace.records.push(record);

        prev_eta = Some(eta);
        state.eta *= cfg.sigma;
        state.iteration = k + 1;

        if let Some(tol) = cfg.stop_tolerance {
            if record.split_gap < tol {
                break;
            }
        }
    }

    Ok(SolverOutput {
        u: state.u,
        v: state.v,
        w: state.w,
        trace,
    })
}

/// Dual bound `‖q‖² ≤ 2λP/η⁽ᵏ⁾` and, from the second iteration on, the split
/// residual bound `‖u − v‖ ≤ 2√(2λP/η⁽ᵏ⁻¹⁾)` (η of the previous iteration).
fn check_bounds(
    rec: &IterationRecord,
    lambda: f64,
    pixels: f64,
    prev_eta: Option<f64>,
) -> Result<()> {
    let dual = 2.0 * lambda * pixels / rec.eta;
    for (what, q) in [("dual bound q1", rec.q1), ("dual bound q2", rec.q2)] {
        if q * q > dual {
            return Err(Error::InvariantViolated {
                iteration: rec.iteration,
                what,
                lhs: q * q,
                rhs: dual,
            });
        }
    }
    if let Some(eta) = prev_eta {
        let bound = 2.0 * (2.0 * lambda * pixels / eta).sqrt();
        for (what, r) in [
            ("residual bound u-v", rec.ru),
            ("residual bound u-w", rec.rw),
        ] {
            if r > bound {
                return Err(Error::InvariantViolated {
                    iteration: rec.iteration,
                    what,
                    lhs: r,
                    rhs: bound,
                });
            }
        }
    }
    Ok(())
}
