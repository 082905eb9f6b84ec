//! Linearized brightness-invariance data terms.
//!
//! Around an integer initializer `ū`, `f₂(x − u) ≈ f₂(x − ū) − ∇f₂(x − ū)·(u − ū)`,
//! so matching `f₁` gives one linear equation per pixel, `g·u = rhs` with
//!
//! ```text
//! g   = ∇f₂ sampled at x − ū
//! rhs = g·ū + f₂(x − ū) − f₁(x)
//! ```
//!
//! The operator is never materialized; `g` is stored per pixel.

use crate::error::{Error, Result};
use crate::imagecore::{
    forward_diff_h, forward_diff_v, sample_field_shifted, sample_shifted, ScalarImage, VectorField,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// One unknown per pixel, the column shift.
    Disparity,
    /// Two unknowns per pixel, `(row, col)` shifts.
    Flow,
}

impl Mode {
    pub fn channels(self) -> usize {
        match self {
            Mode::Disparity => 1,
            Mode::Flow => 2,
        }
    }
}

/// Per-pixel coefficients `g` and right-hand side of `½‖g⊙u − rhs‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedData {
    pub coeffs: VectorField,
    pub rhs: VectorField,
    pub mode: Mode,
}

impl LinearizedData {
    /// Assembles data from raw coefficient and right-hand side fields.
    pub fn new(coeffs: VectorField, rhs: VectorField, mode: Mode) -> Result<Self> {
        if coeffs.channels() != mode.channels() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coefficient channels", mode.channels()),
                found: coeffs.shape_string(),
            });
        }
        if rhs.channels() != 1 || rhs.rows() != coeffs.rows() || rhs.cols() != coeffs.cols() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}x1", coeffs.rows(), coeffs.cols()),
                found: rhs.shape_string(),
            });
        }
        Ok(Self { coeffs, rhs, mode })
    }

    pub fn rows(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn cols(&self) -> usize {
        self.coeffs.cols()
    }

    pub fn channels(&self) -> usize {
        self.mode.channels()
    }

    pub fn pixel_count(&self) -> usize {
        self.coeffs.pixel_count()
    }

    /// `(g·u − rhs)` at one pixel.
    #[inline]
    pub fn residual_at(&self, p: usize, u: &[f64]) -> f64 {
        let ch = self.channels();
        let g = &self.coeffs.as_slice()[p * ch..(p + 1) * ch];
        g.iter().zip(u).map(|(g, u)| g * u).sum::<f64>() - self.rhs.as_slice()[p]
    }

    pub(crate) fn check_field(&self, u: &VectorField) -> Result<()> {
        if u.rows() != self.rows() || u.cols() != self.cols() || u.channels() != self.channels() {
            return Err(Error::ShapeMismatch {
                expected: self.coeffs.shape_string(),
                found: u.shape_string(),
            });
        }
        Ok(())
    }
}

fn check_inputs(f1: &ScalarImage, f2: &ScalarImage, ubar: &VectorField, ch: usize) -> Result<()> {
    if !f1.same_shape(f2) || ubar.rows() != f1.rows() || ubar.cols() != f1.cols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", f1.rows(), f1.cols()),
            found: format!("{}x{} and {}", f2.rows(), f2.cols(), ubar.shape_string()),
        });
    }
    if ubar.channels() != ch {
        return Err(Error::ShapeMismatch {
            expected: format!("{ch}-channel initializer"),
            found: ubar.shape_string(),
        });
    }
    Ok(())
}

fn rhs_field(
    f1: &ScalarImage,
    warped: &ScalarImage,
    coeffs: &VectorField,
    ubar: &VectorField,
) -> VectorField {
    let ch = coeffs.channels();
    let rhs = (0..f1.len())
        .map(|p| {
            let g = &coeffs.as_slice()[p * ch..(p + 1) * ch];
            let ub = &ubar.as_slice()[p * ch..(p + 1) * ch];
            let gu: f64 = g.iter().zip(ub).map(|(g, u)| g * u).sum();
            gu + warped.as_slice()[p] - f1.as_slice()[p]
        })
        .collect();
    VectorField::from_raw(f1.rows(), f1.cols(), 1, rhs)
}

/// Data term for disparity: `g₁` is the horizontal forward difference of
/// `f₂`, sampled at `(i, j − ū₁)`.
pub fn build_disparity_data(
    f1: &ScalarImage,
    f2: &ScalarImage,
    ubar: &VectorField,
) -> Result<LinearizedData> {
    check_inputs(f1, f2, ubar, 1)?;
    let grad = forward_diff_h(&f2.to_field());
    let coeffs = sample_field_shifted(&grad, ubar)?;
    let warped = sample_shifted(f2, ubar)?;
    let rhs = rhs_field(f1, &warped, &coeffs, ubar);
    LinearizedData::new(coeffs, rhs, Mode::Disparity)
}

/// Data term for flow: `(g₁, g₂)` are the vertical and horizontal forward
/// differences of `f₂`, sampled at `(i, j) − ū`.
pub fn build_flow_data(
    f1: &ScalarImage,
    f2: &ScalarImage,
    ubar: &VectorField,
) -> Result<LinearizedData> {
    check_inputs(f1, f2, ubar, 2)?;
    let f2f = f2.to_field();
    let gv = forward_diff_v(&f2f);
    let gh = forward_diff_h(&f2f);
    let grad = VectorField::from_raw(
        f2.rows(),
        f2.cols(),
        2,
        gv.as_slice()
            .iter()
            .zip(gh.as_slice())
            .flat_map(|(&a, &b)| [a, b])
            .collect(),
    );
    let coeffs = sample_field_shifted(&grad, ubar)?;
    let warped = sample_shifted(f2, ubar)?;
    let rhs = rhs_field(f1, &warped, &coeffs, ubar);
    LinearizedData::new(coeffs, rhs, Mode::Flow)
}

/// `½ Σ_pixels (g·u − rhs)²`.
pub fn data_energy(data: &LinearizedData, u: &VectorField) -> Result<f64> {
    data.check_field(u)?;
    let ch = data.channels();
    Ok(0.5
        * u.as_slice()
            .chunks(ch)
            .enumerate()
            .map(|(p, up)| {
                let r = data.residual_at(p, up);
                r * r
            })
            .sum::<f64>())
}
