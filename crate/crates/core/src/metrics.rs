//! Error measures against ground truth.

use crate::error::{Error, Result};
use crate::imagecore::VectorField;
use crate::io::is_unknown_flow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisparityMetrics {
    /// Fraction of valid pixels with `|u − gt| > tau`.
    pub bad_pixel_rate: f64,
    pub mean_abs_error: f64,
    pub valid_pixels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMetrics {
    pub average_endpoint_error: f64,
    /// Degrees, between the augmented vectors `(u, 1)` and `(gt, 1)`.
    pub average_angular_error: f64,
    pub valid_pixels: usize,
}

fn check(u: &VectorField, gt: &VectorField, channels: usize) -> Result<()> {
    if u.channels() != channels {
        return Err(Error::ShapeMismatch {
            expected: format!("{channels}-channel field"),
            found: u.shape_string(),
        });
    }
    u.ensure_same_shape(gt)
}

/// Disparity errors over the pixels where `valid` is true (all pixels when
/// `valid` is `None`).
pub fn disparity_metrics(
    u: &VectorField,
    gt: &VectorField,
    tau: f64,
    valid: Option<&[bool]>,
) -> Result<DisparityMetrics> {
    check(u, gt, 1)?;
    if let Some(mask) = valid {
        if mask.len() != u.pixel_count() {
            return Err(Error::LengthMismatch {
                left: mask.len(),
                right: u.pixel_count(),
            });
        }
    }
    let (mut bad, mut abs, mut n) = (0usize, 0.0, 0usize);
    for (p, (a, b)) in u.as_slice().iter().zip(gt.as_slice()).enumerate() {
        if valid.is_some_and(|m| !m[p]) {
            continue;
        }
        let e = (a - b).abs();
        abs += e;
        bad += (e > tau) as usize;
        n += 1;
    }
    Ok(DisparityMetrics {
        bad_pixel_rate: bad as f64 / n as f64,
        mean_abs_error: abs / n as f64,
        valid_pixels: n,
    })
}

/// Flow errors over pixels whose ground truth is known, optionally further
/// restricted by `valid`. Fields are `(row, col)` ordered.
pub fn flow_metrics(
    u: &VectorField,
    gt: &VectorField,
    valid: Option<&[bool]>,
) -> Result<FlowMetrics> {
    check(u, gt, 2)?;
    let (mut epe, mut ang, mut n) = (0.0, 0.0, 0usize);
    for (p, (a, b)) in u
        .as_slice()
        .chunks(2)
        .zip(gt.as_slice().chunks(2))
        .enumerate()
    {
        if is_unknown_flow(b) || valid.is_some_and(|m| !m[p]) {
            continue;
        }
        epe += (a[0] - b[0]).hypot(a[1] - b[1]);
        let dot = a[0] * b[0] + a[1] * b[1] + 1.0;
        let na = (a[0] * a[0] + a[1] * a[1] + 1.0).sqrt();
        let nb = (b[0] * b[0] + b[1] * b[1] + 1.0).sqrt();
        ang += (dot / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees();
        n += 1;
    }
    Ok(FlowMetrics {
        average_endpoint_error: epe / n as f64,
        average_angular_error: ang / n as f64,
        valid_pixels: n,
    })
}
