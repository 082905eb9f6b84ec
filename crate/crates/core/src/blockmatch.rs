//! Integer displacement initializers by block matching with normalized
//! cross correlation, followed by a median filter.
//!
//! Disparities are column shifts: pixel `(i, j)` of the first image is
//! compared against `(i, j − s)` of the second. Flow displacements are
//! `(row, col)` shifts with the same sign convention.

use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::imagecore::{shifted_index, ScalarImage, VectorField};

/// Added under the square root of the NCC denominator.
pub const NCC_EPSILON: f64 = 1e-12;

/// Block matching parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchConfig {
    /// Half width of the square block; 3 gives 7×7 blocks.
    pub block_radius: usize,
    /// Inclusive search range for row shifts (flow only).
    pub row_range: (i64, i64),
    /// Inclusive search range for column shifts (disparity and flow).
    pub col_range: (i64, i64),
    /// Half width of the median window; 1 gives 3×3, 0 disables it.
    pub median_radius: usize,
    pub execution: Execution,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            block_radius: 3,
            row_range: (-4, 4),
            col_range: (-4, 4),
            median_radius: 1,
            execution: Execution::default(),
        }
    }
}

impl MatchConfig {
    /// Horizontal-only search over `min..=max`.
    pub fn disparity(min: i64, max: i64) -> Self {
        Self {
            row_range: (0, 0),
            col_range: (min, max),
            ..Self::default()
        }
    }

    /// Rectangular search over rows and columns.
    pub fn flow(row_range: (i64, i64), col_range: (i64, i64)) -> Self {
        Self {
            row_range,
            col_range,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.block_radius < 1 {
            return Err(Error::InvalidConfig(
                "block radius must be at least 1".into(),
            ));
        }
        if self.row_range.0 > self.row_range.1 || self.col_range.0 > self.col_range.1 {
            return Err(Error::InvalidConfig(format!(
                "empty search range rows {:?} cols {:?}",
                self.row_range, self.col_range
            )));
        }
        Ok(())
    }
}

/// Normalized cross correlation of two equally sized sample sets,
/// `Σ(a−ā)(b−b̄) / √(Σ(a−ā)²·Σ(b−b̄)² + ε)`.
pub fn ncc(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "ncc needs equal-size blocks");
    if a.is_empty() {
        return 0.0;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (da, db) = (x - ma, y - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    sab / (saa * sbb + NCC_EPSILON).sqrt()
}

/// Candidate shifts in tie-break order: smallest squared norm first, then
/// lexicographic.
fn candidates(row_range: (i64, i64), col_range: (i64, i64)) -> Vec<(i64, i64)> {
    let mut out: Vec<(i64, i64)> = (row_range.0..=row_range.1)
        .flat_map(|r| (col_range.0..=col_range.1).map(move |c| (r, c)))
        .collect();
    out.sort_by_key(|&(r, c)| (r * r + c * c, r, c));
    out
}

/// Best shift for one pixel, scanning `cands` in tie-break order.
fn match_pixel(
    f1: &ScalarImage,
    f2: &ScalarImage,
    row: usize,
    col: usize,
    radius: usize,
    cands: &[(i64, i64)],
) -> Option<(i64, i64)> {
    let (rows, cols) = (f1.rows() as i64, f1.cols() as i64);
    let (r, c) = (row as i64, col as i64);
    let rad = radius as i64;
    let mut a = Vec::with_capacity((2 * radius + 1).pow(2));
    let mut b = Vec::with_capacity(a.capacity());
    let mut best: Option<((i64, i64), f64)> = None;
    for &(sr, sc) in cands {
        let (tr, tc) = (r - sr, c - sc);
        if tr < 0 || tc < 0 || tr >= rows || tc >= cols {
            continue;
        }
        a.clear();
        b.clear();
        for dr in -rad..=rad {
            let (ar, br) = (r + dr, tr + dr);
            if ar < 0 || br < 0 || ar >= rows || br >= rows {
                continue;
            }
            for dc in -rad..=rad {
                let (ac, bc) = (c + dc, tc + dc);
                if ac < 0 || bc < 0 || ac >= cols || bc >= cols {
                    continue;
                }
                a.push(f1.get(ar as usize, ac as usize));
                b.push(f2.get(br as usize, bc as usize));
            }
        }
        let score = ncc(&a, &b);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some(((sr, sc), score));
        }
    }
    best.map(|(s, _)| s)
}

fn check_pair(f1: &ScalarImage, f2: &ScalarImage) -> Result<()> {
    if !f1.same_shape(f2) {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}", f1.rows(), f1.cols()),
            found: format!("{}x{}", f2.rows(), f2.cols()),
        });
    }
    Ok(())
}

fn run_matcher(
    f1: &ScalarImage,
    f2: &ScalarImage,
    cfg: &MatchConfig,
    row_range: (i64, i64),
) -> Result<Vec<(i64, i64)>> {
    cfg.validate()?;
    check_pair(f1, f2)?;
    let cands = candidates(row_range, cfg.col_range);
    let cols = f1.cols();
    let found = map_range(cfg.execution, f1.len(), |p| {
        match_pixel(f1, f2, p / cols, p % cols, cfg.block_radius, &cands)
    });
    found
        .into_iter()
        .enumerate()
        .map(|(p, s)| {
            s.ok_or(Error::EmptySearch {
                row: p / cols,
                col: p % cols,
            })
        })
        .collect()
}

/// Integer disparity initializer (one channel of column shifts).
pub fn init_disparity(
    f1: &ScalarImage,
    f2: &ScalarImage,
    cfg: &MatchConfig,
) -> Result<VectorField> {
    let shifts = run_matcher(f1, f2, cfg, (0, 0))?;
    let raw = VectorField::from_raw(
        f1.rows(),
        f1.cols(),
        1,
        shifts.iter().map(|&(_, c)| c as f64).collect(),
    );
    finish(raw, cfg, (0, 0))
}

/// Integer flow initializer (two channels, `(row, col)` shifts).
pub fn init_flow(f1: &ScalarImage, f2: &ScalarImage, cfg: &MatchConfig) -> Result<VectorField> {
    let shifts = run_matcher(f1, f2, cfg, cfg.row_range)?;
    let raw = VectorField::from_raw(
        f1.rows(),
        f1.cols(),
        2,
        shifts
            .iter()
            .flat_map(|&(r, c)| [r as f64, c as f64])
            .collect(),
    );
    finish(raw, cfg, cfg.row_range)
}

/// Median filtering, clamping to the admissible shifts and a final in-grid
/// check.
fn finish(raw: VectorField, cfg: &MatchConfig, row_range: (i64, i64)) -> Result<VectorField> {
    let mut field = median_filter(&raw, cfg.median_radius);
    clamp_admissible(&mut field, row_range, cfg.col_range);
    for r in 0..field.rows() {
        for c in 0..field.cols() {
            shifted_index(&field, r, c)?;
        }
    }
    Ok(field)
}

fn clamp_admissible(field: &mut VectorField, row_range: (i64, i64), col_range: (i64, i64)) {
    let (rows, cols) = (field.rows() as i64, field.cols() as i64);
    let ch = field.channels();
    for r in 0..field.rows() {
        for c in 0..field.cols() {
            let px = field.pixel_mut(r, c);
            // Shift s keeps the source in-grid iff pos − (len − 1) ≤ s ≤ pos.
            let clamp = |v: f64, pos: i64, len: i64, range: (i64, i64)| {
                let lo = range.0.max(pos - (len - 1));
                let hi = range.1.min(pos);
                v.clamp(lo as f64, hi as f64)
            };
            let last = ch - 1;
            px[last] = clamp(px[last], c as i64, cols, col_range);
            if ch == 2 {
                px[0] = clamp(px[0], r as i64, rows, row_range);
            }
        }
    }
}

/// Per-channel median over a `(2r+1)²` window clipped at the borders.
///
/// Clipped windows with an even count take the lower median so outputs stay
/// drawn from the input values.
pub fn median_filter(field: &VectorField, radius: usize) -> VectorField {
    if radius == 0 {
        return field.clone();
    }
    let (rows, cols, ch) = (field.rows(), field.cols(), field.channels());
    let mut out = field.clone();
    let mut window = Vec::with_capacity((2 * radius + 1).pow(2));
    for r in 0..rows {
        let (r0, r1) = (r.saturating_sub(radius), (r + radius).min(rows - 1));
        for c in 0..cols {
            let (c0, c1) = (c.saturating_sub(radius), (c + radius).min(cols - 1));
            for k in 0..ch {
                window.clear();
                for rr in r0..=r1 {
                    for cc in c0..=c1 {
                        window.push(field.get(rr, cc, k));
                    }
                }
                window.sort_by(f64::total_cmp);
                out.set(r, c, k, window[(window.len() - 1) / 2]);
            }
        }
    }
    out
}
