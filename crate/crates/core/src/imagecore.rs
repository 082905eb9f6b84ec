//! Grid containers, mirror-boundary forward differences, the grouped ℓ0
//! count and integer-displacement sampling.
//!
//! Pixels are stored row-major and 0-based. A [`VectorField`] interleaves its
//! channels per pixel, so `pixel(r, c)` is a contiguous `&[f64]` of length
//! `channels`.

use crate::error::{Error, Result};

/// A pixel position on the grid (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridIndex {
    pub row: usize,
    pub col: usize,
}

/// An `rows × cols` gray-value image.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarImage {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ScalarImage {
    /// Wraps row-major `data`. Both dimensions must be at least 2 and all
    /// values finite.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidShape {
                rows,
                cols,
                channels: 1,
                reason: "images need at least 2 rows and 2 columns",
            });
        }
        if data.len() != rows * cols {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols,
            });
        }
        check_finite(&data, cols, 1)?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn constant(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &ScalarImage) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    /// Views the image as a one-channel field.
    pub fn to_field(&self) -> VectorField {
        VectorField {
            rows: self.rows,
            cols: self.cols,
            channels: 1,
            data: self.data.clone(),
        }
    }
}

/// An `rows × cols` grid of `channels`-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<f64>,
}

impl VectorField {
    pub fn new(rows: usize, cols: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || channels == 0 {
            return Err(Error::InvalidShape {
                rows,
                cols,
                channels,
                reason: "all dimensions must be positive",
            });
        }
        if data.len() != rows * cols * channels {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: rows * cols * channels,
            });
        }
        check_finite(&data, cols, channels)?;
        Ok(Self {
            rows,
            cols,
            channels,
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize, channels: usize) -> Self {
        assert!(rows > 0 && cols > 0 && channels > 0, "empty field");
        Self {
            rows,
            cols,
            channels,
            data: vec![0.0; rows * cols * channels],
        }
    }

    /// Builds a field from a per-pixel closure writing into the pixel slice.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        channels: usize,
        f: impl Fn(usize, usize, &mut [f64]),
    ) -> Result<Self> {
        let mut data = vec![0.0; rows * cols * channels];
        for (p, px) in data.chunks_mut(channels).enumerate() {
            f(p / cols, p % cols, px);
        }
        Self::new(rows, cols, channels, data)
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_raw(rows: usize, cols: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols * channels);
        Self {
            rows,
            cols,
            channels,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of pixels.
    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.rows * self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.cols + col) * self.channels + channel]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        self.data[(row * self.cols + col) * self.channels + channel] = value;
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.cols + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let start = (row * self.cols + col) * self.channels;
        &mut self.data[start..start + self.channels]
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &VectorField) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.channels == other.channels
    }

    pub(crate) fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.rows, self.cols, self.channels)
    }

    pub(crate) fn ensure_same_shape(&self, other: &VectorField) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                expected: self.shape_string(),
                found: other.shape_string(),
            })
        }
    }

    /// Extracts one channel as a one-channel field.
    pub fn channel(&self, channel: usize) -> VectorField {
        assert!(channel < self.channels);
        let data = self
            .data
            .chunks(self.channels)
            .map(|px| px[channel])
            .collect();
        Self::from_raw(self.rows, self.cols, 1, data)
    }

    /// Euclidean norm over all entries.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Euclidean norm of `self − other`.
    pub fn distance(&self, other: &VectorField) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Maximum absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &VectorField) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `self + other`, entrywise.
    pub fn add(&self, other: &VectorField) -> VectorField {
        debug_assert!(self.same_shape(other));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self::from_raw(self.rows, self.cols, self.channels, data)
    }

    /// `self − other`, entrywise.
    pub fn sub(&self, other: &VectorField) -> VectorField {
        debug_assert!(self.same_shape(other));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self::from_raw(self.rows, self.cols, self.channels, data)
    }

    /// `alpha·self + beta·other`, entrywise.
    pub fn lin_comb(&self, alpha: f64, beta: f64, other: &VectorField) -> VectorField {
        debug_assert!(self.same_shape(other));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        Self::from_raw(self.rows, self.cols, self.channels, data)
    }
}

impl From<&ScalarImage> for VectorField {
    fn from(image: &ScalarImage) -> Self {
        image.to_field()
    }
}

fn check_finite(data: &[f64], cols: usize, channels: usize) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => {
            let p = i / channels;
            Err(Error::NonFinite {
                row: p / cols,
                col: p % cols,
            })
        }
    }
}

/// Vertical forward difference `out(i,j) = x(i+1,j) − x(i,j)`, zero on the
/// last row.
pub fn forward_diff_v(field: &VectorField) -> VectorField {
    let (rows, cols, ch) = (field.rows, field.cols, field.channels);
    let stride = cols * ch;
    let mut out = vec![0.0; field.data.len()];
    for r in 0..rows.saturating_sub(1) {
        let here = &field.data[r * stride..(r + 1) * stride];
        let below = &field.data[(r + 1) * stride..(r + 2) * stride];
        for ((o, a), b) in out[r * stride..(r + 1) * stride]
            .iter_mut()
            .zip(here)
            .zip(below)
        {
            *o = b - a;
        }
    }
    VectorField::from_raw(rows, cols, ch, out)
}

/// Horizontal forward difference `out(i,j) = x(i,j+1) − x(i,j)`, zero on the
/// last column.
pub fn forward_diff_h(field: &VectorField) -> VectorField {
    let (rows, cols, ch) = (field.rows, field.cols, field.channels);
    let mut out = vec![0.0; field.data.len()];
    for r in 0..rows {
        for c in 0..cols.saturating_sub(1) {
            let base = (r * cols + c) * ch;
            for k in 0..ch {
                out[base + k] = field.data[base + ch + k] - field.data[base + k];
            }
        }
    }
    VectorField::from_raw(rows, cols, ch, out)
}

/// Grouped ℓ0 count: pixels whose whole channel vector is not zero.
pub fn grouped_l0(field: &VectorField) -> usize {
    field
        .data
        .chunks(field.channels)
        .filter(|px| px.iter().any(|&v| v != 0.0))
        .count()
}

/// Number of vertical neighbor pairs with a (grouped) jump.
pub(crate) fn count_jumps_v(field: &VectorField) -> usize {
    let stride = field.cols * field.channels;
    (0..field.rows.saturating_sub(1))
        .map(|r| {
            let here = &field.data[r * stride..(r + 1) * stride];
            let below = &field.data[(r + 1) * stride..(r + 2) * stride];
            here.chunks(field.channels)
                .zip(below.chunks(field.channels))
                .filter(|(a, b)| a != b)
                .count()
        })
        .sum()
}

/// Number of horizontal neighbor pairs with a (grouped) jump.
pub(crate) fn count_jumps_h(field: &VectorField) -> usize {
    let mut n = 0;
    for r in 0..field.rows {
        for c in 0..field.cols.saturating_sub(1) {
            if field.pixel(r, c) != field.pixel(r, c + 1) {
                n += 1;
            }
        }
    }
    n
}

/// Connected regions of a field under the grouped jump test.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Region label per pixel, row-major, numbered in scan order.
    pub labels: Vec<usize>,
    /// Per-region channel means.
    pub means: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
}

impl Partition {
    pub fn num_regions(&self) -> usize {
        self.means.len()
    }

    /// Number of distinct region means among regions that contain at least
    /// one selected pixel. Means within `tol` (max norm) of an already
    /// counted mean are not counted again.
    pub fn distinct_values(&self, selected: impl Fn(usize) -> bool, tol: f64) -> usize {
        let mut used = vec![false; self.means.len()];
        for (p, &l) in self.labels.iter().enumerate() {
            if selected(p) {
                used[l] = true;
            }
        }
        let mut reps: Vec<&[f64]> = Vec::new();
        for (mean, _) in self.means.iter().zip(used).filter(|(_, u)| *u) {
            let seen = reps
                .iter()
                .any(|r| r.iter().zip(mean).all(|(a, b)| (a - b).abs() <= tol));
            if !seen {
                reps.push(mean);
            }
        }
        reps.len()
    }
}

/// Groups 4-neighbors whose channel vectors differ by at most `tol` in the
/// max norm. With `tol = 0` this is the partition whose boundaries are
/// exactly the grouped jumps counted by the ℓ0 terms.
pub fn partition(field: &VectorField, tol: f64) -> Partition {
    let (rows, cols, ch) = (field.rows, field.cols, field.channels);
    let close = |a: usize, b: usize| {
        field.data[a * ch..(a + 1) * ch]
            .iter()
            .zip(&field.data[b * ch..(b + 1) * ch])
            .all(|(x, y)| (x - y).abs() <= tol)
    };
    let mut labels = vec![usize::MAX; rows * cols];
    let mut means = Vec::new();
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..rows * cols {
        if labels[start] != usize::MAX {
            continue;
        }
        let label = means.len();
        let mut sum = vec![0.0; ch];
        let mut size = 0;
        labels[start] = label;
        stack.push(start);
        while let Some(p) = stack.pop() {
            size += 1;
            for (s, v) in sum.iter_mut().zip(&field.data[p * ch..(p + 1) * ch]) {
                *s += v;
            }
            let (r, c) = (p / cols, p % cols);
            let neighbors = [
                (r > 0).then(|| p - cols),
                (r + 1 < rows).then(|| p + cols),
                (c > 0).then(|| p - 1),
                (c + 1 < cols).then(|| p + 1),
            ];
            for q in neighbors.into_iter().flatten() {
                if labels[q] == usize::MAX && close(p, q) {
                    labels[q] = label;
                    stack.push(q);
                }
            }
        }
        means.push(sum.into_iter().map(|s| s / size as f64).collect());
        sizes.push(size);
    }
    Partition {
        labels,
        means,
        sizes,
    }
}

/// Integer `(row, col)` displacement stored at a pixel.
///
/// Two-channel fields hold `(row, col)` shifts. One-channel fields are
/// disparities, i.e. column shifts.
#[inline]
pub(crate) fn displacement_at(displacement: &VectorField, row: usize, col: usize) -> (i64, i64) {
    let px = displacement.pixel(row, col);
    match px.len() {
        1 => (0, px[0].round() as i64),
        _ => (px[0].round() as i64, px[1].round() as i64),
    }
}

/// Source coordinate `(i, j) − ū(i, j)`, checked against the grid.
#[inline]
pub(crate) fn shifted_index(
    displacement: &VectorField,
    row: usize,
    col: usize,
) -> Result<GridIndex> {
    let (dr, dc) = displacement_at(displacement, row, col);
    let tr = row as i64 - dr;
    let tc = col as i64 - dc;
    if tr < 0 || tc < 0 || tr >= displacement.rows as i64 || tc >= displacement.cols as i64 {
        return Err(Error::OutOfGrid {
            row,
            col,
            target_row: tr,
            target_col: tc,
        });
    }
    Ok(GridIndex {
        row: tr as usize,
        col: tc as usize,
    })
}

/// `out(i,j) = image((i,j) − displacement(i,j))` for integer displacements.
///
/// A one-channel displacement shifts columns (disparity); a two-channel one
/// shifts `(row, col)`.
pub fn sample_shifted(image: &ScalarImage, displacement: &VectorField) -> Result<ScalarImage> {
    sample_field_shifted(&image.to_field(), displacement).map(|f| ScalarImage {
        rows: f.rows,
        cols: f.cols,
        data: f.data,
    })
}

/// Channelwise [`sample_shifted`] for a whole field.
pub(crate) fn sample_field_shifted(
    field: &VectorField,
    displacement: &VectorField,
) -> Result<VectorField> {
    if field.rows != displacement.rows || field.cols != displacement.cols {
        return Err(Error::ShapeMismatch {
            expected: field.shape_string(),
            found: displacement.shape_string(),
        });
    }
    let ch = field.channels;
    let mut out = Vec::with_capacity(field.data.len());
    for r in 0..field.rows {
        for c in 0..field.cols {
            let src = shifted_index(displacement, r, c)?;
            out.extend_from_slice(field.pixel(src.row, src.col));
        }
    }
    Ok(VectorField::from_raw(field.rows, field.cols, ch, out))
}
