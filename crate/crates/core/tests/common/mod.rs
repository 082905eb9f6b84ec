//! Synthetic scenes and random problem instances shared by the integration
//! tests, the acceptance suite and the benches.
#![allow(dead_code)]

use pottsflow::dataterm::{LinearizedData, Mode};
use pottsflow::{ScalarImage, VectorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gaussian-blurred uniform noise rescaled to span `[0, 255]`.
pub fn smooth_texture(rows: usize, cols: usize, sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let noise: Vec<f64> = (0..rows * cols).map(|_| rng.gen::<f64>()).collect();
    let radius = (3.0 * sigma).ceil() as i64;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let blur = |src: &[f64], stride: usize, step: usize, len: usize, n: usize| {
        let mut out = vec![0.0; src.len()];
        for line in 0..n {
            for i in 0..len {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    let j = (i as i64 + k as i64 - radius).clamp(0, len as i64 - 1) as usize;
                    acc += w * src[line * stride + j * step];
                }
                out[line * stride + i * step] = acc / norm;
            }
        }
        out
    };
    let h = blur(&noise, cols, 1, cols, rows);
    let v = blur(&h, 1, cols, rows, cols);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter().map(|x| (x - lo) / (hi - lo) * 255.0).collect()
}

pub struct Scene {
    pub f1: ScalarImage,
    pub f2: ScalarImage,
    /// Ground truth in the initializer's layout: one channel of column
    /// shifts for disparity, `(row, col)` for flow.
    pub truth: VectorField,
}

pub const SCENE_SIZE: usize = 128;
pub const MARGIN: usize = 12;

/// Whether a pixel lies at least `margin` pixels from every border.
pub fn interior_mask(rows: usize, cols: usize, margin: usize) -> Vec<bool> {
    (0..rows * cols)
        .map(|p| {
            let (r, c) = (p / cols, p % cols);
            r >= margin && c >= margin && r + margin < rows && c + margin < cols
        })
        .collect()
}

/// Blur width of the synthetic textures.
pub const TEXTURE_SIGMA: f64 = 1.0;

/// `f₂` is a crop of a larger texture; `f₁(x) = texture(x − d(x))` where
/// `d` is 0 on the background and 2, 5, 8 on three rectangles.
pub fn disparity_scene(seed: u64) -> Scene {
    let n = SCENE_SIZE;
    let big = n + 2 * MARGIN;
    let tex = smooth_texture(big, big, TEXTURE_SIGMA, seed);
    let at =
        |r: i64, c: i64| tex[(r + MARGIN as i64) as usize * big + (c + MARGIN as i64) as usize];
    let rects: [(usize, usize, usize, usize, f64); 3] = [
        (10, 12, 50, 60, 2.0),
        (70, 20, 115, 70, 5.0),
        (30, 75, 95, 118, 8.0),
    ];
    let truth_at = |r: usize, c: usize| {
        rects
            .iter()
            .find(|&&(r0, c0, r1, c1, _)| r >= r0 && r < r1 && c >= c0 && c < c1)
            .map_or(0.0, |rect| rect.4)
    };
    let f2 = ScalarImage::from_fn(n, n, |r, c| at(r as i64, c as i64)).unwrap();
    let f1 =
        ScalarImage::from_fn(n, n, |r, c| at(r as i64, c as i64 - truth_at(r, c) as i64)).unwrap();
    let truth = VectorField::from_fn(n, n, 1, |r, c, px| px[0] = truth_at(r, c)).unwrap();
    Scene { f1, f2, truth }
}

/// Background moving by `(2, 1)`, a rectangle moving by `(−1, 3)`.
pub fn flow_scene(seed: u64) -> Scene {
    let n = SCENE_SIZE;
    let big = n + 2 * MARGIN;
    let tex = smooth_texture(big, big, TEXTURE_SIGMA, seed);
    let at =
        |r: i64, c: i64| tex[(r + MARGIN as i64) as usize * big + (c + MARGIN as i64) as usize];
    let truth_at = |r: usize, c: usize| {
        if (30..100).contains(&r) && (25..90).contains(&c) {
            (-1.0, 3.0)
        } else {
            (2.0, 1.0)
        }
    };
    let f2 = ScalarImage::from_fn(n, n, |r, c| at(r as i64, c as i64)).unwrap();
    let f1 = ScalarImage::from_fn(n, n, |r, c| {
        let (dr, dc) = truth_at(r, c);
        at(r as i64 - dr as i64, c as i64 - dc as i64)
    })
    .unwrap();
    let truth = VectorField::from_fn(n, n, 2, |r, c, px| {
        let (dr, dc) = truth_at(r, c);
        px[0] = dr;
        px[1] = dc;
    })
    .unwrap();
    Scene { f1, f2, truth }
}

/// Random linearized data with coefficients and right-hand sides uniform in
/// `[−1, 1]`.
pub fn random_data(rows: usize, cols: usize, mode: Mode, seed: u64) -> LinearizedData {
    let mut rng = rng(seed);
    let ch = mode.channels();
    let coeffs: Vec<f64> = (0..rows * cols * ch)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let rhs: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    LinearizedData::new(
        VectorField::new(rows, cols, ch, coeffs).unwrap(),
        VectorField::new(rows, cols, 1, rhs).unwrap(),
        mode,
    )
    .unwrap()
}
