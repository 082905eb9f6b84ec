//! Image and flow-file I/O.
//!
//! Gray values are kept on the 8-bit scale `[0, 255]` as `f64`; color inputs
//! are converted with `0.299R + 0.587G + 0.114B`. `.flo` files follow the
//! Middlebury layout: the tag `PIEH` (the float 202021.25), width, height,
//! then row-major `(horizontal, vertical)` pairs of little-endian `f32`.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageError, ImageReader};

use crate::error::{Error, Result};
use crate::imagecore::{ScalarImage, VectorField};

pub const FLO_TAG: f32 = 202021.25;
/// Flow components at or above this magnitude mark unknown pixels.
pub const FLO_UNKNOWN: f32 = 1e9;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| io_err(path, e))?
        .with_guessed_format()
        .map_err(|e| io_err(path, e))?;
    if reader.format().is_none() {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: "unrecognized file signature".into(),
        });
    }
    reader.decode().map_err(|e| match e {
        ImageError::Unsupported(u) => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: u.to_string(),
        },
        ImageError::IoError(io) if io.kind() != std::io::ErrorKind::UnexpectedEof => {
            io_err(path, io)
        }
        other => Error::CorruptHeader {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    })
}

fn luminance(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Reads PGM/PPM (plain or binary) or PNG as gray values in `[0, 255]`.
/// 16-bit inputs are rescaled by `255/65535`.
pub fn read_image(path: impl AsRef<Path>) -> Result<ScalarImage> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match &img {
        DynamicImage::ImageLuma8(b) => b.as_raw().iter().map(|&v| v as f64).collect(),
        DynamicImage::ImageLuma16(b) => b
            .as_raw()
            .iter()
            .map(|&v| v as f64 * 255.0 / 65535.0)
            .collect(),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
            let b = img.to_luma16();
            b.as_raw()
                .iter()
                .map(|&v| v as f64 * 255.0 / 65535.0)
                .collect()
        }
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => img
            .to_rgb8()
            .pixels()
            .map(|p| luminance(p[0] as f64, p[1] as f64, p[2] as f64))
            .collect(),
        _ => img
            .to_rgb16()
            .pixels()
            .map(|p| luminance(p[0] as f64, p[1] as f64, p[2] as f64) * 255.0 / 65535.0)
            .collect(),
    };
    ScalarImage::new(h, w, data).map_err(|e| Error::CorruptHeader {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Reads a gray image without rescaling: 8-bit files give `0..=255`,
/// 16-bit files `0..=65535`. Used for encoded ground-truth disparities.
pub fn read_raw_gray(path: impl AsRef<Path>) -> Result<VectorField> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match &img {
        DynamicImage::ImageLuma16(b) => b.as_raw().iter().map(|&v| v as f64).collect(),
        DynamicImage::ImageLuma8(b) => b.as_raw().iter().map(|&v| v as f64).collect(),
        _ => img.to_luma8().as_raw().iter().map(|&v| v as f64).collect(),
    };
    VectorField::new(h, w, 1, data)
}

/// Writes a one-channel field as a 16-bit binary PGM.
///
/// With `scale = Some(s)` each value is stored as `round(s·x)` clamped to
/// `0..=65535`. Without it the field is min-max normalized to the full
/// 16-bit range.
pub fn write_pgm16(path: impl AsRef<Path>, field: &VectorField, scale: Option<f64>) -> Result<()> {
    let path = path.as_ref();
    let values = field.as_slice();
    let encoded: Vec<u16> = match scale {
        Some(s) => values
            .iter()
            .map(|&x| (x * s).round().clamp(0.0, 65535.0) as u16)
            .collect(),
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            values
                .iter()
                .map(|&x| {
                    if span > 0.0 {
                        ((x - lo) / span * 65535.0).round() as u16
                    } else {
                        0
                    }
                })
                .collect()
        }
    };
    let mut bytes = format!("P5\n{} {}\n65535\n", field.cols(), field.rows()).into_bytes();
    for v in encoded {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Writes an 8-bit RGB image (row-major `[r, g, b]` triples) as PNG or PPM,
/// chosen by extension.
pub fn write_rgb(path: impl AsRef<Path>, width: usize, height: usize, rgb: Vec<u8>) -> Result<()> {
    let path = path.as_ref();
    let buf = image::RgbImage::from_raw(width as u32, height as u32, rgb).ok_or_else(|| {
        Error::SizeMismatch {
            path: path.to_path_buf(),
            detail: format!("pixel buffer does not match {width}x{height}"),
        }
    })?;
    buf.save(path).map_err(|e| match e {
        ImageError::IoError(io) => io_err(path, io),
        other => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    })
}

/// Serializes a two-channel `(row, col)` flow field to `.flo` bytes.
/// The file stores `(horizontal, vertical) = (col, row)` per pixel.
pub fn encode_flo(field: &VectorField) -> Vec<u8> {
    assert_eq!(field.channels(), 2, ".flo holds two-channel fields");
    let mut out = Vec::with_capacity(12 + 8 * field.pixel_count());
    out.extend_from_slice(&FLO_TAG.to_le_bytes());
    out.extend_from_slice(&(field.cols() as i32).to_le_bytes());
    out.extend_from_slice(&(field.rows() as i32).to_le_bytes());
    for px in field.as_slice().chunks(2) {
        out.extend_from_slice(&(px[1] as f32).to_le_bytes());
        out.extend_from_slice(&(px[0] as f32).to_le_bytes());
    }
    out
}

/// Parses `.flo` bytes into a two-channel `(row, col)` field. Unknown pixels
/// keep their sentinel values; see [`is_unknown_flow`].
pub fn decode_flo(path: &Path, bytes: &[u8]) -> Result<VectorField> {
    if bytes.len() < 12 {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            detail: format!("{} bytes is shorter than the 12-byte header", bytes.len()),
        });
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    let tag = word(0);
    if f32::from_le_bytes(tag) != FLO_TAG {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
            found: tag,
        });
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width <= 0 || height <= 0 {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            detail: format!("invalid dimensions {width}x{height}"),
        });
    }
    let (w, h) = (width as usize, height as usize);
    let expected = 12 + 8 * w * h;
    if bytes.len() != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            detail: format!("{w}x{h} needs {expected} bytes, found {}", bytes.len()),
        });
    }
    let mut data = Vec::with_capacity(2 * w * h);
    for p in 0..w * h {
        let horizontal = f32::from_le_bytes(word(12 + 8 * p));
        let vertical = f32::from_le_bytes(word(16 + 8 * p));
        data.push(vertical as f64);
        data.push(horizontal as f64);
    }
    VectorField::new(h, w, 2, data).map_err(|e| Error::SizeMismatch {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

pub fn write_flo(path: impl AsRef<Path>, field: &VectorField) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_flo(field)).map_err(|e| io_err(path, e))
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<VectorField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_flo(path, &bytes)
}

/// Whether a flow vector carries the unknown-pixel sentinel.
#[inline]
pub fn is_unknown_flow(px: &[f64]) -> bool {
    px.iter().any(|v| v.abs() >= FLO_UNKNOWN as f64)
}
