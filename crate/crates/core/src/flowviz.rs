//! Flow color coding: hue encodes direction, brightness encodes magnitude.

use crate::imagecore::VectorField;

/// HSV (hue in degrees, saturation and value in `[0, 1]`) to 8-bit RGB.
pub fn hsv_to_rgb(hue: f64, saturation: f64, value: f64) -> [u8; 3] {
    let h = hue.rem_euclid(360.0) / 60.0;
    let c = value * saturation;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = value - c;
    let to8 = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [to8(r), to8(g), to8(b)]
}

/// Colors a `(row, col)` flow field. Hue is `atan2(vertical, horizontal)`
/// in `[0, 360)`, saturation 1, value `min(‖flow‖ / m, 1)` where `m` is
/// `max_magnitude` or the largest norm in the field.
///
/// Returns row-major RGB triples.
pub fn colorize_flow(field: &VectorField, max_magnitude: Option<f64>) -> Vec<u8> {
    assert_eq!(field.channels(), 2, "flow fields have two channels");
    let norm = |px: &[f64]| px[0].hypot(px[1]);
    let cap =
        max_magnitude.unwrap_or_else(|| field.as_slice().chunks(2).map(norm).fold(0.0, f64::max));
    let mut out = Vec::with_capacity(3 * field.pixel_count());
    for px in field.as_slice().chunks(2) {
        let (vertical, horizontal) = (px[0], px[1]);
        let value = if cap > 0.0 {
            (norm(px) / cap).min(1.0)
        } else {
            0.0
        };
        let hue = vertical.atan2(horizontal).to_degrees().rem_euclid(360.0);
        out.extend_from_slice(&hsv_to_rgb(hue, 1.0, value));
    }
    out
}
