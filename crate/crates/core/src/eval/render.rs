use std::path::Path;

use crate::kv::write_file;
use crate::Result;

/// Fixed rate → colour table (mm/h):
///
/// | rate          | colour          |
/// |---------------|-----------------|
/// | undefined     | black           |
/// | < 0.2         | light grey      |
/// | [0.2, 1)      | pale blue       |
/// | [1, 2.4)      | blue            |
/// | [2.4, 7)      | yellow          |
/// | ≥ 7           | red             |
pub fn rate_color(v: f32) -> [u8; 3] {
    if !v.is_finite() {
        [0, 0, 0]
    } else if v < 0.2 {
        [240, 240, 240]
    } else if v < 1.0 {
        [160, 200, 255]
    } else if v < 2.4 {
        [60, 120, 230]
    } else if v < 7.0 {
        [250, 210, 40]
    } else {
        [220, 30, 30]
    }
}

/// Red (0) → yellow (0.5) → green (1) ramp for scores; black if undefined.
pub fn csi_color(v: f32) -> [u8; 3] {
    if !v.is_finite() {
        return [0, 0, 0];
    }
    let v = v.clamp(0.0, 1.0);
    let lerp = |a: [f32; 3], b: [f32; 3], t: f32| {
        [0, 1, 2].map(|i| (a[i] + (b[i] - a[i]) * t).round() as u8)
    };
    let (red, yellow, green) = ([215.0, 48.0, 39.0], [254.0, 224.0, 139.0], [26.0, 152.0, 80.0]);
    if v < 0.5 {
        lerp(red, yellow, v * 2.0)
    } else {
        lerp(yellow, green, (v - 0.5) * 2.0)
    }
}

/// Writes a binary (P6) portable pixmap, one pixel per cell.
pub fn write_ppm(path: &Path, rows: usize, cols: usize, values: &[f32], color: fn(f32) -> [u8; 3]) -> Result<()> {
    let mut out = format!("P6\n{cols} {rows}\n255\n").into_bytes();
    out.reserve(3 * values.len());
    for &v in values {
        out.extend_from_slice(&color(v));
    }
    write_file(path, &out)
}
