use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use voxelray::{Error, Result};

const INVALID_RGB: [u8; 3] = [128, 128, 128];

/// Viridis sampled at nine evenly spaced stops, dark to bright.
const VIRIDIS: [[f64; 3]; 9] = [
    [68.0, 1.0, 84.0],
    [71.0, 44.0, 122.0],
    [59.0, 81.0, 139.0],
    [44.0, 113.0, 142.0],
    [33.0, 144.0, 141.0],
    [39.0, 173.0, 129.0],
    [92.0, 200.0, 99.0],
    [170.0, 220.0, 50.0],
    [253.0, 231.0, 37.0],
];

fn viridis(t: f64) -> [u8; 3] {
    let x = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f64;
    let i = (x.floor() as usize).min(VIRIDIS.len() - 2);
    let f = x - i as f64;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    [0, 1, 2].map(|c| (a[c] + f * (b[c] - a[c])).round() as u8)
}

/// One height slice ready to draw; `values` is x-fastest, `ny` rows of `nx`.
pub struct Slice<'a> {
    pub nx: usize,
    pub ny: usize,
    pub values: &'a [f32],
    pub invalid: Option<&'a [u8]>,
}

/// Maps `v` onto the fixed `[vmin, vmax]` scale, low loss bright.
fn color(v: f32, vmin: f64, vmax: f64) -> [u8; 3] {
    if !v.is_finite() {
        return INVALID_RGB;
    }
    let t = ((vmax - v as f64) / (vmax - vmin)).clamp(0.0, 1.0);
    viridis(t)
}

/// RGB pixels, north up: image row 0 is the largest y.
pub fn rasterize(slice: &Slice, vmin: f64, vmax: f64) -> Vec<u8> {
    let mut px = Vec::with_capacity(slice.nx * slice.ny * 3);
    for row in 0..slice.ny {
        let y = slice.ny - 1 - row;
        for x in 0..slice.nx {
            let i = y * slice.nx + x;
            let masked = slice.invalid.is_some_and(|m| m[i] == 0);
            px.extend(if masked {
                INVALID_RGB
            } else {
                color(slice.values[i], vmin, vmax)
            });
        }
    }
    px
}

/// Writes an `nx × ny` PNG with the color scale bounds in tEXt chunks.
pub fn write_png(
    path: &Path,
    slice: &Slice,
    vmin: f64,
    vmax: f64,
    text: &[(&str, String)],
) -> Result<()> {
    if !(vmin.is_finite() && vmax.is_finite() && vmax > vmin) {
        return Err(Error::Argument(format!(
            "color scale needs vmin < vmax, got {vmin}..{vmax}"
        )));
    }
    let file = File::create(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let mut enc = png::Encoder::new(BufWriter::new(file), slice.nx as u32, slice.ny as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let png_err = |e: png::EncodingError| Error::Format(format!("png: {e}"));
    enc.add_text_chunk("vmin_db".into(), vmin.to_string())
        .map_err(png_err)?;
    enc.add_text_chunk("vmax_db".into(), vmax.to_string())
        .map_err(png_err)?;
    for (k, v) in text {
        enc.add_text_chunk(k.to_string(), v.clone())
            .map_err(png_err)?;
    }
    let mut w = enc.write_header().map_err(png_err)?;
    w.write_image_data(&rasterize(slice, vmin, vmax))
        .map_err(png_err)?;
    w.finish().map_err(png_err)
}
