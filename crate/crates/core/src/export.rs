//! Snapshot and curve files: vorticity PNGs, graymaps, raw f32 grids, CSV.
//!
//! All writers produce the same bytes for the same input.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};

use crate::field::RawGrid;
use crate::flowsense::Image;
use crate::lattice::LatticeState;

fn to_io(e: image::ImageError) -> io::Error {
    match e {
        image::ImageError::IoError(e) => e,
        other => io::Error::other(other),
    }
}

/// Diverging colormap: white at zero, saturating to red for `+scale` and
/// blue for `−scale`.
pub fn diverging_rgb(value: f64, scale: f64) -> [u8; 3] {
    let t = if scale > 0.0 { (value / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |t: f64| (255.0 * (1.0 - t.abs())).round() as u8;
    if t >= 0.0 {
        [255, fade(t), fade(t)]
    } else {
        [fade(t), fade(t), 255]
    }
}

/// RGB pixels of a scalar grid (row 0 at the bottom of the picture).
/// Solid cells are painted grey.
pub fn scalar_rgb(width: usize, height: usize, values: &[f64], solid: Option<&[bool]>, scale: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(width * height * 3);
    for y in (0..height).rev() {
        for x in 0..width {
            let k = y * width + x;
            if solid.is_some_and(|s| s[k]) {
                out.extend_from_slice(&[96, 96, 96]);
            } else {
                out.extend_from_slice(&diverging_rgb(values[k], scale));
            }
        }
    }
    out
}

/// Robust color scale: the 99th percentile of |ω| over fluid cells.
pub fn vorticity_scale(values: &[f64], solid: &[bool]) -> f64 {
    let mut mags: Vec<f64> = values.iter().zip(solid).filter(|(_, s)| !**s).map(|(v, _)| v.abs()).collect();
    if mags.is_empty() {
        return 0.0;
    }
    mags.sort_by(f64::total_cmp);
    mags[((mags.len() - 1) as f64 * 0.99).round() as usize]
}

pub fn write_png_rgb(w: impl Write, width: usize, height: usize, rgb: &[u8]) -> io::Result<()> {
    PngEncoder::new(w).write_image(rgb, width as u32, height as u32, ExtendedColorType::Rgb8).map_err(to_io)
}

/// Vorticity snapshot, red/blue for positive/negative. `scale` of `None`
/// picks [`vorticity_scale`].
pub fn write_vorticity_png(w: impl Write, state: &LatticeState, scale: Option<f64>) -> io::Result<()> {
    let omega = state.vorticity();
    let scale = scale.unwrap_or_else(|| vorticity_scale(&omega, state.solid_mask()));
    let rgb = scalar_rgb(state.nx(), state.ny(), &omega, Some(state.solid_mask()), scale);
    write_png_rgb(w, state.nx(), state.ny(), &rgb)
}

/// Binary PGM of a grayscale image in [0, 1].
pub fn write_pgm(w: impl Write, img: &Image) -> io::Result<()> {
    PnmEncoder::new(w)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&img.to_gray8(), img.width as u32, img.height as u32, ExtendedColorType::L8)
        .map_err(to_io)
}

pub fn write_png_gray(w: impl Write, img: &Image) -> io::Result<()> {
    PngEncoder::new(w)
        .write_image(&img.to_gray8(), img.width as u32, img.height as u32, ExtendedColorType::L8)
        .map_err(to_io)
}

/// Vorticity as a one-channel raw grid, 1/s.
pub fn vorticity_grid(state: &LatticeState) -> RawGrid {
    RawGrid::from_scalar(state.nx(), state.ny(), &state.vorticity())
}

/// Creates `path` (and its parent directories) and hands a buffered writer
/// to `f`.
pub fn write_file(path: impl AsRef<Path>, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> io::Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()
}

/// One running-average curve as `t_s,pct_vs_nocontrol`.
pub fn write_curve_csv(w: impl Write, times: &[f64], pct: &[f64]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["t_s", "pct_vs_nocontrol"]).map_err(io::Error::other)?;
    for (t, p) in times.iter().zip(pct) {
        out.write_record([t.to_string(), p.to_string()]).map_err(io::Error::other)?;
    }
    out.flush()
}
