//! Two-component vector fields on regular grids and the raw f32 grid format.
//!
//! Grids are row-major, row 0 at the smallest `y` (image rows grow with `y`).

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowUnits {
    MetersPerSecond,
    PixelsPerFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub valid: Vec<bool>,
    pub units: FlowUnits,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize, units: FlowUnits) -> Self {
        let n = width * height;
        FlowField { width, height, u: vec![0.0; n], v: vec![0.0; n], valid: vec![true; n], units }
    }

    pub fn from_fn(width: usize, height: usize, units: FlowUnits, mut f: impl FnMut(usize, usize) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(width, height, units);
        for j in 0..height {
            for i in 0..width {
                let [u, v] = f(i, j);
                out.u[j * width + i] = u;
                out.v[j * width + i] = v;
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> [f64; 2] {
        let k = j * self.width + i;
        [self.u[k], self.v[k]]
    }

    /// Bilinear interpolation at fractional grid coordinates (cell centres at
    /// integers), clamped to the grid.
    pub fn interpolate(&self, gx: f64, gy: f64) -> [f64; 2] {
        let (w, h) = (self.width, self.height);
        let gx = gx.clamp(0.0, (w - 1) as f64);
        let gy = gy.clamp(0.0, (h - 1) as f64);
        let x0 = (gx.floor() as usize).min(w.saturating_sub(2));
        let y0 = (gy.floor() as usize).min(h.saturating_sub(2));
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let (tx, ty) = (gx - x0 as f64, gy - y0 as f64);
        let lerp = |c: &[f64]| {
            let a = c[y0 * w + x0] * (1.0 - tx) + c[y0 * w + x1] * tx;
            let b = c[y1 * w + x0] * (1.0 - tx) + c[y1 * w + x1] * tx;
            a * (1.0 - ty) + b * ty
        };
        [lerp(&self.u), lerp(&self.v)]
    }

    pub fn scaled(&self, s: f64, units: FlowUnits) -> Self {
        FlowField {
            u: self.u.iter().map(|x| x * s).collect(),
            v: self.v.iter().map(|x| x * s).collect(),
            units,
            ..self.clone()
        }
    }

    /// Area-weighted box resampling to `w×h`, averaging valid inputs only.
    /// Output cells with no valid input are zero and invalid.
    pub fn box_resample(&self, w: usize, h: usize) -> Self {
        let mut out = Self::zeros(w, h, self.units);
        let sx = self.width as f64 / w as f64;
        let sy = self.height as f64 / h as f64;
        for j in 0..h {
            let (ya, yb) = (j as f64 * sy, (j + 1) as f64 * sy);
            for i in 0..w {
                let (xa, xb) = (i as f64 * sx, (i + 1) as f64 * sx);
                let (mut su, mut sv, mut sw) = (0.0, 0.0, 0.0);
                for y in ya.floor() as usize..(yb.ceil() as usize).min(self.height) {
                    let wy = (yb.min((y + 1) as f64) - ya.max(y as f64)).max(0.0);
                    for x in xa.floor() as usize..(xb.ceil() as usize).min(self.width) {
                        let k = y * self.width + x;
                        if !self.valid[k] {
                            continue;
                        }
                        let wt = wy * (xb.min((x + 1) as f64) - xa.max(x as f64)).max(0.0);
                        su += wt * self.u[k];
                        sv += wt * self.v[k];
                        sw += wt;
                    }
                }
                let k = j * w + i;
                if sw > 0.0 {
                    out.u[k] = su / sw;
                    out.v[k] = sv / sw;
                } else {
                    out.valid[k] = false;
                }
            }
        }
        out
    }

    /// Interleaved `(u, v)` f32 values, row-major.
    pub fn to_interleaved_f32(&self) -> Vec<f32> {
        self.u.iter().zip(&self.v).flat_map(|(u, v)| [*u as f32, *v as f32]).collect()
    }

    pub fn from_interleaved_f32(width: usize, height: usize, data: &[f32], units: FlowUnits) -> Option<Self> {
        if data.len() != width * height * 2 {
            return None;
        }
        let mut out = Self::zeros(width, height, units);
        for k in 0..width * height {
            out.u[k] = data[2 * k] as f64;
            out.v[k] = data[2 * k + 1] as f64;
        }
        Some(out)
    }

    /// Cosine similarity of the two fields seen as flat vectors.
    pub fn cosine_similarity(&self, other: &FlowField) -> f64 {
        let dot: f64 = self.u.iter().zip(&other.u).map(|(a, b)| a * b).sum::<f64>()
            + self.v.iter().zip(&other.v).map(|(a, b)| a * b).sum::<f64>();
        let na = self.u.iter().chain(&self.v).map(|a| a * a).sum::<f64>().sqrt();
        let nb = other.u.iter().chain(&other.v).map(|a| a * a).sum::<f64>().sqrt();
        dot / (na * nb)
    }
}

/// Magic of the raw grid format.
pub const RAW_MAGIC: [u8; 4] = *b"CDG1";

/// A raw little-endian f32 grid: 16-byte header (magic, width, height,
/// channels as u32 LE), then `width·height·channels` f32 LE values,
/// row-major with channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGrid {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

impl RawGrid {
    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        let expected = self.width as usize * self.height as usize * self.channels as usize;
        if self.data.len() != expected {
            return Err(io::Error::new(io::ErrorKind::InvalidInput, "raw grid data length mismatch"));
        }
        let mut buf = Vec::with_capacity(16 + 4 * expected);
        buf.extend_from_slice(&RAW_MAGIC);
        buf.extend_from_slice(&self.width.to_le_bytes());
        buf.extend_from_slice(&self.height.to_le_bytes());
        buf.extend_from_slice(&self.channels.to_le_bytes());
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_from(mut r: impl Read) -> io::Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if header[..4] != RAW_MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "bad raw grid magic"));
        }
        let word = |k: usize| u32::from_le_bytes(header[k..k + 4].try_into().unwrap());
        let (width, height, channels) = (word(4), word(8), word(12));
        let n = width as usize * height as usize * channels as usize;
        let mut bytes = vec![0u8; 4 * n];
        r.read_exact(&mut bytes)?;
        let data = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(RawGrid { width, height, channels, data })
    }

    pub fn from_field(field: &FlowField) -> Self {
        RawGrid { width: field.width as u32, height: field.height as u32, channels: 2, data: field.to_interleaved_f32() }
    }

    pub fn from_scalar(width: usize, height: usize, values: &[f64]) -> Self {
        RawGrid { width: width as u32, height: height as u32, channels: 1, data: values.iter().map(|v| *v as f32).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_downsamples_to_same_constant() {
        let f = FlowField::from_fn(512, 512, FlowUnits::PixelsPerFrame, |_, _| [1.25, -0.5]);
        let d = f.box_resample(16, 16);
        assert!(d.u.iter().all(|u| (*u - 1.25).abs() < 1e-12));
        assert!(d.v.iter().all(|v| (*v + 0.5).abs() < 1e-12));
        assert!(d.valid.iter().all(|v| *v));
    }

    #[test]
    fn box_average_of_linear_field_is_center_value() {
        let f = FlowField::from_fn(64, 32, FlowUnits::MetersPerSecond, |i, j| [i as f64 * 0.5, 2.0 + j as f64]);
        let d = f.box_resample(8, 4);
        // block (i, j) covers inputs 8i..8i+8, centre at 8i + 3.5
        for j in 0..4 {
            for i in 0..8 {
                let [u, v] = d.get(i, j);
                assert!((u - (8 * i) as f64 * 0.5 - 1.75).abs() < 1e-12);
                assert!((v - 2.0 - (8 * j) as f64 - 3.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_inputs_are_skipped() {
        let mut f = FlowField::from_fn(4, 4, FlowUnits::MetersPerSecond, |_, _| [1.0, 0.0]);
        for j in 0..2 {
            for i in 0..2 {
                f.valid[j * 4 + i] = false;
                f.u[j * 4 + i] = 100.0;
            }
        }
        let d = f.box_resample(2, 2);
        assert!(!d.valid[0]);
        assert_eq!(d.u[0], 0.0);
        assert_eq!(d.u[1], 1.0);
    }

    #[test]
    fn raw_grid_header_layout() {
        let g = RawGrid { width: 3, height: 2, channels: 2, data: (0..12).map(|v| v as f32).collect() };
        let mut bytes = Vec::new();
        g.write_to(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 16 + 48);
        assert_eq!(&bytes[..4], b"CDG1");
        assert_eq!(&bytes[4..8], &3u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &1.0f32.to_le_bytes());
        assert_eq!(RawGrid::read_from(&bytes[..]).unwrap(), g);
    }

    #[test]
    fn raw_grid_rejects_bad_magic() {
        let bytes = [0u8; 16];
        assert!(RawGrid::read_from(&bytes[..]).is_err());
    }
}
