//! Dense inverse search: coarse-to-fine patch alignment by inverse
//! compositional Lucas–Kanade, densified by photometric-error weighting.

use serde::{Deserialize, Serialize};

use super::{FlowError, Image, ImagePair};
use crate::field::{FlowField, FlowUnits};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DisParams {
    /// Square patch side, px.
    pub patch: usize,
    /// Distance between patch origins, px.
    pub stride: usize,
    /// Pyramid levels including full resolution.
    pub levels: usize,
    /// Finest level processed (0 = full resolution); finer levels are
    /// filled by upsampling.
    pub finest_level: usize,
    /// Gauss–Newton iterations per patch.
    pub iterations: usize,
    /// Patches whose mean absolute residual exceeds this are not trusted.
    pub residual_threshold: f32,
    /// Floor of the photometric error in the densification weights.
    pub weight_floor: f32,
}

impl Default for DisParams {
    fn default() -> Self {
        DisParams {
            patch: 8,
            stride: 4,
            levels: 4,
            finest_level: 0,
            iterations: 16,
            residual_threshold: 0.1,
            weight_floor: 0.01,
        }
    }
}

/// Dense flow field on one pyramid level.
struct Dense {
    w: usize,
    h: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl Dense {
    fn zeros(w: usize, h: usize) -> Self {
        Dense { w, h, u: vec![0.0; w * h], v: vec![0.0; w * h] }
    }

    /// Bilinear upsampling to `w×h`, scaling vectors by `w / self.w`.
    fn upsample(&self, w: usize, h: usize) -> Self {
        // Source index pair and weight along one axis, clamped at the edges.
        fn taps(src: usize, dst: usize) -> Vec<(usize, usize, f32)> {
            let s = src as f32 / dst as f32;
            (0..dst)
                .map(|x| {
                    let g = ((x as f32 + 0.5) * s - 0.5).clamp(0.0, (src - 1) as f32);
                    let a = (g as usize).min(src.saturating_sub(2));
                    (a, (a + 1).min(src - 1), g - a as f32)
                })
                .collect()
        }
        let mut out = Dense::zeros(w, h);
        let (tx, ty) = (taps(self.w, w), taps(self.h, h));
        let scale = w as f32 / self.w as f32;
        let mut ru = vec![0.0f32; self.w];
        let mut rv = vec![0.0f32; self.w];
        for (y, &(y0, y1, t)) in ty.iter().enumerate() {
            let (a, b) = (y0 * self.w, y1 * self.w);
            for x in 0..self.w {
                ru[x] = (self.u[a + x] * (1.0 - t) + self.u[b + x] * t) * scale;
                rv[x] = (self.v[a + x] * (1.0 - t) + self.v[b + x] * t) * scale;
            }
            let (ou, ov) = (&mut out.u[y * w..(y + 1) * w], &mut out.v[y * w..(y + 1) * w]);
            for (x, &(x0, x1, t)) in tx.iter().enumerate() {
                ou[x] = ru[x0] * (1.0 - t) + ru[x1] * t;
                ov[x] = rv[x0] * (1.0 - t) + rv[x1] * t;
            }
        }
        out
    }
}

/// Patch origins along one axis: every `stride`, plus a last patch flush
/// with the far edge.
fn origins(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=len - patch).step_by(stride).collect();
    if *out.last().unwrap() != len - patch {
        out.push(len - patch);
    }
    out
}

fn gradients(img: &Image) -> (Vec<f32>, Vec<f32>) {
    let (w, h) = (img.width, img.height);
    let d = &img.data;
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    for y in 0..h {
        let (yd, yu) = (y.saturating_sub(1), (y + 1).min(h - 1));
        let sy = 1.0 / (yu - yd) as f32;
        let (r, rd, ru) = (y * w, yd * w, yu * w);
        for x in 0..w {
            gy[r + x] = (d[ru + x] - d[rd + x]) * sy;
        }
        for x in 1..w - 1 {
            gx[r + x] = 0.5 * (d[r + x + 1] - d[r + x - 1]);
        }
        gx[r] = d[r + 1] - d[r];
        gx[r + w - 1] = d[r + w - 1] - d[r + w - 2];
    }
    (gx, gy)
}

/// Samples the `p×p` block of `img` whose top-left corner sits at
/// `(x0 + ux, y0 + uy)`, bilinearly, clamping at the borders.
fn warp_patch(img: &Image, x0: usize, y0: usize, ux: f32, uy: f32, p: usize, out: &mut [f32]) {
    let (w, h) = (img.width as i64, img.height as i64);
    let (fx, fy) = (ux.floor(), uy.floor());
    let (tx, ty) = (ux - fx, uy - fy);
    let bx = x0 as i64 + fx as i64;
    let by = y0 as i64 + fy as i64;
    let (w00, w10, w01, w11) = ((1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty);
    let d = &img.data;
    if bx >= 0 && by >= 0 && bx + p as i64 + 1 <= w - 1 && by + p as i64 + 1 <= h - 1 {
        let (bx, by, wu) = (bx as usize, by as usize, w as usize);
        for (j, o) in out[..p * p].chunks_exact_mut(p).enumerate() {
            let r0 = &d[(by + j) * wu + bx..][..p + 1];
            let r1 = &d[(by + j + 1) * wu + bx..][..p + 1];
            for i in 0..p {
                o[i] = w00 * r0[i] + w10 * r0[i + 1] + w01 * r1[i] + w11 * r1[i + 1];
            }
        }
        return;
    }
    for j in 0..p {
        let ya = (by + j as i64).clamp(0, h - 1) as usize;
        let yb = (by + j as i64 + 1).clamp(0, h - 1) as usize;
        for i in 0..p {
            let xa = (bx + i as i64).clamp(0, w - 1) as usize;
            let xb = (bx + i as i64 + 1).clamp(0, w - 1) as usize;
            let wu = w as usize;
            out[j * p + i] = w00 * d[ya * wu + xa] + w10 * d[ya * wu + xb] + w01 * d[yb * wu + xa] + w11 * d[yb * wu + xb];
        }
    }
}

struct PatchResult {
    x: usize,
    y: usize,
    u: f32,
    v: f32,
    trusted: bool,
    /// Offset of this patch's per-pixel densification weights in the shared
    /// buffer.
    weights: Option<usize>,
}

/// One pyramid level: align every patch starting from `init`, then densify.
/// Returns the dense flow and, per pixel, whether a trusted patch covers it.
fn refine_level(i0: &Image, i1: &Image, init: &Dense, params: &DisParams) -> (Dense, Vec<bool>) {
    let (w, h, p) = (i0.width, i0.height, params.patch);
    let (gx, gy) = gradients(i0);
    let n = p * p;
    let mut t = vec![0.0f32; n];
    let mut tgx = vec![0.0f32; n];
    let mut tgy = vec![0.0f32; n];
    let mut warped = vec![0.0f32; n];
    let mut patches = Vec::new();
    let mut weights: Vec<f32> = Vec::new();
    for &py in &origins(h, p, params.stride) {
        for &px in &origins(w, p, params.stride) {
            let (mut hxx, mut hxy, mut hyy) = (0.0f32, 0.0f32, 0.0f32);
            for j in 0..p {
                let k = (py + j) * w + px;
                let (rt, ra, rb) = (&i0.data[k..k + p], &gx[k..k + p], &gy[k..k + p]);
                t[j * p..(j + 1) * p].copy_from_slice(rt);
                tgx[j * p..(j + 1) * p].copy_from_slice(ra);
                tgy[j * p..(j + 1) * p].copy_from_slice(rb);
                for (a, b) in ra.iter().zip(rb) {
                    hxx += a * a;
                    hxy += a * b;
                    hyy += b * b;
                }
            }
            let c = (py + p / 2) * w + px + p / 2;
            let (u0, v0) = (init.u[c], init.v[c]);
            let trace = hxx + hyy;
            let det = hxx * hyy - hxy * hxy;
            if !(trace > 1e-8) || !(det > 1e-6 * trace * trace) {
                patches.push(PatchResult { x: px, y: py, u: u0, v: v0, trusted: false, weights: None });
                continue;
            }
            let (mut u, mut v) = (u0, v0);
            for _ in 0..params.iterations {
                warp_patch(i1, px, py, u, v, p, &mut warped);
                let (mut bx, mut by) = (0.0f32, 0.0f32);
                for (((wk, tk), a), b) in warped.iter().zip(&t).zip(&tgx).zip(&tgy) {
                    let e = wk - tk;
                    bx += a * e;
                    by += b * e;
                }
                let du = (hyy * bx - hxy * by) / det;
                let dv = (hxx * by - hxy * bx) / det;
                u -= du;
                v -= dv;
                if du * du + dv * dv < 1e-4 {
                    break;
                }
            }
            // Updates that wander further than a patch are discarded.
            if (u - u0).powi(2) + (v - v0).powi(2) > (p * p) as f32 || !u.is_finite() || !v.is_finite() {
                u = u0;
                v = v0;
            }
            warp_patch(i1, px, py, u, v, p, &mut warped);
            let offset = weights.len();
            let mut residual = 0.0;
            for (a, b) in warped.iter().zip(&t) {
                let e = (a - b).abs();
                residual += e;
                weights.push(1.0 / e.max(params.weight_floor));
            }
            residual /= n as f32;
            patches.push(PatchResult {
                x: px,
                y: py,
                u,
                v,
                trusted: residual <= params.residual_threshold,
                weights: Some(offset),
            });
        }
    }

    let mut num_u = vec![0.0f32; w * h];
    let mut num_v = vec![0.0f32; w * h];
    let mut den = vec![0.0f32; w * h];
    let mut valid = vec![false; w * h];
    for pr in &patches {
        let Some(offset) = pr.weights else { continue };
        for (j, wts) in weights[offset..offset + n].chunks_exact(p).enumerate() {
            let k = (pr.y + j) * w + pr.x;
            let (nu, nv, dn) = (&mut num_u[k..k + p], &mut num_v[k..k + p], &mut den[k..k + p]);
            for i in 0..p {
                nu[i] += wts[i] * pr.u;
                nv[i] += wts[i] * pr.v;
                dn[i] += wts[i];
            }
            if pr.trusted {
                valid[k..k + p].iter_mut().for_each(|v| *v = true);
            }
        }
    }
    let mut out = Dense::zeros(w, h);
    for k in 0..w * h {
        if den[k] > 0.0 {
            out.u[k] = num_u[k] / den[k];
            out.v[k] = num_v[k] / den[k];
        } else {
            out.u[k] = init.u[k];
            out.v[k] = init.v[k];
        }
    }
    (out, valid)
}

/// Dense displacement (px/frame) carrying `pair.first` onto `pair.second`,
/// at the resolution of the images. Pixels not covered by a trusted patch
/// are marked invalid.
pub fn estimate_flow(pair: &ImagePair, params: &DisParams) -> Result<FlowField, FlowError> {
    let (a, b) = (&pair.first, &pair.second);
    if (a.width, a.height) != (b.width, b.height) {
        return Err(FlowError::SizeMismatch(a.width, a.height, b.width, b.height));
    }
    let p = params.patch.max(2);
    let params = DisParams { patch: p, stride: params.stride.max(1), ..*params };
    let mut pyr0 = vec![a.clone()];
    let mut pyr1 = vec![b.clone()];
    while pyr0.len() < params.levels.max(1) {
        let next = pyr0.last().unwrap().half();
        if next.width < p || next.height < p {
            break;
        }
        pyr1.push(pyr1.last().unwrap().half());
        pyr0.push(next);
    }
    if pyr0.len() < 2 {
        return Err(FlowError::TooSmall(a.width, a.height, p));
    }
    let finest = params.finest_level.min(pyr0.len() - 1);
    let top = pyr0.len() - 1;
    let mut flow = Dense::zeros(pyr0[top].width, pyr0[top].height);
    let mut valid = Vec::new();
    for level in (finest..=top).rev() {
        let (w, h) = (pyr0[level].width, pyr0[level].height);
        let init = if (flow.w, flow.h) == (w, h) { flow } else { flow.upsample(w, h) };
        let (next, ok) = refine_level(&pyr0[level], &pyr1[level], &init, &params);
        flow = next;
        valid = ok;
    }
    if finest > 0 {
        let (lw, lh) = (flow.w, flow.h);
        flow = flow.upsample(a.width, a.height);
        let mut full = vec![false; a.width * a.height];
        for y in 0..a.height {
            for x in 0..a.width {
                let (sx, sy) = ((x * lw / a.width).min(lw - 1), (y * lh / a.height).min(lh - 1));
                full[y * a.width + x] = valid[sy * lw + sx];
            }
        }
        valid = full;
    }
    let mut field = FlowField::zeros(a.width, a.height, FlowUnits::PixelsPerFrame);
    for k in 0..a.width * a.height {
        field.u[k] = flow.u[k] as f64;
        field.v[k] = flow.v[k] as f64;
        field.valid[k] = valid[k];
    }
    Ok(field)
}
