use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use super::{estimate_flow, render, DisParams, FlowError, ImagePair, Optics, ParticleSet};
use crate::field::{FlowField, FlowUnits};
use crate::lattice::Window;

/// Pixels next to the image border excluded from the error statistics;
/// content there enters or leaves the field of view between exposures.
pub const BENCH_BORDER: usize = 8;

/// A synthetic image pair with its true displacement field (px/frame).
#[derive(Debug, Clone)]
pub struct BenchCase {
    pub name: String,
    pub pair: ImagePair,
    pub truth: FlowField,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub name: String,
    /// Average endpoint error over valid interior pixels, px.
    pub aee: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
    pub valid_fraction: f64,
    /// Wall-clock time of the estimate, seconds.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BenchReport {
    pub cases: Vec<CaseResult>,
}

impl BenchReport {
    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn worst_aee(&self) -> Option<f64> {
        self.cases.iter().map(|c| c.aee).max_by(f64::total_cmp)
    }

    pub fn slowest(&self) -> Option<f64> {
        self.cases.iter().map(|c| c.seconds).max_by(f64::total_cmp)
    }

    pub fn write_csv(&self, w: impl Write) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["name", "aee_px", "p50_px", "p95_px", "max_px", "valid_fraction", "seconds"])?;
        for c in &self.cases {
            out.serialize((&c.name, c.aee, c.p50, c.p95, c.max, c.valid_fraction, c.seconds))?;
        }
        out.flush()?;
        Ok(())
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let k = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[k]
}

/// Runs the estimator on every case and reports endpoint-error statistics
/// and per-pair wall-clock time.
pub fn benchmark_aee(cases: &[BenchCase], params: &DisParams) -> Result<BenchReport, FlowError> {
    let mut report = BenchReport::default();
    for case in cases {
        let start = Instant::now();
        let est = estimate_flow(&case.pair, params)?;
        let seconds = start.elapsed().as_secs_f64();
        let (w, h) = (est.width, est.height);
        let mut errors = Vec::new();
        let mut interior = 0usize;
        for y in BENCH_BORDER..h.saturating_sub(BENCH_BORDER) {
            for x in BENCH_BORDER..w.saturating_sub(BENCH_BORDER) {
                interior += 1;
                let k = y * w + x;
                if est.valid[k] {
                    errors.push((est.u[k] - case.truth.u[k]).hypot(est.v[k] - case.truth.v[k]));
                }
            }
        }
        let valid_fraction = errors.len() as f64 / interior.max(1) as f64;
        let aee = if errors.is_empty() { f64::NAN } else { errors.iter().sum::<f64>() / errors.len() as f64 };
        errors.sort_by(f64::total_cmp);
        report.cases.push(CaseResult {
            name: case.name.clone(),
            aee,
            p50: percentile(&errors, 0.5),
            p95: percentile(&errors, 0.95),
            max: errors.last().copied().unwrap_or(f64::NAN),
            valid_fraction,
            seconds,
        });
    }
    Ok(report)
}

/// Renders a pair whose particles move through `displacement` (px/frame,
/// sampled at the pixel centres of a `w×h` image). The truth is the
/// midpoint displacement started from each pixel centre.
pub fn shifted_pair(name: &str, displacement: &FlowField, seed: u64) -> BenchCase {
    let (w, h) = (displacement.width, displacement.height);
    let optics = Optics {
        width_px: w,
        height_px: h,
        ..Optics::for_window(Window::new(0.0, 0.0, w as f64, h as f64))
    };
    let mut particles = ParticleSet::seed(&optics, seed);
    let first = render(&particles, &optics, seed.wrapping_mul(2).wrapping_add(1));
    particles.seed_and_advect(displacement, 1.0);
    let second = render(&particles, &optics, seed.wrapping_mul(2).wrapping_add(2));
    let truth = FlowField::from_fn(w, h, FlowUnits::PixelsPerFrame, |i, j| {
        let [u, v] = displacement.interpolate(i as f64, j as f64);
        displacement.interpolate(i as f64 + 0.5 * u, j as f64 + 0.5 * v)
    });
    BenchCase { name: name.to_string(), pair: ImagePair { first, second, t0: 0.0, dt: 1.0 }, truth }
}

/// Uniform translations by each of `shifts` (px/frame) on `size×size` images.
pub fn uniform_shift_suite(size: usize, shifts: &[[f64; 2]], seed: u64) -> Vec<BenchCase> {
    shifts
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let field = FlowField::from_fn(size, size, FlowUnits::PixelsPerFrame, |_, _| *s);
            shifted_pair(&format!("shift_{:+.2}_{:+.2}", s[0], s[1]), &field, seed + k as u64)
        })
        .collect()
}

/// Velocity snapshots (any units, any resolution) rescaled so that the
/// largest displacement is `max_px`, resampled to `size×size` pixels.
pub fn wake_suite(fields: &[FlowField], size: usize, max_px: f64, seed: u64) -> Vec<BenchCase> {
    fields
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let peak = f.u.iter().zip(&f.v).map(|(u, v)| u.hypot(*v)).fold(0.0, f64::max);
            let scale = if peak > 0.0 { max_px / peak } else { 0.0 };
            let disp = FlowField::from_fn(size, size, FlowUnits::PixelsPerFrame, |i, j| {
                let gx = (i as f64 + 0.5) * f.width as f64 / size as f64 - 0.5;
                let gy = (j as f64 + 0.5) * f.height as f64 / size as f64 - 0.5;
                let [u, v] = f.interpolate(gx, gy);
                [u * scale, v * scale]
            });
            shifted_pair(&format!("wake_{k}"), &disp, seed + k as u64)
        })
        .collect()
}
