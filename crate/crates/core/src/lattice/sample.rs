use serde::{Deserialize, Serialize};

use super::{LatticeError, LatticeState};
use crate::field::{FlowField, FlowUnits};

/// Axis-aligned physical rectangle, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Window {
    pub fn new(x0: f64, y0: f64, width: f64, height: f64) -> Self {
        Window { x0, y0, width, height }
    }

    /// Centre of cell `(i, j)` of a `w×h` grid laid over the window.
    pub fn cell_center(&self, i: usize, j: usize, w: usize, h: usize) -> [f64; 2] {
        [
            self.x0 + (i as f64 + 0.5) * self.width / w as f64,
            self.y0 + (j as f64 + 0.5) * self.height / h as f64,
        ]
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]x[{}, {}] m", self.x0, self.x0 + self.width, self.y0, self.y0 + self.height)
    }
}

/// Bilinear samples of the velocity (m/s) at the cell centres of a `w×h`
/// grid over `window`. Samples inside the cylinder are zeroed and marked
/// invalid.
pub fn sample_velocity_field(
    state: &LatticeState,
    window: Window,
    (w, h): (usize, usize),
) -> Result<FlowField, LatticeError> {
    let dx = state.units().dx;
    let (nx, ny) = (state.nx(), state.ny());
    let (lx, ly) = (nx as f64 * dx, ny as f64 * dx);
    let eps = 1e-12 * lx.max(ly);
    if w == 0
        || h == 0
        || !(window.width > 0.0 && window.height > 0.0)
        || window.x0 < -eps
        || window.y0 < -eps
        || window.x0 + window.width > lx + eps
        || window.y0 + window.height > ly + eps
    {
        return Err(LatticeError::WindowOutside(window.to_string()));
    }
    let disc = state.discretization();
    let scale = state.units().velocity();
    let (ux, uy) = (state.velocity_x(), state.velocity_y());
    let mut field = FlowField::zeros(w, h, FlowUnits::MetersPerSecond);
    for j in 0..h {
        for i in 0..w {
            let [px, py] = window.cell_center(i, j, w, h);
            // Lattice coordinates: node k at (k + ½)·dx.
            let gx = (px / dx - 0.5).clamp(0.0, (nx - 1) as f64);
            let gy = (py / dx - 0.5).clamp(0.0, (ny - 1) as f64);
            let k = j * w + i;
            if state.config().cylinder {
                let (rx, ry) = (px / dx - 0.5 - disc.center[0], py / dx - 0.5 - disc.center[1]);
                if rx * rx + ry * ry <= disc.radius * disc.radius {
                    field.valid[k] = false;
                    continue;
                }
            }
            let x0 = (gx.floor() as usize).min(nx.saturating_sub(2));
            let y0 = (gy.floor() as usize).min(ny.saturating_sub(2));
            let (tx, ty) = (gx - x0 as f64, gy - y0 as f64);
            let at = |v: &[f64], x: usize, y: usize| v[y * nx + x];
            let lerp = |v: &[f64]| {
                let a = at(v, x0, y0) * (1.0 - tx) + at(v, x0 + 1, y0) * tx;
                let b = at(v, x0, y0 + 1) * (1.0 - tx) + at(v, x0 + 1, y0 + 1) * tx;
                a * (1.0 - ty) + b * ty
            };
            field.u[k] = lerp(ux) * scale;
            field.v[k] = lerp(uy) * scale;
        }
    }
    Ok(field)
}
