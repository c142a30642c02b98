//! D2Q9 distributions, the fused stream–collide kernel and boundary handling.
//!
//! Direction numbering:
//! ```text
//!   6   2   5
//!    \  |  /
//!   3 - 0 - 1
//!    /  |  \
//!   7   4   8
//! ```
//! Node `(x, y)` sits at lattice coordinate `(x, y)`, physical position
//! `((x + ½)·dx, (y + ½)·dx)`. Channel walls lie half a cell outside the first
//! and last rows. Stored distributions are post-collision.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Collision, Discretization, FluidConfig, UnitConversion, XBoundary, YBoundary};
use super::LatticeError;

pub const Q: usize = 9;
pub const C: [[i32; 2]; Q] = [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1], [1, 1], [-1, 1], [-1, -1], [1, -1]];
pub const W: [f64; Q] = [
    4.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 9.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
    1.0 / 36.0,
];
pub const OPP: [usize; Q] = [0, 3, 4, 1, 2, 7, 8, 5, 6];
/// Direction with the `y` component reversed.
pub const MIRROR_Y: [usize; Q] = [0, 1, 4, 3, 2, 8, 7, 6, 5];
const PAIRS: [(usize, usize); 4] = [(1, 3), (2, 4), (5, 7), (6, 8)];

#[inline]
pub fn equilibrium(i: usize, rho: f64, ux: f64, uy: f64) -> f64 {
    let cu = C[i][0] as f64 * ux + C[i][1] as f64 * uy;
    W[i] * rho * (1.0 + 3.0 * cu + 4.5 * cu * cu - 1.5 * (ux * ux + uy * uy))
}

/// A fluid→solid link on the cylinder surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLink {
    pub cell: usize,
    /// Direction pointing from the fluid node into the cylinder.
    pub dir: usize,
    /// Unit surface tangent (counter-clockwise) at the link midpoint.
    pub tangent: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct LatticeState {
    config: FluidConfig,
    disc: Discretization,
    f: Vec<f64>,
    scratch: Vec<f64>,
    rho: Vec<f64>,
    ux: Vec<f64>,
    uy: Vec<f64>,
    solid: Vec<bool>,
    boundary: Vec<bool>,
    /// Per-column density relaxation rate of the outlet absorbing layer.
    sponge: Vec<f64>,
    links: Vec<BoundaryLink>,
    omega: f64,
    steps: u64,
}

/// Read-only context shared by every row of one update.
struct Kernel<'a> {
    nx: usize,
    ny: usize,
    x_periodic: bool,
    y_boundary: YBoundary,
    wp: f64,
    wm: f64,
    /// Bulk relaxation rate; `Some` selects the regularized operator.
    regularized: Option<f64>,
    accel: [f64; 2],
    forced: bool,
    inflow: f64,
    /// Surface speed `ω·R` in lattice units.
    wall_speed: f64,
    /// Per-weight mass correction of the moving-wall term.
    wall_leak: f64,
    center: [f64; 2],
    src: &'a [f64],
    solid: &'a [bool],
    boundary: &'a [bool],
    sponge: &'a [f64],
}

/// Peak density relaxation rate at the outlet.
const SPONGE_STRENGTH: f64 = 0.1;

impl LatticeState {
    /// Builds the grid and fills it with the equilibrium of the uniform inflow,
    /// plus the seeded transverse startup perturbation.
    pub fn new(config: FluidConfig) -> Result<Self, LatticeError> {
        let disc = Discretization::new(&config)?;
        let (nx, ny) = (disc.nx, disc.ny);
        let n = nx * ny;
        let mut solid = vec![false; n];
        if config.cylinder {
            let r2 = disc.radius * disc.radius;
            for y in 0..ny {
                for x in 0..nx {
                    let dx = x as f64 - disc.center[0];
                    let dy = y as f64 - disc.center[1];
                    solid[y * nx + x] = dx * dx + dy * dy <= r2;
                }
            }
        }
        let mut state = LatticeState {
            config,
            disc,
            f: vec![0.0; n * Q],
            scratch: vec![0.0; n * Q],
            rho: vec![1.0; n],
            ux: vec![0.0; n],
            uy: vec![0.0; n],
            solid,
            boundary: vec![false; n],
            sponge: vec![0.0; nx],
            links: Vec::new(),
            omega: 0.0,
            steps: 0,
        };
        state.classify_nodes();
        if state.config.x_boundary == XBoundary::InflowOutflow {
            let len = state.config.sponge_diameters * 2.0 * disc.radius;
            let start = nx as f64 - len;
            for (x, s) in state.sponge.iter_mut().enumerate() {
                if len > 0.0 && x as f64 >= start {
                    let t = (x as f64 - start) / len;
                    *s = SPONGE_STRENGTH * t * t;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(state.config.seed);
        let amp = state.config.perturbation * disc.inflow;
        let inflow = disc.inflow;
        state.fill_with(|_, _| {
            let v = if amp != 0.0 { amp * rng.random_range(-1.0..=1.0) } else { 0.0 };
            (1.0, inflow, v)
        });
        Ok(state)
    }

    /// Overwrites every fluid node with the equilibrium of `field(x, y)`,
    /// which returns `(ρ, u_x, u_y)` in lattice units. Nodes are visited in
    /// row-major order.
    pub fn fill_with(&mut self, mut field: impl FnMut(usize, usize) -> (f64, f64, f64)) {
        let nx = self.disc.nx;
        for y in 0..self.disc.ny {
            for x in 0..nx {
                let idx = y * nx + x;
                let (rho, ux, uy) = if self.solid[idx] { (1.0, 0.0, 0.0) } else { field(x, y) };
                for i in 0..Q {
                    self.f[idx * Q + i] = equilibrium(i, rho, ux, uy);
                }
                self.rho[idx] = rho;
                if self.solid[idx] {
                    self.ux[idx] = 0.0;
                    self.uy[idx] = 0.0;
                } else {
                    self.ux[idx] = ux;
                    self.uy[idx] = uy;
                }
            }
        }
    }

    fn classify_nodes(&mut self) {
        let (nx, ny) = (self.disc.nx, self.disc.ny);
        let mut links = Vec::new();
        for y in 0..ny {
            for x in 0..nx {
                let idx = y * nx + x;
                if self.solid[idx] {
                    continue;
                }
                // Edge nodes always take the slow path (wrap, wall, inlet, outlet).
                let mut near = x == 0 || x + 1 == nx || y == 0 || y + 1 == ny;
                for (dir, c) in C.iter().enumerate().skip(1) {
                    let xn = x as i64 + c[0] as i64;
                    let yn = y as i64 + c[1] as i64;
                    if xn < 0 || yn < 0 || xn >= nx as i64 || yn >= ny as i64 {
                        continue;
                    }
                    if self.solid[yn as usize * nx + xn as usize] {
                        near = true;
                        let mx = x as f64 + 0.5 * c[0] as f64 - self.disc.center[0];
                        let my = y as f64 + 0.5 * c[1] as f64 - self.disc.center[1];
                        let r = (mx * mx + my * my).sqrt();
                        links.push(BoundaryLink { cell: idx, dir, tangent: [-my / r, mx / r] });
                    }
                }
                self.boundary[idx] = near;
            }
        }
        self.links = links;
    }

    pub fn config(&self) -> &FluidConfig {
        &self.config
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn units(&self) -> &UnitConversion {
        &self.disc.units
    }

    pub fn nx(&self) -> usize {
        self.disc.nx
    }

    pub fn ny(&self) -> usize {
        self.disc.ny
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Simulated time in seconds.
    pub fn time(&self) -> f64 {
        self.steps as f64 * self.disc.units.dt
    }

    /// Rotation rate (rad/s) applied during the most recent step.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn is_solid(&self, x: usize, y: usize) -> bool {
        self.solid[y * self.disc.nx + x]
    }

    pub fn solid_mask(&self) -> &[bool] {
        &self.solid
    }

    pub fn links(&self) -> &[BoundaryLink] {
        &self.links
    }

    /// Post-collision distributions, `f[(y·nx + x)·9 + i]`.
    pub fn distributions(&self) -> &[f64] {
        &self.f
    }

    pub fn density(&self) -> &[f64] {
        &self.rho
    }

    pub fn velocity_x(&self) -> &[f64] {
        &self.ux
    }

    pub fn velocity_y(&self) -> &[f64] {
        &self.uy
    }

    /// Σρ over fluid nodes, in lattice units.
    pub fn total_mass(&self) -> f64 {
        self.f
            .chunks_exact(Q)
            .zip(&self.solid)
            .filter(|(_, s)| !**s)
            .map(|(cell, _)| cell.iter().sum::<f64>())
            .sum()
    }

    /// Advances one lattice time step with the cylinder spinning at
    /// `omega` rad/s (positive counter-clockwise).
    pub fn step(&mut self, omega: f64) -> Result<(), LatticeError> {
        let cap = self.config.max_rotation_rate;
        if !omega.is_finite() || omega.abs() > cap * (1.0 + 1e-12) {
            return Err(LatticeError::RotationOutOfRange { omega, cap });
        }
        self.omega = omega;
        let units = self.disc.units;
        let kernel = Kernel {
            nx: self.disc.nx,
            ny: self.disc.ny,
            x_periodic: self.config.x_boundary == XBoundary::Periodic,
            y_boundary: self.config.y_boundary,
            wp: self.disc.omega_plus,
            wm: self.disc.omega_minus,
            regularized: match self.config.collision {
                Collision::Regularized { bulk } => Some(bulk),
                _ => None,
            },
            accel: self.disc.accel,
            forced: self.disc.accel != [0.0, 0.0],
            inflow: self.disc.inflow,
            wall_speed: omega * units.dt * self.disc.radius,
            wall_leak: self.wall_leak(omega),
            center: self.disc.center,
            src: &self.f,
            solid: &self.solid,
            boundary: &self.boundary,
            sponge: &self.sponge,
        };
        let nx = kernel.nx;
        let ok = self
            .scratch
            .par_chunks_mut(nx * Q)
            .zip(self.rho.par_chunks_mut(nx))
            .zip(self.ux.par_chunks_mut(nx))
            .zip(self.uy.par_chunks_mut(nx))
            .enumerate()
            .map(|(y, (((dst, rho), ux), uy))| kernel.update_row(y, dst, rho, ux, uy))
            .reduce(|| true, |a, b| a && b);
        std::mem::swap(&mut self.f, &mut self.scratch);
        self.steps += 1;
        if !ok {
            return Err(LatticeError::Divergence { step: self.steps });
        }
        Ok(())
    }

    /// Mass the moving-wall term would inject over all links in one step,
    /// divided by the summed link weights. A discrete staircase circle does
    /// not cancel it exactly; subtracting `W_i·leak` on every link does.
    pub fn wall_leak(&self, omega: f64) -> f64 {
        if omega == 0.0 {
            return 0.0;
        }
        let speed = omega * self.disc.units.dt * self.disc.radius;
        let (mut mass, mut weight) = (0.0, 0.0);
        for link in &self.links {
            let c = C[link.dir];
            // Incoming direction is opposite to the link direction.
            let cu = -(c[0] as f64 * link.tangent[0] + c[1] as f64 * link.tangent[1]) * speed;
            mass += 6.0 * W[link.dir] * self.rho[link.cell] * cu;
            weight += W[link.dir];
        }
        if weight > 0.0 {
            mass / weight
        } else {
            0.0
        }
    }

    /// Runs `n` steps at a constant rotation rate.
    pub fn advance(&mut self, n: usize, omega: f64) -> Result<(), LatticeError> {
        for _ in 0..n {
            self.step(omega)?;
        }
        Ok(())
    }

    /// Physical velocity (m/s) at node `(x, y)`.
    pub fn velocity_at(&self, x: usize, y: usize) -> [f64; 2] {
        let idx = y * self.disc.nx + x;
        let s = self.disc.units.velocity();
        [self.ux[idx] * s, self.uy[idx] * s]
    }

    /// Vorticity `∂v/∂x − ∂u/∂y` in 1/s on the node grid (zero inside the cylinder).
    pub fn vorticity(&self) -> Vec<f64> {
        let (nx, ny) = (self.disc.nx, self.disc.ny);
        let scale = 1.0 / self.disc.units.dt;
        let mut out = vec![0.0; nx * ny];
        let at = |v: &[f64], x: usize, y: usize| v[y * nx + x];
        for y in 0..ny {
            for x in 0..nx {
                if self.solid[y * nx + x] {
                    continue;
                }
                let (xl, xr) = (x.saturating_sub(1), (x + 1).min(nx - 1));
                let (yd, yu) = (y.saturating_sub(1), (y + 1).min(ny - 1));
                let dvdx = (at(&self.uy, xr, y) - at(&self.uy, xl, y)) / (xr - xl) as f64;
                let dudy = (at(&self.ux, x, yu) - at(&self.ux, x, yd)) / (yu - yd) as f64;
                out[y * nx + x] = (dvdx - dudy) * scale;
            }
        }
        out
    }
}

impl Kernel<'_> {
    fn update_row(&self, y: usize, dst: &mut [f64], rho_row: &mut [f64], ux_row: &mut [f64], uy_row: &mut [f64]) -> bool {
        let nx = self.nx;
        let mut ok = true;
        let mut f = [0.0f64; Q];
        for x in 0..nx {
            let idx = y * nx + x;
            if self.solid[idx] {
                dst[x * Q..x * Q + Q].copy_from_slice(&self.src[idx * Q..idx * Q + Q]);
                continue;
            }
            if self.boundary[idx] {
                self.gather_boundary(x, y, rho_row[x], &mut f);
            } else {
                for i in 0..Q {
                    let s = (y as isize - C[i][1] as isize) as usize * nx + (x as isize - C[i][0] as isize) as usize;
                    f[i] = self.src[s * Q + i];
                }
            }
            let rho: f64 = f.iter().sum();
            let jx = f[1] - f[3] + f[5] - f[6] - f[7] + f[8];
            let jy = f[2] - f[4] + f[5] + f[6] - f[7] - f[8];
            let (fx, fy) = if self.forced { (rho * self.accel[0], rho * self.accel[1]) } else { (0.0, 0.0) };
            let ux = (jx + 0.5 * fx) / rho;
            let uy = (jy + 0.5 * fy) / rho;
            if !(rho > 0.0) || !ux.is_finite() || !uy.is_finite() {
                ok = false;
            }
            rho_row[x] = rho;
            ux_row[x] = ux;
            uy_row[x] = uy;
            let out = &mut dst[x * Q..x * Q + Q];
            match self.regularized {
                Some(wb) => self.collide_regularized(&f, rho, ux, uy, fx, fy, wb, out),
                None => self.collide(&f, rho, ux, uy, fx, fy, out),
            }
            let sigma = self.sponge[x];
            if sigma > 0.0 {
                // Pull density toward 1 at fixed velocity.
                let d = sigma * (rho - 1.0);
                for (i, o) in out.iter_mut().enumerate() {
                    *o -= d * equilibrium(i, 1.0, ux, uy);
                }
            }
        }
        ok
    }

    /// Pull-streams into node `(x, y)` resolving every boundary type.
    fn gather_boundary(&self, x: usize, y: usize, rho_prev: f64, f: &mut [f64; Q]) {
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        let idx = y * self.nx + x;
        let mut inlet_unknown = [false; Q];
        let mut any_unknown = false;
        for i in 0..Q {
            let mut xs = x as i64 - C[i][0] as i64;
            let mut ys = y as i64 - C[i][1] as i64;
            let mut from = i;
            if ys < 0 || ys >= ny {
                match self.y_boundary {
                    YBoundary::Periodic => ys = ys.rem_euclid(ny),
                    YBoundary::Walls => {
                        // Stationary channel wall.
                        f[i] = self.src[idx * Q + OPP[i]];
                        continue;
                    }
                    YBoundary::Slip => {
                        // Specular reflection off the wall.
                        ys = y as i64;
                        from = MIRROR_Y[i];
                    }
                }
            }
            if xs < 0 || xs >= nx {
                if self.x_periodic {
                    xs = xs.rem_euclid(nx);
                } else if xs < 0 {
                    inlet_unknown[i] = true;
                    any_unknown = true;
                    continue;
                } else {
                    // Zero-gradient outlet: reuse the last column.
                    xs = nx - 1;
                }
            }
            let s = ys as usize * self.nx + xs as usize;
            if self.solid[s] {
                // Moving cylinder wall; link midpoint at x − c_i/2.
                let mx = x as f64 - 0.5 * C[i][0] as f64 - self.center[0];
                let my = y as f64 - 0.5 * C[i][1] as f64 - self.center[1];
                let r = (mx * mx + my * my).sqrt();
                let cu = (C[i][0] as f64 * -my + C[i][1] as f64 * mx) / r * self.wall_speed;
                f[i] = self.src[idx * Q + OPP[i]] + W[i] * (6.0 * rho_prev * cu - self.wall_leak);
            } else {
                f[i] = self.src[s * Q + from];
            }
        }
        if any_unknown {
            // Velocity inlet: equilibrium plus bounced non-equilibrium part.
            let u = self.inflow;
            let mut known = 0.0;
            for i in 0..Q {
                if !inlet_unknown[i] {
                    known += match C[i][0] {
                        0 => f[i],
                        -1 => 2.0 * f[i],
                        _ => 0.0,
                    };
                }
            }
            let rho = known / (1.0 - u);
            for i in 0..Q {
                if inlet_unknown[i] {
                    let j = OPP[i];
                    f[i] = equilibrium(i, rho, u, 0.0) + f[j] - equilibrium(j, rho, u, 0.0);
                }
            }
        }
    }

    #[inline]
    #[allow(clippy::too_many_arguments)]
    fn collide(&self, f: &[f64; Q], rho: f64, ux: f64, uy: f64, fx: f64, fy: f64, out: &mut [f64]) {
        let (wp, wm) = (self.wp, self.wm);
        let usq = 1.5 * (ux * ux + uy * uy);
        let uf = ux * fx + uy * fy;
        let eq0 = W[0] * rho * (1.0 - usq);
        let mut post0 = f[0] - wp * (f[0] - eq0);
        if self.forced {
            post0 += (1.0 - 0.5 * wp) * W[0] * (-3.0 * uf);
        }
        out[0] = post0;
        for &(i, j) in &PAIRS {
            let (cx, cy) = (C[i][0] as f64, C[i][1] as f64);
            let cu = cx * ux + cy * uy;
            let eqp = W[i] * rho * (1.0 + 4.5 * cu * cu - usq);
            let eqm = W[i] * rho * 3.0 * cu;
            let fp = 0.5 * (f[i] + f[j]);
            let fm = 0.5 * (f[i] - f[j]);
            let rp = wp * (fp - eqp);
            let rm = wm * (fm - eqm);
            let mut a = f[i] - rp - rm;
            let mut b = f[j] - rp + rm;
            if self.forced {
                let cf = cx * fx + cy * fy;
                let sp = (1.0 - 0.5 * wp) * W[i] * (-3.0 * uf + 9.0 * cu * cf);
                let sm = (1.0 - 0.5 * wm) * W[i] * 3.0 * cf;
                a += sp + sm;
                b += sp - sm;
            }
            out[i] = a;
            out[j] = b;
        }
    }

    #[inline]
    #[allow(clippy::too_many_arguments)]
    fn collide_regularized(&self, f: &[f64; Q], rho: f64, ux: f64, uy: f64, fx: f64, fy: f64, wb: f64, out: &mut [f64]) {
        let wp = self.wp;
        let (mut pxx, mut pyy, mut pxy) = (0.0, 0.0, 0.0);
        let mut eq = [0.0; Q];
        for i in 0..Q {
            eq[i] = equilibrium(i, rho, ux, uy);
            let n = f[i] - eq[i];
            let (cx, cy) = (C[i][0] as f64, C[i][1] as f64);
            pxx += cx * cx * n;
            pyy += cy * cy * n;
            pxy += cx * cy * n;
        }
        let shear = (1.0 - wp) * 4.5;
        let bulk = (1.0 - wb) * 4.5 * 0.5 * (pxx + pyy);
        let dxx = 0.5 * (pxx - pyy);
        let uf = ux * fx + uy * fy;
        for i in 0..Q {
            let (cx, cy) = (C[i][0] as f64, C[i][1] as f64);
            let dev = (cx * cx - cy * cy) * dxx + 2.0 * cx * cy * pxy;
            let mut o = eq[i] + W[i] * (shear * dev + bulk * (cx * cx + cy * cy - 2.0 / 3.0));
            if self.forced {
                let cu = cx * ux + cy * uy;
                let cf = cx * fx + cy * fy;
                // Odd non-equilibrium is discarded, i.e. relaxed at rate 1.
                o += W[i] * (1.5 * cf + (1.0 - 0.5 * wp) * (9.0 * cu * cf - 3.0 * uf));
            }
            out[i] = o;
        }
    }
}
