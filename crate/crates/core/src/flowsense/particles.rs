use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FlowError, Image};
use crate::field::FlowField;
use crate::lattice::Window;

/// Camera model: a physical window imaged onto a pixel grid, plus tracer
/// and sensor properties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Optics {
    pub width_px: usize,
    pub height_px: usize,
    pub window: Window,
    /// Mean tracer spot diameter in pixels; individual spots vary by ±25%.
    pub particle_diameter: f64,
    /// Particles per square pixel; 0.1 puts about six in an 8×8 patch.
    pub seeding_density: f64,
    pub background: f64,
    /// Standard deviation of additive sensor noise.
    pub sensor_noise: f64,
}

impl Default for Optics {
    fn default() -> Self {
        // Square window just downstream of the desk cylinder.
        Optics::for_window(Window::new(0.121, 0.0, 0.1, 0.1))
    }
}

impl Optics {
    pub fn for_window(window: Window) -> Self {
        Optics {
            width_px: 512,
            height_px: 512,
            window,
            particle_diameter: 2.5,
            seeding_density: 0.1,
            background: 0.05,
            sensor_noise: 0.01,
        }
    }

    /// Metres per pixel along x and y.
    pub fn meters_per_px(&self) -> [f64; 2] {
        [self.window.width / self.width_px as f64, self.window.height / self.height_px as f64]
    }

    /// Physical position to continuous pixel coordinates (pixel centres at integers).
    pub fn to_px(&self, p: [f64; 2]) -> [f64; 2] {
        let [sx, sy] = self.meters_per_px();
        [(p[0] - self.window.x0) / sx - 0.5, (p[1] - self.window.y0) / sy - 0.5]
    }

    pub fn particle_count(&self) -> usize {
        (self.seeding_density * (self.width_px * self.height_px) as f64).ceil() as usize
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::Optics(m.to_string()));
        if self.width_px < 2 || self.height_px < 2 {
            return bad("image must be at least 2x2 pixels");
        }
        if !(self.window.width > 0.0 && self.window.height > 0.0) {
            return bad("window must have positive size");
        }
        if !(self.particle_diameter > 0.0 && self.seeding_density > 0.0) {
            return bad("particle diameter and seeding density must be > 0");
        }
        if !(self.sensor_noise >= 0.0 && (0.0..1.0).contains(&self.background)) {
            return bad("noise must be >= 0 and background in [0, 1)");
        }
        Ok(())
    }
}

/// Tracer particles inside the imaging window.
#[derive(Debug, Clone)]
pub struct ParticleSet {
    /// Positions in metres.
    pub positions: Vec<[f64; 2]>,
    /// Peak spot intensity.
    pub brightness: Vec<f64>,
    /// Spot diameter, px.
    pub diameter: Vec<f64>,
    window: Window,
    mean_diameter: f64,
    rng: ChaCha8Rng,
}

impl ParticleSet {
    pub fn seed(optics: &Optics, seed: u64) -> Self {
        let mut set = ParticleSet {
            positions: Vec::new(),
            brightness: Vec::new(),
            diameter: Vec::new(),
            window: optics.window,
            mean_diameter: optics.particle_diameter,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        for _ in 0..optics.particle_count() {
            let w = set.window;
            let p = [w.x0 + set.rng.random::<f64>() * w.width, w.y0 + set.rng.random::<f64>() * w.height];
            set.push(p);
        }
        set
    }

    fn push(&mut self, p: [f64; 2]) {
        self.positions.push(p);
        self.brightness.push(self.rng.random_range(0.6..=1.0));
        self.diameter.push(self.mean_diameter * self.rng.random_range(0.75..=1.25));
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn window(&self) -> Window {
        self.window
    }

    /// Advances every particle by one midpoint step through `truth`, a
    /// velocity field (m/s) sampled at the cell centres of a grid laid over
    /// the window. Particles that leave the window are re-seeded at the
    /// inflow edge.
    pub fn seed_and_advect(&mut self, truth: &FlowField, dt: f64) {
        let w = self.window;
        let at = |p: [f64; 2]| {
            let gx = (p[0] - w.x0) / w.width * truth.width as f64 - 0.5;
            let gy = (p[1] - w.y0) / w.height * truth.height as f64 - 0.5;
            truth.interpolate(gx, gy)
        };
        let mean_u = truth.u.iter().sum::<f64>() / truth.len().max(1) as f64;
        let inflow_depth = (mean_u.abs() * dt).clamp(1e-9 * w.width, w.width);
        for k in 0..self.positions.len() {
            let p = self.positions[k];
            let v1 = at(p);
            let mid = [p[0] + 0.5 * dt * v1[0], p[1] + 0.5 * dt * v1[1]];
            let v2 = at(mid);
            let q = [p[0] + dt * v2[0], p[1] + dt * v2[1]];
            if q[0] >= w.x0 && q[0] < w.x0 + w.width && q[1] >= w.y0 && q[1] < w.y0 + w.height {
                self.positions[k] = q;
                continue;
            }
            let depth = self.rng.random::<f64>() * inflow_depth;
            let x = if mean_u >= 0.0 { w.x0 + depth } else { w.x0 + w.width - depth };
            let y = w.y0 + self.rng.random::<f64>() * w.height;
            self.positions[k] = [x, y];
            self.brightness[k] = self.rng.random_range(0.6..=1.0);
            self.diameter[k] = self.mean_diameter * self.rng.random_range(0.75..=1.25);
        }
    }
}

/// Sum of Gaussian spots over a uniform background plus seeded sensor
/// noise, clipped to `[0, 1]`.
pub fn render(particles: &ParticleSet, optics: &Optics, noise_seed: u64) -> Image {
    let (w, h) = (optics.width_px, optics.height_px);
    let mut img = Image::filled(w, h, optics.background as f32);
    for k in 0..particles.len() {
        let [cx, cy] = optics.to_px(particles.positions[k]);
        let sigma = particles.diameter[k] / 2.5;
        let reach = (3.0 * sigma).ceil() + 1.0;
        let inv = 1.0 / (2.0 * sigma * sigma);
        let b = particles.brightness[k];
        let x0 = (cx - reach).floor().max(0.0) as usize;
        let x1 = ((cx + reach).ceil().min(w as f64 - 1.0)).max(-1.0);
        let y0 = (cy - reach).floor().max(0.0) as usize;
        let y1 = ((cy + reach).ceil().min(h as f64 - 1.0)).max(-1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        for y in y0..=y1 as usize {
            let dy = y as f64 - cy;
            for x in x0..=x1 as usize {
                let dx = x as f64 - cx;
                img.data[y * w + x] += (b * (-(dx * dx + dy * dy) * inv).exp()) as f32;
            }
        }
    }
    if optics.sensor_noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let normal = Normal::new(0.0, optics.sensor_noise).expect("noise sigma checked by validate");
        for v in img.data.iter_mut() {
            *v += normal.sample(&mut rng) as f32;
        }
    }
    for v in img.data.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    img
}
