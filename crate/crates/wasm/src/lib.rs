//! Browser bindings: a stepping denoiser on the synthetic disk and a
//! stability map of the damped Verlet step.

use svddf::flow::mode_spectral_radius;
use svddf::{
    add_noise, ssim, synth_image, ImageGrid, Method, NoiseSpec, Solver, SolverConfig, SpectralEstimate, SsimConfig,
    StoppingRule, SynthKind,
};
use wasm_bindgen::prelude::*;

fn js_err(e: svddf::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Grey values in `[0, 1]` to an RGBA byte buffer in row-major order.
pub fn to_rgba(img: &ImageGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.len() * 4);
    for v in img.to_row_major() {
        let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        out.extend_from_slice(&[g, g, g, 255]);
    }
    out
}

#[wasm_bindgen]
pub struct Session {
    clean: ImageGrid,
    noisy: ImageGrid,
    solver: Solver,
    ssim_curve: Vec<f64>,
    rde_curve: Vec<f64>,
}

#[wasm_bindgen]
impl Session {
    /// Noisy disk of side `size` with noise level `delta`, ready to step.
    #[wasm_bindgen(constructor)]
    pub fn new(
        size: usize,
        delta: f64,
        seed: u64,
        p: f64,
        eta: f64,
        epsilon: f64,
        sigma: f64,
    ) -> Result<Session, JsError> {
        let clean = synth_image(SynthKind::Disk, size, size).map_err(js_err)?;
        let noisy = add_noise(&clean, &NoiseSpec::new(delta, seed)).map_err(js_err)?.clamped(0.0, 1.0);
        let config = SolverConfig {
            p,
            eta,
            epsilon,
            sigma,
            spectral: SpectralEstimate::Gershgorin,
            max_steps: usize::MAX,
            stopping: StoppingRule::MaxStepsOnly,
            ..SolverConfig::default()
        };
        let solver = Solver::new(&noisy, config, Method::Svddf).map_err(js_err)?;
        let first = ssim(&noisy, &clean, &SsimConfig::default()).map_err(js_err)?;
        Ok(Session { clean, noisy, solver, ssim_curve: vec![first], rde_curve: Vec::new() })
    }

    /// Advance `n` steps and return the current SSIM against the clean disk.
    pub fn step(&mut self, n: usize) -> Result<f64, JsError> {
        for _ in 0..n {
            let rec = self.solver.step().map_err(js_err)?;
            self.rde_curve.push(rec.rde);
        }
        let q = ssim(&self.current(), &self.clean, &SsimConfig::default()).map_err(js_err)?;
        self.ssim_curve.push(q);
        Ok(q)
    }

    fn current(&self) -> ImageGrid {
        self.solver.image().clamped(0.0, 1.0)
    }

    pub fn size(&self) -> usize {
        self.clean.rows()
    }

    pub fn steps(&self) -> usize {
        self.solver.state().k
    }

    pub fn time(&self) -> f64 {
        self.solver.state().t
    }

    pub fn clean_rgba(&self) -> Vec<u8> {
        to_rgba(&self.clean)
    }

    pub fn noisy_rgba(&self) -> Vec<u8> {
        to_rgba(&self.noisy)
    }

    pub fn current_rgba(&self) -> Vec<u8> {
        to_rgba(&self.current())
    }

    /// SSIM after every call to [`Session::step`], starting with the noisy image.
    pub fn ssim_curve(&self) -> Vec<f64> {
        self.ssim_curve.clone()
    }

    /// Relative high-frequency energy change per step.
    pub fn rde_curve(&self) -> Vec<f64> {
        self.rde_curve.clone()
    }

    /// Index of the first step with change at most `tol`, or -1.
    pub fn rde_stop(&self, tol: f64) -> i64 {
        self.rde_curve.iter().position(|&r| r <= tol).map_or(-1, |k| k as i64 + 1)
    }
}

/// Spectral radius of one step for a mode with eigenvalue `-lambda`, over a
/// `width x height` grid of `(eta, dt · sqrt(lambda))`, as RGBA.
///
/// Columns sweep `eta` in `(0, eta_max]`, rows sweep the scaled step in
/// `(0, scaled_dt_max]` from the top. Stable cells are shaded blue by
/// contraction, unstable cells red.
#[wasm_bindgen]
pub fn stability_map(eta_max: f64, scaled_dt_max: f64, width: usize, height: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(width * height * 4);
    for row in 0..height {
        let s = scaled_dt_max * (height - row) as f64 / height as f64;
        for col in 0..width {
            let eta = eta_max * (col + 1) as f64 / width as f64;
            // with lambda = 1 the scaled step is the step itself
            let rho = mode_spectral_radius(1.0, eta, s);
            out.extend_from_slice(&colour(rho));
        }
    }
    out
}

fn colour(rho: f64) -> [u8; 4] {
    if rho <= 1.0 + 1e-12 {
        let c = (255.0 * rho.clamp(0.0, 1.0)) as u8;
        [c / 3, c / 2, 255 - c / 3, 255]
    } else {
        let c = (255.0 / rho.min(1e3).log10().max(0.0).mul_add(2.0, 1.0)) as u8;
        [255, c / 2, c / 2, 255]
    }
}

/// Spectral radius of a single mode: the quantity the map colours.
#[wasm_bindgen]
pub fn mode_radius(lambda: f64, eta: f64, dt: f64) -> f64 {
    mode_spectral_radius(lambda, eta, dt)
}
