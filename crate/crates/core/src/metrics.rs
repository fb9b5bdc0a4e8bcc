//! Structural similarity and relative error against a clean reference.

use crate::error::{Error, Result};
use crate::grid::{rel_l2, ImageGrid};

/// Gaussian-window SSIM parameters for intensities in `[0, dynamic_range]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimConfig {
    /// Odd window side, at least 3.
    pub window: usize,
    /// Standard deviation of the window weights.
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self { window: 11, window_sigma: 1.5, k1: 0.01, k2: 0.03, dynamic_range: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimReport {
    /// Mean SSIM over all windows fully inside the image.
    pub ssim: f64,
    /// Mean contrast-structure term `(2σxy + C2) / (σx² + σy² + C2)`.
    pub contrast_structure: f64,
    pub windows: usize,
}

fn window_weights(side: usize, sigma: f64) -> Vec<f64> {
    let c = (side as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..side).map(|t| (-(t as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|x| x / s).collect()
}

pub fn ssim_report(x: &ImageGrid, y: &ImageGrid, config: &SsimConfig) -> Result<SsimReport> {
    if !x.same_shape(y) {
        return Err(Error::Dimension { expected: x.len(), found: y.len() });
    }
    if config.window < 3 || config.window % 2 == 0 {
        return Err(Error::param(format!("SSIM window must be odd and >= 3, got {}", config.window)));
    }
    if !(config.window_sigma > 0.0 && config.dynamic_range > 0.0 && config.k1 > 0.0 && config.k2 > 0.0) {
        return Err(Error::param("SSIM window sigma, constants and dynamic range must be positive"));
    }
    let (m, n) = (x.rows(), x.cols());
    let side = config.window;
    if m < side || n < side {
        return Err(Error::param(format!("image {m}x{n} is smaller than the {side}x{side} SSIM window")));
    }
    let w = window_weights(side, config.window_sigma);
    let c1 = (config.k1 * config.dynamic_range).powi(2);
    let c2 = (config.k2 * config.dynamic_range).powi(2);

    let mut total = 0.0;
    let mut total_cs = 0.0;
    let mut count = 0;
    for j0 in 0..=n - side {
        for i0 in 0..=m - side {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (b, wb) in w.iter().enumerate() {
                for (a, wa) in w.iter().enumerate() {
                    let wt = wa * wb;
                    let (u, v) = (x.get(i0 + a, j0 + b), y.get(i0 + a, j0 + b));
                    mx += wt * u;
                    my += wt * v;
                    xx += wt * u * u;
                    yy += wt * v * v;
                    xy += wt * u * v;
                }
            }
            let vx = xx - mx * mx;
            let vy = yy - my * my;
            let cov = xy - mx * my;
            let cs = (2.0 * cov + c2) / (vx + vy + c2);
            let l = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
            total += l * cs;
            total_cs += cs;
            count += 1;
        }
    }
    Ok(SsimReport { ssim: total / count as f64, contrast_structure: total_cs / count as f64, windows: count })
}

pub fn ssim(x: &ImageGrid, y: &ImageGrid, config: &SsimConfig) -> Result<f64> {
    Ok(ssim_report(x, y, config)?.ssim)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub ssim_noisy: f64,
    pub ssim_denoised: f64,
    pub rel_err_noisy: f64,
    pub rel_err_denoised: f64,
}

impl EvalReport {
    pub fn ssim_gain(&self) -> f64 {
        self.ssim_denoised - self.ssim_noisy
    }

    pub fn improved(&self) -> bool {
        self.ssim_denoised > self.ssim_noisy
    }
}

pub fn evaluate(clean: &ImageGrid, noisy: &ImageGrid, denoised: &ImageGrid, config: &SsimConfig) -> Result<EvalReport> {
    Ok(EvalReport {
        ssim_noisy: ssim(noisy, clean, config)?,
        ssim_denoised: ssim(denoised, clean, config)?,
        rel_err_noisy: rel_l2(noisy.as_column_major(), clean.as_column_major())?,
        rel_err_denoised: rel_l2(denoised.as_column_major(), clean.as_column_major())?,
    })
}

pub const METRICS_HEADER: &str = "image_id,p,eta,steps,ssim_noisy,ssim_denoised,rel_err";

pub fn metrics_row(image_id: &str, p: f64, eta: f64, steps: usize, report: &EvalReport) -> String {
    format!("{image_id},{p},{eta},{steps},{},{},{}", report.ssim_noisy, report.ssim_denoised, report.rel_err_denoised)
}
