//! Terminating-time rules: high-frequency energy change (RDE), the
//! discrepancy principle, and the a-priori time `T(δ)`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{norm2, ImageGrid};

/// How the frequency threshold `N0` of the high-frequency energy is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HighFreqIndex {
    /// `floor(fraction * (M + N - 1))`; the default uses `0.6`.
    AntiDiagonalFraction(f64),
    /// `floor(fraction * N²)` with `N` the column count. For most image sizes
    /// this exceeds every `i + j` and leaves the high band empty.
    SquaredCols(f64),
    Fixed(usize),
}

impl Default for HighFreqIndex {
    fn default() -> Self {
        Self::AntiDiagonalFraction(0.6)
    }
}

impl HighFreqIndex {
    pub fn resolve(self, rows: usize, cols: usize) -> usize {
        match self {
            Self::AntiDiagonalFraction(f) => (f * (rows + cols - 1) as f64).floor() as usize,
            Self::SquaredCols(f) => (f * (cols * cols) as f64).floor() as usize,
            Self::Fixed(n0) => n0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StoppingRule {
    /// Stop once the relative high-frequency energy change is at most `tol`.
    Rde {
        tol: f64,
        n0: HighFreqIndex,
    },
    /// Stop at the first step where `‖u - u0‖ / ‖u0‖ >= delta`.
    Discrepancy {
        delta: f64,
    },
    /// Stop at the first step with `t >= c1 ln(1 + c2 delta^gamma)`.
    APriori {
        c1: f64,
        c2: f64,
        gamma: f64,
        delta: f64,
    },
    MaxStepsOnly,
}

impl StoppingRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Rde { tol, n0 } => {
                if tol.is_nan() || tol <= 0.0 {
                    return Err(Error::param(format!("RDE tolerance must be positive, got {tol}")));
                }
                if let HighFreqIndex::AntiDiagonalFraction(f) | HighFreqIndex::SquaredCols(f) = n0 {
                    if f.is_nan() || f < 0.0 {
                        return Err(Error::param(format!("N0 fraction must be >= 0, got {f}")));
                    }
                }
            }
            Self::Discrepancy { delta } => {
                if delta.is_nan() || delta < 0.0 {
                    return Err(Error::param(format!("delta must be >= 0, got {delta}")));
                }
            }
            Self::APriori { c1, c2, gamma, delta } => {
                if !(c1 > 0.0 && c2 > 0.0 && gamma > 0.0) {
                    return Err(Error::param("C1, C2 and gamma must be positive"));
                }
                if delta.is_nan() || delta < 0.0 {
                    return Err(Error::param(format!("delta must be >= 0, got {delta}")));
                }
            }
            Self::MaxStepsOnly => {}
        }
        Ok(())
    }
}

/// Cached FFT plans for repeated high-frequency energy evaluation on one
/// grid shape.
pub struct SpectralEnergy {
    rows: usize,
    cols: usize,
    col_fft: Arc<dyn Fft<f64>>,
    row_fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralEnergy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralEnergy").field("rows", &self.rows).field("cols", &self.cols).finish()
    }
}

impl SpectralEnergy {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { rows, cols, col_fft: planner.plan_fft_forward(rows), row_fft: planner.plan_fft_forward(cols) }
    }

    /// Unnormalized 2D DFT, column-major, frequency `(k, l)` at `l * rows + k`.
    pub fn transform(&self, u: &ImageGrid) -> Vec<Complex64> {
        assert_eq!((u.rows(), u.cols()), (self.rows, self.cols));
        let (m, n) = (self.rows, self.cols);
        let mut buf: Vec<Complex64> = u.as_column_major().iter().map(|&x| Complex64::new(x, 0.0)).collect();
        for col in buf.chunks_exact_mut(m) {
            self.col_fft.process(col);
        }
        let mut line = vec![Complex64::default(); n];
        for k in 0..m {
            for (l, z) in line.iter_mut().enumerate() {
                *z = buf[l * m + k];
            }
            self.row_fft.process(&mut line);
            for (l, z) in line.iter().enumerate() {
                buf[l * m + k] = *z;
            }
        }
        buf
    }

    /// `Σ_{k + l >= n0} |𝔉(u)(k, l)|²` with 0-based, unshifted frequencies.
    pub fn high_freq_energy(&self, u: &ImageGrid, n0: usize) -> f64 {
        let m = self.rows;
        self.transform(u).iter().enumerate().filter(|(q, _)| q % m + q / m >= n0).map(|(_, z)| z.norm_sqr()).sum()
    }
}

pub fn high_freq_energy(u: &ImageGrid, n0: usize) -> f64 {
    SpectralEnergy::new(u.rows(), u.cols()).high_freq_energy(u, n0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RdeSignal {
    Value(f64),
    /// The previous high-frequency energy was zero; treated as a stop.
    Degenerate,
}

impl RdeSignal {
    pub fn from_energies(current: f64, previous: f64) -> Self {
        if previous == 0.0 {
            Self::Degenerate
        } else {
            Self::Value((current - previous).abs() / previous)
        }
    }

    /// NaN for the degenerate case.
    pub fn value(self) -> f64 {
        match self {
            Self::Value(v) => v,
            Self::Degenerate => f64::NAN,
        }
    }

    pub fn should_stop(self, tol: f64) -> bool {
        match self {
            Self::Value(v) => v <= tol,
            Self::Degenerate => true,
        }
    }
}

/// `|Δ(u_k) - Δ(u_{k-1})| / Δ(u_{k-1})` with `Δ` the high-frequency energy.
pub fn rde(u_k: &ImageGrid, u_km1: &ImageGrid, n0: usize) -> Result<RdeSignal> {
    if !u_k.same_shape(u_km1) {
        return Err(Error::Dimension { expected: u_km1.len(), found: u_k.len() });
    }
    let energy = SpectralEnergy::new(u_k.rows(), u_k.cols());
    Ok(RdeSignal::from_energies(energy.high_freq_energy(u_k, n0), energy.high_freq_energy(u_km1, n0)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discrepancy {
    /// `‖u_k - u0‖ / ‖u0‖`
    pub sigma: f64,
    /// `sigma - delta`
    pub chi: f64,
    pub fired: bool,
}

pub fn discrepancy(u_k: &[f64], u0: &[f64], delta: f64) -> Result<Discrepancy> {
    if u_k.len() != u0.len() {
        return Err(Error::Dimension { expected: u0.len(), found: u_k.len() });
    }
    let n0 = norm2(u0);
    if n0 == 0.0 {
        return Err(Error::Degenerate("noisy data has zero norm".into()));
    }
    let diff = u_k.iter().zip(u0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let sigma = diff / n0;
    let chi = sigma - delta;
    Ok(Discrepancy { sigma, chi, fired: chi >= 0.0 })
}

/// `T(δ) = c1 ln(1 + c2 δ^γ)`.
pub fn a_priori_time(delta: f64, c1: f64, c2: f64, gamma: f64) -> f64 {
    c1 * (c2 * delta.powf(gamma)).ln_1p()
}
