//! Smoothed gradients and the regularized p-Laplacian diffusivity
//! `a = (eps + |∇G_σ ⋆ u|²)^((p-2)/2)` sampled at stencil half-points.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Truncated, sampled Gaussian `G_σ(x) ∝ exp(-|x|² / (2σ))` and its first
/// derivative. `sigma` is the variance, in pixels².
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    sigma: f64,
    radius: usize,
    /// Renormalized 1D Gaussian, taps `-radius..=radius`.
    base: Vec<f64>,
    /// `d/dt` of `base`: `-t / sigma * base[t]`.
    deriv: Vec<f64>,
}

impl GaussianKernel {
    /// Kernel truncated at `ceil(3 sqrt(sigma))` pixels.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param(format!("sigma must be positive, got {sigma}")));
        }
        let radius = ((3.0 * sigma.sqrt()).ceil() as usize).max(1);
        Self::with_radius(sigma, radius)
    }

    pub fn with_radius(sigma: f64, radius: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param(format!("sigma must be positive, got {sigma}")));
        }
        let min_radius = (3.0 * sigma.sqrt()).ceil() as usize;
        if radius < min_radius.max(1) {
            return Err(Error::param(format!("radius {radius} below ceil(3 sqrt(sigma)) = {min_radius}")));
        }
        let r = radius as isize;
        let mut base: Vec<f64> = (-r..=r).map(|t| (-(t * t) as f64 / (2.0 * sigma)).exp()).collect();
        let total: f64 = base.iter().sum();
        base.iter_mut().for_each(|w| *w /= total);
        let deriv = (-r..=r).zip(&base).map(|(t, w)| -(t as f64) / sigma * w).collect();
        Ok(Self { sigma, radius, base, deriv })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// 1D Gaussian taps for offsets `-radius..=radius`.
    pub fn base(&self) -> &[f64] {
        &self.base
    }

    /// 1D derivative taps for offsets `-radius..=radius`.
    pub fn derivative(&self) -> &[f64] {
        &self.deriv
    }

    /// Dense 2D x-derivative kernel (x runs along rows): `k[s][t] = g'(s) g(t)`.
    pub fn dkx(&self) -> Vec<Vec<f64>> {
        self.deriv.iter().map(|ds| self.base.iter().map(|gt| ds * gt).collect()).collect()
    }

    /// Dense 2D y-derivative kernel (y runs along columns): `k[s][t] = g(s) g'(t)`.
    pub fn dky(&self) -> Vec<Vec<f64>> {
        self.base.iter().map(|gs| self.deriv.iter().map(|dt| gs * dt).collect()).collect()
    }
}

/// Half-sample symmetric reflection of `k` into `0..n` (`u[-1] = u[0]`).
#[inline]
pub(crate) fn reflect(k: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = k.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Smoothed gradient components.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothedGradient {
    /// Derivative along the row index `i`, column-major like [`ImageGrid`].
    pub gx: Vec<f64>,
    /// Derivative along the column index `j`.
    pub gy: Vec<f64>,
}

/// Separable convolution of `u` with the derivative-of-Gaussian kernels under
/// reflective boundary padding. Scaled by `1/h` so a ramp of unit slope gives
/// a gradient near one.
pub fn grad_gaussian(u: &ImageGrid, kernel: &GaussianKernel) -> SmoothedGradient {
    let (m, n) = (u.rows(), u.cols());
    let inv_h = 1.0 / u.spacing();
    let data = u.as_column_major();
    let r = kernel.radius as isize;

    // conv along i (rows), then along j (cols)
    let along_i = |taps: &[f64]| {
        let mut out = vec![0.0; m * n];
        for j in 0..n {
            let col = &data[j * m..(j + 1) * m];
            for i in 0..m {
                let mut acc = 0.0;
                for (s, w) in (-r..=r).zip(taps) {
                    acc += w * col[reflect(i as isize - s, m)];
                }
                out[j * m + i] = acc;
            }
        }
        out
    };
    let along_j = |src: &[f64], taps: &[f64]| {
        let mut out = vec![0.0; m * n];
        for j in 0..n {
            for (t, w) in (-r..=r).zip(taps) {
                let jj = reflect(j as isize - t, n);
                let from = &src[jj * m..(jj + 1) * m];
                let to = &mut out[j * m..(j + 1) * m];
                for (o, x) in to.iter_mut().zip(from) {
                    *o += w * x;
                }
            }
        }
        out
    };

    let mut gx = along_j(&along_i(&kernel.deriv), &kernel.base);
    let mut gy = along_j(&along_i(&kernel.base), &kernel.deriv);
    gx.iter_mut().chain(gy.iter_mut()).for_each(|g| *g *= inv_h);
    SmoothedGradient { gx, gy }
}

/// `(eps + s)^((p-2)/2)` for a squared gradient magnitude `s`.
#[inline]
pub fn coefficient(squared_gradient: f64, epsilon: f64, p: f64) -> f64 {
    (epsilon + squared_gradient).powf((p - 2.0) / 2.0)
}

pub(crate) fn check_params(epsilon: f64, p: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(1.0..=2.0).contains(&p) {
        return Err(Error::param(format!("p must lie in [1, 2], got {p}")));
    }
    Ok(())
}

/// Diffusivity at the half-points between neighbouring pixels.
///
/// Only interior faces are stored: `row_faces` holds `a(i+1/2, j)` for
/// `i < M-1` and `col_faces` holds `a(i, j+1/2)` for `j < N-1`. Faces on the
/// image border carry no flux under the Neumann condition and are reported as
/// `None` by the directional accessors.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusivityField {
    rows: usize,
    cols: usize,
    epsilon: f64,
    p: f64,
    row_faces: Vec<f64>,
    col_faces: Vec<f64>,
    max_gradient: f64,
}

impl DiffusivityField {
    /// Uniform field (every face equal to `value`); handy for linear tests.
    pub fn uniform(rows: usize, cols: usize, value: f64) -> Self {
        Self::from_faces(rows, cols, vec![value; (rows - 1) * cols], vec![value; rows * (cols - 1)])
    }

    /// Field from explicit face values; `epsilon`/`p` are recorded as NaN.
    ///
    /// # Panics
    /// If the face arrays do not have `(M-1)·N` and `M·(N-1)` entries.
    pub fn from_faces(rows: usize, cols: usize, row_faces: Vec<f64>, col_faces: Vec<f64>) -> Self {
        assert_eq!(row_faces.len(), rows.saturating_sub(1) * cols);
        assert_eq!(col_faces.len(), rows * cols.saturating_sub(1));
        Self { rows, cols, epsilon: f64::NAN, p: f64::NAN, row_faces, col_faces, max_gradient: f64::NAN }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Largest node value of `|∇G_σ ⋆ u|` seen while building the field.
    pub fn max_smoothed_gradient(&self) -> f64 {
        self.max_gradient
    }

    /// `a(i+1/2, j)` for `i < M-1`.
    #[inline]
    pub fn below(&self, i: usize, j: usize) -> f64 {
        self.row_faces[j * (self.rows - 1) + i]
    }

    /// `a(i, j+1/2)` for `j < N-1`.
    #[inline]
    pub fn right(&self, i: usize, j: usize) -> f64 {
        self.col_faces[j * self.rows + i]
    }

    /// `a(i-1/2, j)`.
    pub fn west(&self, i: usize, j: usize) -> Option<f64> {
        (i > 0).then(|| self.below(i - 1, j))
    }

    /// `a(i+1/2, j)`.
    pub fn east(&self, i: usize, j: usize) -> Option<f64> {
        (i + 1 < self.rows).then(|| self.below(i, j))
    }

    /// `a(i, j-1/2)`.
    pub fn north(&self, i: usize, j: usize) -> Option<f64> {
        (j > 0).then(|| self.right(i, j - 1))
    }

    /// `a(i, j+1/2)`.
    pub fn south(&self, i: usize, j: usize) -> Option<f64> {
        (j + 1 < self.cols).then(|| self.right(i, j))
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.row_faces.iter().chain(&self.col_faces).copied()
    }

    pub fn min(&self) -> f64 {
        self.values().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Per-pixel mean of the adjacent face coefficients, column-major.
    /// Used for visualisation.
    pub fn node_average(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                let faces = [self.west(i, j), self.east(i, j), self.north(i, j), self.south(i, j)];
                let (sum, count) = faces.iter().flatten().fold((0.0, 0usize), |(s, c), a| (s + a, c + 1));
                out.push(if count == 0 { 0.0 } else { sum / count as f64 });
            }
        }
        out
    }
}

/// Evaluate the diffusivity at every interior half-point of `u`.
///
/// Each smoothed gradient component is averaged over the two nodes adjacent
/// to the half-point before taking the squared magnitude.
pub fn diffusivity_half(u: &ImageGrid, epsilon: f64, p: f64, kernel: &GaussianKernel) -> Result<DiffusivityField> {
    check_params(epsilon, p)?;
    let (m, n) = (u.rows(), u.cols());
    let g = grad_gaussian(u, kernel);
    let max_gradient = g.gx.iter().zip(&g.gy).map(|(x, y)| (x * x + y * y).sqrt()).fold(0.0, f64::max);

    let face = |q0: usize, q1: usize| {
        let x = 0.5 * (g.gx[q0] + g.gx[q1]);
        let y = 0.5 * (g.gy[q0] + g.gy[q1]);
        coefficient(x * x + y * y, epsilon, p)
    };

    let mut row_faces = Vec::with_capacity(m.saturating_sub(1) * n);
    for j in 0..n {
        for i in 0..m.saturating_sub(1) {
            row_faces.push(face(j * m + i, j * m + i + 1));
        }
    }
    let mut col_faces = Vec::with_capacity(m * n.saturating_sub(1));
    for j in 0..n.saturating_sub(1) {
        for i in 0..m {
            col_faces.push(face(j * m + i, (j + 1) * m + i));
        }
    }
    Ok(DiffusivityField { rows: m, cols: n, epsilon, p, row_faces, col_faces, max_gradient })
}

/// Discrete `H¹` norm `sqrt(h² Σ u² + h² Σ |∇u|²)` with forward differences
/// (zero across the Neumann border).
pub fn h1_norm(u: &ImageGrid) -> f64 {
    let h = u.spacing();
    let (m, n) = (u.rows(), u.cols());
    let mut l2 = 0.0;
    let mut grad = 0.0;
    for j in 0..n {
        for i in 0..m {
            let x = u.get(i, j);
            l2 += x * x;
            if i + 1 < m {
                let d = (u.get(i + 1, j) - x) / h;
                grad += d * d;
            }
            if j + 1 < n {
                let d = (u.get(i, j + 1) - x) / h;
                grad += d * d;
            }
        }
    }
    (h * h * (l2 + grad)).sqrt()
}

/// Outcome of [`check_bounds`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundsReport {
    pub min: f64,
    pub max: f64,
    /// `eps^((p-2)/2)`
    pub upper: f64,
    /// `(eps + C² ‖u0‖²_H1)^((p-2)/2)`
    pub lower: f64,
    pub pass: bool,
}

/// Check `lower <= a <= upper` over every coefficient of `field`.
///
/// A relative slack of `1e-14` absorbs rounding in `powf`.
pub fn check_bounds(field: &DiffusivityField, u0_h1_norm: f64, c: f64) -> BoundsReport {
    let (eps, p) = (field.epsilon, field.p);
    let upper = eps.powf((p - 2.0) / 2.0);
    let lower = coefficient(c * c * u0_h1_norm * u0_h1_norm, eps, p);
    let (min, max) = (field.min(), field.max());
    let slack = 1e-14 * upper;
    BoundsReport { min, max, upper, lower, pass: max <= upper + slack && min >= lower - slack && min > 0.0 }
}
