//! The symmetric five-point stencil matrix `F` of `div(a ∇u)` with homogeneous
//! Neumann boundaries, and bounds on its spectrum.

use std::io::{self, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffusivity::DiffusivityField;
use crate::error::{Error, Result};
use crate::grid::norm2;

/// Largest dimension [`spectrum_check`] will decompose densely.
pub const DENSE_LIMIT: usize = 4096;

/// Default seed of the power-iteration start vector.
pub const POWER_SEED: u64 = 0x5eed_f00d;

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Assemble `F` for the stencil
/// `(1/h²)[a_w u_w + a_n u_n - (a_w + a_e + a_n + a_s) u + a_s u_s + a_e u_e]`.
///
/// Couplings across the image border are dropped, which realizes
/// `∂u/∂n = 0` with reflected ghost nodes and keeps `F` symmetric with zero
/// row sums.
pub fn assemble(field: &DiffusivityField, h: f64) -> SparseOperator {
    let (m, n) = (field.rows(), field.cols());
    let dim = m * n;
    let scale = 1.0 / (h * h);
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut col_idx = Vec::with_capacity(5 * dim);
    let mut values = Vec::with_capacity(5 * dim);
    row_ptr.push(0);
    for j in 0..n {
        for i in 0..m {
            let q = j * m + i;
            let north = field.north(i, j).map(|a| (q - m, a * scale));
            let west = field.west(i, j).map(|a| (q - 1, a * scale));
            let east = field.east(i, j).map(|a| (q + 1, a * scale));
            let south = field.south(i, j).map(|a| (q + m, a * scale));
            let diag: f64 = -[north, west, east, south].iter().flatten().map(|(_, a)| a).sum::<f64>();
            for (c, v) in [north, west, Some((q, diag)), east, south].into_iter().flatten() {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
    }
    SparseOperator { dim, row_ptr, col_idx, values }
}

impl SparseOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `q`.
    pub fn row(&self, q: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[q]..self.row_ptr[q + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, q: usize, r: usize) -> f64 {
        self.row(q).find(|&(c, _)| c == r).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self, q: usize) -> f64 {
        self.get(q, q)
    }

    /// `y = F x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: x.len() });
        }
        let mut y = vec![0.0; self.dim];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `y = F x` without allocation; lengths must match `dim`.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (q, out) in y.iter_mut().enumerate() {
            let span = self.row_ptr[q]..self.row_ptr[q + 1];
            *out = self.col_idx[span.clone()].iter().zip(&self.values[span]).map(|(&c, v)| v * x[c]).sum();
        }
    }

    /// `max_q 2|F_qq|`, an upper bound on the spectral radius of `-F` when `F`
    /// is symmetric and weakly diagonally dominant.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.dim).map(|q| 2.0 * self.diagonal(q).abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for q in 0..self.dim {
            for (c, v) in self.row(q) {
                d[(q, c)] = v;
            }
        }
        d
    }

    /// Coordinate text dump, one `row col value` line per stored entry,
    /// 0-based.
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> io::Result<()> {
        for q in 0..self.dim {
            for (c, v) in self.row(q) {
                writeln!(out, "{q} {c} {v:e}")?;
            }
        }
        Ok(())
    }

    /// Elementwise structural checks.
    pub fn structure(&self) -> StructureReport {
        let mut report = StructureReport { symmetric: true, max_row_sum: 0.0, signs_ok: true, dominance_ok: true };
        for q in 0..self.dim {
            let mut sum = 0.0;
            let mut off = 0.0;
            for (c, v) in self.row(q) {
                sum += v;
                if c == q {
                    report.signs_ok &= v <= 0.0;
                } else {
                    report.signs_ok &= v >= 0.0;
                    off += v.abs();
                    report.symmetric &= self.get(c, q) == v;
                }
            }
            report.max_row_sum = report.max_row_sum.max(sum.abs());
            report.dominance_ok &= self.diagonal(q).abs() + 1e-12 >= off;
        }
        report
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StructureReport {
    /// `F_qr == F_rq` bitwise for every stored entry.
    pub symmetric: bool,
    /// `max_q |Σ_r F_qr|`
    pub max_row_sum: f64,
    /// Diagonal `<= 0`, off-diagonals `>= 0`.
    pub signs_ok: bool,
    /// `|F_qq| >= Σ_{r≠q} |F_qr|` up to `1e-12`.
    pub dominance_ok: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectralMethod {
    PowerIteration,
    Gershgorin,
}

/// Upper estimate of the largest eigenvalue of `-F`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralBound {
    pub lambda_max: f64,
    pub method: SpectralMethod,
    pub iterations: usize,
    /// Relative Rayleigh-quotient change at the last iteration.
    pub residual: f64,
}

impl SpectralBound {
    pub fn gershgorin(f: &SparseOperator) -> Self {
        Self { lambda_max: f.gershgorin_bound(), method: SpectralMethod::Gershgorin, iterations: 0, residual: 0.0 }
    }
}

/// Power iteration on `-F` from a fixed seeded start vector.
///
/// Stops once the relative change of the Rayleigh quotient drops below `tol`.
/// If that does not happen within `max_iter` iterations the Gershgorin bound
/// is returned instead.
pub fn lambda_max(f: &SparseOperator, tol: f64, max_iter: usize) -> SpectralBound {
    lambda_max_seeded(f, tol, max_iter, POWER_SEED)
}

/// [`lambda_max`] with the start vector drawn uniformly from `[-1, 1)` under
/// `seed`.
pub fn lambda_max_seeded(f: &SparseOperator, tol: f64, max_iter: usize, seed: u64) -> SpectralBound {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<f64> = (0..f.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    lambda_max_from(f, start, tol, max_iter)
}

/// [`lambda_max`] from a caller-supplied start vector.
pub fn lambda_max_from(f: &SparseOperator, start: Vec<f64>, tol: f64, max_iter: usize) -> SpectralBound {
    let mut x = start;
    let mut y = vec![0.0; f.dim];
    let nx = norm2(&x);
    if nx == 0.0 || f.dim == 0 {
        return SpectralBound::gershgorin(f);
    }
    x.iter_mut().for_each(|v| *v /= nx);

    let mut rho_prev = f64::NAN;
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        f.apply_into(&x, &mut y);
        // y = -F x; rho = x·(-F x) with ‖x‖ = 1
        y.iter_mut().for_each(|v| *v = -*v);
        let rho: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ny = norm2(&y);
        if ny == 0.0 {
            // x lies in the null space; with a symmetric F this only
            // happens for the zero operator.
            return if f.gershgorin_bound() == 0.0 {
                SpectralBound { lambda_max: 0.0, method: SpectralMethod::PowerIteration, iterations: it, residual: 0.0 }
            } else {
                SpectralBound::gershgorin(f)
            };
        }
        if rho_prev.is_finite() {
            change = (rho - rho_prev).abs() / rho.abs().max(f64::MIN_POSITIVE);
            if change < tol {
                return SpectralBound {
                    lambda_max: rho,
                    method: SpectralMethod::PowerIteration,
                    iterations: it,
                    residual: change,
                };
            }
        }
        rho_prev = rho;
        for (a, b) in x.iter_mut().zip(&y) {
            *a = b / ny;
        }
    }
    SpectralBound { residual: change, iterations: max_iter, ..SpectralBound::gershgorin(f) }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    /// Ascending eigenvalues of `F`.
    pub eigenvalues: Vec<f64>,
    pub max_eigenvalue: f64,
    pub min_eigenvalue: f64,
    /// `max_eigenvalue <= 1e-10`
    pub pass: bool,
}

/// Dense symmetric eigendecomposition of `F`; refuses `dim > 4096`.
pub fn spectrum_check(f: &SparseOperator) -> Result<SpectrumReport> {
    if f.dim > DENSE_LIMIT {
        return Err(Error::TooLarge { dim: f.dim, limit: DENSE_LIMIT });
    }
    let eig = SymmetricEigen::new(f.to_dense());
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    let max_eigenvalue = eigenvalues.last().copied().unwrap_or(0.0);
    let min_eigenvalue = eigenvalues.first().copied().unwrap_or(0.0);
    Ok(SpectrumReport { pass: max_eigenvalue <= 1e-10, eigenvalues, max_eigenvalue, min_eigenvalue })
}
