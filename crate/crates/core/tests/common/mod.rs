//! Independent dense reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svddf::ImageGrid;

pub fn random_image(rows: usize, cols: usize, seed: u64) -> ImageGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ImageGrid::from_fn(rows, cols, |_, _| rng.gen::<f64>()).unwrap()
}

/// Mirror `k` into `0..n` by repeated folding (`u[-1] = u[0]`, `u[n] = u[n-1]`).
pub fn mirror(mut k: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if k < 0 {
            k = -k - 1;
        } else if k >= n {
            k = 2 * n - k - 1;
        } else {
            return k as usize;
        }
    }
}

/// `(gx, gy)` at `(i, j)` by a direct 2D sum over the full derivative kernel.
pub fn smoothed_gradient_at(u: &ImageGrid, sigma: f64, i: usize, j: usize) -> (f64, f64) {
    let r = (3.0 * sigma.sqrt()).ceil() as isize;
    let g = |t: isize| (-(t * t) as f64 / (2.0 * sigma)).exp();
    let norm: f64 = (-r..=r).map(g).sum();
    let (mut gx, mut gy) = (0.0, 0.0);
    for s in -r..=r {
        for t in -r..=r {
            let val = u.get(mirror(i as isize - s, u.rows()), mirror(j as isize - t, u.cols()));
            let gs = g(s) / norm;
            let gt = g(t) / norm;
            gx += -(s as f64) / sigma * gs * gt * val;
            gy += gs * (-(t as f64) / sigma) * gt * val;
        }
    }
    (gx / u.spacing(), gy / u.spacing())
}

pub fn coefficient(gx: f64, gy: f64, eps: f64, p: f64) -> f64 {
    (eps + gx * gx + gy * gy).powf((p - 2.0) / 2.0)
}

/// Diffusivity between node `(i, j)` and its neighbour `(i2, j2)`.
pub fn face_coefficient(u: &ImageGrid, eps: f64, p: f64, sigma: f64, a: (usize, usize), b: (usize, usize)) -> f64 {
    let (x0, y0) = smoothed_gradient_at(u, sigma, a.0, a.1);
    let (x1, y1) = smoothed_gradient_at(u, sigma, b.0, b.1);
    coefficient((x0 + x1) / 2.0, (y0 + y1) / 2.0, eps, p)
}

/// Dense stencil matrix by enumerating every neighbour pair.
pub fn dense_operator(u: &ImageGrid, eps: f64, p: f64, sigma: f64) -> DMatrix<f64> {
    let (m, n) = (u.rows(), u.cols());
    let h2 = u.spacing() * u.spacing();
    let mut f = DMatrix::zeros(m * n, m * n);
    let idx = |i: usize, j: usize| j * m + i;
    for j in 0..n {
        for i in 0..m {
            for (di, dj) in [(1usize, 0usize), (0, 1)] {
                let (i2, j2) = (i + di, j + dj);
                if i2 >= m || j2 >= n {
                    continue;
                }
                let c = face_coefficient(u, eps, p, sigma, (i, j), (i2, j2)) / h2;
                let (q, r) = (idx(i, j), idx(i2, j2));
                f[(q, r)] += c;
                f[(r, q)] += c;
                f[(q, q)] -= c;
                f[(r, r)] -= c;
            }
        }
    }
    f
}

/// Unit-coefficient Neumann Laplacian.
pub fn dense_laplacian(m: usize, n: usize, h: f64) -> DMatrix<f64> {
    let u = ImageGrid::from_fn(m, n, |_, _| 0.0).unwrap().with_spacing(h).unwrap();
    dense_operator(&u, 1.0, 2.0, 1.0)
}

/// `Σ_{k + l >= n0} |Σ_{i,j} u(i,j) e^{-2πi(ik/M + jl/N)}|²`
pub fn naive_high_freq_energy(u: &ImageGrid, n0: usize) -> f64 {
    let (m, n) = (u.rows(), u.cols());
    let mut total = 0.0;
    for k in 0..m {
        for l in 0..n {
            if k + l < n0 {
                continue;
            }
            let (mut re, mut im) = (0.0, 0.0);
            for i in 0..m {
                for j in 0..n {
                    let phase = -2.0 * std::f64::consts::PI * ((i * k) as f64 / m as f64 + (j * l) as f64 / n as f64);
                    re += u.get(i, j) * phase.cos();
                    im += u.get(i, j) * phase.sin();
                }
            }
            total += re * re + im * im;
        }
    }
    total
}

/// `A` and `B` of one step acting on `z = (u, v)`, for lagged and current
/// operators `f_prev`, `f_cur`.
pub fn step_matrices(f_prev: &DMatrix<f64>, f_cur: &DMatrix<f64>, eta: f64, dt: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = f_prev.nrows();
    let c = eta * dt / 2.0;
    let eye = DMatrix::<f64>::identity(d, d);
    let mut a = DMatrix::zeros(2 * d, 2 * d);
    a.view_mut((0, 0), (d, d)).copy_from(&((&eye * (1.0 + c) + f_prev * (dt * dt / 2.0)) / (1.0 + c)));
    a.view_mut((0, d), (d, d)).copy_from(&(&eye * (dt / (1.0 + c))));
    a.view_mut((d, 0), (d, d)).copy_from(&(f_prev * (dt / 2.0 / (1.0 + c))));
    a.view_mut((d, d), (d, d)).copy_from(&(&eye / (1.0 + c)));
    let mut b = DMatrix::zeros(2 * d, 2 * d);
    b.view_mut((0, 0), (d, d)).copy_from(&eye);
    b.view_mut((d, 0), (d, d)).copy_from(&(f_cur * (dt / 2.0)));
    b.view_mut((d, d), (d, d)).copy_from(&(&eye * (1.0 - c)));
    (a, b)
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `exp(t F) x` for symmetric `F`.
pub fn expm_apply(f: &DMatrix<f64>, t: f64, x: &DVector<f64>) -> DVector<f64> {
    let eig = f.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let coeffs = q.transpose() * x;
    let scaled =
        DVector::from_iterator(coeffs.len(), coeffs.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| c * (t * l).exp()));
    q * scaled
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Exact `u(t)` for `u'' + η u' + λ u = 0`, `u(0) = 1`, `u'(0) = 0`.
pub fn damped_oscillator(lambda: f64, eta: f64, t: f64) -> f64 {
    let disc = eta * eta / 4.0 - lambda;
    let decay = (-eta * t / 2.0).exp();
    if disc < 0.0 {
        let w = (-disc).sqrt();
        decay * ((w * t).cos() + eta / (2.0 * w) * (w * t).sin())
    } else if disc > 0.0 {
        let w = disc.sqrt();
        decay * ((w * t).cosh() + eta / (2.0 * w) * (w * t).sinh())
    } else {
        decay * (1.0 + eta * t / 2.0)
    }
}
