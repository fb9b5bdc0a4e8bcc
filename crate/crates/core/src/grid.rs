//! Pixel lattices, column stacking, synthetic fixtures and the multiplicative
//! noise model.
//!
//! Pixel `(i, j)` is row `i`, column `j` (both 0-based). Storage is
//! column-major, so the stacked index of `(i, j)` is `j * rows + i` and
//! [`ImageGrid::vec`] is a copy of the backing buffer.

use std::ops::{Deref, DerefMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// An `M x N` lattice of real intensities with uniform spacing `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    rows: usize,
    cols: usize,
    spacing: f64,
    data: Vec<f64>,
}

impl ImageGrid {
    /// All-zero grid with unit spacing.
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        check_shape(rows, cols)?;
        Ok(Self { rows, cols, spacing: 1.0, data: vec![0.0; rows * cols] })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        check_shape(rows, cols)?;
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self::from_column_major(rows, cols, data)
    }

    /// Build from a row-major buffer (the order image files use).
    pub fn from_row_major(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension { expected: rows * cols, found: values.len() });
        }
        Self::from_fn(rows, cols, |i, j| values[i * cols + j])
    }

    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::Dimension { expected: rows * cols, found: data.len() });
        }
        if let Some(q) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::param(format!("pixel {q} is not finite")));
        }
        Ok(Self { rows, cols, spacing: 1.0, data })
    }

    pub fn with_spacing(mut self, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::param(format!("grid spacing must be positive, got {spacing}")));
        }
        self.spacing = spacing;
        Ok(self)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.rows && j < self.cols);
        j * self.rows + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let q = self.index(i, j);
        self.data[q] = value;
    }

    pub fn as_column_major(&self) -> &[f64] {
        &self.data
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.push(self.get(i, j));
            }
        }
        out
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.len() as f64
    }

    /// Copy with every pixel clamped to `[lo, hi]`.
    pub fn clamped(&self, lo: f64, hi: f64) -> Self {
        Self { data: self.data.iter().map(|x| x.clamp(lo, hi)).collect(), ..self.clone() }
    }

    /// Column-stacked vector of the pixels.
    pub fn vec(&self) -> StackedVector {
        StackedVector(self.data.clone())
    }

    /// Inverse of [`ImageGrid::vec`]; spacing is reset to 1.
    pub fn array(v: &StackedVector, rows: usize, cols: usize) -> Result<Self> {
        Self::from_column_major(rows, cols, v.0.clone())
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::param(format!("empty grid {rows}x{cols}")));
    }
    Ok(())
}

/// Column-stacked pixel vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StackedVector(pub Vec<f64>);

impl StackedVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StackedVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for StackedVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for StackedVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub fn vec(grid: &ImageGrid) -> StackedVector {
    grid.vec()
}

pub fn array(v: &StackedVector, rows: usize, cols: usize) -> Result<ImageGrid> {
    ImageGrid::array(v, rows, cols)
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖u − reference‖₂ / ‖reference‖₂`.
pub fn rel_l2(u: &[f64], reference: &[f64]) -> Result<f64> {
    if u.len() != reference.len() {
        return Err(Error::Dimension { expected: reference.len(), found: u.len() });
    }
    let denom = norm2(reference);
    if denom == 0.0 {
        return Err(Error::Degenerate("reference has zero norm".into()));
    }
    let diff = u.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(diff / denom)
}

/// Relative noise level and generator seed for [`add_noise`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(delta: f64, seed: u64) -> Self {
        Self { delta, seed }
    }
}

/// Multiplicative uniform noise `u(x) * (1 + delta * (2 r(x) - 1))`, `r ~ U[0, 1)`.
///
/// Draws come from a ChaCha8 stream seeded with `spec.seed`, one per pixel in
/// stacked order.
pub fn add_noise(clean: &ImageGrid, spec: &NoiseSpec) -> Result<ImageGrid> {
    if !(spec.delta >= 0.0 && spec.delta.is_finite()) {
        return Err(Error::param(format!("noise level must be >= 0, got {}", spec.delta)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = clean.clone();
    for x in out.data.iter_mut() {
        let r: f64 = rng.gen();
        *x *= 1.0 + spec.delta * (2.0 * r - 1.0);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SynthKind {
    /// Left half 0.25, right half 0.75.
    PiecewiseConstant,
    /// `u(i, j) = j / (N - 1)`.
    Ramp,
    /// Indicator of the centred disk of radius `min(M, N) / 4`.
    Disk,
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "piecewise-constant" | "piecewise" => Ok(Self::PiecewiseConstant),
            "ramp" => Ok(Self::Ramp),
            "disk" => Ok(Self::Disk),
            other => Err(Error::param(format!("unknown synthetic image kind '{other}'"))),
        }
    }
}

pub fn synth_image(kind: SynthKind, rows: usize, cols: usize) -> Result<ImageGrid> {
    if rows < 2 || cols < 2 {
        return Err(Error::param(format!("synthetic images need at least 2x2, got {rows}x{cols}")));
    }
    match kind {
        SynthKind::PiecewiseConstant => ImageGrid::from_fn(rows, cols, |_, j| if j < cols / 2 { 0.25 } else { 0.75 }),
        SynthKind::Ramp => ImageGrid::from_fn(rows, cols, |_, j| j as f64 / (cols - 1) as f64),
        SynthKind::Disk => {
            let ci = (rows as f64 - 1.0) / 2.0;
            let cj = (cols as f64 - 1.0) / 2.0;
            let r = rows.min(cols) as f64 / 4.0;
            ImageGrid::from_fn(rows, cols, |i, j| {
                let di = i as f64 - ci;
                let dj = j as f64 - cj;
                if di * di + dj * dj <= r * r {
                    1.0
                } else {
                    0.0
                }
            })
        }
    }
}
