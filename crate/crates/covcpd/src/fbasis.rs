//! Fourier basis construction, curve projection, and the symmetric tensor
//! basis for two-way symmetric functions.
//!
//! Curves live on the closed unit interval. The Fourier system is indexed
//! globally as `F_1 = 1`, `F_{2k}(t) = sqrt(2) cos(2 pi k t)`,
//! `F_{2k+1}(t) = sqrt(2) sin(2 pi k t)`; a basis is either the leading `p`
//! functions or a contiguous sub-band of them (e.g. functions 2..9, the
//! 1-4 Hz delta band at a one-second epoch length). All basis functions are
//! orthonormal in L2[0,1], so coefficient-space Euclidean algebra equals
//! function-space L2 algebra and no quadrature is needed downstream.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A Fourier basis on [0,1]: either the first `p` functions or a contiguous
/// sub-band `start..start+len-1` in the global numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    start: usize,
    len: usize,
}

impl BasisSpec {
    /// The leading `p` Fourier functions (constant plus cosine/sine pairs).
    pub fn fourier(p: usize) -> Result<Self> {
        Self::fourier_band(1, p)
    }

    /// A contiguous sub-band of `len` functions starting at global index
    /// `start` (1-based). `fourier_band(2, 8)` selects the 2nd to the 9th
    /// Fourier function.
    pub fn fourier_band(start: usize, len: usize) -> Result<Self> {
        if start == 0 {
            return Err(Error::invalid("basis sub-band start index must be >= 1"));
        }
        if len == 0 {
            return Err(Error::invalid("basis must contain at least one function"));
        }
        Ok(BasisSpec { start, len })
    }

    /// Number of basis functions `p`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// First global Fourier index of the band (1 for a plain Fourier basis).
    pub fn start(&self) -> usize {
        self.start
    }

    /// Global Fourier index of the `i`-th basis function (both 1-based).
    pub fn global_index(&self, i: usize) -> usize {
        self.start + i - 1
    }

    /// Evaluate the `i`-th basis function (1-based within this spec) at `t`.
    pub fn eval(&self, i: usize, t: f64) -> Result<f64> {
        if i == 0 || i > self.len {
            return Err(Error::invalid(format!(
                "basis index {i} out of range 1..={}",
                self.len
            )));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::invalid(format!("point {t} outside the unit interval")));
        }
        Ok(fourier_global(self.global_index(i), t))
    }

    /// Evaluate all `p` basis functions at `t` into a row of `out`.
    fn eval_all(&self, t: f64, out: &mut [f64]) {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = fourier_global(self.global_index(i + 1), t);
        }
    }
}

/// Evaluate the global Fourier function `F_g` at `t`.
fn fourier_global(g: usize, t: f64) -> f64 {
    debug_assert!(g >= 1);
    if g == 1 {
        1.0
    } else if g % 2 == 0 {
        let k = (g / 2) as f64;
        f64::sqrt(2.0) * (2.0 * PI * k * t).cos()
    } else {
        let k = (g / 2) as f64;
        f64::sqrt(2.0) * (2.0 * PI * k * t).sin()
    }
}

/// Evaluate the `i`-th basis function of `spec` at `t`.
///
/// Returns 1 for the constant, `sqrt(2) cos(2 pi k t)` for even global index
/// `2k` and `sqrt(2) sin(2 pi k t)` for odd global index `2k+1`.
pub fn fourier_eval(spec: &BasisSpec, i: usize, t: f64) -> Result<f64> {
    spec.eval(i, t)
}

/// Least-squares projector from samples on a fixed grid onto a basis.
///
/// Factorizes the design matrix once so that many curves observed on the
/// same grid can be projected cheaply.
#[derive(Debug, Clone)]
pub struct Projector {
    /// Pseudo-inverse of the design matrix, `p x n`.
    pinv: DMatrix<f64>,
    n_points: usize,
}

impl Projector {
    /// Build a projector for curves sampled at `grid` points.
    pub fn new(grid: &[f64], spec: &BasisSpec) -> Result<Self> {
        let p = spec.len();
        let n = grid.len();
        let mut distinct: Vec<f64> = grid.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if distinct.len() < p {
            return Err(Error::IllPosedProjection(format!(
                "{} distinct sample points cannot identify {p} basis coefficients",
                distinct.len()
            )));
        }
        for &t in grid {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid(format!("grid point {t} outside the unit interval")));
            }
        }
        let mut design = DMatrix::zeros(n, p);
        let mut row = vec![0.0; p];
        for (j, &t) in grid.iter().enumerate() {
            spec.eval_all(t, &mut row);
            for (i, &v) in row.iter().enumerate() {
                design[(j, i)] = v;
            }
        }
        let svd = design.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smax > 0.0) || smin < 1e-10 * smax {
            return Err(Error::IllPosedProjection(format!(
                "design matrix is rank deficient (singular values {smin:e}..{smax:e})"
            )));
        }
        let pinv = svd
            .pseudo_inverse(1e-12 * smax)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        Ok(Projector { pinv, n_points: n })
    }

    /// Project one curve (values at the grid points) onto the basis.
    pub fn project(&self, values: &[f64]) -> Result<DVector<f64>> {
        if values.len() != self.n_points {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                self.n_points,
                values.len()
            )));
        }
        let y = DVector::from_column_slice(values);
        Ok(&self.pinv * y)
    }
}

/// Project a sampled curve onto `spec` by least squares.
///
/// `samples` are `(t, Y(t))` pairs; at least `p` distinct sample points are
/// required. The fit is deterministic for a fixed grid.
pub fn project_curve(samples: &[(f64, f64)], spec: &BasisSpec) -> Result<DVector<f64>> {
    let grid: Vec<f64> = samples.iter().map(|&(t, _)| t).collect();
    let vals: Vec<f64> = samples.iter().map(|&(_, y)| y).collect();
    Projector::new(&grid, spec)?.project(&vals)
}

/// Basis for two-way symmetric functions built from an orthonormal basis:
/// symmetrized products for unordered index pairs, together with the Gram
/// matrix of their pairwise inner products.
///
/// For pair `(d1, d2)` with `d1 < d2` the element is
/// `phi_{d1}(t) phi_{d2}(s) + phi_{d2}(t) phi_{d1}(s)`; for `(d, d)` it is
/// `phi_d(t) phi_d(s)`. Pairs are ordered lexicographically, so for `p = 2`
/// the order is (1,1), (1,2), (2,2).
#[derive(Debug, Clone)]
pub struct SymTensorBasis {
    base: BasisSpec,
    /// Unordered index pairs `(d1 <= d2)`, 1-based into the underlying basis.
    pairs: Vec<(usize, usize)>,
    /// Gram matrix `W`, `J x J`. Diagonal for an orthonormal underlying
    /// basis: entry 1 for diagonal pairs, 2 for off-diagonal pairs.
    gram: DMatrix<f64>,
}

impl SymTensorBasis {
    /// Dimension `J = p(p+1)/2`.
    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    pub fn base(&self) -> &BasisSpec {
        &self.base
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Position of the unordered pair `(d1, d2)` in the lexicographic layout.
    pub fn index_of(&self, d1: usize, d2: usize) -> usize {
        let (a, b) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        debug_assert!(a >= 1 && b <= self.base.len());
        // pairs (1,1)..(1,p) come first, then (2,2)..(2,p), ...
        let p = self.base.len();
        (a - 1) * (2 * p - a + 2) / 2 + (b - a)
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Diagonal of `W` when `W` is exactly diagonal (always true for the
    /// analytic construction over an orthonormal basis).
    pub fn gram_diag(&self) -> Option<DVector<f64>> {
        let j = self.dim();
        for r in 0..j {
            for c in 0..j {
                if r != c && self.gram[(r, c)] != 0.0 {
                    return None;
                }
            }
        }
        Some(DVector::from_fn(j, |r, _| self.gram[(r, r)]))
    }

    /// Evaluate the `j`-th (0-based) tensor basis element at `(t, s)`.
    pub fn eval(&self, j: usize, t: f64, s: f64) -> Result<f64> {
        let (d1, d2) = *self
            .pairs
            .get(j)
            .ok_or_else(|| Error::invalid(format!("tensor index {j} out of range")))?;
        let f1t = self.base.eval(d1, t)?;
        let f2s = self.base.eval(d2, s)?;
        if d1 == d2 {
            Ok(f1t * f2s)
        } else {
            let f2t = self.base.eval(d2, t)?;
            let f1s = self.base.eval(d1, s)?;
            Ok(f1t * f2s + f2t * f1s)
        }
    }
}

/// Build the symmetric tensor basis over `spec` with its analytic Gram matrix.
pub fn build_sym_basis(spec: &BasisSpec) -> SymTensorBasis {
    let p = spec.len();
    let mut pairs = Vec::with_capacity(p * (p + 1) / 2);
    for d1 in 1..=p {
        for d2 in d1..=p {
            pairs.push((d1, d2));
        }
    }
    let j = pairs.len();
    let mut gram = DMatrix::zeros(j, j);
    for (idx, &(d1, d2)) in pairs.iter().enumerate() {
        gram[(idx, idx)] = if d1 == d2 { 1.0 } else { 2.0 };
    }
    SymTensorBasis {
        base: *spec,
        pairs,
        gram,
    }
}
