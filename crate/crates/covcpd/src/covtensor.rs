//! Lift curve coefficients to covariance-tensor coefficients in the
//! symmetric tensor basis, with unit-norm rescaling and demeaning as
//! optional preprocessing.
//!
//! For a curve with coefficient vector `y` the rank-one tensor
//! `X(t,s) = Y(t) Y(s)` has coefficient `y_{d1} y_{d2}` on the symmetrized
//! pair `(d1 < d2)` and `y_d^2` on the diagonal pair `(d, d)`. The lift is
//! exact: no truncation error is introduced, so the tensor dimension is
//! always `J = p(p+1)/2`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fbasis::{build_sym_basis, BasisSpec, SymTensorBasis};

/// A panel of `N` curves represented by their basis coefficients (one row
/// per curve).
#[derive(Debug, Clone)]
pub struct CurvePanel {
    coeffs: DMatrix<f64>,
    basis: BasisSpec,
    demeaned: bool,
    rescaled: bool,
}

impl CurvePanel {
    /// Wrap an `N x p` coefficient matrix. Requires `N >= 2` and finite
    /// entries.
    pub fn from_coeffs(coeffs: DMatrix<f64>, basis: BasisSpec) -> Result<Self> {
        if coeffs.nrows() < 2 {
            return Err(Error::invalid(format!(
                "a panel needs at least 2 curves, got {}",
                coeffs.nrows()
            )));
        }
        if coeffs.ncols() != basis.len() {
            return Err(Error::invalid(format!(
                "coefficient width {} does not match basis size {}",
                coeffs.ncols(),
                basis.len()
            )));
        }
        if let Some((i, j)) = first_non_finite(&coeffs) {
            return Err(Error::Data {
                row: i,
                col: j,
                msg: "non-finite coefficient".into(),
            });
        }
        Ok(CurvePanel {
            coeffs,
            basis,
            demeaned: false,
            rescaled: false,
        })
    }

    pub fn n_curves(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn basis_size(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn is_demeaned(&self) -> bool {
        self.demeaned
    }

    pub fn is_rescaled(&self) -> bool {
        self.rescaled
    }

    /// The sub-panel of rows `start..end` (preprocessing flags carry over).
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_curves() {
            return Err(Error::invalid(format!(
                "row range {start}..{end} out of bounds for {} curves",
                self.n_curves()
            )));
        }
        if end - start < 2 {
            return Err(Error::invalid("a sub-panel needs at least 2 curves"));
        }
        Ok(CurvePanel {
            coeffs: self.coeffs.rows(start, end - start).into_owned(),
            basis: self.basis,
            demeaned: self.demeaned,
            rescaled: self.rescaled,
        })
    }

    /// Evaluate curve `i` at `t` from its basis expansion.
    pub fn eval_curve(&self, i: usize, t: f64) -> Result<f64> {
        if i >= self.n_curves() {
            return Err(Error::invalid(format!("curve index {i} out of range")));
        }
        let mut acc = 0.0;
        for d in 1..=self.basis_size() {
            acc += self.coeffs[(i, d - 1)] * self.basis.eval(d, t)?;
        }
        Ok(acc)
    }
}

fn first_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

/// The tensor-coefficient sequence of a panel: row `i` holds the
/// coefficients of `X_i = Y_i (x) Y_i` in the symmetric tensor basis.
#[derive(Debug, Clone)]
pub struct CovCoeffSeq {
    c: DMatrix<f64>,
    sym_basis: SymTensorBasis,
    xbar: DVector<f64>,
}

impl CovCoeffSeq {
    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    /// Tensor dimension `J`.
    pub fn dim(&self) -> usize {
        self.c.ncols()
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn sym_basis(&self) -> &SymTensorBasis {
        &self.sym_basis
    }

    /// Column mean of the coefficient rows (the sample mean tensor), stored
    /// once at construction.
    pub fn xbar(&self) -> &DVector<f64> {
        &self.xbar
    }
}

/// Lift every curve of the panel to its covariance-tensor coefficients.
pub fn lift_to_cov(panel: &CurvePanel) -> CovCoeffSeq {
    let sym_basis = build_sym_basis(panel.basis());
    let n = panel.n_curves();
    let p = panel.basis_size();
    let j = sym_basis.dim();
    let y = panel.coeffs();
    let mut c = DMatrix::zeros(n, j);
    for i in 0..n {
        let mut col = 0;
        for d1 in 0..p {
            let yd1 = y[(i, d1)];
            for d2 in d1..p {
                c[(i, col)] = yd1 * y[(i, d2)];
                col += 1;
            }
        }
    }
    let xbar = DVector::from_fn(j, |col, _| c.column(col).sum() / n as f64);
    CovCoeffSeq { c, sym_basis, xbar }
}

/// Rescale every curve to unit L2 norm (coefficient-space Euclidean norm,
/// which equals the function norm for an orthonormal basis).
pub fn rescale_unit_norm(panel: &CurvePanel) -> Result<CurvePanel> {
    let mut coeffs = panel.coeffs().clone();
    for i in 0..coeffs.nrows() {
        let norm = coeffs.row(i).norm();
        if norm < 1e-300 {
            return Err(Error::DegenerateCurve { index: i, norm });
        }
        for jj in 0..coeffs.ncols() {
            coeffs[(i, jj)] /= norm;
        }
    }
    Ok(CurvePanel {
        coeffs,
        basis: panel.basis,
        demeaned: panel.demeaned,
        rescaled: true,
    })
}

/// Subtract the cross-sectional mean curve from every curve.
pub fn demean_curves(panel: &CurvePanel) -> CurvePanel {
    let mut coeffs = panel.coeffs().clone();
    let n = coeffs.nrows() as f64;
    for jj in 0..coeffs.ncols() {
        let mean = coeffs.column(jj).sum() / n;
        for i in 0..coeffs.nrows() {
            coeffs[(i, jj)] -= mean;
        }
    }
    CurvePanel {
        coeffs,
        basis: panel.basis,
        demeaned: true,
        rescaled: panel.rescaled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn panel_p2(rows: DMatrix<f64>) -> CurvePanel {
        CurvePanel::from_coeffs(rows, BasisSpec::fourier(2).unwrap()).unwrap()
    }

    #[test]
    fn lift_of_unit_vector() {
        let panel = panel_p2(dmatrix![1.0, 0.0; 0.0, 1.0]);
        let seq = lift_to_cov(&panel);
        assert_eq!(seq.dim(), 3);
        assert_eq!(
            seq.coeffs().row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 0.0, 0.0]
        );
        assert_eq!(
            seq.coeffs().row(1).iter().copied().collect::<Vec<_>>(),
            vec![0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn lift_norm_identity() {
        let panel = panel_p2(dmatrix![1.0, 1.0; 2.0, -1.0]);
        let seq = lift_to_cov(&panel);
        let xi = seq.coeffs().row(0);
        assert_eq!(xi.iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0, 1.0]);
        let w = seq.sym_basis().gram_diag().unwrap();
        let quad: f64 = (0..3).map(|j| w[j] * xi[j] * xi[j]).sum();
        assert_eq!(quad, 4.0); // (y'y)^2 with y = (1,1)
    }

    #[test]
    fn lift_reconstructs_the_tensor_pointwise() {
        let spec = BasisSpec::fourier(4).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let coeffs = DMatrix::from_fn(3, 4, |_, _| rng.random_range(-2.0..2.0));
        let panel = CurvePanel::from_coeffs(coeffs, spec).unwrap();
        let seq = lift_to_cov(&panel);
        let basis = seq.sym_basis();
        for i in 0..3 {
            for a in 0..50 {
                for b in 0..50 {
                    let t = a as f64 / 49.0;
                    let s = b as f64 / 49.0;
                    let direct = panel.eval_curve(i, t).unwrap() * panel.eval_curve(i, s).unwrap();
                    let mut lifted = 0.0;
                    for j in 0..basis.dim() {
                        lifted += seq.coeffs()[(i, j)] * basis.eval(j, t, s).unwrap();
                    }
                    assert!(
                        (direct - lifted).abs() < 1e-9,
                        "mismatch at curve {i}, ({t}, {s}): {direct} vs {lifted}"
                    );
                }
            }
        }
    }

    #[test]
    fn rescale_produces_unit_rows_and_is_idempotent() {
        let panel = panel_p2(dmatrix![3.0, 4.0; 1.0, 1.0]);
        let scaled = rescale_unit_norm(&panel).unwrap();
        assert!(scaled.is_rescaled());
        assert!((scaled.coeffs()[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((scaled.coeffs()[(0, 1)] - 0.8).abs() < 1e-15);
        let twice = rescale_unit_norm(&scaled).unwrap();
        for i in 0..2 {
            assert!((twice.coeffs().row(i).norm() - 1.0).abs() < 1e-12);
            for j in 0..2 {
                assert!((twice.coeffs()[(i, j)] - scaled.coeffs()[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rescale_rejects_zero_curves() {
        let panel = panel_p2(dmatrix![0.0, 0.0; 1.0, 2.0]);
        match rescale_unit_norm(&panel) {
            Err(Error::DegenerateCurve { index: 0, .. }) => {}
            other => panic!("expected degenerate-curve error, got {other:?}"),
        }
    }

    #[test]
    fn demean_zeroes_column_means() {
        let panel = panel_p2(dmatrix![1.0, 2.0; 3.0, -2.0; 5.0, 6.0]);
        let out = demean_curves(&panel);
        assert!(out.is_demeaned());
        for j in 0..2 {
            let mean: f64 = out.coeffs().column(j).sum() / 3.0;
            assert!(mean.abs() < 1e-12);
        }
        // identical rows become zero
        let flat = demean_curves(&panel_p2(dmatrix![1.5, -0.5; 1.5, -0.5]));
        assert!(flat.coeffs().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn non_finite_coefficients_are_rejected_with_position() {
        let mut rows = dmatrix![1.0, 2.0; 3.0, 4.0];
        rows[(1, 0)] = f64::NAN;
        match CurvePanel::from_coeffs(rows, BasisSpec::fourier(2).unwrap()) {
            Err(Error::Data { row: 1, col: 0, .. }) => {}
            other => panic!("expected data error, got {other:?}"),
        }
    }

    proptest! {
        /// <<X_i, X_j>> computed in coefficient space equals <Y_i, Y_j>^2.
        #[test]
        fn tensor_inner_product_identity(
            a in proptest::collection::vec(-2.0f64..2.0, 3),
            b in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let rows = DMatrix::from_fn(2, 3, |i, j| if i == 0 { a[j] } else { b[j] });
            let panel = CurvePanel::from_coeffs(rows, BasisSpec::fourier(3).unwrap()).unwrap();
            let seq = lift_to_cov(&panel);
            let w = seq.sym_basis().gram_diag().unwrap();
            let lhs: f64 = (0..seq.dim())
                .map(|j| w[j] * seq.coeffs()[(0, j)] * seq.coeffs()[(1, j)])
                .sum();
            let dot: f64 = (0..3).map(|d| a[d] * b[d]).sum();
            prop_assert!((lhs - dot * dot).abs() < 1e-9);
        }

        /// Scaling all curves by c scales every tensor coefficient by c^2.
        #[test]
        fn lift_scaling_covariance(c in 0.1f64..4.0) {
            let rows = dmatrix![0.5, -1.0; 2.0, 0.25; -0.75, 1.5];
            let panel = CurvePanel::from_coeffs(rows.clone(), BasisSpec::fourier(2).unwrap()).unwrap();
            let scaled = CurvePanel::from_coeffs(rows * c, BasisSpec::fourier(2).unwrap()).unwrap();
            let s0 = lift_to_cov(&panel);
            let s1 = lift_to_cov(&scaled);
            for i in 0..3 {
                for j in 0..s0.dim() {
                    let expect = s0.coeffs()[(i, j)] * c * c;
                    prop_assert!((s1.coeffs()[(i, j)] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
                }
            }
        }
    }
}
