//! Long-run covariance of the tensor sequence via a kernel lag-window
//! estimator in coefficient space, and the eigenvalues that weight the
//! limiting null distribution.
//!
//! The estimator is `Sigma_C = sum_{|h| <= l} W(h/l) C_hat_h` with lag
//! matrices computed from globally demeaned coefficient rows. Operator
//! eigenvalues are those of `W^{1/2} Sigma_C W^{1/2}` (Gram-weighted, no
//! extra 1/N factor), symmetrized, clipped at zero and sorted.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::covtensor::CovCoeffSeq;
use crate::error::{Error, Result};
use crate::fbasis::SymTensorBasis;

/// Lag-window kernel. All kernels satisfy `W(0) = 1`, symmetry, and support
/// in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Bartlett,
    Parzen,
    TruncatedFlat,
}

impl KernelKind {
    /// Kernel weight at `u = h / l`.
    pub fn weight(&self, u: f64) -> f64 {
        let a = u.abs();
        if a > 1.0 {
            return 0.0;
        }
        match self {
            KernelKind::Bartlett => 1.0 - a,
            KernelKind::Parzen => {
                if a <= 0.5 {
                    1.0 - 6.0 * a * a + 6.0 * a * a * a
                } else {
                    2.0 * (1.0 - a).powi(3)
                }
            }
            KernelKind::TruncatedFlat => 1.0,
        }
    }
}

/// Bandwidth choice: a fixed lag or the cube-root default rule
/// `l = ceil(N^{1/3})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    CubeRootRule,
    Fixed(usize),
}

/// Configuration of the long-run covariance estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongRunSpec {
    pub kernel: KernelKind,
    pub bandwidth: Bandwidth,
    /// Treat the sequence as independent: only the lag-0 term is used.
    pub iid_mode: bool,
}

impl Default for LongRunSpec {
    fn default() -> Self {
        LongRunSpec {
            kernel: KernelKind::Bartlett,
            bandwidth: Bandwidth::CubeRootRule,
            iid_mode: false,
        }
    }
}

impl LongRunSpec {
    /// Lag-0-only estimation for independent functions.
    pub fn iid() -> Self {
        LongRunSpec {
            iid_mode: true,
            ..Default::default()
        }
    }

    /// Resolve the bandwidth for a sequence of length `n`.
    pub fn resolve_bandwidth(&self, n: usize) -> usize {
        if self.iid_mode {
            return 0;
        }
        match self.bandwidth {
            Bandwidth::Fixed(l) => l,
            Bandwidth::CubeRootRule => (n as f64).powf(1.0 / 3.0).ceil() as usize,
        }
    }
}

/// Truncation rule for the estimated spectrum: keep eigenvalues above
/// `rel_floor * rho_1` until `mass_target` of the total clipped mass is
/// covered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationRule {
    pub rel_floor: f64,
    pub mass_target: f64,
}

impl Default for TruncationRule {
    fn default() -> Self {
        TruncationRule {
            rel_floor: 1e-6,
            mass_target: 0.9999,
        }
    }
}

/// Estimated eigenvalues of the long-run covariance operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenSpectrum {
    /// All `J` eigenvalues, nonincreasing, negatives clipped to zero.
    pub rho: Vec<f64>,
    /// How many leading eigenvalues the truncation rule keeps.
    pub d_kept: usize,
    pub truncation_rule: TruncationRule,
    /// Basis coefficients of the eigenfunctions (columns), when requested.
    #[serde(skip)]
    pub eigvecs_b: Option<DMatrix<f64>>,
}

impl EigenSpectrum {
    /// The `d_kept` leading eigenvalues.
    pub fn kept(&self) -> &[f64] {
        &self.rho[..self.d_kept]
    }
}

/// Lag-`h` covariance matrix of the tensor coefficients.
///
/// For `h >= 0` this is `(1/(N-h)) Z'_{(h+1):N} Z_{1:(N-h)}` where `Z` holds
/// the rows of the sequence with the global mean subtracted; for `h < 0` the
/// mirrored (transposed) form.
pub fn lag_cov_matrix(seq: &CovCoeffSeq, h: i64) -> Result<DMatrix<f64>> {
    let n = seq.n();
    if h.unsigned_abs() as usize >= n {
        return Err(Error::invalid(format!(
            "lag {h} out of range for a sequence of length {n}"
        )));
    }
    if h < 0 {
        return Ok(lag_cov_matrix(seq, -h)?.transpose());
    }
    let h = h as usize;
    let c = seq.coeffs();
    let xbar = seq.xbar();
    let rows = n - h;
    let j = seq.dim();
    let mut head = DMatrix::zeros(rows, j);
    let mut tail = DMatrix::zeros(rows, j);
    for i in 0..rows {
        for col in 0..j {
            head[(i, col)] = c[(i + h, col)] - xbar[col];
            tail[(i, col)] = c[(i, col)] - xbar[col];
        }
    }
    Ok(head.transpose() * tail / rows as f64)
}

/// Kernel lag-window estimate of the long-run covariance in coefficient
/// space: `Sigma_C = sum_{|h| <= l} W(h/l) * lag_cov_matrix(h)`.
pub fn longrun_matrix(seq: &CovCoeffSeq, spec: &LongRunSpec) -> Result<DMatrix<f64>> {
    let n = seq.n();
    let l = spec.resolve_bandwidth(n);
    if l >= n {
        return Err(Error::invalid(format!(
            "bandwidth {l} must be smaller than the sequence length {n}"
        )));
    }
    if spec.iid_mode || l == 0 {
        return lag_cov_matrix(seq, 0);
    }
    let mut sigma = DMatrix::zeros(seq.dim(), seq.dim());
    for h in -(l as i64)..=(l as i64) {
        let w = spec.kernel.weight(h as f64 / l as f64);
        if w == 0.0 {
            continue;
        }
        sigma += lag_cov_matrix(seq, h)? * w;
    }
    Ok(sigma)
}

/// Symmetrized, Gram-weighted eigenproblem input
/// `M = W^{1/2} ((Sigma + Sigma')/2) W^{1/2}`.
pub(crate) fn weighted_eigen_input(
    sigma_c: &DMatrix<f64>,
    sym_basis: &SymTensorBasis,
) -> Result<DMatrix<f64>> {
    let j = sym_basis.dim();
    if sigma_c.nrows() != j || sigma_c.ncols() != j {
        return Err(Error::invalid(format!(
            "Sigma_C is {}x{}, expected {j}x{j}",
            sigma_c.nrows(),
            sigma_c.ncols()
        )));
    }
    if sigma_c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entries in Sigma_C".into()));
    }
    let sym = (sigma_c + sigma_c.transpose()) * 0.5;
    if let Some(d) = sym_basis.gram_diag() {
        if d.iter().any(|&w| w <= 0.0) {
            return Err(Error::Basis("Gram matrix is not positive definite".into()));
        }
        let sq = d.map(f64::sqrt);
        let mut m = sym;
        for r in 0..j {
            for c in 0..j {
                m[(r, c)] *= sq[r] * sq[c];
            }
        }
        Ok(m)
    } else {
        let eig = SymmetricEigen::new(sym_basis.gram().clone());
        if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
            return Err(Error::Basis("Gram matrix is not positive definite".into()));
        }
        let sqrt_vals = DVector::from_iterator(j, eig.eigenvalues.iter().map(|&v| v.sqrt()));
        let w_half =
            &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
        Ok(&w_half * sym * &w_half)
    }
}

fn inverse_sqrt_gram(sym_basis: &SymTensorBasis) -> Result<DMatrix<f64>> {
    let j = sym_basis.dim();
    if let Some(d) = sym_basis.gram_diag() {
        let mut m = DMatrix::zeros(j, j);
        for r in 0..j {
            if d[r] <= 0.0 {
                return Err(Error::Basis("Gram matrix is not positive definite".into()));
            }
            m[(r, r)] = 1.0 / d[r].sqrt();
        }
        Ok(m)
    } else {
        let eig = SymmetricEigen::new(sym_basis.gram().clone());
        if eig.eigenvalues.iter().any(|&v| v <= 0.0) {
            return Err(Error::Basis("Gram matrix is not positive definite".into()));
        }
        let inv_sqrt = DVector::from_iterator(j, eig.eigenvalues.iter().map(|&v| 1.0 / v.sqrt()));
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * eig.eigenvectors.transpose())
    }
}

/// Solve the weighted eigenproblem and truncate the spectrum.
pub fn eigenvalues(
    sigma_c: &DMatrix<f64>,
    sym_basis: &SymTensorBasis,
    rule: TruncationRule,
) -> Result<EigenSpectrum> {
    eigen_spectrum(sigma_c, sym_basis, rule, false)
}

/// As [`eigenvalues`] but also recovering the eigenfunction coefficients
/// `b = W^{-1/2} u` (columns are W-orthonormal).
pub fn eigenvalues_with_vectors(
    sigma_c: &DMatrix<f64>,
    sym_basis: &SymTensorBasis,
    rule: TruncationRule,
) -> Result<EigenSpectrum> {
    eigen_spectrum(sigma_c, sym_basis, rule, true)
}

fn eigen_spectrum(
    sigma_c: &DMatrix<f64>,
    sym_basis: &SymTensorBasis,
    rule: TruncationRule,
    want_vectors: bool,
) -> Result<EigenSpectrum> {
    let m = weighted_eigen_input(sigma_c, sym_basis)?;
    let j = sym_basis.dim();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..j).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let rho: Vec<f64> = order
        .iter()
        .map(|&idx| eig.eigenvalues[idx].max(0.0))
        .collect();
    let d_kept = truncate(&rho, rule);
    let eigvecs_b = if want_vectors {
        let w_inv_sqrt = inverse_sqrt_gram(sym_basis)?;
        let mut u = DMatrix::zeros(j, d_kept);
        for (col, &idx) in order.iter().take(d_kept).enumerate() {
            u.set_column(col, &eig.eigenvectors.column(idx));
        }
        Some(&w_inv_sqrt * u)
    } else {
        None
    };
    Ok(EigenSpectrum {
        rho,
        d_kept,
        truncation_rule: rule,
        eigvecs_b,
    })
}

fn truncate(rho_desc: &[f64], rule: TruncationRule) -> usize {
    let total: f64 = rho_desc.iter().sum();
    if total <= 0.0 || rho_desc.is_empty() || rho_desc[0] <= 0.0 {
        return 0;
    }
    let floor = rule.rel_floor * rho_desc[0];
    let mut cum = 0.0;
    for (d, &r) in rho_desc.iter().enumerate() {
        if r < floor {
            return d;
        }
        cum += r;
        if cum >= rule.mass_target * total {
            return d + 1;
        }
    }
    rho_desc.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covtensor::{lift_to_cov, CurvePanel};
    use crate::fbasis::{build_sym_basis, BasisSpec};
    use nalgebra::dmatrix;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_panel(n: usize, sds: &[f64], seed: u64) -> CurvePanel {
        let mut rng = StdRng::seed_from_u64(seed);
        let p = sds.len();
        let coeffs = DMatrix::from_fn(n, p, |_, j| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * sds[j]
        });
        CurvePanel::from_coeffs(coeffs, BasisSpec::fourier(p).unwrap()).unwrap()
    }

    #[test]
    fn kernel_weights_satisfy_the_window_conditions() {
        for k in [KernelKind::Bartlett, KernelKind::Parzen, KernelKind::TruncatedFlat] {
            assert_eq!(k.weight(0.0), 1.0);
            for u in [-1.0, -0.61, -0.25, 0.25, 0.61, 1.0] {
                assert_eq!(k.weight(u), k.weight(-u));
                assert!(k.weight(u) <= 1.0);
            }
            assert_eq!(k.weight(1.1), 0.0);
            assert_eq!(k.weight(-7.0), 0.0);
        }
        assert_eq!(KernelKind::Bartlett.weight(0.5), 0.5);
        assert_eq!(KernelKind::TruncatedFlat.weight(0.99), 1.0);
    }

    #[test]
    fn constant_sequence_has_zero_lag_covariance() {
        let panel = CurvePanel::from_coeffs(
            dmatrix![1.0, 2.0; 1.0, 2.0; 1.0, 2.0],
            BasisSpec::fourier(2).unwrap(),
        )
        .unwrap();
        let seq = lift_to_cov(&panel);
        let m0 = lag_cov_matrix(&seq, 0).unwrap();
        assert!(m0.iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn negative_lag_is_the_transpose() {
        let panel = gaussian_panel(40, &[1.0, 0.5], 3);
        let seq = lift_to_cov(&panel);
        for h in 1..4i64 {
            let a = lag_cov_matrix(&seq, h).unwrap();
            let b = lag_cov_matrix(&seq, -h).unwrap();
            assert_eq!(a, b.transpose());
        }
        assert!(lag_cov_matrix(&seq, 40).is_err());
    }

    #[test]
    fn lag_zero_matches_brute_force_outer_products() {
        let panel = gaussian_panel(50, &[1.0, 0.7, 0.4], 17);
        let seq = lift_to_cov(&panel);
        let m0 = lag_cov_matrix(&seq, 0).unwrap();
        let j = seq.dim();
        let n = seq.n();
        let mut brute = DMatrix::zeros(j, j);
        for i in 0..n {
            let z = DVector::from_fn(j, |col, _| seq.coeffs()[(i, col)] - seq.xbar()[col]);
            brute += &z * z.transpose();
        }
        brute /= n as f64;
        for (a, b) in m0.iter().zip(brute.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn iid_mode_equals_lag_zero() {
        let panel = gaussian_panel(30, &[1.0, 1.0], 5);
        let seq = lift_to_cov(&panel);
        let a = longrun_matrix(&seq, &LongRunSpec::iid()).unwrap();
        let b = lag_cov_matrix(&seq, 0).unwrap();
        assert_eq!(a, b);
        let zero_bw = LongRunSpec {
            bandwidth: Bandwidth::Fixed(0),
            ..Default::default()
        };
        assert_eq!(longrun_matrix(&seq, &zero_bw).unwrap(), b);
    }

    #[test]
    fn bartlett_window_is_a_literal_weighted_sum() {
        // MA(1)-style dependent coefficient rows via overlapping curve noise
        let mut rng = StdRng::seed_from_u64(99);
        let n = 60;
        let eps = DMatrix::from_fn(n + 1, 2, |_, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z
        });
        let coeffs = DMatrix::from_fn(n, 2, |i, j| eps[(i + 1, j)] + 0.5 * eps[(i, j)]);
        let panel = CurvePanel::from_coeffs(coeffs, BasisSpec::fourier(2).unwrap()).unwrap();
        let seq = lift_to_cov(&panel);
        let spec = LongRunSpec {
            kernel: KernelKind::Bartlett,
            bandwidth: Bandwidth::Fixed(2),
            iid_mode: false,
        };
        let got = longrun_matrix(&seq, &spec).unwrap();
        // literal three-term sum: weights 1 at h=0 and 1/2 at |h|=1
        let literal = lag_cov_matrix(&seq, 0).unwrap()
            + (lag_cov_matrix(&seq, 1).unwrap() + lag_cov_matrix(&seq, -1).unwrap()) * 0.5;
        for (a, b) in got.iter().zip(literal.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_matrix_yields_empty_spectrum() {
        let basis = build_sym_basis(&BasisSpec::fourier(2).unwrap());
        let spec = eigenvalues(&DMatrix::zeros(3, 3), &basis, TruncationRule::default()).unwrap();
        assert_eq!(spec.d_kept, 0);
        assert!(spec.rho.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn identity_gram_reduces_to_plain_eigenvalues() {
        // p = 1 has a single diagonal pair, so W = [1]
        let basis = build_sym_basis(&BasisSpec::fourier(1).unwrap());
        let sigma = dmatrix![2.5];
        let spec = eigenvalues(&sigma, &basis, TruncationRule::default()).unwrap();
        assert_eq!(spec.rho, vec![2.5]);
        assert_eq!(spec.d_kept, 1);
    }

    #[test]
    fn spectrum_matches_gaussian_fourth_moment_oracle() {
        // iid Gaussian scores with sds (1, 0.5): the population weighted
        // lag-0 operator has eigenvalues {2 s1^4, 2 s1^2 s2^2, 2 s2^4}.
        let (s1, s2) = (1.0f64, 0.5f64);
        let panel = gaussian_panel(2000, &[s1, s2], 42);
        let seq = lift_to_cov(&panel);
        let sigma = longrun_matrix(&seq, &LongRunSpec::iid()).unwrap();
        let spec = eigenvalues(&sigma, seq.sym_basis(), TruncationRule::default()).unwrap();
        let mut expect = [
            2.0 * s1.powi(4),
            2.0 * s1.powi(2) * s2.powi(2),
            2.0 * s2.powi(4),
        ];
        expect.sort_by(|a, b| b.total_cmp(a));
        for (got, want) in spec.rho.iter().zip(expect.iter()) {
            assert!(
                (got - want).abs() < 0.1 * want,
                "eigenvalue {got} vs population {want}"
            );
        }
    }

    #[test]
    fn trace_is_preserved_by_the_similarity_transform() {
        let panel = gaussian_panel(120, &[1.0, 0.8, 0.3], 1234);
        let seq = lift_to_cov(&panel);
        let sigma = longrun_matrix(&seq, &LongRunSpec::default()).unwrap();
        let m = weighted_eigen_input(&sigma, seq.sym_basis()).unwrap();
        let eig = SymmetricEigen::new(m);
        let sum: f64 = eig.eigenvalues.iter().sum();
        let sym = (&sigma + sigma.transpose()) * 0.5;
        let trace_ws = (seq.sym_basis().gram() * sym).trace();
        assert!(
            (sum - trace_ws).abs() < 1e-8 * trace_ws.abs().max(1.0),
            "eigen sum {sum} vs trace {trace_ws}"
        );
    }

    #[test]
    fn bartlett_input_is_positive_semidefinite_up_to_rounding() {
        for seed in 0..5 {
            let panel = gaussian_panel(80, &[1.0, 0.6], seed);
            let seq = lift_to_cov(&panel);
            let sigma = longrun_matrix(&seq, &LongRunSpec::default()).unwrap();
            let m = weighted_eigen_input(&sigma, seq.sym_basis()).unwrap();
            let eig = SymmetricEigen::new(m);
            let max = eig.eigenvalues.max();
            let min = eig.eigenvalues.min();
            assert!(min > -1e-8 * max, "min {min} vs max {max} (seed {seed})");
        }
    }

    #[test]
    fn scaling_curves_scales_eigenvalues_by_c4() {
        let panel = gaussian_panel(100, &[1.0, 0.5], 7);
        let c = 2.0;
        let scaled = CurvePanel::from_coeffs(panel.coeffs() * c, *panel.basis()).unwrap();
        let rule = TruncationRule::default();
        let s0 = {
            let seq = lift_to_cov(&panel);
            eigenvalues(&longrun_matrix(&seq, &LongRunSpec::default()).unwrap(), seq.sym_basis(), rule)
                .unwrap()
        };
        let s1 = {
            let seq = lift_to_cov(&scaled);
            eigenvalues(&longrun_matrix(&seq, &LongRunSpec::default()).unwrap(), seq.sym_basis(), rule)
                .unwrap()
        };
        for (a, b) in s0.rho.iter().zip(s1.rho.iter()) {
            assert!((a * c.powi(4) - b).abs() <= 1e-10 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn eigenvectors_are_gram_orthonormal() {
        let panel = gaussian_panel(300, &[1.0, 0.6], 21);
        let seq = lift_to_cov(&panel);
        let sigma = longrun_matrix(&seq, &LongRunSpec::iid()).unwrap();
        let spec =
            eigenvalues_with_vectors(&sigma, seq.sym_basis(), TruncationRule::default()).unwrap();
        let b = spec.eigvecs_b.as_ref().unwrap();
        let w = seq.sym_basis().gram();
        let gramian = b.transpose() * w * b;
        for r in 0..gramian.nrows() {
            for c in 0..gramian.ncols() {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert!((gramian[(r, c)] - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn truncation_rule_counts_mass_and_floor() {
        let rule = TruncationRule {
            rel_floor: 1e-3,
            mass_target: 0.9,
        };
        // mass target reached after two entries
        assert_eq!(truncate(&[8.0, 1.5, 0.5], rule), 2);
        // floor cuts tiny eigenvalues
        assert_eq!(truncate(&[8.0, 1.5, 1e-6], rule), 2);
        assert_eq!(truncate(&[0.0, 0.0], rule), 0);
    }
}
