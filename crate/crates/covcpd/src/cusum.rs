//! The weighted CUSUM process over the tensor-coefficient sequence.
//!
//! For a split index `k` the scan evaluates
//! `T_N(k/N) = (1/N) v_k' W v_k` with
//! `v_k = sum_{i<=k} Xi_i - (k/N) sum_{i<=N} Xi_i`, which equals the squared
//! L2 norm of the weighted two-sample difference of covariance estimates.
//! Candidates range over every `k = 1..N-1`; the weight `k(N-k)/N` built
//! into `v_k` already attenuates the edges.

use nalgebra::DVector;

use crate::covtensor::CovCoeffSeq;
use crate::error::{Error, Result};

/// The CUSUM trajectory `T_N(k/N)`, `k = 1..N-1`, and its argmax candidate.
#[derive(Debug, Clone)]
pub struct CusumCurve {
    values: Vec<f64>,
    n: usize,
    argmax_k: usize,
    theta_hat: f64,
}

impl CusumCurve {
    /// `T_N(k/N)` for `k = 1..N-1` (entry `k-1` holds split `k`).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Smallest split index attaining the maximum.
    pub fn argmax_k(&self) -> usize {
        self.argmax_k
    }

    pub fn theta_hat(&self) -> f64 {
        self.theta_hat
    }

    /// Maximum of the trajectory, `T_N(theta_hat)`.
    pub fn t_max(&self) -> f64 {
        self.values[self.argmax_k - 1]
    }
}

/// Cumulative sum with Kahan compensation, one accumulator per coordinate.
/// The scan is a difference of large partial sums, so the compensation keeps
/// long sequences from losing low-order bits.
struct CompensatedSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedSum {
    fn new(dim: usize) -> Self {
        CompensatedSum {
            sum: vec![0.0; dim],
            comp: vec![0.0; dim],
        }
    }

    fn add_row(&mut self, row: impl Iterator<Item = f64>) {
        for (j, x) in row.enumerate() {
            let y = x - self.comp[j];
            let t = self.sum[j] + y;
            self.comp[j] = (t - self.sum[j]) - y;
            self.sum[j] = t;
        }
    }
}

/// Scan the CUSUM process over all candidate split points.
pub fn cusum_curve(seq: &CovCoeffSeq) -> Result<CusumCurve> {
    let n = seq.n();
    if n < 2 {
        return Err(Error::invalid("CUSUM needs at least 2 observations"));
    }
    let j = seq.dim();
    let c = seq.coeffs();

    let mut total = CompensatedSum::new(j);
    for i in 0..n {
        total.add_row(c.row(i).iter().copied());
    }
    let total = DVector::from_vec(total.sum);

    let wdiag = seq.sym_basis().gram_diag();
    let gram = seq.sym_basis().gram();

    let nf = n as f64;
    let mut prefix = CompensatedSum::new(j);
    let mut values = Vec::with_capacity(n - 1);
    let mut v = DVector::zeros(j);
    for k in 1..n {
        prefix.add_row(c.row(k - 1).iter().copied());
        let frac = k as f64 / nf;
        for idx in 0..j {
            v[idx] = prefix.sum[idx] - frac * total[idx];
        }
        let quad = match &wdiag {
            Some(w) => (0..j).map(|idx| w[idx] * v[idx] * v[idx]).sum::<f64>(),
            None => (gram * &v).dot(&v),
        };
        values.push(quad / nf);
    }

    let mut argmax_k = 1;
    let mut best = values[0];
    for (idx, &val) in values.iter().enumerate().skip(1) {
        if val > best {
            best = val;
            argmax_k = idx + 1;
        }
    }
    if !best.is_finite() {
        return Err(Error::Numerical("non-finite CUSUM value".into()));
    }
    Ok(CusumCurve {
        values,
        n,
        argmax_k,
        theta_hat: argmax_k as f64 / nf,
    })
}

/// The change-point candidate: smallest maximizing split `k`, its fraction
/// `theta = k/N`, and the statistic `T_N(theta)`.
pub fn candidate(curve: &CusumCurve) -> (usize, f64, f64) {
    (curve.argmax_k(), curve.theta_hat(), curve.t_max())
}
