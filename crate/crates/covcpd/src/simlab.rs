//! The simulation laboratory: the three built-in variance settings, the
//! panel generator with its noise ladder, power/size studies, the
//! theoretical drift profile of the scan, and localization experiments.
//!
//! Panels hold two groups of `n_per_group` independent Gaussian curves in
//! the 2nd-9th Fourier sub-band; group `g` draws coefficient `d` with
//! standard deviation `sigma_g[d]` plus common noise of standard deviation
//! `sigma / d` (so the noise level is reported as `sigma^2`). The break
//! sits at `k* = n_per_group`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::covtensor::{lift_to_cov, CurvePanel};
use crate::cusum::{candidate, cusum_curve};
use crate::detector::{detect_and_test, DetectorConfig, NullMcConfig};
use crate::error::{Error, Result};
use crate::fbasis::BasisSpec;
use crate::longrun::{LongRunSpec, TruncationRule};

/// A two-group simulation configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimSetting {
    /// Coefficient standard deviations of group 1 (length 8).
    pub sigma1: [f64; 8],
    /// Coefficient standard deviations of group 2 (length 8).
    pub sigma2: [f64; 8],
    /// Noise level `sigma^2`; coefficient `d` receives noise with standard
    /// deviation `sigma / d`.
    pub sigma_sq_noise: f64,
    pub n_per_group: usize,
    pub basis: BasisSpec,
}

impl SimSetting {
    pub fn with_noise(mut self, sigma_sq: f64) -> Self {
        self.sigma_sq_noise = sigma_sq;
        self
    }

    pub fn with_n_per_group(mut self, n: usize) -> Self {
        self.n_per_group = n;
        self
    }

    /// Make both groups draw from the group-1 law (a no-break null panel).
    pub fn under_null(mut self) -> Self {
        self.sigma2 = self.sigma1;
        self
    }

    pub fn n_total(&self) -> usize {
        2 * self.n_per_group
    }

    /// True break index `k* = n_per_group`.
    pub fn k_star(&self) -> usize {
        self.n_per_group
    }

    fn validate(&self) -> Result<()> {
        if self.sigma1.iter().chain(self.sigma2.iter()).any(|&s| s <= 0.0) {
            return Err(Error::invalid("group standard deviations must be positive"));
        }
        if self.sigma_sq_noise < 0.0 {
            return Err(Error::invalid("noise level sigma^2 must be nonnegative"));
        }
        if self.n_per_group < 2 {
            return Err(Error::invalid("need at least 2 curves per group"));
        }
        Ok(())
    }
}

/// The three built-in standard-deviation patterns over the 8-function
/// sub-band. Settings 1 and 2 move power between frequency blocks; setting
/// 3 keeps the per-frequency power equal in both groups and differs only
/// within each cosine/sine pair.
pub fn builtin_setting(id: u8) -> Result<SimSetting> {
    let sigma1: [f64; 8] = match id {
        1 => [1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.5],
        2 => [1.0, 1.0, 0.5, 0.5, 1.0, 1.0, 0.5, 0.5],
        3 => [1.0, 0.5, 1.0, 0.5, 1.0, 0.5, 1.0, 0.5],
        other => {
            return Err(Error::invalid(format!(
                "unknown setting {other}; expected 1, 2 or 3"
            )))
        }
    };
    let mut sigma2 = sigma1;
    for s in sigma2.iter_mut() {
        *s = if *s == 1.0 { 0.5 } else { 1.0 };
    }
    Ok(SimSetting {
        sigma1,
        sigma2,
        sigma_sq_noise: 0.0,
        n_per_group: 150,
        basis: BasisSpec::fourier_band(2, 8)?,
    })
}

/// Generate one panel: group-1 rows then group-2 rows, deterministic under
/// `seed`. Signal coefficients are drawn first and the noise pass second,
/// so the same seed shares its signal across the noise ladder.
pub fn generate_panel(setting: &SimSetting, seed: u64) -> Result<CurvePanel> {
    setting.validate()?;
    let n = setting.n_total();
    let p = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = DMatrix::zeros(n, p);
    for i in 0..n {
        let sds = if i < setting.n_per_group {
            &setting.sigma1
        } else {
            &setting.sigma2
        };
        for d in 0..p {
            let z: f64 = StandardNormal.sample(&mut rng);
            coeffs[(i, d)] = z * sds[d];
        }
    }
    if setting.sigma_sq_noise > 0.0 {
        let sigma = setting.sigma_sq_noise.sqrt();
        for i in 0..n {
            for d in 0..p {
                let z: f64 = StandardNormal.sample(&mut rng);
                coeffs[(i, d)] += z * sigma / (d + 1) as f64;
            }
        }
    }
    CurvePanel::from_coeffs(coeffs, setting.basis)
}

/// Linear-interpolation sample quantile (R type 7).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Knobs of the study drivers that the reported tables do not vary.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StudyOptions {
    /// Null MC budget per replicate (smaller than the interactive default:
    /// a study runs thousands of tests and the critical-value noise
    /// averages out across replicates).
    pub null_mc_reps: usize,
    pub null_grid_r: usize,
    pub longrun: LongRunSpec,
    pub truncation: TruncationRule,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            null_mc_reps: 2000,
            null_grid_r: 500,
            longrun: LongRunSpec::default(),
            truncation: TruncationRule::default(),
        }
    }
}

/// One replicate of a power study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub rep: usize,
    /// Panel seed.
    pub seed: u64,
    /// Seed of the null MC stream; rerunning the detector on the emitted
    /// panel with this seed reproduces the decision exactly.
    pub null_seed: u64,
    pub k_hat: usize,
    pub theta_hat: f64,
    pub t_max: f64,
    pub crit: f64,
    pub p: f64,
    pub reject: bool,
}

/// Aggregates for one `(sigma^2, n_per_group)` cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerRow {
    pub sigma_sq_noise: f64,
    pub n_per_group: usize,
    pub n_total: usize,
    pub reps: usize,
    pub rejection_rate: f64,
    /// 5%/50%/95% quantiles of the candidate fraction `theta_hat`.
    pub theta_q05: f64,
    pub theta_q50: f64,
    pub theta_q95: f64,
    pub runtime_seconds: f64,
    pub replicates: Vec<ReplicateOutcome>,
}

/// Full study output: one row per configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub alpha: f64,
    pub base_seed: u64,
    pub rows: Vec<PowerRow>,
}

impl ExperimentReport {
    /// Tidy CSV: one line per configuration x replicate.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "sigma_sq,n_per_group,n_total,rep,seed,null_seed,k_hat,theta_hat,t_max,crit,p,reject\n",
        );
        for row in &self.rows {
            for r in &row.replicates {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    row.sigma_sq_noise,
                    row.n_per_group,
                    row.n_total,
                    r.rep,
                    r.seed,
                    r.null_seed,
                    r.k_hat,
                    r.theta_hat,
                    r.t_max,
                    r.crit,
                    r.p,
                    r.reject
                ));
            }
        }
        out
    }
}

fn mix(base: u64, a: u64, b: u64) -> u64 {
    let mut z = base
        ^ a.wrapping_mul(0x9e3779b97f4a7c15)
        ^ b.wrapping_mul(0xd1b54a32d192ed03);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Run `detect_and_test` over a grid of noise levels and sample sizes,
/// `reps` seeded replicates per cell; reports rejection frequency and the
/// 5%/50%/95% candidate quantiles.
pub fn power_study(
    setting: &SimSetting,
    sigma_grid: &[f64],
    n_grid: &[usize],
    reps: usize,
    alpha: f64,
    seed: u64,
) -> Result<ExperimentReport> {
    power_study_with(setting, sigma_grid, n_grid, reps, alpha, seed, &StudyOptions::default())
}

/// [`power_study`] with explicit study options.
pub fn power_study_with(
    setting: &SimSetting,
    sigma_grid: &[f64],
    n_grid: &[usize],
    reps: usize,
    alpha: f64,
    seed: u64,
    options: &StudyOptions,
) -> Result<ExperimentReport> {
    if reps == 0 {
        return Err(Error::invalid("need at least one replicate"));
    }
    let mut rows = Vec::new();
    for (ci, (&sigma_sq, &npg)) in sigma_grid
        .iter()
        .flat_map(|s| n_grid.iter().map(move |n| (s, n)))
        .enumerate()
    {
        let start = Instant::now();
        let cell = setting.clone().with_noise(sigma_sq).with_n_per_group(npg);
        cell.validate()?;
        let outcomes: Result<Vec<ReplicateOutcome>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let panel_seed = mix(seed, ci as u64, rep as u64);
                let null_seed = mix(panel_seed, 1, 0);
                let panel = generate_panel(&cell, panel_seed)?;
                let config = DetectorConfig {
                    alpha,
                    longrun: options.longrun,
                    truncation: options.truncation,
                    null_mc: NullMcConfig {
                        reps: options.null_mc_reps,
                        grid_r: options.null_grid_r,
                        seed: null_seed,
                    },
                    ..Default::default()
                };
                let res = detect_and_test(&panel, &config)?;
                Ok(ReplicateOutcome {
                    rep,
                    seed: panel_seed,
                    null_seed,
                    k_hat: res.k_hat,
                    theta_hat: res.theta_hat,
                    t_max: res.t_max,
                    crit: res.crit,
                    p: res.p,
                    reject: res.reject,
                })
            })
            .collect();
        let outcomes = outcomes?;
        let mut thetas: Vec<f64> = outcomes.iter().map(|o| o.theta_hat).collect();
        thetas.sort_unstable_by(f64::total_cmp);
        let rejection_rate =
            outcomes.iter().filter(|o| o.reject).count() as f64 / reps as f64;
        rows.push(PowerRow {
            sigma_sq_noise: sigma_sq,
            n_per_group: npg,
            n_total: 2 * npg,
            reps,
            rejection_rate,
            theta_q05: quantile_type7(&thetas, 0.05),
            theta_q50: quantile_type7(&thetas, 0.50),
            theta_q95: quantile_type7(&thetas, 0.95),
            runtime_seconds: start.elapsed().as_secs_f64(),
            replicates: outcomes,
        });
    }
    Ok(ExperimentReport {
        alpha,
        base_seed: seed,
        rows,
    })
}

/// Candidate fractions `theta_hat` from the scan alone (no testing), one
/// per replicate. This is the cheap path behind interval tables and
/// localization experiments.
pub fn candidate_sample(setting: &SimSetting, reps: usize, seed: u64) -> Result<Vec<f64>> {
    let thetas: Result<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let panel = generate_panel(setting, mix(seed, 0, rep as u64))?;
            let seq = lift_to_cov(&panel);
            let curve = cusum_curve(&seq)?;
            Ok(candidate(&curve).1)
        })
        .collect();
    thetas
}

/// Localization errors at one sample size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationRow {
    pub n_per_group: usize,
    pub n_total: usize,
    pub k_star: usize,
    /// Signed errors `k_hat - k_star`, one per replicate (sorted).
    pub errors: Vec<i64>,
    pub median: f64,
    pub iqr: f64,
}

/// Distribution of the signed localization error `k_hat - k*` across
/// sample sizes.
pub fn localization_study(
    setting: &SimSetting,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<LocalizationRow>> {
    if reps == 0 {
        return Err(Error::invalid("need at least one replicate"));
    }
    let mut rows = Vec::new();
    for (ci, &npg) in n_grid.iter().enumerate() {
        let cell = setting.clone().with_n_per_group(npg);
        cell.validate()?;
        let errors: Result<Vec<i64>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let panel = generate_panel(&cell, mix(seed, 1 + ci as u64, rep as u64))?;
                let seq = lift_to_cov(&panel);
                let curve = cusum_curve(&seq)?;
                Ok(candidate(&curve).0 as i64 - cell.k_star() as i64)
            })
            .collect();
        let mut errors = errors?;
        errors.sort_unstable();
        let as_f: Vec<f64> = errors.iter().map(|&e| e as f64).collect();
        rows.push(LocalizationRow {
            n_per_group: npg,
            n_total: 2 * npg,
            k_star: npg,
            median: quantile_type7(&as_f, 0.5),
            iqr: quantile_type7(&as_f, 0.75) - quantile_type7(&as_f, 0.25),
            errors,
        });
    }
    Ok(rows)
}

/// Squared norm of the covariance discrepancy `||C1 - C2||^2`, exact in
/// coefficient space (diagonal Gaussian scores put `sigma_{g,d}^2` on the
/// diagonal pairs; the common noise variance cancels in the difference).
pub fn covariance_gap_sq(setting: &SimSetting) -> f64 {
    let sigma = setting.sigma_sq_noise.sqrt();
    (0..8)
        .map(|d| {
            let noise_var = (sigma / (d + 1) as f64).powi(2);
            let c1 = setting.sigma1[d].powi(2) + noise_var;
            let c2 = setting.sigma2[d].powi(2) + noise_var;
            (c1 - c2).powi(2)
        })
        .sum()
}

/// The limiting drift of `T_N(theta)/N` under the break at `theta* = 1/2`:
/// `||C1 - C2||^2 (theta (1-theta*))^2` left of the break and the mirrored
/// form right of it.
pub fn drift_curve(setting: &SimSetting, theta_grid: &[f64]) -> Vec<f64> {
    let gap = covariance_gap_sq(setting);
    let theta_star = 0.5;
    theta_grid
        .iter()
        .map(|&theta| {
            let factor = if theta <= theta_star {
                theta * (1.0 - theta_star)
            } else {
                (1.0 - theta) * theta_star
            };
            gap * factor * factor
        })
        .collect()
}
