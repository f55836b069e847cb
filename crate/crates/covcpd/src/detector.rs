//! Single-test orchestration (detect candidate, calibrate, test) and the
//! binary-segmentation extension to multiple change points.
//!
//! A test runs: preprocessing, tensor lift, CUSUM scan, candidate
//! extraction, whole-segment long-run eigenvalue estimation, null-law
//! simulation, decision. Segmentation re-runs the full pipeline on each
//! side of every accepted split, with per-segment RNG streams derived from
//! the segment bounds so the tree is reproducible regardless of traversal
//! or thread order.

use serde::{Deserialize, Serialize};

use crate::covtensor::{demean_curves, lift_to_cov, rescale_unit_norm, CurvePanel};
use crate::cusum::{candidate, cusum_curve};
use crate::error::{Error, Result};
use crate::longrun::{eigenvalues, longrun_matrix, EigenSpectrum, LongRunSpec, TruncationRule};
use crate::nulldist::{critical_value, p_value, simulate_null_at_resolution};

/// Monte Carlo budget and seed for the null-law simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NullMcConfig {
    /// Number of simulated suprema.
    pub reps: usize,
    /// Bridge grid resolution.
    pub grid_r: usize,
    pub seed: u64,
}

impl Default for NullMcConfig {
    fn default() -> Self {
        NullMcConfig {
            reps: 5000,
            grid_r: 1000,
            seed: 0,
        }
    }
}

/// Full configuration of the detection/testing pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Significance level of the test.
    pub alpha: f64,
    pub longrun: LongRunSpec,
    pub null_mc: NullMcConfig,
    pub truncation: TruncationRule,
    /// Subtract the cross-sectional mean curve before testing.
    pub demean: bool,
    /// Rescale every curve to unit norm before testing.
    pub rescale: bool,
    /// Minimum segment length that will be tested.
    pub min_segment: usize,
    /// Recursion cap for binary segmentation (root depth is 1).
    pub max_depth: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            alpha: 0.05,
            longrun: LongRunSpec::default(),
            null_mc: NullMcConfig::default(),
            truncation: TruncationRule::default(),
            demean: false,
            rescale: false,
            min_segment: 30,
            max_depth: 16,
        }
    }
}

impl DetectorConfig {
    /// Validate against the basis size `p` of the panel under test.
    pub fn validate(&self, p: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.max_depth < 1 {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        if self.min_segment < 2 * (p + 1) {
            return Err(Error::invalid(format!(
                "min_segment {} is below 2(p+1) = {} for p = {p}",
                self.min_segment,
                2 * (p + 1)
            )));
        }
        if self.null_mc.reps == 0 || self.null_mc.grid_r < 2 {
            return Err(Error::invalid("null MC needs reps >= 1 and grid_r >= 2"));
        }
        Ok(())
    }
}

/// Outcome of a single change-point test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    /// The test statistic `T_N(theta_hat)`.
    pub t_max: f64,
    /// Candidate split index (1-based within the tested segment).
    pub k_hat: usize,
    pub theta_hat: f64,
    /// Critical value at the configured level.
    pub crit: f64,
    /// Add-one Monte Carlo p-value.
    pub p: f64,
    pub reject: bool,
    /// The eigenvalue spectrum used to calibrate the null law.
    pub spectrum: EigenSpectrum,
}

/// Apply the configured preprocessing: demean, then rescale.
fn preprocess(panel: &CurvePanel, config: &DetectorConfig) -> Result<CurvePanel> {
    let mut out = panel.clone();
    if config.demean {
        out = demean_curves(&out);
    }
    if config.rescale {
        out = rescale_unit_norm(&out)?;
    }
    Ok(out)
}

/// Pipeline on an already-preprocessed panel; `seed` overrides the null MC
/// stream (used by segmentation for per-segment streams).
fn detect_on_prepared(panel: &CurvePanel, config: &DetectorConfig, seed: u64) -> Result<TestResult> {
    let seq = lift_to_cov(panel);
    let curve = cusum_curve(&seq)?;
    let (k_hat, theta_hat, t_max) = candidate(&curve);
    let sigma = longrun_matrix(&seq, &config.longrun)?;
    let spectrum = eigenvalues(&sigma, seq.sym_basis(), config.truncation)?;
    // the scan maxes over the N-1 split points, so the null law is the
    // limit process at that resolution, not the continuum supremum
    let dist = simulate_null_at_resolution(
        spectrum.kept(),
        config.null_mc.reps,
        config.null_mc.grid_r,
        seed,
        panel.n_curves(),
    )?;
    let crit = critical_value(&dist, config.alpha)?;
    let p = p_value(t_max, &dist);
    Ok(TestResult {
        t_max,
        k_hat,
        theta_hat,
        crit,
        p,
        // ties do not reject: strict inequality keeps size <= alpha
        reject: t_max > crit,
        spectrum,
    })
}

/// Run the three-step procedure on a panel: preprocess, find the CUSUM
/// candidate, calibrate the null law from the whole sequence, test.
pub fn detect_and_test(panel: &CurvePanel, config: &DetectorConfig) -> Result<TestResult> {
    config.validate(panel.basis_size())?;
    let n = panel.n_curves();
    if n < config.min_segment {
        return Err(Error::SegmentTooShort {
            len: n,
            min: config.min_segment,
        });
    }
    let prepared = preprocess(panel, config)?;
    detect_on_prepared(&prepared, config, config.null_mc.seed)
}

/// Why segmentation stopped splitting a segment, or the test it ran.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NodeOutcome {
    /// The test rejected; the segment was split at `split` (absolute index).
    Rejected { split: usize, result: TestResult },
    NotSignificant { result: TestResult },
    TooShort,
    DepthCapped,
}

/// One visited segment of the binary-segmentation recursion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentNode {
    /// Absolute half-open bounds of the segment.
    pub start: usize,
    pub end: usize,
    pub depth: usize,
    #[serde(flatten)]
    pub outcome: NodeOutcome,
}

/// Binary-segmentation output: accepted change points and the full node
/// log in depth-first order (left child before right).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SegmentTree {
    /// Accepted change points, strictly increasing absolute indices. A
    /// change point `k` means the break lies between rows `k-1` and `k`
    /// of the panel (1-based split convention).
    pub change_points: Vec<usize>,
    pub nodes: Vec<SegmentNode>,
}

/// Deterministic per-segment stream id from the base seed and bounds.
fn mix_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut x = base
        ^ a.wrapping_mul(0x9e3779b97f4a7c15)
        ^ b.wrapping_mul(0xbf58476d1ce4e5b9);
    // splitmix64 finalizer
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn segment_recurse(
    panel: &CurvePanel,
    config: &DetectorConfig,
    start: usize,
    end: usize,
    depth: usize,
    tree: &mut SegmentTree,
) -> Result<()> {
    let len = end - start;
    if len < config.min_segment {
        tree.nodes.push(SegmentNode {
            start,
            end,
            depth,
            outcome: NodeOutcome::TooShort,
        });
        return Ok(());
    }
    if depth > config.max_depth {
        tree.nodes.push(SegmentNode {
            start,
            end,
            depth,
            outcome: NodeOutcome::DepthCapped,
        });
        return Ok(());
    }
    let sub = panel.slice_rows(start, end)?;
    let seed = mix_seed(config.null_mc.seed, start as u64, end as u64);
    let result = detect_on_prepared(&sub, config, seed)?;
    if result.reject {
        let split = start + result.k_hat;
        tree.change_points.push(split);
        tree.nodes.push(SegmentNode {
            start,
            end,
            depth,
            outcome: NodeOutcome::Rejected {
                split,
                result,
            },
        });
        segment_recurse(panel, config, start, split, depth + 1, tree)?;
        segment_recurse(panel, config, split, end, depth + 1, tree)?;
    } else {
        tree.nodes.push(SegmentNode {
            start,
            end,
            depth,
            outcome: NodeOutcome::NotSignificant { result },
        });
    }
    Ok(())
}

/// Detect multiple change points by recursive splitting: test the segment,
/// split at an accepted candidate, recurse on both sides with everything
/// (CUSUM, spectrum, null law) re-estimated per segment.
pub fn binary_segment(panel: &CurvePanel, config: &DetectorConfig) -> Result<SegmentTree> {
    config.validate(panel.basis_size())?;
    let prepared = preprocess(panel, config)?;
    let mut tree = SegmentTree {
        change_points: Vec::new(),
        nodes: Vec::new(),
    };
    segment_recurse(&prepared, config, 0, prepared.n_curves(), 1, &mut tree)?;
    tree.change_points.sort_unstable();
    Ok(tree)
}
