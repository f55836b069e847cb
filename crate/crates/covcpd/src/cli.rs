//! Data ingestion and the run functions behind the `covcpd` binary.
//!
//! Inputs are either CSV (one curve per row, one grid point per column; a
//! uniform grid on [0,1] is assumed) or a JSON document
//! `{"grid": [...], "curves": [[...], ...]}`. With the `coefficients`
//! layout rows are taken as basis coefficients directly and projection is
//! bypassed. Every JSON output embeds the fully resolved configuration so
//! a run can be replayed from its own artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::covtensor::CurvePanel;
use crate::detector::{
    binary_segment, detect_and_test, DetectorConfig, NullMcConfig, SegmentTree, TestResult,
};
use crate::error::{Error, Result};
use crate::fbasis::{BasisSpec, Projector};
use crate::longrun::{Bandwidth, KernelKind, LongRunSpec};
use crate::nulldist::{critical_value, simulate_null};
use crate::simlab::{builtin_setting, generate_panel, power_study_with, StudyOptions};

/// How input rows are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// Rows are curves sampled on a grid; columns are grid points.
    Grid,
    /// Rows are basis coefficient vectors; projection is bypassed.
    Coefficients,
}

impl std::str::FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Layout::Grid),
            "coefficients" => Ok(Layout::Coefficients),
            other => Err(Error::invalid(format!(
                "unknown layout '{other}' (expected grid or coefficients)"
            ))),
        }
    }
}

/// Fully resolved run configuration; embedded verbatim in every output as
/// the provenance block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub layout: Layout,
    /// Fourier band as `(start, len)`; `None` resolves per layout (grid:
    /// the first 9 functions; coefficients: one per column).
    pub band: Option<(usize, usize)>,
    pub has_header: bool,
    pub alpha: f64,
    pub kernel: KernelKind,
    /// `None` selects the cube-root bandwidth rule.
    pub bandwidth: Option<usize>,
    pub iid: bool,
    pub mc_reps: usize,
    pub grid_r: usize,
    pub seed: u64,
    pub rescale: bool,
    pub demean: bool,
    pub min_segment: usize,
    pub out: Option<PathBuf>,
    pub emit_plot_data: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            layout: Layout::Grid,
            band: None,
            has_header: false,
            alpha: 0.05,
            kernel: KernelKind::Bartlett,
            bandwidth: None,
            iid: false,
            mc_reps: 5000,
            grid_r: 1000,
            seed: 0,
            rescale: false,
            demean: false,
            min_segment: 30,
            out: None,
            emit_plot_data: false,
        }
    }
}

impl RunConfig {
    pub fn longrun_spec(&self) -> LongRunSpec {
        LongRunSpec {
            kernel: self.kernel,
            bandwidth: match self.bandwidth {
                Some(l) => Bandwidth::Fixed(l),
                None => Bandwidth::CubeRootRule,
            },
            iid_mode: self.iid,
        }
    }

    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            alpha: self.alpha,
            longrun: self.longrun_spec(),
            null_mc: NullMcConfig {
                reps: self.mc_reps,
                grid_r: self.grid_r,
                seed: self.seed,
            },
            demean: self.demean,
            rescale: self.rescale,
            min_segment: self.min_segment,
            ..Default::default()
        }
    }
}

/// Parse `START:LEN` (e.g. `2:8` for the 2nd to the 9th function).
pub fn parse_band(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("band '{s}' is not START:LEN")))?;
    let start: usize = a
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("band start '{a}' is not an integer")))?;
    let len: usize = b
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("band length '{b}' is not an integer")))?;
    if start == 0 || len == 0 {
        return Err(Error::invalid("band start and length must be positive"));
    }
    Ok((start, len))
}

/// Shape summary of an ingested file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestReport {
    pub n_curves: usize,
    pub p: usize,
    pub grid_size: usize,
}

#[derive(Deserialize)]
struct JsonPanelFile {
    #[serde(default)]
    grid: Option<Vec<f64>>,
    curves: Vec<Vec<f64>>,
}

/// Numeric table plus the grid (explicit, or uniform for CSV input).
struct RawTable {
    rows: Vec<Vec<f64>>,
    grid: Option<Vec<f64>>,
}

fn parse_csv(text: &str, has_header: bool) -> Result<RawTable> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in text
        .lines()
        .skip(if has_header { 1 } else { 0 })
        .enumerate()
    {
        if line.trim().is_empty() {
            continue;
        }
        let row = lineno; // data-row index, header excluded
        let mut vals = Vec::new();
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Data {
                row,
                col,
                msg: format!("'{}' is not a number", field.trim()),
            })?;
            vals.push(v);
        }
        if let Some(w) = width {
            if vals.len() != w {
                return Err(Error::Format {
                    row,
                    msg: format!("ragged row: {} fields, expected {w}", vals.len()),
                });
            }
        } else {
            width = Some(vals.len());
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::Format {
            row: 0,
            msg: "no data rows".into(),
        });
    }
    Ok(RawTable { rows, grid: None })
}

fn parse_json_panel(text: &str) -> Result<RawTable> {
    let file: JsonPanelFile = serde_json::from_str(text)?;
    let width = file.curves.first().map(|r| r.len()).unwrap_or(0);
    for (row, r) in file.curves.iter().enumerate() {
        if r.len() != width {
            return Err(Error::Format {
                row,
                msg: format!("ragged row: {} fields, expected {width}", r.len()),
            });
        }
    }
    if file.curves.is_empty() || width == 0 {
        return Err(Error::Format {
            row: 0,
            msg: "no curves in JSON document".into(),
        });
    }
    if let Some(grid) = &file.grid {
        if grid.len() != width {
            return Err(Error::Format {
                row: 0,
                msg: format!("grid length {} does not match row width {width}", grid.len()),
            });
        }
    }
    Ok(RawTable {
        rows: file.curves,
        grid: file.grid,
    })
}

fn check_finite(rows: &[Vec<f64>]) -> Result<()> {
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::Data {
                    row: i,
                    col: j,
                    msg: "non-finite value".into(),
                });
            }
        }
    }
    Ok(())
}

/// Read a panel file and produce a `CurvePanel`, projecting sampled curves
/// or adopting coefficient rows directly.
pub fn ingest(
    path: &Path,
    layout: Layout,
    band: Option<(usize, usize)>,
    has_header: bool,
) -> Result<(CurvePanel, IngestReport)> {
    let text = fs::read_to_string(path)?;
    let looks_like_json = text.trim_start().starts_with('{');
    let table = if looks_like_json {
        parse_json_panel(&text)?
    } else {
        parse_csv(&text, has_header)?
    };
    check_finite(&table.rows)?;
    let width = table.rows[0].len();
    let n = table.rows.len();

    match layout {
        Layout::Coefficients => {
            let (start, len) = band.unwrap_or((1, width));
            if len != width {
                return Err(Error::invalid(format!(
                    "band length {len} does not match coefficient width {width}"
                )));
            }
            let basis = BasisSpec::fourier_band(start, len)?;
            let mut coeffs = nalgebra::DMatrix::zeros(n, width);
            for (i, row) in table.rows.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    coeffs[(i, j)] = v;
                }
            }
            let panel = CurvePanel::from_coeffs(coeffs, basis)?;
            Ok((
                panel,
                IngestReport {
                    n_curves: n,
                    p: width,
                    grid_size: 0,
                },
            ))
        }
        Layout::Grid => {
            let (start, len) = band.unwrap_or((1, 9));
            let basis = BasisSpec::fourier_band(start, len)?;
            if width < len {
                return Err(Error::IllPosedProjection(format!(
                    "{width} grid columns cannot identify {len} basis coefficients"
                )));
            }
            let grid: Vec<f64> = match table.grid {
                Some(g) => g,
                None => (0..width)
                    .map(|j| j as f64 / (width - 1).max(1) as f64)
                    .collect(),
            };
            let projector = Projector::new(&grid, &basis)?;
            let mut coeffs = nalgebra::DMatrix::zeros(n, len);
            for (i, row) in table.rows.iter().enumerate() {
                let y = projector.project(row)?;
                for j in 0..len {
                    coeffs[(i, j)] = y[j];
                }
            }
            let panel = CurvePanel::from_coeffs(coeffs, basis)?;
            Ok((
                panel,
                IngestReport {
                    n_curves: n,
                    p: len,
                    grid_size: width,
                },
            ))
        }
    }
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<Option<PathBuf>> {
    match &cfg.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Ok(Some(dir.clone()))
        }
        None => Ok(None),
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    Ok(())
}

fn require_input(cfg: &RunConfig) -> Result<&Path> {
    cfg.input
        .as_deref()
        .ok_or_else(|| Error::invalid("--input is required for this subcommand"))
}

/// `detect`: run the single-test pipeline on an ingested panel.
///
/// Emits the test result as JSON (the decision is data, not an exit code)
/// and, with `--emit-plot-data`, a `tn_curve.csv` with columns
/// `theta,t_n` for the full scan trajectory.
pub fn run_detect(cfg: &RunConfig) -> Result<serde_json::Value> {
    let (panel, report) = ingest(require_input(cfg)?, cfg.layout, cfg.band, cfg.has_header)?;
    let config = cfg.detector_config();
    let result: TestResult = detect_and_test(&panel, &config)?;
    let out_dir = ensure_out_dir(cfg)?;
    if cfg.emit_plot_data {
        let dir = out_dir
            .as_deref()
            .ok_or_else(|| Error::invalid("--emit-plot-data requires --out DIR"))?;
        // re-run the cheap scan to dump the trajectory
        let prepared = preprocessed_panel(&panel, &config)?;
        let seq = crate::covtensor::lift_to_cov(&prepared);
        let curve = crate::cusum::cusum_curve(&seq)?;
        let mut csv = String::from("theta,t_n\n");
        let n = curve.n() as f64;
        for (idx, v) in curve.values().iter().enumerate() {
            csv.push_str(&format!("{},{}\n", (idx + 1) as f64 / n, v));
        }
        write_out(dir, "tn_curve.csv", &csv)?;
    }
    let doc = json!({
        "config": cfg,
        "ingest": report,
        "result": result,
    });
    if let Some(dir) = &out_dir {
        write_out(dir, "detect.json", &serde_json::to_string_pretty(&doc)?)?;
    }
    Ok(doc)
}

fn preprocessed_panel(panel: &CurvePanel, config: &DetectorConfig) -> Result<CurvePanel> {
    let mut out = panel.clone();
    if config.demean {
        out = crate::covtensor::demean_curves(&out);
    }
    if config.rescale {
        out = crate::covtensor::rescale_unit_norm(&out)?;
    }
    Ok(out)
}

/// `segment`: binary segmentation over an ingested panel.
pub fn run_segment(cfg: &RunConfig) -> Result<serde_json::Value> {
    let (panel, report) = ingest(require_input(cfg)?, cfg.layout, cfg.band, cfg.has_header)?;
    let tree: SegmentTree = binary_segment(&panel, &cfg.detector_config())?;
    let doc = json!({
        "config": cfg,
        "ingest": report,
        "tree": tree,
    });
    if let Some(dir) = ensure_out_dir(cfg)? {
        write_out(dir.as_path(), "segment.json", &serde_json::to_string_pretty(&doc)?)?;
    }
    Ok(doc)
}

/// Arguments specific to the `simulate` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    pub setting: u8,
    pub sigma_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    /// Write each replicate's panel as a coefficients CSV under
    /// `panels/` in the output directory.
    pub emit_panels: bool,
}

/// `simulate`: run a power study over the requested grid; emits the report
/// as JSON plus a tidy CSV, and optionally the simulated panels themselves.
pub fn run_simulate(cfg: &RunConfig, args: &SimulateArgs) -> Result<serde_json::Value> {
    let setting = builtin_setting(args.setting)?;
    let options = StudyOptions {
        null_mc_reps: cfg.mc_reps,
        null_grid_r: cfg.grid_r,
        longrun: cfg.longrun_spec(),
        ..Default::default()
    };
    let report = power_study_with(
        &setting,
        &args.sigma_grid,
        &args.n_grid,
        args.reps,
        cfg.alpha,
        cfg.seed,
        &options,
    )?;
    let out_dir = ensure_out_dir(cfg)?;
    if let Some(dir) = &out_dir {
        write_out(dir, "simulate.csv", &report.to_csv())?;
        if args.emit_panels {
            let panel_dir = dir.join("panels");
            fs::create_dir_all(&panel_dir)?;
            for row in &report.rows {
                let cell = setting
                    .clone()
                    .with_noise(row.sigma_sq_noise)
                    .with_n_per_group(row.n_per_group);
                for rep in &row.replicates {
                    let panel = generate_panel(&cell, rep.seed)?;
                    let name = format!(
                        "setting{}_sigma{}_n{}_rep{}.csv",
                        args.setting, row.sigma_sq_noise, row.n_total, rep.rep
                    );
                    let mut csv = String::new();
                    for i in 0..panel.n_curves() {
                        let fields: Vec<String> = (0..panel.basis_size())
                            .map(|j| format!("{}", panel.coeffs()[(i, j)]))
                            .collect();
                        csv.push_str(&fields.join(","));
                        csv.push('\n');
                    }
                    fs::write(panel_dir.join(name), csv)?;
                }
            }
        }
    }
    let doc = json!({
        "config": cfg,
        "simulate": args,
        "report": report,
    });
    if let Some(dir) = &out_dir {
        write_out(dir, "simulate.json", &serde_json::to_string_pretty(&doc)?)?;
    }
    Ok(doc)
}

/// Parse an eigenvalue file: whitespace/newline-separated numbers.
pub fn read_rho_file(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut rho = Vec::new();
    for (i, tok) in text.split_whitespace().enumerate() {
        let v: f64 = tok.parse().map_err(|_| Error::Data {
            row: i,
            col: 0,
            msg: format!("'{tok}' is not a number"),
        })?;
        rho.push(v);
    }
    if rho.is_empty() {
        return Err(Error::Format {
            row: 0,
            msg: "empty eigenvalue file".into(),
        });
    }
    Ok(rho)
}

/// `null-quantile`: simulate the null law for a given eigenvalue vector and
/// report critical values at each requested level.
pub fn run_null_quantile(
    cfg: &RunConfig,
    rho: &[f64],
    alphas: &[f64],
) -> Result<serde_json::Value> {
    if alphas.is_empty() {
        return Err(Error::invalid("need at least one alpha level"));
    }
    let dist = simulate_null(rho, cfg.mc_reps, cfg.grid_r, cfg.seed)?;
    let mut criticals = Vec::with_capacity(alphas.len());
    for &a in alphas {
        criticals.push(critical_value(&dist, a)?);
    }
    let doc = json!({
        "config": cfg,
        "rho": rho,
        "alphas": alphas,
        "critical_values": criticals,
    });
    if let Some(dir) = ensure_out_dir(cfg)? {
        write_out(
            dir.as_path(),
            "null_quantile.json",
            &serde_json::to_string_pretty(&doc)?,
        )?;
    }
    Ok(doc)
}

/// Map an error to the documented process exit code: 1 for usage errors,
/// 2 for data/input errors.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

/// Parse a plain `key=value` configuration file (one pair per line,
/// `#` comments allowed). Keys mirror the long flag names.
pub fn apply_config_file(cfg: &mut RunConfig, path: &Path) -> Result<()> {
    let text = fs::read_to_string(path)?;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
            row: lineno,
            msg: format!("expected key=value, got '{line}'"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| Error::invalid(format!("config key {key}: {what} '{value}'"));
        match key {
            "input" => cfg.input = Some(PathBuf::from(value)),
            "layout" => cfg.layout = value.parse()?,
            "band" => cfg.band = Some(parse_band(value)?),
            "has-header" => cfg.has_header = value.parse().map_err(|_| bad("bad bool"))?,
            "alpha" => cfg.alpha = value.parse().map_err(|_| bad("bad number"))?,
            "kernel" => {
                cfg.kernel = match value {
                    "bartlett" => KernelKind::Bartlett,
                    "parzen" => KernelKind::Parzen,
                    "truncated-flat" => KernelKind::TruncatedFlat,
                    _ => return Err(bad("unknown kernel")),
                }
            }
            "bandwidth" => cfg.bandwidth = Some(value.parse().map_err(|_| bad("bad integer"))?),
            "iid" => cfg.iid = value.parse().map_err(|_| bad("bad bool"))?,
            "mc-reps" => cfg.mc_reps = value.parse().map_err(|_| bad("bad integer"))?,
            "grid-r" => cfg.grid_r = value.parse().map_err(|_| bad("bad integer"))?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad("bad integer"))?,
            "rescale" => cfg.rescale = value.parse().map_err(|_| bad("bad bool"))?,
            "demean" => cfg.demean = value.parse().map_err(|_| bad("bad bool"))?,
            "min-segment" => cfg.min_segment = value.parse().map_err(|_| bad("bad integer"))?,
            "out" => cfg.out = Some(PathBuf::from(value)),
            "emit-plot-data" => {
                cfg.emit_plot_data = value.parse().map_err(|_| bad("bad bool"))?
            }
            other => {
                return Err(Error::invalid(format!("unknown config key '{other}'")));
            }
        }
    }
    Ok(())
}
