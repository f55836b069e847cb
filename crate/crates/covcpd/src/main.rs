//! Thin command-line front end over the `covcpd` library.
//!
//! Configuration precedence: command-line flags override the `--config`
//! key=value file, which overrides the `COVCPD_SEED` environment variable
//! (seed only), which overrides built-in defaults.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use covcpd::cli::{
    apply_config_file, exit_code, parse_band, run_detect, run_null_quantile, run_segment,
    run_simulate, Layout, RunConfig, SimulateArgs,
};
use covcpd::error::Error;
use covcpd::longrun::KernelKind;

#[derive(Parser)]
#[command(
    name = "covcpd",
    version,
    about = "Detect and test change points in the covariance structure of functional data",
    after_help = "Exit codes: 0 success, 1 usage error, 2 data error.\n\
                  The detect decision itself is reported in the JSON output, not the exit code."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct SharedOpts {
    /// Input panel file (CSV: one curve per row; or JSON {grid, curves})
    #[arg(long, global = true)]
    input: Option<PathBuf>,

    /// Row interpretation: sampled curves or basis coefficients
    #[arg(long, global = true, value_parser = parse_layout)]
    layout: Option<Layout>,

    /// Fourier band START:LEN (e.g. 2:8 selects the 2nd..9th functions)
    #[arg(long, global = true, value_parser = parse_band_arg)]
    band: Option<(usize, usize)>,

    /// The input CSV carries a header row
    #[arg(long, global = true)]
    has_header: bool,

    /// Significance level
    #[arg(long, global = true)]
    alpha: Option<f64>,

    /// Lag-window kernel: bartlett, parzen or truncated-flat
    #[arg(long, global = true, value_parser = parse_kernel)]
    kernel: Option<KernelKind>,

    /// Fixed lag-window bandwidth (default: ceil(N^(1/3)))
    #[arg(long, global = true)]
    bandwidth: Option<usize>,

    /// Treat curves as independent (lag-0 estimator only)
    #[arg(long, global = true)]
    iid: bool,

    /// Null Monte Carlo replicates
    #[arg(long, global = true)]
    mc_reps: Option<usize>,

    /// Brownian-bridge grid resolution
    #[arg(long, global = true)]
    grid_r: Option<usize>,

    /// RNG seed (flags > config file > COVCPD_SEED > 0)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Rescale every curve to unit norm before testing
    #[arg(long, global = true)]
    rescale: bool,

    /// Subtract the cross-sectional mean curve before testing
    #[arg(long, global = true)]
    demean: bool,

    /// Minimum segment length that will be tested
    #[arg(long, global = true)]
    min_segment: Option<usize>,

    /// Output directory for JSON/CSV artifacts
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Emit plot-ready CSV data (detect: tn_curve.csv)
    #[arg(long, global = true)]
    emit_plot_data: bool,

    /// Plain key=value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

fn parse_layout(s: &str) -> Result<Layout, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_band_arg(s: &str) -> Result<(usize, usize), String> {
    parse_band(s).map_err(|e| e.to_string())
}

fn parse_kernel(s: &str) -> Result<KernelKind, String> {
    match s {
        "bartlett" => Ok(KernelKind::Bartlett),
        "parzen" => Ok(KernelKind::Parzen),
        "truncated-flat" => Ok(KernelKind::TruncatedFlat),
        other => Err(format!("unknown kernel '{other}'")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Test for a single covariance change point
    Detect(SharedOpts),
    /// Locate multiple change points by binary segmentation
    Segment(SharedOpts),
    /// Run a seeded power/size study over a noise and sample-size grid
    Simulate {
        #[command(flatten)]
        shared: SharedOpts,
        /// Built-in variance setting (1, 2 or 3)
        #[arg(long, default_value_t = 1)]
        setting: u8,
        /// Comma-separated noise levels sigma^2
        #[arg(long, default_value = "0,3,6,9")]
        sigma_sq: String,
        /// Comma-separated per-group sample sizes
        #[arg(long, default_value = "150,300")]
        n_per_group: String,
        /// Replicates per configuration
        #[arg(long, default_value_t = 100)]
        reps: usize,
        /// Write every simulated panel as a coefficients CSV under out/panels
        #[arg(long)]
        emit_panels: bool,
    },
    /// Critical values of the null law for a given eigenvalue file
    NullQuantile {
        #[command(flatten)]
        shared: SharedOpts,
        /// File of whitespace-separated eigenvalues
        #[arg(long)]
        rho: PathBuf,
        /// Comma-separated significance levels
        #[arg(long, default_value = "0.05")]
        alphas: String,
    },
}

/// Merge defaults, COVCPD_SEED, the config file, and explicit flags.
fn resolve(shared: &SharedOpts) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::default();
    if let Ok(value) = std::env::var("COVCPD_SEED") {
        cfg.seed = value
            .parse()
            .map_err(|_| Error::invalid(format!("COVCPD_SEED '{value}' is not an integer")))?;
    }
    if let Some(path) = &shared.config {
        apply_config_file(&mut cfg, path)?;
    }
    if let Some(v) = &shared.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = shared.layout {
        cfg.layout = v;
    }
    if let Some(v) = shared.band {
        cfg.band = Some(v);
    }
    if shared.has_header {
        cfg.has_header = true;
    }
    if let Some(v) = shared.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = shared.kernel {
        cfg.kernel = v;
    }
    if let Some(v) = shared.bandwidth {
        cfg.bandwidth = Some(v);
    }
    if shared.iid {
        cfg.iid = true;
    }
    if let Some(v) = shared.mc_reps {
        cfg.mc_reps = v;
    }
    if let Some(v) = shared.grid_r {
        cfg.grid_r = v;
    }
    if let Some(v) = shared.seed {
        cfg.seed = v;
    }
    if shared.rescale {
        cfg.rescale = true;
    }
    if shared.demean {
        cfg.demean = true;
    }
    if let Some(v) = shared.min_segment {
        cfg.min_segment = v;
    }
    if let Some(v) = &shared.out {
        cfg.out = Some(v.clone());
    }
    if shared.emit_plot_data {
        cfg.emit_plot_data = true;
    }
    Ok(cfg)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Error> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<T>()
                .map_err(|_| Error::invalid(format!("bad {what} entry '{tok}'")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<serde_json::Value, Error> {
    match &cli.command {
        Command::Detect(shared) => run_detect(&resolve(shared)?),
        Command::Segment(shared) => run_segment(&resolve(shared)?),
        Command::Simulate {
            shared,
            setting,
            sigma_sq,
            n_per_group,
            reps,
            emit_panels,
        } => {
            let cfg = resolve(shared)?;
            let args = SimulateArgs {
                setting: *setting,
                sigma_grid: parse_list(sigma_sq, "sigma-sq")?,
                n_grid: parse_list(n_per_group, "n-per-group")?,
                reps: *reps,
                emit_panels: *emit_panels,
            };
            run_simulate(&cfg, &args)
        }
        Command::NullQuantile { shared, rho, alphas } => {
            let cfg = resolve(shared)?;
            let rho = covcpd::cli::read_rho_file(rho)?;
            let alphas: Vec<f64> = parse_list(alphas, "alpha")?;
            run_null_quantile(&cfg, &rho, &alphas)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(doc) => {
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
