//! File-based workflow: write a sampled-curve CSV, ingest it with a
//! Fourier sub-band projection, and run the detector — the same path the
//! `covcpd detect` subcommand takes.
//!
//! ```bash
//! cargo run --release -p covcpd --example ingest_csv
//! ```

use covcpd::cli::{ingest, Layout};
use covcpd::detector::{detect_and_test, DetectorConfig, NullMcConfig};
use covcpd::fbasis::BasisSpec;
use covcpd::simlab::{builtin_setting, generate_panel};
use std::fmt::Write as _;

fn main() -> covcpd::Result<()> {
    // simulate curves in the 2nd..9th Fourier band, then SAMPLE them on a
    // 400-point grid as a recording device would
    let setting = builtin_setting(2)?.with_n_per_group(100);
    let panel = generate_panel(&setting, 555)?;
    let band = BasisSpec::fourier_band(2, 8)?;
    let grid: Vec<f64> = (0..400).map(|j| j as f64 / 399.0).collect();

    let mut csv = String::new();
    for i in 0..panel.n_curves() {
        for (j, &t) in grid.iter().enumerate() {
            if j > 0 {
                csv.push(',');
            }
            let mut y = 0.0;
            for d in 1..=8 {
                y += panel.coeffs()[(i, d - 1)] * band.eval(d, t)?;
            }
            write!(csv, "{y}").unwrap();
        }
        csv.push('\n');
    }
    let dir = std::env::temp_dir().join("covcpd_example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("epochs.csv");
    std::fs::write(&path, csv)?;
    println!("wrote {} ({} curves on a 400-point grid)", path.display(), panel.n_curves());

    // ingest with the same band: projection recovers the coefficients
    let (recovered, report) = ingest(&path, Layout::Grid, Some((2, 8)), false)?;
    println!(
        "ingested: N = {}, p = {}, grid size = {}",
        report.n_curves, report.p, report.grid_size
    );
    let max_dev = (recovered.coeffs() - panel.coeffs()).abs().max();
    println!("max |recovered - original| coefficient: {max_dev:.2e}");

    let config = DetectorConfig {
        null_mc: NullMcConfig {
            reps: 3000,
            grid_r: 600,
            seed: 9,
        },
        ..Default::default()
    };
    let result = detect_and_test(&recovered, &config)?;
    println!(
        "detect: T = {:.3}, crit = {:.3}, theta_hat = {:.3}, reject = {}",
        result.t_max, result.crit, result.theta_hat, result.reject
    );
    Ok(())
}
