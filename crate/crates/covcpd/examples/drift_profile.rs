//! The scan statistic against its theoretical drift.
//!
//! Under a break at theta* = 1/2, `T_N(theta)/N` converges pointwise to
//! `||C1 - C2||^2 (theta(1-theta*))^2` left of the break (mirrored right of
//! it). This example overlays the empirical profile of one large panel on
//! that curve.
//!
//! ```bash
//! cargo run --release -p covcpd --example drift_profile
//! ```

use covcpd::covtensor::lift_to_cov;
use covcpd::cusum::cusum_curve;
use covcpd::simlab::{builtin_setting, drift_curve, generate_panel};

fn main() -> covcpd::Result<()> {
    let setting = builtin_setting(1)?.with_n_per_group(2000);
    let n = setting.n_total();
    let panel = generate_panel(&setting, 314)?;
    let seq = lift_to_cov(&panel);
    let curve = cusum_curve(&seq)?;

    let thetas: Vec<f64> = (1..=19).map(|i| i as f64 / 20.0).collect();
    let drift = drift_curve(&setting, &thetas);

    println!("N = {n}, noise sigma^2 = {}\n", setting.sigma_sq_noise);
    println!("theta    T_N/N      drift      ratio");
    for (i, &theta) in thetas.iter().enumerate() {
        let k = (theta * n as f64).round() as usize;
        let empirical = curve.values()[k - 1] / n as f64;
        println!(
            "{theta:>5.2}  {empirical:>9.5}  {:>9.5}  {:>7.3}",
            drift[i],
            empirical / drift[i]
        );
    }
    println!(
        "\npeak of the drift: {:.5} at theta* = 0.5",
        drift[9] // theta = 0.5
    );
    Ok(())
}
