//! Detect and test a single covariance change point on a simulated panel.
//!
//! ```bash
//! cargo run --release -p covcpd --example detect_break
//! ```

use covcpd::detector::{detect_and_test, DetectorConfig, NullMcConfig};
use covcpd::simlab::{builtin_setting, generate_panel};

fn main() -> covcpd::Result<()> {
    // Two groups of 150 curves; group 2 moves its power from the low to the
    // high half of the 1-4 Hz band. Noise level sigma^2 = 3.
    let setting = builtin_setting(1)?.with_noise(3.0);
    let panel = generate_panel(&setting, 2024)?;
    println!(
        "panel: {} curves x {} coefficients, true break after curve {}",
        panel.n_curves(),
        panel.basis_size(),
        setting.k_star()
    );

    let config = DetectorConfig {
        alpha: 0.05,
        null_mc: NullMcConfig {
            reps: 5000,
            grid_r: 1000,
            seed: 1,
        },
        ..Default::default()
    };
    let result = detect_and_test(&panel, &config)?;

    println!("T_N(theta_hat) = {:.4}", result.t_max);
    println!(
        "candidate: k_hat = {} (theta_hat = {:.4})",
        result.k_hat, result.theta_hat
    );
    println!(
        "critical value at alpha = {}: {:.4}  ->  reject = {}",
        config.alpha, result.crit, result.reject
    );
    println!("p-value = {:.5}", result.p);
    println!(
        "spectrum: {} of {} eigenvalues kept, leading rho = {:.4}",
        result.spectrum.d_kept,
        result.spectrum.rho.len(),
        result.spectrum.rho[0]
    );
    Ok(())
}
