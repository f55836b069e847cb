//! Critical values of the limiting null law for a given eigenvalue vector,
//! and a sanity check of the single-bridge case against the closed-form
//! Kolmogorov distribution.
//!
//! ```bash
//! cargo run --release -p covcpd --example null_quantiles
//! ```

use covcpd::nulldist::{critical_value, p_value, simulate_null};

/// Kolmogorov CDF P(sup |B| <= x) via its alternating series.
fn kolmogorov_cdf(x: f64) -> f64 {
    let mut s = 0.0;
    let mut sign = 1.0;
    for k in 1..200 {
        let term = sign * (-2.0 * (k as f64).powi(2) * x * x).exp();
        s += term;
        sign = -sign;
        if term.abs() < 1e-18 {
            break;
        }
    }
    1.0 - 2.0 * s
}

fn main() -> covcpd::Result<()> {
    // a typical estimated spectrum: fast-decaying eigenvalues
    let rho = [2.1, 1.6, 0.8, 0.35, 0.1, 0.04];
    let dist = simulate_null(&rho, 20000, 1000, 42)?;
    println!("spectrum: {rho:?}");
    for alpha in [0.10, 0.05, 0.01] {
        println!(
            "critical value at alpha = {alpha}: {:.4}",
            critical_value(&dist, alpha)?
        );
    }
    println!("p-value of an observed T = 6.0: {:.4}", p_value(6.0, &dist));

    // single-bridge case: sup B^2 is the square of the Kolmogorov law
    let single = simulate_null(&[1.0], 20000, 1000, 42)?;
    let q95 = critical_value(&single, 0.05)?;
    let mut x = 1.0;
    while kolmogorov_cdf(x) < 0.95 {
        x += 1e-4;
    }
    println!(
        "\nsingle bridge: simulated 95% point {:.4} vs Kolmogorov^2 {:.4}",
        q95,
        x * x
    );
    Ok(())
}
