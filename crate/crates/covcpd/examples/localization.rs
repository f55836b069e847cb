//! Localization error of the change-point candidate across sample sizes.
//!
//! The signed error `k_hat - k*` stays bounded as N grows (its IQR does not
//! widen), so the scaled candidate `k_hat / N` collapses onto the true
//! break fraction.
//!
//! ```bash
//! cargo run --release -p covcpd --example localization
//! ```

use covcpd::simlab::{builtin_setting, localization_study};

fn main() -> covcpd::Result<()> {
    let setting = builtin_setting(1)?;
    let rows = localization_study(&setting, &[150, 300, 600], 200, 77)?;

    println!("setting 1, sigma^2 = 0, 200 replicates per N\n");
    println!("     N   k*     median   IQR   scaled IQR");
    for row in &rows {
        println!(
            "{:>6}  {:>4}  {:>7.1}  {:>5.1}  {:>10.5}",
            row.n_total,
            row.k_star,
            row.median,
            row.iqr,
            row.iqr / row.n_total as f64
        );
    }

    let noisy = builtin_setting(1)?.with_noise(6.0);
    let rows = localization_study(&noisy, &[150, 300, 600], 200, 77)?;
    println!("\nsame, at noise sigma^2 = 6\n");
    println!("     N   k*     median   IQR   scaled IQR");
    for row in &rows {
        println!(
            "{:>6}  {:>4}  {:>7.1}  {:>5.1}  {:>10.5}",
            row.n_total,
            row.k_star,
            row.median,
            row.iqr,
            row.iqr / row.n_total as f64
        );
    }
    Ok(())
}
