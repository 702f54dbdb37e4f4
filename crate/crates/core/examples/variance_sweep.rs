//! Spread of stochastic sort gradients as the temperature grows.

use unisort::tasks::{variance_sweep, SweepConfig};

fn main() -> unisort::Result<()> {
    let report = variance_sweep(&SweepConfig::default())?;
    println!("tau    log variance");
    for r in &report.rows {
        println!("{:<6} {:.4}", r.tau, r.log_variance);
    }
    println!(
        "non-increasing: {} ({} inversions)",
        report.monotone_non_increasing, report.inversions
    );
    Ok(())
}
