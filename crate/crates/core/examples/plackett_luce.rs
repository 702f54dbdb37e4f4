//! Plackett-Luce pmf, Gumbel sampling and relaxed samples.

use unisort::pl::{pl_log_pmf, pl_sample_hard, pl_sample_relaxed, PLParams};
use unisort::relaxation::{Permutation, Temperature};
use unisort::validate::{empirical_frequencies, total_variation};

fn main() -> unisort::Result<()> {
    let params = PLParams::new(vec![3.0, 2.0, 1.0])?;
    let all = Permutation::all(3);
    let exact: Vec<f64> = all
        .iter()
        .map(|z| pl_log_pmf(&params, z).map(f64::exp))
        .collect::<Result<_, _>>()?;
    let freq = empirical_frequencies(&params, 100_000, 7);

    println!("permutation   exact     sampled");
    for ((z, p), f) in all.iter().zip(&exact).zip(&freq) {
        println!("{:<13} {p:.5}   {f:.5}", format!("{:?}", z.as_slice()));
    }
    println!("sum of pmf {:.15}", exact.iter().sum::<f64>());
    println!("total variation {:.5}", total_variation(&exact, &freq));

    // The same noise drives the hard and the relaxed sample.
    let seed = 42;
    let hard = pl_sample_hard(&params, seed);
    println!("\nhard sample {:?}", hard.as_slice());
    for tau in [0.1, 1.0, 10.0] {
        let relaxed = pl_sample_relaxed(&params, Temperature::new(tau)?, seed);
        println!(
            "tau {tau:>4}: row 1 = {:.4}, projection {:?}",
            relaxed.entries().row(0),
            relaxed.project_hard().as_slice()
        );
    }
    Ok(())
}
