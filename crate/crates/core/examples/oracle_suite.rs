//! The validation suite, once with the library relaxation and once with a
//! softmax that normalizes the wrong axis.

use ndarray::Array2;
use unisort::relaxation::{softmax_rows, sort_logits, ScoreVector, Temperature};
use unisort::validate::{run_suite, unimodality_fuzz, SuiteConfig};

fn column_softmax(s: &ScoreVector, tau: Temperature) -> Array2<f64> {
    softmax_rows(sort_logits(s).t(), tau).reversed_axes()
}

fn main() {
    let report = run_suite(&SuiteConfig::default());
    for r in &report.results {
        println!(
            "{} {:<24} {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }

    let broken = unimodality_fuzz(&SuiteConfig {
        relax: column_softmax,
        ..SuiteConfig::default()
    });
    println!(
        "\nwith a column softmax: passed = {}, {}",
        broken.passed, broken.detail
    );
    if let Some(c) = broken.counterexample {
        println!("counterexample: {c}");
    }
}
