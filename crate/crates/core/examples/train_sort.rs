//! Learn to sort sequences whose items are seen only through noisy features.

use unisort::tasks::{train_sort, Mode, SequenceSplits, SortConfig};

fn main() -> unisort::Result<()> {
    let data = SequenceSplits::generate(5, 4, 0.05, (2000, 200, 1000), 0)?;
    for mode in [Mode::Deterministic, Mode::Stochastic] {
        let cfg = SortConfig {
            mode,
            ..SortConfig::default()
        };
        let out = train_sort(&data, &cfg)?;
        println!("mode {mode}");
        for r in out.curve.iter().step_by(5) {
            println!(
                "  epoch {:>2}  loss {:.4}  valid exact {:.3}",
                r.epoch, r.train_loss, r.valid_metric
            );
        }
        println!(
            "  test exact {:.3}, per rank {:.3}",
            out.metrics.exact_perm_accuracy.unwrap_or(0.0),
            out.metrics.element_rank_accuracy.unwrap_or(0.0)
        );
    }
    Ok(())
}
