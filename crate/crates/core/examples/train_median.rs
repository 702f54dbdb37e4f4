//! Median regression: select the soft median through the relaxed sort,
//! regress its value, and evaluate with the hard selection.

use unisort::tasks::{train_median, MedianConfig, SequenceSplits};

fn main() -> unisort::Result<()> {
    let data = SequenceSplits::generate(5, 4, 0.0, (2000, 200, 1000), 0)?;
    let out = train_median(&data, &MedianConfig::default())?;
    for r in out.curve.iter().step_by(5) {
        println!(
            "epoch {:>2}  loss {:.4}  valid R² {:.4}",
            r.epoch, r.train_loss, r.valid_metric
        );
    }
    println!(
        "test MSE {:.5}, R² {:.5}",
        out.metrics.mse.unwrap_or(f64::NAN),
        out.metrics.r2.unwrap_or(f64::NAN)
    );
    Ok(())
}
