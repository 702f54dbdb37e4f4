//! Differentiable kNN on concentric rings buried in nuisance dimensions.

use unisort::tasks::{generate_rings, raw_knn_accuracy, train_knn, KnnConfig, RingsSpec};

fn main() -> unisort::Result<()> {
    let spec = RingsSpec::default();
    let train = generate_rings(1000, spec, 1);
    let valid = generate_rings(200, spec, 2);
    let test = generate_rings(1000, spec, 3);
    let cfg = KnnConfig::default();

    println!(
        "raw-feature {}-NN accuracy {:.3}",
        cfg.k,
        raw_knn_accuracy(&train, &test, cfg.k)?
    );
    let out = train_knn(&train, &valid, &test, &cfg)?;
    for r in out.curve.iter().step_by(5) {
        println!(
            "epoch {:>2}  loss {:.4}  valid accuracy {:.3}",
            r.epoch, r.train_loss, r.valid_metric
        );
    }
    println!(
        "learned-embedding accuracy {:.3}",
        out.metrics.knn_accuracy.unwrap_or(0.0)
    );
    Ok(())
}
