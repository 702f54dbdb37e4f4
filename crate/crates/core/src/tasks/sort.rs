//! Learning to sort from permutation supervision.
//!
//! The score model maps each item's features to a score; the loss is the
//! row cross-entropy between the true permutation matrix and the relaxed
//! sort of the scores (or of Gumbel-perturbed scores in the stochastic
//! modes, averaged over samples).

use ndarray::Array2;
use serde::Serialize;

use super::data::{Sequence, SequenceSplits, SyntheticSequenceDataset};
use super::metrics::{permutation_accuracy, EpochRecord, MetricsRecord};
use super::model::{OutputInit, ScoreModel};
use super::optim::Sgd;
use super::{
    batch_mean, check_common, check_finite, init_rng, mean_of, shuffled, sort_matrices, Mode,
    TrainOutcome,
};
use crate::autodiff::Tape;
use crate::error::Result;
use crate::losses::cross_entropy_rows_var;
use crate::relaxation::{relaxed_sort, ScoreVector, Temperature};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SortConfig {
    pub hidden: usize,
    pub mode: Mode,
    pub tau: f64,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Gumbel samples per sequence and step in the stochastic modes.
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for SortConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            mode: Mode::Deterministic,
            tau: 1.0,
            epochs: 30,
            lr: 0.05,
            momentum: 0.0,
            batch_size: 20,
            n_samples: 5,
            seed: 0,
        }
    }
}

pub(crate) fn sequence_loss_grad(
    model: &ScoreModel,
    seq: &Sequence,
    mode: Mode,
    tau: Temperature,
    n_samples: usize,
    noise_seed: u64,
    stream: u64,
) -> Result<(f64, Vec<Array2<f64>>)> {
    let tape = Tape::new();
    let vars = model.mlp.on_tape(&tape);
    let s = vars.forward(tape.constant(seq.features.clone()))?;
    let truth = seq.true_permutation().to_matrix();
    let losses = sort_matrices(s, mode, tau, n_samples, noise_seed, stream)?
        .into_iter()
        .map(|p| cross_entropy_rows_var(&truth, p))
        .collect::<Result<Vec<_>>>()?;
    let loss = mean_of(losses)?;
    let grads = vars.grads(&loss.backward()?);
    Ok((loss.scalar_value(), grads))
}

/// Hard-projected predictions on `ds`: exact and per-rank accuracy.
pub fn evaluate_sort(
    model: &ScoreModel,
    ds: &SyntheticSequenceDataset,
    tau: Temperature,
) -> Result<MetricsRecord> {
    let mut pred = Vec::with_capacity(ds.len());
    let mut truth = Vec::with_capacity(ds.len());
    for seq in &ds.sequences {
        let s = ScoreVector::new(model.scores(&seq.features))?;
        pred.push(relaxed_sort(&s, tau).project_hard());
        truth.push(seq.true_permutation());
    }
    let (exact, elem) = permutation_accuracy(&pred, &truth);
    Ok(MetricsRecord {
        exact_perm_accuracy: Some(exact),
        element_rank_accuracy: Some(elem),
        ..Default::default()
    })
}

pub fn train_sort(data: &SequenceSplits, cfg: &SortConfig) -> Result<TrainOutcome<ScoreModel>> {
    check_common(cfg.epochs, cfg.lr, cfg.batch_size, cfg.n_samples)?;
    let tau = Temperature::new(cfg.tau)?;
    let train = &data.train.sequences;
    let mut model = ScoreModel::new(
        data.train.d,
        cfg.hidden,
        OutputInit::Zero,
        &mut init_rng(cfg.seed, 0),
    );
    let mut opt = Sgd::new(cfg.lr, cfg.momentum);
    let noise_seed = derive_seed(cfg.seed, 1);
    let valid_metric = |m: &ScoreModel| -> Result<f64> {
        Ok(evaluate_sort(m, &data.valid, tau)?
            .exact_perm_accuracy
            .unwrap_or(0.0))
    };

    let (initial, _) = batch_mean(train, |i, seq| {
        sequence_loss_grad(
            &model,
            seq,
            cfg.mode,
            tau,
            cfg.n_samples,
            derive_seed(cfg.seed, 2),
            i as u64,
        )
    })?;
    check_finite(initial, 0, 0)?;
    let mut curve = vec![EpochRecord {
        epoch: 0,
        train_loss: initial,
        valid_metric: valid_metric(&model)?,
    }];

    for epoch in 1..=cfg.epochs {
        let order = shuffled(train.len(), cfg.seed, epoch);
        let mut total = 0.0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Sequence> = chunk.iter().map(|&i| &train[i]).collect();
            let base = ((epoch - 1) * train.len() + step * cfg.batch_size) as u64;
            let (loss, grads) = batch_mean(&batch, |i, seq| {
                sequence_loss_grad(
                    &model,
                    seq,
                    cfg.mode,
                    tau,
                    cfg.n_samples,
                    noise_seed,
                    base + i as u64,
                )
            })?;
            check_finite(loss, epoch, step)?;
            total += loss * batch.len() as f64;
            opt.step(model.mlp.tensors_mut().into_iter().collect(), &grads);
        }
        curve.push(EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            valid_metric: valid_metric(&model)?,
        });
    }

    let metrics = evaluate_sort(&model, &data.test, tau)?;
    Ok(TrainOutcome {
        metrics,
        curve,
        model,
    })
}
