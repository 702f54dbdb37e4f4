//! Median regression through the relaxed sort.
//!
//! Row `⌊(n + 1)/2⌋` of the relaxed sort matrix is a soft selector of the
//! median item. Its product with the feature matrix feeds a regressor whose
//! output is compared to the true median value; score model and regressor
//! train jointly from that single scalar per sequence.

use ndarray::{Array2, Axis};
use serde::Serialize;

use super::data::{Sequence, SequenceSplits, SyntheticSequenceDataset};
use super::metrics::{mean_squared_error, r_squared, EpochRecord, MetricsRecord};
use super::model::{OutputInit, RegressorModel, ScoreModel};
use super::optim::Sgd;
use super::{
    batch_mean, check_common, check_finite, init_rng, mean_of, shuffled, sort_matrices, Mode,
    TrainOutcome,
};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::losses::mse_var;
use crate::relaxation::{relaxed_sort, ScoreVector, Temperature};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianConfig {
    pub hidden: usize,
    pub mode: Mode,
    pub tau: f64,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for MedianConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            mode: Mode::Deterministic,
            tau: 1.0,
            epochs: 30,
            lr: 0.001,
            momentum: 0.9,
            batch_size: 20,
            n_samples: 5,
            seed: 0,
        }
    }
}

/// Score model and regressor trained together.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianModel {
    pub scorer: ScoreModel,
    pub regressor: RegressorModel,
}

impl MedianModel {
    fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let [a, b, c, d] = self.scorer.mlp.tensors_mut();
        let [e, f, g, h] = self.regressor.mlp.tensors_mut();
        vec![a, b, c, d, e, f, g, h]
    }

    /// Prediction from the hard median selection.
    pub fn predict(&self, seq: &Sequence, tau: Temperature) -> Result<f64> {
        let s = ScoreVector::new(self.scorer.scores(&seq.features))?;
        let z = relaxed_sort(&s, tau).project_hard();
        let median_item = z.as_slice()[median_row(z.len())] - 1;
        let x = seq.features.select(Axis(0), &[median_item]);
        Ok(self.regressor.mlp.predict(&x)[[0, 0]])
    }
}

/// Zero-based row of the median rank.
fn median_row(n: usize) -> usize {
    n.div_ceil(2) - 1
}

fn sequence_loss_grad(
    model: &MedianModel,
    seq: &Sequence,
    mode: Mode,
    tau: Temperature,
    n_samples: usize,
    noise_seed: u64,
    stream: u64,
) -> Result<(f64, Vec<Array2<f64>>)> {
    let tape = Tape::new();
    let scorer = model.scorer.mlp.on_tape(&tape);
    let regressor = model.regressor.mlp.on_tape(&tape);
    let x = tape.constant(seq.features.clone());
    let s = scorer.forward(x)?;
    let row = median_row(seq.values.len());
    let y = seq.median();
    let losses = sort_matrices(s, mode, tau, n_samples, noise_seed, stream)?
        .into_iter()
        .map(|p| {
            let selected = p.select_row(row)?.matmul(x)?;
            mse_var(y, regressor.forward(selected)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let loss = mean_of(losses)?;
    let g = loss.backward()?;
    let mut grads = scorer.grads(&g);
    grads.extend(regressor.grads(&g));
    Ok((loss.scalar_value(), grads))
}

/// Test-style metrics: MSE and R² of hard-selection predictions.
pub fn evaluate_median(
    model: &MedianModel,
    ds: &SyntheticSequenceDataset,
    tau: Temperature,
) -> Result<MetricsRecord> {
    let y: Vec<f64> = ds.sequences.iter().map(Sequence::median).collect();
    let y_hat = ds
        .sequences
        .iter()
        .map(|s| model.predict(s, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsRecord {
        mse: Some(mean_squared_error(&y, &y_hat)),
        r2: Some(r_squared(&y, &y_hat)),
        ..Default::default()
    })
}

pub fn train_median(
    data: &SequenceSplits,
    cfg: &MedianConfig,
) -> Result<TrainOutcome<MedianModel>> {
    check_common(cfg.epochs, cfg.lr, cfg.batch_size, cfg.n_samples)?;
    if data.train.n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "median task needs odd n, got {}",
            data.train.n
        )));
    }
    let tau = Temperature::new(cfg.tau)?;
    let d = data.train.d;
    let mut model = MedianModel {
        scorer: ScoreModel::new(
            d,
            cfg.hidden,
            OutputInit::Random,
            &mut init_rng(cfg.seed, 0),
        ),
        regressor: RegressorModel::new(d, cfg.hidden, &mut init_rng(cfg.seed, 1)),
    };
    let train = &data.train.sequences;
    let mut opt = Sgd::new(cfg.lr, cfg.momentum);
    let noise_seed = derive_seed(cfg.seed, 1);
    let valid_metric = |m: &MedianModel| -> Result<f64> {
        Ok(evaluate_median(m, &data.valid, tau)?.r2.unwrap_or(0.0))
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
            opt.step(model.tensors_mut(), &grads);
        }
        curve.push(EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            valid_metric: valid_metric(&model)?,
        });
    }

    let metrics = evaluate_median(&model, &data.test, tau)?;
    Ok(TrainOutcome {
        metrics,
        curve,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_row_index() {
        assert_eq!(median_row(5), 2);
        assert_eq!(median_row(1), 0);
        assert_eq!(median_row(7), 3);
    }

    #[test]
    fn soft_median_at_small_temperature_is_hard_median() {
        let data = SequenceSplits::generate(5, 1, 0.0, (5, 1, 1), 4).unwrap();
        let tau = Temperature::new(1e-3).unwrap();
        for seq in &data.train.sequences {
            // identity scores on noiseless scalar features
            let s = ScoreVector::new(seq.features.column(0).to_vec()).unwrap();
            let p = relaxed_sort(&s, tau);
            let soft = p.entries().row(2).dot(&seq.features.column(0));
            assert!((soft - seq.median()).abs() < 1e-6);
        }
    }

    #[test]
    fn even_length_is_rejected() {
        let data = SequenceSplits::generate(4, 1, 0.0, (5, 1, 1), 4).unwrap();
        assert!(train_median(&data, &MedianConfig::default()).is_err());
    }
}
