//! Gradient variance of the stochastic sort objective against temperature.
//!
//! A fixed score model and a fixed batch of sequences are shared by every
//! temperature. Draw `k` perturbs sequence `i` with the same Gumbel stream at
//! every τ, so the curve reflects the temperature and not fresh noise. Each
//! draw yields one full parameter gradient of the batch loss; the reported
//! value is the log of the per-coordinate variance averaged over coordinates.

use rayon::prelude::*;
use serde::Serialize;

use super::data::SequenceSplits;
use super::model::{OutputInit, ScoreModel};
use super::sort::sequence_loss_grad;
use super::{init_rng, Mode};
use crate::error::{Error, Result};
use crate::pl::EstimatorReport;
use crate::relaxation::Temperature;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub n: usize,
    pub d: usize,
    pub noise: f64,
    /// Sequences in the fixed batch.
    pub batch_size: usize,
    pub hidden: usize,
    pub taus: Vec<f64>,
    /// Gradient draws per temperature.
    pub n_samples: usize,
    /// Seeds the data and the model.
    pub seed: u64,
    /// Seeds the Gumbel noise; `None` derives it from `seed`.
    pub noise_seed: Option<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n: 5,
            d: 4,
            noise: 0.05,
            batch_size: 20,
            hidden: 16,
            taus: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            n_samples: 200,
            seed: 0,
            noise_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub tau: f64,
    pub log_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Whether `log_variance` never increases from one τ to the next.
    pub monotone_non_increasing: bool,
    /// Number of adjacent pairs where it does increase.
    pub inversions: usize,
}

impl SweepReport {
    fn from_rows(rows: Vec<SweepRow>) -> Self {
        let inversions = rows
            .windows(2)
            .filter(|w| w[1].log_variance > w[0].log_variance)
            .count();
        Self {
            rows,
            monotone_non_increasing: inversions == 0,
            inversions,
        }
    }
}

const SWEEP_DATA_TAG: u64 = 301;
const SWEEP_NOISE_TAG: u64 = 302;

pub fn variance_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.n_samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "variance needs n_samples ≥ 2, got {}",
            cfg.n_samples
        )));
    }
    if cfg.taus.is_empty() || cfg.batch_size == 0 {
        return Err(Error::InvalidArgument(
            "need at least one temperature and a non-empty batch".into(),
        ));
    }
    let taus = cfg
        .taus
        .iter()
        .map(|&t| Temperature::new(t))
        .collect::<Result<Vec<_>>>()?;
    let data = SequenceSplits::generate(
        cfg.n,
        cfg.d,
        cfg.noise,
        (cfg.batch_size, 1, 1),
        derive_seed(cfg.seed, SWEEP_DATA_TAG),
    )?;
    let batch = &data.train.sequences;
    let model = ScoreModel::new(
        cfg.d,
        cfg.hidden,
        OutputInit::Random,
        &mut init_rng(cfg.seed, 0),
    );
    let noise_seed = cfg
        .noise_seed
        .unwrap_or_else(|| derive_seed(cfg.seed, SWEEP_NOISE_TAG));

    let rows = taus
        .into_iter()
        .map(|tau| {
            let samples: Vec<Vec<f64>> = (0..cfg.n_samples)
                .into_par_iter()
                .map(|k| {
                    let mut total: Option<Vec<f64>> = None;
                    for (i, seq) in batch.iter().enumerate() {
                        let stream = (k * batch.len() + i) as u64;
                        let (_, grads) = sequence_loss_grad(
                            &model,
                            seq,
                            Mode::Stochastic,
                            tau,
                            1,
                            noise_seed,
                            stream,
                        )?;
                        let flat: Vec<f64> = grads.iter().flatten().copied().collect();
                        match &mut total {
                            None => total = Some(flat),
                            Some(t) => t.iter_mut().zip(&flat).for_each(|(a, b)| *a += b),
                        }
                    }
                    let m = batch.len() as f64;
                    Ok(total.unwrap().into_iter().map(|g| g / m).collect())
                })
                .collect::<Result<_>>()?;
            let report = EstimatorReport::from_samples(samples, Vec::new());
            let var = report.variance()?;
            let mean = var.iter().sum::<f64>() / var.len() as f64;
            Ok(SweepRow {
                tau: tau.value(),
                log_variance: mean.ln(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_sample_is_rejected() {
        let cfg = SweepConfig {
            n_samples: 1,
            ..Default::default()
        };
        assert!(variance_sweep(&cfg).is_err());
    }

    #[test]
    fn inversion_count() {
        let rows = [3.0, 2.0, 2.5, 1.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| SweepRow {
                tau: i as f64 + 1.0,
                log_variance: v,
            });
        let r = SweepReport::from_rows(rows.collect());
        assert_eq!(r.inversions, 1);
        assert!(!r.monotone_non_increasing);
    }

    #[test]
    fn small_sweep_decreases() {
        let cfg = SweepConfig {
            batch_size: 4,
            hidden: 8,
            n_samples: 40,
            taus: vec![1.0, 4.0, 16.0],
            ..Default::default()
        };
        let r = variance_sweep(&cfg).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.rows[0].log_variance > r.rows[2].log_variance);
        assert_eq!(r, variance_sweep(&cfg).unwrap());
    }
}
