//! Desk-scale training tasks on synthetic data.
//!
//! * [`train_sort`]: learn item scores from features so that the predicted
//!   permutation of a sequence matches the order of hidden values, with
//!   supervision on the permutation only.
//! * [`train_median`]: select the median item through the relaxed sort and
//!   regress its value, supervised by the median value alone.
//! * [`train_knn`]: learn an embedding through a differentiable kNN loss.
//! * [`variance_sweep`]: spread of stochastic gradients against temperature.
//!
//! Each mode picks how the loss sees the sort: the deterministic relaxation
//! of the scores, relaxed Plackett-Luce samples around them (scores act as
//! log-scores, `β = 1`), or straight-through samples. Evaluation always uses
//! hard permutations.

mod data;
mod knn;
mod median;
mod metrics;
mod model;
mod optim;
mod sort;
mod sweep;

pub use data::{
    generate_blobs, generate_rings, generate_sequences, PointDataset, RingsSpec, Sequence,
    SequenceSplits, Split, SyntheticSequenceDataset, MAX_REDRAWS,
};
pub use knn::{knn_accuracy, raw_knn_accuracy, train_knn, KnnConfig};
pub use median::{evaluate_median, train_median, MedianConfig, MedianModel};
pub use metrics::{
    mean_squared_error, permutation_accuracy, r_squared, EpochRecord, MetricsRecord,
};
pub use model::{EmbeddingModel, Mlp, MlpVars, OutputInit, RegressorModel, ScoreModel};
pub use optim::Sgd;
pub use sort::{evaluate_sort, train_sort, SortConfig};
pub use sweep::{variance_sweep, SweepConfig, SweepReport, SweepRow};

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::autodiff::{relaxed_sort_var, Var};
use crate::error::{Error, Result};
use crate::pl::{gumbel_from_uniform, GUMBEL_EPS};
use crate::relaxation::{tie_aware_argmax, Permutation, Temperature};
use crate::rng::{derive_seed, stream_rng};

/// How the training objective consumes the sort.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Deterministic,
    Stochastic,
    StraightThrough,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Deterministic => "det",
            Mode::Stochastic => "stoch",
            Mode::StraightThrough => "st",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" | "deterministic" => Ok(Mode::Deterministic),
            "stoch" | "stochastic" => Ok(Mode::Stochastic),
            "st" | "straight-through" | "straight_through" => Ok(Mode::StraightThrough),
            other => Err(Error::InvalidArgument(format!(
                "unknown mode {other:?}; expected det, stoch or st"
            ))),
        }
    }
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    /// Test-split metrics of the final model.
    pub metrics: MetricsRecord,
    /// Epoch 0 (before any update) through the last epoch.
    pub curve: Vec<EpochRecord>,
    pub model: M,
}

const NOISE_TAG: u64 = 101;
const SHUFFLE_TAG: u64 = 102;
const INIT_TAG: u64 = 103;

/// The relaxed matrices a loss is averaged over, for a column of scores.
///
/// Stochastic and straight-through modes draw `n_samples` Gumbel vectors from
/// stream `stream` of the run's noise seed.
pub(crate) fn sort_matrices<'t>(
    s: Var<'t>,
    mode: Mode,
    tau: Temperature,
    n_samples: usize,
    seed: u64,
    stream: u64,
) -> Result<Vec<Var<'t>>> {
    if mode == Mode::Deterministic {
        return Ok(vec![relaxed_sort_var(s, tau)?]);
    }
    let n = s.shape().0;
    let mut rng = stream_rng(derive_seed(seed, NOISE_TAG), stream);
    (0..n_samples)
        .map(|_| {
            let g = Array2::from_shape_simple_fn((n, 1), || {
                gumbel_from_uniform(rand::Rng::random::<f64>(&mut rng), GUMBEL_EPS)
            });
            let relaxed = relaxed_sort_var(s.add_const(g)?, tau)?;
            if mode == Mode::StraightThrough {
                let hard = Permutation::new(tie_aware_argmax(relaxed.value().view()))?.to_matrix();
                relaxed.straight_through(hard.into_inner())
            } else {
                Ok(relaxed)
            }
        })
        .collect()
}

/// Mean of scalar nodes.
pub(crate) fn mean_of<'t>(terms: Vec<Var<'t>>) -> Result<Var<'t>> {
    let k = terms.len() as f64;
    let total = terms
        .into_iter()
        .try_fold(None::<Var<'t>>, |acc, t| match acc {
            None => Ok::<_, Error>(Some(t)),
            Some(a) => Ok(Some(a.add(t)?)),
        })?;
    Ok(total.expect("at least one term").scale(1.0 / k))
}

/// Per-item losses and gradients, computed in parallel and reduced in item
/// order. Returns the mean loss and mean gradient.
pub(crate) fn batch_mean<T, F>(items: &[T], per_item: F) -> Result<(f64, Vec<Array2<f64>>)>
where
    T: Sync,
    F: Fn(usize, &T) -> Result<(f64, Vec<Array2<f64>>)> + Sync,
{
    let results: Vec<(f64, Vec<Array2<f64>>)> = items
        .par_iter()
        .enumerate()
        .map(|(i, item)| per_item(i, item))
        .collect::<Result<_>>()?;
    let m = results.len() as f64;
    let mut iter = results.into_iter();
    let (mut loss, mut grads) = iter
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty batch".into()))?;
    for (l, g) in iter {
        loss += l;
        for (acc, x) in grads.iter_mut().zip(&g) {
            *acc += x;
        }
    }
    grads.iter_mut().for_each(|g| *g /= m);
    Ok((loss / m, grads))
}

pub(crate) fn check_finite(loss: f64, epoch: usize, step: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss {
            epoch,
            step,
            value: loss,
        })
    }
}

pub(crate) fn shuffled(len: usize, seed: u64, epoch: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut stream_rng(
        derive_seed(seed, SHUFFLE_TAG),
        epoch as u64,
    ));
    idx
}

pub(crate) fn init_rng(seed: u64, which: u64) -> crate::rng::Rng {
    stream_rng(derive_seed(seed, INIT_TAG), which)
}

pub(crate) fn check_common(
    epochs: usize,
    lr: f64,
    batch_size: usize,
    n_samples: usize,
) -> Result<()> {
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be > 0, got {lr}"
        )));
    }
    if batch_size == 0 || n_samples == 0 {
        return Err(Error::InvalidArgument(
            "batch size and sample count must be ≥ 1".into(),
        ));
    }
    let _ = epochs;
    Ok(())
}
