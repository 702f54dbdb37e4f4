//! Differentiable kNN: learn an embedding whose neighbours share labels.
//!
//! For a query `x` and candidates `x_1..x_n` drawn from the training split,
//! scores are negative squared embedding distances `s_j = -‖h(x) - h(x_j)‖²`.
//! The relaxed sort of `s` ranks the candidates and the kNN loss rewards
//! label mass in its top `k` rows. At evaluation the whole training split is
//! the candidate set and a hard majority vote decides.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use serde::Serialize;

use super::data::PointDataset;
use super::metrics::{EpochRecord, MetricsRecord};
use super::model::EmbeddingModel;
use super::optim::Sgd;
use super::{
    batch_mean, check_common, check_finite, init_rng, mean_of, shuffled, sort_matrices, Mode,
    TrainOutcome,
};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::losses::knn_loss_var;
use crate::relaxation::Temperature;
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnConfig {
    /// Candidates per query during training.
    pub n_candidates: usize,
    pub k: usize,
    pub hidden: usize,
    pub embed_dim: usize,
    pub mode: Mode,
    pub tau: f64,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            n_candidates: 20,
            k: 5,
            hidden: 32,
            embed_dim: 4,
            mode: Mode::Deterministic,
            tau: 1.0,
            epochs: 40,
            lr: 0.01,
            momentum: 0.9,
            batch_size: 20,
            n_samples: 5,
            seed: 0,
        }
    }
}

const CANDIDATE_TAG: u64 = 201;

/// Hard kNN classification accuracy of `queries` against `reference`.
///
/// Neighbours are ordered by squared Euclidean distance, ties by index. The
/// vote goes to the most frequent label among the `k` nearest; a tied vote
/// goes to whichever tied label appears first in distance order.
pub fn knn_accuracy(
    reference: ArrayView2<f64>,
    reference_labels: &[usize],
    queries: ArrayView2<f64>,
    query_labels: &[usize],
    k: usize,
) -> Result<f64> {
    let m = reference.nrows();
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={m}"
        )));
    }
    if reference.ncols() != queries.ncols() {
        return Err(Error::Shape {
            op: "knn_accuracy",
            lhs: reference.dim(),
            rhs: queries.dim(),
        });
    }
    let n_labels = reference_labels.iter().max().map_or(0, |&l| l + 1);
    let mut correct = 0usize;
    for (q, &truth) in queries.rows().into_iter().zip(query_labels) {
        let dist: Vec<f64> = reference
            .rows()
            .into_iter()
            .map(|r| (&r - &q).mapv(|v| v * v).sum())
            .collect();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]));
        let mut votes = vec![0usize; n_labels];
        for &i in &order[..k] {
            votes[reference_labels[i]] += 1;
        }
        let best = *votes.iter().max().unwrap();
        let winner = order[..k]
            .iter()
            .map(|&i| reference_labels[i])
            .find(|&l| votes[l] == best)
            .unwrap();
        correct += usize::from(winner == truth);
    }
    Ok(correct as f64 / query_labels.len() as f64)
}

fn embedded_accuracy(
    model: &EmbeddingModel,
    train: &PointDataset,
    eval: &PointDataset,
    k: usize,
) -> Result<f64> {
    let reference = model.embed(&train.features);
    let queries = model.embed(&eval.features);
    knn_accuracy(
        reference.view(),
        &train.labels,
        queries.view(),
        &eval.labels,
        k,
    )
}

/// Candidate indices for one query: `n` distinct training points, never the query itself.
fn candidates(train_len: usize, query: usize, n: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = stream_rng(derive_seed(seed, CANDIDATE_TAG), stream);
    sample(&mut rng, train_len, n + 1)
        .into_iter()
        .filter(|&i| i != query)
        .take(n)
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn query_loss_grad(
    model: &EmbeddingModel,
    train: &PointDataset,
    query: usize,
    cand: &[usize],
    cfg: &KnnConfig,
    tau: Temperature,
    noise_seed: u64,
    stream: u64,
) -> Result<(f64, Vec<Array2<f64>>)> {
    let n = cand.len();
    let tape = Tape::new();
    let h = model.mlp.on_tape(&tape);
    let eq = h.forward(tape.constant(train.rows(&[query])))?;
    let ec = h.forward(tape.constant(train.rows(cand)))?;
    let dim = ec.shape().1;
    let s = ec.sub(eq.broadcast(n, dim)?)?.square().sum_rows().neg();
    let labels: Vec<usize> = cand.iter().map(|&i| train.labels[i]).collect();
    let y = train.labels[query];
    let losses = sort_matrices(s, cfg.mode, tau, cfg.n_samples, noise_seed, stream)?
        .into_iter()
        .map(|p| knn_loss_var(p, y, &labels, cfg.k))
        .collect::<Result<Vec<_>>>()?;
    let loss = mean_of(losses)?;
    let grads = h.grads(&loss.backward()?);
    Ok((loss.scalar_value(), grads))
}

pub fn train_knn(
    train: &PointDataset,
    valid: &PointDataset,
    test: &PointDataset,
    cfg: &KnnConfig,
) -> Result<TrainOutcome<EmbeddingModel>> {
    check_common(cfg.epochs, cfg.lr, cfg.batch_size, cfg.n_samples)?;
    if cfg.n_candidates == 0 || cfg.n_candidates >= train.len() {
        return Err(Error::InvalidArgument(format!(
            "n_candidates = {} must lie in 1..{}",
            cfg.n_candidates,
            train.len()
        )));
    }
    if cfg.k == 0 || cfg.k > cfg.n_candidates {
        return Err(Error::InvalidArgument(format!(
            "k = {} must lie in 1..={}",
            cfg.k, cfg.n_candidates
        )));
    }
    let tau = Temperature::new(cfg.tau)?;
    let mut model = EmbeddingModel::new(
        train.dim(),
        cfg.hidden,
        cfg.embed_dim,
        &mut init_rng(cfg.seed, 0),
    );
    let mut opt = Sgd::new(cfg.lr, cfg.momentum);
    let noise_seed = derive_seed(cfg.seed, 1);
    let cand_seed = derive_seed(cfg.seed, 2);
    let queries: Vec<usize> = (0..train.len()).collect();

    let initial_seed = derive_seed(cfg.seed, 3);
    let (initial, _) = batch_mean(&queries, |i, &q| {
        let cand = candidates(train.len(), q, cfg.n_candidates, initial_seed, i as u64);
        query_loss_grad(&model, train, q, &cand, cfg, tau, initial_seed, i as u64)
    })?;
    check_finite(initial, 0, 0)?;
    let mut curve = vec![EpochRecord {
        epoch: 0,
        train_loss: initial,
        valid_metric: embedded_accuracy(&model, train, valid, cfg.k)?,
    }];

    for epoch in 1..=cfg.epochs {
        let order = shuffled(train.len(), cfg.seed, epoch);
        let mut total = 0.0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let base = ((epoch - 1) * train.len() + step * cfg.batch_size) as u64;
            let (loss, grads) = batch_mean(chunk, |i, &q| {
                let stream = base + i as u64;
                let cand = candidates(train.len(), q, cfg.n_candidates, cand_seed, stream);
                query_loss_grad(&model, train, q, &cand, cfg, tau, noise_seed, stream)
            })?;
            check_finite(loss, epoch, step)?;
            total += loss * chunk.len() as f64;
            opt.step(model.mlp.tensors_mut().into_iter().collect(), &grads);
        }
        curve.push(EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            valid_metric: embedded_accuracy(&model, train, valid, cfg.k)?,
        });
    }

    let metrics = MetricsRecord {
        knn_accuracy: Some(embedded_accuracy(&model, train, test, cfg.k)?),
        ..Default::default()
    };
    Ok(TrainOutcome {
        metrics,
        curve,
        model,
    })
}

/// Hard kNN accuracy on the raw features, the baseline for [`train_knn`].
pub fn raw_knn_accuracy(train: &PointDataset, eval: &PointDataset, k: usize) -> Result<f64> {
    knn_accuracy(
        train.features.view(),
        &train.labels,
        eval.features.view(),
        &eval.labels,
        k,
    )
}
