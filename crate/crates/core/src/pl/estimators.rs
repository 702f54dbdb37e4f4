//! Monte Carlo gradient estimators for `∇_s E_{z~q(z|s)}[f(z)]`.
//!
//! Sample `k` draws its Gumbel noise from stream `k` of the seed, and its
//! gradient on a private tape, so estimates are identical for any thread
//! count.

use ndarray::Array2;
use rayon::prelude::*;

use super::gumbel::{sample_gumbel_stream, GumbelNoise, GUMBEL_EPS};
use super::sample::pl_sample_hard_with;
use super::{grad_log_pmf, PLParams};
use crate::autodiff::{relaxed_sort_var, Tape, Var};
use crate::error::{Error, Result};
use crate::relaxation::{tie_aware_argmax, Permutation, Temperature};

/// Per-sample gradients and their mean.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorReport {
    /// Mean of `samples`.
    pub estimate: Vec<f64>,
    pub n_samples: usize,
    /// One gradient per Monte Carlo draw.
    pub samples: Vec<Vec<f64>>,
    /// Objective value of each draw.
    pub values: Vec<f64>,
}

impl EstimatorReport {
    pub fn from_samples(samples: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        let n_samples = samples.len();
        let dim = samples.first().map_or(0, Vec::len);
        let mut estimate = vec![0.0; dim];
        for s in &samples {
            for (e, x) in estimate.iter_mut().zip(s) {
                *e += x;
            }
        }
        estimate.iter_mut().for_each(|e| *e /= n_samples as f64);
        Self {
            estimate,
            n_samples,
            samples,
            values,
        }
    }

    /// Unbiased per-coordinate variance of the per-sample gradients.
    pub fn variance(&self) -> Result<Vec<f64>> {
        if self.n_samples < 2 {
            return Err(Error::InvalidArgument(
                "variance needs at least 2 samples".into(),
            ));
        }
        let m = self.n_samples as f64;
        Ok((0..self.estimate.len())
            .map(|j| {
                let mu = self.estimate[j];
                self.samples
                    .iter()
                    .map(|s| (s[j] - mu).powi(2))
                    .sum::<f64>()
                    / (m - 1.0)
            })
            .collect())
    }

    /// Standard error of each coordinate of `estimate`.
    pub fn standard_errors(&self) -> Result<Vec<f64>> {
        let m = self.n_samples as f64;
        Ok(self
            .variance()?
            .into_iter()
            .map(|v| (v / m).sqrt())
            .collect())
    }
}

/// Pins a closure to the higher-ranked signature the estimators expect,
/// which closure inference does not pick up on its own.
pub fn matrix_objective<F>(f: F) -> F
where
    F: for<'t> Fn(Var<'t>) -> Result<Var<'t>>,
{
    f
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples == 0 {
        Err(Error::InvalidArgument("n_samples must be ≥ 1".into()))
    } else {
        Ok(())
    }
}

fn noise_for(params: &PLParams, seed: u64, k: usize) -> GumbelNoise {
    sample_gumbel_stream(params.n(), seed, k as u64, GUMBEL_EPS)
}

/// Score-function estimator: mean of `f(z)·∇_s log q(z|s)` over exact draws.
///
/// Only the score term is estimated; `f` must not depend on `s` directly.
pub fn reinforce_gradient<F>(
    params: &PLParams,
    f: F,
    n_samples: usize,
    seed: u64,
) -> Result<EstimatorReport>
where
    F: Fn(&Permutation) -> f64 + Sync,
{
    check_samples(n_samples)?;
    let per_sample: Vec<(Vec<f64>, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let z = pl_sample_hard_with(params, &noise_for(params, seed, k))?;
            let value = f(&z);
            let score = grad_log_pmf(params, &z)?;
            Ok((score.into_iter().map(|g| value * g).collect(), value))
        })
        .collect::<Result<_>>()?;
    let (samples, values) = per_sample.into_iter().unzip();
    Ok(EstimatorReport::from_samples(samples, values))
}

/// Perturbed log-scores `β·log s + β·g` on a tape, from a leaf column `s`.
fn perturbed_on_tape<'t>(s: Var<'t>, params: &PLParams, noise: &GumbelNoise) -> Result<Var<'t>> {
    let b = params.beta();
    let g =
        Array2::from_shape_vec((params.n(), 1), noise.g.iter().map(|x| b * x).collect()).unwrap();
    s.log()?.scale(b).add_const(g)
}

fn column_to_vec(a: Array2<f64>) -> Vec<f64> {
    a.into_iter().collect()
}

/// Reparameterized estimator of `∇_s E_g[f(P̂_sort(β·log s + g)(τ))]`.
///
/// `f` maps the relaxed `n×n` sample, recorded on the tape, to a `1×1`
/// node.
pub fn reparam_gradient<F>(
    params: &PLParams,
    f: F,
    tau: Temperature,
    n_samples: usize,
    seed: u64,
) -> Result<EstimatorReport>
where
    F: for<'t> Fn(Var<'t>) -> Result<Var<'t>> + Sync,
{
    check_samples(n_samples)?;
    let per_sample: Vec<(Vec<f64>, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let noise = noise_for(params, seed, k);
            let tape = Tape::new();
            let s = tape.column(params.scores());
            let relaxed = relaxed_sort_var(perturbed_on_tape(s, params, &noise)?, tau)?;
            let out = f(relaxed)?;
            let grads = out.backward()?;
            Ok((column_to_vec(grads.wrt(s)), out.scalar_value()))
        })
        .collect::<Result<_>>()?;
    let (samples, values) = per_sample.into_iter().unzip();
    Ok(EstimatorReport::from_samples(samples, values))
}

/// Straight-through estimator: `f` is evaluated on the hard permutation
/// matrix of each draw, while the backward pass runs through the relaxed
/// sample as if it had produced that value.
pub fn straight_through_gradient<F>(
    params: &PLParams,
    f: F,
    tau: Temperature,
    n_samples: usize,
    seed: u64,
) -> Result<EstimatorReport>
where
    F: for<'t> Fn(Var<'t>) -> Result<Var<'t>> + Sync,
{
    check_samples(n_samples)?;
    let per_sample: Vec<(Vec<f64>, f64)> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let noise = noise_for(params, seed, k);
            let tape = Tape::new();
            let s = tape.column(params.scores());
            let relaxed = relaxed_sort_var(perturbed_on_tape(s, params, &noise)?, tau)?;
            let hard = Permutation::new(tie_aware_argmax(relaxed.value().view()))?.to_matrix();
            let out = f(relaxed.straight_through(hard.into_inner())?)?;
            let grads = out.backward()?;
            Ok((column_to_vec(grads.wrt(s)), out.scalar_value()))
        })
        .collect::<Result<_>>()?;
    let (samples, values) = per_sample.into_iter().unzip();
    Ok(EstimatorReport::from_samples(samples, values))
}
