//! Hard and relaxed Plackett-Luce samples from Gumbel-perturbed log-scores.

use super::gumbel::{sample_gumbel, GumbelNoise, GUMBEL_EPS};
use super::PLParams;
use crate::error::{Error, Result};
use crate::relaxation::{
    relaxed_sort, sort_permutation, Permutation, ScoreVector, Temperature, UnimodalMatrix,
};

/// `β·log s_i + β·g_i`, i.e. log-scores plus Gumbel(0, β) noise.
pub fn perturbed_log_scores(params: &PLParams, noise: &GumbelNoise) -> Result<ScoreVector> {
    if noise.g.len() != params.n() {
        return Err(Error::InvalidArgument(format!(
            "{} noise draws for {} scores",
            noise.g.len(),
            params.n()
        )));
    }
    let b = params.beta();
    ScoreVector::new(
        params
            .scores()
            .iter()
            .zip(&noise.g)
            .map(|(s, g)| b * s.ln() + b * g)
            .collect(),
    )
}

pub fn pl_sample_hard_with(params: &PLParams, noise: &GumbelNoise) -> Result<Permutation> {
    Ok(sort_permutation(&perturbed_log_scores(params, noise)?))
}

/// One exact draw `z ~ q(· | s)`.
pub fn pl_sample_hard(params: &PLParams, seed: u64) -> Permutation {
    let noise = sample_gumbel(params.n(), seed, GUMBEL_EPS);
    pl_sample_hard_with(params, &noise).expect("noise length matches")
}

pub fn pl_sample_relaxed_with(
    params: &PLParams,
    tau: Temperature,
    noise: &GumbelNoise,
) -> Result<UnimodalMatrix> {
    Ok(relaxed_sort(&perturbed_log_scores(params, noise)?, tau))
}

/// Relaxed sample `P̂_sort(β·log s + g)(τ)`; projects to [`pl_sample_hard`]
/// under the same seed.
pub fn pl_sample_relaxed(params: &PLParams, tau: Temperature, seed: u64) -> UnimodalMatrix {
    let noise = sample_gumbel(params.n(), seed, GUMBEL_EPS);
    pl_sample_relaxed_with(params, tau, &noise).expect("noise length matches")
}
