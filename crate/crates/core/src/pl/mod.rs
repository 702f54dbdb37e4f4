//! The Plackett-Luce family over permutations.
//!
//! With positive scores `s` and `Z = Σ s_i`,
//!
//! ```text
//! q(z | s) = Π_i  s_{z_i} / (Z - Σ_{k<i} s_{z_k})
//! ```
//!
//! Sorting Gumbel-perturbed log-scores `β·log s + g`, `g_i ~ Gumbel(0, β)`,
//! draws exactly from `q`. Applying the relaxed sort to the same perturbed
//! scores gives a reparameterized relaxed sample, which is what the
//! [`reparam_gradient`] and [`straight_through_gradient`] estimators
//! differentiate. [`reinforce_gradient`] is the score-function baseline.

mod estimators;
mod gumbel;
mod sample;

pub use estimators::{
    matrix_objective, reinforce_gradient, reparam_gradient, straight_through_gradient,
    EstimatorReport,
};
pub use gumbel::{
    gumbel_from_uniform, sample_gumbel, sample_gumbel_stream, GumbelNoise, GUMBEL_EPS,
};
pub use sample::{
    perturbed_log_scores, pl_sample_hard, pl_sample_hard_with, pl_sample_relaxed,
    pl_sample_relaxed_with,
};

use crate::error::{Error, Result};
use crate::relaxation::{Permutation, ScoreVector};

/// Largest `n` for which exhaustive enumeration is allowed (`8! = 40320`).
pub const MAX_ENUMERATION_N: usize = 8;

/// Strictly positive scores plus the Gumbel scale `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct PLParams {
    scores: ScoreVector,
    beta: f64,
}

impl PLParams {
    /// Scores with `β = 1`.
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        Self::with_beta(scores, 1.0)
    }

    pub fn with_beta(scores: Vec<f64>, beta: f64) -> Result<Self> {
        let scores = ScoreVector::new(scores)?;
        if let Some(bad) = scores.as_slice().iter().find(|&&x| x <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "PL scores must be > 0, got {bad}"
            )));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "Gumbel scale must be > 0, got {beta}"
            )));
        }
        Ok(Self { scores, beta })
    }

    pub fn scores(&self) -> &[f64] {
        self.scores.as_slice()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n(&self) -> usize {
        self.scores.len()
    }

    fn check_perm(&self, z: &Permutation) -> Result<()> {
        if z.len() == self.n() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "permutation of length {} for {} scores",
                z.len(),
                self.n()
            )))
        }
    }

    /// Remaining mass `Σ_{k≥i} s_{z_k}` before each draw.
    fn remaining_mass(&self, z: &Permutation) -> Vec<f64> {
        let s = self.scores();
        let mut rem: Vec<f64> = z.zero_based().map(|j| s[j]).collect();
        for i in (0..rem.len().saturating_sub(1)).rev() {
            rem[i] += rem[i + 1];
        }
        rem
    }
}

/// `log q(z | s)`.
pub fn pl_log_pmf(params: &PLParams, z: &Permutation) -> Result<f64> {
    params.check_perm(z)?;
    let s = params.scores();
    let rem = params.remaining_mass(z);
    Ok(z.zero_based()
        .zip(&rem)
        .map(|(j, d)| s[j].ln() - d.ln())
        .sum())
}

/// Analytic `∇_s log q(z | s)`: `1/s_j - Σ_{i ≤ pos(j)} 1 / D_i`, where
/// `D_i` is the mass remaining before the `i`-th draw.
pub fn grad_log_pmf(params: &PLParams, z: &Permutation) -> Result<Vec<f64>> {
    params.check_perm(z)?;
    let s = params.scores();
    let rem = params.remaining_mass(z);
    let mut grad: Vec<f64> = s.iter().map(|x| 1.0 / x).collect();
    let mut acc = 0.0;
    for (j, d) in z.zero_based().zip(&rem) {
        acc += 1.0 / d;
        grad[j] -= acc;
    }
    Ok(grad)
}

/// Exact `E_{z~q}[f(z)]` by summing over all `n!` permutations.
pub fn enumerate_expectation<F>(params: &PLParams, f: F) -> Result<f64>
where
    F: Fn(&Permutation) -> f64,
{
    let n = params.n();
    if n > MAX_ENUMERATION_N {
        return Err(Error::Capacity {
            n,
            limit: MAX_ENUMERATION_N,
        });
    }
    Permutation::all(n)
        .iter()
        .map(|z| Ok(pl_log_pmf(params, z)?.exp() * f(z)))
        .sum()
}
