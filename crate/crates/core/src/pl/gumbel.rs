use rand::Rng;

use crate::rng::{stream_rng, Rng as StreamRng};

/// Clamp inside both logarithms of the inverse-CDF transform.
pub const GUMBEL_EPS: f64 = 1e-10;

/// Standard Gumbel draws together with the seed and stream that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct GumbelNoise {
    pub g: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

/// `-log(-log(u + eps) + eps)`.
pub fn gumbel_from_uniform(u: f64, eps: f64) -> f64 {
    -(-(u + eps).ln() + eps).ln()
}

pub(crate) fn draw(rng: &mut StreamRng, n: usize, eps: f64) -> Vec<f64> {
    (0..n)
        .map(|_| gumbel_from_uniform(rng.random::<f64>(), eps))
        .collect()
}

/// `n` i.i.d. Gumbel(0, 1) draws from stream 0 of `seed`.
pub fn sample_gumbel(n: usize, seed: u64, eps: f64) -> GumbelNoise {
    sample_gumbel_stream(n, seed, 0, eps)
}

pub fn sample_gumbel_stream(n: usize, seed: u64, stream: u64, eps: f64) -> GumbelNoise {
    assert!(eps >= 0.0, "eps must be non-negative");
    let mut rng = stream_rng(seed, stream);
    GumbelNoise {
        g: draw(&mut rng, n, eps),
        seed,
        stream,
    }
}
