//! Top-k sums and k-th largest selection via pairwise differences.

use super::{sort_logits, ScoreVector};
use crate::error::{Error, Result};

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={n}"
        )))
    } else {
        Ok(())
    }
}

/// Sum of the `k` largest scores, as `min_λ λk + Σ_i max(s_i - λ, 0)` with
/// `λ` ranging over the scores themselves.
pub fn top_k_sum(s: &ScoreVector, k: usize) -> Result<f64> {
    check_k(k, s.len())?;
    let v = s.as_slice();
    let best = v
        .iter()
        .map(|&lambda| lambda * k as f64 + v.iter().map(|&x| (x - lambda).max(0.0)).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

/// 1-based index of the k-th largest score, read off row `k` of the sort
/// logits. Fails with [`Error::Ambiguous`] when that row has tied maxima.
pub fn kth_largest_index(s: &ScoreVector, k: usize) -> Result<usize> {
    check_k(k, s.len())?;
    let logits = sort_logits(s);
    let row = logits.row(k - 1);
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let columns: Vec<usize> = (0..row.len())
        .filter(|&j| row[j] == max)
        .map(|j| j + 1)
        .collect();
    match columns.as_slice() {
        [only] => Ok(*only),
        _ => Err(Error::Ambiguous { row: k, columns }),
    }
}
