//! The relaxed sort operator recorded on a tape.

use ndarray::Array2;

use super::Var;
use crate::error::{Error, Result};
use crate::relaxation::Temperature;

/// `P̂_sort(s)(τ)` for a column of scores `s` (`n×1`), as an `n×n` node.
///
/// Built from primitives only: `|s·1ᵀ - 1·sᵀ|` for the pairwise
/// differences, row sums for `A_s·1`, and an outer product with the
/// `(n + 1 - 2i)` coefficients.
pub fn relaxed_sort_var<'t>(s: Var<'t>, tau: Temperature) -> Result<Var<'t>> {
    let (n, c) = s.shape();
    if c != 1 || n == 0 {
        return Err(Error::Shape {
            op: "relaxed_sort",
            lhs: (n, c),
            rhs: (n, 1),
        });
    }
    let tape = s.tape();
    let rows = s.broadcast(n, n)?; // [i, j] = s_i
    let a = rows.sub(rows.transpose())?.abs();
    let b = a.sum_rows(); // (A_s·1)_j, as a column
    let coef = Array2::from_shape_fn((n, 1), |(i, _)| n as f64 + 1.0 - 2.0 * (i as f64 + 1.0));
    let scaled = tape.constant(coef).matmul(s.transpose())?;
    let logits = scaled.sub(b.transpose().broadcast(n, n)?)?;
    logits.softmax_rows(tau.value())
}
