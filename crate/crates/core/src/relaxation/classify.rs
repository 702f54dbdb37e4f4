//! Matrix classes: row-stochastic, doubly-stochastic, unimodal, permutation.
//!
//! Every permutation matrix is doubly stochastic and unimodal; both classes
//! are row stochastic, and neither contains the other.

use ndarray::ArrayView2;
use serde::Serialize;

use super::tie_aware_argmax;
use crate::error::{Error, Result};

/// Absolute tolerance on row and column sums.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MatrixClass {
    pub row_stochastic: bool,
    pub doubly_stochastic: bool,
    pub unimodal: bool,
    pub permutation: bool,
}

pub fn is_nonnegative(m: ArrayView2<f64>) -> bool {
    m.iter().all(|&x| x >= 0.0)
}

pub fn rows_sum_to_one(m: ArrayView2<f64>, tol: f64) -> bool {
    m.rows().into_iter().all(|r| (r.sum() - 1.0).abs() <= tol)
}

fn cols_sum_to_one(m: ArrayView2<f64>, tol: f64) -> bool {
    m.columns()
        .into_iter()
        .all(|c| (c.sum() - 1.0).abs() <= tol)
}

/// Row argmaxes, under the tie protocol, are pairwise distinct.
pub fn argmax_is_permutation(m: ArrayView2<f64>) -> bool {
    let mut seen = vec![false; m.ncols()];
    tie_aware_argmax(m)
        .into_iter()
        .all(|j| !std::mem::replace(&mut seen[j - 1], true))
}

pub fn classify_matrix(m: ArrayView2<f64>) -> Result<MatrixClass> {
    let (rows, cols) = m.dim();
    if rows != cols || rows == 0 {
        return Err(Error::InvalidArgument(format!(
            "expected a non-empty square matrix, got {rows}×{cols}"
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let row_stochastic = is_nonnegative(m) && rows_sum_to_one(m, SUM_TOLERANCE);
    let doubly_stochastic = row_stochastic && cols_sum_to_one(m, SUM_TOLERANCE);
    let unimodal = row_stochastic && argmax_is_permutation(m);
    let permutation = doubly_stochastic && m.iter().all(|&x| x == 0.0 || x == 1.0);
    Ok(MatrixClass {
        row_stochastic,
        doubly_stochastic,
        unimodal,
        permutation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};

    #[test]
    fn doubly_stochastic_but_not_unimodal() {
        let m = array![
            [0.0, 1.0 / 2.0, 1.0 / 2.0],
            [7.0 / 16.0, 3.0 / 16.0, 3.0 / 8.0],
            [9.0 / 16.0, 5.0 / 16.0, 1.0 / 8.0]
        ];
        let c = classify_matrix(m.view()).unwrap();
        assert!(c.row_stochastic && c.doubly_stochastic);
        assert!(!c.unimodal && !c.permutation);
    }

    #[test]
    fn unimodal_but_not_doubly_stochastic() {
        let m = array![
            [3.0 / 8.0, 1.0 / 8.0, 1.0 / 2.0],
            [3.0 / 4.0, 1.0 / 4.0, 0.0],
            [1.0 / 4.0, 1.0 / 2.0, 1.0 / 4.0]
        ];
        let c = classify_matrix(m.view()).unwrap();
        assert!(c.row_stochastic && c.unimodal);
        assert!(!c.doubly_stochastic && !c.permutation);
    }

    #[test]
    fn identity_is_everything() {
        let c = classify_matrix(Array2::<f64>::eye(3).view()).unwrap();
        assert_eq!(
            c,
            MatrixClass {
                row_stochastic: true,
                doubly_stochastic: true,
                unimodal: true,
                permutation: true
            }
        );
    }

    #[test]
    fn negative_entries_are_not_stochastic() {
        let c = classify_matrix(array![[1.5, -0.5], [0.0, 1.0]].view()).unwrap();
        assert!(!c.row_stochastic && !c.unimodal);
    }

    #[test]
    fn non_square_is_rejected() {
        let m = Array2::<f64>::zeros((2, 3));
        assert!(matches!(
            classify_matrix(m.view()),
            Err(Error::InvalidArgument(_))
        ));
    }
}
