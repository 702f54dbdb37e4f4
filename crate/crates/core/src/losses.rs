//! Training losses, each with an eager form and a tape form.
//!
//! Matrices follow the sort convention: row `r` is rank `r`, column `c` is
//! item `c`. Both forms accept hard permutation matrices and relaxed ones.

use ndarray::{Array2, ArrayView2};

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::relaxation::PermutationMatrix;

/// Lower clamp applied to probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

fn check_square(op: &'static str, n: usize, shape: (usize, usize)) -> Result<()> {
    if shape == (n, n) {
        Ok(())
    } else {
        Err(Error::Shape {
            op,
            lhs: (n, n),
            rhs: shape,
        })
    }
}

/// Average row cross-entropy `-(1/n) Σ_i log P_pred[i, z_i]` against the
/// true permutation matrix.
pub fn cross_entropy_rows(p_true: &PermutationMatrix, p_pred: ArrayView2<f64>) -> Result<f64> {
    let n = p_true.n();
    check_square("cross_entropy_rows", n, p_pred.dim())?;
    let total: f64 = p_true
        .entries()
        .indexed_iter()
        .filter(|(_, &t)| t == 1.0)
        .map(|(ij, _)| {
            if p_pred[ij].is_nan() {
                f64::NAN
            } else {
                p_pred[ij].max(PROB_CLAMP).ln()
            }
        })
        .sum();
    Ok(-total / n as f64)
}

pub fn cross_entropy_rows_var<'t>(p_true: &PermutationMatrix, p_pred: Var<'t>) -> Result<Var<'t>> {
    let n = p_true.n();
    check_square("cross_entropy_rows", n, p_pred.shape())?;
    let logp = p_pred.clamp_min(PROB_CLAMP).log()?;
    Ok(logp
        .mul_const(p_true.entries().clone())?
        .sum()
        .scale(-1.0 / n as f64))
}

fn knn_mask(n: usize, label: usize, neighbors: &[usize], k: usize) -> Result<Array2<f64>> {
    if neighbors.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} neighbor labels for a {n}×{n} matrix",
            neighbors.len()
        )));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={n}"
        )));
    }
    Ok(Array2::from_shape_fn((n, n), |(rank, item)| {
        if rank < k && neighbors[item] == label {
            1.0
        } else {
            0.0
        }
    }))
}

/// Uniformly weighted kNN loss: minus the (soft) fraction of the top-`k`
/// ranks occupied by candidates sharing the query label.
pub fn knn_loss(p: ArrayView2<f64>, label: usize, neighbors: &[usize], k: usize) -> Result<f64> {
    let n = neighbors.len();
    check_square("knn_loss", n, p.dim())?;
    let mask = knn_mask(n, label, neighbors, k)?;
    Ok(-(&mask * &p).sum() / k as f64)
}

pub fn knn_loss_var<'t>(
    p: Var<'t>,
    label: usize,
    neighbors: &[usize],
    k: usize,
) -> Result<Var<'t>> {
    let n = neighbors.len();
    check_square("knn_loss", n, p.shape())?;
    let mask = knn_mask(n, label, neighbors, k)?;
    Ok(p.mul_const(mask)?.sum().scale(-1.0 / k as f64))
}

pub fn mse(y_true: f64, y_pred: f64) -> f64 {
    (y_true - y_pred).powi(2)
}

/// Squared error of a `1×1` prediction node.
pub fn mse_var(y_true: f64, y_pred: Var<'_>) -> Result<Var<'_>> {
    if y_pred.shape() != (1, 1) {
        return Err(Error::Shape {
            op: "mse",
            lhs: (1, 1),
            rhs: y_pred.shape(),
        });
    }
    Ok(y_pred
        .add_const(Array2::from_elem((1, 1), -y_true))?
        .square())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_diff_gradient, relative_error, Tape};
    use crate::relaxation::Permutation;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn perm(v: &[usize]) -> PermutationMatrix {
        Permutation::new(v.to_vec()).unwrap().to_matrix()
    }

    #[test]
    fn cross_entropy_examples() {
        let id = perm(&[1, 2]);
        assert_eq!(cross_entropy_rows(&id, id.entries().view()).unwrap(), 0.0);
        let hi = 0.731_058_578_630_004_9;
        let pred = array![[hi, 1.0 - hi], [1.0 - hi, hi]];
        let ce = cross_entropy_rows(&id, pred.view()).unwrap();
        assert!((ce - 0.313_261_687_518_222_8).abs() < 1e-12, "{ce}");
        let uniform = Array2::from_elem((4, 4), 0.25);
        let ce = cross_entropy_rows(&perm(&[3, 1, 4, 2]), uniform.view()).unwrap();
        assert!((ce - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_clamps_zero_probabilities() {
        let ce = cross_entropy_rows(&perm(&[2, 1]), Array2::<f64>::eye(2).view()).unwrap();
        assert!((ce + PROB_CLAMP.ln()).abs() < 1e-9);
    }

    #[test]
    fn knn_examples() {
        // nearest candidate (rank 1) is item 2, which shares the label
        let p = perm(&[2, 1, 3]);
        assert_eq!(
            knn_loss(p.entries().view(), 7, &[1, 7, 1], 1).unwrap(),
            -1.0
        );
        assert_eq!(
            knn_loss(p.entries().view(), 1, &[1, 7, 7], 2).unwrap(),
            -0.5
        );
        assert!(matches!(
            knn_loss(p.entries().view(), 1, &[1, 7, 7], 4),
            Err(Error::InvalidArgument(_))
        ));
        assert!(knn_loss(p.entries().view(), 1, &[1, 7], 1).is_err());
    }

    #[test]
    fn knn_matches_double_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..=5);
            let mut p = Array2::from_shape_fn((n, n), |_| rng.random::<f64>());
            for mut r in p.rows_mut() {
                let s = r.sum();
                r /= s;
            }
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let y = rng.random_range(0..3);
            let k = rng.random_range(1..=n);
            let mut want = 0.0;
            for rank in 0..k {
                for item in 0..n {
                    if labels[item] == y {
                        want += p[[rank, item]];
                    }
                }
            }
            want = -want / k as f64;
            let got = knn_loss(p.view(), y, &labels, k).unwrap();
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(3.0, 3.0), 0.0);
        assert_eq!(mse(0.0, 2.0), 4.0);
        let pairs = [(1.0, 2.0), (-0.5, 0.25), (3.0, 3.5)];
        let mut total = 0.0;
        for &(a, b) in &pairs {
            total += (a - b) * (a - b);
        }
        let mean: f64 = pairs.iter().map(|&(a, b)| mse(a, b)).sum::<f64>() / 3.0;
        assert!((mean - total / 3.0).abs() < 1e-15);
    }

    #[test]
    fn tape_forms_match_eager_and_finite_differences() {
        let truth = perm(&[3, 1, 2]);
        let p0 = array![[0.2, 0.3, 0.5], [0.6, 0.1, 0.3], [0.25, 0.45, 0.3]];
        let flat: Vec<f64> = p0.iter().copied().collect();
        let to_m = |x: &[f64]| Array2::from_shape_vec((3, 3), x.to_vec()).unwrap();

        type Eager = Box<dyn Fn(&Array2<f64>) -> f64>;
        type OnTape = Box<dyn for<'t> Fn(Var<'t>) -> Var<'t>>;
        let truth2 = truth.clone();
        let cases: Vec<(Eager, OnTape)> = vec![
            (
                Box::new(move |m| cross_entropy_rows(&truth, m.view()).unwrap()),
                Box::new(move |v| cross_entropy_rows_var(&truth2, v).unwrap()),
            ),
            (
                Box::new(|m| knn_loss(m.view(), 1, &[1, 0, 1], 2).unwrap()),
                Box::new(|v| knn_loss_var(v, 1, &[1, 0, 1], 2).unwrap()),
            ),
            (
                Box::new(|m| mse(1.5, m.sum())),
                Box::new(|v| mse_var(1.5, v.sum()).unwrap()),
            ),
        ];
        for (eager, on_tape) in cases {
            let tape = Tape::new();
            let x = tape.var(p0.clone());
            let loss = on_tape(x);
            assert!((loss.scalar_value() - eager(&p0)).abs() < 1e-14);
            let ad: Vec<f64> = loss.backward().unwrap().wrt(x).iter().copied().collect();
            let fd = finite_diff_gradient(|z| eager(&to_m(z)), &flat, 1e-6);
            assert!(relative_error(&ad, &fd, 1e-8) < 1e-5, "{ad:?} vs {fd:?}");
        }
    }

    #[test]
    fn hard_knn_loss_is_matching_fraction() {
        let p = perm(&[4, 2, 1, 3]);
        let labels = [0, 1, 1, 0];
        // top 3 ranks hold items 4, 2, 1 with labels 0, 1, 0
        let l = knn_loss(p.entries().view(), 0, &labels, 3).unwrap();
        assert!((l + 2.0 / 3.0).abs() < 1e-15);
        assert!((-1.0..=0.0).contains(&l));
    }
}
