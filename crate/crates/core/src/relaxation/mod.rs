//! Exact sorting and its continuous relaxation.
//!
//! For a score vector `s` of length `n`, row `i` (1-based) of the exact sort
//! matrix has its single one at `argmax_j [(n + 1 - 2i)·s_j - (A_s·1)_j]`,
//! where `A_s` holds the pairwise absolute differences. [`relaxed_sort`]
//! replaces that argmax with a softmax at temperature `τ`.
//!
//! All public indices are 1-based.

mod classify;
mod identities;

pub use classify::{
    argmax_is_permutation, classify_matrix, is_nonnegative, rows_sum_to_one, MatrixClass,
    SUM_TOLERANCE,
};
pub use identities::{kth_largest_index, top_k_sum};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// A non-empty vector of finite scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("score vector must be non-empty".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "score {} is not finite: {v}",
                i + 1
            )));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// True when no two entries compare equal.
    pub fn is_distinct(&self) -> bool {
        let mut sorted = self.0.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).all(|w| w[0] != w[1])
    }
}

impl TryFrom<Vec<f64>> for ScoreVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Softmax temperature, strictly positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 {
            Ok(Self(tau))
        } else {
            Err(Error::InvalidTemperature(tau))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// An ordering of `{1, …, n}`, each index appearing once.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let n = indices.len();
        if n == 0 {
            return Err(Error::InvalidInput("permutation must be non-empty".into()));
        }
        let mut seen = vec![false; n];
        for &z in &indices {
            if z == 0 || z > n || seen[z - 1] {
                return Err(Error::InvalidInput(format!(
                    "{indices:?} is not a permutation of 1..={n}"
                )));
            }
            seen[z - 1] = true;
        }
        Ok(Self(indices))
    }

    pub fn identity(n: usize) -> Self {
        Self((1..=n).collect())
    }

    pub(crate) fn from_zero_based(indices: impl IntoIterator<Item = usize>) -> Self {
        let v: Vec<usize> = indices.into_iter().map(|i| i + 1).collect();
        debug_assert!(Self::new(v.clone()).is_ok());
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Zero-based view of the entries.
    pub fn zero_based(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&z| z - 1)
    }

    pub fn to_matrix(&self) -> PermutationMatrix {
        permutation_to_matrix(self)
    }

    /// All `n!` permutations of `1..=n` in lexicographic order.
    pub fn all(n: usize) -> Vec<Permutation> {
        let mut out = Vec::new();
        let mut current: Vec<usize> = (1..=n).collect();
        loop {
            out.push(Permutation(current.clone()));
            // next lexicographic permutation
            let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
                break;
            };
            let j = (i..n).rev().find(|&j| current[j] > current[i - 1]).unwrap();
            current.swap(i - 1, j);
            current[i..].reverse();
        }
        out
    }
}

/// A square 0/1 matrix with exactly one 1 per row and per column.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationMatrix(Array2<f64>);

impl PermutationMatrix {
    pub fn entries(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    /// `P·x`: with `P = P_sort(s)` this is `s` sorted descendingly.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0
            .rows()
            .into_iter()
            .map(|row| row.dot(&ndarray::aview1(x)))
            .collect()
    }
}

/// A row-stochastic matrix whose row argmaxes form a permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct UnimodalMatrix {
    entries: Array2<f64>,
    tau: Option<Temperature>,
}

impl UnimodalMatrix {
    /// Checks all three unimodality conditions on an arbitrary matrix.
    pub fn try_from_matrix(entries: Array2<f64>) -> Result<Self> {
        let class = classify_matrix(entries.view())?;
        if !class.unimodal {
            return Err(Error::InvalidInput(
                "matrix is not unimodal row-stochastic".into(),
            ));
        }
        Ok(Self { entries, tau: None })
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.entries
    }

    /// Temperature that produced this matrix, if it came from [`relaxed_sort`].
    pub fn tau(&self) -> Option<Temperature> {
        self.tau
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn project_hard(&self) -> Permutation {
        project_hard(self)
    }
}

/// Descending-order permutation; ties keep their order of appearance.
pub fn sort_permutation(s: &ScoreVector) -> Permutation {
    let mut idx: Vec<usize> = (0..s.len()).collect();
    let v = s.as_slice();
    // stable sort, so equal scores stay in index order
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
    Permutation::from_zero_based(idx)
}

pub fn permutation_to_matrix(z: &Permutation) -> PermutationMatrix {
    let n = z.len();
    let mut m = Array2::zeros((n, n));
    for (row, col) in z.zero_based().enumerate() {
        m[[row, col]] = 1.0;
    }
    PermutationMatrix(m)
}

/// `A_s[i, j] = |s_i - s_j|`.
pub fn pairwise_abs_diff(s: &ScoreVector) -> Array2<f64> {
    let v = s.as_slice();
    let n = v.len();
    Array2::from_shape_fn((n, n), |(i, j)| (v[i] - v[j]).abs())
}

/// The `n×n` logit matrix whose row `i` is `(n + 1 - 2i)·s - A_s·1`.
pub fn sort_logits(s: &ScoreVector) -> Array2<f64> {
    let v = s.as_slice();
    let n = v.len();
    let a = pairwise_abs_diff(s);
    let b = a.sum_axis(ndarray::Axis(1));
    Array2::from_shape_fn((n, n), |(i, j)| {
        let scale = n as f64 + 1.0 - 2.0 * (i as f64 + 1.0);
        scale * v[j] - b[j]
    })
}

/// Row-wise softmax of `logits / tau` with max subtraction.
pub fn softmax_rows(logits: ArrayView2<f64>, tau: Temperature) -> Array2<f64> {
    let t = tau.value();
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|x| ((x - max) / t).exp());
        let sum = row.sum();
        row.mapv_inplace(|x| x / sum);
    }
    out
}

/// The relaxed sort operator `P̂_sort(s)(τ)`. Costs `O(n²)`.
pub fn relaxed_sort(s: &ScoreVector, tau: Temperature) -> UnimodalMatrix {
    UnimodalMatrix {
        entries: softmax_rows(sort_logits(s).view(), tau),
        tau: Some(tau),
    }
}

/// Row-wise argmax with tie handling (1-based).
///
/// Row `i` takes the smallest maximizing column not already taken by an
/// earlier row; if every maximizer is taken, the smallest maximizer. The
/// result is a permutation for any matrix produced by [`relaxed_sort`],
/// including on tied scores, but not for arbitrary matrices.
pub fn tie_aware_argmax(m: ArrayView2<f64>) -> Vec<usize> {
    let n = m.ncols();
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(m.nrows());
    for row in m.rows() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let maximizers: Vec<usize> = (0..n).filter(|&j| row[j] == max).collect();
        let pick = maximizers
            .iter()
            .copied()
            .find(|&j| !taken[j])
            .or_else(|| maximizers.first().copied())
            .unwrap_or(0);
        taken[pick] = true;
        out.push(pick + 1);
    }
    out
}

/// Projects a unimodal matrix to its hard permutation.
pub fn project_hard(u: &UnimodalMatrix) -> Permutation {
    let idx = tie_aware_argmax(u.entries.view());
    Permutation::new(idx).expect("unimodal matrix projects to a permutation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sv(v: &[f64]) -> ScoreVector {
        ScoreVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn score_vector_rejects_empty_and_non_finite() {
        assert!(ScoreVector::new(vec![]).is_err());
        assert!(matches!(
            ScoreVector::new(vec![1.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
        assert!(ScoreVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn temperature_must_be_positive() {
        assert_eq!(Temperature::new(0.0), Err(Error::InvalidTemperature(0.0)));
        assert!(Temperature::new(-1.0).is_err());
        assert!(Temperature::new(f64::NAN).is_err());
        assert!(Temperature::new(1e-3).is_ok());
    }

    #[test]
    fn permutation_validation() {
        assert!(Permutation::new(vec![1, 3, 4, 2]).is_ok());
        assert!(Permutation::new(vec![1, 1]).is_err());
        assert!(Permutation::new(vec![0, 1]).is_err());
        assert!(Permutation::new(vec![1, 3]).is_err());
        assert_eq!(Permutation::all(3).len(), 6);
        assert_eq!(Permutation::all(4).len(), 24);
        assert_eq!(Permutation::all(1), vec![Permutation::identity(1)]);
    }

    #[test]
    fn sort_permutation_examples() {
        assert_eq!(
            sort_permutation(&sv(&[9.0, 1.0, 5.0, 2.0])).as_slice(),
            &[1, 3, 4, 2]
        );
        assert_eq!(sort_permutation(&sv(&[5.0])).as_slice(), &[1]);
        assert_eq!(
            sort_permutation(&sv(&[2.0, 2.0, 1.0])).as_slice(),
            &[1, 2, 3]
        );
    }

    #[test]
    fn permutation_matrix_examples() {
        let p = permutation_to_matrix(&Permutation::new(vec![1, 3, 4, 2]).unwrap());
        let mut expected = Array2::<f64>::zeros((4, 4));
        for (r, c) in [(0, 0), (1, 2), (2, 3), (3, 1)] {
            expected[[r, c]] = 1.0;
        }
        assert_eq!(p.entries(), &expected);
        assert_eq!(
            permutation_to_matrix(&Permutation::identity(1)).entries(),
            &array![[1.0]]
        );
        assert_eq!(
            permutation_to_matrix(&Permutation::new(vec![2, 1]).unwrap()).entries(),
            &array![[0.0, 1.0], [1.0, 0.0]]
        );
    }

    #[test]
    fn sorted_vector_via_matrix_product() {
        let s = sv(&[9.0, 1.0, 5.0, 2.0]);
        let p = sort_permutation(&s).to_matrix();
        assert_eq!(p.apply(s.as_slice()), vec![9.0, 5.0, 2.0, 1.0]);
    }

    #[test]
    fn pairwise_abs_diff_examples() {
        assert_eq!(
            pairwise_abs_diff(&sv(&[1.0, 0.0])),
            array![[0.0, 1.0], [1.0, 0.0]]
        );
        assert_eq!(
            pairwise_abs_diff(&sv(&[3.0, 3.0, 3.0])),
            Array2::<f64>::zeros((3, 3))
        );
        let v = [9.0, 1.0, 5.0, 2.0];
        let a = pairwise_abs_diff(&sv(&v));
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = v[i] - v[j];
                assert_eq!(a[[i, j]], d.abs());
            }
        }
    }

    #[test]
    fn sort_logits_examples() {
        assert_eq!(
            sort_logits(&sv(&[1.0, 0.0])),
            array![[0.0, -1.0], [-2.0, -1.0]]
        );
        assert_eq!(sort_logits(&sv(&[4.2])), array![[0.0]]);
    }

    #[test]
    fn relaxed_sort_two_element_example() {
        let p = relaxed_sort(&sv(&[1.0, 0.0]), Temperature::new(1.0).unwrap());
        let e = p.entries();
        // 1 / (1 + e^-1)
        let hi = 0.731_058_578_630_004_9;
        let lo = 1.0 - hi;
        for (got, want) in e.iter().zip([hi, lo, lo, hi]) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(p.project_hard().as_slice(), &[1, 2]);
    }

    #[test]
    fn relaxed_sort_singleton() {
        for tau in [1e-3, 1.0, 1e3] {
            let p = relaxed_sort(&sv(&[-7.5]), Temperature::new(tau).unwrap());
            assert_eq!(p.entries(), &array![[1.0]]);
        }
    }

    #[test]
    fn relaxed_sort_tiny_temperature_is_hard() {
        let s = sv(&[9.0, 1.0, 5.0, 2.0]);
        let p = relaxed_sort(&s, Temperature::new(1e-3).unwrap());
        let hard = sort_permutation(&s).to_matrix();
        let dev = (p.entries() - hard.entries())
            .mapv(f64::abs)
            .fold(0.0, |a: f64, &b| a.max(b));
        assert!(dev < 1e-6);
    }

    #[test]
    fn projection_of_identity() {
        let id = Array2::<f64>::eye(3);
        assert_eq!(tie_aware_argmax(id.view()), vec![1, 2, 3]);
        let u = UnimodalMatrix::try_from_matrix(id).unwrap();
        assert_eq!(u.project_hard(), Permutation::identity(3));
    }

    #[test]
    fn projection_with_tied_scores() {
        // s = [2, 2, 1]: columns 1 and 2 are identical, so rows 1 and 2 tie.
        let p = relaxed_sort(&sv(&[2.0, 2.0, 1.0]), Temperature::new(1.0).unwrap());
        let e = p.entries();
        for i in 0..3 {
            assert_eq!(e[[i, 0]], e[[i, 1]]);
        }
        // row 1 picks column 1, row 2 falls to the unassigned column 2, row 3 to column 3
        assert_eq!(p.project_hard().as_slice(), &[1, 2, 3]);
    }

    #[test]
    fn tie_protocol_falls_back_to_smallest_maximizer() {
        let m = array![[0.5, 0.5], [0.9, 0.1]];
        assert_eq!(tie_aware_argmax(m.view()), vec![1, 1]);
    }

    #[test]
    fn try_from_matrix_rejects_non_unimodal() {
        assert!(UnimodalMatrix::try_from_matrix(array![[0.9, 0.1], [0.8, 0.2]]).is_err());
    }
}
