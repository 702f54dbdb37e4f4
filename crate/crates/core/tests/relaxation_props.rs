//! Property tests of the exact and relaxed sort operators.

use ndarray::Array2;
use proptest::prelude::*;
use unisort::relaxation::{
    argmax_is_permutation, classify_matrix, is_nonnegative, kth_largest_index,
    permutation_to_matrix, relaxed_sort, rows_sum_to_one, sort_permutation, top_k_sum, ScoreVector,
    Temperature, SUM_TOLERANCE,
};

fn scores(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, 1..=max_len)
}

fn log_tau() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(|e| 10f64.powf(e))
}

/// Distinct scores: sorted neighbours at least `gap` apart, in random order.
fn separated(max_len: usize, gap: f64) -> impl Strategy<Value = Vec<f64>> {
    (
        prop::collection::vec(0.0f64..1.0, 1..=max_len),
        -5.0f64..5.0,
    )
        .prop_flat_map(move |(steps, start)| {
            let mut acc = start;
            let v: Vec<f64> = steps
                .iter()
                .map(|d| {
                    acc += gap + d;
                    acc
                })
                .collect();
            Just(v).prop_shuffle()
        })
}

fn sv(v: &[f64]) -> ScoreVector {
    ScoreVector::new(v.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn relaxed_sort_is_unimodal_row_stochastic(v in scores(16), tau in log_tau()) {
        let p = relaxed_sort(&sv(&v), Temperature::new(tau).unwrap());
        let m = p.entries().view();
        prop_assert!(is_nonnegative(m));
        prop_assert!(rows_sum_to_one(m, SUM_TOLERANCE));
        prop_assert!(argmax_is_permutation(m));
    }

    #[test]
    fn projection_recovers_the_exact_sort(v in separated(16, 1e-3), tau in log_tau()) {
        let s = sv(&v);
        prop_assert_eq!(relaxed_sort(&s, Temperature::new(tau).unwrap()).project_hard(), sort_permutation(&s));
    }

    #[test]
    fn exact_sort_orders_descending(v in scores(20)) {
        let s = sv(&v);
        let z = sort_permutation(&s);
        let sorted: Vec<f64> = z.zero_based().map(|j| v[j]).collect();
        prop_assert!(sorted.windows(2).all(|w| w[0] >= w[1]));
        // P_z·s is the sorted vector
        prop_assert_eq!(permutation_to_matrix(&z).apply(&v), sorted);
    }

    #[test]
    fn ties_keep_order_of_appearance(v in prop::collection::vec(0u8..3, 1..12)) {
        let s = sv(&v.iter().map(|&x| x as f64).collect::<Vec<_>>());
        let z = sort_permutation(&s);
        for w in z.as_slice().windows(2) {
            if v[w[0] - 1] == v[w[1] - 1] {
                prop_assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn small_temperature_limit(v in separated(16, 0.05)) {
        let s = sv(&v);
        let p = relaxed_sort(&s, Temperature::new(1e-3).unwrap());
        let exact = permutation_to_matrix(&sort_permutation(&s));
        let err = (p.entries() - exact.entries()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(err < 1e-6, "error {}", err);
    }

    #[test]
    fn translation_invariance(v in scores(10), c in -20.0f64..20.0, tau in 0.1f64..10.0) {
        let t = Temperature::new(tau).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let a = relaxed_sort(&sv(&v), t);
        let b = relaxed_sort(&sv(&shifted), t);
        let diff = (a.entries() - b.entries()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(diff < 1e-9, "diff {}", diff);
    }

    #[test]
    fn scale_and_temperature_trade_off(v in scores(10), c in 0.1f64..10.0, tau in 0.1f64..10.0) {
        let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
        let a = relaxed_sort(&sv(&v), Temperature::new(tau).unwrap());
        let b = relaxed_sort(&sv(&scaled), Temperature::new(c * tau).unwrap());
        let diff = (a.entries() - b.entries()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(diff < 1e-9, "diff {}", diff);
    }

    #[test]
    fn relabelling_items_permutes_columns(v in separated(8, 0.01).prop_flat_map(|v| {
        let n = v.len();
        (Just(v), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
    }), tau in 0.1f64..10.0) {
        let (v, perm) = v;
        let t = Temperature::new(tau).unwrap();
        let moved: Vec<f64> = perm.iter().map(|&j| v[j]).collect();
        let a = relaxed_sort(&sv(&v), t);
        let b = relaxed_sort(&sv(&moved), t);
        let n = v.len();
        let expect = Array2::from_shape_fn((n, n), |(i, j)| a.entries()[[i, perm[j]]]);
        let diff = (&expect - b.entries()).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!(diff < 1e-12, "diff {}", diff);
    }

    #[test]
    fn top_k_identities_match_sorting(v in scores(8)) {
        let s = sv(&v);
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let z = sort_permutation(&s);
        for k in 1..=v.len() {
            let oracle: f64 = sorted[..k].iter().sum();
            prop_assert!((top_k_sum(&s, k).unwrap() - oracle).abs() <= 1e-12 * (1.0 + oracle.abs()));
            if s.is_distinct() {
                prop_assert_eq!(kth_largest_index(&s, k).unwrap(), z.as_slice()[k - 1]);
            }
        }
    }

    #[test]
    fn hard_matrices_classify_as_permutations(v in scores(10)) {
        let m = permutation_to_matrix(&sort_permutation(&sv(&v)));
        let c = classify_matrix(m.entries().view()).unwrap();
        prop_assert!(c.permutation && c.doubly_stochastic && c.unimodal && c.row_stochastic);
    }
}

#[test]
fn worked_example() {
    let s = sv(&[9.0, 1.0, 5.0, 2.0]);
    assert_eq!(sort_permutation(&s).as_slice(), &[1, 3, 4, 2]);
    assert_eq!(top_k_sum(&s, 2).unwrap(), 14.0);
    assert_eq!(kth_largest_index(&s, 3).unwrap(), 4);
}
