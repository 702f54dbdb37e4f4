use serde::Serialize;

use crate::relaxation::Permutation;

/// Evaluation metrics; fields a task does not produce stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_perm_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element_rank_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knn_accuracy: Option<f64>,
}

/// One row of a training curve. Epoch 0 is the untrained model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_metric: f64,
}

/// Fraction of fully correct permutations and of correct individual ranks.
pub fn permutation_accuracy(pred: &[Permutation], truth: &[Permutation]) -> (f64, f64) {
    assert_eq!(pred.len(), truth.len());
    if pred.is_empty() {
        return (0.0, 0.0);
    }
    let mut exact = 0usize;
    let mut ranks = 0usize;
    let mut total = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        exact += usize::from(p == t);
        ranks += p
            .as_slice()
            .iter()
            .zip(t.as_slice())
            .filter(|(a, b)| a == b)
            .count();
        total += t.len();
    }
    (
        exact as f64 / pred.len() as f64,
        ranks as f64 / total as f64,
    )
}

pub fn mean_squared_error(y: &[f64], y_hat: &[f64]) -> f64 {
    assert_eq!(y.len(), y_hat.len());
    y.iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / y.len() as f64
}

/// `1 - SS_res / SS_tot`.
pub fn r_squared(y: &[f64], y_hat: &[f64]) -> f64 {
    assert_eq!(y.len(), y_hat.len());
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - ss_res / ss_tot
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[usize]) -> Permutation {
        Permutation::new(v.to_vec()).unwrap()
    }

    #[test]
    fn accuracy_counts() {
        let pred = [p(&[1, 2, 3]), p(&[2, 1, 3])];
        let truth = [p(&[1, 2, 3]), p(&[1, 2, 3])];
        let (exact, elem) = permutation_accuracy(&pred, &truth);
        assert_eq!(exact, 0.5);
        assert!((elem - 4.0 / 6.0).abs() < 1e-15);
        assert!(exact <= elem);
    }

    #[test]
    fn constant_predictor_has_zero_r2() {
        let y = [1.0, 2.0, 6.0, 3.0];
        let mean = 3.0;
        assert_eq!(r_squared(&y, &[mean; 4]), 0.0);
        assert_eq!(r_squared(&y, &y), 1.0);
        assert_eq!(mean_squared_error(&[0.0, 2.0], &[2.0, 2.0]), 2.0);
    }

    #[test]
    fn serializes_only_present_fields() {
        let m = MetricsRecord {
            r2: Some(0.5),
            ..Default::default()
        };
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"r2":0.5}"#);
    }
}
