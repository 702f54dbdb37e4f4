//! Synthetic datasets.
//!
//! Sequences: each item carries a hidden scalar value `v` and is observed
//! only through `d` features `x_k = w_k·v + noise·ε_k` with a fixed random
//! encoding `w` (`w_1 = 1`, the rest uniform in `[-1, 1]`). Values are drawn
//! from `{0.0, 0.1, …, 9.9}` and must be distinct within a sequence;
//! sequences with a repeated value are redrawn, up to [`MAX_REDRAWS`] times.
//!
//! Points: labelled feature vectors for the kNN task, either concentric
//! rings padded with nuisance dimensions or two Gaussian blobs.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::relaxation::{sort_permutation, Permutation, ScoreVector};
use crate::rng::{derive_seed, stream_rng};

/// Redraw budget per sequence when a value repeats.
pub const MAX_REDRAWS: usize = 1000;

const VALUE_LEVELS: u32 = 100;
const VALUE_STEP: f64 = 0.1;

const ENCODER_TAG: u64 = 1;
const SEQUENCE_TAG: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    All,
    Train,
    Valid,
    Test,
}

/// One sequence of `n` items.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    /// `n×d`, one row per item.
    pub features: Array2<f64>,
    /// Hidden scalar per item, pairwise distinct.
    pub values: Vec<f64>,
}

impl Sequence {
    /// Descending order of the hidden values.
    pub fn true_permutation(&self) -> Permutation {
        sort_permutation(&ScoreVector::new(self.values.clone()).expect("finite values"))
    }

    /// Value at rank `⌊(n + 1)/2⌋`.
    pub fn median(&self) -> f64 {
        let z = self.true_permutation();
        self.values[z.as_slice()[self.values.len().div_ceil(2) - 1] - 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequenceDataset {
    pub n: usize,
    pub d: usize,
    pub noise: f64,
    pub seed: u64,
    pub split: Split,
    pub encoding: Vec<f64>,
    pub sequences: Vec<Sequence>,
}

/// Train, validation and test partitions of one generated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSplits {
    pub train: SyntheticSequenceDataset,
    pub valid: SyntheticSequenceDataset,
    pub test: SyntheticSequenceDataset,
}

fn encoding(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(derive_seed(seed, ENCODER_TAG), 0);
    (0..d)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect()
}

pub fn generate_sequences(
    n: usize,
    d: usize,
    count: usize,
    noise: f64,
    seed: u64,
) -> Result<SyntheticSequenceDataset> {
    if n < 2 || d < 1 {
        return Err(Error::InvalidArgument(format!(
            "need n ≥ 2 and d ≥ 1, got n = {n}, d = {d}"
        )));
    }
    if n > VALUE_LEVELS as usize {
        return Err(Error::InvalidArgument(format!(
            "n = {n} exceeds {VALUE_LEVELS} distinct values"
        )));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise must be ≥ 0, got {noise}"
        )));
    }
    let w = encoding(d, seed);
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let mut rng = stream_rng(derive_seed(seed, SEQUENCE_TAG), 0);
    let mut sequences = Vec::with_capacity(count);
    for _ in 0..count {
        let mut values = None;
        for _ in 0..MAX_REDRAWS {
            let draw: Vec<u32> = (0..n).map(|_| rng.random_range(0..VALUE_LEVELS)).collect();
            let mut sorted = draw.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() == n {
                values = Some(
                    draw.into_iter()
                        .map(|k| k as f64 * VALUE_STEP)
                        .collect::<Vec<_>>(),
                );
                break;
            }
        }
        let values = values.ok_or_else(|| {
            Error::InvalidInput(format!(
                "no distinct draw of {n} values after {MAX_REDRAWS} attempts"
            ))
        })?;
        let features = Array2::from_shape_fn((n, d), |(i, k)| w[k] * values[i])
            + Array2::from_shape_simple_fn((n, d), || noise * gauss.sample(&mut rng));
        sequences.push(Sequence { features, values });
    }
    Ok(SyntheticSequenceDataset {
        n,
        d,
        noise,
        seed,
        split: Split::All,
        encoding: w,
        sequences,
    })
}

impl SyntheticSequenceDataset {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// First `n_train` sequences for training, the next `n_valid` for
    /// validation, the rest for test.
    pub fn split(self, n_train: usize, n_valid: usize) -> Result<SequenceSplits> {
        if n_train + n_valid >= self.len() || n_train == 0 || n_valid == 0 {
            return Err(Error::InvalidArgument(format!(
                "cannot split {} sequences into {n_train} train / {n_valid} valid / non-empty test",
                self.len()
            )));
        }
        let mut rest = self.sequences.clone();
        let mut valid = rest.split_off(n_train);
        let test = valid.split_off(n_valid);
        let with = |split, sequences| SyntheticSequenceDataset {
            split,
            sequences,
            ..self.clone()
        };
        Ok(SequenceSplits {
            train: with(Split::Train, rest),
            valid: with(Split::Valid, valid),
            test: with(Split::Test, test),
        })
    }
}

impl SequenceSplits {
    pub fn generate(
        n: usize,
        d: usize,
        noise: f64,
        sizes: (usize, usize, usize),
        seed: u64,
    ) -> Result<Self> {
        let (tr, va, te) = sizes;
        generate_sequences(n, d, tr + va + te, noise, seed)?.split(tr, va)
    }
}

/// Labelled points, one row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
}

impl PointDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn rows(&self, idx: &[usize]) -> Array2<f64> {
        self.features.select(Axis(0), idx)
    }
}

/// Parameters of the concentric-rings dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingsSpec {
    /// Radius of class `c` is `inner_radius + c·gap`.
    pub inner_radius: f64,
    pub gap: f64,
    pub radial_noise: f64,
    /// Extra dimensions of pure Gaussian noise appended to the 2-D coordinates.
    pub nuisance_dims: usize,
    pub nuisance_scale: f64,
}

impl Default for RingsSpec {
    fn default() -> Self {
        Self {
            inner_radius: 1.0,
            gap: 1.0,
            radial_noise: 0.1,
            nuisance_dims: 16,
            nuisance_scale: 1.0,
        }
    }
}

/// Two classes on concentric circles, padded with nuisance dimensions.
pub fn generate_rings(count: usize, spec: RingsSpec, seed: u64) -> PointDataset {
    let mut rng = stream_rng(seed, 0);
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let dim = 2 + spec.nuisance_dims;
    let mut labels: Vec<usize> = (0..count).map(|i| i % 2).collect();
    labels.shuffle(&mut rng);
    let mut features = Array2::zeros((count, dim));
    for (i, &c) in labels.iter().enumerate() {
        let r =
            spec.inner_radius + c as f64 * spec.gap + spec.radial_noise * gauss.sample(&mut rng);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        features[[i, 0]] = r * theta.cos();
        features[[i, 1]] = r * theta.sin();
        for k in 2..dim {
            features[[i, k]] = spec.nuisance_scale * gauss.sample(&mut rng);
        }
    }
    PointDataset { features, labels }
}

/// Two isotropic Gaussian classes in 2-D with means `(±separation/2, 0)`.
pub fn generate_blobs(count: usize, separation: f64, seed: u64) -> PointDataset {
    let mut rng = stream_rng(seed, 0);
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let labels: Vec<usize> = (0..count).map(|i| i % 2).collect();
    let features = Array2::from_shape_fn((count, 2), |(i, k)| {
        let centre = if k == 0 {
            (labels[i] as f64 - 0.5) * separation
        } else {
            0.0
        };
        centre + gauss.sample(&mut rng)
    });
    PointDataset { features, labels }
}
