//! Two-layer perceptrons and the three task models built from them.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{Gradients, Tape, Var};
use crate::error::Result;

/// How the output layer starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputInit {
    /// All zeros: the untrained model emits a constant.
    Zero,
    Random,
}

/// `relu(x·W1 + b1)·W2 + b2`, applied row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: Array2<f64>,
    pub b1: Array2<f64>,
    pub w2: Array2<f64>,
    pub b2: Array2<f64>,
}

/// The parameters of an [`Mlp`] recorded on a tape.
#[derive(Debug, Clone, Copy)]
pub struct MlpVars<'t> {
    w1: Var<'t>,
    b1: Var<'t>,
    w2: Var<'t>,
    b2: Var<'t>,
}

impl Mlp {
    /// He-initialized hidden layer, zero biases.
    pub fn new<R: Rng>(
        input: usize,
        hidden: usize,
        output: usize,
        init: OutputInit,
        rng: &mut R,
    ) -> Self {
        let he = |fan_in: usize| Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
        let d1 = he(input);
        let w1 = Array2::from_shape_simple_fn((input, hidden), || d1.sample(rng));
        let w2 = match init {
            OutputInit::Zero => Array2::zeros((hidden, output)),
            OutputInit::Random => {
                let d2 = Normal::new(0.0, (1.0 / hidden as f64).sqrt()).unwrap();
                Array2::from_shape_simple_fn((hidden, output), || d2.sample(rng))
            }
        };
        Self {
            w1,
            b1: Array2::zeros((1, hidden)),
            w2,
            b2: Array2::zeros((1, output)),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.ncols()
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn on_tape<'t>(&self, tape: &'t Tape) -> MlpVars<'t> {
        MlpVars {
            w1: tape.var(self.w1.clone()),
            b1: tape.var(self.b1.clone()),
            w2: tape.var(self.w2.clone()),
            b2: tape.var(self.b2.clone()),
        }
    }

    /// Forward pass without keeping the tape.
    pub fn predict(&self, x: &Array2<f64>) -> Array2<f64> {
        let tape = Tape::new();
        let vars = self.on_tape(&tape);
        vars.forward(tape.constant(x.clone()))
            .expect("input width matches")
            .value()
    }

    pub fn tensors_mut(&mut self) -> [&mut Array2<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }
}

impl<'t> MlpVars<'t> {
    /// `x` is `m×input`; returns `m×output`.
    pub fn forward(&self, x: Var<'t>) -> Result<Var<'t>> {
        let m = x.shape().0;
        let h = x.matmul(self.w1)?;
        let h = h.add(self.b1.broadcast(m, h.shape().1)?)?.relu();
        let out = h.matmul(self.w2)?;
        out.add(self.b2.broadcast(m, out.shape().1)?)
    }

    /// Gradients in [`Mlp::tensors_mut`] order.
    pub fn grads(&self, g: &Gradients) -> Vec<Array2<f64>> {
        vec![
            g.wrt(self.w1),
            g.wrt(self.b1),
            g.wrt(self.w2),
            g.wrt(self.b2),
        ]
    }
}

/// `h_φ`: item features to a scalar score, shared across positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreModel {
    pub mlp: Mlp,
}

impl ScoreModel {
    pub fn new<R: Rng>(d: usize, hidden: usize, init: OutputInit, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::new(d, hidden, 1, init, rng),
        }
    }

    /// Scores of every row of `features`, as a vector.
    pub fn scores(&self, features: &Array2<f64>) -> Vec<f64> {
        self.mlp.predict(features).into_iter().collect()
    }
}

/// `g_θ`: features of the selected element to a real prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel {
    pub mlp: Mlp,
}

impl RegressorModel {
    pub fn new<R: Rng>(d: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::new(d, hidden, 1, OutputInit::Zero, rng),
        }
    }
}

/// `h_φ`: raw features to an embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub mlp: Mlp,
}

impl EmbeddingModel {
    pub fn new<R: Rng>(input: usize, hidden: usize, dim: usize, rng: &mut R) -> Self {
        Self {
            mlp: Mlp::new(input, hidden, dim, OutputInit::Random, rng),
        }
    }

    pub fn embed(&self, x: &Array2<f64>) -> Array2<f64> {
        self.mlp.predict(x)
    }
}
