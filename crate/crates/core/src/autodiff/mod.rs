//! Minimal reverse-mode automatic differentiation over dense 2-D arrays.
//!
//! Scalars are `1×1`, vectors are `n×1` columns unless stated otherwise.
//! Operations record nodes on a [`Tape`]; [`Tape::backward`] from a scalar
//! root returns the adjoint of every node.
//!
//! ```
//! use ndarray::array;
//! use unisort::autodiff::Tape;
//!
//! let tape = Tape::new();
//! let x = tape.var(array![[3.0]]);
//! let y = x.square();
//! let g = y.backward().unwrap();
//! assert_eq!(g.wrt(x), array![[6.0]]);
//! ```
//!
//! Subgradient conventions: `abs'(0) = 0`, `relu'(0) = 0`, and `clamp_min`
//! passes no gradient through clamped entries.

mod gradcheck;
mod ops;
mod sort;
mod tape;

pub use gradcheck::{finite_diff_gradient, relative_error};
pub use sort::relaxed_sort_var;
pub use tape::{Gradients, NodeId, Tape, Var};
