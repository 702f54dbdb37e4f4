//! # unisort
//!
//! A continuous relaxation of the sorting operator and the machinery built
//! around it.
//!
//! The exact operator maps a score vector `s` to the permutation `z` that
//! orders it descendingly, or equivalently to the 0/1 matrix `P_z` with
//! `P_z[i, z_i] = 1`. The relaxation replaces each row's argmax with a
//! temperature-controlled softmax:
//!
//! ```text
//! P̂[i, :] = softmax(((n + 1 - 2i)·s - A_s·1) / τ),   A_s[i, j] = |s_i - s_j|
//! ```
//!
//! The result is a unimodal row-stochastic matrix whose row argmaxes recover
//! the exact sort for every `τ > 0`, and which converges to `P_sort(s)` as
//! `τ → 0`.
//!
//! ## Modules
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`relaxation`] | exact sort, relaxed sort, hard projection, top-k identities, matrix classes |
//! | [`autodiff`] | tape-based reverse mode AD and a finite-difference oracle |
//! | [`pl`] | Plackett-Luce pmf, Gumbel sampling, REINFORCE / reparameterized / straight-through estimators |
//! | [`losses`] | row cross-entropy, kNN loss, squared error (eager and on the tape) |
//! | [`tasks`] | synthetic sorting, median regression and kNN training runs, variance sweep |
//! | [`validate`] | the oracle suite behind `unisort validate` |
//! | [`cli`] | command-line front end |
//!
//! ## Quick start
//!
//! ```
//! use unisort::relaxation::{relaxed_sort, sort_permutation, ScoreVector, Temperature};
//!
//! let s = ScoreVector::new(vec![9.0, 1.0, 5.0, 2.0]).unwrap();
//! assert_eq!(sort_permutation(&s).as_slice(), &[1, 3, 4, 2]);
//!
//! let p_hat = relaxed_sort(&s, Temperature::new(0.1).unwrap());
//! assert_eq!(p_hat.project_hard().as_slice(), &[1, 3, 4, 2]);
//! ```
//!
//! Indices in the public data model are 1-based.

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod losses;
pub mod pl;
pub mod relaxation;
pub mod rng;
pub mod tasks;
pub mod validate;

pub use error::{Error, Result};
