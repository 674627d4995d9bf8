//! Distribution-aware training objective for imbalanced regression.
//!
//! The objective adds to an ordinary regression error a term that compares
//! the sorted prediction batch against deterministic pseudo-labels drawn from
//! the (KDE-smoothed) training label distribution. Sorting is made
//! differentiable by projecting onto the permutation polytope.
//!
//! The crate also carries what is needed to exercise the objective end to
//! end: a small MLP with Adam, synthetic imbalanced datasets, shot-region
//! evaluation, and the run orchestration used by the `distloss` binary.

pub mod dataset;
pub mod error;
pub mod evaluation;
mod io;
pub mod label_space;
pub mod loss;
pub mod nnet;
pub mod pseudo;
pub mod rng;
pub mod run;
pub mod softsort;

pub use error::{Error, Result};
