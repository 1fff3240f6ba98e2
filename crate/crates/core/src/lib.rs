// `!(a <= b)` is used deliberately so NaN fails comparisons.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Optimal-ray structure of logistic and exponential risk.
//!
//! Given a labeled dataset this crate splits the margin matrix into its
//! separable rows and its strongly convex remainder, solves the max-margin
//! direction `ū` and the bounded optimum `v̄`, runs gradient descent, and checks
//! the trajectory against the known risk, norm and direction bounds.

pub mod cli;
pub mod dataset;
pub mod decompose;
pub mod error;
pub mod gd;
pub mod linalg;
pub mod lp;
pub mod margin;
pub mod scvx;
pub mod verify;

mod json_float;

pub use dataset::{synth, Dataset, MarginMatrix, SynthKind};
pub use decompose::{partition, Decomposition};
pub use error::{Error, Result};
pub use gd::{GdTrace, LossKind, RunOptions, Schedule};
pub use margin::MarginSolution;
pub use scvx::ScOptimum;
