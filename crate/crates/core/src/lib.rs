//! Scanning single-pixel camera simulation with online adaptive sample selection.
//!
//! A scan produces an ordered [`SampleStream`](scanner::SampleStream). The
//! [`sauce`] module scores each sample from its change in scan position and
//! intensity, then picks an exact-budget subset of samples for a downstream
//! task. Baseline samplers, reconstruction metrics, a linear proxy task,
//! parameter fitting and a two-stage coarse-to-fine pipeline sit around it.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod fit;
pub mod format;
pub mod image;
pub mod mask;
pub mod optim;
pub mod pipeline;
pub mod reconstruct;
pub mod sauce;
pub mod scanner;
pub mod stats;
pub mod taskproxy;
pub mod twostage;

pub use error::{Error, Result};
