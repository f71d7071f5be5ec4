//! Voice activity detection with a denoising deep network and
//! feature-based domain adaptation between noisy corpora.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod network;
pub mod signal;
pub mod transfer;

pub use error::{Error, Result};
