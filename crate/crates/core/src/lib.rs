//! Fully synthetic tabular data via sequential (FCS) and joint synthesis,
//! with confidence-interval overlap, KL divergence and analysis-accuracy
//! utility evaluation.

pub mod accuracy;
pub mod data;
pub mod error;
pub mod estimand;
pub mod fit;
pub mod fixtures;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
