//! Synthetic data, training, evaluation and exports.

pub mod data;
pub mod eval;
pub mod export;
pub mod synth;
pub mod train;
