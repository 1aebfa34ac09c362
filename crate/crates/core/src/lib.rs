//! AlignNet: dense audio-visual temporal alignment.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`]: dense `f64` arrays, a per-pass autodiff tape and Adam.
//! * [`frontend`]: keypoint cleaning/normalisation, motion features,
//!   log-mel spectrograms and training augmentations.
//! * [`distortion`]: random monotonic time warps and exact ground truth.
//! * [`model`]: attention, feature pyramids, warping, affinity, prediction
//!   heads and losses.
//! * [`dtw`]: the dynamic time warping baseline.
//! * [`metrics`]: AFE, ITU-window accuracy, per-keypoint errors and
//!   correspondence application.
//! * [`pipeline`]: synthetic data, training, evaluation and exports used by
//!   the CLI.

pub mod distortion;
pub mod dtw;
pub mod error;
pub mod frontend;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
