//! The alignment network: keypoint and temporal attention, twin feature
//! pyramids, coarse-to-fine warping, affinity maps, correspondence heads
//! and losses.

mod config;
pub mod layers;
pub mod loss;
mod network;

pub use config::{Ablation, AlignNetConfig};
pub use layers::{
    affinity, build_pyramid, head_channels, keypoint_attention, predict_level, temporal_attention,
    warp_features,
};
pub use loss::{loss_fs, loss_mono, mono_margin, total_loss};
pub use network::{AlignNet, Bound, Forward, LossValues, LossVars, Prediction, CONFIG_FILE};
