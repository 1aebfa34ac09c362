//! Keypoint cleaning and normalisation, motion features, log-mel
//! spectrograms and training augmentations.

mod augment;
mod clean;
pub mod io;
mod keypoints;
mod mel;
mod pose;

pub use augment::{apply_masks, sample_masks, spec_augment, Mask, MaskAxis, SpecAugmentConfig};
pub use clean::{clean_keypoints, fill_missing, median, savgol, CleanConfig, SavitzkyGolay};
pub use keypoints::{KeypointSequence, Layout, POSE19_MID_HIP, POSE19_NAMES};
pub use mel::{
    decimate, frame_count, hann, hz_to_mel, log_mel, log_mel_raw, mel_center_hz, mel_edges_hz,
    mel_filterbank, mel_to_hz, onset_envelope, windowed_frame, LogMelConfig, MelSpectrogram,
    LOG_FLOOR, N_MELS,
};
pub use pose::{
    features, hflip, keypoint_of_channel, motion_features, normalize_pose, FeatureKind,
    MotionFeatures,
};
