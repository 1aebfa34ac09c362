use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mel::MelSpectrogram;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskAxis {
    Time,
    Frequency,
}

/// A contiguous span of frames or bins, `start..start + width`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub axis: MaskAxis,
    pub start: usize,
    pub width: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecAugmentConfig {
    pub time_masks: usize,
    pub max_t: usize,
    pub freq_masks: usize,
    pub max_f: usize,
}

impl Default for SpecAugmentConfig {
    fn default() -> Self {
        Self {
            time_masks: 2,
            max_t: 12,
            freq_masks: 2,
            max_f: 16,
        }
    }
}

/// Draws mask spans. Widths are uniform in `0..=max` (clamped to the axis
/// length) and starts uniform over the positions where the span fits.
pub fn sample_masks<R: Rng>(
    n_mels: usize,
    n_frames: usize,
    cfg: &SpecAugmentConfig,
    rng: &mut R,
) -> Vec<Mask> {
    let mut draw = |axis, len: usize, max: usize| {
        let width = rng.gen_range(0..=max.min(len));
        let start = rng.gen_range(0..=len - width);
        Mask { axis, start, width }
    };
    let mut masks = Vec::with_capacity(cfg.time_masks + cfg.freq_masks);
    for _ in 0..cfg.time_masks {
        masks.push(draw(MaskAxis::Time, n_frames, cfg.max_t));
    }
    for _ in 0..cfg.freq_masks {
        masks.push(draw(MaskAxis::Frequency, n_mels, cfg.max_f));
    }
    masks
}

/// Sets every masked row or column to the clip mean of the input.
pub fn apply_masks(mel: &MelSpectrogram, masks: &[Mask]) -> MelSpectrogram {
    let fill = mel.mean();
    let (rows, cols) = (mel.n_mels(), mel.n_frames());
    let mut data = mel.values.data().to_vec();
    for m in masks {
        match m.axis {
            MaskAxis::Time => {
                for r in 0..rows {
                    for c in m.start..(m.start + m.width).min(cols) {
                        data[r * cols + c] = fill;
                    }
                }
            }
            MaskAxis::Frequency => {
                for r in m.start..(m.start + m.width).min(rows) {
                    data[r * cols..(r + 1) * cols].fill(fill);
                }
            }
        }
    }
    MelSpectrogram {
        values: Tensor::new(vec![rows, cols], data).expect("same shape"),
        hop_seconds: mel.hop_seconds,
        normalized: mel.normalized,
    }
}

/// Random time and frequency masking; returns the masks that were applied.
pub fn spec_augment<R: Rng>(
    mel: &MelSpectrogram,
    cfg: &SpecAugmentConfig,
    rng: &mut R,
) -> (MelSpectrogram, Vec<Mask>) {
    let masks = sample_masks(mel.n_mels(), mel.n_frames(), cfg, rng);
    (apply_masks(mel, &masks), masks)
}
