//! Alignment metrics and correspondence application.

use serde::{Deserialize, Serialize};

use crate::distortion::{lerp, lerp_index, resample_keypoints};
use crate::error::{Error, Result};
use crate::frontend::KeypointSequence;

/// Largest accepted audio lag (reconstructed event later than truth).
pub const ITU_LAG_MS: f64 = 125.0;
/// Largest accepted audio lead.
pub const ITU_LEAD_MS: f64 = 45.0;
/// Slack for floating-point noise when testing the inclusive bounds.
const BOUNDARY_EPS_MS: f64 = 1e-9;

/// Normalised position to audio frame index.
pub fn denorm(v: f64, m_audio: usize) -> f64 {
    (v + 1.0) / 2.0 * (m_audio - 1) as f64
}

fn check_lengths(op: &'static str, pred: &[f64], gt: &[f64]) -> Result<()> {
    if pred.len() != gt.len() || pred.is_empty() {
        return Err(Error::LengthMismatch {
            op,
            expected: gt.len(),
            actual: pred.len(),
        });
    }
    Ok(())
}

/// Average frame error in audio frames.
pub fn afe(pred: &[f64], gt: &[f64], m_audio: usize) -> Result<f64> {
    check_lengths("afe", pred, gt)?;
    let total: f64 = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| (denorm(*p, m_audio) - denorm(*g, m_audio)).abs())
        .sum();
    Ok(total / pred.len() as f64)
}

/// Per-frame signed error in milliseconds, positive when audio lags.
pub fn errors_ms(pred: &[f64], gt: &[f64], m_audio: usize, audio_fps: f64) -> Result<Vec<f64>> {
    check_lengths("errors_ms", pred, gt)?;
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(p, g)| (denorm(*p, m_audio) - denorm(*g, m_audio)) / audio_fps * 1000.0)
        .collect())
}

pub fn within_itu_window(error_ms: f64) -> bool {
    error_ms >= -ITU_LEAD_MS - BOUNDARY_EPS_MS && error_ms <= ITU_LAG_MS + BOUNDARY_EPS_MS
}

/// Percentage of frames whose error lies in `[−45, 125]` ms, inclusive.
pub fn itu_accuracy(pred: &[f64], gt: &[f64], m_audio: usize, audio_fps: f64) -> Result<f64> {
    if !(audio_fps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "audio fps must be positive, got {audio_fps}"
        )));
    }
    let errs = errors_ms(pred, gt, m_audio, audio_fps)?;
    let ok = errs.iter().filter(|&&e| within_itu_window(e)).count();
    Ok(100.0 * ok as f64 / errs.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeypointError {
    pub keypoint: usize,
    pub name: String,
    pub location_l1: f64,
    pub velocity_l1: f64,
}

fn velocities(kps: &KeypointSequence, k: usize) -> Vec<[f64; 2]> {
    let t_len = kps.num_frames();
    let mut v: Vec<[f64; 2]> = (0..t_len)
        .map(|t| {
            if t == 0 {
                [0.0, 0.0]
            } else {
                let (a, b) = (kps.point(t - 1, k), kps.point(t, k));
                [b[0] - a[0], b[1] - a[1]]
            }
        })
        .collect();
    v[0] = v[1];
    v
}

/// Mean L1 location and velocity error per keypoint. Velocities of both
/// sequences are divided by the reference's largest absolute velocity
/// component so they lie in `[−1, 1]`.
pub fn per_keypoint_error(
    aligned: &KeypointSequence,
    reference: &KeypointSequence,
) -> Result<Vec<KeypointError>> {
    if aligned.layout() != reference.layout() {
        return Err(Error::InvalidArgument(format!(
            "layout mismatch: {} vs {}",
            aligned.layout().name(),
            reference.layout().name()
        )));
    }
    if aligned.num_frames() != reference.num_frames() {
        return Err(Error::LengthMismatch {
            op: "per_keypoint_error",
            expected: reference.num_frames(),
            actual: aligned.num_frames(),
        });
    }
    let k_len = reference.num_keypoints();
    let t_len = reference.num_frames() as f64;
    let ref_v: Vec<Vec<[f64; 2]>> = (0..k_len).map(|k| velocities(reference, k)).collect();
    let vmax = ref_v
        .iter()
        .flatten()
        .flat_map(|v| [v[0].abs(), v[1].abs()])
        .fold(0.0, f64::max);
    let vscale = if vmax > 0.0 { 1.0 / vmax } else { 1.0 };
    Ok((0..k_len)
        .map(|k| {
            let loc: f64 = (0..reference.num_frames())
                .map(|t| {
                    let (a, r) = (aligned.point(t, k), reference.point(t, k));
                    (a[0] - r[0]).abs() + (a[1] - r[1]).abs()
                })
                .sum();
            let vel: f64 = velocities(aligned, k)
                .iter()
                .zip(&ref_v[k])
                .map(|(a, r)| ((a[0] - r[0]).abs() + (a[1] - r[1]).abs()) * vscale)
                .sum();
            KeypointError {
                keypoint: k,
                name: reference.layout().keypoint_name(k),
                location_l1: loc / t_len,
                velocity_l1: vel / t_len,
            }
        })
        .collect())
}

/// First index where `corr` decreases.
pub fn check_monotone(corr: &[f64]) -> Result<()> {
    for (i, pair) in corr.windows(2).enumerate() {
        if pair[1] < pair[0] {
            return Err(Error::NonMonotone {
                index: i + 1,
                prev: pair[0],
                next: pair[1],
            });
        }
    }
    Ok(())
}

/// Linear resampling of a correspondence vector to `len` entries with the
/// end points kept fixed.
pub fn resample_correspondence(corr: &[f64], len: usize) -> Vec<f64> {
    if corr.len() == len {
        return corr.to_vec();
    }
    (0..len)
        .map(|i| {
            let pos = if len > 1 {
                i as f64 * (corr.len() - 1) as f64 / (len - 1) as f64
            } else {
                0.0
            };
            let (a, b, f) = lerp_index(pos, corr.len());
            lerp(corr[a], corr[b], f)
        })
        .collect()
}

/// Re-times `seq`: output frame `i` samples `seq` at normalised position
/// `corr_i` (resampled to `target_len` entries), i.e. at fractional frame
/// `(corr_i + 1) / 2 · (T − 1)`.
pub fn apply_correspondence(
    seq: &KeypointSequence,
    corr: &[f64],
    target_len: usize,
) -> Result<KeypointSequence> {
    check_monotone(corr)?;
    if target_len < 2 || corr.is_empty() {
        return Err(Error::TooShort(format!(
            "target length {target_len} from {} correspondence values",
            corr.len()
        )));
    }
    let corr = resample_correspondence(corr, target_len);
    let positions: Vec<f64> = corr.iter().map(|&c| denorm(c, seq.num_frames())).collect();
    resample_keypoints(seq, &positions)
}

/// Same as [`apply_correspondence`] for a plain series.
pub fn apply_correspondence_series(
    values: &[f64],
    corr: &[f64],
    target_len: usize,
) -> Result<Vec<f64>> {
    check_monotone(corr)?;
    let corr = resample_correspondence(corr, target_len);
    Ok(corr
        .iter()
        .map(|&c| {
            let (a, b, f) = lerp_index(denorm(c, values.len()), values.len());
            lerp(values[a], values[b], f)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub clip_id: String,
    /// Average frame error in audio frames.
    pub afe_frames: f64,
    /// The same error in video frames.
    pub afe_video_frames: f64,
    pub itu_accuracy_pct: f64,
    pub per_keypoint: Vec<KeypointError>,
    pub fps: f64,
}

impl AlignmentReport {
    /// Scores `pred` against `gt` for a clip whose audio runs at
    /// `audio_per_video` frames per video frame.
    pub fn score(
        clip_id: impl Into<String>,
        pred: &[f64],
        gt: &[f64],
        m_audio: usize,
        fps: f64,
        audio_per_video: f64,
    ) -> Result<Self> {
        let afe_frames = afe(pred, gt, m_audio)?;
        Ok(Self {
            clip_id: clip_id.into(),
            afe_frames,
            afe_video_frames: afe_frames / audio_per_video,
            itu_accuracy_pct: itu_accuracy(pred, gt, m_audio, fps * audio_per_video)?,
            per_keypoint: Vec::new(),
            fps,
        })
    }

    pub fn with_keypoints(mut self, errors: Vec<KeypointError>) -> Self {
        self.per_keypoint = errors;
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec![
            "clip_id".to_string(),
            "afe".into(),
            "afe_video".into(),
            "accuracy".into(),
        ];
        for e in &self.per_keypoint {
            cols.push(format!("loc_{}", e.name));
            cols.push(format!("vel_{}", e.name));
        }
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            self.clip_id.clone(),
            self.afe_frames.to_string(),
            self.afe_video_frames.to_string(),
            self.itu_accuracy_pct.to_string(),
        ];
        for e in &self.per_keypoint {
            cols.push(e.location_l1.to_string());
            cols.push(e.velocity_l1.to_string());
        }
        cols.join(",")
    }
}

/// Mean AFE and accuracy over a set of reports.
pub fn summarize(reports: &[AlignmentReport]) -> (f64, f64) {
    let n = reports.len().max(1) as f64;
    (
        reports.iter().map(|r| r.afe_frames).sum::<f64>() / n,
        reports.iter().map(|r| r.itu_accuracy_pct).sum::<f64>() / n,
    )
}
