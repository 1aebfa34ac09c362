//! Scoring AlignNet and the DTW baseline on held-out distorted clips.

use serde::{Deserialize, Serialize};

use super::data::{EvalCase, AUDIO_PER_VIDEO};
use crate::distortion::warp_to_correspondence;
use crate::dtw::baseline_correspondence;
use crate::error::Result;
use crate::frontend::KeypointSequence;
use crate::metrics::{apply_correspondence, per_keypoint_error, summarize, AlignmentReport};
use crate::model::AlignNet;

fn report(case: &EvalCase, pred: &[f64], gt: &[f64], m: usize) -> Result<AlignmentReport> {
    AlignmentReport::score(
        case.clip.id.clone(),
        pred,
        gt,
        m,
        case.clip.keypoints.fps(),
        AUDIO_PER_VIDEO as f64,
    )
}

/// Network predictions for every case.
pub fn evaluate_model(model: &AlignNet, cases: &[EvalCase]) -> Result<Vec<AlignmentReport>> {
    cases
        .iter()
        .map(|case| {
            let s = case.sample(model.config())?;
            let pred = model.predict(&s.video, &s.audio)?;
            report(case, pred.correspondence(), &s.gt.values, s.audio.cols())
        })
        .collect()
}

/// Same as [`evaluate_model`] plus per-keypoint errors of the re-timed
/// video against the undistorted reference.
pub fn evaluate_model_detailed(
    model: &AlignNet,
    cases: &[EvalCase],
) -> Result<Vec<AlignmentReport>> {
    cases
        .iter()
        .map(|case| {
            let s = case.sample(model.config())?;
            let pred = model.predict(&s.video, &s.audio)?;
            let corr = monotone(pred.correspondence());
            let restored = restore(case, &s.distorted, &corr)?;
            Ok(
                report(case, pred.correspondence(), &s.gt.values, s.audio.cols())?
                    .with_keypoints(per_keypoint_error(&restored, &case.clip.keypoints)?),
            )
        })
        .collect()
}

/// Running maximum, so a slightly non-monotone prediction can still
/// re-time a clip.
fn monotone(corr: &[f64]) -> Vec<f64> {
    let mut out = corr.to_vec();
    for i in 1..out.len() {
        out[i] = out[i].max(out[i - 1]);
    }
    out
}

/// Undoes a distortion: reference frame `j` is read from the distorted
/// video where the correspondence reaches `j`'s normalised time.
fn restore(
    case: &EvalCase,
    distorted: &KeypointSequence,
    corr: &[f64],
) -> Result<KeypointSequence> {
    let n = case.clip.num_frames();
    let inverse: Vec<f64> = (0..n)
        .map(|j| {
            let target = 2.0 * j as f64 / (n - 1) as f64 - 1.0;
            let i = corr.partition_point(|&c| c < target);
            let pos = if i == 0 {
                0.0
            } else if i >= corr.len() {
                (corr.len() - 1) as f64
            } else {
                let (a, b) = (corr[i - 1], corr[i]);
                let f = if b > a { (target - a) / (b - a) } else { 0.0 };
                (i - 1) as f64 + f
            };
            2.0 * pos / (n - 1) as f64 - 1.0
        })
        .collect();
    apply_correspondence(distorted, &inverse, n)
}

/// DTW baseline on the same distorted inputs.
pub fn evaluate_dtw(cases: &[EvalCase]) -> Result<Vec<AlignmentReport>> {
    cases
        .iter()
        .map(|case| {
            let video = case.baseline_features()?;
            let pred = baseline_correspondence(&video, &case.clip.mel, AUDIO_PER_VIDEO)?;
            let gt = warp_to_correspondence(
                &case.warp,
                case.clip.num_frames(),
                case.clip.mel.n_frames(),
            );
            report(case, &pred, &gt.values, case.clip.mel.n_frames())
        })
        .collect()
}

/// Uncorrected input: the distorted video taken as already in sync.
pub fn evaluate_identity(cases: &[EvalCase]) -> Result<Vec<AlignmentReport>> {
    cases
        .iter()
        .map(|case| {
            let n = case.clip.num_frames();
            let gt = warp_to_correspondence(&case.warp, n, case.clip.mel.n_frames());
            let pred: Vec<f64> = (0..n)
                .map(|i| 2.0 * i as f64 / (n - 1) as f64 - 1.0)
                .collect();
            report(case, &pred, &gt.values, case.clip.mel.n_frames())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    /// Mean AFE in audio frames.
    pub afe: f64,
    pub afe_video: f64,
    pub accuracy: f64,
}

impl TableRow {
    pub fn from_reports(method: impl Into<String>, reports: &[AlignmentReport]) -> Self {
        let (afe, accuracy) = summarize(reports);
        let n = reports.len().max(1) as f64;
        Self {
            method: method.into(),
            afe,
            afe_video: reports.iter().map(|r| r.afe_video_frames).sum::<f64>() / n,
            accuracy,
        }
    }
}

/// Markdown table of method × (AFE, accuracy).
pub fn format_table(rows: &[TableRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.method.len())
        .max()
        .unwrap_or(6)
        .max(6);
    let mut out = format!(
        "| {:<width$} | AFE (audio fr.) | AFE (video fr.) | Accuracy (%) |\n|{}|-----------------|-----------------|--------------|\n",
        "Method",
        "-".repeat(width + 2)
    );
    for r in rows {
        out.push_str(&format!(
            "| {:<width$} | {:>15.3} | {:>15.3} | {:>12.2} |\n",
            r.method, r.afe, r.afe_video, r.accuracy
        ));
    }
    out
}
