//! File-level alignment, baseline alignment and attention export.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::data::{video_input, Clip, AUDIO_PER_VIDEO};
use crate::dtw::baseline_correspondence;
use crate::error::{Error, Result};
use crate::frontend::{
    clean_keypoints, features, io, log_mel_raw, onset_envelope, CleanConfig, FeatureKind,
    LogMelConfig,
};
use crate::metrics::denorm;
use crate::model::layers::{temporal_attention, Conv, GateConvs};
use crate::model::AlignNet;
use crate::tensor::{Graph, Tensor};

/// Reads a keypoint file and a WAV file into a clip, optionally cleaning
/// the keypoints first.
pub fn load_pair(keypoints: &Path, audio: &Path, clean: bool) -> Result<Clip> {
    let mut kps = io::read_keypoints(keypoints)?;
    if clean {
        kps = clean_keypoints(&kps, &CleanConfig::default())?;
    }
    let (wav, sr) = io::read_wav(audio)?;
    let id = keypoints
        .file_stem()
        .map_or_else(|| "clip".to_string(), |s| s.to_string_lossy().into_owned());
    Clip::from_raw(id, &kps, &wav, sr, Vec::new())
}

/// One row per video frame: index, normalised audio position, fractional
/// audio frame and time in seconds.
pub fn write_alignment_csv(
    path: &Path,
    corr: &[f64],
    m_audio: usize,
    hop_seconds: f64,
) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "frame_index,normalized_value,audio_frame,time_seconds")?;
    for (i, &v) in corr.iter().enumerate() {
        let j = denorm(v, m_audio);
        writeln!(f, "{i},{v},{j},{}", j * hop_seconds)?;
    }
    Ok(())
}

/// Predicted correspondence of a clip.
pub fn align_clip(model: &AlignNet, clip: &Clip) -> Result<Vec<f64>> {
    let cfg = model.config();
    if clip.keypoints.layout() != cfg.layout {
        return Err(Error::InvalidArgument(format!(
            "keypoints use layout {} but the checkpoint expects {}",
            clip.keypoints.layout().name(),
            cfg.layout.name()
        )));
    }
    let video = video_input(&clip.keypoints, cfg.video_feature_kind())?;
    Ok(model
        .predict(&video, &clip.mel.values)?
        .levels
        .swap_remove(0))
}

pub fn align_files(
    model: &AlignNet,
    keypoints: &Path,
    audio: &Path,
    out_csv: &Path,
    clean: bool,
) -> Result<Vec<f64>> {
    let clip = load_pair(keypoints, audio, clean)?;
    let corr = align_clip(model, &clip)?;
    write_alignment_csv(out_csv, &corr, clip.mel.n_frames(), clip.mel.hop_seconds)?;
    Ok(corr)
}

pub fn dtw_files(keypoints: &Path, audio: &Path, out_csv: &Path, clean: bool) -> Result<Vec<f64>> {
    let clip = load_pair(keypoints, audio, clean)?;
    let video = features(&clip.keypoints, FeatureKind::Velocity)?;
    let corr = baseline_correspondence(&video, &clip.mel, AUDIO_PER_VIDEO)?;
    write_alignment_csv(out_csv, &corr, clip.mel.n_frames(), clip.mel.hop_seconds)?;
    Ok(corr)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassAttention {
    pub class: usize,
    pub keypoints: Vec<String>,
    /// Softmax weight of each member keypoint.
    pub weight: f64,
    /// Total weight of the class; the masses sum to one.
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalAttention {
    pub hop_seconds: f64,
    pub gates: Vec<f64>,
    /// Spectral flux of the raw log-mel spectrogram.
    pub onset_envelope: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionExport {
    pub keypoint: Option<Vec<ClassAttention>>,
    pub temporal: Option<TemporalAttention>,
}

impl AttentionExport {
    /// `frame,time,gate,onset` rows of the temporal part.
    pub fn temporal_csv(&self) -> Option<String> {
        let t = self.temporal.as_ref()?;
        let mut out = String::from("frame,time_seconds,gate,onset\n");
        for (j, (g, o)) in t.gates.iter().zip(&t.onset_envelope).enumerate() {
            out.push_str(&format!("{j},{},{g},{o}\n", j as f64 * t.hop_seconds));
        }
        Some(out)
    }
}

/// Temporal gates of the model over a standardised spectrogram.
pub fn temporal_gates(model: &AlignNet, mel: &Tensor) -> Result<Vec<f64>> {
    let p = model.params();
    let mut g = Graph::new();
    let mut conv = |prefix: &str| -> Result<Conv> {
        Ok(Conv {
            w: g.constant(p.get(&format!("{prefix}.w"))?.clone()),
            b: Some(g.constant(p.get(&format!("{prefix}.b"))?.clone())),
        })
    };
    let convs = GateConvs {
        c1: conv("ta.c1")?,
        c2: conv("ta.c2")?,
    };
    let x = g.constant(mel.clone());
    let (_, gates) = temporal_attention(&mut g, x, &convs, model.config().leaky_slope)?;
    Ok(g.value(gates).data().to_vec())
}

/// Per-keypoint softmax weights (summing to one).
pub fn keypoint_softmax(model: &AlignNet) -> Result<Vec<f64>> {
    let layout = model.config().layout;
    let logits = model.params().get("ka.w")?.data().to_vec();
    let per_kp: Vec<f64> = layout
        .symmetry_classes()?
        .iter()
        .map(|&c| logits[c])
        .collect();
    let max = per_kp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = per_kp.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exp.iter().sum();
    Ok(exp.into_iter().map(|e| e / z).collect())
}

/// Keypoint attention per symmetry class and, given audio, temporal gates
/// next to the onset envelope. Audio is framed at three frames per video
/// frame of `fps`.
pub fn export_attention(
    model: &AlignNet,
    audio: Option<(&[f64], f64)>,
    fps: f64,
) -> Result<AttentionExport> {
    let cfg = model.config();
    if !cfg.ablation.ka && !cfg.ablation.ta {
        return Err(Error::Config(
            "checkpoint has neither keypoint nor temporal attention".into(),
        ));
    }
    let keypoint = if cfg.ablation.ka {
        let weights = keypoint_softmax(model)?;
        let classes = cfg.layout.symmetry_classes()?;
        let n_classes = cfg.layout.num_symmetry_classes()?;
        Some(
            (0..n_classes)
                .map(|c| {
                    let members: Vec<usize> =
                        (0..classes.len()).filter(|&k| classes[k] == c).collect();
                    ClassAttention {
                        class: c,
                        keypoints: members
                            .iter()
                            .map(|&k| cfg.layout.keypoint_name(k))
                            .collect(),
                        weight: weights[members[0]],
                        mass: members.iter().map(|&k| weights[k]).sum(),
                    }
                })
                .collect(),
        )
    } else {
        None
    };
    let temporal = match audio {
        None => None,
        Some(_) if !cfg.ablation.ta => {
            return Err(Error::Config("checkpoint has no temporal attention".into()))
        }
        Some((wav, sr)) => {
            let hop = 1.0 / (AUDIO_PER_VIDEO as f64 * fps);
            let raw = log_mel_raw(wav, &LogMelConfig::new(sr, hop))?;
            let gates = temporal_gates(model, &raw.standardized().values)?;
            Some(TemporalAttention {
                hop_seconds: hop,
                gates,
                onset_envelope: onset_envelope(&raw),
            })
        }
    };
    Ok(AttentionExport { keypoint, temporal })
}
