//! Clips, datasets on disk and per-step training samples.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::synth::{synth_pair, SynthConfig};
use crate::distortion::{apply_warp, DistortionConfig, GroundTruthCorrespondence, WarpFunction};
use crate::error::{Error, Result};
use crate::frontend::{
    features, hflip, io, log_mel, normalize_pose, spec_augment, FeatureKind, KeypointSequence,
    LogMelConfig, MelSpectrogram, MotionFeatures, SpecAugmentConfig,
};
use crate::model::AlignNetConfig;
use crate::tensor::Tensor;

/// Audio frames per video frame.
pub const AUDIO_PER_VIDEO: usize = 3;

pub const MANIFEST_FILE: &str = "dataset.json";

/// An aligned pair after preprocessing: normalised pose and standardised
/// log-mel at three frames per video frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    pub id: String,
    pub keypoints: KeypointSequence,
    pub mel: MelSpectrogram,
    /// Beat onsets in seconds, when known.
    pub beats: Vec<f64>,
}

impl Clip {
    pub fn from_raw(
        id: impl Into<String>,
        keypoints: &KeypointSequence,
        audio: &[f64],
        sample_rate: f64,
        beats: Vec<f64>,
    ) -> Result<Self> {
        let hop = 1.0 / (AUDIO_PER_VIDEO as f64 * keypoints.fps());
        Ok(Self {
            id: id.into(),
            keypoints: normalize_pose(keypoints)?,
            mel: log_mel(audio, &LogMelConfig::new(sample_rate, hop))?,
            beats,
        })
    }

    pub fn synthetic(seed: u64, cfg: &SynthConfig) -> Result<Self> {
        let pair = synth_pair(seed, cfg)?;
        Self::from_raw(
            format!("synth_{seed:06}"),
            &pair.keypoints,
            &pair.audio,
            pair.sample_rate as f64,
            pair.beats,
        )
    }

    pub fn num_frames(&self) -> usize {
        self.keypoints.num_frames()
    }

    /// Audio frames nearest to each beat onset.
    pub fn onset_audio_frames(&self) -> Vec<usize> {
        self.beats
            .iter()
            .map(|b| (b / self.mel.hop_seconds).round() as usize)
            .filter(|&j| j < self.mel.n_frames())
            .collect()
    }
}

/// Per-clip z-scored motion features, `[C × T]`.
pub fn video_input(kps: &KeypointSequence, kind: FeatureKind) -> Result<Tensor> {
    let mut f = features(kps, kind)?.data;
    let n = f.numel() as f64;
    let mean = f.data().iter().sum::<f64>() / n;
    let sd = (f.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    for v in f.data_mut() {
        *v = if sd > 1e-12 { (*v - mean) / sd } else { 0.0 };
    }
    Ok(f)
}

/// One distorted training or evaluation example.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub video: Tensor,
    pub audio: Tensor,
    pub gt: GroundTruthCorrespondence,
    pub warp: WarpFunction,
    pub distorted: KeypointSequence,
}

/// Options for turning a clip into a sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Augment {
    pub distortion: DistortionConfig,
    pub flip: bool,
    pub spec_augment: Option<SpecAugmentConfig>,
}

/// Warps the video side of `clip` (and optionally mirrors it and masks the
/// spectrogram), returning model inputs and ground truth per level.
pub fn make_sample<R: Rng>(
    clip: &Clip,
    model: &AlignNetConfig,
    aug: &Augment,
    rng: &mut R,
) -> Result<Sample> {
    let warp = aug.distortion.sample(rng)?;
    make_sample_with_warp(clip, model, warp, aug, rng)
}

pub fn make_sample_with_warp<R: Rng>(
    clip: &Clip,
    model: &AlignNetConfig,
    warp: WarpFunction,
    aug: &Augment,
    rng: &mut R,
) -> Result<Sample> {
    let n = clip.num_frames();
    let mut distorted = apply_warp(&clip.keypoints, &warp, n)?;
    if aug.flip && rng.gen_bool(0.5) {
        distorted = hflip(&distorted)?;
    }
    let mel = match &aug.spec_augment {
        Some(sa) => spec_augment(&clip.mel, sa, rng).0,
        None => clip.mel.clone(),
    };
    let lengths = model.level_lengths(n);
    let gt = GroundTruthCorrespondence::from_warp(&warp, n, mel.n_frames(), &lengths[1..]);
    Ok(Sample {
        video: video_input(&distorted, model.video_feature_kind())?,
        audio: mel.values,
        gt,
        warp,
        distorted,
    })
}

/// Held-out example with a fixed distortion.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalCase {
    pub clip: Clip,
    pub warp: WarpFunction,
}

impl EvalCase {
    pub fn new(clip: Clip, distortion: &DistortionConfig, seed: u64) -> Result<Self> {
        let warp = distortion.sample(&mut ChaCha8Rng::seed_from_u64(seed))?;
        Ok(Self { clip, warp })
    }

    pub fn sample(&self, model: &AlignNetConfig) -> Result<Sample> {
        let aug = Augment {
            distortion: DistortionConfig::default(),
            flip: false,
            spec_augment: None,
        };
        // No randomness is drawn without flip or masking.
        make_sample_with_warp(
            &self.clip,
            model,
            self.warp.clone(),
            &aug,
            &mut ChaCha8Rng::seed_from_u64(0),
        )
    }

    /// Velocity features of the distorted video for the DTW baseline.
    pub fn baseline_features(&self) -> Result<MotionFeatures> {
        let distorted = apply_warp(&self.clip.keypoints, &self.warp, self.clip.num_frames())?;
        features(&distorted, FeatureKind::Velocity)
    }
}

/// A synthetic dataset description: clip seeds plus distortion seeds of
/// the held-out part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub synth: SynthConfig,
    pub distortion: DistortionConfig,
    pub train: Vec<ClipEntry>,
    pub test: Vec<ClipEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub id: String,
    pub keypoints: String,
    pub audio: String,
    pub beats: Vec<f64>,
    /// Seed of the fixed distortion, for held-out clips.
    pub distortion_seed: Option<u64>,
}

/// Writes `train + test` synthetic pairs as keypoint JSONL and WAV files
/// plus a manifest.
pub fn write_synthetic_dataset(
    dir: &Path,
    synth: &SynthConfig,
    distortion: &DistortionConfig,
    train: usize,
    test: usize,
    seed: u64,
) -> Result<DatasetManifest> {
    fs::create_dir_all(dir)?;
    let entry = |i: usize, held_out: bool| -> Result<ClipEntry> {
        let clip_seed = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let pair = synth_pair(clip_seed, synth)?;
        let id = format!("clip_{i:05}");
        let keypoints = format!("{id}.jsonl");
        let audio = format!("{id}.wav");
        io::write_keypoints(&dir.join(&keypoints), &pair.keypoints)?;
        io::write_wav(&dir.join(&audio), &pair.audio, pair.sample_rate)?;
        Ok(ClipEntry {
            id,
            keypoints,
            audio,
            beats: pair.beats,
            distortion_seed: held_out.then_some(clip_seed ^ 0x5eed),
        })
    };
    let n_train = train;
    let train = (0..n_train)
        .map(|i| entry(i, false))
        .collect::<Result<_>>()?;
    let test = (n_train..n_train + test)
        .map(|i| entry(i, true))
        .collect::<Result<_>>()?;
    let manifest = DatasetManifest {
        synth: synth.clone(),
        distortion: distortion.clone(),
        train,
        test,
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_clip(dir: &Path, entry: &ClipEntry) -> Result<Clip> {
    let kps = io::read_keypoints(&dir.join(&entry.keypoints))?;
    let (audio, sr) = io::read_wav(&dir.join(&entry.audio))?;
    Clip::from_raw(entry.id.clone(), &kps, &audio, sr, entry.beats.clone())
}

/// Training clips and held-out cases of a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<(Vec<Clip>, Vec<EvalCase>)> {
    let manifest = read_manifest(dir)?;
    let train = manifest
        .train
        .iter()
        .map(|e| load_clip(dir, e))
        .collect::<Result<_>>()?;
    let test = manifest
        .test
        .iter()
        .map(|e| {
            let seed = e.distortion_seed.ok_or_else(|| {
                Error::Config(format!("held-out clip {} has no distortion seed", e.id))
            })?;
            EvalCase::new(load_clip(dir, e)?, &manifest.distortion, seed)
        })
        .collect::<Result<_>>()?;
    Ok((train, test))
}
