//! Training with online distortion.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{make_sample, Augment, Clip, EvalCase};
use super::eval::evaluate_model;
use crate::distortion::DistortionConfig;
use crate::error::{Error, Result};
use crate::frontend::SpecAugmentConfig;
use crate::metrics::summarize;
use crate::model::{AlignNet, AlignNetConfig};
use crate::tensor::AdamConfig;

pub const TRAIN_CONFIG_FILE: &str = "train_config.json";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const BEST_DIR: &str = "best";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Learning rate at the last step as a fraction of `adam.lr`; the rate
    /// follows a cosine from `adam.lr` down to it.
    pub final_lr_fraction: f64,
    pub seed: u64,
    pub distortion: DistortionConfig,
    pub flip: bool,
    /// Used only when the model's `SA` flag is on.
    pub spec_augment: SpecAugmentConfig,
    pub model: AlignNetConfig,
}

impl TrainConfig {
    pub fn new(model: AlignNetConfig) -> Self {
        Self {
            epochs: 10,
            batch_size: 4,
            adam: AdamConfig::default(),
            final_lr_fraction: 1.0,
            seed: 0,
            distortion: DistortionConfig::default(),
            flip: true,
            spec_augment: SpecAugmentConfig::default(),
            model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(self.adam.lr > 0.0 && self.adam.eps > 0.0) {
            return Err(Error::Config(
                "learning rate and epsilon must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::Config(
                "final learning-rate fraction must lie in (0, 1]".into(),
            ));
        }
        self.model.validate()
    }

    fn augment(&self) -> Augment {
        Augment {
            distortion: self.distortion.clone(),
            flip: self.flip,
            spec_augment: self.model.ablation.sa.then(|| self.spec_augment.clone()),
        }
    }

    fn lr_at(&self, step: usize, total: usize) -> f64 {
        if total <= 1 {
            return self.adam.lr;
        }
        let p = step as f64 / (total - 1) as f64;
        let floor = self.final_lr_fraction;
        self.adam.lr * (floor + (1.0 - floor) * 0.5 * (1.0 + (std::f64::consts::PI * p).cos()))
    }
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: usize,
    pub train_loss: Option<f64>,
    pub train_fs: Option<f64>,
    pub val_afe: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub best: bool,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation AFE.
    pub best: AlignNet,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
}

/// Trains a fresh model. Epoch 0 scores the initialisation, so the best
/// checkpoint of a run without epochs is the initial model. When `out_dir`
/// is given, the config, the metrics log and the best checkpoint are
/// written there.
pub fn train(
    cfg: &TrainConfig,
    clips: &[Clip],
    val: &[EvalCase],
    out_dir: Option<&Path>,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if clips.is_empty() {
        return Err(Error::Config("no training clips".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = AlignNet::new(cfg.model.clone(), cfg.seed)?;
    let aug = cfg.augment();

    let mut log_file = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(
                dir.join(TRAIN_CONFIG_FILE),
                serde_json::to_string_pretty(cfg)?,
            )?;
            Some(fs::File::create(dir.join(METRICS_FILE))?)
        }
        None => None,
    };
    let best_dir: Option<PathBuf> = out_dir.map(|d| d.join(BEST_DIR));

    let validate = |m: &AlignNet| -> Result<Option<(f64, f64)>> {
        if val.is_empty() {
            return Ok(None);
        }
        Ok(Some(summarize(&evaluate_model(m, val)?)))
    };

    let mut log = Vec::new();
    let scores0 = validate(&model)?;
    let first = EpochRecord {
        epoch: 0,
        steps: 0,
        train_loss: None,
        train_fs: None,
        val_afe: scores0.map(|s| s.0),
        val_accuracy: scores0.map(|s| s.1),
        best: true,
    };
    let mut best = model.clone();
    let mut best_afe = scores0.map_or(f64::INFINITY, |s| s.0);
    let mut best_epoch = 0;
    record(&first, &mut log_file, &mut progress)?;
    if let Some(dir) = &best_dir {
        best.save(dir)?;
    }
    log.push(first);

    let steps_per_epoch = clips.len().div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let mut order: Vec<usize> = (0..clips.len()).collect();
    let mut step = 0;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut fs_sum) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch_size) {
            model.params_mut().zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let sample = make_sample(&clips[i], &cfg.model, &aug, &mut rng)?;
                let (loss, grads) = model.gradients(&sample.video, &sample.audio, &sample.gt)?;
                if !loss.total.is_finite() {
                    return Err(Error::NonFinite {
                        step,
                        detail: format!(
                            "clip {} gave fs {} mono {} at epoch {epoch}",
                            clips[i].id, loss.fs, loss.mono
                        ),
                    });
                }
                loss_sum += loss.total;
                fs_sum += loss.fs;
                for (name, g) in &grads {
                    let scaled: Vec<f64> = g.iter().map(|v| v * scale).collect();
                    model.params_mut().accumulate_grad(name, &scaled)?;
                }
            }
            let adam = AdamConfig {
                lr: cfg.lr_at(step, total_steps),
                ..cfg.adam
            };
            model.params_mut().adam_step(&adam)?;
            step += 1;
        }
        let scores = validate(&model)?;
        // Without validation data the latest parameters are kept.
        let improved = match scores {
            Some((afe, _)) => afe < best_afe,
            None => true,
        };
        if improved {
            best = model.clone();
            best_afe = scores.map_or(f64::INFINITY, |s| s.0);
            best_epoch = epoch;
            if let Some(dir) = &best_dir {
                best.save(dir)?;
            }
        }
        let rec = EpochRecord {
            epoch,
            steps: step,
            train_loss: Some(loss_sum / clips.len() as f64),
            train_fs: Some(fs_sum / clips.len() as f64),
            val_afe: scores.map(|s| s.0),
            val_accuracy: scores.map(|s| s.1),
            best: improved,
        };
        record(&rec, &mut log_file, &mut progress)?;
        log.push(rec);
    }
    Ok(TrainOutcome {
        best,
        best_epoch,
        log,
    })
}

fn record(
    rec: &EpochRecord,
    file: &mut Option<fs::File>,
    progress: &mut impl FnMut(&EpochRecord),
) -> Result<()> {
    if let Some(f) = file {
        writeln!(f, "{}", serde_json::to_string(rec)?)?;
    }
    progress(rec);
    Ok(())
}
