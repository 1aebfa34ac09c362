use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::AlignNetConfig;
use super::layers::{
    affinity, build_pyramid, coarse_logits, head_channels, keypoint_attention, predict_level,
    temporal_attention, upsample, warp_features, Conv, GateConvs, HeadConvs, LevelConvs,
};
use super::loss::{loss_fs, loss_mono, mono_margin, total_loss};
use crate::distortion::GroundTruthCorrespondence;
use crate::error::{Error, Result};
use crate::tensor::{checkpoint, Graph, ParamStore, Tensor, Var};

pub const CONFIG_FILE: &str = "config.json";

const KERNEL: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Init {
    Uniform { fan_in: usize },
    Zero,
}

struct ParamSpec {
    name: String,
    shape: Vec<usize>,
    init: Init,
}

fn conv_specs(
    out: &mut Vec<ParamSpec>,
    prefix: &str,
    c_out: usize,
    c_in: usize,
    k: usize,
    zero: bool,
) {
    out.push(ParamSpec {
        name: format!("{prefix}.w"),
        shape: vec![c_out, c_in, k],
        init: if zero {
            Init::Zero
        } else {
            Init::Uniform { fan_in: c_in * k }
        },
    });
    out.push(ParamSpec {
        name: format!("{prefix}.b"),
        shape: vec![c_out],
        init: Init::Zero,
    });
}

fn param_specs(cfg: &AlignNetConfig) -> Result<Vec<ParamSpec>> {
    let mut out = Vec::new();
    if cfg.ablation.ka {
        out.push(ParamSpec {
            name: "ka.w".into(),
            shape: vec![cfg.layout.num_symmetry_classes()?],
            init: Init::Zero,
        });
    }
    if cfg.ablation.ta {
        conv_specs(
            &mut out,
            "ta.c1",
            cfg.attention_hidden,
            cfg.n_mels,
            KERNEL,
            false,
        );
        conv_specs(&mut out, "ta.c2", 1, cfg.attention_hidden, KERNEL, true);
    }
    for (branch, c0) in [("video", cfg.video_channels()), ("audio", cfg.n_mels)] {
        let mut c_in = c0;
        for l in 1..=cfg.active_levels() {
            let c = cfg.channels[l - 1];
            conv_specs(
                &mut out,
                &format!("{branch}.l{l}.down"),
                c,
                c_in,
                KERNEL,
                false,
            );
            conv_specs(
                &mut out,
                &format!("{branch}.l{l}.refine"),
                c,
                c,
                KERNEL,
                false,
            );
            c_in = c;
        }
    }
    for l in 1..=cfg.active_levels() {
        let head_in = head_channels(cfg.pool_bins, cfg.band, l < cfg.active_levels());
        conv_specs(
            &mut out,
            &format!("head.l{l}.c1"),
            cfg.head_hidden,
            head_in,
            KERNEL,
            false,
        );
        conv_specs(
            &mut out,
            &format!("head.l{l}.c2"),
            1,
            cfg.head_hidden,
            1,
            true,
        );
        conv_specs(&mut out, &format!("head.l{l}.skip"), 1, head_in, 1, true);
    }
    Ok(out)
}

/// Parameters of one model placed on a graph.
pub struct Bound {
    vars: Vec<(String, Var)>,
    ka: Option<Var>,
    ta: Option<GateConvs>,
    video: Vec<LevelConvs>,
    audio: Vec<LevelConvs>,
    heads: Vec<HeadConvs>,
}

impl Bound {
    pub fn vars(&self) -> &[(String, Var)] {
        &self.vars
    }
}

/// Graph handles of one forward pass.
pub struct Forward {
    /// Correspondence per level: index 0 is full resolution, index `l` is
    /// pyramid level `l`.
    pub levels: Vec<Var>,
    /// Affinity of pyramid level `l` at index `l − 1`.
    pub affinities: Vec<Var>,
    pub gates: Option<Var>,
    pub keypoint_weights: Option<Var>,
    /// Audio frames per level, index 0 being the input.
    pub audio_lengths: Vec<usize>,
}

/// Plain values of one forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub levels: Vec<Vec<f64>>,
    pub affinities: Vec<Tensor>,
    pub gates: Option<Vec<f64>>,
    pub keypoint_weights: Option<Vec<f64>>,
}

impl Prediction {
    /// Full-resolution correspondence.
    pub fn correspondence(&self) -> &[f64] {
        &self.levels[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossValues {
    pub fs: f64,
    pub mono: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct LossVars {
    pub fs: Var,
    pub mono: Var,
    pub total: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignNet {
    config: AlignNetConfig,
    params: ParamStore,
}

impl AlignNet {
    /// Fresh model: convolutions uniform in `±1/√fan_in`, biases, attention
    /// logits and head outputs zero.
    pub fn new(config: AlignNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for spec in param_specs(&config)? {
            let numel: usize = spec.shape.iter().product();
            let data = match spec.init {
                Init::Zero => vec![0.0; numel],
                Init::Uniform { fan_in } => {
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    (0..numel).map(|_| rng.gen_range(-bound..bound)).collect()
                }
            };
            params.insert(spec.name, Tensor::new(spec.shape, data)?);
        }
        Ok(Self { config, params })
    }

    /// Wraps existing parameters after checking names and shapes.
    pub fn from_params(config: AlignNetConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let specs = param_specs(&config)?;
        if specs.len() != params.len() {
            return Err(Error::Config(format!(
                "expected {} parameters, found {}",
                specs.len(),
                params.len()
            )));
        }
        for spec in &specs {
            let t = params.get(&spec.name)?;
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::ShapeMismatch {
                    op: "from_params",
                    lhs: spec.shape.clone(),
                    rhs: t.shape().to_vec(),
                });
            }
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &AlignNetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(
            dir.join(CONFIG_FILE),
            serde_json::to_string_pretty(&self.config)?,
        )?;
        checkpoint::save(&self.params, dir)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config: AlignNetConfig =
            serde_json::from_str(&fs::read_to_string(dir.join(CONFIG_FILE))?)?;
        Self::from_params(config, checkpoint::load(dir)?)
    }

    /// Places every parameter on `g`, as a leaf when `trainable`.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Result<Bound> {
        let mut vars = Vec::with_capacity(self.params.len());
        let mut map = BTreeMap::new();
        for (name, t) in self.params.iter() {
            let v = if trainable {
                g.leaf(t.clone())
            } else {
                g.constant(t.clone())
            };
            vars.push((name.to_string(), v));
            map.insert(name.to_string(), v);
        }
        let get = |name: &str| {
            map.get(name)
                .copied()
                .ok_or_else(|| Error::UnknownParameter(name.to_string()))
        };
        let conv = |prefix: &str| -> Result<Conv> {
            Ok(Conv {
                w: get(&format!("{prefix}.w"))?,
                b: Some(get(&format!("{prefix}.b"))?),
            })
        };
        let levels = |branch: &str| -> Result<Vec<LevelConvs>> {
            (1..=self.config.active_levels())
                .map(|l| {
                    Ok(LevelConvs {
                        down: conv(&format!("{branch}.l{l}.down"))?,
                        refine: conv(&format!("{branch}.l{l}.refine"))?,
                    })
                })
                .collect()
        };
        let ab = self.config.ablation;
        Ok(Bound {
            ka: if ab.ka { Some(get("ka.w")?) } else { None },
            ta: if ab.ta {
                Some(GateConvs {
                    c1: conv("ta.c1")?,
                    c2: conv("ta.c2")?,
                })
            } else {
                None
            },
            video: levels("video")?,
            audio: levels("audio")?,
            heads: (1..=self.config.active_levels())
                .map(|l| {
                    Ok(HeadConvs {
                        c1: conv(&format!("head.l{l}.c1"))?,
                        c2: conv(&format!("head.l{l}.c2"))?,
                        skip: conv(&format!("head.l{l}.skip"))?,
                    })
                })
                .collect::<Result<_>>()?,
            vars,
        })
    }

    fn check_inputs(&self, video: &Tensor, audio: &Tensor) -> Result<()> {
        let cfg = &self.config;
        if video.ndim() != 2 || video.rows() != cfg.video_channels() {
            return Err(Error::ShapeMismatch {
                op: "forward video",
                lhs: vec![cfg.video_channels()],
                rhs: video.shape().to_vec(),
            });
        }
        if audio.ndim() != 2 || audio.rows() != cfg.n_mels {
            return Err(Error::ShapeMismatch {
                op: "forward audio",
                lhs: vec![cfg.n_mels],
                rhs: audio.shape().to_vec(),
            });
        }
        let need = cfg.min_input_len();
        if video.cols() < need || audio.cols() < need {
            return Err(Error::TooShort(format!(
                "{} video / {} audio frames, need at least {need}",
                video.cols(),
                audio.cols()
            )));
        }
        Ok(())
    }

    /// Records the forward pass of `video[C_v × n]` against `audio[n_mels × m]`.
    pub fn forward(
        &self,
        g: &mut Graph,
        bound: &Bound,
        video: &Tensor,
        audio: &Tensor,
    ) -> Result<Forward> {
        self.check_inputs(video, audio)?;
        let cfg = &self.config;
        let slope = cfg.leaky_slope;
        let n = video.cols();
        let mut v0 = g.constant(video.clone());
        let mut a0 = g.constant(audio.clone());
        let mut keypoint_weights = None;
        if let Some(w) = bound.ka {
            let (out, kw) = keypoint_attention(g, v0, w, cfg.layout)?;
            v0 = out;
            keypoint_weights = Some(kw);
        }
        let mut gates = None;
        if let Some(convs) = &bound.ta {
            let (out, gt) = temporal_attention(g, a0, convs, slope)?;
            a0 = out;
            gates = Some(gt);
        }
        let vp = build_pyramid(g, v0, &bound.video, &cfg.strides, slope)?;
        let ap = build_pyramid(g, a0, &bound.audio, &cfg.strides, slope)?;
        let levels = vp.len();

        let mut d_levels = vec![None; levels + 1];
        let mut affinities = vec![None; levels];
        let mut next: Option<(Var, Var)> = None;
        for l in (1..=levels).rev() {
            let (v, a) = (vp[l - 1], ap[l - 1]);
            let n_l = g.value(v).cols();
            let (aff, zeta, prev) = match next {
                Some((z_next, d_next)) => {
                    let warped = warp_features(g, a, d_next, n_l)?;
                    let z_up = upsample(g, z_next, n_l)?;
                    (affinity(g, v, warped)?, z_up, Some(z_up))
                }
                None => {
                    let m_l = g.value(a).cols();
                    let zeta = g.constant(Tensor::from_vec(coarse_logits(m_l)));
                    (affinity(g, v, a)?, zeta, None)
                }
            };
            let z = predict_level(
                g,
                aff,
                zeta,
                prev,
                &bound.heads[l - 1],
                cfg.pool_bins,
                cfg.band,
                slope,
            )?;
            let d = g.tanh(z)?;
            d_levels[l] = Some(d);
            affinities[l - 1] = Some(aff);
            next = Some((z, d));
        }
        let d1 = d_levels[1].expect("level 1 is always built");
        d_levels[0] = Some(upsample(g, d1, n)?);

        let mut audio_lengths = vec![audio.cols()];
        audio_lengths.extend(ap.iter().map(|&a| g.value(a).cols()));
        Ok(Forward {
            levels: d_levels.into_iter().map(|d| d.expect("filled")).collect(),
            affinities: affinities.into_iter().map(|a| a.expect("filled")).collect(),
            gates,
            keypoint_weights,
            audio_lengths,
        })
    }

    /// Fractional training objective of a recorded forward pass against
    /// ground truth whose level copies match the pyramid.
    pub fn loss(
        &self,
        g: &mut Graph,
        fwd: &Forward,
        gt: &GroundTruthCorrespondence,
    ) -> Result<LossVars> {
        let levels = fwd.levels.len();
        if gt.levels.len() < levels - 1 {
            return Err(Error::LengthMismatch {
                op: "loss levels",
                expected: levels - 1,
                actual: gt.levels.len(),
            });
        }
        let mut targets: Vec<&[f64]> = vec![&gt.values];
        targets.extend(gt.levels.iter().take(levels - 1).map(Vec::as_slice));
        let weights = &self.config.level_weights[..levels];
        let margins: Vec<f64> = fwd
            .audio_lengths
            .iter()
            .map(|&m| mono_margin(self.config.kappa, m))
            .collect();
        let fs = loss_fs(g, &fwd.levels, &targets, weights)?;
        let mono = loss_mono(g, &fwd.levels, &margins, weights)?;
        let total = total_loss(g, fs, mono, self.config.mu)?;
        Ok(LossVars { fs, mono, total })
    }

    /// Inference without gradient bookkeeping.
    pub fn predict(&self, video: &Tensor, audio: &Tensor) -> Result<Prediction> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false)?;
        let fwd = self.forward(&mut g, &bound, video, audio)?;
        Ok(Prediction {
            levels: fwd
                .levels
                .iter()
                .map(|&v| g.value(v).data().to_vec())
                .collect(),
            affinities: fwd.affinities.iter().map(|&v| g.value(v).clone()).collect(),
            gates: fwd.gates.map(|v| g.value(v).data().to_vec()),
            keypoint_weights: fwd.keypoint_weights.map(|v| g.value(v).data().to_vec()),
        })
    }

    /// Loss values and the gradient of the total loss for every parameter.
    pub fn gradients(
        &self,
        video: &Tensor,
        audio: &Tensor,
        gt: &GroundTruthCorrespondence,
    ) -> Result<(LossValues, BTreeMap<String, Vec<f64>>)> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, true)?;
        let fwd = self.forward(&mut g, &bound, video, audio)?;
        let loss = self.loss(&mut g, &fwd, gt)?;
        let values = LossValues {
            fs: g.value(loss.fs).item(),
            mono: g.value(loss.mono).item(),
            total: g.value(loss.total).item(),
        };
        g.backward(loss.total)?;
        let grads = bound
            .vars
            .iter()
            .map(|(name, v)| {
                let grad = match g.grad(*v) {
                    Some(gr) => gr.to_vec(),
                    None => vec![0.0; g.value(*v).numel()],
                };
                (name.clone(), grad)
            })
            .collect();
        Ok((values, grads))
    }
}
