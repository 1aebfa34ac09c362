use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{FeatureKind, Layout, N_MELS};

/// Architecture toggles: feature pyramid, motion input, spectrogram
/// augmentation, keypoint attention and temporal attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    #[serde(rename = "FP")]
    pub fp: bool,
    #[serde(rename = "MI")]
    pub mi: bool,
    #[serde(rename = "SA")]
    pub sa: bool,
    #[serde(rename = "KA")]
    pub ka: bool,
    #[serde(rename = "TA")]
    pub ta: bool,
}

impl Ablation {
    pub const FULL: Self = Self {
        fp: true,
        mi: true,
        sa: true,
        ka: true,
        ta: true,
    };
    pub const BASE: Self = Self {
        fp: false,
        mi: false,
        sa: false,
        ka: false,
        ta: false,
    };

    /// The cumulative rows `Base, FP, FP+MI, …, FP+MI+SA+KA+TA`.
    pub fn ladder() -> Vec<Self> {
        let mut rows = vec![Self::BASE];
        let mut cur = Self::BASE;
        for flag in ["FP", "MI", "SA", "KA", "TA"] {
            cur.set(flag, true).expect("known flag");
            rows.push(cur);
        }
        rows
    }

    fn set(&mut self, flag: &str, on: bool) -> Result<()> {
        match flag {
            "FP" => self.fp = on,
            "MI" => self.mi = on,
            "SA" => self.sa = on,
            "KA" => self.ka = on,
            "TA" => self.ta = on,
            other => return Err(Error::Config(format!("unknown ablation flag `{other}`"))),
        }
        Ok(())
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let on: Vec<&str> = [
            (self.fp, "FP"),
            (self.mi, "MI"),
            (self.sa, "SA"),
            (self.ka, "KA"),
            (self.ta, "TA"),
        ]
        .iter()
        .filter(|(b, _)| *b)
        .map(|(_, s)| *s)
        .collect();
        if on.is_empty() {
            write!(f, "Base")
        } else {
            write!(f, "{}", on.join("+"))
        }
    }
}

impl FromStr for Ablation {
    type Err = Error;

    /// Comma- or plus-separated enabled flags; `Base` or an empty string
    /// turns everything off.
    fn from_str(s: &str) -> Result<Self> {
        let mut out = Self::BASE;
        for flag in s.split([',', '+']).map(str::trim).filter(|f| !f.is_empty()) {
            if flag.eq_ignore_ascii_case("base") {
                continue;
            }
            out.set(&flag.to_ascii_uppercase(), true)?;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignNetConfig {
    pub layout: Layout,
    pub n_mels: usize,
    /// Channels of pyramid levels 1..=L.
    pub channels: Vec<usize>,
    /// Temporal downsampling of each level (factor `1 / stride`).
    pub strides: Vec<usize>,
    /// Audio-axis bins the affinity is pooled to before the head.
    pub pool_bins: usize,
    /// Diagonals on either side seen by the refining heads.
    pub band: usize,
    pub head_hidden: usize,
    pub attention_hidden: usize,
    pub leaky_slope: f64,
    /// Monotonic margin in audio frames of the level.
    pub kappa: f64,
    /// `λ_0` (full resolution) through `λ_L`.
    pub level_weights: Vec<f64>,
    pub mu: f64,
    /// Use velocity only (no acceleration) when motion input is on.
    pub drop_acceleration: bool,
    pub ablation: Ablation,
}

impl AlignNetConfig {
    pub fn new(layout: Layout) -> Self {
        Self {
            layout,
            n_mels: N_MELS,
            channels: vec![128, 64, 32, 16],
            strides: vec![3, 2, 2, 2],
            pool_bins: 32,
            band: 4,
            head_hidden: 16,
            attention_hidden: 16,
            leaky_slope: 0.1,
            kappa: 0.5,
            level_weights: vec![1.0; 5],
            mu: 0.1,
            drop_acceleration: false,
            ablation: Ablation::FULL,
        }
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        self.ablation = ablation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.channels.len();
        if l == 0 || self.strides.len() != l {
            return Err(Error::Config(format!(
                "{} channel entries but {} strides",
                l,
                self.strides.len()
            )));
        }
        if self.level_weights.len() != l + 1 {
            return Err(Error::Config(format!(
                "need {} level weights (full resolution plus {l} levels), got {}",
                l + 1,
                self.level_weights.len()
            )));
        }
        if self.strides.contains(&0) || self.channels.contains(&0) {
            return Err(Error::Config(
                "strides and channels must be positive".into(),
            ));
        }
        if self.level_weights.iter().any(|w| !(*w >= 0.0)) || !(self.mu >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if self.pool_bins == 0 || self.head_hidden == 0 || self.n_mels == 0 {
            return Err(Error::Config("head sizes must be positive".into()));
        }
        if self.ablation.ka {
            self.layout.symmetry_classes()?;
        }
        Ok(())
    }

    /// Pyramid levels actually built: all of them, or only the first when
    /// the pyramid is ablated.
    pub fn active_levels(&self) -> usize {
        if self.ablation.fp {
            self.channels.len()
        } else {
            1
        }
    }

    pub fn factors(&self) -> Vec<f64> {
        self.strides.iter().map(|&s| 1.0 / s as f64).collect()
    }

    pub fn video_feature_kind(&self) -> FeatureKind {
        match (self.ablation.mi, self.drop_acceleration) {
            (false, _) => FeatureKind::Position,
            (true, true) => FeatureKind::Velocity,
            (true, false) => FeatureKind::VelocityAcceleration,
        }
    }

    pub fn video_channels(&self) -> usize {
        self.video_feature_kind().channels_per_keypoint() * self.layout.num_keypoints()
    }

    /// Lengths of levels `0..=active_levels()` for an input of `len` frames:
    /// `T_l = ceil(T_{l−1} / stride_l)`.
    pub fn level_lengths(&self, len: usize) -> Vec<usize> {
        let mut out = vec![len];
        for &s in self.strides.iter().take(self.active_levels()) {
            let prev = *out.last().expect("non-empty");
            out.push(prev.div_ceil(s));
        }
        out
    }

    /// Shortest input that every active level can be built from.
    pub fn min_input_len(&self) -> usize {
        self.strides
            .iter()
            .take(self.active_levels())
            .product::<usize>()
            .max(2)
    }
}
