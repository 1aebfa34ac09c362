//! Synthetic paired audio and motion.
//!
//! Each clip has irregular beats. At every beat the audio plays a decaying
//! tone burst and every keypoint reverses direction and moves with a speed
//! that follows the same decay, so motion energy and audio energy share one
//! envelope. Keypoints also carry a slow sway that is unrelated to the audio.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{KeypointSequence, Layout};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub duration_s: f64,
    pub fps: f64,
    pub sample_rate: u32,
    /// Mean gap between beats.
    pub beat_period_s: f64,
    /// Gaps are uniform in `period · [1 − jitter, 1 + jitter]`.
    pub beat_jitter: f64,
    /// Decay constant shared by tone bursts and motion speed.
    pub decay_s: f64,
    pub tone_amplitude: f64,
    pub tone_hz: [f64; 2],
    pub noise_floor: f64,
    /// Peak keypoint speed in skeleton units per second.
    pub motion_speed: f64,
    /// Amplitude of the audio-independent sway.
    pub sway: f64,
    pub layout: Layout,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            duration_s: 4.0,
            fps: 30.0,
            sample_rate: 16_000,
            beat_period_s: 0.5,
            beat_jitter: 0.4,
            decay_s: 0.12,
            tone_amplitude: 0.5,
            tone_hz: [300.0, 3000.0],
            noise_floor: 0.01,
            motion_speed: 2.0,
            sway: 0.02,
            layout: Layout::Pose19,
        }
    }
}

impl SynthConfig {
    /// No beats, no noise: flat audio and motionless keypoints.
    pub fn silent() -> Self {
        Self {
            tone_amplitude: 0.0,
            noise_floor: 0.0,
            motion_speed: 0.0,
            sway: 0.0,
            ..Self::default()
        }
    }

    pub fn video_frames(&self) -> usize {
        (self.duration_s * self.fps).round() as usize + 1
    }

    pub fn audio_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize + 1
    }

    fn validate(&self) -> Result<()> {
        if !(self.duration_s >= 2.0) {
            return Err(Error::Config(format!(
                "clips must last at least 2 s, got {}",
                self.duration_s
            )));
        }
        if !(self.fps > 0.0 && self.beat_period_s > 0.0 && self.decay_s > 0.0) {
            return Err(Error::Config(
                "fps, beat period and decay must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beat_jitter) {
            return Err(Error::Config("beat jitter must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// An aligned audio/keypoint pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthPair {
    pub audio: Vec<f64>,
    pub sample_rate: u32,
    pub keypoints: KeypointSequence,
    /// Beat onsets in seconds.
    pub beats: Vec<f64>,
}

impl SynthPair {
    /// Video frames at which the motion direction reverses.
    pub fn beat_frames(&self) -> Vec<usize> {
        let fps = self.keypoints.fps();
        self.beats
            .iter()
            .map(|b| (b * fps).ceil() as usize)
            .collect()
    }
}

/// Rest pose of a keypoint layout, roughly unit height.
fn rest_pose(layout: Layout, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    match layout {
        Layout::Pose19 => vec![
            [0.0, -0.9],
            [0.0, -0.7],
            [-0.2, -0.7],
            [-0.3, -0.45],
            [-0.35, -0.2],
            [0.2, -0.7],
            [0.3, -0.45],
            [0.35, -0.2],
            [0.0, -0.1],
            [-0.12, -0.1],
            [-0.14, 0.3],
            [-0.15, 0.7],
            [0.12, -0.1],
            [0.14, 0.3],
            [0.15, 0.7],
            [-0.05, -0.95],
            [0.05, -0.95],
            [-0.1, -0.92],
            [0.1, -0.92],
        ],
        other => (0..other.num_keypoints())
            .map(|k| {
                let a = TAU * k as f64 / other.num_keypoints() as f64;
                [0.5 * a.cos() + rng.gen_range(-0.05..0.05), 0.3 * a.sin()]
            })
            .collect(),
    }
}

fn beat_times(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gap = |rng: &mut ChaCha8Rng| {
        cfg.beat_period_s * rng.gen_range(1.0 - cfg.beat_jitter..=1.0 + cfg.beat_jitter)
    };
    let mut beats = Vec::new();
    let mut t = rng.gen_range(0.1..0.1 + cfg.beat_period_s);
    while t < cfg.duration_s {
        beats.push(t);
        t += gap(rng);
    }
    beats
}

/// Displacement along the beat-driven path at time `t`: the speed after
/// beat `b` is `exp(−(t − b)/τ)` and the sign flips at every beat.
fn beat_displacement(t: f64, beats: &[f64], tau: f64) -> f64 {
    let mut x = 0.0;
    let mut sign = 1.0;
    for (j, &b) in beats.iter().enumerate() {
        if t <= b {
            break;
        }
        let end = beats.get(j + 1).map_or(t, |&next| next.min(t));
        x += sign * tau * (1.0 - (-(end - b) / tau).exp());
        sign = -sign;
    }
    x
}

/// Deterministic pair for `seed`. Ground-truth alignment is the identity.
pub fn synth_pair(seed: u64, cfg: &SynthConfig) -> Result<SynthPair> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beats = beat_times(cfg, &mut rng);
    let silent = cfg.tone_amplitude == 0.0;

    let sr = cfg.sample_rate as f64;
    let mut audio: Vec<f64> = (0..cfg.audio_samples())
        .map(|_| cfg.noise_floor * rng.sample::<f64, _>(StandardNormal))
        .collect();
    if !silent {
        for &b in &beats {
            let f = cfg.tone_hz[0] * (cfg.tone_hz[1] / cfg.tone_hz[0]).powf(rng.gen::<f64>());
            let start = (b * sr).ceil() as usize;
            let stop = ((b + 8.0 * cfg.decay_s) * sr).ceil() as usize;
            for (i, s) in audio.iter_mut().enumerate().take(stop).skip(start) {
                let dt = i as f64 / sr - b;
                *s += cfg.tone_amplitude * (-dt / cfg.decay_s).exp() * (TAU * f * dt).sin();
            }
        }
    }

    let k_len = cfg.layout.num_keypoints();
    let rest = rest_pose(cfg.layout, &mut rng);
    struct Motion {
        dir: [f64; 2],
        gain: f64,
        sway: [(f64, f64, f64); 2],
    }
    let motions: Vec<Motion> = (0..k_len)
        .map(|_| {
            let a = rng.gen_range(0.0..TAU);
            let gain = rng.gen_range(0.3..1.0);
            let mut sway = || {
                (
                    cfg.sway * rng.gen_range(0.5..1.0),
                    rng.gen_range(0.2..0.8),
                    rng.gen_range(0.0..TAU),
                )
            };
            Motion {
                dir: [a.cos(), a.sin()],
                gain,
                sway: [sway(), sway()],
            }
        })
        .collect();
    let beat_path = if silent { &[][..] } else { &beats[..] };
    let n = cfg.video_frames();
    let mut points = Vec::with_capacity(n * k_len);
    for i in 0..n {
        let t = i as f64 / cfg.fps;
        let x = cfg.motion_speed * beat_displacement(t, beat_path, cfg.decay_s);
        for (k, m) in motions.iter().enumerate() {
            let mut p = rest[k];
            for (c, &(amp, hz, phase)) in m.sway.iter().enumerate() {
                p[c] += m.gain * x * m.dir[c] + amp * (TAU * hz * t + phase).sin();
            }
            points.push(p);
        }
    }
    Ok(SynthPair {
        audio,
        sample_rate: cfg.sample_rate,
        keypoints: KeypointSequence::from_points(cfg.layout, cfg.fps, points)?,
        beats: if silent { Vec::new() } else { beats },
    })
}
