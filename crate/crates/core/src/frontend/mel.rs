use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const N_MELS: usize = 128;
pub const LOG_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogMelConfig {
    pub sample_rate: f64,
    pub hop_seconds: f64,
    pub fft_size: usize,
    /// Hann window length in samples, at most `fft_size`.
    pub win_length: usize,
    pub n_mels: usize,
}

impl LogMelConfig {
    /// 512-sample Hann frames zero padded to 1024 points, 128 bins.
    pub fn new(sample_rate: f64, hop_seconds: f64) -> Self {
        Self {
            sample_rate,
            hop_seconds,
            fft_size: 1024,
            win_length: 512,
            n_mels: N_MELS,
        }
    }

    pub fn hop_samples(&self) -> f64 {
        self.hop_seconds * self.sample_rate
    }

    fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "sample rate must be positive".into(),
            ));
        }
        if !(self.hop_seconds > 0.0 && self.hop_samples() >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "hop of {} s is below one sample",
                self.hop_seconds
            )));
        }
        if !self.fft_size.is_power_of_two()
            || self.fft_size < self.win_length
            || self.win_length < 2
        {
            return Err(Error::InvalidArgument(format!(
                "fft size {} must be a power of two no smaller than the window {}",
                self.fft_size, self.win_length
            )));
        }
        if self.n_mels == 0 {
            return Err(Error::InvalidArgument("need at least one mel bin".into()));
        }
        Ok(())
    }
}

/// `[n_mels × n_frames]` log-mel values.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram {
    pub values: Tensor,
    pub hop_seconds: f64,
    pub normalized: bool,
}

impl MelSpectrogram {
    pub fn n_mels(&self) -> usize {
        self.values.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }

    pub fn mean(&self) -> f64 {
        let d = self.values.data();
        d.iter().sum::<f64>() / d.len() as f64
    }

    /// Zero mean and unit variance over the clip; constant clips map to 0.
    pub fn standardized(&self) -> Self {
        let d = self.values.data();
        let mean = self.mean();
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64;
        let data: Vec<f64> = if var <= 1e-18 * (1.0 + mean * mean) {
            vec![0.0; d.len()]
        } else {
            let sd = var.sqrt();
            d.iter().map(|v| (v - mean) / sd).collect()
        };
        Self {
            values: Tensor::new(self.values.shape().to_vec(), data).expect("same shape"),
            hop_seconds: self.hop_seconds,
            normalized: true,
        }
    }

    /// Average of every `factor` consecutive frames (the last group may be
    /// shorter).
    pub fn pool_frames(&self, factor: usize) -> Vec<Vec<f64>> {
        let (rows, cols) = (self.n_mels(), self.n_frames());
        let n = cols.div_ceil(factor);
        (0..n)
            .map(|j| {
                let lo = j * factor;
                let hi = (lo + factor).min(cols);
                (0..rows)
                    .map(|r| {
                        (lo..hi).map(|c| self.values.at2(r, c)).sum::<f64>() / (hi - lo) as f64
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Edge frequencies of the triangular filters: `n_mels + 2` points evenly
/// spaced on the HTK mel scale from 0 Hz to Nyquist.
pub fn mel_edges_hz(n_mels: usize, sample_rate: f64) -> Vec<f64> {
    let top = hz_to_mel(sample_rate / 2.0);
    (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect()
}

/// Centre frequency of mel bin `b`.
pub fn mel_center_hz(b: usize, n_mels: usize, sample_rate: f64) -> f64 {
    mel_edges_hz(n_mels, sample_rate)[b + 1]
}

/// `[n_mels × (fft_size/2 + 1)]` triangular filter weights (peak 1).
pub fn mel_filterbank(n_mels: usize, fft_size: usize, sample_rate: f64) -> Vec<Vec<f64>> {
    let edges = mel_edges_hz(n_mels, sample_rate);
    let n_bins = fft_size / 2 + 1;
    (0..n_mels)
        .map(|b| {
            let (lo, mid, hi) = (edges[b], edges[b + 1], edges[b + 2]);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * sample_rate / fft_size as f64;
                    let up = (f - lo) / (mid - lo);
                    let down = (hi - f) / (hi - mid);
                    up.min(down).max(0.0)
                })
                .collect()
        })
        .collect()
}

pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// Number of frames for `len` samples: frame `t` is centred on sample
/// `round(t · hop)` and frames run while the centre stays inside the clip.
pub fn frame_count(len: usize, hop_samples: f64) -> usize {
    ((len - 1) as f64 / hop_samples + 1e-9).floor() as usize + 1
}

/// Hann-windowed frame `t`, zero padded outside the signal and up to
/// `fft_size`.
pub fn windowed_frame(wav: &[f64], t: usize, cfg: &LogMelConfig, window: &[f64]) -> Vec<f64> {
    let centre = (t as f64 * cfg.hop_samples()).round() as i64;
    let start = centre - (cfg.win_length / 2) as i64;
    let mut frame = vec![0.0; cfg.fft_size];
    for (i, w) in window.iter().enumerate() {
        let s = start + i as i64;
        if s >= 0 && (s as usize) < wav.len() {
            frame[i] = wav[s as usize] * w;
        }
    }
    frame
}

/// `log(mel · |STFT| + 1e-6)` without standardisation.
pub fn log_mel_raw(wav: &[f64], cfg: &LogMelConfig) -> Result<MelSpectrogram> {
    cfg.validate()?;
    if wav.len() < cfg.win_length {
        return Err(Error::TooShort(format!(
            "audio has {} samples, shorter than one {}-sample window",
            wav.len(),
            cfg.win_length
        )));
    }
    let n_frames = frame_count(wav.len(), cfg.hop_samples());
    let window = hann(cfg.win_length);
    let bank = mel_filterbank(cfg.n_mels, cfg.fft_size, cfg.sample_rate);
    let fft = FftPlanner::new().plan_fft_forward(cfg.fft_size);
    let n_bins = cfg.fft_size / 2 + 1;
    let mut values = vec![0.0; cfg.n_mels * n_frames];
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.fft_size];
    let mut mag = vec![0.0; n_bins];
    for t in 0..n_frames {
        let frame = windowed_frame(wav, t, cfg, &window);
        for (b, v) in buf.iter_mut().zip(&frame) {
            *b = Complex::new(*v, 0.0);
        }
        fft.process(&mut buf);
        for (m, c) in mag.iter_mut().zip(&buf) {
            *m = c.norm();
        }
        for (b, filt) in bank.iter().enumerate() {
            let e: f64 = filt.iter().zip(&mag).map(|(w, m)| w * m).sum();
            values[b * n_frames + t] = (e + LOG_FLOOR).ln();
        }
    }
    Ok(MelSpectrogram {
        values: Tensor::new(vec![cfg.n_mels, n_frames], values)?,
        hop_seconds: cfg.hop_seconds,
        normalized: false,
    })
}

/// Standardised log-mel spectrogram.
pub fn log_mel(wav: &[f64], cfg: &LogMelConfig) -> Result<MelSpectrogram> {
    Ok(log_mel_raw(wav, cfg)?.standardized())
}

/// Spectral flux `Σ_bins max(0, mel[:, t] − mel[:, t−1])`, zero at `t = 0`.
pub fn onset_envelope(mel: &MelSpectrogram) -> Vec<f64> {
    let (rows, cols) = (mel.n_mels(), mel.n_frames());
    (0..cols)
        .map(|t| {
            if t == 0 {
                return 0.0;
            }
            (0..rows)
                .map(|r| (mel.values.at2(r, t) - mel.values.at2(r, t - 1)).max(0.0))
                .sum()
        })
        .collect()
}

/// Integer-factor decimation with a boxcar pre-filter.
pub fn decimate(wav: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 {
        return Err(Error::InvalidArgument(
            "decimation factor must be ≥ 1".into(),
        ));
    }
    Ok(wav
        .chunks(factor)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect())
}
