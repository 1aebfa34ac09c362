use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::keypoints::KeypointSequence;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CleanConfig {
    pub median_window: usize,
    pub sg_window: usize,
    pub sg_order: usize,
    /// Deviation threshold in multiples of the windowed median absolute
    /// deviation.
    pub mad_factor: f64,
    /// Deviations at or below this value are never outliers, so flat
    /// stretches (MAD = 0) do not reject small genuine motion.
    pub min_outlier_deviation: f64,
    pub confidence_floor: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            median_window: 5,
            sg_window: 9,
            sg_order: 2,
            mad_factor: 3.0,
            min_outlier_deviation: 1e-6,
            confidence_floor: 0.1,
        }
    }
}

impl CleanConfig {
    pub fn with_windows(median_window: usize, sg_window: usize, sg_order: usize) -> Self {
        Self {
            median_window,
            sg_window,
            sg_order,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.median_window % 2 == 0 || self.sg_window % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "windows must be odd (median {}, savitzky-golay {})",
                self.median_window, self.sg_window
            )));
        }
        if self.sg_order >= self.sg_window {
            return Err(Error::InvalidArgument(format!(
                "savitzky-golay order {} must be below window {}",
                self.sg_order, self.sg_window
            )));
        }
        Ok(())
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Frames of `series` that deviate from their windowed median by more than
/// `factor · MAD`, looking only at frames marked valid. Only frames with a
/// full centred window are tested: truncated or shifted windows mistake
/// the curvature of smooth motion near the clip ends for spikes.
fn flag_outliers(series: &[f64], valid: &[bool], window: usize, cfg: &CleanConfig) -> Vec<bool> {
    let h = window / 2;
    let n = series.len();
    let mut flags = vec![false; n];
    let mut buf = Vec::with_capacity(window);
    for t in h..n.saturating_sub(h) {
        if !valid[t] {
            continue;
        }
        buf.clear();
        buf.extend((t - h..=t + h).filter(|&s| valid[s]).map(|s| series[s]));
        let med = median(&mut buf);
        for v in buf.iter_mut() {
            *v = (*v - med).abs();
        }
        let mad = median(&mut buf);
        let dev = (series[t] - med).abs();
        flags[t] = dev > cfg.min_outlier_deviation && dev > cfg.mad_factor * mad;
    }
    flags
}

/// Linear interpolation over missing frames; edge gaps hold the nearest
/// valid value. Returns `None` when nothing is valid.
pub fn fill_missing(series: &[f64], valid: &[bool]) -> Option<Vec<f64>> {
    let known: Vec<usize> = (0..series.len()).filter(|&t| valid[t]).collect();
    let (&first, &last) = (known.first()?, known.last()?);
    let mut out = series.to_vec();
    for v in out.iter_mut().take(first) {
        *v = series[first];
    }
    for v in out.iter_mut().skip(last + 1) {
        *v = series[last];
    }
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        for (t, v) in out.iter_mut().enumerate().take(b).skip(a + 1) {
            let f = (t - a) as f64 / (b - a) as f64;
            *v = series[a] + f * (series[b] - series[a]);
        }
    }
    Some(out)
}

/// Savitzky-Golay smoother with least-squares polynomial fits. Edge frames
/// evaluate the fit of the first/last full window at their own offset, so
/// polynomials up to `order` are reproduced everywhere.
#[derive(Clone, Debug)]
pub struct SavitzkyGolay {
    window: usize,
    /// `coeffs[r]` smooths the sample at offset `r` inside a window.
    coeffs: Vec<Vec<f64>>,
}

impl SavitzkyGolay {
    pub fn new(window: usize, order: usize) -> Result<Self> {
        if window % 2 == 0 || order >= window {
            return Err(Error::InvalidArgument(format!(
                "savitzky-golay needs an odd window above the order (window {window}, order {order})"
            )));
        }
        let h = (window / 2).max(1) as f64;
        let vander = DMatrix::from_fn(window, order + 1, |r, c| {
            ((r as f64 - (window / 2) as f64) / h).powi(c as i32)
        });
        let pinv = vander
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Degenerate(e.to_string()))?;
        // Hat matrix: row r maps window samples to the fitted value at r.
        let hat = &vander * pinv;
        let coeffs = (0..window)
            .map(|r| hat.row(r).iter().copied().collect())
            .collect();
        Ok(Self { window, coeffs })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let w = self.window;
        let h = w / 2;
        let dot = |start: usize, r: usize| -> f64 {
            self.coeffs[r]
                .iter()
                .zip(&x[start..start + w])
                .map(|(c, v)| c * v)
                .sum()
        };
        (0..n)
            .map(|t| {
                if t < h {
                    dot(0, t)
                } else if t + h >= n {
                    dot(n - w, t + w - n)
                } else {
                    dot(t - h, h)
                }
            })
            .collect()
    }
}

/// Savitzky-Golay smoothing with the window shrunk to fit short series.
pub fn savgol(x: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    let mut w = window.min(x.len());
    if w % 2 == 0 {
        w -= 1;
    }
    if w <= 1 {
        return Ok(x.to_vec());
    }
    Ok(SavitzkyGolay::new(w, order.min(w - 1))?.apply(x))
}

/// Outlier rejection, gap interpolation and Savitzky-Golay smoothing.
///
/// A point is missing when its confidence is below the floor or when either
/// coordinate is an outlier against its windowed median. Interpolated
/// points get the floor as confidence.
pub fn clean_keypoints(raw: &KeypointSequence, cfg: &CleanConfig) -> Result<KeypointSequence> {
    cfg.validate()?;
    let t_len = raw.num_frames();
    let k_len = raw.num_keypoints();
    let mut out = raw.clone();
    let sg = if cfg.sg_window.min(t_len) > 1 {
        let mut w = cfg.sg_window.min(t_len);
        if w % 2 == 0 {
            w -= 1;
        }
        Some(SavitzkyGolay::new(w, cfg.sg_order.min(w - 1))?)
    } else {
        None
    };
    for k in 0..k_len {
        let confident: Vec<bool> = (0..t_len)
            .map(|t| raw.confidence(t, k) >= cfg.confidence_floor)
            .collect();
        let xs = raw.series(k, 0);
        let ys = raw.series(k, 1);
        let fx = flag_outliers(&xs, &confident, cfg.median_window, cfg);
        let fy = flag_outliers(&ys, &confident, cfg.median_window, cfg);
        let valid: Vec<bool> = (0..t_len)
            .map(|t| confident[t] && !fx[t] && !fy[t])
            .collect();
        for (coord, series) in [(0, xs), (1, ys)] {
            let filled =
                fill_missing(&series, &valid).ok_or(Error::KeypointAlwaysMissing { index: k })?;
            let smooth = match &sg {
                Some(sg) => sg.apply(&filled),
                None => filled,
            };
            out.set_series(k, coord, &smooth);
        }
        let conf = out.confidences_mut();
        for t in 0..t_len {
            if !valid[t] {
                conf[t * k_len + k] = cfg.confidence_floor;
            }
        }
    }
    Ok(out)
}
