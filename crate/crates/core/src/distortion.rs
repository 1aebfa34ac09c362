//! Random monotonic piecewise-linear time warps and exact ground truth.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::KeypointSequence;

pub const MAX_SEGMENTS: usize = 16;

/// Monotonic map from distorted time `u` to source time `s`, both in
/// `[0, 1]`, linear between control points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WarpFunction {
    control_points: Vec<[f64; 2]>,
}

impl WarpFunction {
    pub fn identity() -> Self {
        Self {
            control_points: vec![[0.0, 0.0], [1.0, 1.0]],
        }
    }

    /// Validates pinned endpoints and strictly increasing coordinates.
    pub fn new(control_points: Vec<[f64; 2]>) -> Result<Self> {
        let n = control_points.len();
        if n < 2 || control_points[0] != [0.0, 0.0] || control_points[n - 1] != [1.0, 1.0] {
            return Err(Error::InfeasibleWarp(
                "control points must start at (0,0) and end at (1,1)".into(),
            ));
        }
        for (i, pair) in control_points.windows(2).enumerate() {
            if !(pair[1][0] > pair[0][0] && pair[1][1] > pair[0][1]) {
                return Err(Error::InfeasibleWarp(format!(
                    "control points {i} and {} are not strictly increasing",
                    i + 1
                )));
            }
        }
        Ok(Self { control_points })
    }

    pub fn control_points(&self) -> &[[f64; 2]] {
        &self.control_points
    }

    pub fn num_segments(&self) -> usize {
        self.control_points.len() - 1
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.control_points
            .windows(2)
            .map(|p| (p[1][1] - p[0][1]) / (p[1][0] - p[0][0]))
            .collect()
    }

    fn eval_along(&self, x: f64, from: usize, to: usize) -> f64 {
        let cp = &self.control_points;
        let x = x.clamp(0.0, 1.0);
        let seg = cp.partition_point(|p| p[from] <= x).clamp(1, cp.len() - 1);
        let (a, b) = (cp[seg - 1], cp[seg]);
        let f = (x - a[from]) / (b[from] - a[from]);
        (1.0 - f) * a[to] + f * b[to]
    }

    /// Source time for distorted time `u` (clamped to `[0, 1]`).
    pub fn eval(&self, u: f64) -> f64 {
        self.eval_along(u, 0, 1)
    }

    /// Distorted time at which source time `s` is shown.
    pub fn inverse_eval(&self, s: f64) -> f64 {
        self.eval_along(s, 1, 0)
    }

    pub fn inverse(&self) -> Self {
        Self {
            control_points: self.control_points.iter().map(|p| [p[1], p[0]]).collect(),
        }
    }

    /// `∫ w(u) du` over `[a, b] ⊆ [0, 1]`, exact for the piecewise-linear map.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for seg in self.control_points.windows(2) {
            let lo = a.max(seg[0][0]);
            let hi = b.min(seg[1][0]);
            if hi > lo {
                total += 0.5 * (hi - lo) * (self.eval(lo) + self.eval(hi));
            }
        }
        total
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: Vec<[f64; 2]> = serde_json::from_str(text)?;
        Self::new(raw)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionConfig {
    pub min_segments: usize,
    pub max_segments: usize,
    pub slope_min: f64,
    pub slope_max: f64,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        Self {
            min_segments: 2,
            max_segments: 6,
            slope_min: 0.5,
            slope_max: 2.0,
        }
    }
}

impl DistortionConfig {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<WarpFunction> {
        if self.min_segments > self.max_segments {
            return Err(Error::Config(format!(
                "segment range {}..={} is empty",
                self.min_segments, self.max_segments
            )));
        }
        let n = rng.gen_range(self.min_segments..=self.max_segments);
        sample_warp(rng, n, self.slope_min, self.slope_max)
    }
}

/// Random warp with `n_segments` pieces and every slope in
/// `[slope_min, slope_max]`.
///
/// Segment widths are drawn from `U[0.5, 1.5]` and normalised. Slopes are
/// drawn uniformly and then blended toward the bound that restores
/// `Σ width · slope = 1`, which keeps every slope inside the bounds.
pub fn sample_warp<R: Rng>(
    rng: &mut R,
    n_segments: usize,
    slope_min: f64,
    slope_max: f64,
) -> Result<WarpFunction> {
    if !(1..=MAX_SEGMENTS).contains(&n_segments) {
        return Err(Error::InfeasibleWarp(format!(
            "segment count {n_segments} outside 1..={MAX_SEGMENTS}"
        )));
    }
    if !(slope_min > 0.0 && slope_min <= 1.0 && slope_max >= 1.0 && slope_max.is_finite()) {
        return Err(Error::InfeasibleWarp(format!(
            "slope bounds [{slope_min}, {slope_max}] cannot average to 1"
        )));
    }
    if n_segments == 1 {
        return Ok(WarpFunction::identity());
    }
    let raw: Vec<f64> = (0..n_segments).map(|_| rng.gen_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let widths: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let mut slopes: Vec<f64> = (0..n_segments)
        .map(|_| {
            if slope_max > slope_min {
                rng.gen_range(slope_min..=slope_max)
            } else {
                slope_min
            }
        })
        .collect();
    let mean: f64 = widths.iter().zip(&slopes).map(|(w, k)| w * k).sum();
    let (target, alpha) = if mean > 1.0 {
        (slope_min, (mean - 1.0) / (mean - slope_min))
    } else if mean < 1.0 {
        (slope_max, (1.0 - mean) / (slope_max - mean))
    } else {
        (1.0, 0.0)
    };
    for k in slopes.iter_mut() {
        *k += alpha * (target - *k);
    }
    let mut points = vec![[0.0, 0.0]];
    let (mut u, mut s) = (0.0, 0.0);
    for (w, k) in widths.iter().zip(&slopes).take(n_segments - 1) {
        u += w;
        s += w * k;
        points.push([u, s]);
    }
    points.push([1.0, 1.0]);
    WarpFunction::new(points)
}

/// Linear interpolation weights at fractional index `pos` in a sequence of
/// `len` frames. Positions within 1e-9 of an integer snap to it so exact
/// frames are reproduced bit for bit.
pub(crate) fn lerp_index(pos: f64, len: usize) -> (usize, usize, f64) {
    let pos = pos.clamp(0.0, (len - 1) as f64);
    let r = pos.round();
    let pos = if (pos - r).abs() < 1e-9 { r } else { pos };
    let i0 = (pos.floor() as usize).min(len - 1);
    if pos == i0 as f64 {
        return (i0, i0, 0.0);
    }
    (i0, i0 + 1, pos - i0 as f64)
}

pub(crate) fn lerp(a: f64, b: f64, f: f64) -> f64 {
    if f == 0.0 {
        a
    } else {
        (1.0 - f) * a + f * b
    }
}

/// Resamples a keypoint sequence at fractional source frames `positions`.
/// Confidence is the minimum of the frames that contribute.
pub fn resample_keypoints(kps: &KeypointSequence, positions: &[f64]) -> Result<KeypointSequence> {
    let k_len = kps.num_keypoints();
    let t_len = kps.num_frames();
    let mut points = Vec::with_capacity(positions.len() * k_len);
    let mut conf = Vec::with_capacity(positions.len() * k_len);
    for &pos in positions {
        let (i0, i1, f) = lerp_index(pos, t_len);
        for k in 0..k_len {
            let (a, b) = (kps.point(i0, k), kps.point(i1, k));
            points.push([lerp(a[0], b[0], f), lerp(a[1], b[1], f)]);
            conf.push(kps.confidence(i0, k).min(kps.confidence(i1, k)));
        }
    }
    KeypointSequence::new(kps.layout(), kps.fps(), points, conf)
}

/// Source positions `w(i / (out − 1)) · (T − 1)` of every output frame.
pub fn warp_positions(w: &WarpFunction, source_frames: usize, out_frames: usize) -> Vec<f64> {
    (0..out_frames)
        .map(|i| w.eval(i as f64 / (out_frames - 1) as f64) * (source_frames - 1) as f64)
        .collect()
}

/// Distorted clip: output frame `i` shows source time `w(i / (out − 1))`.
pub fn apply_warp(
    kps: &KeypointSequence,
    w: &WarpFunction,
    out_frames: usize,
) -> Result<KeypointSequence> {
    if out_frames < 2 {
        return Err(Error::TooShort(format!(
            "need at least 2 output frames, got {out_frames}"
        )));
    }
    resample_keypoints(kps, &warp_positions(w, kps.num_frames(), out_frames))
}

/// Same resampling for a plain series.
pub fn warp_series(values: &[f64], w: &WarpFunction, out_frames: usize) -> Vec<f64> {
    warp_positions(w, values.len(), out_frames)
        .into_iter()
        .map(|pos| {
            let (i0, i1, f) = lerp_index(pos, values.len());
            lerp(values[i0], values[i1], f)
        })
        .collect()
}

/// Per distorted video frame, the source-audio position in `[−1, 1]`, plus
/// window-averaged copies at coarser lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthCorrespondence {
    pub values: Vec<f64>,
    pub m_audio: usize,
    /// `levels[l]` has `lengths[l]` entries, in the order requested.
    pub levels: Vec<Vec<f64>>,
}

/// `value[i] = 2 · w(i / (n − 1)) − 1`.
pub fn warp_to_correspondence(
    w: &WarpFunction,
    n_video: usize,
    m_audio: usize,
) -> GroundTruthCorrespondence {
    let values = (0..n_video)
        .map(|i| 2.0 * w.eval(i as f64 / (n_video - 1) as f64) - 1.0)
        .collect();
    GroundTruthCorrespondence {
        values,
        m_audio,
        levels: Vec::new(),
    }
}

/// Ground truth at a coarser length: entry `j` sits at distorted time
/// `j / (len − 1)` and averages the correspondence over the window of
/// half-width `1 / (2 (len − 1))` around it, narrowed symmetrically at the
/// ends so the first and last entries are exactly −1 and 1.
pub fn downsample_correspondence(w: &WarpFunction, len: usize) -> Vec<f64> {
    match len {
        0 => return Vec::new(),
        1 => return vec![2.0 * w.integral(0.0, 1.0) - 1.0],
        _ => {}
    }
    let spacing = 1.0 / (len - 1) as f64;
    (0..len)
        .map(|j| {
            let c = j as f64 * spacing;
            let r = (0.5 * spacing).min(c).min(1.0 - c);
            let mean = if r <= 0.0 {
                w.eval(c)
            } else {
                w.integral(c - r, c + r) / (2.0 * r)
            };
            2.0 * mean - 1.0
        })
        .collect()
}

impl GroundTruthCorrespondence {
    pub fn from_warp(
        w: &WarpFunction,
        n_video: usize,
        m_audio: usize,
        level_lengths: &[usize],
    ) -> Self {
        let mut gt = warp_to_correspondence(w, n_video, m_audio);
        gt.levels = level_lengths
            .iter()
            .map(|&len| downsample_correspondence(w, len))
            .collect();
        gt
    }

    /// Audio frame index of every video frame.
    pub fn audio_frames(&self) -> Vec<f64> {
        let scale = (self.m_audio - 1) as f64;
        self.values
            .iter()
            .map(|v| (v + 1.0) / 2.0 * scale)
            .collect()
    }
}

/// `frame_index,normalized_value` rows.
pub fn write_correspondence_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "frame_index,normalized_value")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(f, "{i},{v}")?;
    }
    f.flush()?;
    Ok(())
}

/// Reads the second column of a correspondence CSV with a header row.
pub fn read_correspondence_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let name = path.display().to_string();
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            line.split(',')
                .nth(1)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Parse {
                    path: name.clone(),
                    line: i + 1,
                    msg: format!("expected `index,value`, found `{line}`"),
                })
        })
        .collect()
}
