use serde::{Deserialize, Serialize};

use super::keypoints::{KeypointSequence, Layout, POSE19_MID_HIP};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-frame anchor: the mid-hip for poses, the centroid otherwise.
fn anchor(kps: &KeypointSequence, t: usize) -> [f64; 2] {
    match kps.layout() {
        Layout::Pose19 => kps.point(t, POSE19_MID_HIP),
        _ => {
            let frame = kps.frame(t);
            let n = frame.len() as f64;
            let (sx, sy) = frame
                .iter()
                .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
            [sx / n, sy / n]
        }
    }
}

/// Subtracts the per-frame anchor and rescales the clip so the largest
/// absolute coordinate is 1.
pub fn normalize_pose(kps: &KeypointSequence) -> Result<KeypointSequence> {
    let k_len = kps.num_keypoints();
    let mut out = kps.clone();
    let anchors: Vec<[f64; 2]> = (0..kps.num_frames()).map(|t| anchor(kps, t)).collect();
    for (i, p) in out.points_mut().iter_mut().enumerate() {
        let a = anchors[i / k_len];
        *p = [p[0] - a[0], p[1] - a[1]];
    }
    let scale = out
        .points()
        .iter()
        .flat_map(|p| [p[0].abs(), p[1].abs()])
        .fold(0.0, f64::max);
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Degenerate(format!(
            "cannot normalise a clip whose anchored extent is {scale}"
        )));
    }
    for p in out.points_mut() {
        *p = [p[0] / scale, p[1] / scale];
    }
    Ok(out)
}

/// Mirrors a normalised sequence: `x ↦ −x` and left/right keypoints swap.
pub fn hflip(kps: &KeypointSequence) -> Result<KeypointSequence> {
    let mirror = kps.layout().mirror_table()?;
    let k_len = kps.num_keypoints();
    let mut out = kps.clone();
    let (src_p, src_c) = (kps.points(), kps.confidences());
    for t in 0..kps.num_frames() {
        for (k, &m) in mirror.iter().enumerate() {
            let p = src_p[t * k_len + m];
            out.points_mut()[t * k_len + k] = [-p[0], p[1]];
            out.confidences_mut()[t * k_len + k] = src_c[t * k_len + m];
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Velocity then acceleration, `4K` channels.
    VelocityAcceleration,
    /// Velocity only, `2K` channels.
    Velocity,
    /// Raw positions, `2K` channels.
    Position,
}

impl FeatureKind {
    pub fn channels_per_keypoint(self) -> usize {
        match self {
            FeatureKind::VelocityAcceleration => 4,
            FeatureKind::Velocity | FeatureKind::Position => 2,
        }
    }
}

/// Video-side model input, `[C × T]`.
///
/// Rows are grouped in blocks of `2K`: block 0 holds `(x, y)` of every
/// keypoint in order (velocity or position), block 1 the accelerations.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionFeatures {
    pub data: Tensor,
    pub fps: f64,
    pub num_keypoints: usize,
    pub kind: FeatureKind,
}

impl MotionFeatures {
    pub fn num_frames(&self) -> usize {
        self.data.cols()
    }

    pub fn num_channels(&self) -> usize {
        self.data.rows()
    }

    /// Keypoint that channel `row` belongs to.
    pub fn keypoint_of_channel(&self, row: usize) -> usize {
        keypoint_of_channel(row, self.num_keypoints)
    }
}

pub fn keypoint_of_channel(row: usize, num_keypoints: usize) -> usize {
    (row % (2 * num_keypoints)) / 2
}

fn backward_difference(x: &[f64]) -> Vec<f64> {
    let mut d: Vec<f64> = (0..x.len())
        .map(|t| if t == 0 { 0.0 } else { x[t] - x[t - 1] })
        .collect();
    d[0] = d[1];
    d
}

/// Velocity `v[t] = p[t] − p[t−1]` and acceleration `a[t] = v[t] − v[t−1]`,
/// with the first frame copying the second (`v[0] = v[1]`, `a[0] = a[1]`).
pub fn motion_features(kps: &KeypointSequence) -> Result<MotionFeatures> {
    features(kps, FeatureKind::VelocityAcceleration)
}

pub fn features(kps: &KeypointSequence, kind: FeatureKind) -> Result<MotionFeatures> {
    let t_len = kps.num_frames();
    if kind != FeatureKind::Position && t_len < 3 {
        return Err(Error::TooShort(format!(
            "motion features need at least 3 frames, got {t_len}"
        )));
    }
    let k_len = kps.num_keypoints();
    let rows = kind.channels_per_keypoint() * k_len;
    let mut data = vec![0.0; rows * t_len];
    for k in 0..k_len {
        for c in 0..2 {
            let p = kps.series(k, c);
            let row = 2 * k + c;
            let (first, second) = match kind {
                FeatureKind::Position => (p, None),
                FeatureKind::Velocity => (backward_difference(&p), None),
                FeatureKind::VelocityAcceleration => {
                    let v = backward_difference(&p);
                    let a = backward_difference(&v);
                    (v, Some(a))
                }
            };
            data[row * t_len..(row + 1) * t_len].copy_from_slice(&first);
            if let Some(a) = second {
                let row = 2 * k_len + row;
                data[row * t_len..(row + 1) * t_len].copy_from_slice(&a);
            }
        }
    }
    Ok(MotionFeatures {
        data: Tensor::new(vec![rows, t_len], data)?,
        fps: kps.fps(),
        num_keypoints: k_len,
        kind,
    })
}
