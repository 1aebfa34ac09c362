use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Keypoint layout of a sequence.
///
/// `Pose19` is OpenPose BODY_25 with the six foot points removed (indices
/// 0..=18 keep their BODY_25 meaning). `Lip20` is the 68-point face model's
/// mouth, points 48..=67, stored as local indices 0..=19.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Pose19,
    Lip20,
    /// Arbitrary point set without symmetry or anchor tables.
    Custom(usize),
}

pub const POSE19_NAMES: [&str; 19] = [
    "nose",
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "mid_hip",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_eye",
    "left_eye",
    "right_ear",
    "left_ear",
];

pub const POSE19_MID_HIP: usize = 8;

const POSE19_MIRROR: [(usize, usize); 8] = [
    (2, 5),
    (3, 6),
    (4, 7),
    (9, 12),
    (10, 13),
    (11, 14),
    (15, 16),
    (17, 18),
];

// Mouth points mirrored about the vertical axis (local indices, 0 = face 48).
const LIP20_MIRROR: [(usize, usize); 8] = [
    (0, 6),
    (1, 5),
    (2, 4),
    (7, 11),
    (8, 10),
    (12, 16),
    (13, 15),
    (17, 19),
];

impl Layout {
    pub fn num_keypoints(self) -> usize {
        match self {
            Layout::Pose19 => 19,
            Layout::Lip20 => 20,
            Layout::Custom(k) => k,
        }
    }

    pub fn name(self) -> String {
        match self {
            Layout::Pose19 => "pose19".into(),
            Layout::Lip20 => "lip20".into(),
            Layout::Custom(k) => format!("custom{k}"),
        }
    }

    /// Parses `pose19`, `lip20` or `custom` (with an explicit count).
    pub fn parse(name: &str, num_keypoints: usize) -> Result<Self> {
        let layout = match name {
            "pose19" => Layout::Pose19,
            "lip20" => Layout::Lip20,
            "custom" => Layout::Custom(num_keypoints),
            other => {
                return Err(Error::InvalidArgument(format!("unknown layout `{other}`")));
            }
        };
        if layout.num_keypoints() != num_keypoints {
            return Err(Error::InvalidArgument(format!(
                "layout {name} has {} keypoints, header says {num_keypoints}",
                layout.num_keypoints()
            )));
        }
        Ok(layout)
    }

    fn mirror_pairs(self) -> Option<&'static [(usize, usize)]> {
        match self {
            Layout::Pose19 => Some(&POSE19_MIRROR),
            Layout::Lip20 => Some(&LIP20_MIRROR),
            Layout::Custom(_) => None,
        }
    }

    /// Left/right partner of every keypoint (itself for points on the axis).
    pub fn mirror_table(self) -> Result<Vec<usize>> {
        let pairs = self.mirror_pairs().ok_or_else(|| Error::NoLayoutTable {
            layout: self.name(),
            table: "left/right",
        })?;
        let mut table: Vec<usize> = (0..self.num_keypoints()).collect();
        for &(a, b) in pairs {
            table[a] = b;
            table[b] = a;
        }
        Ok(table)
    }

    /// Symmetry class of every keypoint; mirrored points share a class.
    /// Classes are numbered in order of first appearance.
    pub fn symmetry_classes(self) -> Result<Vec<usize>> {
        let mirror = self.mirror_table().map_err(|_| Error::NoLayoutTable {
            layout: self.name(),
            table: "symmetry",
        })?;
        let mut class = vec![usize::MAX; mirror.len()];
        let mut next = 0;
        for k in 0..mirror.len() {
            if class[k] == usize::MAX {
                class[k] = next;
                class[mirror[k]] = next;
                next += 1;
            }
        }
        Ok(class)
    }

    pub fn num_symmetry_classes(self) -> Result<usize> {
        Ok(self
            .symmetry_classes()?
            .into_iter()
            .max()
            .map_or(0, |m| m + 1))
    }

    pub fn keypoint_name(self, k: usize) -> String {
        match self {
            Layout::Pose19 => POSE19_NAMES[k].to_string(),
            Layout::Lip20 => format!("lip_{}", 48 + k),
            Layout::Custom(_) => format!("kp_{k}"),
        }
    }
}

/// Per-frame 2-D keypoints with confidences.
#[derive(Clone, Debug, PartialEq)]
pub struct KeypointSequence {
    layout: Layout,
    fps: f64,
    num_frames: usize,
    /// `[T × K]` points, frame-major.
    points: Vec<[f64; 2]>,
    /// `[T × K]` confidences in `[0, 1]`.
    confidence: Vec<f64>,
}

impl KeypointSequence {
    pub fn new(
        layout: Layout,
        fps: f64,
        points: Vec<[f64; 2]>,
        confidence: Vec<f64>,
    ) -> Result<Self> {
        let k = layout.num_keypoints();
        if k == 0 {
            return Err(Error::InvalidArgument("layout with zero keypoints".into()));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "fps must be positive, got {fps}"
            )));
        }
        if points.len() % k != 0 || points.len() != confidence.len() {
            return Err(Error::LengthMismatch {
                op: "KeypointSequence::new",
                expected: points.len(),
                actual: confidence.len(),
            });
        }
        let num_frames = points.len() / k;
        if num_frames < 2 {
            return Err(Error::TooShort(format!(
                "keypoint sequence needs at least 2 frames, got {num_frames}"
            )));
        }
        Ok(Self {
            layout,
            fps,
            num_frames,
            points,
            confidence,
        })
    }

    /// Full-confidence sequence.
    pub fn from_points(layout: Layout, fps: f64, points: Vec<[f64; 2]>) -> Result<Self> {
        let conf = vec![1.0; points.len()];
        Self::new(layout, fps, points, conf)
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_keypoints(&self) -> usize {
        self.layout.num_keypoints()
    }

    pub fn point(&self, t: usize, k: usize) -> [f64; 2] {
        self.points[t * self.num_keypoints() + k]
    }

    pub fn confidence(&self, t: usize, k: usize) -> f64 {
        self.confidence[t * self.num_keypoints() + k]
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn confidences(&self) -> &[f64] {
        &self.confidence
    }

    pub fn frame(&self, t: usize) -> &[[f64; 2]] {
        let k = self.num_keypoints();
        &self.points[t * k..(t + 1) * k]
    }

    pub(crate) fn points_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.points
    }

    pub(crate) fn confidences_mut(&mut self) -> &mut [f64] {
        &mut self.confidence
    }

    /// Time series of one coordinate (0 = x, 1 = y) of keypoint `k`.
    pub fn series(&self, k: usize, coord: usize) -> Vec<f64> {
        (0..self.num_frames)
            .map(|t| self.point(t, k)[coord])
            .collect()
    }

    pub(crate) fn set_series(&mut self, k: usize, coord: usize, values: &[f64]) {
        let kk = self.num_keypoints();
        for (t, &v) in values.iter().enumerate() {
            self.points[t * kk + k][coord] = v;
        }
    }

    pub fn with_fps(mut self, fps: f64) -> Self {
        self.fps = fps;
        self
    }
}
