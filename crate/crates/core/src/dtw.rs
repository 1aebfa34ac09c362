//! Dynamic time warping baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{MelSpectrogram, MotionFeatures};
use crate::tensor::Tensor;

/// Monotone step path from `(0, 0)` to `(n_x − 1, n_y − 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpPath {
    pub steps: Vec<(usize, usize)>,
    pub total_cost: f64,
}

impl WarpPath {
    /// The same path with the roles of the two sequences swapped.
    pub fn transposed(&self) -> Self {
        Self {
            steps: self.steps.iter().map(|&(i, j)| (j, i)).collect(),
            total_cost: self.total_cost,
        }
    }
}

fn sq_dist(x: &Tensor, i: usize, y: &Tensor, j: usize) -> f64 {
    let (d, nx, ny) = (x.rows(), x.cols(), y.cols());
    let (xd, yd) = (x.data(), y.data());
    (0..d)
        .map(|r| {
            let e = xd[r * nx + i] - yd[r * ny + j];
            e * e
        })
        .sum()
}

/// Globally optimal alignment of the columns of `x` (`d × n_x`) and `y`
/// (`d × n_y`) under squared Euclidean cost with steps (1,0), (0,1), (1,1).
/// Ties prefer the diagonal, then advancing `x`.
pub fn dtw(x: &Tensor, y: &Tensor) -> Result<WarpPath> {
    if x.ndim() != 2 || y.ndim() != 2 || x.rows() != y.rows() {
        return Err(Error::ShapeMismatch {
            op: "dtw",
            lhs: x.shape().to_vec(),
            rhs: y.shape().to_vec(),
        });
    }
    let (n, m) = (x.cols(), y.cols());
    if n == 0 || m == 0 {
        return Err(Error::TooShort("dtw needs non-empty sequences".into()));
    }
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let c = sq_dist(x, i, y, j);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let diag = if i > 0 && j > 0 {
                    acc[(i - 1) * m + j - 1]
                } else {
                    f64::INFINITY
                };
                let up = if i > 0 {
                    acc[(i - 1) * m + j]
                } else {
                    f64::INFINITY
                };
                let left = if j > 0 {
                    acc[i * m + j - 1]
                } else {
                    f64::INFINITY
                };
                diag.min(up).min(left)
            };
            acc[i * m + j] = c + best;
        }
    }
    let mut steps = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        let diag = if i > 0 && j > 0 {
            acc[(i - 1) * m + j - 1]
        } else {
            f64::INFINITY
        };
        let up = if i > 0 {
            acc[(i - 1) * m + j]
        } else {
            f64::INFINITY
        };
        let left = if j > 0 {
            acc[i * m + j - 1]
        } else {
            f64::INFINITY
        };
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        steps.push((i, j));
    }
    steps.reverse();
    Ok(WarpPath {
        steps,
        total_cost: acc[n * m - 1],
    })
}

pub fn dtw_1d(x: &[f64], y: &[f64]) -> Result<WarpPath> {
    dtw(
        &Tensor::new(vec![1, x.len()], x.to_vec())?,
        &Tensor::new(vec![1, y.len()], y.to_vec())?,
    )
}

/// Per video frame, the mean matched audio index normalised to `[−1, 1]`.
pub fn path_to_correspondence(path: &WarpPath, n_video: usize, m_audio: usize) -> Result<Vec<f64>> {
    if m_audio < 2 {
        return Err(Error::TooShort("need at least 2 audio frames".into()));
    }
    let mut sum = vec![0.0; n_video];
    let mut count = vec![0usize; n_video];
    for &(i, j) in &path.steps {
        if i >= n_video || j >= m_audio {
            return Err(Error::InvalidArgument(format!(
                "path step ({i}, {j}) outside {n_video} × {m_audio}"
            )));
        }
        sum[i] += j as f64;
        count[i] += 1;
    }
    let scale = (m_audio - 1) as f64;
    sum.iter()
        .zip(&count)
        .enumerate()
        .map(|(i, (&s, &c))| {
            if c == 0 {
                return Err(Error::InvalidArgument(format!(
                    "path skips video frame {i}"
                )));
            }
            Ok(2.0 * (s / c as f64) / scale - 1.0)
        })
        .collect()
}

fn z_normalise(x: &mut [f64]) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    for v in x.iter_mut() {
        *v = if sd > 1e-12 { (*v - mean) / sd } else { 0.0 };
    }
}

/// Mean keypoint speed per frame from the velocity block, z-normalised.
pub fn video_curve(features: &MotionFeatures) -> Vec<f64> {
    let k = features.num_keypoints;
    let t_len = features.num_frames();
    let d = &features.data;
    let mut curve: Vec<f64> = (0..t_len)
        .map(|t| {
            (0..k)
                .map(|kp| d.at2(2 * kp, t).hypot(d.at2(2 * kp + 1, t)))
                .sum::<f64>()
                / k as f64
        })
        .collect();
    z_normalise(&mut curve);
    curve
}

/// Mean log-mel energy per frame, averaged over `factor` frames centred on
/// every `factor`-th frame (so pooled frame `j` sits at audio frame
/// `factor · j`), z-normalised.
pub fn audio_curve(mel: &MelSpectrogram, factor: usize) -> Vec<f64> {
    let (rows, cols) = (mel.n_mels(), mel.n_frames());
    let energy: Vec<f64> = (0..cols)
        .map(|t| (0..rows).map(|r| mel.values.at2(r, t)).sum::<f64>() / rows as f64)
        .collect();
    let half = factor / 2;
    let mut curve: Vec<f64> = (0..cols.div_ceil(factor))
        .map(|j| {
            let c = j * factor;
            let lo = c.saturating_sub(half);
            let hi = (c + half).min(cols - 1);
            energy[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    z_normalise(&mut curve);
    curve
}

/// Baseline alignment of a distorted video to reference audio. Both sides
/// are reduced to 1-D activity curves at video rate; the path is mapped to
/// normalised audio positions.
pub fn baseline_correspondence(
    video: &MotionFeatures,
    mel: &MelSpectrogram,
    audio_per_video: usize,
) -> Result<Vec<f64>> {
    let v = video_curve(video);
    let a = audio_curve(mel, audio_per_video);
    let path = dtw_1d(&v, &a)?;
    path_to_correspondence(&path, v.len(), a.len())
}
