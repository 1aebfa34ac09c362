//! Network building blocks expressed as operations on a [`Graph`].

use crate::error::{Error, Result};
use crate::frontend::{keypoint_of_channel, Layout};
use crate::tensor::{Graph, Tensor, Var};

/// Weight and optional bias of one convolution.
#[derive(Clone, Copy, Debug)]
pub struct Conv {
    pub w: Var,
    pub b: Option<Var>,
}

impl Conv {
    pub fn apply(&self, g: &mut Graph, x: Var, stride: usize) -> Result<Var> {
        let k = g.value(self.w).shape()[2];
        g.conv1d(x, self.w, self.b, stride, k / 2)
    }
}

/// Two convolutions of one pyramid level: a strided one and a refinement.
#[derive(Clone, Copy, Debug)]
pub struct LevelConvs {
    pub down: Conv,
    pub refine: Conv,
}

/// Gate network of the temporal attention.
#[derive(Clone, Copy, Debug)]
pub struct GateConvs {
    pub c1: Conv,
    pub c2: Conv,
}

/// Correspondence head of one level.
#[derive(Clone, Copy, Debug)]
pub struct HeadConvs {
    pub c1: Conv,
    pub c2: Conv,
    pub skip: Conv,
}

/// Scales every channel of `features` by `K · softmax(w[class(k)])_k`, where
/// `k` is the keypoint owning the channel. Symmetric keypoints share one
/// logit. Returns the scaled features and the per-keypoint weights.
pub fn keypoint_attention(
    g: &mut Graph,
    features: Var,
    weights: Var,
    layout: Layout,
) -> Result<(Var, Var)> {
    let classes = layout.symmetry_classes()?;
    let k = layout.num_keypoints();
    let n_classes = layout.num_symmetry_classes()?;
    let w = g.value(weights);
    if w.numel() != n_classes {
        return Err(Error::LengthMismatch {
            op: "keypoint_attention",
            expected: n_classes,
            actual: w.numel(),
        });
    }
    let rows = g.value(features).rows();
    if rows % (2 * k) != 0 {
        return Err(Error::InvalidArgument(format!(
            "{rows} feature channels are not a multiple of 2·{k}"
        )));
    }
    let per_kp = g.select(weights, &classes)?;
    let soft = g.softmax(per_kp, 0)?;
    let kp_weights = g.scale(soft, k as f64)?;
    let owners: Vec<usize> = (0..rows).map(|r| keypoint_of_channel(r, k)).collect();
    let channel_weights = g.select(kp_weights, &owners)?;
    Ok((g.mul_rows(features, channel_weights)?, kp_weights))
}

/// Reweights each audio frame by `2 · sigmoid(gate)`, where the gate comes
/// from a two-layer convolution over the audio. Returns the reweighted audio
/// and the sigmoid gates.
pub fn temporal_attention(
    g: &mut Graph,
    audio: Var,
    convs: &GateConvs,
    slope: f64,
) -> Result<(Var, Var)> {
    let t = g.value(audio).cols();
    let h = convs.c1.apply(g, audio, 1)?;
    let h = g.leaky_relu(h, slope)?;
    let pre = convs.c2.apply(g, h, 1)?;
    let pre = g.reshape(pre, &[t])?;
    let gates = g.sigmoid(pre)?;
    let scale = g.scale(gates, 2.0)?;
    Ok((g.mul_cols(audio, scale)?, gates))
}

/// Levels `1..=levels.len()` of a feature pyramid. Level `l` is
/// `lrelu(refine(lrelu(down_l(F_{l−1}))))` with `down_l` strided by
/// `strides[l−1]`.
pub fn build_pyramid(
    g: &mut Graph,
    input: Var,
    levels: &[LevelConvs],
    strides: &[usize],
    slope: f64,
) -> Result<Vec<Var>> {
    let len = g.value(input).cols();
    let need: usize = strides.iter().take(levels.len()).product();
    if len < need.max(2) {
        return Err(Error::TooShort(format!(
            "{len} frames cannot feed {} pyramid levels (need {need})",
            levels.len()
        )));
    }
    let mut out = Vec::with_capacity(levels.len());
    let mut x = input;
    for (convs, &stride) in levels.iter().zip(strides) {
        let h = convs.down.apply(g, x, stride)?;
        let h = g.leaky_relu(h, slope)?;
        let h = convs.refine.apply(g, h, 1)?;
        x = g.leaky_relu(h, slope)?;
        out.push(x);
    }
    Ok(out)
}

/// `len` evenly spaced points of `[−1, 1]`.
pub fn grid(len: usize) -> Vec<f64> {
    if len < 2 {
        return vec![0.0; len];
    }
    (0..len)
        .map(|i| 2.0 * i as f64 / (len - 1) as f64 - 1.0)
        .collect()
}

/// Fractional source indices that stretch `from` samples onto `to` with
/// aligned end points.
fn stretch_positions(from: usize, to: usize) -> Vec<f64> {
    if to < 2 {
        return vec![0.0; to];
    }
    (0..to)
        .map(|i| i as f64 * (from.max(1) - 1) as f64 / (to - 1) as f64)
        .collect()
}

/// Linear upsampling of a 1-D series to `len` samples.
pub fn upsample(g: &mut Graph, x: Var, len: usize) -> Result<Var> {
    let from = g.value(x).numel();
    if from == len {
        return Ok(x);
    }
    let pos = g.constant(Tensor::from_vec(stretch_positions(from, len)));
    g.interp_gather(x, pos)
}

/// Samples `audio[C×m]` at the positions given by `corr_next` upsampled to
/// `out_len` entries: value `v` reads fractional frame `(v + 1) / 2 · (m − 1)`.
pub fn warp_features(g: &mut Graph, audio: Var, corr_next: Var, out_len: usize) -> Result<Var> {
    let m = g.value(audio).cols();
    let up = upsample(g, corr_next, out_len)?;
    let shifted = g.add_scalar(up, 1.0)?;
    let idx = g.scale(shifted, 0.5 * (m.max(1) - 1) as f64)?;
    g.interp_gather(audio, idx)
}

/// `softmax_j(audio[:, j] · video[:, i] / √C)` as an `[m × n]` map whose
/// columns sum to one.
pub fn affinity(g: &mut Graph, video: Var, audio: Var) -> Result<Var> {
    let (v, a) = (g.value(video), g.value(audio));
    if v.ndim() != 2 || a.ndim() != 2 || v.rows() != a.rows() {
        return Err(Error::ShapeMismatch {
            op: "affinity",
            lhs: v.shape().to_vec(),
            rhs: a.shape().to_vec(),
        });
    }
    let c = v.rows() as f64;
    let at = g.transpose(audio)?;
    let raw = g.matmul(at, video)?;
    let scaled = g.scale(raw, 1.0 / c.sqrt())?;
    g.softmax(scaled, 0)
}

/// `[bins × rows]` matrix moving the mass of each row into `bins` equal
/// bins by overlap, scaled by `bins` so a uniform column maps to ones.
pub fn pool_matrix(rows: usize, bins: usize) -> Tensor {
    let mut data = vec![0.0; bins * rows];
    for j in 0..rows {
        let (lo, hi) = (j as f64 / rows as f64, (j + 1) as f64 / rows as f64);
        for p in 0..bins {
            let (blo, bhi) = (p as f64 / bins as f64, (p + 1) as f64 / bins as f64);
            let overlap = hi.min(bhi) - lo.max(blo);
            if overlap > 0.0 {
                data[p * rows + j] = overlap * rows as f64 * bins as f64;
            }
        }
    }
    Tensor::new(vec![bins, rows], data).expect("sized above")
}

/// Soft-argmax weights of the coarsest level: the logit of each audio
/// frame's normalised position, kept finite at the ends.
pub fn coarse_logits(m: usize) -> Vec<f64> {
    const EDGE: f64 = 1.0 - 1e-3;
    grid(m)
        .iter()
        .map(|v| v.clamp(-EDGE, EDGE).atanh())
        .collect()
}

/// Input channels of a level head: pooled bins, `ζᵀA`, the previous
/// logits, and with a previous estimate the `2·band + 1` diagonals.
pub fn head_channels(pool_bins: usize, band: usize, refine: bool) -> usize {
    pool_bins + 2 + if refine { 2 * band + 1 } else { 0 }
}

/// Diagonals `A[i + δ, i]` for `δ ∈ [-band, band]` of a warped affinity,
/// scaled by the row count like the pooled bins. Rows outside the range
/// read zero.
fn diagonal_band(g: &mut Graph, aff: Var, band: usize) -> Result<Var> {
    let (rows, n) = (g.value(aff).rows(), g.value(aff).cols());
    let width = 2 * band + 1;
    let mut index = Vec::with_capacity(width * n);
    let mut mask = Vec::with_capacity(width * n);
    for k in 0..width {
        for i in 0..n {
            let r = i as isize + k as isize - band as isize;
            if (0..rows as isize).contains(&r) {
                index.push(r as usize * n + i);
                mask.push(rows as f64);
            } else {
                index.push(0);
                mask.push(0.0);
            }
        }
    }
    let flat = g.reshape(aff, &[rows * n])?;
    let picked = g.select(flat, &index)?;
    let mask = g.constant(Tensor::from_vec(mask));
    let band = g.mul(picked, mask)?;
    g.reshape(band, &[width, n])
}

/// Head of one level. The affinity `[R × n]` is pooled to a fixed number of
/// rows and stacked with the soft-argmax `ζᵀA` and the previous logits.
/// Refining levels, whose audio is warped to the video length, also see the
/// affinity band around the diagonal. A small convolution emits a residual
/// logit and the level's logits are `previous + residual`. Returns the
/// logits; the correspondence is their `tanh`.
pub fn predict_level(
    g: &mut Graph,
    aff: Var,
    zeta: Var,
    previous: Option<Var>,
    head: &HeadConvs,
    pool_bins: usize,
    band: usize,
    slope: f64,
) -> Result<Var> {
    let (rows, n) = (g.value(aff).rows(), g.value(aff).cols());
    if g.value(zeta).numel() != rows {
        return Err(Error::LengthMismatch {
            op: "predict_level",
            expected: rows,
            actual: g.value(zeta).numel(),
        });
    }
    let pool = g.constant(pool_matrix(rows, pool_bins));
    let pooled = g.matmul(pool, aff)?;
    let zeta_row = g.reshape(zeta, &[1, rows])?;
    let soft_argmax = g.matmul(zeta_row, aff)?;
    let x = match previous {
        Some(p) => {
            let prev_row = g.reshape(p, &[1, n])?;
            let diag = diagonal_band(g, aff, band)?;
            g.concat_rows(&[pooled, soft_argmax, prev_row, diag])?
        }
        None => {
            let prev_row = g.constant(Tensor::zeros(&[1, n]));
            g.concat_rows(&[pooled, soft_argmax, prev_row])?
        }
    };
    let h = head.c1.apply(g, x, 1)?;
    let h = g.leaky_relu(h, slope)?;
    let out = head.c2.apply(g, h, 1)?;
    let skip = head.skip.apply(g, x, 1)?;
    let residual = g.add(out, skip)?;
    let residual = g.reshape(residual, &[n])?;
    match previous {
        Some(p) => g.add(p, residual),
        None => Ok(residual),
    }
}
