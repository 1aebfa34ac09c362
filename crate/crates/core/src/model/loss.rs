//! Training objectives over per-level correspondence predictions.

use crate::error::{Error, Result};
use crate::tensor::{Graph, Tensor, Var};

fn check_levels(op: &'static str, preds: usize, other: usize) -> Result<()> {
    if preds != other {
        return Err(Error::LengthMismatch {
            op,
            expected: other,
            actual: preds,
        });
    }
    Ok(())
}

/// `Σ_l λ_l · mean_i |d_l(i) − gt_l(i)|`.
pub fn loss_fs(g: &mut Graph, preds: &[Var], gts: &[&[f64]], weights: &[f64]) -> Result<Var> {
    check_levels("loss_fs", preds.len(), gts.len())?;
    check_levels("loss_fs", preds.len(), weights.len())?;
    let mut total: Option<Var> = None;
    for ((&p, gt), &w) in preds.iter().zip(gts).zip(weights) {
        let n = g.value(p).numel();
        if n != gt.len() {
            return Err(Error::LengthMismatch {
                op: "loss_fs",
                expected: gt.len(),
                actual: n,
            });
        }
        let target = g.constant(Tensor::from_vec(gt.to_vec()));
        let diff = g.sub(p, target)?;
        let abs = g.abs(diff)?;
        let mean = g.mean(abs)?;
        let term = g.scale(mean, w)?;
        total = Some(match total {
            Some(t) => g.add(t, term)?,
            None => term,
        });
    }
    match total {
        Some(t) => Ok(t),
        None => Ok(g.constant(Tensor::scalar(0.0))),
    }
}

/// Margin of one audio frame at a level with `m_audio` frames, in
/// normalised units: `κ · 2 / (m_audio − 1)`.
pub fn mono_margin(kappa: f64, m_audio: usize) -> f64 {
    kappa * 2.0 / (m_audio.max(2) - 1) as f64
}

/// `Σ_l λ_l · Σ_i max(0, d_l(i) − d_l(i+1) + margin_l)`.
pub fn loss_mono(g: &mut Graph, preds: &[Var], margins: &[f64], weights: &[f64]) -> Result<Var> {
    check_levels("loss_mono", preds.len(), margins.len())?;
    check_levels("loss_mono", preds.len(), weights.len())?;
    let mut total: Option<Var> = None;
    for ((&p, &margin), &w) in preds.iter().zip(margins).zip(weights) {
        let n = g.value(p).numel();
        if n < 2 {
            continue;
        }
        let head = g.narrow(p, 0, n - 1)?;
        let tail = g.narrow(p, 1, n - 1)?;
        let drop = g.sub(head, tail)?;
        let shifted = g.add_scalar(drop, margin)?;
        let hinge = g.relu(shifted)?;
        let sum = g.sum(hinge)?;
        let term = g.scale(sum, w)?;
        total = Some(match total {
            Some(t) => g.add(t, term)?,
            None => term,
        });
    }
    match total {
        Some(t) => Ok(t),
        None => Ok(g.constant(Tensor::scalar(0.0))),
    }
}

/// `fs + μ · mono`.
pub fn total_loss(g: &mut Graph, fs: Var, mono: Var, mu: f64) -> Result<Var> {
    if !(mu >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mono weight must be non-negative, got {mu}"
        )));
    }
    let weighted = g.scale(mono, mu)?;
    g.add(fs, weighted)
}
