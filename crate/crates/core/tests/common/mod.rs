//! Shared test oracles: central finite differences over the autodiff graph.
#![allow(dead_code)]

use alignnet::tensor::{Graph, Tensor, Var};
use alignnet::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// `‖a − n‖ / (‖a‖ + ‖n‖)`, with a floor on the denominator for all-zero
/// gradients.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / (norm(analytic) + norm(numeric)).max(1e-10)
}

/// Builds `f(inputs)` and reduces a non-scalar output to a scalar by a fixed
/// random projection, so the whole Jacobian is exercised.
pub fn project<F>(g: &mut Graph, vars: &[Var], f: &F, weights_seed: u64) -> Result<Var>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let out = f(g, vars)?;
    if g.value(out).is_scalar() {
        return Ok(out);
    }
    let shape = g.value(out).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(weights_seed);
    let w: Vec<f64> = (0..g.value(out).numel())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let w = g.constant(Tensor::new(shape, w)?);
    let prod = g.mul(out, w)?;
    g.sum(prod)
}

/// Returns `(analytic, numeric)` gradients for every input, in order.
pub fn gradients<F>(inputs: &[Tensor], f: F) -> Result<Vec<(Vec<f64>, Vec<f64>)>>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |ts: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ts.iter().map(|t| g.leaf(t.clone())).collect();
        let out = project(&mut g, &vars, &f, 7)?;
        Ok(g.value(out).item())
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|t| g.leaf(t.clone().with_requires_grad(true)))
        .collect();
    let out = project(&mut g, &vars, &f, 7)?;
    g.backward(out)?;

    let mut result = Vec::new();
    for (k, v) in vars.iter().enumerate() {
        let analytic = g
            .grad(*v)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; inputs[k].numel()]);
        let mut numeric = vec![0.0; inputs[k].numel()];
        for i in 0..inputs[k].numel() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= FD_STEP;
            numeric[i] = (eval(&plus)? - eval(&minus)?) / (2.0 * FD_STEP);
        }
        result.push((analytic, numeric));
    }
    Ok(result)
}

/// Worst relative error over all inputs.
pub fn max_gradient_error<F>(inputs: &[Tensor], f: F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    Ok(gradients(inputs, f)?
        .iter()
        .map(|(a, n)| relative_error(a, n))
        .fold(0.0, f64::max))
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// Random values bounded away from zero (for ops with a kink at 0).
pub fn random_off_kink(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.05..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Minimum DTW cost over every monotone path, by exhaustive enumeration.
/// Costs accumulate from `(0, 0)` forward.
pub fn brute_force_dtw(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    fn cost(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
    }
    fn walk(x: &[Vec<f64>], y: &[Vec<f64>], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + cost(&x[i], &y[j]);
        if i + 1 == x.len() && j + 1 == y.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < x.len() && j + 1 < y.len() {
            walk(x, y, i + 1, j + 1, acc, best);
        }
        if i + 1 < x.len() {
            walk(x, y, i + 1, j, acc, best);
        }
        if j + 1 < y.len() {
            walk(x, y, i, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(x, y, 0, 0, 0.0, &mut best);
    best
}

/// Columns of a `d × n` feature matrix as vectors.
pub fn columns(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.cols())
        .map(|c| (0..t.rows()).map(|r| t.at2(r, c)).collect())
        .collect()
}
