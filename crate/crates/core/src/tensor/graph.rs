//! Per-pass computation tape with reverse-mode differentiation.
//!
//! A [`Graph`] records every operation of one forward pass. Node handles
//! ([`Var`]) are plain indices, so building a graph never fights the borrow
//! checker. The graph owns all intermediate values and is dropped after
//! `backward`; nothing persists across training steps.

use super::dense::Tensor;
use super::kernels;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise operation kinds.
///
/// `LeakyRelu(α)` uses slope α at exactly zero; `Relu` and `Abs` use slope 0
/// there.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pointwise {
    Relu,
    LeakyRelu(f64),
    Sigmoid,
    Tanh,
    Abs,
    Scale(f64),
    AddScalar(f64),
    Add,
    Sub,
    Mul,
}

impl Pointwise {
    fn arity(self) -> usize {
        match self {
            Pointwise::Add | Pointwise::Sub | Pointwise::Mul => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Conv1d {
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    },
    Unary {
        x: Var,
        kind: Pointwise,
    },
    Binary {
        a: Var,
        b: Var,
        kind: Pointwise,
    },
    Softmax {
        x: Var,
        axis: usize,
    },
    InterpGather {
        values: Var,
        positions: Var,
    },
    Matmul {
        a: Var,
        b: Var,
    },
    Transpose {
        x: Var,
    },
    Sum {
        x: Var,
    },
    Mean {
        x: Var,
    },
    ConcatRows {
        parts: Vec<Var>,
    },
    Narrow {
        x: Var,
        start: usize,
        len: usize,
    },
    MulRows {
        x: Var,
        w: Var,
    },
    MulCols {
        x: Var,
        w: Var,
    },
    Select {
        x: Var,
        index: Vec<usize>,
    },
    Reshape {
        x: Var,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds an input tensor. Its `requires_grad` flag decides whether
    /// `backward` fills its gradient.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let needs_grad = t.requires_grad();
        self.push(t, Op::Leaf, needs_grad)
    }

    /// Adds a constant (never receives a gradient).
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t.with_requires_grad(false), Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient stored on a leaf after `backward`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    /// Moves a node's tensor (with its gradient) out of the graph.
    pub fn take(&mut self, v: Var) -> Tensor {
        std::mem::replace(&mut self.nodes[v.0].value, Tensor::scalar(0.0))
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    // ---------------------------------------------------------------- ops

    /// 1-D convolution over `input[c_in×t]` with `kernel[c_out×c_in×k]`.
    pub fn conv1d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let x = self.value(input);
        let w = self.value(kernel);
        if x.ndim() != 2 || w.ndim() != 3 || w.shape()[1] != x.shape()[0] {
            return Err(shape_err("conv1d", x, w));
        }
        let (c_in, t) = (x.shape()[0], x.shape()[1]);
        let (c_out, k) = (w.shape()[0], w.shape()[2]);
        if k == 0 || stride == 0 {
            return Err(Error::InvalidArgument(format!(
                "conv1d needs k >= 1 and stride >= 1 (k={k}, stride={stride})"
            )));
        }
        if t + 2 * padding < k {
            return Err(Error::TooShort(format!(
                "conv1d input length {t} with padding {padding} is shorter than kernel {k}"
            )));
        }
        let b = match bias {
            Some(bv) => {
                let b = self.value(bv);
                if b.shape() != [c_out] {
                    return Err(shape_err("conv1d bias", w, b));
                }
                Some(b.data())
            }
            None => None,
        };
        let out =
            kernels::conv1d_forward(x.data(), c_in, t, w.data(), c_out, k, b, stride, padding);
        let t_out = kernels::conv1d_out_len(t, k, stride, padding);
        let mut deps = vec![input, kernel];
        deps.extend(bias);
        let ng = self.ng(&deps);
        Ok(self.push(
            Tensor::new(vec![c_out, t_out], out)?,
            Op::Conv1d {
                input,
                kernel,
                bias,
                stride,
                padding,
            },
            ng,
        ))
    }

    /// Elementwise op dispatcher. Binary kinds accept equal shapes or a
    /// one-element operand that broadcasts.
    pub fn pointwise(&mut self, kind: Pointwise, operands: &[Var]) -> Result<Var> {
        if operands.len() != kind.arity() {
            return Err(Error::InvalidArgument(format!(
                "{kind:?} takes {} operand(s), got {}",
                kind.arity(),
                operands.len()
            )));
        }
        if kind.arity() == 1 {
            let x = operands[0];
            let xv = self.value(x);
            let data: Vec<f64> = xv
                .data()
                .iter()
                .map(|&v| match kind {
                    Pointwise::Relu => v.max(0.0),
                    Pointwise::LeakyRelu(a) => {
                        if v > 0.0 {
                            v
                        } else {
                            a * v
                        }
                    }
                    Pointwise::Sigmoid => sigmoid(v),
                    Pointwise::Tanh => v.tanh(),
                    Pointwise::Abs => v.abs(),
                    Pointwise::Scale(c) => c * v,
                    Pointwise::AddScalar(c) => v + c,
                    _ => unreachable!(),
                })
                .collect();
            let out = Tensor::new(xv.shape().to_vec(), data)?;
            let ng = self.ng(&[x]);
            return Ok(self.push(out, Op::Unary { x, kind }, ng));
        }
        let (a, b) = (operands[0], operands[1]);
        let (av, bv) = (self.value(a), self.value(b));
        let f = |x: f64, y: f64| match kind {
            Pointwise::Add => x + y,
            Pointwise::Sub => x - y,
            Pointwise::Mul => x * y,
            _ => unreachable!(),
        };
        let out = if av.shape() == bv.shape() {
            let d = av
                .data()
                .iter()
                .zip(bv.data())
                .map(|(&x, &y)| f(x, y))
                .collect();
            Tensor::new(av.shape().to_vec(), d)?
        } else if bv.is_scalar() {
            let y = bv.data()[0];
            Tensor::new(
                av.shape().to_vec(),
                av.data().iter().map(|&x| f(x, y)).collect(),
            )?
        } else if av.is_scalar() {
            let x = av.data()[0];
            Tensor::new(
                bv.shape().to_vec(),
                bv.data().iter().map(|&y| f(x, y)).collect(),
            )?
        } else {
            return Err(shape_err("pointwise", av, bv));
        };
        let ng = self.ng(&[a, b]);
        Ok(self.push(out, Op::Binary { a, b, kind }, ng))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.pointwise(Pointwise::Relu, &[x])
    }

    pub fn leaky_relu(&mut self, x: Var, alpha: f64) -> Result<Var> {
        self.pointwise(Pointwise::LeakyRelu(alpha), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.pointwise(Pointwise::Sigmoid, &[x])
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.pointwise(Pointwise::Tanh, &[x])
    }

    pub fn abs(&mut self, x: Var) -> Result<Var> {
        self.pointwise(Pointwise::Abs, &[x])
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.pointwise(Pointwise::Scale(c), &[x])
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Result<Var> {
        self.pointwise(Pointwise::AddScalar(c), &[x])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.pointwise(Pointwise::Add, &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.pointwise(Pointwise::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.pointwise(Pointwise::Mul, &[a, b])
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let xv = self.value(x);
        if axis >= xv.ndim() {
            return Err(Error::InvalidArgument(format!(
                "softmax axis {axis} out of range for shape {:?}",
                xv.shape()
            )));
        }
        let (outer, len, inner) = kernels::axis_split(xv.shape(), axis);
        let out = kernels::softmax(xv.data(), outer, len, inner);
        let out = Tensor::new(xv.shape().to_vec(), out)?;
        let ng = self.ng(&[x]);
        Ok(self.push(out, Op::Softmax { x, axis }, ng))
    }

    /// Linear interpolation of `values[c×t]` (or `[t]`) at fractional
    /// `positions[n]`, clamped to `[0, t-1]`.
    ///
    /// The position gradient is the local slope; at an exact integer index
    /// the right-hand segment is used (the left-hand one at `t-1`), and it is
    /// zero wherever clamping is active.
    pub fn interp_gather(&mut self, values: Var, positions: Var) -> Result<Var> {
        let v = self.value(values);
        let p = self.value(positions);
        if p.ndim() != 1 || !(1..=2).contains(&v.ndim()) {
            return Err(shape_err("interp_gather", v, p));
        }
        let (c, t) = if v.ndim() == 2 {
            (v.shape()[0], v.shape()[1])
        } else {
            (1, v.shape()[0])
        };
        if t == 0 {
            return Err(Error::InvalidArgument(
                "interp_gather over empty values".into(),
            ));
        }
        let n = p.numel();
        let out = kernels::interp_gather(v.data(), c, t, p.data());
        let shape = if v.ndim() == 2 { vec![c, n] } else { vec![n] };
        let ng = self.ng(&[values, positions]);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::InterpGather { values, positions },
            ng,
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.ndim() != 2 || bv.ndim() != 2 || av.shape()[1] != bv.shape()[0] {
            return Err(shape_err("matmul", av, bv));
        }
        let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
        let out = kernels::matmul(av.data(), bv.data(), m, k, n);
        let ng = self.ng(&[a, b]);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::Matmul { a, b }, ng))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.ndim() != 2 {
            return Err(Error::InvalidArgument(format!(
                "transpose needs 2-D, got {:?}",
                xv.shape()
            )));
        }
        let (r, c) = (xv.shape()[0], xv.shape()[1]);
        let out = kernels::transpose(xv.data(), r, c);
        let ng = self.ng(&[x]);
        Ok(self.push(Tensor::new(vec![c, r], out)?, Op::Transpose { x }, ng))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        let ng = self.ng(&[x]);
        Ok(self.push(Tensor::scalar(s), Op::Sum { x }, ng))
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.numel() == 0 {
            return Err(Error::InvalidArgument("mean of empty tensor".into()));
        }
        let s = xv.data().iter().sum::<f64>() / xv.numel() as f64;
        let ng = self.ng(&[x]);
        Ok(self.push(Tensor::scalar(s), Op::Mean { x }, ng))
    }

    /// Stacks 2-D tensors with equal column counts along the row axis.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of nothing".into()))?;
        let cols = self.value(*first).shape().get(1).copied().unwrap_or(0);
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let pv = self.value(p);
            if pv.ndim() != 2 || pv.shape()[1] != cols {
                return Err(shape_err("concat_rows", self.value(*first), pv));
            }
            rows += pv.shape()[0];
            data.extend_from_slice(pv.data());
        }
        let ng = self.ng(parts);
        Ok(self.push(
            Tensor::new(vec![rows, cols], data)?,
            Op::ConcatRows {
                parts: parts.to_vec(),
            },
            ng,
        ))
    }

    /// Slice `[start, start+len)` along the last axis.
    pub fn narrow(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        let last = *xv
            .shape()
            .last()
            .ok_or_else(|| Error::InvalidArgument("narrow on a scalar".into()))?;
        if start + len > last {
            return Err(Error::InvalidArgument(format!(
                "narrow [{start}, {}) exceeds last axis {last}",
                start + len
            )));
        }
        let outer = xv.numel() / last.max(1);
        let mut data = Vec::with_capacity(outer * len);
        for o in 0..outer {
            data.extend_from_slice(&xv.data()[o * last + start..o * last + start + len]);
        }
        let mut shape = xv.shape().to_vec();
        *shape.last_mut().unwrap() = len;
        let ng = self.ng(&[x]);
        Ok(self.push(Tensor::new(shape, data)?, Op::Narrow { x, start, len }, ng))
    }

    /// `out[c, t] = x[c, t] * w[c]`.
    pub fn mul_rows(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        if xv.ndim() != 2 || wv.shape() != [xv.shape()[0]] {
            return Err(shape_err("mul_rows", xv, wv));
        }
        let t = xv.shape()[1];
        let data = xv
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v * wv.data()[i / t])
            .collect();
        let ng = self.ng(&[x, w]);
        Ok(self.push(
            Tensor::new(xv.shape().to_vec(), data)?,
            Op::MulRows { x, w },
            ng,
        ))
    }

    /// `out[c, t] = x[c, t] * w[t]`.
    pub fn mul_cols(&mut self, x: Var, w: Var) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        if xv.ndim() != 2 || wv.shape() != [xv.shape()[1]] {
            return Err(shape_err("mul_cols", xv, wv));
        }
        let t = xv.shape()[1];
        let data = xv
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v * wv.data()[i % t])
            .collect();
        let ng = self.ng(&[x, w]);
        Ok(self.push(
            Tensor::new(xv.shape().to_vec(), data)?,
            Op::MulCols { x, w },
            ng,
        ))
    }

    /// Gathers elements of a 1-D tensor by index.
    pub fn select(&mut self, x: Var, index: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        if xv.ndim() != 1 {
            return Err(Error::InvalidArgument(format!(
                "select needs 1-D, got {:?}",
                xv.shape()
            )));
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= xv.numel()) {
            return Err(Error::InvalidArgument(format!(
                "select index {bad} out of range {}",
                xv.numel()
            )));
        }
        let data = index.iter().map(|&i| xv.data()[i]).collect();
        let ng = self.ng(&[x]);
        Ok(self.push(
            Tensor::from_vec(data),
            Op::Select {
                x,
                index: index.to_vec(),
            },
            ng,
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().with_requires_grad(false);
        let mut out = out.reshape(shape.to_vec())?;
        out.zero_grad();
        let ng = self.ng(&[x]);
        Ok(self.push(out, Op::Reshape { x }, ng))
    }

    // ----------------------------------------------------------- backward

    /// Reverse pass from a scalar `loss`. Every leaf created with
    /// `requires_grad` accumulates `dloss/dleaf`; fan-out contributions sum.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);
        let mut leaf_grads = Vec::new();

        for id in (0..n).rev() {
            if !self.nodes[id].needs_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let nodes = &self.nodes;
            let node = &nodes[id];
            // Accumulation buffer for an input, or None when it needs no grad.
            macro_rules! buf {
                ($v:expr) => {{
                    let v: Var = $v;
                    if nodes[v.0].needs_grad {
                        let len = nodes[v.0].value.numel();
                        Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]))
                    } else {
                        None
                    }
                }};
            }
            match &node.op {
                Op::Leaf => leaf_grads.push((id, g)),
                Op::Conv1d {
                    input,
                    kernel,
                    bias,
                    stride,
                    padding,
                } => {
                    let x = &nodes[input.0].value;
                    let w = &nodes[kernel.0].value;
                    let (c_in, t) = (x.shape()[0], x.shape()[1]);
                    let (c_out, k) = (w.shape()[0], w.shape()[2]);
                    // Inputs are distinct nodes, so take buffers one at a time.
                    let mut gx = buf!(*input).map(std::mem::take);
                    let mut gw = buf!(*kernel).map(std::mem::take);
                    let mut gb = bias.and_then(|b| buf!(b).map(std::mem::take));
                    kernels::conv1d_backward(
                        &g,
                        x.data(),
                        c_in,
                        t,
                        w.data(),
                        c_out,
                        k,
                        *stride,
                        *padding,
                        gx.as_deref_mut(),
                        gw.as_deref_mut(),
                        gb.as_deref_mut(),
                    );
                    if let Some(gx) = gx {
                        grads[input.0] = Some(gx);
                    }
                    if let Some(gw) = gw {
                        grads[kernel.0] = Some(gw);
                    }
                    if let (Some(b), Some(gb)) = (bias, gb) {
                        grads[b.0] = Some(gb);
                    }
                }
                Op::Unary { x, kind } => {
                    let xv = nodes[x.0].value.data();
                    let y = node.value.data();
                    if let Some(gx) = buf!(*x) {
                        for i in 0..gx.len() {
                            let d = match *kind {
                                Pointwise::Relu => f64::from(u8::from(xv[i] > 0.0)),
                                Pointwise::LeakyRelu(a) => {
                                    if xv[i] > 0.0 {
                                        1.0
                                    } else {
                                        a
                                    }
                                }
                                Pointwise::Sigmoid => y[i] * (1.0 - y[i]),
                                Pointwise::Tanh => 1.0 - y[i] * y[i],
                                Pointwise::Abs => {
                                    if xv[i] > 0.0 {
                                        1.0
                                    } else if xv[i] < 0.0 {
                                        -1.0
                                    } else {
                                        0.0
                                    }
                                }
                                Pointwise::Scale(c) => c,
                                Pointwise::AddScalar(_) => 1.0,
                                _ => unreachable!(),
                            };
                            gx[i] += g[i] * d;
                        }
                    }
                }
                Op::Binary { a, b, kind } => {
                    let av = &nodes[a.0].value;
                    let bv = &nodes[b.0].value;
                    let out_len = g.len();
                    let a_b = av.numel() != out_len;
                    let b_b = bv.numel() != out_len;
                    let ad = av.data();
                    let bd = bv.data();
                    let aval = |i: usize| if a_b { ad[0] } else { ad[i] };
                    let bval = |i: usize| if b_b { bd[0] } else { bd[i] };
                    let (da, db): (Vec<f64>, Vec<f64>) = (0..out_len)
                        .map(|i| match kind {
                            Pointwise::Add => (g[i], g[i]),
                            Pointwise::Sub => (g[i], -g[i]),
                            Pointwise::Mul => (g[i] * bval(i), g[i] * aval(i)),
                            _ => unreachable!(),
                        })
                        .unzip();
                    if let Some(ga) = buf!(*a) {
                        if a_b {
                            ga[0] += da.iter().sum::<f64>();
                        } else {
                            ga.iter_mut().zip(&da).for_each(|(x, d)| *x += d);
                        }
                    }
                    if let Some(gb) = buf!(*b) {
                        if b_b {
                            gb[0] += db.iter().sum::<f64>();
                        } else {
                            gb.iter_mut().zip(&db).for_each(|(x, d)| *x += d);
                        }
                    }
                }
                Op::Softmax { x, axis } => {
                    let y = &node.value;
                    let (outer, len, inner) = kernels::axis_split(y.shape(), *axis);
                    if let Some(gx) = buf!(*x) {
                        kernels::softmax_backward(y.data(), &g, outer, len, inner, gx);
                    }
                }
                Op::InterpGather { values, positions } => {
                    let v = &nodes[values.0].value;
                    let p = nodes[positions.0].value.data();
                    let (c, t) = if v.ndim() == 2 {
                        (v.shape()[0], v.shape()[1])
                    } else {
                        (1, v.shape()[0])
                    };
                    let n = p.len();
                    let vd = v.data();
                    if let Some(gv) = buf!(*values) {
                        for (o, &pos) in p.iter().enumerate() {
                            let (i0, f, _) = kernels::interp_coords(pos, t);
                            for ch in 0..c {
                                let go = g[ch * n + o];
                                if t == 1 {
                                    gv[ch * t] += go;
                                } else {
                                    gv[ch * t + i0] += go * (1.0 - f);
                                    gv[ch * t + i0 + 1] += go * f;
                                }
                            }
                        }
                    }
                    if let Some(gp) = buf!(*positions) {
                        for (o, &pos) in p.iter().enumerate() {
                            let (i0, _, in_range) = kernels::interp_coords(pos, t);
                            if !in_range {
                                continue;
                            }
                            gp[o] += (0..c)
                                .map(|ch| g[ch * n + o] * (vd[ch * t + i0 + 1] - vd[ch * t + i0]))
                                .sum::<f64>();
                        }
                    }
                }
                Op::Matmul { a, b } => {
                    let av = &nodes[a.0].value;
                    let bv = &nodes[b.0].value;
                    let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                    let (ad, bd) = (av.data(), bv.data());
                    if a == b {
                        let mut tmp = vec![0.0; m * k];
                        kernels::matmul_grad_a(&g, bd, m, k, n, &mut tmp);
                        kernels::matmul_grad_b(&g, ad, m, k, n, &mut tmp);
                        if let Some(ga) = buf!(*a) {
                            ga.iter_mut().zip(&tmp).for_each(|(x, d)| *x += d);
                        }
                    } else {
                        if let Some(ga) = buf!(*a) {
                            kernels::matmul_grad_a(&g, bd, m, k, n, ga);
                        }
                        if let Some(gb) = buf!(*b) {
                            kernels::matmul_grad_b(&g, ad, m, k, n, gb);
                        }
                    }
                }
                Op::Transpose { x } => {
                    let (r, c) = (node.value.shape()[0], node.value.shape()[1]);
                    let gt = kernels::transpose(&g, r, c);
                    if let Some(gx) = buf!(*x) {
                        gx.iter_mut().zip(&gt).for_each(|(a, d)| *a += d);
                    }
                }
                Op::Sum { x } => {
                    if let Some(gx) = buf!(*x) {
                        gx.iter_mut().for_each(|v| *v += g[0]);
                    }
                }
                Op::Mean { x } => {
                    if let Some(gx) = buf!(*x) {
                        let s = g[0] / gx.len() as f64;
                        gx.iter_mut().for_each(|v| *v += s);
                    }
                }
                Op::ConcatRows { parts } => {
                    let mut off = 0;
                    for &p in parts {
                        let len = nodes[p.0].value.numel();
                        if let Some(gp) = buf!(p) {
                            gp.iter_mut()
                                .zip(&g[off..off + len])
                                .for_each(|(a, d)| *a += d);
                        }
                        off += len;
                    }
                }
                Op::Narrow { x, start, len } => {
                    let last = *nodes[x.0].value.shape().last().unwrap();
                    if let Some(gx) = buf!(*x) {
                        let outer = gx.len() / last.max(1);
                        for o in 0..outer {
                            for i in 0..*len {
                                gx[o * last + start + i] += g[o * len + i];
                            }
                        }
                    }
                }
                Op::MulRows { x, w } => {
                    let xv = &nodes[x.0].value;
                    let wd = nodes[w.0].value.data();
                    let t = xv.shape()[1];
                    if let Some(gx) = buf!(*x) {
                        for (i, a) in gx.iter_mut().enumerate() {
                            *a += g[i] * wd[i / t];
                        }
                    }
                    if let Some(gw) = buf!(*w) {
                        for (i, &xi) in xv.data().iter().enumerate() {
                            gw[i / t] += g[i] * xi;
                        }
                    }
                }
                Op::MulCols { x, w } => {
                    let xv = &nodes[x.0].value;
                    let wd = nodes[w.0].value.data();
                    let t = xv.shape()[1];
                    if let Some(gx) = buf!(*x) {
                        for (i, a) in gx.iter_mut().enumerate() {
                            *a += g[i] * wd[i % t];
                        }
                    }
                    if let Some(gw) = buf!(*w) {
                        for (i, &xi) in xv.data().iter().enumerate() {
                            gw[i % t] += g[i] * xi;
                        }
                    }
                }
                Op::Select { x, index } => {
                    if let Some(gx) = buf!(*x) {
                        for (o, &i) in index.iter().enumerate() {
                            gx[i] += g[o];
                        }
                    }
                }
                Op::Reshape { x } => {
                    if let Some(gx) = buf!(*x) {
                        gx.iter_mut().zip(&g).for_each(|(a, d)| *a += d);
                    }
                }
            }
        }

        for (id, g) in leaf_grads {
            if self.nodes[id].value.requires_grad() {
                self.nodes[id].value.accumulate_grad(g);
            }
        }
        Ok(())
    }
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}
