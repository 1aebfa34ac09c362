//! Raw forward/backward kernels over row-major slices.
//!
//! Everything here is shape-checked by the caller ([`super::Graph`]).

/// Output length of a 1-D convolution.
pub fn conv1d_out_len(t: usize, k: usize, stride: usize, padding: usize) -> usize {
    (t + 2 * padding - k) / stride + 1
}

/// Unrolled input patches, `[c_in·k, t_out]`: row `ci·k + kk` holds
/// `x[ci, to·stride + kk − padding]`, zero outside the input.
fn im2col(
    x: &[f64],
    c_in: usize,
    t: usize,
    k: usize,
    stride: usize,
    padding: usize,
    t_out: usize,
) -> Vec<f64> {
    let mut cols = vec![0.0; c_in * k * t_out];
    for ci in 0..c_in {
        let xrow = &x[ci * t..(ci + 1) * t];
        for kk in 0..k {
            let row = &mut cols[(ci * k + kk) * t_out..(ci * k + kk + 1) * t_out];
            let (lo, hi) = valid_range(t, t_out, kk, stride, padding);
            if stride == 1 {
                let off = lo + kk - padding;
                row[lo..hi].copy_from_slice(&xrow[off..off + (hi - lo)]);
            } else {
                for (to, r) in row.iter_mut().enumerate().take(hi).skip(lo) {
                    *r = xrow[to * stride + kk - padding];
                }
            }
        }
    }
    cols
}

/// `Σ a_i b_i` with independent partial sums so the loop vectorises.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (o, &v) in y.iter_mut().zip(x) {
        *o += alpha * v;
    }
}

/// Cross-correlation (no kernel flip) with zero padding.
///
/// `x`: `[c_in, t]`, `w`: `[c_out, c_in, k]`, `b`: `[c_out]`, output `[c_out, t_out]`.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_forward(
    x: &[f64],
    c_in: usize,
    t: usize,
    w: &[f64],
    c_out: usize,
    k: usize,
    b: Option<&[f64]>,
    stride: usize,
    padding: usize,
) -> Vec<f64> {
    let t_out = conv1d_out_len(t, k, stride, padding);
    let cols = im2col(x, c_in, t, k, stride, padding, t_out);
    let ck = c_in * k;
    let mut out = vec![0.0; c_out * t_out];
    for co in 0..c_out {
        let orow = &mut out[co * t_out..(co + 1) * t_out];
        if let Some(b) = b {
            orow.iter_mut().for_each(|o| *o = b[co]);
        }
        for (j, &wv) in w[co * ck..(co + 1) * ck].iter().enumerate() {
            if wv != 0.0 {
                axpy(wv, &cols[j * t_out..(j + 1) * t_out], orow);
            }
        }
    }
    out
}

/// Range of output positions whose tap `kk` lands inside the input.
#[inline]
fn valid_range(t: usize, t_out: usize, kk: usize, stride: usize, padding: usize) -> (usize, usize) {
    // need 0 <= to*stride + kk - padding < t
    let lo = if kk >= padding {
        0
    } else {
        (padding - kk).div_ceil(stride)
    };
    let hi = if t + padding > kk {
        ((t + padding - kk - 1) / stride + 1).min(t_out)
    } else {
        0
    };
    (lo, hi.max(lo))
}

/// Gradients of [`conv1d_forward`]. Each output buffer is accumulated into
/// when present.
#[allow(clippy::too_many_arguments)]
pub fn conv1d_backward(
    g: &[f64],
    x: &[f64],
    c_in: usize,
    t: usize,
    w: &[f64],
    c_out: usize,
    k: usize,
    stride: usize,
    padding: usize,
    gx: Option<&mut [f64]>,
    gw: Option<&mut [f64]>,
    gb: Option<&mut [f64]>,
) {
    let t_out = conv1d_out_len(t, k, stride, padding);
    let ck = c_in * k;
    if let Some(gb) = gb {
        for co in 0..c_out {
            gb[co] += g[co * t_out..(co + 1) * t_out].iter().sum::<f64>();
        }
    }
    if let Some(gw) = gw {
        let cols = im2col(x, c_in, t, k, stride, padding, t_out);
        for co in 0..c_out {
            let grow = &g[co * t_out..(co + 1) * t_out];
            for j in 0..ck {
                gw[co * ck + j] += dot(grow, &cols[j * t_out..(j + 1) * t_out]);
            }
        }
    }
    if let Some(gx) = gx {
        let mut gcols = vec![0.0; ck * t_out];
        for co in 0..c_out {
            let grow = &g[co * t_out..(co + 1) * t_out];
            for (j, &wv) in w[co * ck..(co + 1) * ck].iter().enumerate() {
                if wv != 0.0 {
                    axpy(wv, grow, &mut gcols[j * t_out..(j + 1) * t_out]);
                }
            }
        }
        for ci in 0..c_in {
            let gxrow = &mut gx[ci * t..(ci + 1) * t];
            for kk in 0..k {
                let row = &gcols[(ci * k + kk) * t_out..(ci * k + kk + 1) * t_out];
                let (lo, hi) = valid_range(t, t_out, kk, stride, padding);
                for to in lo..hi {
                    gxrow[to * stride + kk - padding] += row[to];
                }
            }
        }
    }
}

/// `a[m×k] · b[k×n]`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// Accumulates `g[m×n] · bᵀ` into `ga[m×k]`.
pub fn matmul_grad_a(g: &[f64], b: &[f64], m: usize, k: usize, n: usize, ga: &mut [f64]) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            ga[i * k + p] += dot(grow, brow);
        }
    }
}

/// Accumulates `aᵀ · g[m×n]` into `gb[k×n]`.
pub fn matmul_grad_b(g: &[f64], a: &[f64], m: usize, k: usize, n: usize, gb: &mut [f64]) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (o, &gv) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
}

pub fn transpose(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = x[r * cols + c];
        }
    }
    out
}

/// Splits a shape around `axis` into `(outer, len, inner)`.
pub fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Softmax along one axis with max subtraction.
pub fn softmax(x: &[f64], outer: usize, len: usize, inner: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |a: usize| (o * len + a) * inner + i;
            let max = (0..len)
                .map(|a| x[idx(a)])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for a in 0..len {
                let e = (x[idx(a)] - max).exp();
                out[idx(a)] = e;
                sum += e;
            }
            for a in 0..len {
                out[idx(a)] /= sum;
            }
        }
    }
    out
}

pub fn softmax_backward(
    y: &[f64],
    g: &[f64],
    outer: usize,
    len: usize,
    inner: usize,
    gx: &mut [f64],
) {
    for o in 0..outer {
        for i in 0..inner {
            let idx = |a: usize| (o * len + a) * inner + i;
            let dot: f64 = (0..len).map(|a| y[idx(a)] * g[idx(a)]).sum();
            for a in 0..len {
                gx[idx(a)] += y[idx(a)] * (g[idx(a)] - dot);
            }
        }
    }
}

/// Left sample index and fraction for linear interpolation at `p` over `t`
/// samples. Positions are clamped to `[0, t-1]`; `in_range` is false when
/// clamping was active.
#[inline]
pub fn interp_coords(p: f64, t: usize) -> (usize, f64, bool) {
    if t == 1 {
        return (0, 0.0, false);
    }
    let max = (t - 1) as f64;
    let in_range = (0.0..=max).contains(&p);
    let pc = p.clamp(0.0, max);
    let i0 = (pc.floor() as usize).min(t - 2);
    (i0, pc - i0 as f64, in_range)
}

/// Linear interpolation of each row of `v[c×t]` at `positions`.
pub fn interp_gather(v: &[f64], c: usize, t: usize, positions: &[f64]) -> Vec<f64> {
    let n = positions.len();
    let mut out = vec![0.0; c * n];
    for (o, &p) in positions.iter().enumerate() {
        let (i0, f, _) = interp_coords(p, t);
        for ch in 0..c {
            let row = &v[ch * t..(ch + 1) * t];
            out[ch * n + o] = if t == 1 {
                row[0]
            } else {
                row[i0] * (1.0 - f) + row[i0 + 1] * f
            };
        }
    }
    out
}
