//! Tape-based reverse-mode differentiation over row-major 2-D tensors.
//!
//! Every operation appends a node holding its forward value. `backward`
//! walks the tape in reverse, routing output gradients to inputs and
//! accumulating gradients for parameter leaves.

use std::rc::Rc;

/// Row-major 2-D tensor. Vectors are `1 × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "tensor shape mismatch");
        Tensor { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Self {
        Tensor::new(rows, cols, vec![v; rows * cols])
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

// Kernels shared by the tape and by the cached inference path.

/// `a[m×k] · b[k×n]`
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `a[m×k] · b[n×k]ᵀ`
pub(crate) fn matmul_bt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out[i * n + j] = arow.iter().zip(brow).map(|(x, y)| x * y).sum();
        }
    }
    out
}

/// Accumulates `a[m×k]ᵀ · g[m×n]` into `out[k×n]`.
fn matmul_at_acc(a: &[f64], g: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let grow = &g[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, gv) in orow.iter_mut().zip(grow) {
                *o += av * gv;
            }
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

/// Writes the normalized row into `out` and returns its reciprocal standard deviation.
pub(crate) fn layer_norm_row(x: &[f64], gamma: &[f64], beta: &[f64], out: &mut [f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let rstd = 1.0 / (var + LAYER_NORM_EPS).sqrt();
    for (i, o) in out.iter_mut().enumerate() {
        *o = (x[i] - mean) * rstd * gamma[i] + beta[i];
    }
    rstd
}

/// Softmax over the entries of `row` where `allowed` is true; disallowed
/// entries are exactly zero.
pub(crate) fn masked_softmax_row(row: &[f64], allowed: Option<&[bool]>, out: &mut [f64]) {
    let ok = |j: usize| allowed.is_none_or(|a| a[j]);
    let max = (0..row.len())
        .filter(|&j| ok(j))
        .map(|j| row[j])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o = if ok(j) {
            let e = (row[j] - max).exp();
            sum += e;
            e
        } else {
            0.0
        };
    }
    if sum > 0.0 {
        for o in out.iter_mut() {
            *o /= sum;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

/// Deliberately wrong backward rules, used as negative controls for the
/// gradient checker.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackwardFault {
    Silu,
    LayerNorm,
}

enum Op {
    Constant,
    Param(usize),
    MatMul(NodeId, NodeId),
    MatMulBt(NodeId, NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    Silu(NodeId),
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    MaskedSoftmax(NodeId),
    Gather(NodeId, Vec<usize>),
    Cols {
        x: NodeId,
        start: usize,
    },
    ConcatCols(Vec<NodeId>),
    DepthwiseConv {
        x: NodeId,
        w: NodeId,
        bias: NodeId,
    },
    Dropout(NodeId, Vec<f64>),
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    fault: Option<BackwardFault>,
}

/// Gradients of the parameters touched by a backward pass, indexed like the
/// parameter store. Untouched parameters have `None`.
pub type ParamGrads = Vec<Option<Vec<f64>>>;

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    #[doc(hidden)]
    pub fn inject_fault(&mut self, fault: BackwardFault) {
        self.fault = Some(fault);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Constant)
    }

    pub fn param(&mut self, index: usize, value: Tensor) -> NodeId {
        self.push(value, Op::Param(index))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.cols, vb.rows, "matmul shape mismatch");
        let out = matmul(&va.data, &vb.data, va.rows, va.cols, vb.cols);
        let t = Tensor::new(va.rows, vb.cols, out);
        self.push(t, Op::MatMul(a, b))
    }

    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.cols, vb.cols, "matmul_bt shape mismatch");
        let out = matmul_bt(&va.data, &vb.data, va.rows, va.cols, vb.rows);
        let t = Tensor::new(va.rows, vb.rows, out);
        self.push(t, Op::MatMulBt(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "add shape mismatch");
        let data = va.data.iter().zip(&vb.data).map(|(x, y)| x + y).collect();
        let t = Tensor::new(va.rows, va.cols, data);
        self.push(t, Op::Add(a, b))
    }

    /// Adds a `1 × n` row to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(row));
        assert_eq!((vb.rows, vb.cols), (1, va.cols), "add_row shape mismatch");
        let mut data = va.data.clone();
        for chunk in data.chunks_mut(va.cols) {
            for (o, b) in chunk.iter_mut().zip(&vb.data) {
                *o += b;
            }
        }
        let t = Tensor::new(va.rows, va.cols, data);
        self.push(t, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let va = self.value(a);
        let t = Tensor::new(va.rows, va.cols, va.data.iter().map(|x| x * s).collect());
        self.push(t, Op::Scale(a, s))
    }

    pub fn silu(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let t = Tensor::new(va.rows, va.cols, va.data.iter().map(|&x| silu(x)).collect());
        self.push(t, Op::Silu(a))
    }

    /// Row-wise layer normalization with `1 × n` gain and bias.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        let (vx, vg, vb) = (self.value(x), self.value(gamma), self.value(beta));
        let n = vx.cols;
        let mut out = vec![0.0; vx.data.len()];
        let mut rstd = Vec::with_capacity(vx.rows);
        for r in 0..vx.rows {
            rstd.push(layer_norm_row(
                vx.row(r),
                &vg.data,
                &vb.data,
                &mut out[r * n..(r + 1) * n],
            ));
        }
        let mut xhat = vec![0.0; vx.data.len()];
        for r in 0..vx.rows {
            let row = vx.row(r);
            let mean = row.iter().sum::<f64>() / n as f64;
            for c in 0..n {
                xhat[r * n + c] = (row[c] - mean) * rstd[r];
            }
        }
        let t = Tensor::new(vx.rows, n, out);
        self.push(
            t,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
        )
    }

    /// Row-wise softmax restricted to entries where `mask` (row-major, same
    /// shape as `x`) is true.
    pub fn masked_softmax(&mut self, x: NodeId, mask: Option<Rc<Vec<bool>>>) -> NodeId {
        let vx = self.value(x);
        let n = vx.cols;
        if let Some(m) = &mask {
            assert_eq!(m.len(), vx.data.len(), "mask shape mismatch");
        }
        let mut out = vec![0.0; vx.data.len()];
        for r in 0..vx.rows {
            let allowed = mask.as_ref().map(|m| &m[r * n..(r + 1) * n]);
            masked_softmax_row(vx.row(r), allowed, &mut out[r * n..(r + 1) * n]);
        }
        let t = Tensor::new(vx.rows, n, out);
        self.push(t, Op::MaskedSoftmax(x))
    }

    /// Selects rows of `table`.
    pub fn gather(&mut self, table: NodeId, ids: Vec<usize>) -> NodeId {
        let vt = self.value(table);
        let mut data = Vec::with_capacity(ids.len() * vt.cols);
        for &i in &ids {
            data.extend_from_slice(vt.row(i));
        }
        let t = Tensor::new(ids.len(), vt.cols, data);
        self.push(t, Op::Gather(table, ids))
    }

    /// Columns `[start, start + width)`.
    pub fn cols(&mut self, x: NodeId, start: usize, width: usize) -> NodeId {
        let vx = self.value(x);
        assert!(start + width <= vx.cols, "column slice out of range");
        let mut data = Vec::with_capacity(vx.rows * width);
        for r in 0..vx.rows {
            data.extend_from_slice(&vx.row(r)[start..start + width]);
        }
        let t = Tensor::new(vx.rows, width, data);
        self.push(t, Op::Cols { x, start })
    }

    pub fn concat_cols(&mut self, parts: Vec<NodeId>) -> NodeId {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in &parts {
                let v = self.value(p);
                assert_eq!(v.rows, rows, "concat row mismatch");
                data.extend_from_slice(v.row(r));
            }
        }
        let t = Tensor::new(rows, cols, data);
        self.push(t, Op::ConcatCols(parts))
    }

    /// Per-channel convolution along rows (time) with a centred odd kernel
    /// `w[k × channels]` and zero padding.
    pub fn depthwise_conv(&mut self, x: NodeId, w: NodeId, bias: NodeId) -> NodeId {
        let (vx, vw, vb) = (self.value(x), self.value(w), self.value(bias));
        let (t_len, c) = (vx.rows, vx.cols);
        assert_eq!(vw.cols, c, "conv channel mismatch");
        let half = (vw.rows / 2) as isize;
        let mut out = Vec::with_capacity(t_len * c);
        for t in 0..t_len {
            out.extend_from_slice(&vb.data);
            let orow = t * c;
            for j in 0..vw.rows {
                let src = t as isize + j as isize - half;
                if src < 0 || src >= t_len as isize {
                    continue;
                }
                let xrow = vx.row(src as usize);
                let wrow = vw.row(j);
                for ch in 0..c {
                    out[orow + ch] += wrow[ch] * xrow[ch];
                }
            }
        }
        let t = Tensor::new(t_len, c, out);
        self.push(t, Op::DepthwiseConv { x, w, bias })
    }

    /// Multiplies by a fixed mask (entries `0` or `1 / (1 - p)`).
    pub fn dropout(&mut self, x: NodeId, mask: Vec<f64>) -> NodeId {
        let vx = self.value(x);
        assert_eq!(mask.len(), vx.data.len());
        let data = vx.data.iter().zip(&mask).map(|(a, m)| a * m).collect();
        let t = Tensor::new(vx.rows, vx.cols, data);
        self.push(t, Op::Dropout(x, mask))
    }

    /// Back-propagates the given output gradients and returns gradients for
    /// the `n_params` parameter slots.
    pub fn backward(&self, seeds: Vec<(NodeId, Vec<f64>)>, n_params: usize) -> ParamGrads {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        let mut params: ParamGrads = vec![None; n_params];
        for (id, g) in seeds {
            assert_eq!(g.len(), self.nodes[id.0].value.len(), "seed shape mismatch");
            accumulate(&mut grads[id.0], g);
        }
        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            let shape = (node.value.rows, node.value.cols);
            match &node.op {
                Op::Constant => {}
                Op::Param(p) => accumulate(&mut params[*p], g),
                Op::MatMul(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let ga = matmul_bt(&g, &vb.data, va.rows, vb.cols, va.cols);
                    let mut gb = vec![0.0; vb.data.len()];
                    matmul_at_acc(&va.data, &g, va.rows, va.cols, vb.cols, &mut gb);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::MatMulBt(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let ga = matmul(&g, &vb.data, va.rows, vb.rows, va.cols);
                    let mut gb = vec![0.0; vb.data.len()];
                    matmul_at_acc(&g, &va.data, va.rows, vb.rows, va.cols, &mut gb);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g);
                }
                Op::AddRow(a, b) => {
                    let mut gb = vec![0.0; shape.1];
                    for chunk in g.chunks(shape.1) {
                        for (o, v) in gb.iter_mut().zip(chunk) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads[a.0], g);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Scale(a, s) => {
                    accumulate(&mut grads[a.0], g.iter().map(|v| v * s).collect());
                }
                Op::Silu(a) => {
                    let wrong = if self.fault == Some(BackwardFault::Silu) { 1.5 } else { 1.0 };
                    let va = self.value(*a);
                    let ga = g
                        .iter()
                        .zip(&va.data)
                        .map(|(gv, &x)| {
                            let s = sigmoid(x);
                            gv * s * (1.0 + x * (1.0 - s)) * wrong
                        })
                        .collect();
                    accumulate(&mut grads[a.0], ga);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    rstd,
                } => {
                    let n = shape.1;
                    let vg = self.value(*gamma);
                    let mut gg = vec![0.0; n];
                    let mut gbeta = vec![0.0; n];
                    let mut gx = vec![0.0; g.len()];
                    let skip_mean = self.fault == Some(BackwardFault::LayerNorm);
                    for r in 0..shape.0 {
                        let gy = &g[r * n..(r + 1) * n];
                        let xh = &xhat[r * n..(r + 1) * n];
                        let mut mean_d = 0.0;
                        let mut mean_dx = 0.0;
                        for c in 0..n {
                            gg[c] += gy[c] * xh[c];
                            gbeta[c] += gy[c];
                            let d = gy[c] * vg.data[c];
                            mean_d += d;
                            mean_dx += d * xh[c];
                        }
                        mean_d /= n as f64;
                        mean_dx /= n as f64;
                        if skip_mean {
                            mean_d = 0.0;
                        }
                        for c in 0..n {
                            let d = gy[c] * vg.data[c];
                            gx[r * n + c] = rstd[r] * (d - mean_d - xh[c] * mean_dx);
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                    accumulate(&mut grads[gamma.0], gg);
                    accumulate(&mut grads[beta.0], gbeta);
                }
                Op::MaskedSoftmax(x) => {
                    // masked entries have y = 0 and receive zero gradient
                    let y = &node.value.data;
                    let n = shape.1;
                    let mut gx = vec![0.0; g.len()];
                    for r in 0..shape.0 {
                        let yr = &y[r * n..(r + 1) * n];
                        let gr = &g[r * n..(r + 1) * n];
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for c in 0..n {
                            gx[r * n + c] = yr[c] * (gr[c] - dot);
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Gather(table, ids) => {
                    let vt = self.value(*table);
                    let mut gt = vec![0.0; vt.data.len()];
                    let n = vt.cols;
                    for (r, &i) in ids.iter().enumerate() {
                        for c in 0..n {
                            gt[i * n + c] += g[r * n + c];
                        }
                    }
                    accumulate(&mut grads[table.0], gt);
                }
                Op::Cols { x, start } => {
                    let vx = self.value(*x);
                    let mut gx = vec![0.0; vx.data.len()];
                    let w = shape.1;
                    for r in 0..shape.0 {
                        gx[r * vx.cols + start..r * vx.cols + start + w]
                            .copy_from_slice(&g[r * w..(r + 1) * w]);
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols;
                        let mut gp = Vec::with_capacity(shape.0 * w);
                        for r in 0..shape.0 {
                            gp.extend_from_slice(&g[r * shape.1 + offset..r * shape.1 + offset + w]);
                        }
                        accumulate(&mut grads[p.0], gp);
                        offset += w;
                    }
                }
                Op::DepthwiseConv { x, w, bias } => {
                    let (vx, vw) = (self.value(*x), self.value(*w));
                    let (t_len, c) = shape;
                    let half = (vw.rows / 2) as isize;
                    let mut gx = vec![0.0; vx.data.len()];
                    let mut gw = vec![0.0; vw.data.len()];
                    let mut gb = vec![0.0; c];
                    for t in 0..t_len {
                        let gy = &g[t * c..(t + 1) * c];
                        for (o, v) in gb.iter_mut().zip(gy) {
                            *o += v;
                        }
                        for j in 0..vw.rows {
                            let src = t as isize + j as isize - half;
                            if src < 0 || src >= t_len as isize {
                                continue;
                            }
                            let s = src as usize;
                            for ch in 0..c {
                                gx[s * c + ch] += vw.data[j * c + ch] * gy[ch];
                                gw[j * c + ch] += vx.data[s * c + ch] * gy[ch];
                            }
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                    accumulate(&mut grads[w.0], gw);
                    accumulate(&mut grads[bias.0], gb);
                }
                Op::Dropout(x, mask) => {
                    accumulate(&mut grads[x.0], g.iter().zip(mask).map(|(a, m)| a * m).collect());
                }
            }
        }
        params
    }
}

fn accumulate(slot: &mut Option<Vec<f64>>, g: Vec<f64>) {
    match slot {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(&g) {
                *e += v;
            }
        }
        None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    /// Checks every op's backward rule against central differences on a
    /// scalar objective `Σ w ⊙ f(params)` with fixed random weights.
    fn check<F>(inputs: Vec<Tensor>, build: F)
    where
        F: Fn(&mut Tape, &[NodeId]) -> NodeId,
    {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let run = |inputs: &[Tensor]| {
            let mut tape = Tape::new();
            let ids: Vec<_> = inputs.iter().enumerate().map(|(i, t)| tape.param(i, t.clone())).collect();
            let out = build(&mut tape, &ids);
            (tape, out)
        };
        let (tape, out) = run(&inputs);
        let weights: Vec<f64> = (0..tape.value(out).len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let objective = |inputs: &[Tensor]| {
            let (tape, out) = run(inputs);
            tape.value(out).data.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>()
        };
        let analytic = tape.backward(vec![(out, weights.clone())], inputs.len());
        let h = 1e-6;
        for (i, t) in inputs.iter().enumerate() {
            for k in 0..t.len() {
                let mut plus = inputs.clone();
                plus[i].data[k] += h;
                let mut minus = inputs.clone();
                minus[i].data[k] -= h;
                let numeric = (objective(&plus) - objective(&minus)) / (2.0 * h);
                let a = analytic[i].as_ref().map_or(0.0, |g| g[k]);
                assert!(
                    (a - numeric).abs() <= 1e-6 * (1.0 + numeric.abs()),
                    "input {i} coord {k}: analytic {a} numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn matmul_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        check(vec![random(3, 4, &mut rng), random(4, 2, &mut rng)], |t, x| t.matmul(x[0], x[1]));
        check(vec![random(3, 4, &mut rng), random(5, 4, &mut rng)], |t, x| t.matmul_bt(x[0], x[1]));
    }

    #[test]
    fn elementwise_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        check(vec![random(3, 4, &mut rng), random(3, 4, &mut rng)], |t, x| t.add(x[0], x[1]));
        check(vec![random(3, 4, &mut rng), random(1, 4, &mut rng)], |t, x| t.add_row(x[0], x[1]));
        check(vec![random(3, 4, &mut rng)], |t, x| t.scale(x[0], -2.5));
        check(vec![random(3, 4, &mut rng)], |t, x| t.silu(x[0]));
        check(vec![random(2, 3, &mut rng)], |t, x| t.dropout(x[0], vec![0.0, 2.0, 2.0, 0.0, 2.0, 2.0]));
    }

    #[test]
    fn layer_norm_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        check(
            vec![random(3, 5, &mut rng), random(1, 5, &mut rng), random(1, 5, &mut rng)],
            |t, x| t.layer_norm(x[0], x[1], x[2]),
        );
    }

    #[test]
    fn softmax_rule_and_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mask = Rc::new(vec![true, false, false, true, true, false, true, true, true]);
        check(vec![random(3, 3, &mut rng)], {
            let mask = mask.clone();
            move |t, x| t.masked_softmax(x[0], Some(mask.clone()))
        });
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(3, 3, vec![50.0, 1.0, -3.0, 0.0, 0.0, 9.0, -700.0, 2.0, 1.0]));
        let y = tape.masked_softmax(x, Some(mask));
        for r in 0..3 {
            let s: f64 = tape.value(y).row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(tape.value(y).get(0, 1), 0.0);
        assert_eq!(tape.value(y).get(1, 2), 0.0);
    }

    #[test]
    fn indexing_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        check(vec![random(5, 3, &mut rng)], |t, x| t.gather(x[0], vec![4, 1, 1, 0]));
        check(vec![random(3, 6, &mut rng)], |t, x| t.cols(x[0], 2, 3));
        check(vec![random(3, 2, &mut rng), random(3, 4, &mut rng)], |t, x| {
            t.concat_cols(vec![x[1], x[0], x[1]])
        });
    }

    #[test]
    fn depthwise_conv_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        check(
            vec![random(5, 3, &mut rng), random(3, 3, &mut rng), random(1, 3, &mut rng)],
            |t, x| t.depthwise_conv(x[0], x[1], x[2]),
        );
        // single frame: only the centre tap applies
        check(
            vec![random(1, 2, &mut rng), random(3, 2, &mut rng), random(1, 2, &mut rng)],
            |t, x| t.depthwise_conv(x[0], x[1], x[2]),
        );
    }

    #[test]
    fn shared_inputs_accumulate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        check(vec![random(3, 3, &mut rng)], |t, x| {
            let y = t.matmul(x[0], x[0]);
            let z = t.silu(y);
            t.add(z, x[0])
        });
    }
}
