//! Reverse-mode automatic differentiation over a recorded tape.
//!
//! Values are recorded in evaluation order, so the tape is topologically
//! sorted by construction and the backward pass is a single reverse sweep.
//! Parameters are referenced from a [`ParamStore`] rather than copied, and
//! their gradients can be accumulated straight into a caller-owned buffer,
//! which keeps per-sample tapes cheap during mini-batch training.

use std::sync::atomic::{AtomicU64, Ordering};

use super::kernels::{self, ConvGeometry};
use super::params::{ParamId, ParamStore};
use super::{NnError, Tensor};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(usize, usize),
    /// `a · bᵀ`
    MatMulBt(usize, usize),
    /// Adds a length-`n` bias to every row of an `m × n` matrix.
    AddRowBias(usize, usize),
    Relu(usize),
    Sigmoid(usize),
    Conv2d {
        x: usize,
        weight: usize,
        bias: usize,
        geometry: ConvGeometry,
    },
    MaxPool2d {
        x: usize,
        argmax: Vec<usize>,
    },
    BilinearResize {
        x: usize,
        n: usize,
        m: usize,
    },
    PadRows(usize),
    Reshape(usize),
    Concat(Vec<usize>),
    MeanRows(usize),
    Sum(usize),
    Mse(usize, usize),
}

#[derive(Debug)]
enum Value {
    Owned(Tensor),
    Param(ParamId),
}

#[derive(Debug)]
struct Node {
    value: Value,
    op: Op,
}

/// Records differentiable operations for one forward pass.
pub struct Tape<'p> {
    id: u64,
    nodes: Vec<Node>,
    params: Option<&'p ParamStore>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Tape::new()
    }
}

impl<'p> Tape<'p> {
    pub fn new() -> Tape<'p> {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            params: None,
        }
    }

    /// Tape that can reference the tensors of `params` without copying.
    pub fn with_params(params: &'p ParamStore) -> Tape<'p> {
        Tape {
            params: Some(params),
            ..Tape::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn index(&self, v: Var) -> Result<usize, NnError> {
        if v.tape != self.id || v.index >= self.nodes.len() {
            return Err(NnError::DetachedTensor);
        }
        Ok(v.index)
    }

    fn node_value(&self, index: usize) -> &Tensor {
        match &self.nodes[index].value {
            Value::Owned(t) => t,
            Value::Param(pid) => self
                .params
                .expect("param nodes require a store")
                .get(*pid),
        }
    }

    pub fn value(&self, v: Var) -> Result<&Tensor, NnError> {
        Ok(self.node_value(self.index(v)?))
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        debug_assert!(value.is_finite(), "non-finite value produced by {op:?}");
        self.nodes.push(Node {
            value: Value::Owned(value),
            op,
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    /// Records an input tensor. Gradients are available for leaves too.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Records a reference to a parameter of the attached store.
    pub fn param(&mut self, pid: ParamId) -> Var {
        let store = self
            .params
            .expect("Tape::param requires a tape built with_params");
        assert!(pid.0 < store.len(), "unknown parameter {pid:?}");
        self.nodes.push(Node {
            value: Value::Param(pid),
            op: Op::Param(pid),
        });
        Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        let (m, k) = self.node_value(ia).dims2()?;
        let (k2, n) = self.node_value(ib).dims2()?;
        if k != k2 {
            return Err(NnError::ShapeMismatch(format!(
                "matmul {m}×{k} by {k2}×{n}"
            )));
        }
        let out = kernels::matmul(self.node_value(ia).data(), self.node_value(ib).data(), m, k, n);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::MatMul(ia, ib)))
    }

    /// `a · bᵀ` for `a: m×k`, `b: n×k`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        let (ia, ib) = (self.index(a)?, self.index(b)?);
        let (m, k) = self.node_value(ia).dims2()?;
        let (n, k2) = self.node_value(ib).dims2()?;
        if k != k2 {
            return Err(NnError::ShapeMismatch(format!(
                "matmul_bt {m}×{k} by ({n}×{k2})ᵀ"
            )));
        }
        let out = kernels::matmul_bt(self.node_value(ia).data(), self.node_value(ib).data(), m, k, n);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::MatMulBt(ia, ib)))
    }

    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var, NnError> {
        let (ix, ib) = (self.index(x)?, self.index(bias)?);
        let (m, n) = self.node_value(ix).dims2()?;
        let b = self.node_value(ib);
        if b.len() != n {
            return Err(NnError::ShapeMismatch(format!(
                "bias of length {} for {m}×{n}",
                b.len()
            )));
        }
        let mut out = self.node_value(ix).data().to_vec();
        for row in out.chunks_mut(n) {
            row.iter_mut().zip(b.data()).for_each(|(v, bv)| *v += bv);
        }
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::AddRowBias(ix, ib)))
    }

    pub fn relu(&mut self, x: Var) -> Result<Var, NnError> {
        let ix = self.index(x)?;
        let t = self.node_value(ix);
        let out = t.data().iter().map(|&v| v.max(0.0)).collect();
        let shape = t.shape().to_vec();
        Ok(self.push(Tensor::new(&shape, out)?, Op::Relu(ix)))
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var, NnError> {
        let ix = self.index(x)?;
        let t = self.node_value(ix);
        let out = t.data().iter().map(|&v| sigmoid(v)).collect();
        let shape = t.shape().to_vec();
        Ok(self.push(Tensor::new(&shape, out)?, Op::Sigmoid(ix)))
    }

    /// SAME-padded cross-correlation.
    /// `x: C_in×H×W`, `weight: k×k×C_in×C_out`, `bias: C_out`.
    pub fn conv2d(&mut self, x: Var, weight: Var, bias: Var, stride: usize) -> Result<Var, NnError> {
        let (ix, iw, ib) = (self.index(x)?, self.index(weight)?, self.index(bias)?);
        let (c_in, h, w) = self.node_value(ix).dims3()?;
        let ws = self.node_value(iw).shape().to_vec();
        let [k, k2, wc_in, c_out] = ws[..] else {
            return Err(NnError::ShapeMismatch(format!("conv weight shape {ws:?}")));
        };
        if wc_in != c_in || k != k2 || k == 0 || stride == 0 {
            return Err(NnError::ShapeMismatch(format!(
                "conv weight {ws:?} (stride {stride}) for input {c_in}×{h}×{w}"
            )));
        }
        if self.node_value(ib).len() != c_out {
            return Err(NnError::ShapeMismatch(format!(
                "conv bias of length {} for {c_out} output channels",
                self.node_value(ib).len()
            )));
        }
        let geometry = ConvGeometry::new(c_in, c_out, h, w, k, stride);
        let out = kernels::conv2d(
            self.node_value(ix).data(),
            self.node_value(iw).data(),
            self.node_value(ib).data(),
            &geometry,
        );
        let shape = [c_out, geometry.rows.output, geometry.cols.output];
        Ok(self.push(
            Tensor::new(&shape, out)?,
            Op::Conv2d {
                x: ix,
                weight: iw,
                bias: ib,
                geometry,
            },
        ))
    }

    /// Non-overlapping `size × size` max pooling; edge windows may be ragged.
    pub fn maxpool2d(&mut self, x: Var, size: usize) -> Result<Var, NnError> {
        let ix = self.index(x)?;
        if size == 0 {
            return Err(NnError::ShapeMismatch("pool size 0".into()));
        }
        let (c, h, w) = self.node_value(ix).dims3()?;
        let (out, argmax) = kernels::maxpool2d(self.node_value(ix).data(), c, h, w, size);
        let shape = [c, h.div_ceil(size), w.div_ceil(size)];
        Ok(self.push(Tensor::new(&shape, out)?, Op::MaxPool2d { x: ix, argmax }))
    }

    /// Align-corners bilinear resize of an `n × n` matrix to `m × m`.
    pub fn bilinear_resize(&mut self, x: Var, m: usize) -> Result<Var, NnError> {
        let ix = self.index(x)?;
        let (n, n2) = self.node_value(ix).dims2()?;
        if n != n2 || m == 0 {
            return Err(NnError::ShapeMismatch(format!("resize {n}×{n2} to {m}×{m}")));
        }
        let out = kernels::bilinear_resize(self.node_value(ix).data(), n, m);
        Ok(self.push(Tensor::new(&[m, m], out)?, Op::BilinearResize { x: ix, n, m }))
    }

    /// Appends zero rows so the matrix has `rows` rows.
    pub fn pad_rows(&mut self, x: Var, rows: usize) -> Result<Var, NnError> {
        let ix = self.index(x)?;
        let (r, c) = self.node_value(ix).dims2()?;
        if rows < r {
            return Err(NnError::ShapeMismatch(format!("cannot pad {r} rows to {rows}")));
        }
        let mut out = self.node_value(ix).data().to_vec();
        out.resize(rows * c, 0.0);
        Ok(self.push(Tensor::new(&[rows, c], out)?, Op::PadRows(ix)))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, NnError> {
        let ix = self.index(x)?;
        let t = self.node_value(ix).clone().reshaped(shape)?;
        Ok(self.push(t, Op::Reshape(ix)))
    }

    /// Flattens every input and concatenates them into a `1 × total` row.
    pub fn concat(&mut self, xs: &[Var]) -> Result<Var, NnError> {
        let idx = xs
            .iter()
            .map(|&v| self.index(v))
            .collect::<Result<Vec<_>, _>>()?;
        if idx.is_empty() {
            return Err(NnError::ShapeMismatch("concat of nothing".into()));
        }
        let mut out = Vec::new();
        for &i in &idx {
            out.extend_from_slice(self.node_value(i).data());
        }
        let len = out.len();
        Ok(self.push(Tensor::new(&[1, len], out)?, Op::Concat(idx)))
    }

    /// Column-wise mean of an `m × n` matrix, as a `1 × n` row.
    pub fn mean_rows(&mut self, x: Var) -> Result<Var, NnError> {
        let ix = self.index(x)?;
        let (m, n) = self.node_value(ix).dims2()?;
        let mut out = vec![0.0; n];
        for row in self.node_value(ix).data().chunks(n) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out.iter_mut().for_each(|o| *o /= m as f64);
        Ok(self.push(Tensor::new(&[1, n], out)?, Op::MeanRows(ix)))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, NnError> {
        let ix = self.index(x)?;
        let s = self.node_value(ix).sum();
        Ok(self.push(Tensor::scalar(s), Op::Sum(ix)))
    }

    /// Mean of squared differences over equally sized tensors.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var, NnError> {
        let (ip, it) = (self.index(pred)?, self.index(target)?);
        let (p, t) = (self.node_value(ip), self.node_value(it));
        if p.len() != t.len() {
            return Err(NnError::ShapeMismatch(format!(
                "mse over {} predictions and {} targets",
                p.len(),
                t.len()
            )));
        }
        let loss = p
            .data()
            .iter()
            .zip(t.data())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / p.len() as f64;
        Ok(self.push(Tensor::scalar(loss), Op::Mse(ip, it)))
    }

    /// Gradients of the scalar `loss` with respect to every recorded value.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NnError> {
        let mut param_grads = self
            .params
            .map(|p| p.zeros_like())
            .unwrap_or_default();
        let node_grads = self.sweep(loss, Some(&mut param_grads))?;
        Ok(Gradients {
            tape: self.id,
            node_grads,
            param_grads,
        })
    }

    /// Adds `d loss / d param` into `sink` (indexed like the attached store)
    /// without materializing gradients of other values beyond the sweep.
    pub fn backward_into(&self, loss: Var, sink: &mut [Tensor]) -> Result<(), NnError> {
        self.sweep(loss, Some(sink)).map(|_| ())
    }

    fn sweep(&self, loss: Var, mut sink: Option<&mut [Tensor]>) -> Result<Vec<Option<Vec<f64>>>, NnError> {
        let il = self.index(loss)?;
        if self.node_value(il).len() != 1 {
            return Err(NnError::NotScalar(self.node_value(il).shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[il] = Some(vec![1.0]);

        for i in (0..=il).rev() {
            let Some(gout) = grads[i].take() else {
                continue;
            };
            match &self.nodes[i].op {
                Op::Leaf => {}
                Op::Param(pid) => {
                    if let Some(sink) = sink.as_deref_mut() {
                        sink[pid.0]
                            .data_mut()
                            .iter_mut()
                            .zip(&gout)
                            .for_each(|(s, g)| *s += g);
                    }
                }
                &Op::MatMul(a, b) => {
                    let (m, k) = self.node_value(a).dims2()?;
                    let n = self.node_value(b).shape()[1];
                    let bv = self.node_value(b).data();
                    kernels::matmul_grad_a(&gout, bv, self.slot(&mut grads, a), m, k, n);
                    let av = self.node_value(a).data();
                    kernels::matmul_grad_b(&gout, av, self.slot(&mut grads, b), m, k, n);
                }
                &Op::MatMulBt(a, b) => {
                    let (m, k) = self.node_value(a).dims2()?;
                    let n = self.node_value(b).shape()[0];
                    // c = a bᵀ: da = dc · b, db = dcᵀ · a
                    let bv = self.node_value(b).data();
                    let da = kernels::matmul(&gout, bv, m, n, k);
                    add_into(self.slot(&mut grads, a), &da);
                    let av = self.node_value(a).data();
                    let gt = transpose(&gout, m, n);
                    let db = kernels::matmul(&gt, av, n, m, k);
                    add_into(self.slot(&mut grads, b), &db);
                }
                &Op::AddRowBias(x, b) => {
                    add_into(self.slot(&mut grads, x), &gout);
                    let n = self.node_value(b).len();
                    let db = self.slot(&mut grads, b);
                    for row in gout.chunks(n) {
                        add_into(db, row);
                    }
                }
                &Op::Relu(x) => {
                    let xv = self.node_value(x).data();
                    let dx = self.slot(&mut grads, x);
                    for ((d, g), v) in dx.iter_mut().zip(&gout).zip(xv) {
                        if *v > 0.0 {
                            *d += g;
                        }
                    }
                }
                &Op::Sigmoid(x) => {
                    let yv = self.node_value(i).data().to_vec();
                    let dx = self.slot(&mut grads, x);
                    for ((d, g), y) in dx.iter_mut().zip(&gout).zip(yv) {
                        *d += g * y * (1.0 - y);
                    }
                }
                Op::Conv2d {
                    x,
                    weight,
                    bias,
                    geometry,
                } => {
                    let (x, weight, bias) = (*x, *weight, *bias);
                    let mut dx = vec![0.0; self.node_value(x).len()];
                    let mut dw = self.take_slot(&mut grads, &mut sink, weight);
                    let mut db = self.take_slot(&mut grads, &mut sink, bias);
                    kernels::conv2d_backward(
                        self.node_value(x).data(),
                        self.node_value(weight).data(),
                        &gout,
                        geometry,
                        Some(&mut dx),
                        Some(dw.as_mut_slice()),
                        Some(db.as_mut_slice()),
                    );
                    self.restore_slot(&mut grads, &mut sink, weight, dw);
                    self.restore_slot(&mut grads, &mut sink, bias, db);
                    add_into(self.slot(&mut grads, x), &dx);
                }
                Op::MaxPool2d { x, argmax } => {
                    let dx = self.slot(&mut grads, *x);
                    for (g, &src) in gout.iter().zip(argmax) {
                        dx[src] += g;
                    }
                }
                &Op::BilinearResize { x, n, m } => {
                    kernels::bilinear_resize_backward(&gout, self.slot(&mut grads, x), n, m);
                }
                &Op::PadRows(x) => {
                    let len = self.node_value(x).len();
                    add_into(self.slot(&mut grads, x), &gout[..len]);
                }
                &Op::Reshape(x) => add_into(self.slot(&mut grads, x), &gout),
                Op::Concat(xs) => {
                    let mut offset = 0;
                    for &x in xs {
                        let len = self.node_value(x).len();
                        add_into(self.slot(&mut grads, x), &gout[offset..offset + len]);
                        offset += len;
                    }
                }
                &Op::MeanRows(x) => {
                    let (m, n) = self.node_value(x).dims2()?;
                    let dx = self.slot(&mut grads, x);
                    for row in dx.chunks_mut(n) {
                        row.iter_mut()
                            .zip(&gout)
                            .for_each(|(d, g)| *d += g / m as f64);
                    }
                }
                &Op::Sum(x) => {
                    let dx = self.slot(&mut grads, x);
                    dx.iter_mut().for_each(|d| *d += gout[0]);
                }
                &Op::Mse(p, t) => {
                    let pv = self.node_value(p).data().to_vec();
                    let tv = self.node_value(t).data().to_vec();
                    let scale = 2.0 * gout[0] / pv.len() as f64;
                    let dp = self.slot(&mut grads, p);
                    for ((d, a), b) in dp.iter_mut().zip(&pv).zip(&tv) {
                        *d += scale * (a - b);
                    }
                    let dt = self.slot(&mut grads, t);
                    for ((d, a), b) in dt.iter_mut().zip(&pv).zip(&tv) {
                        *d -= scale * (a - b);
                    }
                }
            }
            if !matches!(self.nodes[i].op, Op::Param(_)) || sink.is_none() {
                grads[i] = Some(gout);
            }
        }
        Ok(grads)
    }

    /// Gradient buffer of node `j`, allocated on first use.
    fn slot<'g>(&self, grads: &'g mut [Option<Vec<f64>>], j: usize) -> &'g mut [f64] {
        let len = self.node_value(j).len();
        grads[j].get_or_insert_with(|| vec![0.0; len])
    }

    /// Takes the gradient buffer of `j` out for in-place accumulation. For
    /// parameters with a sink the sink's buffer itself is borrowed.
    fn take_slot(&self, grads: &mut [Option<Vec<f64>>], sink: &mut Option<&mut [Tensor]>, j: usize) -> Vec<f64> {
        if let (Op::Param(pid), Some(sink)) = (&self.nodes[j].op, sink.as_deref_mut()) {
            return std::mem::take(&mut sink[pid.0]).into_data();
        }
        let len = self.node_value(j).len();
        grads[j].take().unwrap_or_else(|| vec![0.0; len])
    }

    fn restore_slot(
        &self,
        grads: &mut [Option<Vec<f64>>],
        sink: &mut Option<&mut [Tensor]>,
        j: usize,
        buf: Vec<f64>,
    ) {
        if let (Op::Param(pid), Some(sink)) = (&self.nodes[j].op, sink.as_deref_mut()) {
            let shape = self.node_value(j).shape().to_vec();
            sink[pid.0] = Tensor::new(&shape, buf).expect("gradient keeps parameter shape");
            return;
        }
        grads[j] = Some(buf);
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn transpose(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; x.len()];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = x[i * cols + j];
        }
    }
    t
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    tape: u64,
    node_grads: Vec<Option<Vec<f64>>>,
    param_grads: Vec<Tensor>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros when `v` does not
    /// influence the loss.
    pub fn wrt(&self, tape: &Tape<'_>, v: Var) -> Result<Tensor, NnError> {
        if v.tape != self.tape {
            return Err(NnError::DetachedTensor);
        }
        let value = tape.value(v)?;
        if let Op::Param(pid) = tape.nodes[v.index].op {
            return Ok(self.param_grads[pid.0].clone());
        }
        match &self.node_grads[v.index] {
            Some(g) => Tensor::new(value.shape(), g.clone()),
            None => Ok(Tensor::zeros(value.shape())),
        }
    }

    /// Gradients for every parameter of the attached store, zero for those
    /// the loss does not depend on.
    pub fn params(&self) -> &[Tensor] {
        &self.param_grads
    }

    pub fn param(&self, pid: ParamId) -> &Tensor {
        &self.param_grads[pid.0]
    }
}
