//! Forward and backward loops for the primitives recorded on the tape.
//! All buffers are row-major slices; shapes are validated by the caller.

/// `c[m×n] = a[m×k] · b[k×n]`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (cv, bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *cv += av * bv;
            }
        }
    }
    c
}

/// `c[m×n] = a[m×k] · b[n×k]ᵀ`.
pub fn matmul_bt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        let ar = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let br = &b[j * k..(j + 1) * k];
            c[i * n + j] = ar.iter().zip(br).map(|(x, y)| x * y).sum();
        }
    }
    c
}

/// `da += dc · bᵀ` for `c = a · b`.
pub fn matmul_grad_a(dc: &[f64], b: &[f64], da: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let dcr = &dc[i * n..(i + 1) * n];
        for p in 0..k {
            let br = &b[p * n..(p + 1) * n];
            da[i * k + p] += dcr.iter().zip(br).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `db += aᵀ · dc` for `c = a · b`.
pub fn matmul_grad_b(dc: &[f64], a: &[f64], db: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let dcr = &dc[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            for (d, g) in db[p * n..(p + 1) * n].iter_mut().zip(dcr) {
                *d += av * g;
            }
        }
    }
}

/// Geometry of a SAME-padded convolution along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SameAxis {
    pub input: usize,
    pub output: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_before: usize,
}

impl SameAxis {
    /// Output length `ceil(input / stride)`; the padding total is split with
    /// the smaller half before the data.
    pub fn new(input: usize, kernel: usize, stride: usize) -> SameAxis {
        let output = input.div_ceil(stride);
        let needed = (output - 1) * stride + kernel;
        let pad_total = needed.saturating_sub(input);
        SameAxis {
            input,
            output,
            kernel,
            stride,
            pad_before: pad_total / 2,
        }
    }

    /// For kernel tap `t`, the output positions whose input index is in range.
    fn valid_outputs(&self, t: usize) -> std::ops::Range<usize> {
        // input index = o * stride + t - pad_before
        let lo = if t >= self.pad_before {
            0
        } else {
            (self.pad_before - t).div_ceil(self.stride)
        };
        let limit = self.input + self.pad_before; // o * stride + t < limit
        let hi = if limit > t {
            ((limit - t - 1) / self.stride + 1).min(self.output)
        } else {
            0
        };
        lo..hi.max(lo)
    }

    fn input_index(&self, o: usize, t: usize) -> usize {
        o * self.stride + t - self.pad_before
    }

    fn taps(&self) -> Vec<(usize, std::ops::Range<usize>)> {
        (0..self.kernel)
            .map(|t| (t, self.valid_outputs(t)))
            .filter(|(_, r)| !r.is_empty())
            .collect()
    }
}

/// Shapes of one convolution call.
#[derive(Debug, Clone, Copy)]
pub struct ConvGeometry {
    pub c_in: usize,
    pub c_out: usize,
    pub rows: SameAxis,
    pub cols: SameAxis,
}

impl ConvGeometry {
    pub fn new(c_in: usize, c_out: usize, h: usize, w: usize, k: usize, stride: usize) -> Self {
        ConvGeometry {
            c_in,
            c_out,
            rows: SameAxis::new(h, k, stride),
            cols: SameAxis::new(w, k, stride),
        }
    }

    pub fn output_len(&self) -> usize {
        self.c_out * self.rows.output * self.cols.output
    }
}

/// Kernel taps that reach real input for at least one output, with the
/// (output, input) spatial offsets they connect.
struct TapPlan {
    /// `(ky * k + kx, start, end)` into `links`, one per used tap.
    taps: Vec<(usize, usize, usize)>,
    links: Vec<(usize, usize)>,
}

impl TapPlan {
    fn new(g: &ConvGeometry) -> TapPlan {
        let (k, w, ow) = (g.rows.kernel, g.cols.input, g.cols.output);
        let mut taps = Vec::new();
        let mut links = Vec::new();
        for (ky, ry) in g.rows.taps() {
            for (kx, rx) in g.cols.taps() {
                let start = links.len();
                for oy in ry.clone() {
                    let iy = g.rows.input_index(oy, ky);
                    for ox in rx.clone() {
                        links.push((oy * ow + ox, iy * w + g.cols.input_index(ox, kx)));
                    }
                }
                taps.push((ky * k + kx, start, links.len()));
            }
        }
        TapPlan { taps, links }
    }
}

/// `[a][b]` to `[b][a]`.
fn transpose(x: &[f64], a: usize, b: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in 0..a {
        for j in 0..b {
            out[j * a + i] = x[i * b + j];
        }
    }
    out
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yv, xv) in y.iter_mut().zip(x) {
        *yv += a * xv;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ac.remainder().iter().zip(bc.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ac.zip(bc) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Cross-correlation with SAME zero padding.
/// `x: [c_in, h, w]`, `weight: [k, k, c_in, c_out]`, `bias: [c_out]`.
pub fn conv2d(x: &[f64], weight: &[f64], bias: &[f64], g: &ConvGeometry) -> Vec<f64> {
    let (c_in, c_out) = (g.c_in, g.c_out);
    let in_pos = g.rows.input * g.cols.input;
    let out_pos = g.rows.output * g.cols.output;
    let plan = TapPlan::new(g);
    let xt = transpose(x, c_in, in_pos);
    let mut out_t: Vec<f64> = (0..out_pos).flat_map(|_| bias.iter().copied()).collect();
    for &(tap, start, end) in &plan.taps {
        let wtap = &weight[tap * c_in * c_out..(tap + 1) * c_in * c_out];
        for &(o, i) in &plan.links[start..end] {
            let acc = &mut out_t[o * c_out..(o + 1) * c_out];
            for (&a, wrow) in xt[i * c_in..(i + 1) * c_in].iter().zip(wtap.chunks_exact(c_out)) {
                if a != 0.0 {
                    axpy(a, wrow, acc);
                }
            }
        }
    }
    transpose(&out_t, out_pos, c_out)
}

/// Accumulates the input, weight and bias gradients of [`conv2d`].
pub fn conv2d_backward(
    x: &[f64],
    weight: &[f64],
    dout: &[f64],
    g: &ConvGeometry,
    dx: Option<&mut [f64]>,
    mut dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    let (c_in, c_out) = (g.c_in, g.c_out);
    let in_pos = g.rows.input * g.cols.input;
    let out_pos = g.rows.output * g.cols.output;
    if let Some(db) = db {
        for co in 0..c_out {
            db[co] += dout[co * out_pos..(co + 1) * out_pos].iter().sum::<f64>();
        }
    }
    if dx.is_none() && dw.is_none() {
        return;
    }
    let plan = TapPlan::new(g);
    let xt = transpose(x, c_in, in_pos);
    let dt = transpose(dout, c_out, out_pos);
    let live: Vec<bool> = dt.chunks_exact(c_out).map(|d| d.iter().any(|&v| v != 0.0)).collect();
    let mut dxt = dx.as_ref().map(|_| vec![0.0; xt.len()]);
    for &(tap, start, end) in &plan.taps {
        let base = tap * c_in * c_out;
        for &(o, i) in &plan.links[start..end] {
            if !live[o] {
                continue;
            }
            let d = &dt[o * c_out..(o + 1) * c_out];
            if let Some(dw) = dw.as_deref_mut() {
                let dtap = &mut dw[base..base + c_in * c_out];
                for (&a, drow) in xt[i * c_in..(i + 1) * c_in].iter().zip(dtap.chunks_exact_mut(c_out)) {
                    if a != 0.0 {
                        axpy(a, d, drow);
                    }
                }
            }
            if let Some(dxt) = dxt.as_mut() {
                let wtap = &weight[base..base + c_in * c_out];
                for (dv, wrow) in dxt[i * c_in..(i + 1) * c_in].iter_mut().zip(wtap.chunks_exact(c_out)) {
                    *dv += dot(wrow, d);
                }
            }
        }
    }
    if let (Some(dx), Some(dxt)) = (dx, dxt) {
        for (d, v) in dx.iter_mut().zip(transpose(&dxt, in_pos, c_in)) {
            *d += v;
        }
    }
}

/// Non-overlapping max pooling with ragged edge windows. Returns the pooled
/// values and, per output cell, the flat input index of its maximum (first
/// occurrence in row-major window order).
pub fn maxpool2d(x: &[f64], c: usize, h: usize, w: usize, size: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h.div_ceil(size), w.div_ceil(size));
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = usize::MAX;
                for iy in oy * size..((oy + 1) * size).min(h) {
                    for ix in ox * size..((ox + 1) * size).min(w) {
                        let idx = (ch * h + iy) * w + ix;
                        if x[idx] > best || best_idx == usize::MAX {
                            best = x[idx];
                            best_idx = idx;
                        }
                    }
                }
                out.push(best);
                argmax.push(best_idx);
            }
        }
    }
    (out, argmax)
}

/// Per-axis align-corners sampling: `(lower index, upper index, upper weight)`.
pub fn resize_axis(n: usize, m: usize) -> Vec<(usize, usize, f64)> {
    (0..m)
        .map(|i| {
            if n == 1 || m == 1 {
                return (0, 0, 0.0);
            }
            let src = i as f64 * (n - 1) as f64 / (m - 1) as f64;
            let lo = (src.floor() as usize).min(n - 1);
            let hi = (lo + 1).min(n - 1);
            (lo, hi, src - lo as f64)
        })
        .collect()
}

/// Bilinear resize of an `n × n` matrix to `m × m`.
pub fn bilinear_resize(x: &[f64], n: usize, m: usize) -> Vec<f64> {
    let axis = resize_axis(n, m);
    let mut out = vec![0.0; m * m];
    for (i, &(y0, y1, wy)) in axis.iter().enumerate() {
        for (j, &(x0, x1, wx)) in axis.iter().enumerate() {
            out[i * m + j] = (1.0 - wy) * (1.0 - wx) * x[y0 * n + x0]
                + (1.0 - wy) * wx * x[y0 * n + x1]
                + wy * (1.0 - wx) * x[y1 * n + x0]
                + wy * wx * x[y1 * n + x1];
        }
    }
    out
}

pub fn bilinear_resize_backward(dout: &[f64], dx: &mut [f64], n: usize, m: usize) {
    let axis = resize_axis(n, m);
    for (i, &(y0, y1, wy)) in axis.iter().enumerate() {
        for (j, &(x0, x1, wx)) in axis.iter().enumerate() {
            let g = dout[i * m + j];
            dx[y0 * n + x0] += (1.0 - wy) * (1.0 - wx) * g;
            dx[y0 * n + x1] += (1.0 - wy) * wx * g;
            dx[y1 * n + x0] += wy * (1.0 - wx) * g;
            dx[y1 * n + x1] += wy * wx * g;
        }
    }
}
