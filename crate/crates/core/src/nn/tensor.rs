//! Dense tensors and the batched convolution / linear kernels.
//!
//! Convolution activations use a `[C, B, H, W]` layout so the im2col product
//! of one layer is already the input layout of the next.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} needs {n} values, got {}",
                values.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            values,
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            values: vec![0.0; shape.iter().product()],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// `c = a·b + beta·c` for row-major `a: m×k`, `b: k×n`, `c: m×n`, with
/// optional transposition of `a` or `b` expressed through strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the slices hold at least m·k, k·n and m·n elements and the
    // strides describe dense row-major (or transposed) matrices inside them.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Geometry of one valid-padding convolution over a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub in_size: usize,
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvGeometry {
    /// Output side length; fails unless the stride divides `in − k` exactly.
    pub fn out_size(&self) -> Result<usize> {
        if self.kernel == 0 || self.stride == 0 || self.kernel > self.in_size {
            return Err(Error::invalid(format!(
                "kernel {} stride {} does not fit input {}",
                self.kernel, self.stride, self.in_size
            )));
        }
        let span = self.in_size - self.kernel;
        if span % self.stride != 0 {
            return Err(Error::invalid(format!(
                "({} - {}) is not divisible by stride {}",
                self.in_size, self.kernel, self.stride
            )));
        }
        Ok(span / self.stride + 1)
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }
}

/// Unrolls `input[C, B, H, W]` into `[C·k·k, B·Ho·Wo]`.
fn im2col(g: &ConvGeometry, batch: usize, out: usize, input: &[f64]) -> Vec<f64> {
    let (k, s, h) = (g.kernel, g.stride, g.in_size);
    let n = batch * out * out;
    let mut cols = vec![0.0; g.patch_len() * n];
    for c in 0..g.in_channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * n..(row + 1) * n];
                for b in 0..batch {
                    let plane = &input[(c * batch + b) * h * h..][..h * h];
                    for oy in 0..out {
                        let src = &plane[(oy * s + ky) * h + kx..];
                        let d = &mut dst[(b * out + oy) * out..][..out];
                        for (ox, v) in d.iter_mut().enumerate() {
                            *v = src[ox * s];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-adds column gradients back to the input.
fn col2im(g: &ConvGeometry, batch: usize, out: usize, cols: &[f64]) -> Vec<f64> {
    let (k, s, h) = (g.kernel, g.stride, g.in_size);
    let n = batch * out * out;
    let mut input = vec![0.0; g.in_channels * batch * h * h];
    for c in 0..g.in_channels {
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * n..(row + 1) * n];
                for b in 0..batch {
                    let plane = &mut input[(c * batch + b) * h * h..][..h * h];
                    for oy in 0..out {
                        let base = (oy * s + ky) * h + kx;
                        let sr = &src[(b * out + oy) * out..][..out];
                        for (ox, v) in sr.iter().enumerate() {
                            plane[base + ox * s] += v;
                        }
                    }
                }
            }
        }
    }
    input
}

/// Saved state of one convolution forward pass.
#[derive(Debug, Clone)]
pub(crate) struct ConvCache {
    cols: Vec<f64>,
    /// Post-activation output `[F, B, Ho, Wo]`.
    pub(crate) output: Vec<f64>,
    relu: bool,
}

pub(crate) fn conv_forward(
    g: &ConvGeometry,
    batch: usize,
    input: &[f64],
    weight: &[f64],
    bias: &[f64],
    relu: bool,
) -> Result<ConvCache> {
    let out = g.out_size()?;
    if input.len() != g.in_channels * batch * g.in_size * g.in_size {
        return Err(Error::invalid("convolution input has the wrong length"));
    }
    let n = batch * out * out;
    let cols = im2col(g, batch, out, input);
    let mut output = vec![0.0; g.filters * n];
    for (f, row) in output.chunks_exact_mut(n).enumerate() {
        row.fill(bias[f]);
    }
    gemm(g.filters, g.patch_len(), n, weight, false, &cols, false, 1.0, &mut output);
    if relu {
        output.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    Ok(ConvCache { cols, output, relu })
}

/// Accumulates weight and bias gradients; returns the input gradient when
/// `want_input` is set.
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_backward(
    g: &ConvGeometry,
    batch: usize,
    cache: &ConvCache,
    weight: &[f64],
    grad_out: &[f64],
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
    want_input: bool,
) -> Result<Option<Vec<f64>>> {
    let out = g.out_size()?;
    let n = batch * out * out;
    let mut delta = grad_out.to_vec();
    if cache.relu {
        for (d, &y) in delta.iter_mut().zip(&cache.output) {
            if y <= 0.0 {
                *d = 0.0;
            }
        }
    }
    gemm(g.filters, n, g.patch_len(), &delta, false, &cache.cols, true, 1.0, grad_weight);
    for (f, row) in delta.chunks_exact(n).enumerate() {
        grad_bias[f] += row.iter().sum::<f64>();
    }
    if !want_input {
        return Ok(None);
    }
    let mut dcols = vec![0.0; g.patch_len() * n];
    gemm(g.patch_len(), g.filters, n, weight, true, &delta, false, 0.0, &mut dcols);
    Ok(Some(col2im(g, batch, out, &dcols)))
}

/// Single-sample convolution with ReLU. `input` is `[C, H, W]`, `filters`
/// is `[F, C, k, k]` and `bias` is `[F]`; the result is `[F, Ho, Wo]`.
pub fn conv2d_forward(input: &Tensor, filters: &Tensor, bias: &Tensor, stride: usize) -> Result<Tensor> {
    let [c, h, w] = input.shape() else {
        return Err(Error::invalid("conv input must be [C, H, W]"));
    };
    let [f, fc, k, k2] = filters.shape() else {
        return Err(Error::invalid("filters must be [F, C, k, k]"));
    };
    if h != w || k != k2 || c != fc || bias.shape() != [*f] {
        return Err(Error::invalid("conv operands have inconsistent shapes"));
    }
    let g = ConvGeometry {
        in_channels: *c,
        in_size: *h,
        filters: *f,
        kernel: *k,
        stride,
    };
    let out = g.out_size()?;
    let cache = conv_forward(&g, 1, input.values(), filters.values(), bias.values(), true)?;
    Tensor::new(&[*f, out, out], cache.output)
}

/// Gradients of `Σ grad_out · conv2d_forward(...)` with respect to the
/// input, filters and bias, in that order.
pub fn conv2d_backward(
    input: &Tensor,
    filters: &Tensor,
    bias: &Tensor,
    stride: usize,
    grad_out: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let out = conv2d_forward(input, filters, bias, stride)?;
    if out.shape() != grad_out.shape() {
        return Err(Error::invalid("output gradient shape mismatch"));
    }
    let s = input.shape();
    let fs = filters.shape();
    let g = ConvGeometry {
        in_channels: s[0],
        in_size: s[1],
        filters: fs[0],
        kernel: fs[2],
        stride,
    };
    let cache = conv_forward(&g, 1, input.values(), filters.values(), bias.values(), true)?;
    let mut gw = vec![0.0; filters.values().len()];
    let mut gb = vec![0.0; fs[0]];
    let gi = conv_backward(&g, 1, &cache, filters.values(), grad_out.values(), &mut gw, &mut gb, true)?
        .expect("input gradient requested");
    Ok((Tensor::new(s, gi)?, Tensor::new(fs, gw)?, Tensor::new(&[fs[0]], gb)?))
}

/// `y[B, O] = x[B, D]·Wᵀ + b` with `W: [O, D]`, optional ReLU.
pub(crate) fn dense_forward(batch: usize, x: &[f64], weight: &[f64], bias: &[f64], relu: bool) -> Vec<f64> {
    let o = bias.len();
    let d = x.len() / batch;
    let mut y = Vec::with_capacity(batch * o);
    for _ in 0..batch {
        y.extend_from_slice(bias);
    }
    gemm(batch, d, o, x, false, weight, true, 1.0, &mut y);
    if relu {
        y.iter_mut().for_each(|v| *v = v.max(0.0));
    }
    y
}

/// Backward of [`dense_forward`] given its output `y`. Returns `dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dense_backward(
    batch: usize,
    x: &[f64],
    y: &[f64],
    relu: bool,
    weight: &[f64],
    grad_y: &[f64],
    grad_weight: &mut [f64],
    grad_bias: &mut [f64],
) -> Vec<f64> {
    let o = grad_bias.len();
    let d = x.len() / batch;
    let mut delta = grad_y.to_vec();
    if relu {
        for (g, &v) in delta.iter_mut().zip(y) {
            if v <= 0.0 {
                *g = 0.0;
            }
        }
    }
    gemm(o, batch, d, &delta, true, x, false, 1.0, grad_weight);
    for row in delta.chunks_exact(o) {
        for (gb, v) in grad_bias.iter_mut().zip(row) {
            *gb += v;
        }
    }
    let mut dx = vec![0.0; batch * d];
    gemm(batch, o, d, &delta, false, weight, false, 0.0, &mut dx);
    dx
}
