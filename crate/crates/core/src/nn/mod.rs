//! Deterministic double-precision neural-network engine.
//!
//! Networks are ordered layer stacks over a single flat parameter vector.
//! Forward/backward run sample-at-a-time; convolution is im2col + GEMM.
//! Layer shapes are validated once at construction, so the hot path is
//! panic-free by construction. All arithmetic is `f64`; given identical
//! (seed, data, config) a training run is bit-reproducible on one platform.

pub mod adam;
pub mod gradcheck;
pub mod loss;

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid layer: {0}")]
    InvalidLayer(String),
    #[error("non-finite {what} encountered (step {step})")]
    NonFinite { what: String, step: u64 },
}

/// Activation shape flowing between layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Shape {
    Flat(usize),
    Chw(usize, usize, usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Flat(n) => n,
            Shape::Chw(c, h, w) => c * h * w,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Shape::Flat(n) => write!(f, "{n}"),
            Shape::Chw(c, h, w) => write!(f, "{c}x{h}x{w}"),
        }
    }
}

/// Layer specification. Parameters live in the owning network's flat vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
    Conv2d {
        in_c: usize,
        in_h: usize,
        in_w: usize,
        out_c: usize,
        kernel: usize,
        stride: usize,
    },
    MaxPool2 {
        c: usize,
        in_h: usize,
        in_w: usize,
    },
    Relu,
    Dropout {
        p: f64,
    },
    Flatten,
    /// Two sub-stacks over a split of the input vector; outputs concatenated.
    Parallel {
        split: usize,
        left: Vec<Layer>,
        right: Vec<Layer>,
    },
    Softmax,
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Dense { in_dim, out_dim } => in_dim * out_dim + out_dim,
            Layer::Conv2d {
                in_c, out_c, kernel, ..
            } => out_c * in_c * kernel * kernel + out_c,
            Layer::Parallel { left, right, .. } => {
                left.iter().map(Layer::param_count).sum::<usize>()
                    + right.iter().map(Layer::param_count).sum::<usize>()
            }
            _ => 0,
        }
    }

    fn out_shape(&self, input: &Shape) -> Result<Shape, NnError> {
        match self {
            Layer::Dense { in_dim, out_dim } => {
                if input.len() != *in_dim {
                    return Err(NnError::ShapeMismatch(format!(
                        "dense expects {in_dim} inputs, got {input}"
                    )));
                }
                Ok(Shape::Flat(*out_dim))
            }
            Layer::Conv2d {
                in_c,
                in_h,
                in_w,
                out_c,
                kernel,
                stride,
            } => {
                match input {
                    Shape::Chw(c, h, w) => {
                        if (c, h, w) != (in_c, in_h, in_w) {
                            return Err(NnError::ShapeMismatch(format!(
                                "conv2d expects {}x{}x{}, got {input}",
                                in_c, in_h, in_w
                            )));
                        }
                    }
                    Shape::Flat(n) => {
                        if *n != in_c * in_h * in_w {
                            return Err(NnError::ShapeMismatch(format!(
                                "conv2d expects {} values ({}x{}x{}), got {n}",
                                in_c * in_h * in_w,
                                in_c,
                                in_h,
                                in_w
                            )));
                        }
                    }
                }
                if *stride == 0 {
                    return Err(NnError::InvalidLayer("conv2d stride must be positive".into()));
                }
                if in_h < kernel || in_w < kernel {
                    return Err(NnError::InvalidLayer(format!(
                        "conv2d kernel {kernel}x{kernel} does not fit input {in_c}x{in_h}x{in_w}"
                    )));
                }
                Ok(Shape::Chw(
                    *out_c,
                    (in_h - kernel) / stride + 1,
                    (in_w - kernel) / stride + 1,
                ))
            }
            Layer::MaxPool2 { c, in_h, in_w } => {
                if *input != Shape::Chw(*c, *in_h, *in_w) {
                    return Err(NnError::ShapeMismatch(format!(
                        "maxpool2 expects {}x{}x{}, got {input}",
                        c, in_h, in_w
                    )));
                }
                if *in_h < 2 || *in_w < 2 {
                    return Err(NnError::InvalidLayer(format!(
                        "maxpool2 needs height and width >= 2, got {in_h}x{in_w}"
                    )));
                }
                Ok(Shape::Chw(*c, in_h / 2, in_w / 2))
            }
            Layer::Relu | Layer::Dropout { .. } => Ok(input.clone()),
            Layer::Flatten => Ok(Shape::Flat(input.len())),
            Layer::Parallel { split, left, right } => {
                let n = input.len();
                if *split > n {
                    return Err(NnError::ShapeMismatch(format!(
                        "parallel split {split} exceeds input length {n}"
                    )));
                }
                let l = shape_after(left, &Shape::Flat(*split))?;
                let r = shape_after(right, &Shape::Flat(n - *split))?;
                Ok(Shape::Flat(l.len() + r.len()))
            }
            Layer::Softmax => Ok(Shape::Flat(input.len())),
        }
    }
}

/// Output shape of a layer stack applied to `input`.
pub fn shape_after(layers: &[Layer], input: &Shape) -> Result<Shape, NnError> {
    let mut s = input.clone();
    for layer in layers {
        s = layer.out_shape(&s)?;
    }
    Ok(s)
}

/// Per-layer output shapes of a stack (top level only).
pub fn shape_chain(layers: &[Layer], input: &Shape) -> Result<Vec<Shape>, NnError> {
    let mut s = input.clone();
    let mut chain = Vec::with_capacity(layers.len());
    for layer in layers {
        s = layer.out_shape(&s)?;
        chain.push(s.clone());
    }
    Ok(chain)
}

/// Forward-pass mode; training mode supplies the dropout stream.
pub enum Mode<'a> {
    Eval,
    Train { dropout_rng: &'a mut ChaCha8Rng },
}

enum CacheData {
    Dense {
        input: Vec<f64>,
    },
    Conv {
        cols: Vec<f64>,
        cells: usize,
    },
    Pool {
        argmax: Vec<u32>,
    },
    Relu {
        active: Vec<bool>,
    },
    Dropout {
        mask: Option<Vec<f64>>,
    },
    Flatten,
    Parallel {
        left: Vec<LayerCache>,
        right: Vec<LayerCache>,
        left_out: usize,
    },
    Softmax {
        probs: Vec<f64>,
    },
}

struct LayerCache {
    offset: usize,
    data: CacheData,
}

/// Cache of one sample's forward pass, consumed by `backward_sample`.
pub struct SampleCache {
    layers: Vec<LayerCache>,
}

/// Ordered layer stack with a flat parameter store.
#[derive(Debug, Clone)]
pub struct Network {
    input_shape: Shape,
    layers: Vec<Layer>,
    params: Vec<f64>,
    output_dim: usize,
}

impl Network {
    /// Validate layer composition against `input_shape` and allocate parameters.
    pub fn new(input_shape: Shape, layers: Vec<Layer>) -> Result<Self, NnError> {
        let out = shape_after(&layers, &input_shape)?;
        let n_params: usize = layers.iter().map(Layer::param_count).sum();
        Ok(Self {
            input_shape,
            layers,
            params: vec![0.0; n_params],
            output_dim: out.len(),
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_shape(&self) -> &Shape {
        &self.input_shape
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) {
        assert_eq!(params.len(), self.params.len());
        self.params = params;
    }

    /// Per-layer output shapes (top level).
    pub fn shapes(&self) -> Vec<Shape> {
        shape_chain(&self.layers, &self.input_shape).expect("validated at construction")
    }

    /// Glorot-uniform weight init (biases zero), drawn from a seeded stream.
    pub fn init_glorot(&mut self, seed: u64) {
        let mut rng = rng::stream(seed, &[rng::tag("glorot-init")]);
        let mut off = 0;
        init_layers(&self.layers.clone(), &mut self.params, &mut off, &mut rng);
    }

    /// Forward one sample; returns output activations and the backward cache.
    pub fn forward_sample(&self, input: &[f64], mode: &mut Mode) -> (Vec<f64>, SampleCache) {
        assert_eq!(
            input.len(),
            self.input_shape.len(),
            "input length does not match network input shape"
        );
        let mut off = 0;
        let mut caches = Vec::with_capacity(self.layers.len());
        let out = chain_forward(&self.layers, &self.params, &mut off, input, mode, &mut caches);
        (out, SampleCache { layers: caches })
    }

    /// Forward without keeping a cache (inference).
    pub fn infer(&self, input: &[f64]) -> Vec<f64> {
        self.forward_sample(input, &mut Mode::Eval).0
    }

    /// Backward one sample. Accumulates parameter gradients into `grads`
    /// (same length as `params`); returns the input gradient when requested.
    pub fn backward_sample(
        &self,
        cache: &SampleCache,
        dout: &[f64],
        grads: &mut [f64],
        need_input_grad: bool,
    ) -> Option<Vec<f64>> {
        assert_eq!(grads.len(), self.params.len());
        chain_backward(
            &self.layers,
            &self.params,
            &cache.layers,
            dout.to_vec(),
            grads,
            need_input_grad,
        )
    }
}

fn init_layers(layers: &[Layer], params: &mut [f64], off: &mut usize, rng: &mut ChaCha8Rng) {
    for layer in layers {
        match layer {
            Layer::Dense { in_dim, out_dim } => {
                let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
                for w in &mut params[*off..*off + in_dim * out_dim] {
                    *w = rng.random_range(-limit..limit);
                }
                *off += in_dim * out_dim + out_dim; // biases stay zero
            }
            Layer::Conv2d {
                in_c, out_c, kernel, ..
            } => {
                let fan = kernel * kernel;
                let limit = (6.0 / ((in_c + out_c) * fan) as f64).sqrt();
                let n_w = out_c * in_c * fan;
                for w in &mut params[*off..*off + n_w] {
                    *w = rng.random_range(-limit..limit);
                }
                *off += n_w + out_c;
            }
            Layer::Parallel { left, right, .. } => {
                init_layers(left, params, off, rng);
                init_layers(right, params, off, rng);
            }
            _ => {}
        }
    }
}

fn chain_forward(
    layers: &[Layer],
    params: &[f64],
    off: &mut usize,
    input: &[f64],
    mode: &mut Mode,
    caches: &mut Vec<LayerCache>,
) -> Vec<f64> {
    let mut x = input.to_vec();
    for layer in layers {
        let offset = *off;
        let (out, data) = match layer {
            Layer::Dense { in_dim, out_dim } => {
                let w = &params[offset..offset + in_dim * out_dim];
                let b = &params[offset + in_dim * out_dim..offset + in_dim * out_dim + out_dim];
                *off += layer.param_count();
                let mut out = vec![0.0; *out_dim];
                for i in 0..*out_dim {
                    let row = &w[i * in_dim..(i + 1) * in_dim];
                    let mut acc = b[i];
                    for (wj, xj) in row.iter().zip(&x) {
                        acc += wj * xj;
                    }
                    out[i] = acc;
                }
                (out, CacheData::Dense { input: x })
            }
            Layer::Conv2d {
                in_c,
                in_h,
                in_w,
                out_c,
                kernel,
                stride,
            } => {
                *off += layer.param_count();
                let (out, cols, cells) = conv_forward(
                    &x,
                    &params[offset..offset + layer.param_count()],
                    *in_c,
                    *in_h,
                    *in_w,
                    *out_c,
                    *kernel,
                    *stride,
                );
                (out, CacheData::Conv { cols, cells })
            }
            Layer::MaxPool2 { c, in_h, in_w } => {
                let (out, argmax) = pool_forward(&x, *c, *in_h, *in_w);
                (out, CacheData::Pool { argmax })
            }
            Layer::Relu => {
                let active: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
                let out = x.iter().map(|&v| v.max(0.0)).collect();
                (out, CacheData::Relu { active })
            }
            Layer::Dropout { p } => match mode {
                Mode::Eval => (x, CacheData::Dropout { mask: None }),
                Mode::Train { dropout_rng } => {
                    let keep_scale = 1.0 / (1.0 - p);
                    let mask: Vec<f64> = (0..x.len())
                        .map(|_| {
                            if dropout_rng.random::<f64>() < *p {
                                0.0
                            } else {
                                keep_scale
                            }
                        })
                        .collect();
                    let out = x.iter().zip(&mask).map(|(v, m)| v * m).collect();
                    (out, CacheData::Dropout { mask: Some(mask) })
                }
            },
            Layer::Flatten => (x, CacheData::Flatten),
            Layer::Parallel { split, left, right } => {
                let mut left_caches = Vec::with_capacity(left.len());
                let mut right_caches = Vec::with_capacity(right.len());
                let mut out = chain_forward(left, params, off, &x[..*split], mode, &mut left_caches);
                let left_out = out.len();
                let r = chain_forward(right, params, off, &x[*split..], mode, &mut right_caches);
                out.extend_from_slice(&r);
                (
                    out,
                    CacheData::Parallel {
                        left: left_caches,
                        right: right_caches,
                        left_out,
                    },
                )
            }
            Layer::Softmax => {
                let out = softmax_row(&x);
                (
                    out.clone(),
                    CacheData::Softmax { probs: out },
                )
            }
        };
        caches.push(LayerCache { offset, data });
        x = out;
    }
    x
}

fn chain_backward(
    layers: &[Layer],
    params: &[f64],
    caches: &[LayerCache],
    mut d: Vec<f64>,
    grads: &mut [f64],
    need_input_grad: bool,
) -> Option<Vec<f64>> {
    for (i, layer) in layers.iter().enumerate().rev() {
        let cache = &caches[i];
        let need_dx = need_input_grad || i > 0;
        d = match (layer, &cache.data) {
            (Layer::Dense { in_dim, out_dim }, CacheData::Dense { input }) => {
                let off = cache.offset;
                let (gw, gb) = grads[off..off + in_dim * out_dim + out_dim]
                    .split_at_mut(in_dim * out_dim);
                for i in 0..*out_dim {
                    let di = d[i];
                    gb[i] += di;
                    let grow = &mut gw[i * in_dim..(i + 1) * in_dim];
                    for (g, xj) in grow.iter_mut().zip(input) {
                        *g += di * xj;
                    }
                }
                if need_dx {
                    let w = &params[off..off + in_dim * out_dim];
                    let mut dx = vec![0.0; *in_dim];
                    for i in 0..*out_dim {
                        let di = d[i];
                        let row = &w[i * in_dim..(i + 1) * in_dim];
                        for (dxj, wj) in dx.iter_mut().zip(row) {
                            *dxj += di * wj;
                        }
                    }
                    dx
                } else {
                    Vec::new()
                }
            }
            (
                Layer::Conv2d {
                    in_c,
                    in_h,
                    in_w,
                    out_c,
                    kernel,
                    stride,
                },
                CacheData::Conv { cols, cells },
            ) => conv_backward(
                &d,
                cols,
                *cells,
                &params[cache.offset..cache.offset + layer.param_count()],
                &mut grads[cache.offset..cache.offset + layer.param_count()],
                *in_c,
                *in_h,
                *in_w,
                *out_c,
                *kernel,
                *stride,
                need_dx,
            ),
            (Layer::MaxPool2 { c, in_h, in_w }, CacheData::Pool { argmax }) => {
                if need_dx {
                    let mut dx = vec![0.0; c * in_h * in_w];
                    for (cell, &src) in argmax.iter().enumerate() {
                        dx[src as usize] += d[cell];
                    }
                    dx
                } else {
                    Vec::new()
                }
            }
            (Layer::Relu, CacheData::Relu { active }) => {
                for (dv, &a) in d.iter_mut().zip(active) {
                    if !a {
                        *dv = 0.0;
                    }
                }
                d
            }
            (Layer::Dropout { .. }, CacheData::Dropout { mask }) => {
                if let Some(mask) = mask {
                    for (dv, m) in d.iter_mut().zip(mask) {
                        *dv *= m;
                    }
                }
                d
            }
            (Layer::Flatten, CacheData::Flatten) => d,
            (
                Layer::Parallel { split, left, right },
                CacheData::Parallel {
                    left: lc,
                    right: rc,
                    left_out,
                },
            ) => {
                let dl = chain_backward(left, params, lc, d[..*left_out].to_vec(), grads, need_dx);
                let dr = chain_backward(right, params, rc, d[*left_out..].to_vec(), grads, need_dx);
                if need_dx {
                    let mut dx = dl.unwrap_or_default();
                    dx.extend_from_slice(&dr.unwrap_or_default());
                    debug_assert_eq!(dx.len() >= *split, true);
                    dx
                } else {
                    Vec::new()
                }
            }
            (Layer::Softmax, CacheData::Softmax { probs }) => {
                // Jacobian-vector product: dz_j = q_j (dq_j - <dq, q>)
                let dot: f64 = d.iter().zip(probs).map(|(dv, q)| dv * q).sum();
                d.iter()
                    .zip(probs)
                    .map(|(dv, q)| q * (dv - dot))
                    .collect()
            }
            _ => unreachable!("cache kind matches layer kind"),
        };
    }
    if need_input_grad {
        Some(d)
    } else {
        None
    }
}

/// Numerically stable softmax of one row (max subtraction).
pub fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.iter().map(|&e| e / sum).collect()
}

/// Row-wise softmax of a `[B, C]` tensor.
pub fn softmax(logits: &Tensor) -> Tensor {
    assert_eq!(logits.shape().len(), 2, "softmax expects a [B, C] tensor");
    let (b, c) = (logits.shape()[0], logits.shape()[1]);
    let mut out = Vec::with_capacity(b * c);
    for r in 0..b {
        out.extend_from_slice(&softmax_row(logits.row(r)));
    }
    Tensor::from_vec(vec![b, c], out).expect("softmax output is finite")
}

fn conv_forward(
    input: &[f64],
    layer_params: &[f64],
    in_c: usize,
    in_h: usize,
    in_w: usize,
    out_c: usize,
    kernel: usize,
    stride: usize,
) -> (Vec<f64>, Vec<f64>, usize) {
    let out_h = (in_h - kernel) / stride + 1;
    let out_w = (in_w - kernel) / stride + 1;
    let cells = out_h * out_w;
    let patch = in_c * kernel * kernel;

    let mut cols = vec![0.0; cells * patch];
    for oy in 0..out_h {
        for ox in 0..out_w {
            let cell = oy * out_w + ox;
            let dst = &mut cols[cell * patch..(cell + 1) * patch];
            let mut p = 0;
            for ci in 0..in_c {
                let base = ci * in_h * in_w;
                for ky in 0..kernel {
                    let src = base + (oy * stride + ky) * in_w + ox * stride;
                    dst[p..p + kernel].copy_from_slice(&input[src..src + kernel]);
                    p += kernel;
                }
            }
        }
    }

    let weights = &layer_params[..out_c * patch];
    let bias = &layer_params[out_c * patch..];
    let mut out = vec![0.0; out_c * cells];
    unsafe {
        // out[oc][cell] = sum_p W[oc][p] * cols[cell][p]
        matrixmultiply::dgemm(
            out_c,
            patch,
            cells,
            1.0,
            weights.as_ptr(),
            patch as isize,
            1,
            cols.as_ptr(),
            1,
            patch as isize,
            0.0,
            out.as_mut_ptr(),
            cells as isize,
            1,
        );
    }
    for oc in 0..out_c {
        let b = bias[oc];
        for v in &mut out[oc * cells..(oc + 1) * cells] {
            *v += b;
        }
    }
    (out, cols, cells)
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    dout: &[f64],
    cols: &[f64],
    cells: usize,
    layer_params: &[f64],
    layer_grads: &mut [f64],
    in_c: usize,
    in_h: usize,
    in_w: usize,
    out_c: usize,
    kernel: usize,
    stride: usize,
    need_dx: bool,
) -> Vec<f64> {
    let patch = in_c * kernel * kernel;
    let (gw, gb) = layer_grads.split_at_mut(out_c * patch);

    for oc in 0..out_c {
        gb[oc] += dout[oc * cells..(oc + 1) * cells].iter().sum::<f64>();
    }
    unsafe {
        // gW[oc][p] += sum_cell dout[oc][cell] * cols[cell][p]
        matrixmultiply::dgemm(
            out_c,
            cells,
            patch,
            1.0,
            dout.as_ptr(),
            cells as isize,
            1,
            cols.as_ptr(),
            patch as isize,
            1,
            1.0,
            gw.as_mut_ptr(),
            patch as isize,
            1,
        );
    }

    if !need_dx {
        return Vec::new();
    }

    let weights = &layer_params[..out_c * patch];
    let mut dcols = vec![0.0; cells * patch];
    unsafe {
        // dcols[cell][p] = sum_oc dout[oc][cell] * W[oc][p]
        matrixmultiply::dgemm(
            cells,
            out_c,
            patch,
            1.0,
            dout.as_ptr(),
            1,
            cells as isize,
            weights.as_ptr(),
            patch as isize,
            1,
            0.0,
            dcols.as_mut_ptr(),
            patch as isize,
            1,
        );
    }

    let out_w = (in_w - kernel) / stride + 1;
    let out_h = (in_h - kernel) / stride + 1;
    let mut dx = vec![0.0; in_c * in_h * in_w];
    for oy in 0..out_h {
        for ox in 0..out_w {
            let cell = oy * out_w + ox;
            let src = &dcols[cell * patch..(cell + 1) * patch];
            let mut p = 0;
            for ci in 0..in_c {
                let base = ci * in_h * in_w;
                for ky in 0..kernel {
                    let dst = base + (oy * stride + ky) * in_w + ox * stride;
                    for kx in 0..kernel {
                        dx[dst + kx] += src[p + kx];
                    }
                    p += kernel;
                }
            }
        }
    }
    dx
}

fn pool_forward(input: &[f64], c: usize, in_h: usize, in_w: usize) -> (Vec<f64>, Vec<u32>) {
    let out_h = in_h / 2;
    let out_w = in_w / 2;
    let mut out = vec![0.0; c * out_h * out_w];
    let mut argmax = vec![0u32; c * out_h * out_w];
    for ci in 0..c {
        let base = ci * in_h * in_w;
        for oy in 0..out_h {
            for ox in 0..out_w {
                let i0 = base + (2 * oy) * in_w + 2 * ox;
                // scan order fixes the first-index tie-break
                let candidates = [i0, i0 + 1, i0 + in_w, i0 + in_w + 1];
                let mut best = candidates[0];
                let mut best_v = input[best];
                for &idx in &candidates[1..] {
                    if input[idx] > best_v {
                        best_v = input[idx];
                        best = idx;
                    }
                }
                let cell = ci * out_h * out_w + oy * out_w + ox;
                out[cell] = best_v;
                argmax[cell] = best as u32;
            }
        }
    }
    (out, argmax)
}

/// Valid (no padding) 2-d convolution of a `[C_in, H, W]` tensor with
/// `[C_out, C_in, k, k]` kernels and a per-output-channel bias.
pub fn conv2d(
    input: &Tensor,
    kernels: &Tensor,
    bias: &[f64],
    stride: usize,
) -> Result<Tensor, NnError> {
    let ishape = input.shape();
    let kshape = kernels.shape();
    if ishape.len() != 3 {
        return Err(NnError::ShapeMismatch(format!(
            "conv2d input must be [C,H,W], got {ishape:?}"
        )));
    }
    if kshape.len() != 4 || kshape[2] != kshape[3] {
        return Err(NnError::ShapeMismatch(format!(
            "conv2d kernels must be [C_out,C_in,k,k], got {kshape:?}"
        )));
    }
    let (in_c, in_h, in_w) = (ishape[0], ishape[1], ishape[2]);
    let (out_c, kc, k) = (kshape[0], kshape[1], kshape[2]);
    if kc != in_c {
        return Err(NnError::ShapeMismatch(format!(
            "conv2d input has {in_c} channels but kernels expect {kc}"
        )));
    }
    if bias.len() != out_c {
        return Err(NnError::ShapeMismatch(format!(
            "conv2d bias length {} != output channels {out_c}",
            bias.len()
        )));
    }
    let layer = Layer::Conv2d {
        in_c,
        in_h,
        in_w,
        out_c,
        kernel: k,
        stride,
    };
    let out_shape = layer.out_shape(&Shape::Chw(in_c, in_h, in_w))?;
    let mut params = kernels.data().to_vec();
    params.extend_from_slice(bias);
    let (out, _, _) = conv_forward(input.data(), &params, in_c, in_h, in_w, out_c, k, stride);
    let Shape::Chw(oc, oh, ow) = out_shape else {
        unreachable!()
    };
    Tensor::from_vec(vec![oc, oh, ow], out)
        .map_err(|e| NnError::ShapeMismatch(e.to_string()))
}

/// 2x2 max pooling; trailing odd row/column dropped.
pub fn maxpool2(input: &Tensor) -> Result<Tensor, NnError> {
    let ishape = input.shape();
    if ishape.len() != 3 {
        return Err(NnError::ShapeMismatch(format!(
            "maxpool2 input must be [C,H,W], got {ishape:?}"
        )));
    }
    let (c, h, w) = (ishape[0], ishape[1], ishape[2]);
    if h < 2 || w < 2 {
        return Err(NnError::InvalidLayer(format!(
            "maxpool2 needs height and width >= 2, got {h}x{w}"
        )));
    }
    let (out, _) = pool_forward(input.data(), c, h, w);
    Tensor::from_vec(vec![c, h / 2, w / 2], out).map_err(|e| NnError::ShapeMismatch(e.to_string()))
}
