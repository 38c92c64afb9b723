use serde::{Deserialize, Serialize};

use super::params::{LayerSlots, ParamLayout, ParamState, Slot};
use super::spec::{LayerSpec, LossKind, NetworkSpec};
use crate::numerics::{Prng, Tensor};
use crate::{Error, Result};

pub const BATCHNORM_EPS: f64 = 1e-5;
pub const BATCHNORM_MOMENTUM: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

/// Supervision for one batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Targets {
    Classes(Vec<usize>),
    /// Same shape as the network output, batch axis first.
    Values(Tensor),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values(t) => t.batch_len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn gather(&self, indices: &[usize]) -> Result<Targets> {
        match self {
            Targets::Classes(c) => indices
                .iter()
                .map(|&i| {
                    c.get(i)
                        .copied()
                        .ok_or_else(|| Error::invalid(format!("target index {i} out of range")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Targets::Classes),
            Targets::Values(t) => t.gather(indices).map(Targets::Values),
        }
    }
}

#[derive(Clone, Debug)]
enum Cache {
    None,
    /// Flat input index of the maximum for every output element.
    Pool(Vec<usize>),
    Norm { xhat: Vec<f64>, inv_std: Vec<f64>, train: bool },
    /// Scaled keep mask.
    Mask(Vec<f64>),
    Augmented(Vec<bool>),
}

/// Everything a backward pass needs from the paired forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    activations: Vec<Tensor>,
    caches: Vec<Cache>,
    buffers: Vec<f64>,
}

impl Trace {
    pub fn outputs(&self) -> &Tensor {
        self.activations.last().expect("input is always present")
    }

    pub fn into_outputs(mut self) -> Tensor {
        self.activations.pop().expect("input is always present")
    }

    /// Buffers after this pass (batchnorm running statistics move in train mode).
    pub fn buffers(&self) -> &[f64] {
        &self.buffers
    }
}

/// Loss value, parameter gradient and the outputs of one train-mode pass.
#[derive(Clone, Debug)]
pub struct Gradient {
    pub loss: f64,
    pub grads: Vec<f64>,
    pub outputs: Tensor,
    pub buffers: Vec<f64>,
}

/// A validated [`NetworkSpec`] with resolved shapes and parameter layout.
#[derive(Clone, Debug)]
pub struct Network {
    spec: NetworkSpec,
    shapes: Vec<Vec<usize>>,
    param_offsets: Vec<usize>,
    buffer_offsets: Vec<usize>,
    layout: ParamLayout,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        if spec.input_shape.is_empty() || spec.input_shape.contains(&0) {
            return Err(Error::invalid(format!(
                "input shape must have positive extents, got {:?}",
                spec.input_shape
            )));
        }
        let mut shapes = vec![spec.input_shape.clone()];
        let mut layout = ParamLayout::default();
        let mut param_offsets = Vec::with_capacity(spec.layers.len());
        let mut buffer_offsets = Vec::with_capacity(spec.layers.len());
        for (i, layer) in spec.layers.iter().enumerate() {
            let input = shapes.last().expect("non-empty").clone();
            let output = layer.output_shape(i, &input)?;
            param_offsets.push(layout.param_count);
            buffer_offsets.push(layout.buffer_count);
            let mut slots = LayerSlots {
                layer: i,
                kind: layer.name().to_string(),
                params: Vec::new(),
                buffers: Vec::new(),
            };
            for (name, shape) in layer.param_shapes(&input) {
                let slot = Slot {
                    name: name.to_string(),
                    shape,
                    offset: layout.param_count,
                };
                layout.param_count += slot.len();
                slots.params.push(slot);
            }
            for (name, shape) in layer.buffer_shapes(&input) {
                let slot = Slot {
                    name: name.to_string(),
                    shape,
                    offset: layout.buffer_count,
                };
                layout.buffer_count += slot.len();
                slots.buffers.push(slot);
            }
            if !slots.params.is_empty() || !slots.buffers.is_empty() {
                layout.layers.push(slots);
            }
            shapes.push(output);
        }
        let out = shapes.last().expect("non-empty");
        if spec.loss == LossKind::SoftmaxCrossEntropy && (out.len() != 1 || out[0] < 2) {
            return Err(Error::LayerShape {
                layer: spec.layers.len().saturating_sub(1),
                message: format!(
                    "softmax cross-entropy needs a flat output with >= 2 classes, got {out:?}"
                ),
            });
        }
        Ok(Self {
            spec,
            shapes,
            param_offsets,
            buffer_offsets,
            layout,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layout.param_count
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.shapes[0]
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("non-empty")
    }

    /// Item shape entering each layer, followed by the output shape.
    pub fn shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    /// Uniform ±1/√fan_in for weights and biases; batchnorm starts at
    /// γ = 1, β = 0 with running mean 0 and variance 1.
    pub fn init_params(&self, prng: &mut Prng) -> ParamState {
        let mut state = ParamState::zeros(self.layout.clone());
        for slots in &self.layout.layers {
            let i = slots.layer;
            let layer = &self.spec.layers[i];
            match layer {
                LayerSpec::Dense { .. } | LayerSpec::Conv2d { .. } => {
                    let bound = 1.0 / (layer.fan_in(&self.shapes[i]) as f64).sqrt();
                    for slot in &slots.params {
                        for v in &mut state.values[slot.range()] {
                            *v = prng.uniform(-bound, bound);
                        }
                    }
                }
                LayerSpec::BatchNorm2d => {
                    state.values[slots.params[0].range()].fill(1.0);
                    state.buffers[slots.buffers[1].range()].fill(1.0);
                }
                _ => {}
            }
        }
        state
    }

    fn check_params(&self, params: &ParamState) -> Result<()> {
        if params.values.len() != self.layout.param_count
            || params.buffers.len() != self.layout.buffer_count
        {
            return Err(Error::invalid(format!(
                "parameter state has {}+{} values, network needs {}+{}",
                params.values.len(),
                params.buffers.len(),
                self.layout.param_count,
                self.layout.buffer_count
            )));
        }
        Ok(())
    }

    pub fn forward(
        &self,
        params: &ParamState,
        batch: &Tensor,
        mode: Mode,
        prng: &mut Prng,
    ) -> Result<Trace> {
        self.check_params(params)?;
        if batch.rank() < 2 || batch.item_shape() != self.input_shape() {
            return Err(Error::LayerShape {
                layer: 0,
                message: format!(
                    "batch shape {:?} does not match [N, {:?}]",
                    batch.shape(),
                    self.input_shape()
                ),
            });
        }
        let n = batch.batch_len();
        let mut activations = Vec::with_capacity(self.spec.layers.len() + 1);
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        let mut buffers = params.buffers.clone();
        activations.push(batch.clone());
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let x = activations.last().expect("non-empty");
            let p = &params.values[self.param_offsets[i]..];
            let (y, cache) = match *layer {
                LayerSpec::Dense { units } => {
                    (dense_forward(x.data(), n, self.shapes[i][0], units, p), Cache::None)
                }
                LayerSpec::Conv2d { filters, kernel } => (
                    conv_forward(x.data(), n, &self.shapes[i], filters, kernel, p),
                    Cache::None,
                ),
                LayerSpec::MaxPool2 => {
                    let (y, idx) = pool_forward(x.data(), n, &self.shapes[i]);
                    (y, Cache::Pool(idx))
                }
                LayerSpec::Relu => (x.data().iter().map(|&v| v.max(0.0)).collect(), Cache::None),
                LayerSpec::Tanh => (x.data().iter().map(|v| v.tanh()).collect(), Cache::None),
                LayerSpec::Sigmoid => (x.data().iter().map(|&v| sigmoid(v)).collect(), Cache::None),
                LayerSpec::Softplus => (x.data().iter().map(|&v| softplus(v)).collect(), Cache::None),
                LayerSpec::BatchNorm2d => {
                    let c = *self.shapes[i].last().expect("validated");
                    let b = &mut buffers[self.buffer_offsets[i]..self.buffer_offsets[i] + 2 * c];
                    batchnorm_forward(x.data(), c, p, b, mode)
                }
                LayerSpec::Dropout { rate } => {
                    if mode == Mode::Train && rate > 0.0 {
                        let keep = 1.0 / (1.0 - rate);
                        let mask: Vec<f64> = (0..x.len())
                            .map(|_| if prng.next_f64() < rate { 0.0 } else { keep })
                            .collect();
                        let y = x.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
                        (y, Cache::Mask(mask))
                    } else {
                        (x.data().to_vec(), Cache::None)
                    }
                }
                LayerSpec::Flatten => (x.data().to_vec(), Cache::None),
                LayerSpec::Augment { transform } => {
                    if mode == Mode::Train {
                        let (h, w, c) = image_hwc(&self.shapes[i]);
                        let mut flags = vec![false; n];
                        for &k in &prng.permutation(n)[..n / 2] {
                            flags[k] = true;
                        }
                        let mut y = x.data().to_vec();
                        let item = h * w * c;
                        for (k, &f) in flags.iter().enumerate() {
                            if f {
                                let src = &x.data()[k * item..(k + 1) * item];
                                y[k * item..(k + 1) * item]
                                    .copy_from_slice(&transform.apply_raw(src, h, w, c));
                            }
                        }
                        (y, Cache::Augmented(flags))
                    } else {
                        (x.data().to_vec(), Cache::None)
                    }
                }
            };
            let mut shape = vec![n];
            shape.extend_from_slice(&self.shapes[i + 1]);
            activations.push(Tensor::new(shape, y)?);
            caches.push(cache);
        }
        Ok(Trace {
            activations,
            caches,
            buffers,
        })
    }

    /// Eval-mode outputs.
    pub fn predict(&self, params: &ParamState, batch: &Tensor) -> Result<Tensor> {
        let mut unused = Prng::new(0);
        Ok(self.forward(params, batch, Mode::Eval, &mut unused)?.into_outputs())
    }

    /// Loss of `outputs` against `targets` and its gradient with respect to
    /// the outputs.
    pub fn loss(&self, outputs: &Tensor, targets: &Targets) -> Result<(f64, Tensor)> {
        let n = outputs.batch_len();
        if targets.len() != n {
            return Err(Error::invalid(format!(
                "{} targets for a batch of {n}",
                targets.len()
            )));
        }
        match (self.spec.loss, targets) {
            (LossKind::SoftmaxCrossEntropy, Targets::Classes(labels)) => {
                let classes = outputs.len() / n;
                let mut grad = vec![0.0; outputs.len()];
                let mut total = 0.0;
                for (k, &label) in labels.iter().enumerate() {
                    if label >= classes {
                        return Err(Error::invalid(format!(
                            "label {label} out of range for {classes} classes"
                        )));
                    }
                    let z = outputs.item(k);
                    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
                    let log_norm = max + sum.ln();
                    total += log_norm - z[label];
                    let g = &mut grad[k * classes..(k + 1) * classes];
                    for (gj, zj) in g.iter_mut().zip(z) {
                        *gj = (zj - log_norm).exp() / n as f64;
                    }
                    g[label] -= 1.0 / n as f64;
                }
                Ok((total / n as f64, Tensor::new(outputs.shape().to_vec(), grad)?))
            }
            (LossKind::MeanSquaredError, Targets::Values(t)) => {
                if t.len() != outputs.len() {
                    return Err(Error::invalid(format!(
                        "target shape {:?} does not match output shape {:?}",
                        t.shape(),
                        outputs.shape()
                    )));
                }
                let m = outputs.len() as f64;
                let mut total = 0.0;
                let grad: Vec<f64> = outputs
                    .data()
                    .iter()
                    .zip(t.data())
                    .map(|(y, t)| {
                        let d = y - t;
                        total += d * d;
                        2.0 * d / m
                    })
                    .collect();
                Ok((total / m, Tensor::new(outputs.shape().to_vec(), grad)?))
            }
            (loss, _) => Err(Error::invalid(format!(
                "{loss:?} does not accept these targets"
            ))),
        }
    }

    /// Forward pass, loss and its value without gradients.
    pub fn forward_loss(
        &self,
        params: &ParamState,
        batch: &Tensor,
        targets: &Targets,
        mode: Mode,
        prng: &mut Prng,
    ) -> Result<(Tensor, f64)> {
        let out = self.forward(params, batch, mode, prng)?.into_outputs();
        let (loss, _) = self.loss(&out, targets)?;
        Ok((out, loss))
    }

    /// Train-mode loss and parameter gradient.
    pub fn backward(
        &self,
        params: &ParamState,
        batch: &Tensor,
        targets: &Targets,
        prng: &mut Prng,
    ) -> Result<Gradient> {
        let trace = self.forward(params, batch, Mode::Train, prng)?;
        let (loss, grad_out) = self.loss(trace.outputs(), targets)?;
        let grads = self.backward_from(params, &trace, &grad_out)?;
        let buffers = trace.buffers.clone();
        Ok(Gradient {
            loss,
            grads,
            outputs: trace.into_outputs(),
            buffers,
        })
    }

    /// Pulls an arbitrary output gradient back to the parameters.
    pub fn backward_from(
        &self,
        params: &ParamState,
        trace: &Trace,
        grad_output: &Tensor,
    ) -> Result<Vec<f64>> {
        self.check_params(params)?;
        if grad_output.shape() != trace.outputs().shape() {
            return Err(Error::invalid(format!(
                "output gradient shape {:?} does not match outputs {:?}",
                grad_output.shape(),
                trace.outputs().shape()
            )));
        }
        let n = grad_output.batch_len();
        let mut grads = vec![0.0; self.layout.param_count];
        let mut g = grad_output.data().to_vec();
        for (i, layer) in self.spec.layers.iter().enumerate().rev() {
            let x = trace.activations[i].data();
            let y = trace.activations[i + 1].data();
            let need_input = i > 0;
            let off = self.param_offsets[i];
            let p = &params.values[off..];
            g = match (layer, &trace.caches[i]) {
                (&LayerSpec::Dense { units }, _) => {
                    dense_backward(x, &g, n, self.shapes[i][0], units, p, &mut grads[off..], need_input)
                }
                (&LayerSpec::Conv2d { filters, kernel }, _) => conv_backward(
                    x,
                    &g,
                    n,
                    &self.shapes[i],
                    filters,
                    kernel,
                    p,
                    &mut grads[off..],
                    need_input,
                ),
                (LayerSpec::MaxPool2, Cache::Pool(idx)) => {
                    let mut dx = vec![0.0; x.len()];
                    for (&j, gv) in idx.iter().zip(&g) {
                        dx[j] += gv;
                    }
                    dx
                }
                (LayerSpec::Relu, _) => {
                    g.iter().zip(x).map(|(gv, &xv)| if xv > 0.0 { *gv } else { 0.0 }).collect()
                }
                (LayerSpec::Tanh, _) => g.iter().zip(y).map(|(gv, yv)| gv * (1.0 - yv * yv)).collect(),
                (LayerSpec::Sigmoid, _) => g.iter().zip(y).map(|(gv, yv)| gv * yv * (1.0 - yv)).collect(),
                (LayerSpec::Softplus, _) => {
                    g.iter().zip(x).map(|(gv, &xv)| gv * sigmoid(xv)).collect()
                }
                (LayerSpec::BatchNorm2d, Cache::Norm { xhat, inv_std, train }) => {
                    let c = inv_std.len();
                    batchnorm_backward(&g, xhat, inv_std, *train, p, &mut grads[off..off + 2 * c])
                }
                (LayerSpec::Dropout { .. }, Cache::Mask(mask)) => {
                    g.iter().zip(mask).map(|(a, m)| a * m).collect()
                }
                (LayerSpec::Augment { transform }, Cache::Augmented(flags)) => {
                    let (h, w, c) = image_hwc(&self.shapes[i]);
                    let item = h * w * c;
                    let inv = transform.inverse();
                    for (k, &f) in flags.iter().enumerate() {
                        if f {
                            let back = inv.apply_raw(&g[k * item..(k + 1) * item], h, w, c);
                            g[k * item..(k + 1) * item].copy_from_slice(&back);
                        }
                    }
                    g
                }
                _ => g,
            };
        }
        Ok(grads)
    }
}

fn image_hwc(shape: &[usize]) -> (usize, usize, usize) {
    match *shape {
        [h, w] => (h, w, 1),
        [h, w, c] => (h, w, c),
        _ => unreachable!("validated image shape"),
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

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn dense_forward(x: &[f64], n: usize, din: usize, units: usize, p: &[f64]) -> Vec<f64> {
    let (w, b) = (&p[..din * units], &p[din * units..din * units + units]);
    let mut y = Vec::with_capacity(n * units);
    for k in 0..n {
        let mut row = b.to_vec();
        for (i, &xi) in x[k * din..(k + 1) * din].iter().enumerate() {
            if xi != 0.0 {
                for (r, wv) in row.iter_mut().zip(&w[i * units..(i + 1) * units]) {
                    *r += xi * wv;
                }
            }
        }
        y.extend_from_slice(&row);
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn dense_backward(
    x: &[f64],
    g: &[f64],
    n: usize,
    din: usize,
    units: usize,
    p: &[f64],
    grads: &mut [f64],
    need_input: bool,
) -> Vec<f64> {
    let (dw, rest) = grads.split_at_mut(din * units);
    let db = &mut rest[..units];
    let w = &p[..din * units];
    let mut dx = if need_input { vec![0.0; n * din] } else { Vec::new() };
    for k in 0..n {
        let gk = &g[k * units..(k + 1) * units];
        for (d, gv) in db.iter_mut().zip(gk) {
            *d += gv;
        }
        for i in 0..din {
            let xi = x[k * din + i];
            let row = i * units..(i + 1) * units;
            for (d, gv) in dw[row.clone()].iter_mut().zip(gk) {
                *d += xi * gv;
            }
            if need_input {
                dx[k * din + i] = w[row].iter().zip(gk).map(|(a, b)| a * b).sum();
            }
        }
    }
    dx
}

fn conv_forward(
    x: &[f64],
    n: usize,
    shape: &[usize],
    filters: usize,
    k: usize,
    p: &[f64],
) -> Vec<f64> {
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    let (oh, ow) = (h - k + 1, w - k + 1);
    let wlen = k * k * c * filters;
    let (wt, b) = (&p[..wlen], &p[wlen..wlen + filters]);
    let mut y = vec![0.0; n * oh * ow * filters];
    for s in 0..n {
        let xs = &x[s * h * w * c..(s + 1) * h * w * c];
        for oy in 0..oh {
            for ox in 0..ow {
                let o = ((s * oh + oy) * ow + ox) * filters;
                let out = &mut y[o..o + filters];
                out.copy_from_slice(b);
                for ky in 0..k {
                    for kx in 0..k {
                        let xi = ((oy + ky) * w + ox + kx) * c;
                        for ci in 0..c {
                            let xv = xs[xi + ci];
                            let wi = ((ky * k + kx) * c + ci) * filters;
                            for (ov, wv) in out.iter_mut().zip(&wt[wi..wi + filters]) {
                                *ov += xv * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    g: &[f64],
    n: usize,
    shape: &[usize],
    filters: usize,
    k: usize,
    p: &[f64],
    grads: &mut [f64],
    need_input: bool,
) -> Vec<f64> {
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    let (oh, ow) = (h - k + 1, w - k + 1);
    let wlen = k * k * c * filters;
    let wt = &p[..wlen];
    let (dw, rest) = grads.split_at_mut(wlen);
    let db = &mut rest[..filters];
    let mut dx = if need_input { vec![0.0; x.len()] } else { Vec::new() };
    for s in 0..n {
        let base = s * h * w * c;
        for oy in 0..oh {
            for ox in 0..ow {
                let o = ((s * oh + oy) * ow + ox) * filters;
                let go = &g[o..o + filters];
                for (d, gv) in db.iter_mut().zip(go) {
                    *d += gv;
                }
                for ky in 0..k {
                    for kx in 0..k {
                        let xi = base + ((oy + ky) * w + ox + kx) * c;
                        for ci in 0..c {
                            let wi = ((ky * k + kx) * c + ci) * filters;
                            let xv = x[xi + ci];
                            for (d, gv) in dw[wi..wi + filters].iter_mut().zip(go) {
                                *d += xv * gv;
                            }
                            if need_input {
                                dx[xi + ci] +=
                                    wt[wi..wi + filters].iter().zip(go).map(|(a, b)| a * b).sum::<f64>();
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}

fn pool_forward(x: &[f64], n: usize, shape: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let (h, w, c) = (shape[0], shape[1], shape[2]);
    let (oh, ow) = (h / 2, w / 2);
    let mut y = Vec::with_capacity(n * oh * ow * c);
    let mut idx = Vec::with_capacity(n * oh * ow * c);
    for s in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                for ci in 0..c {
                    let mut best = usize::MAX;
                    let mut best_v = f64::NEG_INFINITY;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let j = ((s * h + 2 * oy + dy) * w + 2 * ox + dx) * c + ci;
                            if best == usize::MAX || x[j] > best_v {
                                best = j;
                                best_v = x[j];
                            }
                        }
                    }
                    y.push(best_v);
                    idx.push(best);
                }
            }
        }
    }
    (y, idx)
}

fn batchnorm_forward(
    x: &[f64],
    c: usize,
    p: &[f64],
    buffers: &mut [f64],
    mode: Mode,
) -> (Vec<f64>, Cache) {
    let (gamma, beta) = (&p[..c], &p[c..2 * c]);
    let m = x.len() / c;
    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![0.0; c];
            for row in x.chunks_exact(c) {
                for (a, v) in mean.iter_mut().zip(row) {
                    *a += v;
                }
            }
            mean.iter_mut().for_each(|a| *a /= m as f64);
            let mut var = vec![0.0; c];
            for row in x.chunks_exact(c) {
                for ((a, v), mu) in var.iter_mut().zip(row).zip(&mean) {
                    *a += (v - mu) * (v - mu);
                }
            }
            var.iter_mut().for_each(|a| *a /= m as f64);
            let unbias = if m > 1 { m as f64 / (m - 1) as f64 } else { 1.0 };
            let (rm, rv) = buffers.split_at_mut(c);
            for j in 0..c {
                rm[j] = (1.0 - BATCHNORM_MOMENTUM) * rm[j] + BATCHNORM_MOMENTUM * mean[j];
                rv[j] = (1.0 - BATCHNORM_MOMENTUM) * rv[j] + BATCHNORM_MOMENTUM * var[j] * unbias;
            }
            (mean, var)
        }
        Mode::Eval => (buffers[..c].to_vec(), buffers[c..2 * c].to_vec()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BATCHNORM_EPS).sqrt()).collect();
    let mut xhat = Vec::with_capacity(x.len());
    let mut y = Vec::with_capacity(x.len());
    for row in x.chunks_exact(c) {
        for j in 0..c {
            let h = (row[j] - mean[j]) * inv_std[j];
            xhat.push(h);
            y.push(gamma[j] * h + beta[j]);
        }
    }
    (
        y,
        Cache::Norm {
            xhat,
            inv_std,
            train: mode == Mode::Train,
        },
    )
}

fn batchnorm_backward(
    g: &[f64],
    xhat: &[f64],
    inv_std: &[f64],
    train: bool,
    p: &[f64],
    grads: &mut [f64],
) -> Vec<f64> {
    let c = inv_std.len();
    let gamma = &p[..c];
    let m = (g.len() / c) as f64;
    let mut sum_g = vec![0.0; c];
    let mut sum_gx = vec![0.0; c];
    for (gr, xr) in g.chunks_exact(c).zip(xhat.chunks_exact(c)) {
        for j in 0..c {
            sum_g[j] += gr[j];
            sum_gx[j] += gr[j] * xr[j];
        }
    }
    for j in 0..c {
        grads[j] += sum_gx[j];
        grads[c + j] += sum_g[j];
    }
    let mut dx = Vec::with_capacity(g.len());
    for (gr, xr) in g.chunks_exact(c).zip(xhat.chunks_exact(c)) {
        for j in 0..c {
            let scale = gamma[j] * inv_std[j];
            dx.push(if train {
                scale * (gr[j] - sum_g[j] / m - xr[j] * sum_gx[j] / m)
            } else {
                scale * gr[j]
            });
        }
    }
    dx
}
