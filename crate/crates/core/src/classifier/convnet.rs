//! Small convolutional network: conv / relu / 2x2 max-pool / dense / softmax,
//! trained with mini-batch SGD on cross-entropy.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pathgeom::RectifiedPatch;

use super::{normalize_patch, PatchClass, PatchClassifier};

/// Channels x height x width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn size(&self) -> usize {
        self.channels * self.height * self.width
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// Zero-padded "same" convolution; `weights` is `[cout][cin][k][k]`.
    Conv {
        kernel: usize,
        cin: usize,
        cout: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    /// Non-overlapping max pooling; odd trailing rows/columns are dropped.
    MaxPool { size: usize },
    /// Fully connected on the flattened input; `weights` is `[output][input]`.
    Dense {
        input: usize,
        output: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Softmax,
}

impl Layer {
    pub fn conv(kernel: usize, cin: usize, cout: usize) -> Self {
        Layer::Conv {
            kernel,
            cin,
            cout,
            weights: vec![0.0; cout * cin * kernel * kernel],
            bias: vec![0.0; cout],
        }
    }

    pub fn dense(input: usize, output: usize) -> Self {
        Layer::Dense {
            input,
            output,
            weights: vec![0.0; input * output],
            bias: vec![0.0; output],
        }
    }

    fn output_shape(&self, input: Shape) -> Result<Shape> {
        match self {
            Layer::Conv {
                kernel,
                cin,
                cout,
                weights,
                bias,
            } => {
                if *cin != input.channels {
                    return Err(Error::ShapeChain(format!("conv expects {cin} channels, input is {input}")));
                }
                if kernel % 2 == 0 || weights.len() != cout * cin * kernel * kernel || bias.len() != *cout {
                    return Err(Error::ShapeChain(format!("malformed conv{kernel}x{kernel} {cin}->{cout}")));
                }
                Ok(Shape::new(*cout, input.height, input.width))
            }
            Layer::Relu | Layer::Softmax => Ok(input),
            Layer::MaxPool { size } => {
                if *size == 0 || input.height < *size || input.width < *size {
                    return Err(Error::ShapeChain(format!("maxpool({size}) on {input}")));
                }
                Ok(Shape::new(input.channels, input.height / size, input.width / size))
            }
            Layer::Dense {
                input: n_in,
                output,
                weights,
                bias,
            } => {
                if *n_in != input.size() {
                    return Err(Error::ShapeChain(format!("dense expects {n_in} inputs, got {input}")));
                }
                if weights.len() != n_in * output || bias.len() != *output {
                    return Err(Error::ShapeChain(format!("malformed dense {n_in}->{output}")));
                }
                Ok(Shape::new(*output, 1, 1))
            }
        }
    }

    fn params(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Layer::Conv { weights, bias, .. } | Layer::Dense { weights, bias, .. } => Some((weights, bias)),
            _ => None,
        }
    }

    fn params_mut(&mut self) -> Option<(&mut [f64], &mut [f64])> {
        match self {
            Layer::Conv { weights, bias, .. } | Layer::Dense { weights, bias, .. } => Some((weights, bias)),
            _ => None,
        }
    }
}

/// Network weights, architecture, and the foreground decision threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvNetModel {
    input: Shape,
    layers: Vec<Layer>,
    threshold: f64,
}

impl ConvNetModel {
    /// Validates that the layer shapes chain from `input` to two softmax outputs.
    pub fn new(input: Shape, layers: Vec<Layer>, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidParameter(format!("threshold must be in (0, 1), got {threshold}")));
        }
        let model = Self {
            input,
            layers,
            threshold,
        };
        model.check_chain()?;
        Ok(model)
    }

    fn check_chain(&self) -> Result<()> {
        let mut shape = self.input;
        if shape.size() == 0 {
            return Err(Error::ShapeChain("empty input".into()));
        }
        for layer in &self.layers {
            shape = layer.output_shape(shape)?;
        }
        if shape.size() != 2 {
            return Err(Error::ShapeChain(format!("network ends in {shape}, need 2 outputs")));
        }
        if !matches!(self.layers.last(), Some(Layer::Softmax)) {
            return Err(Error::ShapeChain("last layer must be softmax".into()));
        }
        if self.layers[..self.layers.len() - 1].iter().any(|l| matches!(l, Layer::Softmax)) {
            return Err(Error::ShapeChain("softmax may only appear last".into()));
        }
        for layer in &self.layers {
            if let Some((w, b)) = layer.params() {
                if w.iter().chain(b).any(|v| !v.is_finite()) {
                    return Err(Error::ShapeChain("non-finite weight".into()));
                }
            }
        }
        Ok(())
    }

    /// conv3x3(1→8) → relu → pool → conv3x3(8→16) → relu → pool → dense(→32)
    /// → relu → dense(32→2) → softmax, for `height` x `width` single-channel
    /// input, with all-zero weights.
    pub fn reference_architecture(height: usize, width: usize) -> Result<Self> {
        let flat = 16 * (height / 2 / 2) * (width / 2 / 2);
        Self::new(
            Shape::new(1, height, width),
            vec![
                Layer::conv(3, 1, 8),
                Layer::Relu,
                Layer::MaxPool { size: 2 },
                Layer::conv(3, 8, 16),
                Layer::Relu,
                Layer::MaxPool { size: 2 },
                Layer::dense(flat, 32),
                Layer::Relu,
                Layer::dense(32, 2),
                Layer::Softmax,
            ],
            0.5,
        )
    }

    /// Uniform He initialization (`±sqrt(6 / fan_in)`), zero biases.
    pub fn initialize(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut self.layers {
            let fan_in = match layer {
                Layer::Conv { kernel, cin, .. } => *kernel * *kernel * *cin,
                Layer::Dense { input, .. } => *input,
                _ => continue,
            };
            let bound = (6.0f64 / fan_in as f64).sqrt();
            let (w, b) = layer.params_mut().unwrap();
            for v in w.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
            b.fill(0.0);
        }
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<()> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::InvalidParameter(format!("threshold must be in (0, 1), got {threshold}")));
        }
        self.threshold = threshold;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    /// All trainable parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            if let Some((w, b)) = layer.params_mut() {
                if index < w.len() {
                    return &mut w[index];
                }
                index -= w.len();
                if index < b.len() {
                    return &mut b[index];
                }
                index -= b.len();
            }
        }
        panic!("parameter index out of range");
    }

    /// `(p_fg, p_bg)` for an already-normalized input of `input_shape().size()` values.
    pub fn forward_raw(&self, input: &[f64]) -> Result<(f64, f64)> {
        if input.len() != self.input.size() {
            return Err(Error::ShapeMismatch {
                expected: self.input.to_string(),
                actual: format!("{} values", input.len()),
            });
        }
        let mut shape = self.input;
        let mut cur = input.to_vec();
        for layer in &self.layers {
            let (next, out_shape, _) = layer_forward(layer, &cur, shape);
            cur = next;
            shape = out_shape;
        }
        Ok((cur[0], cur[1]))
    }

    /// Normalizes `patch` (zero mean, unit variance) and runs the network.
    pub fn forward(&self, patch: &RectifiedPatch) -> Result<(f64, f64)> {
        self.check_patch(patch)?;
        self.forward_raw(&normalize_patch(&patch.data))
    }

    fn check_patch(&self, patch: &RectifiedPatch) -> Result<()> {
        if self.input.channels != 1 || patch.rows != self.input.height || patch.cols != self.input.width {
            return Err(Error::ShapeMismatch {
                expected: self.input.to_string(),
                actual: format!("1x{}x{}", patch.rows, patch.cols),
            });
        }
        Ok(())
    }

    /// Cross-entropy loss and its gradient with respect to every parameter
    /// (same order as [`params`](Self::params)).
    pub fn loss_and_gradient(&self, input: &[f64], label: PatchClass) -> Result<(f64, Vec<f64>)> {
        let mut grads = Vec::with_capacity(self.param_count());
        let loss = self.accumulate_gradient(input, label, &mut grads, true)?;
        Ok((loss, grads))
    }

    pub fn loss(&self, input: &[f64], label: PatchClass) -> Result<f64> {
        let (p_fg, p_bg) = self.forward_raw(input)?;
        Ok(cross_entropy(p_fg, p_bg, label))
    }

    /// Adds this sample's gradient into `acc` (or fills it if `fresh`).
    fn accumulate_gradient(&self, input: &[f64], label: PatchClass, acc: &mut Vec<f64>, fresh: bool) -> Result<f64> {
        if input.len() != self.input.size() {
            return Err(Error::ShapeMismatch {
                expected: self.input.to_string(),
                actual: format!("{} values", input.len()),
            });
        }
        // forward with caches
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        let mut pools = Vec::with_capacity(self.layers.len());
        acts.push(input.to_vec());
        shapes.push(self.input);
        for layer in &self.layers {
            let (next, s, argmax) = layer_forward(layer, acts.last().unwrap(), *shapes.last().unwrap());
            acts.push(next);
            shapes.push(s);
            pools.push(argmax);
        }
        let probs = acts.last().unwrap();
        let loss = cross_entropy(probs[0], probs[1], label);

        // softmax + cross-entropy: d loss / d logits = p - y
        let target = match label {
            PatchClass::Foreground => [1.0, 0.0],
            PatchClass::Background => [0.0, 1.0],
        };
        let mut grad = vec![probs[0] - target[0], probs[1] - target[1]];

        let n_layers = self.layers.len();
        let mut layer_grads: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; n_layers];
        for li in (0..n_layers - 1).rev() {
            let layer = &self.layers[li];
            let input = &acts[li];
            let in_shape = shapes[li];
            let (g_in, g_params) = layer_backward(layer, input, in_shape, &grad, pools[li].as_deref());
            layer_grads[li] = g_params;
            grad = g_in;
        }

        if fresh {
            acc.clear();
            for (w, b) in layer_grads.into_iter().flatten() {
                acc.extend(w);
                acc.extend(b);
            }
        } else {
            let mut i = 0;
            for (w, b) in layer_grads.into_iter().flatten() {
                for v in w.into_iter().chain(b) {
                    acc[i] += v;
                    i += 1;
                }
            }
        }
        Ok(loss)
    }
}

impl PatchClassifier for ConvNetModel {
    fn score(&self, patch: &RectifiedPatch) -> Result<f64> {
        Ok(self.forward(patch)?.0)
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }
}

fn cross_entropy(p_fg: f64, p_bg: f64, label: PatchClass) -> f64 {
    let p = match label {
        PatchClass::Foreground => p_fg,
        PatchClass::Background => p_bg,
    };
    -p.max(1e-300).ln()
}

fn layer_forward(layer: &Layer, input: &[f64], shape: Shape) -> (Vec<f64>, Shape, Option<Vec<u32>>) {
    match layer {
        Layer::Conv {
            kernel,
            cin,
            cout,
            weights,
            bias,
        } => {
            let (h, w) = (shape.height, shape.width);
            let pad = (kernel / 2) as i64;
            let mut out = vec![0.0; cout * h * w];
            for co in 0..*cout {
                let plane = &mut out[co * h * w..(co + 1) * h * w];
                plane.fill(bias[co]);
                for ci in 0..*cin {
                    let src = &input[ci * h * w..(ci + 1) * h * w];
                    for ky in 0..*kernel {
                        let dy = ky as i64 - pad;
                        for kx in 0..*kernel {
                            let dx = kx as i64 - pad;
                            let wv = weights[((co * cin + ci) * kernel + ky) * kernel + kx];
                            let (x0, x1) = valid_range(w, dx);
                            let (y0, y1) = valid_range(h, dy);
                            for y in y0..y1 {
                                let sy = (y as i64 + dy) as usize;
                                let dst = &mut plane[y * w + x0..y * w + x1];
                                let s = &src[sy * w + (x0 as i64 + dx) as usize..sy * w + (x1 as i64 + dx) as usize];
                                for (d, v) in dst.iter_mut().zip(s) {
                                    *d += wv * v;
                                }
                            }
                        }
                    }
                }
            }
            (out, Shape::new(*cout, h, w), None)
        }
        Layer::Relu => (input.iter().map(|v| v.max(0.0)).collect(), shape, None),
        Layer::MaxPool { size } => {
            let (oh, ow) = (shape.height / size, shape.width / size);
            let mut out = Vec::with_capacity(shape.channels * oh * ow);
            let mut argmax = Vec::with_capacity(out.capacity());
            for c in 0..shape.channels {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = f64::NEG_INFINITY;
                        let mut best_i = 0;
                        for ky in 0..*size {
                            for kx in 0..*size {
                                let i = (c * shape.height + oy * size + ky) * shape.width + ox * size + kx;
                                if input[i] > best {
                                    best = input[i];
                                    best_i = i;
                                }
                            }
                        }
                        out.push(best);
                        argmax.push(best_i as u32);
                    }
                }
            }
            (out, Shape::new(shape.channels, oh, ow), Some(argmax))
        }
        Layer::Dense {
            input: n_in,
            output,
            weights,
            bias,
        } => {
            let out = (0..*output)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    bias[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            (out, Shape::new(*output, 1, 1), None)
        }
        Layer::Softmax => {
            let max = input.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = input.iter().map(|v| (v - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            (exps.into_iter().map(|e| e / sum).collect(), shape, None)
        }
    }
}

/// Output indices `[lo, hi)` whose source index `i + d` lies inside `[0, n)`.
#[inline]
fn valid_range(n: usize, d: i64) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (n as i64 - d).clamp(0, n as i64) as usize;
    (lo.min(hi), hi)
}

type ParamGrads = Option<(Vec<f64>, Vec<f64>)>;

fn layer_backward(
    layer: &Layer,
    input: &[f64],
    shape: Shape,
    grad_out: &[f64],
    argmax: Option<&[u32]>,
) -> (Vec<f64>, ParamGrads) {
    match layer {
        Layer::Conv {
            kernel,
            cin,
            cout,
            weights,
            ..
        } => {
            let (h, w) = (shape.height, shape.width);
            let pad = (kernel / 2) as i64;
            let mut g_in = vec![0.0; input.len()];
            let mut g_w = vec![0.0; weights.len()];
            let mut g_b = vec![0.0; *cout];
            for co in 0..*cout {
                let go = &grad_out[co * h * w..(co + 1) * h * w];
                g_b[co] = go.iter().sum();
                for ci in 0..*cin {
                    let src = &input[ci * h * w..(ci + 1) * h * w];
                    let gi = &mut g_in[ci * h * w..(ci + 1) * h * w];
                    for ky in 0..*kernel {
                        let dy = ky as i64 - pad;
                        for kx in 0..*kernel {
                            let dx = kx as i64 - pad;
                            let wi = ((co * cin + ci) * kernel + ky) * kernel + kx;
                            let wv = weights[wi];
                            let (x0, x1) = valid_range(w, dx);
                            let (y0, y1) = valid_range(h, dy);
                            let mut acc = 0.0;
                            for y in y0..y1 {
                                let sy = (y as i64 + dy) as usize;
                                let g = &go[y * w + x0..y * w + x1];
                                let lo = sy * w + (x0 as i64 + dx) as usize;
                                let hi = sy * w + (x1 as i64 + dx) as usize;
                                for ((gv, sv), gin) in g.iter().zip(&src[lo..hi]).zip(&mut gi[lo..hi]) {
                                    acc += gv * sv;
                                    *gin += wv * gv;
                                }
                            }
                            g_w[wi] = acc;
                        }
                    }
                }
            }
            (g_in, Some((g_w, g_b)))
        }
        Layer::Relu => (
            input
                .iter()
                .zip(grad_out)
                .map(|(x, g)| if *x > 0.0 { *g } else { 0.0 })
                .collect(),
            None,
        ),
        Layer::MaxPool { .. } => {
            let mut g_in = vec![0.0; input.len()];
            for (g, &i) in grad_out.iter().zip(argmax.expect("pool cache")) {
                g_in[i as usize] += g;
            }
            (g_in, None)
        }
        Layer::Dense {
            input: n_in,
            output,
            weights,
            ..
        } => {
            let mut g_in = vec![0.0; *n_in];
            let mut g_w = vec![0.0; weights.len()];
            for o in 0..*output {
                let g = grad_out[o];
                let row = &weights[o * n_in..(o + 1) * n_in];
                let g_row = &mut g_w[o * n_in..(o + 1) * n_in];
                for ((gw, x), (gi, wv)) in g_row.iter_mut().zip(input).zip(g_in.iter_mut().zip(row)) {
                    *gw = g * x;
                    *gi += g * wv;
                }
            }
            (g_in, Some((g_w, grad_out.to_vec())))
        }
        Layer::Softmax => unreachable!("softmax gradient is fused with the loss"),
    }
}

// ---------------------------------------------------------------------------
// Training

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub weight_decay: f64,
    pub momentum: f64,
    /// Fraction of the samples held out for validation.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 16,
            epochs: 12,
            weight_decay: 1e-4,
            momentum: 0.9,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidParameter("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidParameter("batch size and epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidParameter("validation fraction must be in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay < 0.0 {
            return Err(Error::InvalidParameter("momentum must be in [0, 1), weight decay >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
    pub train_samples: usize,
    pub validation_samples: usize,
}

/// Fraction of `samples` classified correctly.
pub fn accuracy<C: PatchClassifier + ?Sized>(classifier: &C, samples: &[(RectifiedPatch, PatchClass)]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for (patch, label) in samples {
        if classifier.classify(patch)? == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / samples.len() as f64)
}

/// Trains `model` in place. Deterministic for a given seed.
pub fn train_model(
    model: &mut ConvNetModel,
    samples: &[(RectifiedPatch, PatchClass)],
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    let has = |c| samples.iter().any(|(_, l)| *l == c);
    if !has(PatchClass::Foreground) || !has(PatchClass::Background) {
        return Err(Error::SingleClass);
    }
    for (p, _) in samples {
        model.check_patch(p)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let inputs: Vec<(Vec<f64>, PatchClass)> = samples.iter().map(|(p, l)| (normalize_patch(&p.data), *l)).collect();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = ((inputs.len() as f64) * config.validation_fraction).round() as usize;
    let n_val = n_val.min(inputs.len() - 1);
    let (val_idx, train_idx) = order.split_at(n_val);
    let (val_idx, mut train_idx) = (val_idx.to_vec(), train_idx.to_vec());

    let n_params = model.param_count();
    let mut velocity = vec![0.0; n_params];
    let mut grad = vec![0.0; n_params];
    let decay_mask = weight_decay_mask(model);
    let mut epochs = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (batch_no, batch) in train_idx.chunks(config.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let (x, label) = &inputs[i];
                let loss = model.accumulate_gradient(x, *label, &mut grad, false)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, batch: batch_no });
                }
                loss_sum += loss;
                // a sample is counted correct if the pre-update loss favored it
                if loss < std::f64::consts::LN_2 {
                    correct += 1;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            let mut idx = 0;
            for layer in &mut model.layers {
                let Some((w, b)) = layer.params_mut() else { continue };
                for p in w.iter_mut().chain(b.iter_mut()) {
                    let g = grad[idx] * scale + if decay_mask[idx] { config.weight_decay * *p } else { 0.0 };
                    velocity[idx] = config.momentum * velocity[idx] - config.learning_rate * g;
                    *p += velocity[idx];
                    idx += 1;
                }
            }
            if model.params().iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { epoch, batch: batch_no });
            }
        }
        let validation_accuracy = if val_idx.is_empty() {
            None
        } else {
            Some(raw_accuracy(model, &inputs, &val_idx)?)
        };
        epochs.push(EpochLog {
            epoch: epoch + 1,
            loss: loss_sum / train_idx.len() as f64,
            train_accuracy: correct as f64 / train_idx.len() as f64,
            validation_accuracy,
        });
    }
    let train_accuracy = raw_accuracy(model, &inputs, &train_idx)?;
    Ok(TrainReport {
        validation_accuracy: epochs.last().and_then(|e| e.validation_accuracy),
        epochs,
        train_accuracy,
        train_samples: train_idx.len(),
        validation_samples: val_idx.len(),
    })
}

/// Builds a reference-architecture model sized for the samples, initializes
/// it from `config.seed` and trains it.
pub fn train(samples: &[(RectifiedPatch, PatchClass)], config: &TrainConfig) -> Result<(ConvNetModel, TrainReport)> {
    let first = samples.first().ok_or(Error::SingleClass)?;
    let mut model = ConvNetModel::reference_architecture(first.0.rows, first.0.cols)?;
    model.initialize(config.seed);
    let report = train_model(&mut model, samples, config)?;
    Ok((model, report))
}

fn weight_decay_mask(model: &ConvNetModel) -> Vec<bool> {
    let mut mask = Vec::with_capacity(model.param_count());
    for (w, b) in model.layers.iter().filter_map(Layer::params) {
        mask.extend(std::iter::repeat(true).take(w.len()));
        mask.extend(std::iter::repeat(false).take(b.len()));
    }
    mask
}

fn raw_accuracy(model: &ConvNetModel, inputs: &[(Vec<f64>, PatchClass)], idx: &[usize]) -> Result<f64> {
    let mut correct = 0usize;
    for &i in idx {
        let (x, label) = &inputs[i];
        let (p_fg, _) = model.forward_raw(x)?;
        let predicted = if p_fg >= model.threshold {
            PatchClass::Foreground
        } else {
            PatchClass::Background
        };
        if predicted == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / idx.len().max(1) as f64)
}

// ---------------------------------------------------------------------------
// Gradient checking

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central finite differences of the loss for the given parameter indices.
pub fn numeric_gradient(
    model: &ConvNetModel,
    input: &[f64],
    label: PatchClass,
    indices: &[usize],
    h: f64,
) -> Result<Vec<f64>> {
    let mut probe = model.clone();
    indices
        .iter()
        .map(|&i| {
            let orig = *probe.param_mut(i);
            *probe.param_mut(i) = orig + h;
            let plus = probe.loss(input, label)?;
            *probe.param_mut(i) = orig - h;
            let minus = probe.loss(input, label)?;
            *probe.param_mut(i) = orig;
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

/// `count` distinct parameter indices (all of them if the model has fewer).
pub fn sample_param_indices(model: &ConvNetModel, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<usize> = (0..model.param_count()).collect();
    all.shuffle(&mut rng);
    all.truncate(count);
    all.sort_unstable();
    all
}

/// Largest relative error between `analytic` (full gradient) and numeric
/// derivatives at `indices`.
pub fn max_relative_error(analytic: &[f64], indices: &[usize], numeric: &[f64]) -> f64 {
    indices
        .iter()
        .zip(numeric)
        .map(|(&i, &n)| relative_error(analytic[i], n))
        .fold(0.0, f64::max)
}

/// Compares backprop against central differences (`h = 1e-5`) on `count`
/// randomly chosen parameters; returns the maximum relative error.
pub fn gradient_check(model: &ConvNetModel, input: &[f64], label: PatchClass, count: usize, seed: u64) -> Result<f64> {
    let (_, analytic) = model.loss_and_gradient(input, label)?;
    let indices = sample_param_indices(model, count, seed);
    let numeric = numeric_gradient(model, input, label, &indices, 1e-5)?;
    Ok(max_relative_error(&analytic, &indices, &numeric))
}

/// Index range of each parameterized layer's weights within the flat vector.
pub fn param_layout(model: &ConvNetModel) -> Vec<(usize, std::ops::Range<usize>, std::ops::Range<usize>)> {
    let mut out = Vec::new();
    let mut offset = 0;
    for (li, layer) in model.layers.iter().enumerate() {
        if let Some((w, b)) = layer.params() {
            out.push((li, offset..offset + w.len(), offset + w.len()..offset + w.len() + b.len()));
            offset += w.len() + b.len();
        }
    }
    out
}
