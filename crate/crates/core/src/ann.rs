//! Minimal analog network: dense / conv / average-pool layers with zero
//! biases, ReLU nonlinearity with optional logarithmic approximation of the
//! activations, excess-loss regularization, and plain SGD.
//!
//! The approximation is a step function, so its true derivative is zero
//! almost everywhere; the backward pass instead passes gradients straight
//! through below the saturation boundary and blocks them at or above it.

use crate::coding::{la_derivative, ExponentRange, LaVariant};
use crate::data::Dataset;
use crate::error::{Error, Result};
use ndarray::{Array2, ArrayD, Ix2, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Structural description of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Dense {
        in_dim: usize,
        out_dim: usize,
    },
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        in_h: usize,
        in_w: usize,
    },
    AvgPool {
        channels: usize,
        pool: usize,
        in_h: usize,
        in_w: usize,
    },
}

impl LayerKind {
    /// Expected input shape, without the batch axis.
    pub fn in_shape(&self) -> Vec<usize> {
        match *self {
            LayerKind::Dense { in_dim, .. } => vec![in_dim],
            LayerKind::Conv2d { in_ch, in_h, in_w, .. } => vec![in_ch, in_h, in_w],
            LayerKind::AvgPool { channels, in_h, in_w, .. } => vec![channels, in_h, in_w],
        }
    }

    /// Output shape, without the batch axis.
    pub fn out_shape(&self) -> Vec<usize> {
        match *self {
            LayerKind::Dense { out_dim, .. } => vec![out_dim],
            LayerKind::Conv2d {
                out_ch,
                kernel,
                stride,
                padding,
                in_h,
                in_w,
                ..
            } => {
                let oh = (in_h + 2 * padding - kernel) / stride + 1;
                let ow = (in_w + 2 * padding - kernel) / stride + 1;
                vec![out_ch, oh, ow]
            }
            LayerKind::AvgPool {
                channels,
                pool,
                in_h,
                in_w,
            } => vec![channels, in_h / pool, in_w / pool],
        }
    }

    pub fn in_len(&self) -> usize {
        self.in_shape().iter().product()
    }

    pub fn out_len(&self) -> usize {
        self.out_shape().iter().product()
    }

    /// Shape of the weight tensor; `None` for weightless layers.
    pub fn weight_shape(&self) -> Option<Vec<usize>> {
        match *self {
            LayerKind::Dense { in_dim, out_dim } => Some(vec![out_dim, in_dim]),
            LayerKind::Conv2d {
                in_ch,
                out_ch,
                kernel,
                ..
            } => Some(vec![out_ch, in_ch, kernel, kernel]),
            LayerKind::AvgPool { .. } => None,
        }
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            LayerKind::Dense { in_dim, .. } => in_dim,
            LayerKind::Conv2d { in_ch, kernel, .. } => in_ch * kernel * kernel,
            LayerKind::AvgPool { pool, .. } => pool * pool,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            LayerKind::Dense { in_dim, out_dim } => {
                if in_dim == 0 || out_dim == 0 {
                    return Err(Error::Config("dense layer with zero dimension".into()));
                }
            }
            LayerKind::Conv2d {
                in_ch,
                out_ch,
                kernel,
                stride,
                padding,
                in_h,
                in_w,
            } => {
                if in_ch == 0 || out_ch == 0 || kernel == 0 || stride == 0 {
                    return Err(Error::Config("conv layer with zero dimension".into()));
                }
                if in_h + 2 * padding < kernel || in_w + 2 * padding < kernel {
                    return Err(Error::Config(format!(
                        "conv kernel {kernel} larger than padded input {in_h}x{in_w}"
                    )));
                }
            }
            LayerKind::AvgPool {
                channels,
                pool,
                in_h,
                in_w,
            } => {
                if channels == 0 || pool == 0 {
                    return Err(Error::Config("pool layer with zero dimension".into()));
                }
                if in_h % pool != 0 || in_w % pool != 0 {
                    return Err(Error::Config(format!(
                        "pool {pool} does not divide input {in_h}x{in_w}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One network layer: structure, weights (empty for pools; biases do not
/// exist), and the exponent range and approximation variant of its output.
#[derive(Debug, Clone)]
pub struct AnnLayer {
    pub kind: LayerKind,
    pub weights: ArrayD<f64>,
    pub output_range: ExponentRange,
    pub variant: LaVariant,
}

/// Whether the forward pass quantizes activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivationMode {
    /// Plain ReLU activations.
    Relu,
    /// ReLU followed by the per-layer logarithmic approximation; the
    /// network input is approximated too, and negative output-layer
    /// pre-activations pass through unchanged.
    ReluLa,
}

/// A zero-bias feed-forward network.
#[derive(Debug, Clone)]
pub struct AnalogNetwork {
    pub layers: Vec<AnnLayer>,
    pub input_range: ExponentRange,
    pub input_variant: LaVariant,
    pub mode: ActivationMode,
}

impl AnalogNetwork {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            layer.kind.validate()?;
            match layer.kind.weight_shape() {
                Some(shape) => {
                    if layer.weights.shape() != shape.as_slice() {
                        return Err(Error::Config(format!(
                            "layer {l}: weight shape {:?} does not match {:?}",
                            layer.weights.shape(),
                            shape
                        )));
                    }
                }
                None => {
                    if !layer.weights.is_empty() {
                        return Err(Error::Config(format!(
                            "layer {l}: pooling layers carry no weights"
                        )));
                    }
                }
            }
            if l + 1 < self.layers.len() {
                let out = layer.kind.out_len();
                let next_in = self.layers[l + 1].kind.in_len();
                if out != next_in {
                    return Err(Error::Config(format!(
                        "layer {l} outputs {out} values but layer {} expects {next_in}",
                        l + 1
                    )));
                }
            }
        }
        // The single-power approximation is a hidden-layer option only.
        if let Some(last) = self.layers.last() {
            if last.variant != LaVariant::MultiPower {
                return Err(Error::Config(
                    "output layer must use the multi-power approximation".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.kind.out_len()).unwrap_or(0)
    }
}

/// Seeded He-style uniform initialization in [-sqrt(6/fan_in), +sqrt(6/fan_in)].
pub fn init_weights(kinds: &[(LayerKind, ExponentRange, LaVariant)], seed: u64) -> Vec<AnnLayer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    kinds
        .iter()
        .map(|&(kind, output_range, variant)| {
            let weights = match kind.weight_shape() {
                Some(shape) => {
                    let bound = (6.0 / kind.fan_in() as f64).sqrt();
                    let values: Vec<f64> = (0..shape.iter().product::<usize>())
                        .map(|_| rng.gen_range(-bound..bound))
                        .collect();
                    ArrayD::from_shape_vec(IxDyn(&shape), values).expect("shape")
                }
                None => ArrayD::zeros(IxDyn(&[0])),
            };
            AnnLayer {
                kind,
                weights,
                output_range,
                variant,
            }
        })
        .collect()
}

/// Cached tensors from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// The network input after input approximation (identity in ReLU mode).
    pub input: ArrayD<f64>,
    /// Per-layer pre-activations `W . input`.
    pub pres: Vec<ArrayD<f64>>,
    /// Per-layer activations. Hidden: ReLU (approximated in ReluLa mode).
    /// Output: pre-activation with nonnegative entries approximated in
    /// ReluLa mode; negative entries unchanged.
    pub acts: Vec<ArrayD<f64>>,
}

impl ForwardPass {
    pub fn logits(&self) -> &ArrayD<f64> {
        self.acts.last().expect("nonempty network")
    }

    /// The value the spiking network's layer `l` decodes to under exact
    /// conversion: the approximation of the clamped pre-activation.
    pub fn spike_comparable(&self, net: &AnalogNetwork, l: usize) -> Result<ArrayD<f64>> {
        let layer = &net.layers[l];
        let mut out = self.pres[l].clone();
        for v in out.iter_mut() {
            *v = layer.variant.apply(v.max(0.0), layer.output_range)?;
        }
        Ok(out)
    }
}

fn apply_la(values: &mut ArrayD<f64>, range: ExponentRange, variant: LaVariant) -> Result<()> {
    for v in values.iter_mut() {
        *v = variant.apply(*v, range)?;
    }
    Ok(())
}

fn as2(a: &ArrayD<f64>) -> Array2<f64> {
    a.view()
        .into_dimensionality::<Ix2>()
        .expect("2-d tensor")
        .to_owned()
}

/// Reshape a batch tensor to the layer's expected input shape (e.g. flatten
/// feature maps ahead of a dense layer).
fn conform(x: &ArrayD<f64>, kind: &LayerKind) -> Result<ArrayD<f64>> {
    let batch = x.shape()[0];
    let want = kind.in_shape();
    if x.shape()[1..] == want[..] {
        return Ok(x.clone());
    }
    let have: usize = x.shape()[1..].iter().product();
    if have != kind.in_len() {
        return Err(Error::Shape(format!(
            "layer expects {:?} per example, got {:?}",
            want,
            &x.shape()[1..]
        )));
    }
    let mut shape = vec![batch];
    shape.extend_from_slice(&want);
    Ok(x
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order(IxDyn(&shape))
        .expect("checked length"))
}

fn layer_forward(layer: &AnnLayer, x: &ArrayD<f64>) -> Result<ArrayD<f64>> {
    let x = conform(x, &layer.kind)?;
    let batch = x.shape()[0];
    match layer.kind {
        LayerKind::Dense { .. } => {
            let w = as2(&layer.weights);
            let x2 = as2(&x);
            Ok(x2.dot(&w.t()).into_dyn())
        }
        LayerKind::Conv2d {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
            in_h,
            in_w,
        } => {
            let out_shape = layer.kind.out_shape();
            let (oh, ow) = (out_shape[1], out_shape[2]);
            let xs = x
                .into_shape_with_order((batch, in_ch, in_h, in_w))
                .expect("conv input");
            let w = layer
                .weights
                .view()
                .into_shape_with_order((out_ch, in_ch, kernel, kernel))
                .expect("conv weights");
            let mut out = ndarray::Array4::<f64>::zeros((batch, out_ch, oh, ow));
            for b in 0..batch {
                for oc in 0..out_ch {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = 0.0;
                            for ic in 0..in_ch {
                                for ky in 0..kernel {
                                    let iy = (oy * stride + ky) as isize - padding as isize;
                                    if iy < 0 || iy >= in_h as isize {
                                        continue;
                                    }
                                    for kx in 0..kernel {
                                        let ix = (ox * stride + kx) as isize - padding as isize;
                                        if ix < 0 || ix >= in_w as isize {
                                            continue;
                                        }
                                        acc += w[(oc, ic, ky, kx)]
                                            * xs[(b, ic, iy as usize, ix as usize)];
                                    }
                                }
                            }
                            out[(b, oc, oy, ox)] = acc;
                        }
                    }
                }
            }
            Ok(out.into_dyn())
        }
        LayerKind::AvgPool {
            channels,
            pool,
            in_h,
            in_w,
        } => {
            let (oh, ow) = (in_h / pool, in_w / pool);
            let xs = x
                .into_shape_with_order((batch, channels, in_h, in_w))
                .expect("pool input");
            let area = (pool * pool) as f64;
            let mut out = ndarray::Array4::<f64>::zeros((batch, channels, oh, ow));
            for b in 0..batch {
                for c in 0..channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let mut acc = 0.0;
                            for dy in 0..pool {
                                for dx in 0..pool {
                                    acc += xs[(b, c, oy * pool + dy, ox * pool + dx)];
                                }
                            }
                            out[(b, c, oy, ox)] = acc / area;
                        }
                    }
                }
            }
            Ok(out.into_dyn())
        }
    }
}

/// Full forward pass over a batch (example axis first).
pub fn forward(net: &AnalogNetwork, x: &ArrayD<f64>) -> Result<ForwardPass> {
    let mut input = x.clone();
    if net.mode == ActivationMode::ReluLa {
        apply_la(&mut input, net.input_range, net.input_variant)?;
    }
    let num_layers = net.layers.len();
    let mut pres = Vec::with_capacity(num_layers);
    let mut acts = Vec::with_capacity(num_layers);
    let mut cur = input.clone();
    for (l, layer) in net.layers.iter().enumerate() {
        let pre = layer_forward(layer, &cur)?;
        let last = l + 1 == num_layers;
        let mut act = pre.clone();
        match (net.mode, last) {
            (ActivationMode::Relu, false) => act.mapv_inplace(|v| v.max(0.0)),
            (ActivationMode::Relu, true) => {}
            (ActivationMode::ReluLa, false) => {
                act.mapv_inplace(|v| v.max(0.0));
                apply_la(&mut act, layer.output_range, layer.variant)?;
            }
            (ActivationMode::ReluLa, true) => {
                for v in act.iter_mut() {
                    if *v >= 0.0 {
                        *v = layer.variant.apply(*v, layer.output_range)?;
                    }
                }
            }
        }
        pres.push(pre);
        cur = act.clone();
        acts.push(act);
    }
    Ok(ForwardPass { input, pres, acts })
}

/// Excess loss: sum over examples, layers, and units of
/// `max(a - (2^(e_max+1) - 2^e_min), 0)^2 / 2`, where `a` is the raw
/// (pre-approximation) activation and the cap comes from that layer's
/// output range.
pub fn excess_loss(pres: &[ArrayD<f64>], ranges: &[ExponentRange]) -> f64 {
    let mut total = 0.0;
    for (pre, range) in pres.iter().zip(ranges) {
        let cap = range.max_value();
        for &v in pre.iter() {
            let over = (v - cap).max(0.0);
            total += over * over;
        }
    }
    total / 2.0
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean softmax cross-entropy over a batch.
pub fn cross_entropy(logits: &ArrayD<f64>, labels: &[u8]) -> f64 {
    let logits = as2(logits);
    let probs = softmax_rows(&logits);
    let n = labels.len();
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        total -= probs[(i, label as usize)].max(1e-300).ln();
    }
    total / n as f64
}

/// Task loss plus `lambda` times the excess loss for one batch.
pub fn total_loss(net: &AnalogNetwork, x: &ArrayD<f64>, labels: &[u8], lambda: f64) -> Result<f64> {
    let pass = forward(net, x)?;
    let ranges: Vec<ExponentRange> = net.layers.iter().map(|l| l.output_range).collect();
    Ok(cross_entropy(pass.logits(), labels) + lambda * excess_loss(&pass.pres, &ranges))
}

/// Per-layer weight gradients (empty tensors for pools).
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<ArrayD<f64>>,
}

fn layer_backward(
    layer: &AnnLayer,
    input: &ArrayD<f64>,
    d_pre: &ArrayD<f64>,
) -> Result<(ArrayD<f64>, ArrayD<f64>)> {
    let x = conform(input, &layer.kind)?;
    let batch = x.shape()[0];
    match layer.kind {
        LayerKind::Dense { .. } => {
            let w = as2(&layer.weights);
            let x2 = as2(&x);
            let d2 = as2(d_pre);
            let d_w = d2.t().dot(&x2);
            let d_x = d2.dot(&w);
            Ok((d_w.into_dyn(), d_x.into_dyn()))
        }
        LayerKind::Conv2d {
            in_ch,
            out_ch,
            kernel,
            stride,
            padding,
            in_h,
            in_w,
        } => {
            let out_shape = layer.kind.out_shape();
            let (oh, ow) = (out_shape[1], out_shape[2]);
            let xs = x
                .into_shape_with_order((batch, in_ch, in_h, in_w))
                .expect("conv input");
            let w = layer
                .weights
                .view()
                .into_shape_with_order((out_ch, in_ch, kernel, kernel))
                .expect("conv weights");
            let d = d_pre
                .view()
                .into_shape_with_order((batch, out_ch, oh, ow))
                .expect("conv grad");
            let mut d_w = ndarray::Array4::<f64>::zeros((out_ch, in_ch, kernel, kernel));
            let mut d_x = ndarray::Array4::<f64>::zeros((batch, in_ch, in_h, in_w));
            for b in 0..batch {
                for oc in 0..out_ch {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let g = d[(b, oc, oy, ox)];
                            if g == 0.0 {
                                continue;
                            }
                            for ic in 0..in_ch {
                                for ky in 0..kernel {
                                    let iy = (oy * stride + ky) as isize - padding as isize;
                                    if iy < 0 || iy >= in_h as isize {
                                        continue;
                                    }
                                    for kx in 0..kernel {
                                        let ix = (ox * stride + kx) as isize - padding as isize;
                                        if ix < 0 || ix >= in_w as isize {
                                            continue;
                                        }
                                        d_w[(oc, ic, ky, kx)] +=
                                            g * xs[(b, ic, iy as usize, ix as usize)];
                                        d_x[(b, ic, iy as usize, ix as usize)] +=
                                            g * w[(oc, ic, ky, kx)];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Ok((d_w.into_dyn(), d_x.into_dyn()))
        }
        LayerKind::AvgPool {
            channels,
            pool,
            in_h,
            in_w,
        } => {
            let (oh, ow) = (in_h / pool, in_w / pool);
            let d = d_pre
                .view()
                .into_shape_with_order((batch, channels, oh, ow))
                .expect("pool grad");
            let area = (pool * pool) as f64;
            let mut d_x = ndarray::Array4::<f64>::zeros((batch, channels, in_h, in_w));
            for b in 0..batch {
                for c in 0..channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let g = d[(b, c, oy, ox)] / area;
                            for dy in 0..pool {
                                for dx in 0..pool {
                                    d_x[(b, c, oy * pool + dy, ox * pool + dx)] += g;
                                }
                            }
                        }
                    }
                }
            }
            Ok((ArrayD::zeros(IxDyn(&[0])), d_x.into_dyn()))
        }
    }
}

/// Gradient factor of the activation node at layer `l`, evaluated
/// elementwise on the pre-activation. In ReluLa mode the approximation
/// contributes the straight-through factor from [`la_derivative`].
fn activation_factor(
    mode: ActivationMode,
    last: bool,
    pre: f64,
    range: ExponentRange,
) -> f64 {
    match (mode, last) {
        (ActivationMode::Relu, false) => {
            if pre > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        (ActivationMode::Relu, true) => 1.0,
        (ActivationMode::ReluLa, false) => {
            if pre > 0.0 {
                la_derivative(pre, range).expect("nonnegative")
            } else {
                0.0
            }
        }
        (ActivationMode::ReluLa, true) => {
            if pre >= 0.0 {
                la_derivative(pre, range).expect("nonnegative")
            } else {
                1.0
            }
        }
    }
}

/// What the backward pass differentiates.
#[derive(Debug, Clone, Copy)]
pub struct LossSpec {
    /// Include the mean softmax cross-entropy term.
    pub task: bool,
    /// Strength of the excess loss (its gradient enters at each layer's
    /// pre-activation).
    pub lambda: f64,
}

impl LossSpec {
    pub fn training(lambda: f64) -> Self {
        LossSpec { task: true, lambda }
    }

    pub fn excess_only(lambda: f64) -> Self {
        LossSpec { task: false, lambda }
    }
}

/// Backward pass for one batch. `pass` must come from [`forward`] on the
/// same inputs.
pub fn backward(
    net: &AnalogNetwork,
    pass: &ForwardPass,
    labels: &[u8],
    spec: LossSpec,
) -> Result<Gradients> {
    let num_layers = net.layers.len();
    let n = labels.len();
    let logits = as2(pass.logits());

    let mut d_act: ArrayD<f64> = if spec.task {
        let mut d = softmax_rows(&logits);
        for (i, &label) in labels.iter().enumerate() {
            d[(i, label as usize)] -= 1.0;
        }
        d.mapv_inplace(|v| v / n as f64);
        d.into_dyn()
    } else {
        ArrayD::zeros(pass.logits().raw_dim())
    };

    let mut grads = vec![ArrayD::zeros(IxDyn(&[0])); num_layers];
    for l in (0..num_layers).rev() {
        let layer = &net.layers[l];
        let last = l + 1 == num_layers;
        let pre = &pass.pres[l];
        let cap = layer.output_range.max_value();

        let mut d_pre = d_act
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order(pre.raw_dim())
            .expect("activation gradient shape");
        ndarray::Zip::from(&mut d_pre).and(pre).for_each(|g, &p| {
            *g *= activation_factor(net.mode, last, p, layer.output_range);
            // The excess term is summed (not averaged) over the batch, and
            // its cap-kink subgradient is taken as zero.
            if spec.lambda != 0.0 && p > cap {
                *g += spec.lambda * (p - cap);
            }
        });

        let input = if l == 0 { &pass.input } else { &pass.acts[l - 1] };
        let (d_w, d_x) = layer_backward(layer, input, &d_pre)?;
        grads[l] = d_w;
        d_act = d_x;
    }
    Ok(Gradients { weights: grads })
}

/// Hyperparameters for [`train`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda_excess: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 20,
            batch_size: 32,
            lambda_excess: 0.1,
            momentum: 0.9,
            seed: 42,
        }
    }
}

/// Accuracy and loss trace for one epoch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

/// Fraction of examples whose arg-max output (lowest index wins ties)
/// matches the label.
pub fn accuracy(net: &AnalogNetwork, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for start in (0..data.len()).step_by(512) {
        let idx: Vec<usize> = (start..(start + 512).min(data.len())).collect();
        let batch = data.select(&idx);
        let pass = forward(net, &batch.images)?;
        let logits = as2(pass.logits());
        for (i, &label) in batch.labels.iter().enumerate() {
            if argmax_lowest(logits.row(i).as_slice().expect("contiguous")) == label as usize {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Index of the maximum, ties broken toward the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Minibatch SGD with optional momentum. Deterministic for a given seed.
pub fn train(
    net: &mut AnalogNetwork,
    train_data: &Dataset,
    val_data: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<Vec<EpochMetrics>> {
    if train_data.is_empty() {
        return Err(Error::Contract("training dataset is empty".into()));
    }
    net.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity: Vec<ArrayD<f64>> = net
        .layers
        .iter()
        .map(|l| ArrayD::zeros(l.weights.raw_dim()))
        .collect();
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let spec = LossSpec::training(cfg.lambda_excess);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_data.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let batch = train_data.select(chunk);
            let pass = forward(net, &batch.images)?;
            let ranges: Vec<ExponentRange> = net.layers.iter().map(|l| l.output_range).collect();
            let loss = cross_entropy(pass.logits(), &batch.labels)
                + cfg.lambda_excess * excess_loss(&pass.pres, &ranges);
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_idx,
                });
            }
            epoch_loss += loss;
            batches += 1;
            let grads = backward(net, &pass, &batch.labels, spec)?;
            for (l, grad) in grads.weights.iter().enumerate() {
                if grad.is_empty() {
                    continue;
                }
                let v = &mut velocity[l];
                v.zip_mut_with(grad, |v, &g| *v = cfg.momentum * *v + g);
                net.layers[l]
                    .weights
                    .zip_mut_with(v, |w, &v| *w -= cfg.learning_rate * v);
            }
        }
        let train_accuracy = accuracy(net, train_data)?;
        let val_accuracy = match val_data {
            Some(v) => Some(accuracy(net, v)?),
            None => None,
        };
        metrics.push(EpochMetrics {
            epoch,
            train_loss: epoch_loss / batches.max(1) as f64,
            train_accuracy,
            val_accuracy,
        });
    }
    Ok(metrics)
}

use rand::seq::SliceRandom;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::multi_power_la;
    use crate::data::gaussian_blobs;

    fn r(e_min: i32, e_max: i32) -> ExponentRange {
        ExponentRange::new(e_min, e_max).unwrap()
    }

    fn dense_net(widths: &[usize], mode: ActivationMode, seed: u64) -> AnalogNetwork {
        let hidden_range = r(-3, 0);
        let output_range = r(-3, 4);
        let mut kinds = Vec::new();
        for i in 0..widths.len() - 1 {
            let range = if i + 2 == widths.len() {
                output_range
            } else {
                hidden_range
            };
            kinds.push((
                LayerKind::Dense {
                    in_dim: widths[i],
                    out_dim: widths[i + 1],
                },
                range,
                LaVariant::MultiPower,
            ));
        }
        AnalogNetwork {
            layers: init_weights(&kinds, seed),
            input_range: r(-7, 0),
            input_variant: LaVariant::MultiPower,
            mode,
        }
    }

    fn single_unit_net(w: f64, mode: ActivationMode) -> AnalogNetwork {
        AnalogNetwork {
            layers: vec![
                AnnLayer {
                    kind: LayerKind::Dense { in_dim: 1, out_dim: 1 },
                    weights: ArrayD::from_shape_vec(IxDyn(&[1, 1]), vec![w]).unwrap(),
                    output_range: r(-2, 2),
                    variant: LaVariant::MultiPower,
                },
                AnnLayer {
                    kind: LayerKind::Dense { in_dim: 1, out_dim: 1 },
                    weights: ArrayD::from_shape_vec(IxDyn(&[1, 1]), vec![1.0]).unwrap(),
                    output_range: r(-2, 2),
                    variant: LaVariant::MultiPower,
                },
            ],
            input_range: r(-4, 3),
            input_variant: LaVariant::MultiPower,
            mode,
        }
    }

    fn batch1(x: f64) -> ArrayD<f64> {
        ArrayD::from_shape_vec(IxDyn(&[1, 1]), vec![x]).unwrap()
    }

    #[test]
    fn forward_applies_la_on_hidden_layer() {
        let net = single_unit_net(1.0, ActivationMode::ReluLa);
        let pass = forward(&net, &batch1(5.3)).unwrap();
        // Input range {-4..3} keeps 5.3 -> 5.25; hidden range {-2..2} keeps it.
        assert_eq!(pass.acts[0][[0, 0]], 5.25);
        let relu_net = single_unit_net(1.0, ActivationMode::Relu);
        let pass = forward(&relu_net, &batch1(5.3)).unwrap();
        assert_eq!(pass.acts[0][[0, 0]], 5.3);
    }

    #[test]
    fn forward_clamps_negative_hidden() {
        let net = single_unit_net(-1.0, ActivationMode::ReluLa);
        let pass = forward(&net, &batch1(5.3)).unwrap();
        assert_eq!(pass.acts[0][[0, 0]], 0.0);
    }

    #[test]
    fn output_layer_keeps_negative_preactivations() {
        let mut net = single_unit_net(1.0, ActivationMode::ReluLa);
        net.layers[1].weights[[0, 0]] = -1.0;
        let pass = forward(&net, &batch1(5.3)).unwrap();
        assert_eq!(pass.acts[1][[0, 0]], -5.25);
    }

    #[test]
    fn excess_loss_examples() {
        let range = r(-2, 2);
        let pre = |v: f64| ArrayD::from_shape_vec(IxDyn(&[1, 1]), vec![v]).unwrap();
        assert_eq!(excess_loss(&[pre(7.75)], &[range]), 0.0);
        assert_eq!(excess_loss(&[pre(8.75)], &[range]), 0.5);
        assert_eq!(excess_loss(&[pre(1.0)], &[range]), 0.0);
    }

    #[test]
    fn total_loss_uniform_logits() {
        // Two equal logits and label 0: cross-entropy is ln 2.
        let mut net = single_unit_net(0.0, ActivationMode::Relu);
        net.layers[1].weights[[0, 0]] = 0.0;
        net.layers[1].kind = LayerKind::Dense { in_dim: 1, out_dim: 2 };
        net.layers[1].weights = ArrayD::zeros(IxDyn(&[2, 1]));
        let loss = total_loss(&net, &batch1(1.0), &[0], 0.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn forward_equivalence_relu_then_la() {
        // ReluLa forward equals Relu forward with the approximation applied
        // layer by layer, for a single-unit chain where the composed values
        // stay inside each range.
        let la_net = single_unit_net(1.0, ActivationMode::ReluLa);
        let relu_net = single_unit_net(1.0, ActivationMode::Relu);
        for &x in &[0.0, 0.3, 1.7, 5.3, 40.0] {
            let a = forward(&la_net, &batch1(x)).unwrap();
            // Manually fold the approximation through the plain forward.
            let x_la = multi_power_la(x, la_net.input_range).unwrap();
            let h = multi_power_la(
                (relu_net.layers[0].weights[[0, 0]] * x_la).max(0.0),
                la_net.layers[0].output_range,
            )
            .unwrap();
            let o = relu_net.layers[1].weights[[0, 0]] * h;
            let o = if o >= 0.0 {
                multi_power_la(o, la_net.layers[1].output_range).unwrap()
            } else {
                o
            };
            assert_eq!(a.acts[1][[0, 0]], o, "x = {x}");
        }
    }

    #[test]
    fn gradients_match_finite_differences_relu() {
        let mut net = dense_net(&[6, 5, 4], ActivationMode::Relu, 11);
        let data = gaussian_blobs(4, 8, 6, 0.15, 5);
        let x = data.images.clone();
        let labels = data.labels.clone();
        check_gradients(&mut net, &x, &labels, LossSpec::training(0.0), 1e-5);
    }

    #[test]
    fn gradients_match_finite_differences_conv_pool() {
        let kinds = [
            (
                LayerKind::Conv2d {
                    in_ch: 1,
                    out_ch: 2,
                    kernel: 3,
                    stride: 1,
                    padding: 1,
                    in_h: 6,
                    in_w: 6,
                },
                r(-3, 0),
                LaVariant::MultiPower,
            ),
            (
                LayerKind::AvgPool {
                    channels: 2,
                    pool: 2,
                    in_h: 6,
                    in_w: 6,
                },
                r(-3, 0),
                LaVariant::MultiPower,
            ),
            (
                LayerKind::Dense { in_dim: 18, out_dim: 3 },
                r(-3, 4),
                LaVariant::MultiPower,
            ),
        ];
        let mut net = AnalogNetwork {
            layers: init_weights(&kinds, 21),
            input_range: r(-7, 0),
            input_variant: LaVariant::MultiPower,
            mode: ActivationMode::Relu,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = ArrayD::from_shape_vec(
            IxDyn(&[3, 1, 6, 6]),
            (0..3 * 36).map(|_| rng.gen_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let labels = vec![0, 1, 2];
        check_gradients(&mut net, &x, &labels, LossSpec::training(0.0), 1e-5);
    }

    #[test]
    fn excess_gradient_matches_finite_differences() {
        let mut net = dense_net(&[4, 3, 3], ActivationMode::Relu, 31);
        // Scale weights up so several pre-activations clear the caps.
        for layer in &mut net.layers {
            layer.weights.mapv_inplace(|w| w * 6.0);
        }
        let data = gaussian_blobs(3, 4, 4, 0.1, 6);
        let x = data.images.clone();
        let labels = data.labels.clone();
        check_gradients(&mut net, &x, &labels, LossSpec::excess_only(0.1), 1e-5);
    }

    /// Central-difference check of `backward` against the matching loss.
    fn check_gradients(
        net: &mut AnalogNetwork,
        x: &ArrayD<f64>,
        labels: &[u8],
        spec: LossSpec,
        tol: f64,
    ) {
        let loss_of = |net: &AnalogNetwork| -> f64 {
            let pass = forward(net, x).unwrap();
            let ranges: Vec<ExponentRange> = net.layers.iter().map(|l| l.output_range).collect();
            let task = if spec.task {
                cross_entropy(pass.logits(), labels)
            } else {
                0.0
            };
            task + spec.lambda * excess_loss(&pass.pres, &ranges)
        };
        let pass = forward(net, x).unwrap();
        let grads = backward(net, &pass, labels, spec).unwrap();
        let h = 1e-6;
        for l in 0..net.layers.len() {
            if grads.weights[l].is_empty() {
                continue;
            }
            let len = net.layers[l].weights.len();
            let stride = (len / 25).max(1);
            for k in (0..len).step_by(stride) {
                let orig = net.layers[l].weights.as_slice().unwrap()[k];
                net.layers[l].weights.as_slice_mut().unwrap()[k] = orig + h;
                let up = loss_of(net);
                net.layers[l].weights.as_slice_mut().unwrap()[k] = orig - h;
                let down = loss_of(net);
                net.layers[l].weights.as_slice_mut().unwrap()[k] = orig;
                let fd = (up - down) / (2.0 * h);
                let an = grads.weights[l].as_slice().unwrap()[k];
                let denom = an.abs().max(fd.abs()).max(1e-4);
                assert!(
                    ((an - fd) / denom).abs() <= tol,
                    "layer {l} weight {k}: analytic {an}, finite-difference {fd}"
                );
            }
        }
    }

    #[test]
    fn surrogate_factor_matches_derivative_pointwise() {
        let range = r(-2, 2);
        let sat = range.saturation();
        let cap = range.max_value();
        let eps = 1e-9;
        for (a, want) in [
            (0.0, 1.0),
            (cap - eps, 1.0),
            (sat, 0.0),
            (sat + eps, 0.0),
        ] {
            let hidden = activation_factor(ActivationMode::ReluLa, false, a.max(1e-12), range);
            assert_eq!(hidden, la_derivative(a.max(1e-12), range).unwrap());
            let output = activation_factor(ActivationMode::ReluLa, true, a, range);
            assert_eq!(output, la_derivative(a, range).unwrap());
            assert_eq!(output, want);
        }
        // Negative output pre-activations pass gradients unchanged.
        assert_eq!(activation_factor(ActivationMode::ReluLa, true, -3.0, range), 1.0);
    }

    #[test]
    fn training_separable_blobs_reaches_high_accuracy() {
        let data = gaussian_blobs(2, 60, 4, 0.08, 17);
        let mut net = dense_net(&[4, 8, 2], ActivationMode::Relu, 3);
        let cfg = TrainConfig {
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 16,
            lambda_excess: 0.0,
            momentum: 0.9,
            seed: 5,
        };
        let metrics = train(&mut net, &data, None, &cfg).unwrap();
        let final_acc = metrics.last().unwrap().train_accuracy;
        assert!(final_acc >= 0.99, "accuracy {final_acc}");

        // The approximated variant stays within two points of plain ReLU.
        let mut la_net = dense_net(&[4, 8, 2], ActivationMode::ReluLa, 3);
        let la_metrics = train(&mut la_net, &data, None, &cfg).unwrap();
        let la_acc = la_metrics.last().unwrap().train_accuracy;
        assert!(la_acc >= final_acc - 0.02, "la accuracy {la_acc} vs {final_acc}");
    }

    #[test]
    fn zero_learning_rate_keeps_weights() {
        let data = gaussian_blobs(2, 10, 3, 0.1, 1);
        let mut net = dense_net(&[3, 4, 2], ActivationMode::Relu, 7);
        let before: Vec<ArrayD<f64>> = net.layers.iter().map(|l| l.weights.clone()).collect();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 2,
            batch_size: 8,
            lambda_excess: 0.0,
            momentum: 0.0,
            seed: 5,
        };
        train(&mut net, &data, None, &cfg).unwrap();
        for (l, w) in before.iter().enumerate() {
            assert_eq!(&net.layers[l].weights, w);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = gaussian_blobs(3, 20, 5, 0.1, 2);
        let run = || {
            let mut net = dense_net(&[5, 6, 3], ActivationMode::ReluLa, 13);
            let cfg = TrainConfig {
                epochs: 3,
                ..TrainConfig::default()
            };
            train(&mut net, &data, None, &cfg).unwrap();
            net.layers
                .iter()
                .map(|l| l.weights.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax_lowest(&[0.5, 0.5]), 0);
        assert_eq!(argmax_lowest(&[0.1, 0.7, 0.7]), 1);
    }
}
