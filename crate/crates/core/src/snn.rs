//! Layered spiking runtime: a global clock, chained per-layer time windows,
//! spike propagation with window gating, output decoding, and cost
//! accounting.
//!
//! Layer `l`'s output window is layer `l+1`'s input window, so within one
//! global step layers are advanced in order and an in-window fire is
//! delivered downstream at the same step. Fires outside a layer's output
//! window still reset the neuron but are never delivered; they are tallied
//! as undesired.

use crate::ann::{argmax_lowest, LayerKind};
use crate::coding::{decode_ltc, encode_ltc, ExponentRange, LaVariant, SpikeTrain};
use crate::data::Dataset;
use crate::ef_neuron::{EfConfig, EfNeuron, Potential, UndesiredKind};
use crate::error::{Error, Result};
use crate::fixed::FixedPoint;
use ndarray::{ArrayD, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// One spiking layer: connectivity and weights already pre-scaled by
/// 2^e_in_min, so integration is a pure add per synaptic event.
#[derive(Debug, Clone)]
pub struct SnnLayer {
    pub kind: LayerKind,
    pub scaled_weights: ArrayD<f64>,
    pub cfg: EfConfig,
}

/// A converted spiking network.
#[derive(Debug, Clone)]
pub struct SnnNetwork {
    pub layers: Vec<SnnLayer>,
    pub input_range: ExponentRange,
    pub input_variant: LaVariant,
}

impl SnnNetwork {
    /// Checks shape chaining and window chaining: each layer's input range
    /// must equal the upstream layer's output range.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("spiking network has no layers".into()));
        }
        let mut upstream = self.input_range;
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.cfg.input_range != upstream {
                return Err(Error::Config(format!(
                    "layer {l}: input range {} does not chain from upstream output range {}",
                    layer.cfg.input_range, upstream
                )));
            }
            upstream = layer.cfg.output_range;
            if l + 1 < self.layers.len()
                && layer.kind.out_len() != self.layers[l + 1].kind.in_len()
            {
                return Err(Error::Config(format!(
                    "layer {l} outputs {} values but layer {} expects {}",
                    layer.kind.out_len(),
                    l + 1,
                    self.layers[l + 1].kind.in_len()
                )));
            }
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.layers.first().map(|l| l.kind.in_len()).unwrap_or(0)
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map(|l| l.kind.out_len()).unwrap_or(0)
    }

    pub fn output_range(&self) -> ExponentRange {
        self.layers.last().expect("nonempty").cfg.output_range
    }

    /// Total steps: the last layer's output window closes at `horizon - 1`.
    pub fn horizon(&self) -> u32 {
        let sum_inputs: u32 = self.layers.iter().map(|l| l.cfg.t_in() - 1).sum();
        sum_inputs + self.layers.last().expect("nonempty").cfg.t_out()
    }
}

/// Event tallies for one run. `propagated_spikes` counts every in-window
/// fire including the virtual input-encoding layer; `input_spikes` reports
/// the encoder's share so either counting convention can be recovered.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounters {
    pub synaptic_events: u64,
    pub propagated_spikes: u64,
    pub input_spikes: u64,
    pub undesired_early: u64,
    pub undesired_late: u64,
    pub aux_adds: u64,
}

impl CostCounters {
    pub fn add(&mut self, other: &CostCounters) {
        self.synaptic_events += other.synaptic_events;
        self.propagated_spikes += other.propagated_spikes;
        self.input_spikes += other.input_spikes;
        self.undesired_early += other.undesired_early;
        self.undesired_late += other.undesired_late;
        self.aux_adds += other.aux_adds;
    }
}

/// Decoded classification output of one run.
#[derive(Debug, Clone)]
pub struct SnnOutput {
    pub decoded: Vec<f64>,
    pub argmax_class: usize,
    pub spike_trains: Vec<SpikeTrain>,
    pub counters: CostCounters,
}

/// Per-layer detail captured by [`CompiledSnn::run_detailed`].
#[derive(Debug, Clone)]
pub struct LayerActivity {
    /// Window-relative output train per neuron.
    pub outputs: Vec<SpikeTrain>,
    /// (neuron, global step, kind) for every out-of-window fire.
    pub undesired: Vec<(usize, u32, UndesiredKind)>,
}

#[derive(Debug, Clone)]
pub struct DetailedRun {
    pub output: SnnOutput,
    pub layers: Vec<LayerActivity>,
}

/// Numeric backend selection for a compiled network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Float,
    Fixed { frac_bits: u32 },
}

struct CompiledLayer<P: Potential> {
    cfg: EfConfig,
    out_len: usize,
    /// Outgoing synapses per input index: (target neuron, scaled weight).
    fan_out: Vec<Vec<(u32, P)>>,
    /// Global-clock output window.
    win_start: u32,
    win_end: u32,
}

/// A network compiled to a concrete numeric backend: weights converted,
/// fan-out adjacency precomputed. Reused across runs; each run carries its
/// own mutable state, so runs may proceed in parallel.
pub struct Engine<P: Potential> {
    layers: Vec<CompiledLayer<P>>,
    input_range: ExponentRange,
    input_variant: LaVariant,
    input_shape: Vec<usize>,
    output_range: ExponentRange,
    horizon: u32,
    ctx: P::Ctx,
}

pub(crate) fn build_fan_out<P: Potential>(
    kind: &LayerKind,
    scaled_weights: &ArrayD<f64>,
    ctx: P::Ctx,
) -> Result<Vec<Vec<(u32, P)>>> {
    let mut fan_out: Vec<Vec<(u32, P)>> = vec![Vec::new(); kind.in_len()];
    match *kind {
        LayerKind::Dense { in_dim, out_dim } => {
            let w = scaled_weights
                .view()
                .into_shape_with_order((out_dim, in_dim))
                .expect("dense weights");
            for (j, fo) in fan_out.iter_mut().enumerate() {
                fo.reserve(out_dim);
                for i in 0..out_dim {
                    fo.push((i as u32, P::from_scaled_weight(w[(i, j)], ctx)?));
                }
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
            let out_shape = kind.out_shape();
            let (oh, ow) = (out_shape[1], out_shape[2]);
            let w = scaled_weights
                .view()
                .into_shape_with_order((out_ch, in_ch, kernel, kernel))
                .expect("conv weights");
            for ic in 0..in_ch {
                for iy in 0..in_h {
                    for ix in 0..in_w {
                        let j = (ic * in_h + iy) * in_w + ix;
                        let fo = &mut fan_out[j];
                        // Output rows whose kernel covers input row iy.
                        let ylo = (iy + padding).saturating_sub(kernel - 1).div_ceil(stride);
                        let yhi = ((iy + padding) / stride).min(oh.saturating_sub(1));
                        let xlo = (ix + padding).saturating_sub(kernel - 1).div_ceil(stride);
                        let xhi = ((ix + padding) / stride).min(ow.saturating_sub(1));
                        for oy in ylo..=yhi.min(oh.saturating_sub(1)) {
                            let ky = iy + padding - oy * stride;
                            if ky >= kernel {
                                continue;
                            }
                            for ox in xlo..=xhi {
                                let kx = ix + padding - ox * stride;
                                if kx >= kernel {
                                    continue;
                                }
                                for oc in 0..out_ch {
                                    let target = (oc * oh + oy) * ow + ox;
                                    fo.push((
                                        target as u32,
                                        P::from_scaled_weight(w[(oc, ic, ky, kx)], ctx)?,
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
        LayerKind::AvgPool {
            channels,
            pool,
            in_h,
            in_w,
        } => {
            let (oh, ow) = (in_h / pool, in_w / pool);
            let shared = P::from_scaled_weight(scaled_weights[[0]], ctx)?;
            for c in 0..channels {
                for iy in 0..in_h {
                    for ix in 0..in_w {
                        let j = (c * in_h + iy) * in_w + ix;
                        let target = (c * oh + iy / pool) * ow + ix / pool;
                        fan_out[j].push((target as u32, shared));
                    }
                }
            }
        }
    }
    Ok(fan_out)
}

impl<P: Potential> Engine<P> {
    pub fn new(net: &SnnNetwork, ctx: P::Ctx) -> Result<Self> {
        net.validate()?;
        let mut layers = Vec::with_capacity(net.layers.len());
        let mut in_start = 0u32;
        for layer in &net.layers {
            let fan_out = build_fan_out::<P>(&layer.kind, &layer.scaled_weights, ctx)?;
            let win_start = in_start + layer.cfg.t_in() - 1;
            layers.push(CompiledLayer {
                cfg: layer.cfg,
                out_len: layer.kind.out_len(),
                fan_out,
                win_start,
                win_end: win_start + layer.cfg.t_out() - 1,
            });
            in_start = win_start;
        }
        Ok(Engine {
            layers,
            input_range: net.input_range,
            input_variant: net.input_variant,
            input_shape: net.layers[0].kind.in_shape(),
            output_range: net.output_range(),
            horizon: net.horizon(),
            ctx,
        })
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Global-clock output window of a layer.
    pub fn window(&self, layer: usize) -> (u32, u32) {
        (self.layers[layer].win_start, self.layers[layer].win_end)
    }

    fn check_input(&self, input: &ArrayD<f64>) -> Result<()> {
        let expected: usize = self.input_shape.iter().product();
        if input.len() != expected {
            return Err(Error::Shape(format!(
                "input has {} values, network expects {:?}",
                input.len(),
                self.input_shape
            )));
        }
        Ok(())
    }

    pub fn run(&self, input: &ArrayD<f64>) -> Result<SnnOutput> {
        Ok(self.run_impl(input, false)?.output)
    }

    pub fn run_detailed(&self, input: &ArrayD<f64>) -> Result<DetailedRun> {
        self.run_impl(input, true)
    }

    fn run_impl(&self, input: &ArrayD<f64>, detailed: bool) -> Result<DetailedRun> {
        self.check_input(input)?;
        let num_layers = self.layers.len();
        let t1_in = self.input_range.window_len();

        // Encode the input as spikes, bucketed by time step.
        let mut input_events: Vec<Vec<u32>> = vec![Vec::new(); t1_in as usize];
        let mut counters = CostCounters::default();
        let flat = input.as_standard_layout();
        for (j, &a) in flat.iter().enumerate() {
            let train = encode_ltc(a, self.input_range, self.input_variant)?;
            for &t in train.times() {
                input_events[t as usize].push(j as u32);
            }
        }

        let mut neurons: Vec<Vec<EfNeuron<P>>> = Vec::with_capacity(num_layers);
        for layer in &self.layers {
            neurons.push(vec![EfNeuron::new(&layer.cfg, self.ctx)?; layer.out_len]);
        }
        let mut pending: Vec<Vec<P>> = self
            .layers
            .iter()
            .map(|l| vec![P::zero(self.ctx); l.out_len])
            .collect();
        let mut fire_times: Vec<Vec<Vec<u32>>> = self
            .layers
            .iter()
            .map(|l| vec![Vec::new(); l.out_len])
            .collect();
        let mut undesired: Vec<Vec<(usize, u32, UndesiredKind)>> = vec![Vec::new(); num_layers];

        for t in 0..self.horizon {
            // Virtual input layer: deliver encoder spikes for this step.
            if (t as usize) < input_events.len() {
                for &j in &input_events[t as usize] {
                    counters.propagated_spikes += 1;
                    counters.input_spikes += 1;
                    let fo = &self.layers[0].fan_out[j as usize];
                    counters.synaptic_events += fo.len() as u64;
                    let dst = &mut pending[0];
                    for &(target, w) in fo {
                        dst[target as usize] = dst[target as usize].add(w).map_err(|e| {
                            contextualize(e, 0, target as usize, t)
                        })?;
                    }
                }
            }

            for l in 0..num_layers {
                let layer = &self.layers[l];
                // A neuron is stepped only through its output window plus
                // one step: that is where a late undesired spike would
                // appear, and beyond it the doubled potential diverges
                // without carrying information. No input can arrive there
                // either, since upstream windows have already closed.
                if t > layer.win_end + 1 {
                    continue;
                }
                for n in 0..layer.out_len {
                    let current = pending[l][n];
                    pending[l][n] = current.zeroed();
                    let fired = neurons[l][n]
                        .step(current)
                        .map_err(|e| contextualize(e, l, n, t))?;
                    if !fired {
                        continue;
                    }
                    if t < layer.win_start {
                        counters.undesired_early += 1;
                        undesired[l].push((n, t, UndesiredKind::Early));
                    } else if t > layer.win_end {
                        counters.undesired_late += 1;
                        undesired[l].push((n, t, UndesiredKind::Late));
                    } else {
                        counters.propagated_spikes += 1;
                        fire_times[l][n].push(t - layer.win_start);
                        if l + 1 < num_layers {
                            let fo = &self.layers[l + 1].fan_out[n];
                            counters.synaptic_events += fo.len() as u64;
                            let dst = &mut pending[l + 1];
                            for &(target, w) in fo {
                                dst[target as usize] =
                                    dst[target as usize].add(w).map_err(|e| {
                                        contextualize(e, l + 1, target as usize, t)
                                    })?;
                            }
                        }
                    }
                }
            }
        }

        let mut layer_activity = Vec::new();
        if detailed {
            for (l, layer) in self.layers.iter().enumerate() {
                let outputs = fire_times[l]
                    .iter()
                    .map(|times| SpikeTrain::from_times(layer.cfg.t_out(), times.clone()))
                    .collect::<Result<Vec<_>>>()?;
                layer_activity.push(LayerActivity {
                    outputs,
                    undesired: std::mem::take(&mut undesired[l]),
                });
            }
        }

        let last = num_layers - 1;
        let spike_trains = fire_times[last]
            .iter()
            .map(|times| SpikeTrain::from_times(self.layers[last].cfg.t_out(), times.clone()))
            .collect::<Result<Vec<_>>>()?;
        let decoded = decode_output(&spike_trains, self.output_range)?;
        let argmax_class = argmax_lowest(&decoded);
        Ok(DetailedRun {
            output: SnnOutput {
                decoded,
                argmax_class,
                spike_trains,
                counters,
            },
            layers: layer_activity,
        })
    }
}

fn contextualize(e: Error, layer: usize, neuron: usize, step: u32) -> Error {
    match e {
        Error::Overflow { what, .. } => Error::Overflow {
            layer: Some(layer),
            neuron: Some(neuron),
            step: Some(step),
            what,
        },
        other => other,
    }
}

/// Decode per-neuron output trains to activation values.
pub fn decode_output(trains: &[SpikeTrain], range: ExponentRange) -> Result<Vec<f64>> {
    trains.iter().map(|t| decode_ltc(t, range)).collect()
}

/// A network compiled for a selected backend.
pub enum CompiledSnn {
    Float(Engine<f64>),
    Fixed(Engine<FixedPoint>),
}

impl CompiledSnn {
    pub fn compile(net: &SnnNetwork, backend: Backend) -> Result<Self> {
        Ok(match backend {
            Backend::Float => CompiledSnn::Float(Engine::new(net, ())?),
            Backend::Fixed { frac_bits } => CompiledSnn::Fixed(Engine::new(net, frac_bits)?),
        })
    }

    pub fn run(&self, input: &ArrayD<f64>) -> Result<SnnOutput> {
        match self {
            CompiledSnn::Float(e) => e.run(input),
            CompiledSnn::Fixed(e) => e.run(input),
        }
    }

    pub fn run_detailed(&self, input: &ArrayD<f64>) -> Result<DetailedRun> {
        match self {
            CompiledSnn::Float(e) => e.run_detailed(input),
            CompiledSnn::Fixed(e) => e.run_detailed(input),
        }
    }

    pub fn horizon(&self) -> u32 {
        match self {
            CompiledSnn::Float(e) => e.horizon(),
            CompiledSnn::Fixed(e) => e.horizon(),
        }
    }
}

/// Run a whole network once and return only decoded outputs and counters.
pub fn run(net: &SnnNetwork, input: &ArrayD<f64>) -> Result<SnnOutput> {
    CompiledSnn::compile(net, Backend::Float)?.run(input)
}

/// As [`run`] but discarding everything except the tallies.
pub fn count_events(net: &SnnNetwork, input: &ArrayD<f64>) -> Result<CostCounters> {
    Ok(run(net, input)?.counters)
}

/// Per-example cost record, one CSV line each.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostRecord {
    pub example_id: usize,
    pub counters: CostCounters,
    pub predicted_class: usize,
    pub correct: bool,
}

pub const COST_CSV_HEADER: &str =
    "example_id,synaptic_events,propagated_spikes,undesired_early,undesired_late,predicted_class,correct";

impl CostRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.example_id,
            self.counters.synaptic_events,
            self.counters.propagated_spikes,
            self.counters.undesired_early,
            self.counters.undesired_late,
            self.predicted_class,
            self.correct as u8
        )
    }
}

/// Outcome of running every example of a dataset.
#[derive(Debug, Clone)]
pub struct DatasetRun {
    pub records: Vec<CostRecord>,
    pub decoded: Vec<Vec<f64>>,
    pub accuracy: f64,
    pub totals: CostCounters,
}

/// Run each example of `data` through the compiled network. Examples are
/// independent, so they run in parallel; outputs are ordered by example.
pub fn run_dataset(snn: &CompiledSnn, data: &Dataset) -> Result<DatasetRun> {
    let outputs: Vec<(usize, SnnOutput)> = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let input = data.images.index_axis(Axis(0), i).to_owned().into_dyn();
            snn.run(&input).map(|o| (i, o))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(outputs.len());
    let mut decoded = Vec::with_capacity(outputs.len());
    let mut totals = CostCounters::default();
    let mut correct_count = 0usize;
    for (i, out) in outputs {
        let correct = out.argmax_class == data.labels[i] as usize;
        correct_count += correct as usize;
        totals.add(&out.counters);
        records.push(CostRecord {
            example_id: i,
            counters: out.counters,
            predicted_class: out.argmax_class,
            correct,
        });
        decoded.push(out.decoded);
    }
    Ok(DatasetRun {
        records,
        decoded,
        accuracy: correct_count as f64 / data.len().max(1) as f64,
        totals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    fn r(e_min: i32, e_max: i32) -> ExponentRange {
        ExponentRange::new(e_min, e_max).unwrap()
    }

    /// 1x1 dense identity network: weight 1, all ranges {-2..2}.
    fn identity_net(variant: LaVariant) -> SnnNetwork {
        let range = r(-2, 2);
        SnnNetwork {
            layers: vec![SnnLayer {
                kind: LayerKind::Dense { in_dim: 1, out_dim: 1 },
                // stored weight = 1.0 * 2^-2
                scaled_weights: ArrayD::from_shape_vec(IxDyn(&[1, 1]), vec![0.25]).unwrap(),
                cfg: EfConfig::new(range, range, variant),
            }],
            input_range: range,
            input_variant: LaVariant::MultiPower,
        }
    }

    fn input1(a: f64) -> ArrayD<f64> {
        ArrayD::from_shape_vec(IxDyn(&[1]), vec![a]).unwrap()
    }

    #[test]
    fn identity_multi_spike_run() {
        let net = identity_net(LaVariant::MultiPower);
        assert_eq!(net.horizon(), 9);
        let out = run(&net, &input1(5.3)).unwrap();
        assert_eq!(out.decoded, vec![5.25]);
        assert_eq!(out.counters.input_spikes, 3);
        assert_eq!(out.counters.propagated_spikes, 6);
        assert_eq!(out.counters.synaptic_events, 3);
        assert_eq!(out.counters.undesired_early, 0);
        assert_eq!(out.counters.undesired_late, 0);
    }

    #[test]
    fn identity_single_spike_run() {
        let net = identity_net(LaVariant::SinglePower);
        let out = run(&net, &input1(5.3)).unwrap();
        assert_eq!(out.decoded, vec![4.0]);
        assert_eq!(out.counters.propagated_spikes, 4); // 3 input + 1 output
        assert_eq!(out.counters.synaptic_events, 3);
        assert_eq!(out.spike_trains[0].num_spikes(), 1);
    }

    #[test]
    fn zero_input_runs_silent() {
        let net = identity_net(LaVariant::MultiPower);
        let counters = count_events(&net, &input1(0.0)).unwrap();
        assert_eq!(counters, CostCounters::default());
    }

    #[test]
    fn window_offsets_chain() {
        // Three chained windows of lengths 8, 4, 8: hidden layer windows
        // 0..7 -> 7..10, output layer 7..10 -> 10..17, horizon 18.
        let input_range = r(-7, 0);
        let hidden_range = r(-3, 0);
        let out_range = r(-7, 0);
        let net = SnnNetwork {
            layers: vec![
                SnnLayer {
                    kind: LayerKind::Dense { in_dim: 2, out_dim: 3 },
                    scaled_weights: ArrayD::zeros(IxDyn(&[3, 2])),
                    cfg: EfConfig::new(input_range, hidden_range, LaVariant::MultiPower),
                },
                SnnLayer {
                    kind: LayerKind::Dense { in_dim: 3, out_dim: 2 },
                    scaled_weights: ArrayD::zeros(IxDyn(&[2, 3])),
                    cfg: EfConfig::new(hidden_range, out_range, LaVariant::MultiPower),
                },
            ],
            input_range,
            input_variant: LaVariant::MultiPower,
        };
        assert_eq!(net.horizon(), 18);
        let engine = Engine::<f64>::new(&net, ()).unwrap();
        assert_eq!(engine.window(0), (7, 10));
        assert_eq!(engine.window(1), (10, 17));
    }

    #[test]
    fn window_chaining_violation_rejected() {
        let mut net = identity_net(LaVariant::MultiPower);
        net.input_range = r(-3, 0);
        assert!(matches!(net.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn decode_output_examples() {
        let range = r(-3, 4);
        let trains = vec![
            SpikeTrain::from_times(8, vec![0]).unwrap(),
            SpikeTrain::empty(8),
        ];
        let decoded = decode_output(&trains, range).unwrap();
        assert_eq!(decoded, vec![16.0, 0.0]);
        assert_eq!(argmax_lowest(&[0.5, 0.5]), 0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let net = identity_net(LaVariant::MultiPower);
        let compiled = CompiledSnn::compile(&net, Backend::Float).unwrap();
        let bad = ArrayD::from_shape_vec(IxDyn(&[2]), vec![1.0, 2.0]).unwrap();
        assert!(matches!(compiled.run(&bad), Err(Error::Shape(_))));
    }

    #[test]
    fn runs_are_deterministic() {
        let net = identity_net(LaVariant::MultiPower);
        let compiled = CompiledSnn::compile(&net, Backend::Float).unwrap();
        let a = compiled.run(&input1(3.7)).unwrap();
        let b = compiled.run(&input1(3.7)).unwrap();
        assert_eq!(a.decoded, b.decoded);
        assert_eq!(a.counters, b.counters);
    }

    #[test]
    fn fixed_backend_identity_agrees() {
        let net = identity_net(LaVariant::MultiPower);
        let float = CompiledSnn::compile(&net, Backend::Float).unwrap();
        let fixed = CompiledSnn::compile(&net, Backend::Fixed { frac_bits: 32 }).unwrap();
        for &a in &[0.0, 0.3, 1.0, 5.3, 100.0] {
            let fo = float.run(&input1(a)).unwrap();
            let xo = fixed.run(&input1(a)).unwrap();
            assert_eq!(fo.decoded, xo.decoded, "input {a}");
            assert_eq!(fo.counters, xo.counters);
        }
    }

    #[test]
    fn cost_csv_line_format() {
        let record = CostRecord {
            example_id: 7,
            counters: CostCounters {
                synaptic_events: 120,
                propagated_spikes: 15,
                input_spikes: 9,
                undesired_early: 1,
                undesired_late: 2,
                aux_adds: 0,
            },
            predicted_class: 3,
            correct: true,
        };
        assert_eq!(record.csv_line(), "7,120,15,1,2,3,1");
    }
}
