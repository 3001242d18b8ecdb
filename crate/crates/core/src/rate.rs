//! Rate-coded integrate-and-fire baseline: stochastic Bernoulli input
//! encoding at up to one spike per step, data-based weight normalization so
//! every threshold is 1, and free-running simulation with per-step
//! accuracy-versus-cost curves.

use crate::ann::{argmax_lowest, forward, ActivationMode, AnalogNetwork, LayerKind};
use crate::coding::SpikeTrain;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::snn::{build_fan_out, CostCounters, CostRecord};
use ndarray::{ArrayD, Axis, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// What happens to the membrane potential when an IF neuron fires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResetRule {
    ToZero,
    Subtract,
}

impl std::fmt::Display for ResetRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ResetRule::ToZero => write!(f, "reset-to-zero"),
            ResetRule::Subtract => write!(f, "reset-by-subtraction"),
        }
    }
}

/// One integrate-and-fire neuron with unit threshold.
#[derive(Debug, Clone, Copy)]
pub struct IfNeuron {
    pub v: f64,
    pub threshold: f64,
    pub rule: ResetRule,
}

impl IfNeuron {
    pub fn new(rule: ResetRule) -> Self {
        IfNeuron {
            v: 0.0,
            threshold: 1.0,
            rule,
        }
    }

    /// Integrate one step's input current, then threshold-test.
    pub fn step(&mut self, input: f64) -> bool {
        self.v += input;
        if self.v >= self.threshold {
            match self.rule {
                ResetRule::ToZero => self.v = 0.0,
                ResetRule::Subtract => self.v -= self.threshold,
            }
            true
        } else {
            false
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Bernoulli spike train: one independent draw with success probability `x`
/// per step, seeded deterministically.
pub fn encode_rate(x: f64, steps: u32, seed: u64) -> Result<SpikeTrain> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "rate-coded input must lie in [0, 1], got {x}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times: Vec<u32> = (0..steps)
        .filter(|_| rng.gen::<f64>() < x)
        .collect();
    SpikeTrain::from_times(steps, times)
}

/// Data-based weight normalization: walk the layers in order, divide each
/// weighted layer by a high percentile of its positive activations on the
/// calibration set (computed with the already-normalized upstream layers),
/// so unit thresholds keep firing rates at or below one per step. Pooling
/// layers are averages of already-normalized activations and pass through
/// with scale 1. Returns the scaled network and the per-layer divisors.
pub fn normalize_weights(
    ann: &AnalogNetwork,
    calibration: &ArrayD<f64>,
    percentile: f64,
) -> Result<(AnalogNetwork, Vec<f64>)> {
    if calibration.shape()[0] == 0 {
        return Err(Error::Contract("calibration set is empty".into()));
    }
    if !(0.0..=100.0).contains(&percentile) {
        return Err(Error::Config(format!(
            "percentile must lie in [0, 100], got {percentile}"
        )));
    }
    let mut net = ann.clone();
    net.mode = ActivationMode::Relu;
    let mut scales = Vec::with_capacity(net.layers.len());
    for l in 0..net.layers.len() {
        if net.layers[l].weights.is_empty() {
            scales.push(1.0);
            continue;
        }
        // Forward through the prefix normalized so far; activations of
        // layer l then carry every upstream scale.
        let pass = forward(&net, calibration)?;
        let mut positives: Vec<f64> = pass.acts[l]
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .collect();
        if positives.is_empty() {
            return Err(Error::Normalization(format!(
                "layer {l} has no positive activation on the calibration set"
            )));
        }
        positives.sort_by(|a, b| a.partial_cmp(b).expect("finite activations"));
        let rank = ((percentile / 100.0) * positives.len() as f64).ceil() as usize;
        let scale = positives[rank.clamp(1, positives.len()) - 1];
        net.layers[l].weights.mapv_inplace(|w| w / scale);
        scales.push(scale);
    }
    Ok((net, scales))
}

/// Per-step snapshot of one rate-coded run.
#[derive(Debug, Clone)]
pub struct RateStep {
    pub cumulative_synaptic_events: u64,
    pub cumulative_spikes: u64,
    /// Arg-max of cumulative output spike counts, lowest index on ties.
    pub predicted_class: usize,
}

/// Full outcome of one rate-coded run.
#[derive(Debug, Clone)]
pub struct RateRun {
    pub steps: Vec<RateStep>,
    pub output_counts: Vec<u64>,
    pub counters: CostCounters,
}

/// A normalized analog network compiled for event-driven IF simulation.
pub struct RateEngine {
    fan_out: Vec<Vec<Vec<(u32, f64)>>>,
    layer_sizes: Vec<usize>,
    input_len: usize,
    rule: ResetRule,
}

impl RateEngine {
    pub fn compile(net: &AnalogNetwork, rule: ResetRule) -> Result<Self> {
        net.validate()?;
        let mut fan_out = Vec::with_capacity(net.layers.len());
        let mut layer_sizes = Vec::with_capacity(net.layers.len());
        for layer in &net.layers {
            let weights = match layer.kind {
                LayerKind::AvgPool { pool, .. } => ArrayD::from_shape_vec(
                    IxDyn(&[1]),
                    vec![1.0 / (pool * pool) as f64],
                )
                .expect("shape"),
                _ => layer.weights.clone(),
            };
            fan_out.push(build_fan_out::<f64>(&layer.kind, &weights, ())?);
            layer_sizes.push(layer.kind.out_len());
        }
        Ok(RateEngine {
            fan_out,
            layer_sizes,
            input_len: net.layers[0].kind.in_len(),
            rule,
        })
    }

    /// Simulate `steps` time steps on one input, classification read out as
    /// the arg-max of cumulative output spike counts after every step.
    pub fn run(&self, input: &ArrayD<f64>, steps: u32, seed: u64) -> Result<RateRun> {
        if input.len() != self.input_len {
            return Err(Error::Shape(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.input_len
            )));
        }
        let flat = input.as_standard_layout();
        let input_trains: Vec<SpikeTrain> = flat
            .iter()
            .enumerate()
            .map(|(j, &x)| encode_rate(x, steps, seed ^ splitmix64(j as u64)))
            .collect::<Result<_>>()?;

        let num_layers = self.fan_out.len();
        let mut neurons: Vec<Vec<IfNeuron>> = self
            .layer_sizes
            .iter()
            .map(|&n| vec![IfNeuron::new(self.rule); n])
            .collect();
        let mut pending: Vec<Vec<f64>> = self.layer_sizes.iter().map(|&n| vec![0.0; n]).collect();
        let mut output_counts = vec![0u64; *self.layer_sizes.last().expect("nonempty")];
        let mut counters = CostCounters::default();
        let mut trace = Vec::with_capacity(steps as usize);

        for t in 0..steps {
            for (j, train) in input_trains.iter().enumerate() {
                if !train.has_spike_at(t) {
                    continue;
                }
                counters.propagated_spikes += 1;
                counters.input_spikes += 1;
                let fo = &self.fan_out[0][j];
                counters.synaptic_events += fo.len() as u64;
                for &(target, w) in fo {
                    pending[0][target as usize] += w;
                }
            }
            for l in 0..num_layers {
                for n in 0..self.layer_sizes[l] {
                    let current = pending[l][n];
                    pending[l][n] = 0.0;
                    if !neurons[l][n].step(current) {
                        continue;
                    }
                    counters.propagated_spikes += 1;
                    if l + 1 < num_layers {
                        let fo = &self.fan_out[l + 1][n];
                        counters.synaptic_events += fo.len() as u64;
                        for &(target, w) in fo {
                            pending[l + 1][target as usize] += w;
                        }
                    } else {
                        output_counts[n] += 1;
                    }
                }
            }
            trace.push(RateStep {
                cumulative_synaptic_events: counters.synaptic_events,
                cumulative_spikes: counters.propagated_spikes,
                predicted_class: argmax_counts(&output_counts),
            });
        }
        Ok(RateRun {
            steps: trace,
            output_counts,
            counters,
        })
    }
}

fn argmax_counts(counts: &[u64]) -> usize {
    let floats: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    argmax_lowest(&floats)
}

/// One point of an aggregated accuracy-versus-cost curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u32,
    pub mean_cumulative_synaptic_events: f64,
    pub mean_cumulative_spikes: f64,
    pub accuracy: f64,
}

/// Aggregated rate-baseline results over a dataset.
#[derive(Debug, Clone)]
pub struct RateDatasetRun {
    pub curve: Vec<CurvePoint>,
    pub final_accuracy: f64,
    pub totals: CostCounters,
    pub records: Vec<CostRecord>,
}

/// Run every example for `steps` steps (in parallel; the per-example seed
/// is derived from `base_seed` and the example id, so results do not depend
/// on scheduling).
pub fn run_rate_dataset(
    engine: &RateEngine,
    data: &Dataset,
    steps: u32,
    base_seed: u64,
) -> Result<RateDatasetRun> {
    let n = data.len();
    let runs: Vec<(usize, RateRun)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let input = data.images.index_axis(Axis(0), i).to_owned().into_dyn();
            engine
                .run(&input, steps, base_seed ^ splitmix64(0x5eed ^ i as u64))
                .map(|r| (i, r))
        })
        .collect::<Result<_>>()?;

    let mut events_sum = vec![0u128; steps as usize];
    let mut spikes_sum = vec![0u128; steps as usize];
    let mut correct_per_step = vec![0u64; steps as usize];
    let mut totals = CostCounters::default();
    let mut records = Vec::with_capacity(n);
    for (i, run) in &runs {
        let label = data.labels[*i] as usize;
        for (t, s) in run.steps.iter().enumerate() {
            events_sum[t] += s.cumulative_synaptic_events as u128;
            spikes_sum[t] += s.cumulative_spikes as u128;
            correct_per_step[t] += (s.predicted_class == label) as u64;
        }
        totals.add(&run.counters);
        let final_step = run.steps.last().expect("steps >= 1");
        records.push(CostRecord {
            example_id: *i,
            counters: run.counters,
            predicted_class: final_step.predicted_class,
            correct: final_step.predicted_class == label,
        });
    }
    records.sort_by_key(|r| r.example_id);
    let curve: Vec<CurvePoint> = (0..steps as usize)
        .map(|t| CurvePoint {
            step: t as u32 + 1,
            mean_cumulative_synaptic_events: events_sum[t] as f64 / n as f64,
            mean_cumulative_spikes: spikes_sum[t] as f64 / n as f64,
            accuracy: correct_per_step[t] as f64 / n as f64,
        })
        .collect();
    let final_accuracy = curve.last().map(|p| p.accuracy).unwrap_or(0.0);
    Ok(RateDatasetRun {
        curve,
        final_accuracy,
        totals,
        records,
    })
}

/// First curve index after which accuracy stays within `band` of the final
/// accuracy until the end of the run.
pub fn stable_index(accuracies: &[f64], band: f64) -> usize {
    let last = match accuracies.last() {
        Some(&v) => v,
        None => return 0,
    };
    let mut idx = 0;
    for (i, &a) in accuracies.iter().enumerate() {
        if (a - last).abs() > band {
            idx = i + 1;
        }
    }
    idx.min(accuracies.len() - 1)
}

/// First curve index whose accuracy strictly exceeds `target`, if any.
pub fn matching_index(accuracies: &[f64], target: f64) -> Option<usize> {
    accuracies.iter().position(|&a| a > target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::AnnLayer;
    use crate::coding::ExponentRange;
    use crate::coding::LaVariant;
    use proptest::prelude::*;

    fn r(e_min: i32, e_max: i32) -> ExponentRange {
        ExponentRange::new(e_min, e_max).unwrap()
    }

    fn unit_net(w: f64) -> AnalogNetwork {
        AnalogNetwork {
            layers: vec![AnnLayer {
                kind: LayerKind::Dense { in_dim: 1, out_dim: 1 },
                weights: ArrayD::from_shape_vec(IxDyn(&[1, 1]), vec![w]).unwrap(),
                output_range: r(-3, 4),
                variant: LaVariant::MultiPower,
            }],
            input_range: r(-7, 0),
            input_variant: LaVariant::MultiPower,
            mode: ActivationMode::Relu,
        }
    }

    #[test]
    fn encode_rate_extremes() {
        let empty = encode_rate(0.0, 100, 1).unwrap();
        assert!(empty.is_empty());
        let full = encode_rate(1.0, 100, 1).unwrap();
        assert_eq!(full.num_spikes(), 100);
        assert!(encode_rate(1.5, 10, 1).is_err());
        assert!(encode_rate(-0.1, 10, 1).is_err());
    }

    #[test]
    fn encode_rate_binomial_count() {
        // 3-sigma band around the expected count.
        let train = encode_rate(0.8, 500, 17).unwrap();
        let n = train.num_spikes() as f64;
        let sigma = (500.0f64 * 0.8 * 0.2).sqrt();
        assert!((n - 400.0).abs() <= 3.0 * sigma, "count {n}");
    }

    #[test]
    fn encode_rate_deterministic() {
        let a = encode_rate(0.37, 200, 5).unwrap();
        let b = encode_rate(0.37, 200, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normalization_scales() {
        // Identity net, constant input 4 -> activation 4 -> weights / 4.
        let ann = unit_net(1.0);
        let calib = ArrayD::from_shape_vec(IxDyn(&[3, 1]), vec![4.0, 4.0, 4.0]).unwrap();
        let (scaled, scales) = normalize_weights(&ann, &calib, 100.0).unwrap();
        assert_eq!(scales, vec![4.0]);
        assert_eq!(scaled.layers[0].weights[[0, 0]], 0.25);

        // Max activation 2 -> weights halved.
        let calib = ArrayD::from_shape_vec(IxDyn(&[2, 1]), vec![1.0, 2.0]).unwrap();
        let (scaled, _) = normalize_weights(&ann, &calib, 100.0).unwrap();
        assert_eq!(scaled.layers[0].weights[[0, 0]], 0.5);

        // Already normalized: percentile 1.0 leaves weights unchanged.
        let calib = ArrayD::from_shape_vec(IxDyn(&[2, 1]), vec![0.5, 1.0]).unwrap();
        let (scaled, _) = normalize_weights(&ann, &calib, 100.0).unwrap();
        assert_eq!(scaled.layers[0].weights[[0, 0]], 1.0);
    }

    #[test]
    fn normalization_rejects_dead_layer() {
        let ann = unit_net(-1.0);
        let calib = ArrayD::from_shape_vec(IxDyn(&[2, 1]), vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            normalize_weights(&ann, &calib, 99.9),
            Err(Error::Normalization(_))
        ));
    }

    #[test]
    fn if_neuron_half_weight_fires_every_other_step() {
        for rule in [ResetRule::Subtract, ResetRule::ToZero] {
            let engine = RateEngine::compile(&unit_net(0.5), rule).unwrap();
            let input = ArrayD::from_shape_vec(IxDyn(&[1]), vec![1.0]).unwrap();
            let run = engine.run(&input, 10, 9).unwrap();
            // Deterministic input spikes every step: fires at steps 1,3,5,..
            assert_eq!(run.output_counts[0], 5, "{rule}");
            assert_eq!(run.counters.input_spikes, 10);
            assert_eq!(run.counters.synaptic_events, 10);
        }
    }

    #[test]
    fn zero_input_stays_silent() {
        let engine = RateEngine::compile(&unit_net(0.5), ResetRule::Subtract).unwrap();
        let input = ArrayD::from_shape_vec(IxDyn(&[1]), vec![0.0]).unwrap();
        let run = engine.run(&input, 50, 9).unwrap();
        assert_eq!(run.counters, CostCounters::default());
        assert!(run.steps.iter().all(|s| s.cumulative_spikes == 0));
    }

    #[test]
    fn stable_and_matching_indices() {
        let acc = [0.1, 0.5, 0.80, 0.905, 0.9, 0.9];
        assert_eq!(stable_index(&acc, 0.001), 4);
        let acc2 = [0.1, 0.5, 0.9004, 0.9, 0.9];
        assert_eq!(stable_index(&acc2, 0.001), 2);
        assert_eq!(matching_index(&acc, 0.85), Some(3));
        assert_eq!(matching_index(&acc, 0.95), None);
    }

    proptest! {
        /// With constant per-step current c <= 1, the subtract rule emits
        /// floor(c t) or ceil(c t) spikes after every step t.
        #[test]
        fn subtract_rule_conserves_charge(c in 0.01f64..1.0) {
            let mut neuron = IfNeuron::new(ResetRule::Subtract);
            let mut spikes = 0u64;
            for t in 1..=200u64 {
                if neuron.step(c) {
                    spikes += 1;
                }
                let total = c * t as f64;
                prop_assert!(
                    spikes == total.floor() as u64 || spikes == total.ceil() as u64,
                    "step {t}: {spikes} spikes for charge {total}"
                );
            }
        }

        /// Reset-to-zero discards overshoot, so it never out-fires
        /// reset-by-subtraction on the same input stream.
        #[test]
        fn to_zero_never_exceeds_subtract(
            currents in proptest::collection::vec(0.0f64..2.0, 1..100),
        ) {
            let mut zero = IfNeuron::new(ResetRule::ToZero);
            let mut sub = IfNeuron::new(ResetRule::Subtract);
            let mut zero_count = 0u64;
            let mut sub_count = 0u64;
            for &c in &currents {
                zero_count += zero.step(c) as u64;
                sub_count += sub.step(c) as u64;
                prop_assert!(zero_count <= sub_count);
            }
        }
    }
}
