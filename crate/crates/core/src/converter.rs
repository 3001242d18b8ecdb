//! Analog-to-spiking conversion: copy the topology, pre-scale each layer's
//! weights by 2^e_in_min of its input window, chain exponent ranges into the
//! window schedule, and carry over the per-layer coding variant. No weight
//! normalization is involved; conversion is purely structural.

use crate::ann::{forward, AnalogNetwork, LayerKind};
use crate::coding::pow2;
use crate::ef_neuron::{EfConfig, UndesiredKind};
use crate::error::{Error, Result};
use crate::snn::{Backend, CompiledSnn, SnnLayer, SnnNetwork};
use ndarray::{ArrayD, Axis, IxDyn};
use std::fmt;

/// Map a trained analog network onto an equivalent spiking network.
pub fn convert(ann: &AnalogNetwork) -> Result<SnnNetwork> {
    ann.validate()?;
    let mut layers = Vec::with_capacity(ann.layers.len());
    let mut input_range = ann.input_range;
    for layer in &ann.layers {
        let scale = pow2(input_range.e_min());
        let scaled_weights = match layer.kind {
            LayerKind::AvgPool { pool, .. } => {
                let area = (pool * pool) as f64;
                ArrayD::from_shape_vec(IxDyn(&[1]), vec![scale / area]).expect("shape")
            }
            _ => layer.weights.mapv(|w| w * scale),
        };
        layers.push(SnnLayer {
            kind: layer.kind,
            scaled_weights,
            cfg: EfConfig::new(input_range, layer.output_range, layer.variant),
        });
        input_range = layer.output_range;
    }
    let snn = SnnNetwork {
        layers,
        input_range: ann.input_range,
        input_variant: ann.input_variant,
    };
    snn.validate()?;
    Ok(snn)
}

/// Per-probe comparison of the spiking network against the analog forward
/// pass with approximated activations.
#[derive(Debug, Clone)]
pub struct ProbeReport {
    pub probe: usize,
    pub max_abs_deviation: f64,
    pub undesired_early: u64,
    pub undesired_late: u64,
    /// Neurons whose decoded output deviates: (layer, neuron, deviation).
    pub affected: Vec<(usize, usize, f64)>,
}

/// Outcome of [`verify_conversion`].
#[derive(Debug, Clone)]
pub struct ConversionReport {
    pub probes: Vec<ProbeReport>,
    pub max_abs_deviation: f64,
    pub probes_with_early_spikes: usize,
    pub probes_exact: usize,
}

impl fmt::Display for ConversionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "conversion verification over {} probes", self.probes.len())?;
        writeln!(f, "  max |snn - ann| deviation: {:e}", self.max_abs_deviation)?;
        writeln!(f, "  probes exact: {}", self.probes_exact)?;
        writeln!(
            f,
            "  probes with undesired early spikes: {}",
            self.probes_with_early_spikes
        )?;
        for p in &self.probes {
            if p.max_abs_deviation != 0.0 || p.undesired_early > 0 || p.undesired_late > 0 {
                writeln!(
                    f,
                    "  probe {}: deviation {:e}, early {}, late {}",
                    p.probe, p.max_abs_deviation, p.undesired_early, p.undesired_late
                )?;
                for &(layer, neuron, dev) in p.affected.iter().take(8) {
                    writeln!(f, "    layer {layer} neuron {neuron}: |dev| {dev:e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Compare the spiking network's per-layer decoded activations against the
/// analog network's approximated forward pass on each probe input.
/// Deviations are reported, never asserted: probes that trigger undesired
/// early spikes legitimately disagree.
pub fn verify_conversion(
    ann: &AnalogNetwork,
    snn: &SnnNetwork,
    probes: &ArrayD<f64>,
) -> Result<ConversionReport> {
    if probes.shape().is_empty() || probes.shape()[0] == 0 {
        return Err(Error::Contract("probe set is empty".into()));
    }
    let compiled = CompiledSnn::compile(snn, Backend::Float)?;
    let pass = forward(ann, probes)?;
    let num_probes = probes.shape()[0];
    let mut report = ConversionReport {
        probes: Vec::with_capacity(num_probes),
        max_abs_deviation: 0.0,
        probes_with_early_spikes: 0,
        probes_exact: 0,
    };
    for i in 0..num_probes {
        let input = probes.index_axis(Axis(0), i).to_owned().into_dyn();
        let detail = compiled.run_detailed(&input)?;
        let mut probe = ProbeReport {
            probe: i,
            max_abs_deviation: 0.0,
            undesired_early: 0,
            undesired_late: 0,
            affected: Vec::new(),
        };
        for (l, activity) in detail.layers.iter().enumerate() {
            for &(_, _, kind) in &activity.undesired {
                match kind {
                    UndesiredKind::Early => probe.undesired_early += 1,
                    UndesiredKind::Late => probe.undesired_late += 1,
                }
            }
            let expected_all = pass.spike_comparable(ann, l)?;
            let expected = expected_all.index_axis(Axis(0), i);
            let expected_flat = expected.as_standard_layout();
            let decoded =
                crate::snn::decode_output(&activity.outputs, snn.layers[l].cfg.output_range)?;
            for (n, (&want, &got)) in expected_flat.iter().zip(decoded.iter()).enumerate() {
                let dev = (got - want).abs();
                if dev > 0.0 {
                    probe.affected.push((l, n, dev));
                    probe.max_abs_deviation = probe.max_abs_deviation.max(dev);
                }
            }
        }
        report.max_abs_deviation = report.max_abs_deviation.max(probe.max_abs_deviation);
        if probe.undesired_early > 0 {
            report.probes_with_early_spikes += 1;
        }
        if probe.max_abs_deviation == 0.0 {
            report.probes_exact += 1;
        }
        report.probes.push(probe);
    }
    Ok(report)
}
