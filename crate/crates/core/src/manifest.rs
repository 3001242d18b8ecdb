//! Model persistence: a JSON manifest describing layer kinds, shapes,
//! exponent ranges, and run metadata, plus one raw little-endian IEEE-754
//! tensor blob per weighted layer, referenced by file name. Round-trips are
//! bit-exact.

use crate::ann::{ActivationMode, AnalogNetwork, AnnLayer, LayerKind};
use crate::coding::{ExponentRange, LaVariant};
use crate::ef_neuron::EfConfig;
use crate::error::{Error, Result};
use crate::snn::{SnnLayer, SnnNetwork};
use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

pub const MODEL_MANIFEST: &str = "manifest.json";
const MODEL_FORMAT: &str = "ltc-snn-model";
const SNN_FORMAT: &str = "ltc-snn-network";
const FORMAT_VERSION: u32 = 1;

/// Run provenance stored alongside the weights.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModelMeta {
    pub lambda: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerEntry {
    kind: LayerKind,
    output_range: ExponentRange,
    variant: LaVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<BlobRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BlobRef {
    file: String,
    len: usize,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelManifest {
    format: String,
    version: u32,
    input_range: ExponentRange,
    input_variant: LaVariant,
    mode: ActivationMode,
    layers: Vec<LayerEntry>,
    meta: ModelMeta,
}

fn write_blob(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_blob(path: &Path, expected_len: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected_len * 8 {
        return Err(Error::Format(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            expected_len * 8,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

fn blob_entry(dir: &Path, name: &str, weights: &ArrayD<f64>) -> Result<Option<BlobRef>> {
    if weights.is_empty() {
        return Ok(None);
    }
    let file = format!("{name}.f64le.bin");
    let flat = weights.as_standard_layout();
    write_blob(
        &dir.join(&file),
        flat.as_slice().expect("standard layout"),
    )?;
    Ok(Some(BlobRef {
        file,
        len: weights.len(),
        shape: weights.shape().to_vec(),
    }))
}

fn load_blob_entry(dir: &Path, blob: &Option<BlobRef>) -> Result<ArrayD<f64>> {
    match blob {
        None => Ok(ArrayD::zeros(IxDyn(&[0]))),
        Some(blob) => {
            let values = read_blob(&dir.join(&blob.file), blob.len)?;
            ArrayD::from_shape_vec(IxDyn(&blob.shape), values)
                .map_err(|e| Error::Format(format!("{}: {e}", blob.file)))
        }
    }
}

/// Persist an analog model as `manifest.json` plus weight blobs.
pub fn save_model(dir: &Path, net: &AnalogNetwork, meta: &ModelMeta) -> Result<()> {
    net.validate()?;
    fs::create_dir_all(dir)?;
    let mut layers = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate() {
        layers.push(LayerEntry {
            kind: layer.kind,
            output_range: layer.output_range,
            variant: layer.variant,
            weights: blob_entry(dir, &format!("layer_{l:02}"), &layer.weights)?,
        });
    }
    let manifest = ModelManifest {
        format: MODEL_FORMAT.into(),
        version: FORMAT_VERSION,
        input_range: net.input_range,
        input_variant: net.input_variant,
        mode: net.mode,
        layers,
        meta: meta.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join(MODEL_MANIFEST), json)?;
    Ok(())
}

/// Load an analog model saved by [`save_model`].
pub fn load_model(dir: &Path) -> Result<(AnalogNetwork, ModelMeta)> {
    let path = dir.join(MODEL_MANIFEST);
    let json = fs::read_to_string(&path)?;
    let manifest: ModelManifest =
        serde_json::from_str(&json).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if manifest.format != MODEL_FORMAT {
        return Err(Error::Format(format!(
            "{}: not a model manifest (format {})",
            path.display(),
            manifest.format
        )));
    }
    if manifest.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported manifest version {}",
            manifest.version
        )));
    }
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        layers.push(AnnLayer {
            kind: entry.kind,
            weights: load_blob_entry(dir, &entry.weights)?,
            output_range: entry.output_range,
            variant: entry.variant,
        });
    }
    let net = AnalogNetwork {
        layers,
        input_range: manifest.input_range,
        input_variant: manifest.input_variant,
        mode: manifest.mode,
    };
    net.validate()?;
    Ok((net, manifest.meta))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SnnLayerEntry {
    kind: LayerKind,
    cfg: EfConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<BlobRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SnnManifest {
    format: String,
    version: u32,
    input_range: ExponentRange,
    input_variant: LaVariant,
    layers: Vec<SnnLayerEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

/// Persist a converted spiking network (pre-scaled weights included).
pub fn save_snn(dir: &Path, net: &SnnNetwork, config_hash: Option<String>) -> Result<()> {
    net.validate()?;
    fs::create_dir_all(dir)?;
    let mut layers = Vec::with_capacity(net.layers.len());
    for (l, layer) in net.layers.iter().enumerate() {
        layers.push(SnnLayerEntry {
            kind: layer.kind,
            cfg: layer.cfg,
            weights: blob_entry(dir, &format!("snn_layer_{l:02}"), &layer.scaled_weights)?,
        });
    }
    let manifest = SnnManifest {
        format: SNN_FORMAT.into(),
        version: FORMAT_VERSION,
        input_range: net.input_range,
        input_variant: net.input_variant,
        layers,
        config_hash,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Format(e.to_string()))?;
    fs::write(dir.join(MODEL_MANIFEST), json)?;
    Ok(())
}

/// Load a spiking network saved by [`save_snn`].
pub fn load_snn(dir: &Path) -> Result<SnnNetwork> {
    let path = dir.join(MODEL_MANIFEST);
    let json = fs::read_to_string(&path)?;
    let manifest: SnnManifest =
        serde_json::from_str(&json).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if manifest.format != SNN_FORMAT {
        return Err(Error::Format(format!(
            "{}: not a spiking-network manifest (format {})",
            path.display(),
            manifest.format
        )));
    }
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        layers.push(SnnLayer {
            kind: entry.kind,
            scaled_weights: load_blob_entry(dir, &entry.weights)?,
            cfg: entry.cfg,
        });
    }
    let net = SnnNetwork {
        layers,
        input_range: manifest.input_range,
        input_variant: manifest.input_variant,
    };
    net.validate()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::init_weights;
    use crate::converter::convert;

    fn r(e_min: i32, e_max: i32) -> ExponentRange {
        ExponentRange::new(e_min, e_max).unwrap()
    }

    fn sample_net() -> AnalogNetwork {
        let kinds = [
            (
                LayerKind::Conv2d {
                    in_ch: 1,
                    out_ch: 2,
                    kernel: 3,
                    stride: 1,
                    padding: 0,
                    in_h: 6,
                    in_w: 6,
                },
                r(-3, 0),
                LaVariant::MultiPower,
            ),
            (
                LayerKind::AvgPool { channels: 2, pool: 2, in_h: 4, in_w: 4 },
                r(-3, 0),
                LaVariant::MultiPower,
            ),
            (
                LayerKind::Dense { in_dim: 8, out_dim: 3 },
                r(-3, 4),
                LaVariant::MultiPower,
            ),
        ];
        AnalogNetwork {
            layers: init_weights(&kinds, 99),
            input_range: r(-7, 0),
            input_variant: LaVariant::MultiPower,
            mode: ActivationMode::ReluLa,
        }
    }

    #[test]
    fn model_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let net = sample_net();
        let meta = ModelMeta {
            lambda: 0.1,
            seed: 7,
            config_hash: Some("deadbeef".into()),
        };
        save_model(dir.path(), &net, &meta).unwrap();
        let (loaded, loaded_meta) = load_model(dir.path()).unwrap();
        assert_eq!(loaded.layers.len(), net.layers.len());
        for (a, b) in loaded.layers.iter().zip(&net.layers) {
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.weights, b.weights);
            assert_eq!(a.output_range, b.output_range);
        }
        assert_eq!(loaded.mode, net.mode);
        assert_eq!(loaded_meta.lambda, meta.lambda);
        assert_eq!(loaded_meta.seed, meta.seed);
        assert_eq!(loaded_meta.config_hash, meta.config_hash);
    }

    #[test]
    fn snn_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let snn = convert(&sample_net()).unwrap();
        save_snn(dir.path(), &snn, None).unwrap();
        let loaded = load_snn(dir.path()).unwrap();
        assert_eq!(loaded.layers.len(), snn.layers.len());
        for (a, b) in loaded.layers.iter().zip(&snn.layers) {
            assert_eq!(a.scaled_weights, b.scaled_weights);
            assert_eq!(a.cfg, b.cfg);
        }
    }

    #[test]
    fn model_and_snn_manifests_do_not_mix() {
        let dir = tempfile::tempdir().unwrap();
        let snn = convert(&sample_net()).unwrap();
        save_snn(dir.path(), &snn, None).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn corrupt_blob_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let net = sample_net();
        save_model(dir.path(), &net, &ModelMeta::default()).unwrap();
        // Truncate the first blob.
        let blob = dir.path().join("layer_00.f64le.bin");
        let bytes = fs::read(&blob).unwrap();
        fs::write(&blob, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(load_model(dir.path()), Err(Error::Format(_))));
    }
}
