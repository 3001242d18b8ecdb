//! Dataset ingestion: IDX files, deterministic splits, block downsampling,
//! and synthetic generators for tests that must not depend on downloads.

use crate::error::{Error, Result};
use ndarray::{ArrayD, Axis, IxDyn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fs;
use std::path::Path;

pub const IDX_MAGIC_IMAGES: u32 = 2051;
pub const IDX_MAGIC_LABELS: u32 = 2049;

/// A labelled dataset. `images` has the example axis first; the remaining
/// axes are feature dimensions (flat, or height x width).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: ArrayD<f64>,
    pub labels: Vec<u8>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(images: ArrayD<f64>, labels: Vec<u8>, num_classes: usize) -> Result<Self> {
        if images.shape()[0] != labels.len() {
            return Err(Error::Shape(format!(
                "{} images but {} labels",
                images.shape()[0],
                labels.len()
            )));
        }
        Ok(Dataset {
            images,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Features per example.
    pub fn feature_len(&self) -> usize {
        self.images.len() / self.len().max(1)
    }

    /// Gather a subset by example indices.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let images = self.images.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset {
            images,
            labels,
            num_classes: self.num_classes,
        }
    }

    /// First `n` examples.
    pub fn take(&self, n: usize) -> Dataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }
}

/// Raw contents of an IDX file: dimension sizes plus unsigned bytes in
/// row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxFile {
    pub magic: u32,
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

/// Parse an IDX file: big-endian 32-bit magic, big-endian dimension sizes,
/// then unsigned bytes.
pub fn load_idx(path: &Path) -> Result<IdxFile> {
    let bytes = fs::read(path)?;
    parse_idx(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn parse_idx(bytes: &[u8]) -> std::result::Result<IdxFile, String> {
    if bytes.len() < 4 {
        return Err("truncated header".into());
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(format!("bad magic 0x{magic:08x}"));
    }
    let type_code = bytes[2];
    if type_code != 0x08 {
        return Err(format!(
            "unsupported element type 0x{type_code:02x} (only unsigned byte)"
        ));
    }
    let ndims = bytes[3] as usize;
    let header_len = 4 + 4 * ndims;
    if bytes.len() < header_len {
        return Err("truncated dimension header".into());
    }
    let mut dims = Vec::with_capacity(ndims);
    let mut total: usize = 1;
    for d in 0..ndims {
        let off = 4 + 4 * d;
        let size = u32::from_be_bytes([bytes[off], bytes[off + 1], bytes[off + 2], bytes[off + 3]])
            as usize;
        total = total
            .checked_mul(size)
            .ok_or_else(|| "dimension product overflows".to_string())?;
        dims.push(size);
    }
    let expected = header_len + total;
    if bytes.len() < expected {
        return Err(format!(
            "truncated data: expected {total} bytes, found {}",
            bytes.len() - header_len
        ));
    }
    if bytes.len() > expected {
        return Err(format!(
            "trailing bytes: expected {expected}, found {}",
            bytes.len()
        ));
    }
    Ok(IdxFile {
        magic,
        dims,
        data: bytes[header_len..].to_vec(),
    })
}

/// Serialize an IDX file. The magic's dimension byte must match `dims`.
pub fn write_idx(path: &Path, magic: u32, dims: &[usize], data: &[u8]) -> Result<()> {
    let expected: usize = dims.iter().product();
    if expected != data.len() {
        return Err(Error::Contract(format!(
            "dims product {expected} does not match {} data bytes",
            data.len()
        )));
    }
    if (magic & 0xff) as usize != dims.len() {
        return Err(Error::Contract(format!(
            "magic 0x{magic:08x} declares {} dims, got {}",
            magic & 0xff,
            dims.len()
        )));
    }
    let mut out = Vec::with_capacity(4 + 4 * dims.len() + data.len());
    out.extend_from_slice(&magic.to_be_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    fs::write(path, out)?;
    Ok(())
}

/// Load an image IDX file (magic 2051) as `[n, h, w]`, bytes scaled to
/// [0, 1] by 1/255.
pub fn load_idx_images(path: &Path) -> Result<ArrayD<f64>> {
    let idx = load_idx(path)?;
    if idx.magic != IDX_MAGIC_IMAGES || idx.dims.len() != 3 {
        return Err(Error::Format(format!(
            "{}: expected image file (magic {IDX_MAGIC_IMAGES}, 3 dims), got magic {} with {} dims",
            path.display(),
            idx.magic,
            idx.dims.len()
        )));
    }
    let values: Vec<f64> = idx.data.iter().map(|&b| b as f64 / 255.0).collect();
    ArrayD::from_shape_vec(IxDyn(&idx.dims), values)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Load a label IDX file (magic 2049).
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let idx = load_idx(path)?;
    if idx.magic != IDX_MAGIC_LABELS || idx.dims.len() != 1 {
        return Err(Error::Format(format!(
            "{}: expected label file (magic {IDX_MAGIC_LABELS}, 1 dim), got magic {} with {} dims",
            path.display(),
            idx.magic,
            idx.dims.len()
        )));
    }
    Ok(idx.data)
}

/// Load the classic four-file digit corpus from a directory with the
/// standard uncompressed names.
pub fn load_mnist_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train_images = load_idx_images(&dir.join("train-images-idx3-ubyte"))?;
    let train_labels = load_idx_labels(&dir.join("train-labels-idx1-ubyte"))?;
    let test_images = load_idx_images(&dir.join("t10k-images-idx3-ubyte"))?;
    let test_labels = load_idx_labels(&dir.join("t10k-labels-idx1-ubyte"))?;
    Ok((
        Dataset::new(train_images, train_labels, 10)?,
        Dataset::new(test_images, test_labels, 10)?,
    ))
}

/// Deterministic seeded shuffle followed by a partition into
/// (first `sizes.0`, next `sizes.1`, remainder).
pub fn split(
    dataset: &Dataset,
    seed: u64,
    sizes: (usize, usize),
) -> Result<(Dataset, Dataset, Dataset)> {
    let (a, b) = sizes;
    let n = dataset.len();
    let wanted = a
        .checked_add(b)
        .ok_or_else(|| Error::Contract("split sizes overflow".into()))?;
    if wanted > n {
        return Err(Error::Contract(format!(
            "split sizes {a}+{b} exceed dataset size {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    Ok((
        dataset.select(&order[..a]),
        dataset.select(&order[a..a + b]),
        dataset.select(&order[a + b..]),
    ))
}

/// Block-average pooling over the trailing two (spatial) axes.
pub fn downsample(images: &ArrayD<f64>, factor: usize) -> Result<ArrayD<f64>> {
    if factor == 0 {
        return Err(Error::Contract("downsample factor must be positive".into()));
    }
    if factor == 1 {
        return Ok(images.clone());
    }
    let shape = images.shape().to_vec();
    if shape.len() < 3 {
        return Err(Error::Shape(format!(
            "downsample expects [n, h, w, ..]-style shape, got {shape:?}"
        )));
    }
    let (h, w) = (shape[shape.len() - 2], shape[shape.len() - 1]);
    if h % factor != 0 || w % factor != 0 {
        return Err(Error::Contract(format!(
            "factor {factor} does not divide spatial dims {h}x{w}"
        )));
    }
    let mut out_shape = shape.clone();
    let hw_axis = shape.len() - 2;
    out_shape[hw_axis] = h / factor;
    out_shape[hw_axis + 1] = w / factor;
    let lead: usize = shape[..hw_axis].iter().product();
    let flat = images
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((lead, h, w))
        .map_err(|e| Error::Shape(e.to_string()))?;
    let area = (factor * factor) as f64;
    let mut out = ndarray::Array3::<f64>::zeros((lead, h / factor, w / factor));
    for i in 0..lead {
        for oy in 0..h / factor {
            for ox in 0..w / factor {
                let mut sum = 0.0;
                for dy in 0..factor {
                    for dx in 0..factor {
                        sum += flat[(i, oy * factor + dy, ox * factor + dx)];
                    }
                }
                out[(i, oy, ox)] = sum / area;
            }
        }
    }
    out.into_dyn()
        .into_shape_with_order(IxDyn(&out_shape))
        .map_err(|e| Error::Shape(e.to_string()))
}

/// Gaussian blobs with angularly separated nonnegative class means, normal
/// noise, values clamped to [0, 2]. Flat feature vectors.
///
/// Means are kept apart in direction, not just offset, so the classes stay
/// separable by hyperplanes through the origin; the zero-bias networks here
/// cannot express anything else.
pub fn gaussian_blobs(
    classes: usize,
    per_class: usize,
    dim: usize,
    spread: f64,
    seed: u64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            (0..dim)
                .map(|d| {
                    let base = if d % classes == c { 1.4 } else { 0.15 };
                    base + rng.gen_range(0.0..0.2)
                })
                .collect()
        })
        .collect();
    let noise = Normal::new(0.0, spread).expect("valid spread");
    let n = classes * per_class;
    let mut values = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            for &m in mean {
                let v: f64 = m + noise.sample(&mut rng);
                values.push(v.clamp(0.0, 2.0));
            }
            labels.push(c as u8);
        }
    }
    Dataset {
        images: ArrayD::from_shape_vec(IxDyn(&[n, dim]), values).expect("shape"),
        labels,
        num_classes: classes,
    }
}

/// Synthetic digit-style images: a sparse blocky prototype per class,
/// examples drawn as noisy blends between a class prototype and a random
/// other class, clamped to [0, 1]. Shaped `[n, h, w]`.
///
/// The blend coefficient varies per example, so per-example classification
/// margins span a continuum from comfortable to borderline, the way real
/// handwriting does. That matters for baselines that read classes out of
/// stochastic evidence: with uniformly easy examples they converge in a
/// couple of steps and the comparison degenerates.
pub fn synthetic_images(
    classes: usize,
    per_class: usize,
    h: usize,
    w: usize,
    noise: f64,
    seed: u64,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = 4usize;
    let (ph, pw) = (h.div_ceil(block), w.div_ceil(block));
    let prototypes: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            (0..ph * pw)
                .map(|_| {
                    if rng.gen::<f64>() < 0.25 {
                        rng.gen_range(0.35..1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let dist = Normal::new(0.0, noise).expect("valid noise");
    let n = classes * per_class;
    let mut values = Vec::with_capacity(n * h * w);
    let mut labels = Vec::with_capacity(n);
    for c in 0..classes {
        for _ in 0..per_class {
            let other = if classes > 1 {
                let mut o = rng.gen_range(0..classes - 1);
                if o >= c {
                    o += 1;
                }
                o
            } else {
                c
            };
            // Half the examples are pure; the rest blend toward another
            // class while the labelled class stays dominant.
            let alpha: f64 = if rng.gen::<f64>() < 0.5 {
                0.0
            } else {
                rng.gen_range(0.15..0.46)
            };
            for y in 0..h {
                for x in 0..w {
                    let b = (y / block) * pw + x / block;
                    let base = (1.0 - alpha) * prototypes[c][b] + alpha * prototypes[other][b];
                    let v: f64 = base + dist.sample(&mut rng);
                    values.push(v.clamp(0.0, 1.0));
                }
            }
            labels.push(c as u8);
        }
    }
    Dataset {
        images: ArrayD::from_shape_vec(IxDyn(&[n, h, w]), values).expect("shape"),
        labels,
        num_classes: classes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idx_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("images.idx");
        let data: Vec<u8> = (0..2 * 3 * 4).map(|i| (i * 7 % 256) as u8).collect();
        write_idx(&path, IDX_MAGIC_IMAGES, &[2, 3, 4], &data).unwrap();
        let read = load_idx(&path).unwrap();
        assert_eq!(read.magic, IDX_MAGIC_IMAGES);
        assert_eq!(read.dims, vec![2, 3, 4]);
        assert_eq!(read.data, data);

        let bytes_a = fs::read(&path).unwrap();
        let path_b = dir.path().join("copy.idx");
        write_idx(&path_b, read.magic, &read.dims, &read.data).unwrap();
        assert_eq!(bytes_a, fs::read(&path_b).unwrap());
    }

    #[test]
    fn idx_images_scaling_and_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.idx");
        write_idx(&path, IDX_MAGIC_IMAGES, &[1, 2, 2], &[0, 51, 204, 255]).unwrap();
        let images = load_idx_images(&path).unwrap();
        assert_eq!(images.shape(), &[1, 2, 2]);
        assert_eq!(images[[0, 1, 1]], 1.0);
        assert_eq!(images[[0, 0, 0]], 0.0);
        assert_eq!(images[[0, 0, 1]], 0.2);
    }

    #[test]
    fn idx_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.idx");
        write_idx(&path, IDX_MAGIC_LABELS, &[10], &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
        let labels = load_idx_labels(&path).unwrap();
        assert_eq!(labels.len(), 10);
        assert!(labels.iter().all(|&l| l < 10));
    }

    #[test]
    fn idx_bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.idx");
        fs::write(&path, [1u8, 0, 8, 1, 0, 0, 0, 1, 42]).unwrap();
        assert!(matches!(load_idx(&path), Err(Error::Format(_))));
        fs::write(&path, [0u8, 0, 8, 1, 0, 0, 0, 5, 1, 2]).unwrap();
        assert!(matches!(load_idx(&path), Err(Error::Format(_))));
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let ds = gaussian_blobs(4, 25, 3, 0.1, 7);
        let (a1, b1, c1) = split(&ds, 99, (10, 10)).unwrap();
        let (a2, _, _) = split(&ds, 99, (10, 10)).unwrap();
        assert_eq!(a1.images, a2.images);
        assert_eq!(a1.len(), 10);
        assert_eq!(b1.len(), 10);
        assert_eq!(c1.len(), 80);
        // Disjointness: every original row appears exactly once overall.
        let mut seen: Vec<Vec<u8>> = Vec::new();
        for part in [&a1, &b1, &c1] {
            for row in part.images.outer_iter() {
                seen.push(row.iter().map(|v| (v * 100.0) as u8).collect());
            }
        }
        seen.sort();
        let mut orig: Vec<Vec<u8>> = ds
            .images
            .outer_iter()
            .map(|row| row.iter().map(|v| (v * 100.0) as u8).collect())
            .collect();
        orig.sort();
        assert_eq!(seen, orig);
    }

    #[test]
    fn split_size_overflow_rejected() {
        let ds = gaussian_blobs(2, 10, 2, 0.1, 7);
        assert!(split(&ds, 0, (15, 10)).is_err());
    }

    #[test]
    fn downsample_block_mean() {
        let images = ArrayD::from_shape_vec(IxDyn(&[1, 2, 2]), vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let out = downsample(&images, 2).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1]);
        assert_eq!(out[[0, 0, 0]], 0.5);

        let constant = ArrayD::from_elem(IxDyn(&[2, 4, 4]), 0.7);
        let out = downsample(&constant, 2).unwrap();
        assert!(out.iter().all(|&v| (v - 0.7).abs() < 1e-15));
        assert!(downsample(&constant, 3).is_err());
    }

    #[test]
    fn synthetic_images_in_unit_range() {
        let ds = synthetic_images(10, 5, 28, 28, 0.2, 3);
        assert_eq!(ds.len(), 50);
        assert_eq!(ds.images.shape(), &[50, 28, 28]);
        assert!(ds.images.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
