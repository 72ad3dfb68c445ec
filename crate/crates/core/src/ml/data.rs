//! Datasets, client partitions, IDX parsing and a synthetic image task.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Row-major feature matrix with one integer label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub dim: usize,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(Error::invalid(format!(
                "{} features do not form {} rows of width {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::invalid(format!("label {bad} outside 0..{n_classes}")));
        }
        Ok(Dataset { features, dim, labels, n_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: rows.iter().flat_map(|&r| self.row(r).iter().copied()).collect(),
            dim: self.dim,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            n_classes: self.n_classes,
        }
    }

    /// Rescale every feature column to `[0, 1]`; constant columns become 0.
    pub fn min_max_scale(&mut self) {
        for j in 0..self.dim {
            let col = (0..self.len()).map(|i| self.features[i * self.dim + j]);
            let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            let span = hi - lo;
            for i in 0..self.len() {
                let v = &mut self.features[i * self.dim + j];
                *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
            }
        }
    }

    pub fn class_counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        rows.iter().for_each(|&r| c[self.labels[r]] += 1);
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PartitionMode {
    Iid,
    LabelSkew { classes_per_client: usize },
}

/// Disjoint record indices per client.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub clients: Vec<Vec<usize>>,
}

impl Partition {
    pub fn sizes(&self) -> Vec<usize> {
        self.clients.iter().map(Vec::len).collect()
    }
}

/// Split `labels.len()` records across `n_clients`.
///
/// With `guarantee_class = Some(c)` (iid mode only) every client receives at
/// least one record of class `c`, which must then have ≥ `n_clients` records.
pub fn partition<R: RngCore + ?Sized>(
    labels: &[usize],
    n_classes: usize,
    n_clients: usize,
    mode: PartitionMode,
    guarantee_class: Option<usize>,
    rng: &mut R,
) -> Result<Partition> {
    if n_clients == 0 || n_clients > labels.len() {
        return Err(Error::invalid(format!("cannot split {} records over {n_clients} clients", labels.len())));
    }
    match mode {
        PartitionMode::Iid => {
            let mut clients = vec![Vec::new(); n_clients];
            let mut rest: Vec<usize> = (0..labels.len()).collect();
            if let Some(c) = guarantee_class {
                let mut special: Vec<usize> = rest.iter().copied().filter(|&i| labels[i] == c).collect();
                if special.len() < n_clients {
                    return Err(Error::invalid(format!(
                        "class {c} has {} records, fewer than the {n_clients} clients",
                        special.len()
                    )));
                }
                special.shuffle(rng);
                for (k, &i) in special[..n_clients].iter().enumerate() {
                    clients[k].push(i);
                }
                let taken: std::collections::HashSet<usize> = special[..n_clients].iter().copied().collect();
                rest.retain(|i| !taken.contains(i));
            }
            rest.shuffle(rng);
            // Fill the smallest shards first so sizes differ by at most one.
            let mut order: Vec<usize> = (0..n_clients).collect();
            order.sort_by_key(|&k| clients[k].len());
            let mut k = 0;
            for i in rest {
                let target = order[k % n_clients];
                clients[target].push(i);
                k += 1;
            }
            clients.iter_mut().for_each(|c| c.sort_unstable());
            Ok(Partition { clients })
        }
        PartitionMode::LabelSkew { classes_per_client } => {
            if guarantee_class.is_some() {
                return Err(Error::invalid("class guarantees are only supported for iid partitions"));
            }
            if classes_per_client == 0 || classes_per_client > n_classes {
                return Err(Error::invalid(format!("classes_per_client must be in 1..={n_classes}")));
            }
            let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
            labels.iter().enumerate().for_each(|(i, &l)| by_class[l].push(i));
            let present: Vec<usize> = (0..n_classes).filter(|&c| !by_class[c].is_empty()).collect();
            // Client k holds a contiguous window of `classes_per_client` classes
            // starting at a shuffled offset, so class holders stay balanced.
            let mut starts: Vec<usize> = (0..n_clients).map(|k| k % present.len()).collect();
            starts.shuffle(rng);
            let mut holders: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
            for (k, &s) in starts.iter().enumerate() {
                for j in 0..classes_per_client.min(present.len()) {
                    holders[present[(s + j) % present.len()]].push(k);
                }
            }
            let mut clients = vec![Vec::new(); n_clients];
            for c in present {
                let recs = &mut by_class[c];
                recs.shuffle(rng);
                let hs = &holders[c];
                if hs.is_empty() {
                    continue;
                }
                for (j, &i) in recs.iter().enumerate() {
                    clients[hs[j % hs.len()]].push(i);
                }
            }
            if let Some(k) = clients.iter().position(Vec::is_empty) {
                return Err(Error::invalid(format!("label-skew split left client {k} without records")));
            }
            clients.iter_mut().for_each(|c| c.sort_unstable());
            Ok(Partition { clients })
        }
    }
}

/// Drop records of over-represented classes until every class present in
/// `rows` matches the rarest class count. Binary data with no minority
/// records is an error.
pub fn downsample<R: RngCore + ?Sized>(data: &Dataset, rows: &[usize], rng: &mut R) -> Result<Vec<usize>> {
    let counts = data.class_counts(rows);
    let floor = counts.iter().copied().filter(|&c| c > 0).min().unwrap_or(0);
    if floor == 0 || (data.n_classes == 2 && counts.contains(&0)) {
        return Err(Error::invalid("cannot downsample: a class has no records"));
    }
    let mut keep = Vec::with_capacity(floor * data.n_classes);
    for c in 0..data.n_classes {
        let mut recs: Vec<usize> = rows.iter().copied().filter(|&r| data.labels[r] == c).collect();
        if recs.len() > floor {
            recs.shuffle(rng);
            recs.truncate(floor);
        }
        keep.extend(recs);
    }
    keep.sort_unstable();
    Ok(keep)
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format { offset, message: format!("truncated header: missing {what}") })
}

/// Parse an IDX image file and its label file; pixels are scaled to `[0, 1]`.
pub fn load_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<Dataset> {
    let magic = be_u32(image_bytes, 0, "image magic")?;
    if magic != IDX_IMAGES {
        return Err(Error::Format { offset: 0, message: format!("image magic {magic:#010x}, expected {IDX_IMAGES:#010x}") });
    }
    let count = be_u32(image_bytes, 4, "image count")? as usize;
    let rows = be_u32(image_bytes, 8, "row count")? as usize;
    let cols = be_u32(image_bytes, 12, "column count")? as usize;
    let dim = rows * cols;
    let need = 16 + count * dim;
    if image_bytes.len() < need {
        return Err(Error::Format {
            offset: image_bytes.len(),
            message: format!("image payload truncated: {count} images of {rows}x{cols} need {need} bytes"),
        });
    }
    let magic = be_u32(label_bytes, 0, "label magic")?;
    if magic != IDX_LABELS {
        return Err(Error::Format { offset: 0, message: format!("label magic {magic:#010x}, expected {IDX_LABELS:#010x}") });
    }
    let n_labels = be_u32(label_bytes, 4, "label count")? as usize;
    if n_labels != count {
        return Err(Error::Format { offset: 4, message: format!("{n_labels} labels for {count} images") });
    }
    if label_bytes.len() < 8 + count {
        return Err(Error::Format { offset: label_bytes.len(), message: format!("label payload truncated: need {} bytes", 8 + count) });
    }
    let labels: Vec<usize> = label_bytes[8..8 + count].iter().map(|&b| b as usize).collect();
    if let Some(pos) = labels.iter().position(|&l| l > 9) {
        return Err(Error::Format { offset: 8 + pos, message: format!("label {} outside 0..=9", labels[pos]) });
    }
    let features = image_bytes[16..need].iter().map(|&b| f64::from(b) / 255.0).collect();
    Dataset::new(features, dim.max(1), labels, 10)
}

pub fn load_idx_files(images: &std::path::Path, labels: &std::path::Path) -> Result<Dataset> {
    load_idx(&std::fs::read(images)?, &std::fs::read(labels)?)
}

/// A seeded stand-in for a small grayscale image classification task.
///
/// Each class owns a prototype built from a few Gaussian blobs on a
/// `height × width` grid. A record blends its class prototype with a randomly
/// chosen distractor prototype, then adds pixel noise and clamps to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub height: usize,
    pub width: usize,
    pub train: usize,
    pub test: usize,
    /// Pixel noise standard deviation.
    pub noise: f64,
    /// Minimum weight of the true prototype in the blend (in `(0, 1]`).
    pub min_weight: f64,
    #[serde(default = "default_blobs")]
    pub blobs: usize,
    /// Relative class frequencies; balanced when absent.
    #[serde(default)]
    pub class_weights: Option<Vec<f64>>,
    pub seed: u64,
}

fn default_blobs() -> usize {
    3
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 10,
            height: 28,
            width: 28,
            train: 6000,
            test: 1000,
            noise: 0.3,
            min_weight: 0.5,
            blobs: 3,
            class_weights: None,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    pub fn dim(&self) -> usize {
        self.height * self.width
    }

    // Labels for `n` records: exact class quotas from the weights, in a
    // seeded order.
    fn labels(&self, n: usize, r: &mut rng::Stream) -> Vec<usize> {
        let Some(weights) = &self.class_weights else {
            return (0..n).map(|i| i % self.classes).collect();
        };
        let total: f64 = weights.iter().sum();
        let mut labels = Vec::with_capacity(n);
        let mut acc = 0.0;
        for (c, w) in weights.iter().enumerate() {
            let lo = (acc / total * n as f64).round() as usize;
            acc += w;
            let hi = (acc / total * n as f64).round() as usize;
            labels.extend(std::iter::repeat_n(c, hi - lo));
        }
        labels.shuffle(r);
        labels
    }

    /// Train and test sets.
    pub fn generate(&self) -> Result<(Dataset, Dataset)> {
        if self.classes < 2 || self.dim() == 0 || self.train == 0 || self.test == 0 {
            return Err(Error::Config("synthetic data needs ≥2 classes, a non-empty grid and non-empty splits".into()));
        }
        if !(self.min_weight > 0.0 && self.min_weight <= 1.0) || !(self.noise >= 0.0) {
            return Err(Error::Config("synthetic min_weight must be in (0, 1] and noise ≥ 0".into()));
        }
        if let Some(w) = &self.class_weights {
            if w.len() != self.classes || w.iter().any(|v| !(*v >= 0.0)) || !(w.iter().sum::<f64>() > 0.0) {
                return Err(Error::Config("class_weights needs one non-negative weight per class".into()));
            }
        }
        let (h, wd) = (self.height, self.width);
        let dim = self.dim();
        let mut r = rng::stream(rng::derive_seed(self.seed, "synthetic-prototypes", 0));
        let protos: Vec<Vec<f64>> = (0..self.classes)
            .map(|_| {
                let mut img = vec![0.0; dim];
                for _ in 0..self.blobs.max(1) {
                    let cx = r.random_range(0.0..wd as f64);
                    let cy = r.random_range(0.0..h as f64);
                    let rad = r.random_range(1.5..h.min(wd) as f64 / 4.0 + 1.5);
                    for y in 0..h {
                        for x in 0..wd {
                            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                            img[y * wd + x] += (-d2 / (2.0 * rad * rad)).exp();
                        }
                    }
                }
                img.iter_mut().for_each(|v| *v = v.min(1.0));
                img
            })
            .collect();
        let make = |n: usize, label: &str| {
            let mut r = rng::stream(rng::derive_seed(self.seed, label, 0));
            let labels = self.labels(n, &mut r);
            let mut features = Vec::with_capacity(n * dim);
            for &c in &labels {
                let other = r.random_range(0..self.classes);
                let a = r.random_range(self.min_weight..=1.0);
                for j in 0..dim {
                    let z: f64 = StandardNormal.sample(&mut r);
                    let v = a * protos[c][j] + (1.0 - a) * protos[other][j] + self.noise * z;
                    features.push(v.clamp(0.0, 1.0));
                }
            }
            Dataset::new(features, dim, labels, self.classes)
        };
        Ok((make(self.train, "synthetic-train")?, make(self.test, "synthetic-test")?))
    }
}
