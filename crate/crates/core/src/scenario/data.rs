//! Labeled sample sets and the loaders that produce them.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::rng;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// A dense labeled dataset: `len()` rows of `dim` features.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    features: Vec<f64>,
    labels: Vec<u32>,
    dim: usize,
    num_classes: usize,
}

impl SampleSet {
    pub fn new(features: Vec<f64>, labels: Vec<u32>, dim: usize) -> Result<Self, ScenarioError> {
        if dim == 0 {
            return Err(ScenarioError::Data("feature dimension must be positive".into()));
        }
        if features.len() != labels.len() * dim {
            return Err(ScenarioError::Data(format!(
                "feature buffer has {} values, expected {} rows x {dim}",
                features.len(),
                labels.len()
            )));
        }
        let num_classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
        Ok(Self {
            features,
            labels,
            dim,
            num_classes,
        })
    }

    /// Declares the class count explicitly (useful when a split lacks some labels).
    pub fn with_num_classes(mut self, num_classes: usize) -> Self {
        self.num_classes = self.num_classes.max(num_classes);
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Copies the selected rows into a new set.
    pub fn subset(&self, indices: &[usize]) -> SampleSet {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.features(i));
            labels.push(self.labels[i]);
        }
        SampleSet {
            features,
            labels,
            dim: self.dim,
            num_classes: self.num_classes,
        }
    }
}

/// Parameters of the built-in Gaussian-mixture generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub classes: usize,
    pub dim: usize,
    /// Class means are drawn as `N(0, mean_scale^2)` per coordinate unless given.
    #[serde(default = "default_mean_scale")]
    pub mean_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_means: Option<Vec<Vec<f64>>>,
    pub noise_sigma: f64,
    pub seed: u64,
}

fn default_mean_scale() -> f64 {
    1.0
}

impl GaussianMixture {
    pub fn means(&self) -> Result<Vec<Vec<f64>>, ScenarioError> {
        if let Some(means) = &self.class_means {
            if means.len() != self.classes || means.iter().any(|m| m.len() != self.dim) {
                return Err(ScenarioError::Data(format!(
                    "class_means must be {} vectors of length {}",
                    self.classes, self.dim
                )));
            }
            return Ok(means.clone());
        }
        let mut rng = rng::stream(self.seed, &[rng::tag::SYNTHETIC, 0]);
        let normal = Normal::new(0.0, self.mean_scale)
            .map_err(|e| ScenarioError::Data(format!("mean_scale: {e}")))?;
        Ok((0..self.classes)
            .map(|_| (0..self.dim).map(|_| normal.sample(&mut rng)).collect())
            .collect())
    }

    /// Draws `n` samples with balanced labels (`i mod classes`), then shuffles.
    /// `split` separates train and test streams.
    pub fn generate(&self, n: usize, split: u64) -> Result<SampleSet, ScenarioError> {
        if self.classes == 0 || self.dim == 0 || self.noise_sigma < 0.0 {
            return Err(ScenarioError::Data(
                "synthetic data needs classes > 0, dim > 0, noise_sigma >= 0".into(),
            ));
        }
        let means = self.means()?;
        let mut rng = rng::stream(self.seed, &[rng::tag::SYNTHETIC, 1 + split]);
        let noise = Normal::new(0.0, self.noise_sigma.max(0.0))
            .map_err(|e| ScenarioError::Data(format!("noise_sigma: {e}")))?;
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut features = Vec::with_capacity(n * self.dim);
        let mut labels = Vec::with_capacity(n);
        for &slot in &order {
            let class = slot % self.classes;
            labels.push(class as u32);
            for &m in &means[class] {
                features.push(m + noise.sample(&mut rng));
            }
        }
        Ok(SampleSet::new(features, labels, self.dim)?.with_num_classes(self.classes))
    }
}

fn read_u32_be(bytes: &[u8], at: usize) -> Result<u32, ScenarioError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| ScenarioError::Data("truncated IDX header".into()))
}

/// Reads an IDX image/label pair. Pixel bytes are scaled to `[0, 1]`.
pub fn load_idx(images: &Path, labels: &Path) -> Result<SampleSet, ScenarioError> {
    let img = fs::read(images).map_err(|e| ScenarioError::io(images, e))?;
    let lab = fs::read(labels).map_err(|e| ScenarioError::io(labels, e))?;
    parse_idx(&img, &lab)
}

pub fn parse_idx(img: &[u8], lab: &[u8]) -> Result<SampleSet, ScenarioError> {
    if read_u32_be(img, 0)? != IDX_IMAGES_MAGIC {
        return Err(ScenarioError::Data("bad IDX image magic".into()));
    }
    if read_u32_be(lab, 0)? != IDX_LABELS_MAGIC {
        return Err(ScenarioError::Data("bad IDX label magic".into()));
    }
    let n = read_u32_be(img, 4)? as usize;
    let rows = read_u32_be(img, 8)? as usize;
    let cols = read_u32_be(img, 12)? as usize;
    let n_labels = read_u32_be(lab, 4)? as usize;
    if n != n_labels {
        return Err(ScenarioError::Data(format!(
            "IDX image count {n} != label count {n_labels}"
        )));
    }
    let dim = rows * cols;
    let pixels = img
        .get(16..16 + n * dim)
        .ok_or_else(|| ScenarioError::Data("truncated IDX image payload".into()))?;
    let label_bytes = lab
        .get(8..8 + n)
        .ok_or_else(|| ScenarioError::Data("truncated IDX label payload".into()))?;
    let features = pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
    let labels = label_bytes.iter().map(|&l| u32::from(l)).collect();
    SampleSet::new(features, labels, dim)
}

/// Reads `label,f1,...,fn` rows. Blank lines and lines starting with `#` are skipped.
pub fn load_csv(path: &Path) -> Result<SampleSet, ScenarioError> {
    let file = fs::File::open(path).map_err(|e| ScenarioError::io(path, e))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| ScenarioError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',');
        let bad = |what: &str| {
            ScenarioError::Data(format!("{}:{}: {what}", path.display(), lineno + 1))
        };
        let label: u32 = fields
            .next()
            .and_then(|f| f.trim().parse().ok())
            .ok_or_else(|| bad("label is not a non-negative integer"))?;
        let row: Vec<f64> = fields
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad("feature is not a number"))?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => return Err(bad("inconsistent feature count")),
            _ => {}
        }
        labels.push(label);
        features.extend(row);
    }
    SampleSet::new(features, labels, dim.unwrap_or(0))
}
