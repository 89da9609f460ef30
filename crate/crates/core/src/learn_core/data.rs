use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{MelError, Result};

/// Row-major feature matrix plus targets (class labels are stored as `0.0, 1.0, ...`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub targets: Vec<f64>,
    pub num_features: usize,
    /// `Some(n)` for an n-class classification set.
    pub num_classes: Option<usize>,
}

impl Dataset {
    pub fn new(features: Vec<f64>, targets: Vec<f64>, num_features: usize, num_classes: Option<usize>) -> Result<Self> {
        if num_features == 0 || features.len() != targets.len() * num_features {
            return Err(MelError::InvalidInput(format!(
                "{} feature values do not form {} rows of {} features",
                features.len(),
                targets.len(),
                num_features
            )));
        }
        if features.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(MelError::InvalidInput("dataset contains non-finite values".into()));
        }
        if let Some(c) = num_classes {
            if targets.iter().any(|&t| t < 0.0 || t.fract() != 0.0 || t as usize >= c) {
                return Err(MelError::InvalidInput(format!("labels must be integers in 0..{c}")));
            }
        }
        Ok(Self { features, targets, num_features, num_classes })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.targets[i] as usize
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(idx.len() * self.num_features);
        let mut targets = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        Dataset { features, targets, num_features: self.num_features, num_classes: self.num_classes }
    }

    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or_else(|| MelError::InvalidInput("nothing to concatenate".into()))?;
        let mut out = Dataset {
            features: Vec::new(),
            targets: Vec::new(),
            num_features: first.num_features,
            num_classes: first.num_classes,
        };
        for p in parts {
            if p.num_features != first.num_features || p.num_classes != first.num_classes {
                return Err(MelError::Contract("datasets disagree on shape".into()));
            }
            out.features.extend_from_slice(&p.features);
            out.targets.extend_from_slice(&p.targets);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Regression,
    Classification,
}

/// Synthetic data generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub features: usize,
    /// Classification only.
    pub classes: usize,
    /// Target noise (regression) or within-class spread (classification).
    pub noise: f64,
    /// Distance scale between class centres.
    pub separation: f64,
    /// Held-out samples for accuracy.
    pub validation: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self { kind: DatasetKind::Classification, features: 10, classes: 2, noise: 1.0, separation: 1.0, validation: 500 }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.features == 0 || self.features > 50 {
            return Err(MelError::InvalidInput(format!("dataset.features must be in 1..=50, got {}", self.features)));
        }
        if self.kind == DatasetKind::Classification && self.classes < 2 {
            return Err(MelError::InvalidInput("dataset.classes must be >= 2".into()));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) || !(self.separation.is_finite() && self.separation >= 0.0) {
            return Err(MelError::InvalidInput("dataset.noise and dataset.separation must be >= 0".into()));
        }
        Ok(())
    }
}

/// `y = w^T x + noise` with standard normal features and weights.
pub fn synthetic_regression<R: Rng + ?Sized>(rng: &mut R, n: usize, f: usize, noise: f64) -> (Dataset, Vec<f64>) {
    let w: Vec<f64> = (0..f).map(|_| StandardNormal.sample(rng)).collect();
    let ds = regression_from(rng, n, &w, noise);
    (ds, w)
}

/// Fresh samples for known true weights.
pub fn regression_from<R: Rng + ?Sized>(rng: &mut R, n: usize, w: &[f64], noise: f64) -> Dataset {
    let f = w.len();
    let mut features = Vec::with_capacity(n * f);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..f).map(|_| StandardNormal.sample(rng)).collect();
        let eps: f64 = StandardNormal.sample(rng);
        targets.push(x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + noise * eps);
        features.extend(x);
    }
    Dataset { features, targets, num_features: f, num_classes: None }
}

/// Gaussian class centres for [`classification_from`].
pub fn class_centres<R: Rng + ?Sized>(rng: &mut R, classes: usize, f: usize, separation: f64) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, separation).expect("separation >= 0");
    (0..classes).map(|_| (0..f).map(|_| normal.sample(rng)).collect()).collect()
}

/// Balanced-in-expectation blobs around the given centres.
pub fn classification_from<R: Rng + ?Sized>(rng: &mut R, n: usize, centres: &[Vec<f64>], spread: f64) -> Dataset {
    let f = centres[0].len();
    let mut features = Vec::with_capacity(n * f);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..centres.len());
        for &m in &centres[c] {
            let z: f64 = StandardNormal.sample(rng);
            features.push(m + spread * z);
        }
        targets.push(c as f64);
    }
    Dataset { features, targets, num_features: f, num_classes: Some(centres.len()) }
}

pub fn synthetic_classification<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    f: usize,
    classes: usize,
    separation: f64,
    spread: f64,
) -> Dataset {
    let centres = class_centres(rng, classes, f, separation);
    classification_from(rng, n, &centres, spread)
}

/// Generates `(train pools, validation set)` from one distribution: `pools`
/// independent training pools of `n` samples each.
pub fn generate<R: Rng + ?Sized>(rng: &mut R, spec: &DatasetSpec, n: usize, pools: usize) -> (Vec<Dataset>, Dataset) {
    match spec.kind {
        DatasetKind::Regression => {
            let w: Vec<f64> = (0..spec.features).map(|_| StandardNormal.sample(rng)).collect();
            let train = (0..pools).map(|_| regression_from(rng, n, &w, spec.noise)).collect();
            let val = regression_from(rng, spec.validation, &w, spec.noise);
            (train, val)
        }
        DatasetKind::Classification => {
            let centres = class_centres(rng, spec.classes, spec.features, spec.separation);
            let train = (0..pools).map(|_| classification_from(rng, n, &centres, spec.noise)).collect();
            let val = classification_from(rng, spec.validation, &centres, spec.noise);
            (train, val)
        }
    }
}
