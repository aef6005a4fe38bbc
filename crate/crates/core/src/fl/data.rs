//! Synthetic classification data partitioned across devices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Labeled feature rows, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    n_features: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Samples {
    pub fn new(n_features: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if features.len() != n_features * labels.len() {
            return Err(Error::invalid(format!(
                "{} feature values for {} rows of width {n_features}",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("features must be finite"));
        }
        Ok(Self {
            n_features,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Per-device training sets plus a shared test set.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub devices: Vec<Samples>,
    pub test: Samples,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(devices: Vec<Samples>, test: Samples, n_classes: usize) -> Result<Self> {
        if devices.is_empty() {
            return Err(Error::invalid("at least one device dataset is required"));
        }
        if n_classes < 2 {
            return Err(Error::invalid("at least two classes are required"));
        }
        let d = test.n_features();
        for (k, dev) in devices.iter().enumerate() {
            if dev.is_empty() {
                return Err(Error::invalid(format!("device {k} holds no samples")));
            }
            if dev.n_features() != d {
                return Err(Error::invalid(format!("device {k} has a different feature width")));
            }
        }
        let all = devices.iter().chain(std::iter::once(&test));
        for s in all {
            if s.labels().iter().any(|&y| y >= n_classes) {
                return Err(Error::invalid("label out of range"));
            }
        }
        Ok(Self {
            devices,
            test,
            n_classes,
        })
    }

    pub fn n_devices(&self) -> usize {
        self.devices.len()
    }

    pub fn n_features(&self) -> usize {
        self.test.n_features()
    }

    pub fn total_samples(&self) -> usize {
        self.devices.iter().map(Samples::len).sum()
    }

    /// `r_k = A_k / A`.
    pub fn weights(&self) -> Vec<f64> {
        let total = self.total_samples() as f64;
        self.devices.iter().map(|d| d.len() as f64 / total).collect()
    }
}

/// Isotropic Gaussian class clusters with random centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlobSpec {
    pub n_features: usize,
    pub n_classes: usize,
    pub samples_per_device: usize,
    pub test_samples: usize,
    /// Standard deviation of each class-center coordinate.
    pub separation: f64,
    pub noise_std: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self {
            n_features: 16,
            n_classes: 4,
            samples_per_device: 120,
            test_samples: 1000,
            separation: 0.5,
            noise_std: 1.0,
        }
    }
}

fn draw_samples(centers: &[Vec<f64>], n: usize, noise_std: f64, rng: &mut SeededRng) -> Result<Samples> {
    let d = centers[0].len();
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng.index(centers.len());
        features.extend(centers[y].iter().map(|&c| c + noise_std * rng.normal()));
        labels.push(y);
    }
    Samples::new(d, features, labels)
}

/// Draws class centers, then evenly sized device datasets and a test set, all
/// from one generator.
pub fn gaussian_blobs(spec: &BlobSpec, n_devices: usize, rng: &mut SeededRng) -> Result<Dataset> {
    if spec.n_features == 0 || spec.samples_per_device == 0 || spec.test_samples == 0 {
        return Err(Error::invalid("blob sizes must be positive"));
    }
    if !(spec.separation > 0.0) || !(spec.noise_std >= 0.0) {
        return Err(Error::invalid("separation must be positive and noise nonnegative"));
    }
    if n_devices == 0 {
        return Err(Error::invalid("at least one device is required"));
    }
    let centers: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| (0..spec.n_features).map(|_| spec.separation * rng.normal()).collect())
        .collect();
    let devices = (0..n_devices)
        .map(|_| draw_samples(&centers, spec.samples_per_device, spec.noise_std, rng))
        .collect::<Result<Vec<_>>>()?;
    let test = draw_samples(&centers, spec.test_samples, spec.noise_std, rng)?;
    Dataset::new(devices, test, spec.n_classes)
}
