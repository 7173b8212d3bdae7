//! Datasets and the synthetic generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    SyntheticSin,
    SyntheticLinear,
    IdxImage,
    GaussianBlobs,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Regression targets, one row per sample.
    Values(Matrix),
    /// Class indices in `0..classes`.
    Classes { labels: Vec<usize>, classes: usize },
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(m) => m.rows(),
            Targets::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, indices: &[usize]) -> Targets {
        match self {
            Targets::Values(m) => Targets::Values(m.select_rows(indices)),
            Targets::Classes { labels, classes } => {
                Targets::Classes { labels: indices.iter().map(|&i| labels[i]).collect(), classes: *classes }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Targets,
    pub provenance: Provenance,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Targets, provenance: Provenance, seed: Option<u64>) -> Result<Self, ExperimentError> {
        if targets.len() != inputs.rows() {
            return Err(ExperimentError::InvalidDataset(format!(
                "{} input rows but {} targets",
                inputs.rows(),
                targets.len()
            )));
        }
        if !inputs.is_finite() {
            return Err(ExperimentError::InvalidDataset("inputs contain non-finite values".into()));
        }
        if let Targets::Classes { labels, classes } = &targets {
            if let Some(bad) = labels.iter().find(|&&l| l >= *classes) {
                return Err(ExperimentError::InvalidDataset(format!("label {bad} outside 0..{classes}")));
            }
        }
        Ok(Self { inputs, targets, provenance, seed })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select_rows(indices),
            targets: self.targets.select(indices),
            provenance: self.provenance,
            seed: self.seed,
        }
    }

    /// Splits off the first `n` rows; the rest form the second part.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let head: Vec<usize> = (0..n.min(self.len())).collect();
        let tail: Vec<usize> = (n.min(self.len())..self.len()).collect();
        (self.select(&head), self.select(&tail))
    }
}

fn gaussian_inputs(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Matrix {
    let data = (0..n * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Matrix::from_raw(n, dim, data)
}

/// `X ~ N(0, 1)^{n×2}`, `y_i = sin(X_i1 + X_i2) + noise_sd · ε_i`.
pub fn gen_sin_dataset(n: usize, seed: u64, noise_sd: f64) -> Result<Dataset, ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::InvalidDataset("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = gaussian_inputs(&mut rng, n, 2);
    let targets = (0..n)
        .map(|i| {
            let row = inputs.row(i);
            let noise = if noise_sd > 0.0 { noise_sd * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
            (row[0] + row[1]).sin() + noise
        })
        .collect();
    Dataset::new(inputs, Targets::Values(Matrix::from_raw(n, 1, targets)), Provenance::SyntheticSin, Some(seed))
}

/// `X ~ N(0, 1)^{n×2}`, `y = 2x`.
pub fn gen_linear_dataset(n: usize, seed: u64) -> Result<Dataset, ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::InvalidDataset("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = gaussian_inputs(&mut rng, n, 2);
    let targets = inputs.scale(2.0);
    Dataset::new(inputs, Targets::Values(targets), Provenance::SyntheticLinear, Some(seed))
}

/// Two overlapping Gaussian classes in `dim` dimensions: class `c` has mean
/// `(2c − 1) · separation / √dim` in every coordinate and unit variance.
/// Labels alternate so any even-length prefix is exactly balanced.
pub fn gen_blobs_dataset(n: usize, dim: usize, separation: f64, seed: u64) -> Result<Dataset, ExperimentError> {
    if n == 0 || dim == 0 {
        return Err(ExperimentError::InvalidDataset("n and dim must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = separation / (dim as f64).sqrt();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let mean = if label == 1 { shift } else { -shift };
        data.extend((0..dim).map(|_| mean + rng.sample::<f64, _>(StandardNormal)));
        labels.push(label);
    }
    Dataset::new(
        Matrix::from_raw(n, dim, data),
        Targets::Classes { labels, classes: 2 },
        Provenance::GaussianBlobs,
        Some(seed),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sin_targets_follow_formula() {
        let d = gen_sin_dataset(50, 1, 0.0).unwrap();
        let Targets::Values(y) = &d.targets else { panic!() };
        for i in 0..50 {
            let x = d.inputs.row(i);
            assert_eq!(y.get(i, 0), (x[0] + x[1]).sin());
            assert!(y.get(i, 0).abs() <= 1.0);
        }
        assert_eq!(d, gen_sin_dataset(50, 1, 0.0).unwrap());
        assert_ne!(d, gen_sin_dataset(50, 2, 0.0).unwrap());
    }

    #[test]
    fn linear_targets_are_twice_inputs() {
        let d = gen_linear_dataset(20, 4).unwrap();
        let Targets::Values(y) = &d.targets else { panic!() };
        assert_eq!(y, &d.inputs.scale(2.0));
        assert_eq!(y.shape(), (20, 2));
    }

    #[test]
    fn blobs_are_balanced() {
        let d = gen_blobs_dataset(10, 3, 1.0, 0).unwrap();
        let Targets::Classes { labels, .. } = &d.targets else { panic!() };
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 5);
    }

    #[test]
    fn rejects_mismatched_rows() {
        let err = Dataset::new(Matrix::zeros(3, 2), Targets::Values(Matrix::zeros(2, 1)), Provenance::SyntheticSin, None);
        assert!(err.is_err());
        let err = Dataset::new(
            Matrix::zeros(2, 2),
            Targets::Classes { labels: vec![0, 3], classes: 2 },
            Provenance::IdxImage,
            None,
        );
        assert!(err.is_err());
    }
}
