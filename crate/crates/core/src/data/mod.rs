//! Datasets, standardization and minibatch sampling.

mod idx;
mod sampler;

pub use idx::{
    load_idx, parse_idx_images, parse_idx_labels, read_idx_images, read_idx_labels,
    write_idx_images, write_idx_labels, IdxImages,
};
pub use sampler::{sample_batch, BatchSampler};

use serde::{Deserialize, Serialize};

use crate::numkit::{Matrix, SeededRng};
use crate::{Error, Result};

/// How raw inputs are centred and scaled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Standardization {
    /// One mean and one standard deviation over every entry.
    #[default]
    Global,
    /// Per input column; zero-variance columns are only centred.
    PerFeature,
    None,
}

impl Standardization {
    pub fn apply(self, inputs: &mut Matrix) {
        let (n, d) = inputs.shape();
        if n == 0 || d == 0 {
            return;
        }
        match self {
            Standardization::None => {}
            Standardization::Global => {
                let data = inputs.as_mut_slice();
                let count = data.len() as f64;
                let mean = data.iter().sum::<f64>() / count;
                let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / count;
                let sd = var.sqrt();
                let scale = if sd > 0.0 { 1.0 / sd } else { 1.0 };
                data.iter_mut().for_each(|x| *x = (*x - mean) * scale);
            }
            Standardization::PerFeature => {
                for j in 0..d {
                    let mean = (0..n).map(|i| inputs[(i, j)]).sum::<f64>() / n as f64;
                    let var =
                        (0..n).map(|i| (inputs[(i, j)] - mean).powi(2)).sum::<f64>() / n as f64;
                    let sd = var.sqrt();
                    let scale = if sd > 0.0 { 1.0 / sd } else { 1.0 };
                    for i in 0..n {
                        inputs[(i, j)] = (inputs[(i, j)] - mean) * scale;
                    }
                }
            }
        }
    }
}

/// Standardized inputs with one-hot targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Matrix,
    pub labels: Vec<usize>,
    pub name: String,
    pub source_seed: Option<u64>,
}

impl Dataset {
    pub fn new(
        inputs: Matrix,
        labels: Vec<usize>,
        n_out: usize,
        name: impl Into<String>,
    ) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} input rows but {} labels",
                inputs.rows(),
                labels.len()
            )));
        }
        let targets = one_hot(&labels, n_out)?;
        Ok(Self {
            inputs,
            targets,
            labels,
            name: name.into(),
            source_seed: None,
        })
    }

    /// Regression data with arbitrary targets and no class labels.
    pub fn from_targets(inputs: Matrix, targets: Matrix, name: impl Into<String>) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::Shape(format!(
                "{} input rows but {} target rows",
                inputs.rows(),
                targets.rows()
            )));
        }
        Ok(Self {
            inputs,
            targets,
            labels: Vec::new(),
            name: name.into(),
            source_seed: None,
        })
    }

    /// The single `uv`-model datum `(x, y) = (1, 0)`.
    pub fn uv_datum() -> Self {
        Self::from_targets(Matrix::from_rows(&[[1.0]]), Matrix::zeros(1, 1), "uv").expect("1x1")
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_in(&self) -> usize {
        self.inputs.cols()
    }

    pub fn n_out(&self) -> usize {
        self.targets.cols()
    }

    /// The rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Batch> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Shape(format!(
                "index {bad} out of range for {} examples",
                self.len()
            )));
        }
        let gather = |m: &Matrix| {
            let mut data = Vec::with_capacity(indices.len() * m.cols());
            for &i in indices {
                data.extend_from_slice(m.row(i));
            }
            Matrix::from_vec(indices.len(), m.cols(), data).expect("gathered shape")
        };
        Ok(Batch {
            inputs: gather(&self.inputs),
            targets: gather(&self.targets),
            indices: indices.to_vec(),
        })
    }

    /// Every example as one batch, in dataset order.
    pub fn full_batch(&self) -> Batch {
        Batch {
            inputs: self.inputs.clone(),
            targets: self.targets.clone(),
            indices: (0..self.len()).collect(),
        }
    }
}

/// A set of examples fed to one loss evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Matrix,
    /// Dataset rows the batch was drawn from.
    pub indices: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Matrix, targets: Matrix) -> Result<Self> {
        if inputs.rows() != targets.rows() || inputs.rows() == 0 {
            return Err(Error::Shape(format!(
                "batch needs matching positive row counts, got {} inputs and {} targets",
                inputs.rows(),
                targets.rows()
            )));
        }
        let indices = (0..inputs.rows()).collect();
        Ok(Self {
            inputs,
            targets,
            indices,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn one_hot(labels: &[usize], n_out: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(labels.len(), n_out);
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_out {
            return Err(Error::Shape(format!(
                "label {l} does not fit {n_out} outputs"
            )));
        }
        m[(i, l)] = 1.0;
    }
    Ok(m)
}

/// Balanced Gaussian classes.
///
/// Class means are random directions scaled to norm `sqrt(2)`, so distinct
/// means sit about 2 apart; each example adds unit-covariance noise.
/// Example `i` belongs to class `i % classes`.
pub fn synthetic_dataset(
    n: usize,
    n_in: usize,
    classes: usize,
    standardization: Standardization,
    rng: &mut SeededRng,
) -> Result<Dataset> {
    if classes == 0 || n_in == 0 {
        return Err(Error::Config(
            "synthetic data needs positive n_in and classes".into(),
        ));
    }
    if n < classes {
        return Err(Error::Config(format!(
            "{n} examples cannot cover {classes} classes"
        )));
    }
    let seed = rng.seed();
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            rng.unit_vector(n_in)
                .into_iter()
                .map(|x| x * 2f64.sqrt())
                .collect()
        })
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
    let mut inputs = Matrix::zeros(n, n_in);
    for (i, &l) in labels.iter().enumerate() {
        for (x, m) in inputs.row_mut(i).iter_mut().zip(&means[l]) {
            *x = m + rng.normal();
        }
    }
    standardization.apply(&mut inputs);
    let mut ds = Dataset::new(inputs, labels, classes, "synthetic")?;
    ds.source_seed = Some(seed);
    Ok(ds)
}
