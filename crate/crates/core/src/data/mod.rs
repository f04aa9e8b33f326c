//! Datasets, IDX ingestion, synthetic teacher data, unit-norm preprocessing
//! and client partitioning.

mod idx;
mod partition;
mod preprocess;
mod synth;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::models::LabeledBatch;
use crate::scalar::{count, Scalar};

pub use idx::{
    dataset_from_idx, decode_images, decode_labels, encode_images, encode_labels, load_idx,
    IdxImages, IMAGE_MAGIC, LABEL_MAGIC,
};
pub use partition::{partition_noniid, partition_round_robin, ClientPartition};
pub use preprocess::{preprocess_unit_norm, Preprocessed, PARALLEL_ANGLE, PERTURBATION_SCALE};
pub use synth::{synth_linear_dataset, synth_relu_dataset};

/// Features `X` (`d × n`, samples as columns), targets `Y` (`d_out × n`) and
/// optional integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    features: DMatrix<T>,
    targets: DMatrix<T>,
    labels: Option<Vec<usize>>,
    num_classes: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        features: DMatrix<T>,
        targets: DMatrix<T>,
        labels: Option<Vec<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.ncols() != targets.ncols() {
            return Err(Error::invalid(format!(
                "{} feature columns but {} target columns",
                features.ncols(),
                targets.ncols()
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != features.ncols() {
                return Err(Error::invalid(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    features.ncols()
                )));
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
                return Err(Error::invalid(format!(
                    "label {bad} outside [0, {num_classes})"
                )));
            }
        }
        Ok(Self { features, targets, labels, num_classes })
    }

    /// Unlabeled regression data.
    pub fn unlabeled(features: DMatrix<T>, targets: DMatrix<T>) -> Result<Self> {
        Self::new(features, targets, None, 0)
    }

    pub fn features(&self) -> &DMatrix<T> {
        &self.features
    }

    pub fn targets(&self) -> &DMatrix<T> {
        &self.targets
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.nrows()
    }

    /// Samples at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!(
                "sample index {bad} out of range for {} samples",
                self.len()
            )));
        }
        Ok(Self {
            features: self.features.select_columns(indices),
            targets: self.targets.select_columns(indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            num_classes: self.num_classes,
        })
    }

    /// The first `n` samples (all of them when `n` exceeds the size).
    pub fn head(&self, n: usize) -> Self {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx).expect("indices in range")
    }

    /// Same samples with new features; labels and targets carried over.
    pub fn with_features(&self, features: DMatrix<T>) -> Result<Self> {
        Self::new(features, self.targets.clone(), self.labels.clone(), self.num_classes)
    }

    /// Replaces one-hot targets by the single row `label / (C − 1)`, the
    /// encoding used for the scalar-output ReLU model.
    pub fn with_scalar_targets(&self) -> Result<Self> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::invalid("scalar targets need class labels"))?;
        let denom = count::<T>(self.num_classes.saturating_sub(1).max(1));
        let row = DMatrix::from_iterator(1, labels.len(), labels.iter().map(|&l| count::<T>(l) / denom));
        Self::new(self.features.clone(), row, self.labels.clone(), self.num_classes)
    }

    pub fn batch(&self) -> LabeledBatch<T> {
        LabeledBatch::new(self.features.clone(), self.targets.clone()).expect("column counts checked")
    }
}
