use nalgebra::{DMatrix, DVector};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{normals, stream, Purpose};
use crate::scalar::{lit, Scalar};

/// Pairs closer than this angle (radians) count as parallel.
pub const PARALLEL_ANGLE: f64 = 1e-6;
/// Standard deviation of the noise added to a parallel sample.
pub const PERTURBATION_SCALE: f64 = 1e-3;

const MAX_RETRIES: u64 = 16;

#[derive(Debug, Clone)]
pub struct Preprocessed<T: Scalar> {
    pub dataset: Dataset<T>,
    /// Samples that were perturbed, ascending.
    pub perturbed: Vec<usize>,
}

/// Angle between unit vectors, `2·atan2(‖u − v‖, ‖u + v‖)`, accurate near 0.
pub(crate) fn unit_angle<T: Scalar>(u: &DVector<T>, v: &DVector<T>) -> T {
    let two = lit::<T>(2.0);
    two * (u - v).norm().atan2((u + v).norm())
}

fn parallel_to_earlier<T: Scalar>(x: &DMatrix<T>, j: usize) -> bool {
    let v = x.column(j).into_owned();
    let tol = lit::<T>(PARALLEL_ANGLE);
    (0..j).any(|i| unit_angle(&x.column(i).into_owned(), &v) < tol)
}

/// Scales every column to unit norm, then perturbs each sample that is
/// parallel (same direction within [`PARALLEL_ANGLE`]) to an earlier one by
/// deterministic Gaussian noise of scale [`PERTURBATION_SCALE`] and
/// renormalizes it.
pub fn preprocess_unit_norm<T: Scalar>(ds: &Dataset<T>) -> Result<Preprocessed<T>> {
    let mut x = ds.features().clone();
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(Error::invalid(format!("sample {j} has zero or non-finite norm")));
        }
        col /= norm;
    }
    let d = x.nrows();
    let scale = lit::<T>(PERTURBATION_SCALE);
    let mut perturbed = Vec::new();
    for j in 1..x.ncols() {
        if !parallel_to_earlier(&x, j) {
            continue;
        }
        let mut attempt = 0;
        loop {
            let mut rng = stream(0, Purpose::Perturbation, ((j as u64) << 8) | attempt);
            let noise = DVector::from_vec(normals::<T, _>(&mut rng, d)) * scale;
            let mut col = x.column(j) + noise;
            let norm = col.norm();
            col /= norm;
            x.set_column(j, &col);
            attempt += 1;
            if !parallel_to_earlier(&x, j) {
                break;
            }
            if attempt >= MAX_RETRIES {
                return Err(Error::invalid(format!("could not separate sample {j}")));
            }
        }
        perturbed.push(j);
    }
    Ok(Preprocessed { dataset: ds.with_features(x)?, perturbed })
}
