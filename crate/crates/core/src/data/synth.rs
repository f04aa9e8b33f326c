use nalgebra::DMatrix;
use rand::Rng;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{normals, stream, Purpose};
use crate::scalar::{lit, Scalar};

const MAX_ATTEMPTS: u64 = 64;

fn unit_columns<T: Scalar>(mut x: DMatrix<T>) -> DMatrix<T> {
    for mut col in x.column_iter_mut() {
        let norm = col.norm();
        if norm > T::zero() {
            col /= norm;
        }
    }
    x
}

fn gaussian_unit_columns<T: Scalar>(d: usize, n: usize, seed: u64, attempt: u64) -> DMatrix<T> {
    let mut rng = stream(seed, Purpose::SynthFeatures, attempt);
    unit_columns(DMatrix::from_vec(d, n, normals(&mut rng, d * n)))
}

/// Teacher data `Y = W* X` with unit-norm Gaussian columns in `X` and a
/// Gaussian `d_out × d_in` teacher. `X` is redrawn until its smallest
/// singular value exceeds `1e-8`.
pub fn synth_linear_dataset<T: Scalar>(
    d_in: usize,
    d_out: usize,
    n: usize,
    seed: u64,
) -> Result<(Dataset<T>, DMatrix<T>)> {
    if d_in == 0 || d_out == 0 || n == 0 {
        return Err(Error::invalid("synthetic dimensions must be positive"));
    }
    if n < d_in {
        return Err(Error::invalid(format!(
            "n = {n} samples cannot give X full row rank d_in = {d_in}"
        )));
    }
    let mut teacher_rng = stream(seed, Purpose::SynthTeacher, 0);
    let w_star = DMatrix::from_vec(d_out, d_in, normals(&mut teacher_rng, d_out * d_in));
    for attempt in 0..MAX_ATTEMPTS {
        let x: DMatrix<T> = gaussian_unit_columns(d_in, n, seed, attempt);
        let sigma_min = x
            .clone()
            .singular_values()
            .iter()
            .copied()
            .fold(T::max_value().expect("bounded"), |a, b| a.min(b));
        if sigma_min > lit(1e-8) {
            let y = &w_star * &x;
            return Ok((Dataset::unlabeled(x, y)?, w_star));
        }
    }
    Err(Error::invalid("could not draw a full-rank feature matrix"))
}

/// Unit-norm Gaussian inputs with targets uniform on `[−1, 1]`, for the
/// scalar-output ReLU model.
pub fn synth_relu_dataset<T: Scalar>(d: usize, n: usize, seed: u64) -> Result<Dataset<T>> {
    if d == 0 || n == 0 {
        return Err(Error::invalid("synthetic dimensions must be positive"));
    }
    let x = gaussian_unit_columns(d, n, seed, 0);
    let mut rng = stream(seed, Purpose::SynthTargets, 0);
    let y = DMatrix::from_fn(1, n, |_, _| lit::<T>(rng.random_range(-1.0..=1.0)));
    Dataset::unlabeled(x, y)
}
