use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{unvectorize, vectorize};
use crate::scalar::{lit, Scalar};

fn check_shapes<T: Scalar>(u: &DMatrix<T>, y: &DMatrix<T>) -> Result<()> {
    if u.shape() != y.shape() {
        return Err(Error::invalid(format!(
            "prediction shape {:?} does not match target shape {:?}",
            u.shape(),
            y.shape()
        )));
    }
    Ok(())
}

/// `½ Σ (U − Y)²` over all entries, without averaging over clients.
pub fn square_loss<T: Scalar>(u: &DMatrix<T>, y: &DMatrix<T>) -> Result<T> {
    check_shapes(u, y)?;
    let sum = u
        .iter()
        .zip(y.iter())
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
    Ok(lit::<T>(0.5) * sum)
}

/// Column-first flattening of `U − Y`.
pub fn vec_residual<T: Scalar>(u: &DMatrix<T>, y: &DMatrix<T>) -> Result<DVector<T>> {
    check_shapes(u, y)?;
    Ok(vectorize(&(u - y)))
}

pub fn unvec_residual<T: Scalar>(v: &DVector<T>, rows: usize, cols: usize) -> Result<DMatrix<T>> {
    unvectorize(v, rows, cols)
}
