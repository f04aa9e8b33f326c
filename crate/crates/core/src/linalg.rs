//! Small dense helpers on top of nalgebra: column-first vectorization,
//! column concatenation and norms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `vec(M)`: stacks the columns of `m` into one vector.
pub fn vectorize<T: Scalar>(m: &DMatrix<T>) -> DVector<T> {
    // nalgebra storage is column-major, so the raw slice is already vec(M).
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vectorize`].
pub fn unvectorize<T: Scalar>(v: &DVector<T>, rows: usize, cols: usize) -> Result<DMatrix<T>> {
    if v.len() != rows * cols {
        return Err(Error::invalid(format!(
            "cannot reshape vector of length {} into {rows}x{cols}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Horizontal concatenation `[B_1, ..., B_k]`. All blocks need the same row count.
pub fn hcat<T: Scalar>(blocks: &[&DMatrix<T>]) -> Result<DMatrix<T>> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    if let Some(bad) = blocks.iter().find(|b| b.nrows() != rows) {
        return Err(Error::invalid(format!(
            "row mismatch in concatenation: {} vs {rows}",
            bad.nrows()
        )));
    }
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (rows, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    Ok(out)
}

/// Spectral norm (largest singular value); zero for empty matrices.
pub fn spectral_norm<T: Scalar>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(T::zero(), |a, b| a.max(b))
}

pub fn all_finite<T: Scalar>(m: &DMatrix<T>) -> bool {
    m.iter().all(|x| x.is_finite())
}
