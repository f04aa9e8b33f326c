use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::scalar::{lit, Scalar};

/// Largest allowed `max|M − Mᵀ|`, relative to `max(1, max|M|)`, for the
/// eigenvalue path.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Extreme eigenvalues (symmetric input only) and singular values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramSpectrum<T: Scalar> {
    pub rows: usize,
    pub cols: usize,
    pub lambda_min: Option<T>,
    pub lambda_max: Option<T>,
    pub sigma_min: T,
    pub sigma_max: T,
    /// Ascending; present when the input was symmetric.
    pub eigenvalues: Option<Vec<T>>,
    /// Descending, `min(rows, cols)` of them.
    pub singular_values: Vec<T>,
}

impl<T: Scalar> GramSpectrum<T> {
    /// Number of singular values above `tol · σ_max`.
    pub fn rank(&self, tol: T) -> usize {
        let cut = tol * self.sigma_max;
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }

    /// The `r`-th largest eigenvalue: the least eigenvalue on a rank-`r`
    /// range.
    pub fn lambda_at_rank(&self, r: usize) -> Option<T> {
        let ev = self.eigenvalues.as_ref()?;
        if r == 0 || r > ev.len() {
            return None;
        }
        Some(ev[ev.len() - r])
    }

    /// The `r`-th largest singular value.
    pub fn sigma_at_rank(&self, r: usize) -> Option<T> {
        if r == 0 {
            return None;
        }
        self.singular_values.get(r - 1).copied()
    }
}

fn asymmetry<T: Scalar>(m: &DMatrix<T>) -> T {
    let scale = m.iter().fold(T::one(), |a, &b| a.max(b.abs()));
    (m - m.transpose()).iter().fold(T::zero(), |a, &b| a.max(b.abs())) / scale
}

fn symmetric_eigenvalues<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    let sym = (m + m.transpose()) * lit::<T>(0.5);
    let mut ev: Vec<T> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    ev
}

fn singular_values<T: Scalar>(m: &DMatrix<T>) -> Vec<T> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<T> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    s
}

/// Singular values of any finite matrix, plus eigenvalues when it is square
/// and symmetric within [`SYMMETRY_TOL`].
pub fn spectrum<T: Scalar>(m: &DMatrix<T>) -> Result<GramSpectrum<T>> {
    if !all_finite(m) {
        return Err(Error::invalid("spectrum of a matrix with non-finite entries"));
    }
    let eigenvalues = (m.is_square() && !m.is_empty() && asymmetry(m) <= lit(SYMMETRY_TOL))
        .then(|| symmetric_eigenvalues(m));
    let s = singular_values(m);
    Ok(GramSpectrum {
        rows: m.nrows(),
        cols: m.ncols(),
        lambda_min: eigenvalues.as_ref().and_then(|e| e.first().copied()),
        lambda_max: eigenvalues.as_ref().and_then(|e| e.last().copied()),
        sigma_min: s.last().copied().unwrap_or(T::zero()),
        sigma_max: s.first().copied().unwrap_or(T::zero()),
        eigenvalues,
        singular_values: s,
    })
}

/// Like [`spectrum`] but rejects inputs that do not qualify for the
/// eigenvalue path.
pub fn symmetric_spectrum<T: Scalar>(m: &DMatrix<T>) -> Result<GramSpectrum<T>> {
    if !m.is_square() || m.is_empty() {
        return Err(Error::invalid(format!(
            "eigenvalues need a nonempty square matrix, got {:?}",
            m.shape()
        )));
    }
    let s = spectrum(m)?;
    if s.eigenvalues.is_none() {
        return Err(Error::invalid(format!(
            "matrix is not symmetric (relative asymmetry {:e})",
            asymmetry(m)
        )));
    }
    Ok(s)
}

/// `σ_min` over the numerical rank of `x` (relative cut `1e-10`), the
/// smallest nonzero singular value.
pub fn sigma_min_nonzero<T: Scalar>(x: &DMatrix<T>) -> Result<(T, usize)> {
    let s = spectrum(x)?;
    let r = s.rank(lit(1e-10));
    let v = s.sigma_at_rank(r).unwrap_or(T::zero());
    Ok((v, r))
}
