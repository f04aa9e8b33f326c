use nalgebra::DMatrix;

use super::{check_same_shapes, square_loss, LabeledBatch, Network};
use crate::error::{Error, Result};
use crate::rng::{normals, stream, Purpose};
use crate::scalar::{count, Scalar};
use rand::Rng;

/// Two-layer ReLU network `f(x) = (1/√m) Σ_r a_r · max(0, w_rᵀx)`.
///
/// Only the hidden weights are trainable; the output signs `a_r ∈ {−1, +1}`
/// are fixed at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerParams<T: Scalar> {
    hidden: DMatrix<T>,
    signs: Vec<T>,
}

impl<T: Scalar> TwoLayerParams<T> {
    pub fn from_parts(hidden: DMatrix<T>, signs: Vec<T>) -> Result<Self> {
        if hidden.nrows() == 0 || hidden.ncols() == 0 {
            return Err(Error::invalid("hidden layer dimensions must be positive"));
        }
        if signs.len() != hidden.nrows() {
            return Err(Error::invalid(format!(
                "{} output signs for {} hidden neurons",
                signs.len(),
                hidden.nrows()
            )));
        }
        if signs.iter().any(|&a| a != T::one() && a != -T::one()) {
            return Err(Error::invalid("output signs must be +1 or -1"));
        }
        Ok(Self { hidden, signs })
    }

    /// `W` with rows `w_r`.
    pub fn hidden(&self) -> &DMatrix<T> {
        &self.hidden
    }

    pub fn signs(&self) -> &[T] {
        &self.signs
    }

    pub fn width(&self) -> usize {
        self.hidden.nrows()
    }

    pub fn dim(&self) -> usize {
        self.hidden.ncols()
    }

    fn check_input(&self, x: &DMatrix<T>) -> Result<()> {
        if x.nrows() != self.dim() {
            return Err(Error::invalid(format!(
                "input has {} rows, network expects d = {}",
                x.nrows(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// Rows `w_r ~ N(0, I_d)` and signs uniform on `{−1, +1}`, each from its own
/// sub-stream of `seed`.
pub fn init_two_layer<T: Scalar>(width: usize, dim: usize, seed: u64) -> Result<TwoLayerParams<T>> {
    if width == 0 || dim == 0 {
        return Err(Error::invalid(format!(
            "two-layer dimensions must be positive (m={width}, d={dim})"
        )));
    }
    let mut rng = stream(seed, Purpose::InitTwoLayer, 0);
    let hidden = DMatrix::from_row_slice(width, dim, &normals::<T, _>(&mut rng, width * dim));
    let mut sign_rng = stream(seed, Purpose::InitTwoLayer, 1);
    let signs = (0..width)
        .map(|_| if sign_rng.random::<bool>() { T::one() } else { -T::one() })
        .collect();
    TwoLayerParams::from_parts(hidden, signs)
}

/// Pre-activations `W X` and the output row.
fn forward_parts<T: Scalar>(p: &TwoLayerParams<T>, x: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>) {
    let pre = &p.hidden * x;
    let inv_sqrt_m = T::one() / count::<T>(p.width()).sqrt();
    let mut out = DMatrix::zeros(1, x.ncols());
    for j in 0..x.ncols() {
        let mut acc = T::zero();
        for (r, &a) in p.signs.iter().enumerate() {
            let z = pre[(r, j)];
            if z > T::zero() {
                acc += a * z;
            }
        }
        out[(0, j)] = acc * inv_sqrt_m;
    }
    (pre, out)
}

pub fn forward_two_layer<T: Scalar>(p: &TwoLayerParams<T>, x: &DMatrix<T>) -> Result<DMatrix<T>> {
    p.check_input(x)?;
    Ok(forward_parts(p, x).1)
}

fn loss_and_grad<T: Scalar>(p: &TwoLayerParams<T>, batch: &LabeledBatch<T>) -> Result<(T, DMatrix<T>)> {
    p.check_input(batch.x())?;
    if batch.is_empty() {
        return Err(Error::invalid("gradient of an empty batch"));
    }
    if batch.y().nrows() != 1 {
        return Err(Error::invalid("two-layer targets must be a single row"));
    }
    let (pre, out) = forward_parts(p, batch.x());
    let loss = square_loss(&out, batch.y())?;
    let inv_sqrt_m = T::one() / count::<T>(p.width()).sqrt();
    let n = batch.len();
    // D[r, i] = a_r · (f(x_i) − y_i) · 1{w_rᵀx_i ≥ 0} / √m, gradient = D Xᵀ
    let mut d = DMatrix::zeros(p.width(), n);
    for i in 0..n {
        let res = (out[(0, i)] - batch.y()[(0, i)]) * inv_sqrt_m;
        for (r, &a) in p.signs.iter().enumerate() {
            if pre[(r, i)] >= T::zero() {
                d[(r, i)] = a * res;
            }
        }
    }
    Ok((loss, d * batch.x().transpose()))
}

/// Row `r` is `(1/√m) Σ_i (f(x_i) − y_i) a_r x_iᵀ 𝟙{w_rᵀx_i ≥ 0}`.
pub fn grad_two_layer<T: Scalar>(p: &TwoLayerParams<T>, batch: &LabeledBatch<T>) -> Result<DMatrix<T>> {
    loss_and_grad(p, batch).map(|(_, g)| g)
}

impl<T: Scalar> Network<T> for TwoLayerParams<T> {
    fn output(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        forward_two_layer(self, x)
    }

    fn loss_and_gradients(&self, batch: &LabeledBatch<T>) -> Result<(T, Vec<DMatrix<T>>)> {
        loss_and_grad(self, batch).map(|(l, g)| (l, vec![g]))
    }

    fn tensors(&self) -> &[DMatrix<T>] {
        std::slice::from_ref(&self.hidden)
    }

    fn with_tensors(&self, tensors: Vec<DMatrix<T>>) -> Result<Self> {
        check_same_shapes(self.tensors(), &tensors)?;
        let hidden = tensors.into_iter().next().expect("one tensor");
        Ok(Self {
            hidden,
            signs: self.signs.clone(),
        })
    }
}
