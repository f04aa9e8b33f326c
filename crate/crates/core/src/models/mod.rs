//! The two over-parameterized networks, their square loss and closed-form
//! gradients. There is no automatic differentiation here: every gradient is
//! an explicit matrix expression.

mod deep_linear;
mod loss;
mod two_layer;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use deep_linear::{
    forward_deep_linear, grad_deep_linear, gradients_deep_linear, init_deep_linear,
    DeepLinearParams,
};
pub use loss::{square_loss, unvec_residual, vec_residual};
pub use two_layer::{forward_two_layer, grad_two_layer, init_two_layer, TwoLayerParams};

/// Features and targets with samples stored as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch<T: Scalar> {
    x: DMatrix<T>,
    y: DMatrix<T>,
}

impl<T: Scalar> LabeledBatch<T> {
    pub fn new(x: DMatrix<T>, y: DMatrix<T>) -> Result<Self> {
        if x.ncols() != y.ncols() {
            return Err(Error::invalid(format!(
                "feature matrix has {} samples but target matrix has {}",
                x.ncols(),
                y.ncols()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &DMatrix<T> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<T> {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }
}

/// A trainable model as seen by the federated engine: an output map, a
/// square-loss gradient, and a flat list of trainable tensors that local
/// steps and server averaging operate on.
pub trait Network<T: Scalar>: Clone + Send + Sync {
    fn output(&self, x: &DMatrix<T>) -> Result<DMatrix<T>>;

    /// Square loss on `batch` together with the gradient of every trainable
    /// tensor, in the order of [`Network::tensors`].
    fn loss_and_gradients(&self, batch: &LabeledBatch<T>) -> Result<(T, Vec<DMatrix<T>>)>;

    fn tensors(&self) -> &[DMatrix<T>];

    /// Same architecture and frozen parts, new trainable tensors.
    fn with_tensors(&self, tensors: Vec<DMatrix<T>>) -> Result<Self>;

    fn loss(&self, batch: &LabeledBatch<T>) -> Result<T> {
        square_loss(&self.output(batch.x())?, batch.y())
    }
}

pub(crate) fn check_same_shapes<T: Scalar>(
    expected: &[DMatrix<T>],
    given: &[DMatrix<T>],
) -> Result<()> {
    if expected.len() != given.len() {
        return Err(Error::invalid(format!(
            "expected {} tensors, got {}",
            expected.len(),
            given.len()
        )));
    }
    for (i, (a, b)) in expected.iter().zip(given).enumerate() {
        if a.shape() != b.shape() {
            return Err(Error::invalid(format!(
                "tensor {i}: expected shape {:?}, got {:?}",
                a.shape(),
                b.shape()
            )));
        }
    }
    Ok(())
}
