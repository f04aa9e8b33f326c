use nalgebra::DMatrix;

use super::{check_same_shapes, square_loss, LabeledBatch, Network};
use crate::error::{Error, Result};
use crate::rng::{normals, stream, Purpose};
use crate::scalar::{count, Scalar};

/// Weights `W¹ … Wᴸ` of an `L`-layer linear network together with the
/// output scaling `C₁ = 1/√(m^{L−1}·d_out)`.
///
/// Layer indices in the public API are 1-based to match the usual
/// `W^{j:i} = Wʲ ⋯ Wⁱ` notation.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepLinearParams<T: Scalar> {
    layers: Vec<DMatrix<T>>,
    width: usize,
    d_in: usize,
    d_out: usize,
    scale: T,
}

fn output_scale<T: Scalar>(depth: usize, width: usize, d_out: usize) -> T {
    let denom = count::<T>(width).powi(depth as i32 - 1) * count::<T>(d_out);
    T::one() / denom.sqrt()
}

impl<T: Scalar> DeepLinearParams<T> {
    /// Wraps explicit layers, inferring `(L, m, d_in, d_out)` and validating
    /// every shape.
    pub fn from_layers(layers: Vec<DMatrix<T>>) -> Result<Self> {
        let depth = layers.len();
        if depth == 0 {
            return Err(Error::invalid("a deep linear network needs at least one layer"));
        }
        let d_in = layers[0].ncols();
        let d_out = layers[depth - 1].nrows();
        let width = if depth == 1 { d_out } else { layers[0].nrows() };
        if d_in == 0 || d_out == 0 || width == 0 {
            return Err(Error::invalid("layer dimensions must be positive"));
        }
        for (idx, w) in layers.iter().enumerate() {
            let i = idx + 1;
            let rows = if i == depth { d_out } else { width };
            let cols = if i == 1 { d_in } else { width };
            if w.shape() != (rows, cols) {
                return Err(Error::invalid(format!(
                    "layer {i} has shape {:?}, expected {:?}",
                    w.shape(),
                    (rows, cols)
                )));
            }
        }
        Ok(Self {
            scale: output_scale(depth, width, d_out),
            layers,
            width,
            d_in,
            d_out,
        })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    /// `C₁`.
    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn layers(&self) -> &[DMatrix<T>] {
        &self.layers
    }

    /// `Wⁱ`, 1-based.
    pub fn layer(&self, i: usize) -> &DMatrix<T> {
        &self.layers[i - 1]
    }

    fn input_dim(&self, i: usize) -> usize {
        if i == 1 {
            self.d_in
        } else {
            self.width
        }
    }

    /// `W^{hi:lo} = W^hi ⋯ W^lo`. When `hi = lo − 1` the empty product is the
    /// identity on the input space of layer `lo` (so `W^{0:1} = I_{d_in}` and
    /// `W^{L:L+1} = I_{d_out}`).
    pub fn chain(&self, hi: usize, lo: usize) -> DMatrix<T> {
        let depth = self.depth();
        assert!(lo >= 1 && hi <= depth && hi + 1 >= lo, "bad chain W^{{{hi}:{lo}}}");
        if hi + 1 == lo {
            let dim = if lo == depth + 1 {
                self.d_out
            } else {
                self.input_dim(lo)
            };
            return DMatrix::identity(dim, dim);
        }
        let mut acc = self.layers[lo - 1].clone();
        for w in &self.layers[lo..hi] {
            acc = w * acc;
        }
        acc
    }

    /// `W^{j:1}·X`, evaluated right to left.
    pub fn prefix_apply(&self, j: usize, x: &DMatrix<T>) -> DMatrix<T> {
        let mut acc = x.clone();
        for w in &self.layers[..j] {
            acc = w * acc;
        }
        acc
    }

    pub(crate) fn same_architecture(&self, other: &Self) -> bool {
        self.depth() == other.depth()
            && self.width == other.width
            && self.d_in == other.d_in
            && self.d_out == other.d_out
    }

    fn check_input(&self, x: &DMatrix<T>) -> Result<()> {
        if x.nrows() != self.d_in {
            return Err(Error::invalid(format!(
                "input has {} rows, network expects d_in = {}",
                x.nrows(),
                self.d_in
            )));
        }
        Ok(())
    }
}

/// Draws every weight i.i.d. `N(0, 1)` from the stream keyed by `seed`.
pub fn init_deep_linear<T: Scalar>(
    depth: usize,
    width: usize,
    d_in: usize,
    d_out: usize,
    seed: u64,
) -> Result<DeepLinearParams<T>> {
    if depth == 0 || width == 0 || d_in == 0 || d_out == 0 {
        return Err(Error::invalid(format!(
            "deep linear dimensions must be positive (L={depth}, m={width}, d_in={d_in}, d_out={d_out})"
        )));
    }
    let mut rng = stream(seed, Purpose::InitDeepLinear, 0);
    let layers = (1..=depth)
        .map(|i| {
            let rows = if i == depth { d_out } else { width };
            let cols = if i == 1 { d_in } else { width };
            DMatrix::from_vec(rows, cols, normals(&mut rng, rows * cols))
        })
        .collect();
    DeepLinearParams::from_layers(layers)
}

/// `U = C₁ · Wᴸ ⋯ W¹ · X`.
pub fn forward_deep_linear<T: Scalar>(
    p: &DeepLinearParams<T>,
    x: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    p.check_input(x)?;
    Ok(p.prefix_apply(p.depth(), x) * p.scale)
}

/// `∂L/∂Wⁱ = C₁ · (W^{L:i+1})ᵀ (U − Y) (W^{i−1:1} X)ᵀ` for one layer.
pub fn grad_deep_linear<T: Scalar>(
    p: &DeepLinearParams<T>,
    batch: &LabeledBatch<T>,
    i: usize,
) -> Result<DMatrix<T>> {
    let depth = p.depth();
    if i == 0 || i > depth {
        return Err(Error::invalid(format!("layer index {i} outside 1..={depth}")));
    }
    let u = forward_deep_linear(p, batch.x())?;
    if u.shape() != batch.y().shape() {
        return Err(Error::invalid("target shape does not match network output"));
    }
    let residual = u - batch.y();
    let left = p.chain(depth, i + 1).transpose() * residual;
    let right = p.prefix_apply(i - 1, batch.x());
    Ok(left * right.transpose() * p.scale)
}

/// Loss and all layer gradients in one forward/backward sweep.
pub fn gradients_deep_linear<T: Scalar>(
    p: &DeepLinearParams<T>,
    batch: &LabeledBatch<T>,
) -> Result<(T, Vec<DMatrix<T>>)> {
    p.check_input(batch.x())?;
    let depth = p.depth();
    // hidden[j] = W^{j:1} X for j = 0..L-1
    let mut hidden = Vec::with_capacity(depth);
    hidden.push(batch.x().clone());
    for w in &p.layers[..depth - 1] {
        let next = w * hidden.last().expect("nonempty");
        hidden.push(next);
    }
    let u = (&p.layers[depth - 1] * &hidden[depth - 1]) * p.scale;
    let loss = square_loss(&u, batch.y())?;
    // back = C₁ (W^{L:i+1})ᵀ (U − Y), walked from i = L down to 1
    let mut back = (u - batch.y()) * p.scale;
    let mut grads = vec![DMatrix::zeros(0, 0); depth];
    for i in (1..=depth).rev() {
        grads[i - 1] = &back * hidden[i - 1].transpose();
        if i > 1 {
            back = p.layers[i - 1].transpose() * back;
        }
    }
    Ok((loss, grads))
}

impl<T: Scalar> Network<T> for DeepLinearParams<T> {
    fn output(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        forward_deep_linear(self, x)
    }

    fn loss_and_gradients(&self, batch: &LabeledBatch<T>) -> Result<(T, Vec<DMatrix<T>>)> {
        gradients_deep_linear(self, batch)
    }

    fn tensors(&self) -> &[DMatrix<T>] {
        &self.layers
    }

    fn with_tensors(&self, tensors: Vec<DMatrix<T>>) -> Result<Self> {
        check_same_shapes(&self.layers, &tensors)?;
        Ok(Self {
            layers: tensors,
            ..self.clone_dims()
        })
    }
}

impl<T: Scalar> DeepLinearParams<T> {
    fn clone_dims(&self) -> Self {
        Self {
            layers: Vec::new(),
            width: self.width,
            d_in: self.d_in,
            d_out: self.d_out,
            scale: self.scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_net(w1: f64, w2: f64) -> DeepLinearParams<f64> {
        DeepLinearParams::from_layers(vec![
            DMatrix::from_element(1, 1, w1),
            DMatrix::from_element(1, 1, w2),
        ])
        .unwrap()
    }

    #[test]
    fn unit_width_scale_is_one() {
        let p = init_deep_linear::<f64>(2, 1, 1, 1, 3).unwrap();
        assert_eq!(p.layer(1).shape(), (1, 1));
        assert_eq!(p.layer(2).shape(), (1, 1));
        assert_eq!(p.scale(), 1.0);
    }

    #[test]
    fn scale_matches_definition() {
        let p = init_deep_linear::<f64>(3, 7, 2, 3, 0).unwrap();
        assert_eq!(p.scale(), 1.0 / (49.0f64 * 3.0).sqrt());
        assert_eq!(p.layer(1).shape(), (7, 2));
        assert_eq!(p.layer(2).shape(), (7, 7));
        assert_eq!(p.layer(3).shape(), (3, 7));
    }

    #[test]
    fn same_seed_same_weights() {
        let a = init_deep_linear::<f64>(3, 5, 2, 2, 11).unwrap();
        let b = init_deep_linear::<f64>(3, 5, 2, 2, 11).unwrap();
        assert_eq!(a, b);
        let c = init_deep_linear::<f64>(3, 5, 2, 2, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(init_deep_linear::<f64>(0, 4, 2, 2, 0).is_err());
        assert!(init_deep_linear::<f64>(2, 0, 2, 2, 0).is_err());
        assert!(init_deep_linear::<f64>(2, 4, 0, 2, 0).is_err());
    }

    #[test]
    fn wide_init_moments() {
        let p = init_deep_linear::<f64>(3, 1000, 4, 4, 5).unwrap();
        let w = p.layer(2);
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        // 3σ bands: sd(mean) = 1/√n, sd(var) ≈ √(2/n)
        assert!(mean.abs() < 3.0 / n.sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 3.0 * (2.0 / n).sqrt(), "var {var}");
    }

    #[test]
    fn scalar_chain_forward() {
        let p = scalar_net(2.0, 3.0);
        let u = forward_deep_linear(&p, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(u[(0, 0)], 6.0);
    }

    #[test]
    fn zero_first_layer_gives_zero_output() {
        let mut p = init_deep_linear::<f64>(3, 4, 3, 2, 1).unwrap();
        p.layers[0].fill(0.0);
        let x = DMatrix::from_element(3, 5, 1.5);
        assert!(forward_deep_linear(&p, &x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_input_rows_rejected() {
        let p = init_deep_linear::<f64>(2, 4, 3, 2, 1).unwrap();
        assert!(forward_deep_linear(&p, &DMatrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn scalar_gradient_by_hand() {
        let p = scalar_net(2.0, 3.0);
        let batch =
            LabeledBatch::new(DMatrix::from_element(1, 1, 1.0), DMatrix::zeros(1, 1)).unwrap();
        assert_eq!(grad_deep_linear(&p, &batch, 1).unwrap()[(0, 0)], 18.0);
        // ∂/∂W² = C₁ · (6 − 0) · (W¹x) = 12
        assert_eq!(grad_deep_linear(&p, &batch, 2).unwrap()[(0, 0)], 12.0);
        assert!(grad_deep_linear(&p, &batch, 0).is_err());
        assert!(grad_deep_linear(&p, &batch, 3).is_err());
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let p = init_deep_linear::<f64>(3, 4, 3, 2, 9).unwrap();
        let x = DMatrix::from_fn(3, 5, |i, j| (i + 2 * j) as f64 * 0.1);
        let y = forward_deep_linear(&p, &x).unwrap();
        let batch = LabeledBatch::new(x, y).unwrap();
        for i in 1..=3 {
            assert!(grad_deep_linear(&p, &batch, i).unwrap().iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn backprop_agrees_with_per_layer_formula() {
        let p = init_deep_linear::<f64>(4, 5, 3, 2, 21).unwrap();
        let x = DMatrix::from_fn(3, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let y = DMatrix::from_fn(2, 6, |i, j| (i as f64) - 0.3 * j as f64);
        let batch = LabeledBatch::new(x, y).unwrap();
        let (_, grads) = gradients_deep_linear(&p, &batch).unwrap();
        for i in 1..=4 {
            let direct = grad_deep_linear(&p, &batch, i).unwrap();
            let err = (&direct - &grads[i - 1]).abs().max();
            assert!(err <= 1e-12 * direct.abs().max().max(1.0), "layer {i}: {err}");
        }
    }

    #[test]
    fn chain_identity_boundaries() {
        let p = init_deep_linear::<f64>(3, 4, 2, 5, 0).unwrap();
        assert_eq!(p.chain(0, 1), DMatrix::identity(2, 2));
        assert_eq!(p.chain(3, 4), DMatrix::identity(5, 5));
        assert_eq!(p.chain(2, 3), DMatrix::identity(4, 4));
        let direct = p.layer(3) * (p.layer(2) * p.layer(1));
        assert!((p.chain(3, 1) - direct).abs().max() < 1e-12);
    }

    #[test]
    fn with_tensors_checks_shapes() {
        let p = init_deep_linear::<f64>(2, 3, 2, 1, 0).unwrap();
        assert!(p.with_tensors(vec![DMatrix::zeros(3, 2)]).is_err());
        let q = p
            .with_tensors(vec![DMatrix::zeros(3, 2), DMatrix::zeros(1, 3)])
            .unwrap();
        assert_eq!(q.scale(), p.scale());
    }
}
