use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::data::ClientPartition;
use crate::error::{Error, Result};
use crate::federation::ClientSet;
use crate::models::DeepLinearParams;
use crate::scalar::{count, lit, Scalar};

fn check_features<T: Scalar>(p: &DeepLinearParams<T>, x: &DMatrix<T>, what: &str) -> Result<()> {
    if x.nrows() != p.d_in() {
        return Err(Error::invalid(format!(
            "{what} has {} rows, network expects d_in = {}",
            x.nrows(),
            p.d_in()
        )));
    }
    Ok(())
}

/// `P(0)`-style symmetric Gram matrix of a deep linear network on `X`:
/// `C₁² Σᵢ (W^{i−1:1}X)ᵀ(W^{i−1:1}X) ⊗ W^{L:i+1}(W^{L:i+1})ᵀ`, indexed in
/// column-first residual order.
pub fn gram_p0<T: Scalar>(p: &DeepLinearParams<T>, x: &DMatrix<T>) -> Result<DMatrix<T>> {
    gram_p_tkc(p, p, x, x)
}

/// Mixed global/local Gram matrix `P(t, k, c)`, of shape
/// `(n·d_out) × (n_c·d_out)`.
pub fn gram_p_tkc<T: Scalar>(
    global: &DeepLinearParams<T>,
    local: &DeepLinearParams<T>,
    x: &DMatrix<T>,
    x_c: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    if !global.same_architecture(local) {
        return Err(Error::invalid("global and local networks differ in architecture"));
    }
    check_features(global, x, "X")?;
    check_features(global, x_c, "X_c")?;
    let depth = global.depth();
    let d_out = global.d_out();
    let c2 = global.scale() * global.scale();
    let mut acc = DMatrix::zeros(x.ncols() * d_out, x_c.ncols() * d_out);
    let mut a_bar = x.clone();
    let mut a_loc = x_c.clone();
    for i in 1..=depth {
        if i > 1 {
            a_bar = global.layer(i - 1) * a_bar;
            a_loc = local.layer(i - 1) * a_loc;
        }
        let left = a_bar.transpose() * &a_loc;
        let right = global.chain(depth, i + 1) * local.chain(depth, i + 1).transpose();
        acc += left.kronecker(&right);
    }
    Ok(acc * c2)
}

/// Places the participant blocks side by side in ascending client order with
/// zero blocks for absent clients. `widths[c]` is the column count of client
/// `c`'s block, so `widths.len()` is `N`.
pub fn assemble_padded<T: Scalar>(
    blocks: &[(usize, DMatrix<T>)],
    members: &ClientSet,
    widths: &[usize],
) -> Result<DMatrix<T>> {
    let mut given: Vec<usize> = blocks.iter().map(|(c, _)| *c).collect();
    given.sort_unstable();
    if given != members.members() {
        return Err(Error::invalid(format!(
            "blocks for clients {given:?} do not match participants {:?}",
            members.members()
        )));
    }
    if let Some(&c) = members.members().iter().find(|&&c| c >= widths.len()) {
        return Err(Error::invalid(format!("client {c} has no declared width")));
    }
    let rows = blocks.first().map_or(0, |(_, b)| b.nrows());
    let cols: usize = widths.iter().sum();
    let mut out = DMatrix::zeros(rows, cols);
    let offsets: Vec<usize> = widths
        .iter()
        .scan(0, |at, w| {
            let start = *at;
            *at += w;
            Some(start)
        })
        .collect();
    for (c, b) in blocks {
        if b.nrows() != rows || b.ncols() != widths[*c] {
            return Err(Error::invalid(format!(
                "block for client {c} has shape {:?}, expected ({rows}, {})",
                b.shape(),
                widths[*c]
            )));
        }
        out.view_mut((0, offsets[*c]), (rows, widths[*c])).copy_from(b);
    }
    Ok(out)
}

/// Column widths `n_c·d_out` of each client's block.
pub fn block_widths(partition: &ClientPartition, d_out: usize) -> Vec<usize> {
    partition.all_indices().iter().map(|idx| idx.len() * d_out).collect()
}

fn unit_columns<T: Scalar>(x: &DMatrix<T>) -> Result<DMatrix<T>> {
    let mut u = x.clone();
    for (j, mut col) in u.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > T::zero()) {
            return Err(Error::invalid(format!("sample {j} is the zero vector")));
        }
        col /= norm;
    }
    Ok(u)
}

/// Infinite-width ReLU Gram matrix
/// `H∞_ij = x_iᵀx_j (π − θ_ij)/(2π)`.
pub fn gram_h_infinity<T: Scalar>(x: &DMatrix<T>) -> Result<DMatrix<T>> {
    let unit = unit_columns(x)?;
    let n = x.ncols();
    let pi = lit::<T>(PI);
    let two = lit::<T>(2.0);
    let inner = x.transpose() * x;
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        let v = unit.column(j);
        for i in 0..=j {
            let u = unit.column(i);
            let theta = if i == j {
                T::zero()
            } else {
                two * (u - v).norm().atan2((u + v).norm())
            };
            let value = inner[(i, j)] * (pi - theta) / (two * pi);
            h[(i, j)] = value;
            h[(j, i)] = value;
        }
    }
    Ok(h)
}

fn activation_pattern<T: Scalar>(w: &DMatrix<T>, x: &DMatrix<T>) -> DMatrix<T> {
    (w * x).map(|z| if z >= T::zero() { T::one() } else { T::zero() })
}

/// Finite-width ReLU Gram matrix
/// `H_ij = (1/m) Σ_r x_iᵀx_j 𝟙{w̄_rᵀx_i ≥ 0} 𝟙{w_rᵀx_j ≥ 0}`, global weights
/// gating the rows and local weights gating the columns.
pub fn gram_h_tkc<T: Scalar>(
    global_w: &DMatrix<T>,
    local_w: &DMatrix<T>,
    x: &DMatrix<T>,
    x_c: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    if global_w.shape() != local_w.shape() {
        return Err(Error::invalid("global and local hidden weights differ in shape"));
    }
    let d = global_w.ncols();
    if x.nrows() != d || x_c.nrows() != d {
        return Err(Error::invalid(format!("inputs must have d = {d} rows")));
    }
    let g = activation_pattern(global_w, x);
    let g_c = activation_pattern(local_w, x_c);
    let m = count::<T>(global_w.nrows());
    let overlap = g.transpose() * g_c / m;
    Ok((x.transpose() * x_c).component_mul(&overlap))
}
