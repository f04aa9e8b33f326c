use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::gram::{assemble_padded, gram_p_tkc};
use crate::error::{Error, Result};
use crate::federation::ClientSet;
use crate::linalg::{hcat, vectorize};
use crate::models::{forward_deep_linear, DeepLinearParams, LabeledBatch};
use crate::scalar::{count, Scalar};

/// First-order prediction of the next global residual and the norms of the
/// four pieces it splits into.
#[derive(Debug, Clone, Serialize)]
pub struct FirstOrderPrediction<T: Scalar> {
    /// `ξ̄(t)` on the stacked client data.
    #[serde(skip)]
    pub current: DVector<T>,
    /// `ξ̂(t+1) = ξ̄(t) − (η/|S|) Σ_k P^S(t,k) ξ_k^S(t)`.
    #[serde(skip)]
    pub predicted: DVector<T>,
    /// Measured `ξ̄(t+1)`.
    #[serde(skip)]
    pub actual: DVector<T>,
    /// `‖(I − (ηK/|S|)P̂^S(0)) ξ̄(t)‖`.
    pub first: T,
    /// `‖(η/|S|) Σ_k (P^S(t,k) − P^S(0)) ξ_k^S‖`.
    pub second: T,
    /// `‖(η/|S|) Σ_k P^S(0)(ξ_k^S − ξ̄^S)‖`, on participant blocks only.
    pub third: T,
    /// The same term with zero-padded blocks acting on full-length residuals.
    pub third_padded: T,
    /// `‖ξ̄(t+1) − ξ̂(t+1)‖`, the part the first-order model leaves out.
    pub fourth: T,
    /// `‖ξ̄(t+1) − ξ̂(t+1)‖ / ‖ξ̄(t)‖`.
    pub relative_error: T,
}

fn residual<T: Scalar>(p: &DeepLinearParams<T>, b: &LabeledBatch<T>) -> Result<DVector<T>> {
    Ok(vectorize(&(forward_deep_linear(p, b.x())? - b.y())))
}

/// Inputs:
/// * `init`: the global network at round 0, which defines `P^S(0)`;
/// * `global`, `next_global`: the global network before and after round `t`;
/// * `trajectories[j]`: local iterates `θ_0 … θ_K` of participant
///   `members[j]` (at least `K` snapshots);
/// * `batches`: every client's data, in client order.
#[allow(clippy::too_many_arguments)]
pub fn predict_first_order<T: Scalar>(
    init: &DeepLinearParams<T>,
    global: &DeepLinearParams<T>,
    next_global: &DeepLinearParams<T>,
    trajectories: &[Vec<DeepLinearParams<T>>],
    batches: &[LabeledBatch<T>],
    members: &ClientSet,
    eta: T,
    local_steps: usize,
) -> Result<FirstOrderPrediction<T>> {
    if trajectories.len() != members.len() {
        return Err(Error::invalid(format!(
            "{} local trajectories for {} participants",
            trajectories.len(),
            members.len()
        )));
    }
    if let Some(j) = trajectories.iter().position(|tr| tr.len() < local_steps) {
        return Err(Error::invalid(format!(
            "participant {} has {} snapshots, {local_steps} needed",
            members.members()[j],
            trajectories[j].len()
        )));
    }
    if let Some(&c) = members.members().iter().find(|&&c| c >= batches.len()) {
        return Err(Error::invalid(format!("no batch for client {c}")));
    }
    let d_out = global.d_out();
    let xs: Vec<&DMatrix<T>> = batches.iter().map(|b| b.x()).collect();
    let ys: Vec<&DMatrix<T>> = batches.iter().map(|b| b.y()).collect();
    let x = hcat(&xs)?;
    let full = LabeledBatch::new(x.clone(), hcat(&ys)?)?;
    let current = residual(global, &full)?;
    let actual = residual(next_global, &full)?;
    let rows = current.len();
    let scale = eta / count::<T>(members.len());

    let mut drive = DVector::zeros(rows);
    let mut first_drive = DVector::zeros(rows);
    let mut second = DVector::zeros(rows);
    let mut third = DVector::zeros(rows);
    let mut p0_blocks = Vec::with_capacity(members.len());
    let mut global_blocks = Vec::with_capacity(members.len());
    for (j, &c) in members.members().iter().enumerate() {
        let b = &batches[c];
        let p0 = gram_p_tkc(init, init, &x, b.x())?;
        let xi_bar_c = residual(global, b)?;
        first_drive += &p0 * &xi_bar_c;
        for local in &trajectories[j][..local_steps] {
            let ptk = gram_p_tkc(global, local, &x, b.x())?;
            let xi_k = residual(local, b)?;
            drive += &ptk * &xi_k;
            second += (&ptk - &p0) * &xi_k;
            third += &p0 * (&xi_k - &xi_bar_c);
        }
        p0_blocks.push((c, p0));
        global_blocks.push(xi_bar_c);
    }

    // the same third term through zero-padded blocks and full-length
    // residuals, with absent clients holding their global residual
    let widths: Vec<usize> = batches.iter().map(|b| b.len() * d_out).collect();
    let padded = assemble_padded(&p0_blocks, members, &widths)?;
    let mut third_padded = DVector::zeros(rows);
    for k in 0..local_steps {
        let mut diff = DVector::zeros(padded.ncols());
        let mut offset = 0;
        for (c, b) in batches.iter().enumerate() {
            let len = b.len() * d_out;
            if let Some(j) = members.members().iter().position(|&m| m == c) {
                let xi_k = residual(&trajectories[j][k], b)?;
                diff.rows_mut(offset, len).copy_from(&(xi_k - &global_blocks[j]));
            }
            offset += len;
        }
        third_padded += &padded * diff;
    }

    let predicted = &current - &drive * scale;
    let first = &current - &first_drive * (scale * count::<T>(local_steps));
    let fourth = &actual - &predicted;
    let base = current.norm();
    Ok(FirstOrderPrediction {
        first: first.norm(),
        second: (second * scale).norm(),
        third: (third * scale).norm(),
        third_padded: (third_padded * scale).norm(),
        fourth: fourth.norm(),
        relative_error: if base > T::zero() { fourth.norm() / base } else { T::zero() },
        current,
        predicted,
        actual,
    })
}
