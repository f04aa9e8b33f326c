use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::{count, lit, Scalar};

/// Per-round contraction factors and their running products for a given
/// participation history.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSeries<T: Scalar> {
    pub loss0: T,
    pub eta: T,
    pub local_steps: usize,
    pub clients: usize,
    pub lambda_min: T,
    pub sizes: Vec<usize>,
    /// `ρ_t`, one per round.
    pub factors: Vec<T>,
    /// `Π_{i<t} ρ_i` for `t = 0..=T`; the first entry is 1.
    pub cumulative: Vec<T>,
}

impl<T: Scalar> BoundSeries<T> {
    /// `L(0) · Π_{i<t} ρ_i`, the bound on the loss entering round `t`.
    pub fn value(&self, t: usize) -> T {
        self.loss0 * self.cumulative[t]
    }

    pub fn rounds(&self) -> usize {
        self.factors.len()
    }
}

/// `ρ = 1 − η·|S|·λ_min·K/(2N²)`.
pub fn contraction_factor<T: Scalar>(eta: T, size: usize, lambda_min: T, local_steps: usize, clients: usize) -> T {
    let n = count::<T>(clients);
    T::one() - eta * count::<T>(size) * lambda_min * count::<T>(local_steps) / (lit::<T>(2.0) * n * n)
}

pub fn bound_series<T: Scalar>(
    loss0: T,
    eta: T,
    local_steps: usize,
    clients: usize,
    lambda_min: T,
    sizes: &[usize],
) -> Result<BoundSeries<T>> {
    if !(loss0 >= T::zero()) || !(eta > T::zero()) || !(lambda_min > T::zero()) {
        return Err(Error::invalid(format!(
            "bound inputs must be positive (L0 = {loss0}, eta = {eta}, lambda_min = {lambda_min})"
        )));
    }
    if local_steps == 0 || clients == 0 {
        return Err(Error::invalid("K and N must be positive"));
    }
    if let Some(&bad) = sizes.iter().find(|&&s| s == 0 || s > clients) {
        return Err(Error::invalid(format!("participant count {bad} outside 1..={clients}")));
    }
    let mut factors = Vec::with_capacity(sizes.len());
    let mut cumulative = Vec::with_capacity(sizes.len() + 1);
    let mut acc = T::one();
    cumulative.push(acc);
    for (t, &s) in sizes.iter().enumerate() {
        let rho = contraction_factor(eta, s, lambda_min, local_steps, clients);
        if !(rho > T::zero()) {
            return Err(Error::Config(format!(
                "round {t}: contraction factor {rho} is not positive; the learning rate is too large for the bound"
            )));
        }
        acc *= rho;
        factors.push(rho);
        cumulative.push(acc);
    }
    Ok(BoundSeries {
        loss0,
        eta,
        local_steps,
        clients,
        lambda_min,
        sizes: sizes.to_vec(),
        factors,
        cumulative,
    })
}

/// Lower bound `0.8⁴·L·σ_min²(X)/d_out` on `λ_min(P(0))`.
pub fn lambda_min_floor<T: Scalar>(depth: usize, sigma_min: T, d_out: usize) -> T {
    lit::<T>(0.8f64.powi(4)) * count::<T>(depth) * sigma_min * sigma_min / count::<T>(d_out)
}

/// `κ = σ_max²(X)/σ_min²(X)`.
pub fn condition_number<T: Scalar>(sigma_max: T, sigma_min: T) -> T {
    (sigma_max * sigma_max) / (sigma_min * sigma_min)
}

/// Learning rate `d_out/(50·L·κ·K·‖X‖²)`.
pub fn theorem_eta<T: Scalar>(d_out: usize, depth: usize, kappa: T, local_steps: usize, norm_x: T) -> T {
    count::<T>(d_out)
        / (lit::<T>(50.0) * count::<T>(depth) * kappa * count::<T>(local_steps) * norm_x * norm_x)
}

/// Layer drift radius `25·√B·d_out·N²·‖X‖/(L·σ_min²(X))`.
pub fn layer_drift_radius<T: Scalar>(
    loss_bound: T,
    d_out: usize,
    clients: usize,
    norm_x: T,
    depth: usize,
    sigma_min: T,
) -> T {
    let n = count::<T>(clients);
    lit::<T>(25.0) * loss_bound.sqrt() * count::<T>(d_out) * n * n * norm_x
        / (count::<T>(depth) * sigma_min * sigma_min)
}

/// Per-round local radius `24·√d_out·‖X_c‖/(L·σ_min²(X_c))·‖Ū_c − Y_c‖_F`.
pub fn local_drift_radius<T: Scalar>(
    d_out: usize,
    norm_xc: T,
    depth: usize,
    sigma_min_xc: T,
    residual: T,
) -> T {
    lit::<T>(24.0) * count::<T>(d_out).sqrt() * norm_xc * residual
        / (count::<T>(depth) * sigma_min_xc * sigma_min_xc)
}

/// Neuron drift radius `9·N²·√n·‖y(0) − y‖/(√m·λ)`.
pub fn neuron_drift_radius<T: Scalar>(clients: usize, n: usize, residual0: T, width: usize, lambda: T) -> T {
    let nc = count::<T>(clients);
    lit::<T>(9.0) * nc * nc * count::<T>(n).sqrt() * residual0 / (count::<T>(width).sqrt() * lambda)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_product_at_zero() {
        let b = bound_series(3.0, 0.1, 2, 4, 0.5, &[4, 4]).unwrap();
        assert_eq!(b.value(0), 3.0);
        assert_eq!(b.cumulative.len(), 3);
        assert_eq!(b.cumulative[2], b.factors[0] * b.factors[1]);
    }

    #[test]
    fn full_participation_factor() {
        let b = bound_series(1.0f64, 0.01, 5, 8, 2.0, &[8]).unwrap();
        assert!((b.factors[0] - (1.0 - 0.01 * 2.0 * 5.0 / 16.0)).abs() < 1e-15);
    }

    #[test]
    fn more_participants_contract_more() {
        let a = contraction_factor(0.1, 2, 1.0, 3, 8);
        let b = contraction_factor(0.1, 4, 1.0, 3, 8);
        assert!(b < a);
    }

    #[test]
    fn nonpositive_factor_is_config_error() {
        match bound_series(1.0, 100.0, 5, 1, 1.0, &[1]) {
            Err(Error::Config(_)) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn floor_examples() {
        assert!((lambda_min_floor(3, 1.0f64, 1) - 1.2288).abs() < 1e-12);
        assert_eq!(lambda_min_floor(1, 0.0, 3), 0.0);
    }

    #[test]
    fn neuron_radius_example() {
        assert!((neuron_drift_radius(2, 4, 1.0f64, 100, 0.5) - 14.4).abs() < 1e-12);
    }
}
