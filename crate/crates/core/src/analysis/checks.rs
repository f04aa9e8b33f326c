use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::spectrum::sigma_min_nonzero;
use crate::error::Result;
use crate::linalg::spectral_norm;
use crate::models::{DeepLinearParams, TwoLayerParams};
use crate::scalar::{count, lit, to_f64, Scalar};

/// Relative tolerance applied to every bound comparison.
pub const CHECK_TOL: f64 = 1e-9;

/// Constant standing in for the unspecified `O(√L)` factor on interior
/// products at initialization.
pub const INTERIOR_CONSTANT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// Passes when `measured ≤ bound·(1 + tol)`.
    Upper,
    /// Passes when `measured ≥ bound·(1 − tol)`.
    Lower,
}

/// Outcome of one inequality evaluated at runtime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub kind: BoundKind,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    /// `measured/bound` for upper bounds, `bound/measured` for lower ones;
    /// at most 1 (up to tolerance) exactly when the check passes.
    pub slack: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub client: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    /// Inputs to the bound formula.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, f64>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl CheckReport {
    fn build(name: &str, kind: BoundKind, measured: f64, bound: f64) -> Self {
        let (passed, slack) = match kind {
            BoundKind::Upper => (measured <= bound * (1.0 + CHECK_TOL), ratio(measured, bound)),
            BoundKind::Lower => (measured >= bound * (1.0 - CHECK_TOL), ratio(bound, measured)),
        };
        Self {
            name: name.to_string(),
            kind,
            passed: passed && measured.is_finite(),
            measured,
            bound,
            slack,
            round: None,
            step: None,
            client: None,
            layer: None,
            inputs: BTreeMap::new(),
        }
    }

    pub fn upper<T: Scalar>(name: &str, measured: T, bound: T) -> Self {
        Self::build(name, BoundKind::Upper, to_f64(measured), to_f64(bound))
    }

    pub fn lower<T: Scalar>(name: &str, measured: T, bound: T) -> Self {
        Self::build(name, BoundKind::Lower, to_f64(measured), to_f64(bound))
    }

    /// A check with nothing to evaluate.
    pub fn vacuous(name: &str) -> Self {
        Self::build(name, BoundKind::Upper, 0.0, 0.0)
    }

    pub fn at_round(mut self, t: usize) -> Self {
        self.round = Some(t);
        self
    }

    pub fn at_step(mut self, k: usize) -> Self {
        self.step = Some(k);
        self
    }

    pub fn for_client(mut self, c: usize) -> Self {
        self.client = Some(c);
        self
    }

    pub fn for_layer(mut self, i: usize) -> Self {
        self.layer = Some(i);
        self
    }

    pub fn input<T: Scalar>(mut self, key: &str, value: T) -> Self {
        self.inputs.insert(key.to_string(), to_f64(value));
        self
    }
}

fn pow_half<T: Scalar>(m: usize, e: usize) -> T {
    count::<T>(m).sqrt().powi(e as i32)
}

/// Singular-value bounds on products of freshly drawn layers:
/// `0.8·m^{(L−i+1)/2} ≤ σ(W^{L:i}) ≤ 1.2·m^{(L−i+1)/2}` for `1 < i ≤ L`,
/// `0.8·m^{j/2}σ_min(X) ≤ σ(W^{j:1}X) ≤ 1.2·m^{j/2}σ_max(X)` for `1 ≤ j < L`,
/// and `‖W^{j:i}‖ ≤ 10·√L·m^{(j−i+1)/2}` for `1 < i ≤ j < L`. Smallest
/// singular values of `W^{j:1}X` are taken over the rank of `X`.
pub fn check_init_spectra<T: Scalar>(p: &DeepLinearParams<T>, x: &DMatrix<T>) -> Result<Vec<CheckReport>> {
    let depth = p.depth();
    if depth == 1 {
        return Ok(vec![CheckReport::vacuous("init-spectra-vacuous")]);
    }
    let m = p.width();
    let hi = lit::<T>(1.2);
    let lo = lit::<T>(0.8);
    let mut out = Vec::new();
    for i in 2..=depth {
        let s = super::spectrum(&p.chain(depth, i))?;
        let scale: T = pow_half(m, depth - i + 1);
        out.push(CheckReport::upper("init-suffix-sigma-max", s.sigma_max, hi * scale).for_layer(i));
        out.push(CheckReport::lower("init-suffix-sigma-min", s.sigma_min, lo * scale).for_layer(i));
    }
    let (sigma_min_x, rank) = sigma_min_nonzero(x)?;
    let sigma_max_x = spectral_norm(x);
    for j in 1..depth {
        let s = super::spectrum(&p.prefix_apply(j, x))?;
        let scale: T = pow_half(m, j);
        let smin = s.sigma_at_rank(rank).unwrap_or(T::zero());
        out.push(
            CheckReport::upper("init-prefix-sigma-max", s.sigma_max, hi * scale * sigma_max_x)
                .for_layer(j)
                .input("sigma_max_x", sigma_max_x),
        );
        out.push(
            CheckReport::lower("init-prefix-sigma-min", smin, lo * scale * sigma_min_x)
                .for_layer(j)
                .input("sigma_min_x", sigma_min_x)
                .input("rank_x", count::<T>(rank)),
        );
    }
    let c = lit::<T>(INTERIOR_CONSTANT) * count::<T>(depth).sqrt();
    for i in 2..depth {
        for j in i..depth {
            let norm = spectral_norm(&p.chain(j, i));
            let bound = c * pow_half::<T>(m, j - i + 1);
            let mut r = CheckReport::upper("init-interior-norm", norm, bound).for_layer(i);
            r.inputs.insert("upper_layer".into(), j as f64);
            out.push(r);
        }
    }
    Ok(out)
}

/// `1 − η·L·λ_min(X_cᵀX_c)/(4·d_out)`.
pub fn descent_factor_deep_linear<T: Scalar>(eta: T, depth: usize, lambda_xtx: T, d_out: usize) -> T {
    T::one() - eta * count::<T>(depth) * lambda_xtx / (lit::<T>(4.0) * count::<T>(d_out))
}

/// `1 − η·λ/2`.
pub fn descent_factor_relu<T: Scalar>(eta: T, lambda: T) -> T {
    T::one() - eta * lambda / lit::<T>(2.0)
}

/// `‖ξ_k‖² ≤ factor^k ‖ξ_0‖²` along one local run; reports the step with
/// the largest slack. `losses[k]` is the loss after `k` steps.
pub fn check_local_descent<T: Scalar>(name: &str, losses: &[T], factor: T) -> CheckReport {
    let Some(&first) = losses.first() else {
        return CheckReport::vacuous(name);
    };
    let factor = factor.max(T::zero());
    let mut worst: Option<(CheckReport, usize)> = None;
    let mut bound = T::one();
    for (k, &loss) in losses.iter().enumerate() {
        if k > 0 {
            bound *= factor;
        }
        let r = if first > T::zero() { loss / first } else { T::zero() };
        let report = CheckReport::upper(name, r, bound).at_step(k);
        let worse = match &worst {
            None => true,
            Some((w, _)) => (!report.passed && w.passed) || (report.passed == w.passed && report.slack > w.slack),
        };
        if worse {
            worst = Some((report, k));
        }
    }
    worst.expect("nonempty").0.input("factor", factor)
}

/// Stacked local residuals against the stacked global residual:
/// `‖ξ_k^S − ξ̄^S‖ ≤ 57·k·η·‖X‖²/(10·d_out)·‖ξ̄^S‖` for each `k`.
pub fn check_local_deviation<T: Scalar>(
    local: &[DVector<T>],
    global: &DVector<T>,
    eta: T,
    norm_x: T,
    d_out: usize,
) -> Vec<CheckReport> {
    let base = global.norm();
    let coeff = lit::<T>(57.0) * eta * norm_x * norm_x / (lit::<T>(10.0) * count::<T>(d_out));
    local
        .iter()
        .enumerate()
        .map(|(k, xi)| {
            let bound = coeff * count::<T>(k) * base;
            CheckReport::upper("local-deviation", (xi - global).norm(), bound).at_step(k)
        })
        .collect()
}

/// Per-client output deviation of the ReLU model after `k` local steps:
/// `‖y_c(t) − y_c^k(t)‖ ≤ 2·η·n·K·‖y_c(t) − y_c‖`.
pub fn check_output_deviation<T: Scalar>(
    local_outputs: &[DMatrix<T>],
    global_output: &DMatrix<T>,
    targets: &DMatrix<T>,
    eta: T,
    n: usize,
    local_steps: usize,
) -> Vec<CheckReport> {
    let bound = lit::<T>(2.0) * eta * count::<T>(n) * count::<T>(local_steps) * (global_output - targets).norm();
    local_outputs
        .iter()
        .enumerate()
        .map(|(k, out)| CheckReport::upper("output-deviation", (global_output - out).norm(), bound).at_step(k))
        .collect()
}

/// `‖Wⁱ − Wⁱ(0)‖_F ≤ R` for every layer.
pub fn check_drift<T: Scalar>(current: &DeepLinearParams<T>, init: &DeepLinearParams<T>, radius: T) -> Vec<CheckReport> {
    (1..=current.depth())
        .map(|i| {
            let drift = (current.layer(i) - init.layer(i)).norm();
            CheckReport::upper("layer-drift", drift, radius).for_layer(i).input("radius", radius)
        })
        .collect()
}

/// `‖W_{k,c}ⁱ − W̄ⁱ‖ ≤ R` in spectral norm. The Frobenius norm is tried
/// first; the SVD only runs when it exceeds the radius.
pub fn check_local_drift<T: Scalar>(
    local: &DeepLinearParams<T>,
    global: &DeepLinearParams<T>,
    radius: T,
) -> Vec<CheckReport> {
    (1..=local.depth())
        .map(|i| {
            let diff = local.layer(i) - global.layer(i);
            let fro = diff.norm();
            let measured = if fro <= radius { fro } else { spectral_norm(&diff) };
            CheckReport::upper("local-drift", measured, radius).for_layer(i)
        })
        .collect()
}

/// `max_r ‖w_r − w_r(0)‖ ≤ R`.
pub fn check_neuron_drift<T: Scalar>(current: &TwoLayerParams<T>, init: &TwoLayerParams<T>, radius: T) -> CheckReport {
    let diff = current.hidden() - init.hidden();
    let worst = diff.row_iter().map(|r| r.norm()).fold(T::zero(), |a, b| a.max(b));
    CheckReport::upper("neuron-drift", worst, radius).input("radius", radius)
}

/// `|tr(H∞) − n/2| ≤ 1e-10` for unit-norm inputs.
pub fn check_h_infinity_trace<T: Scalar>(h: &DMatrix<T>) -> CheckReport {
    let n = count::<T>(h.nrows());
    let dev = (h.trace() - n / lit::<T>(2.0)).abs();
    CheckReport::upper("h-infinity-trace", dev, lit::<T>(1e-10))
}

/// `λ_min(P(0)) ≥ 0.8⁴·L·σ_min²(X)/d_out`.
pub fn check_lambda_floor<T: Scalar>(lambda_min: T, floor: T) -> CheckReport {
    CheckReport::lower("lambda-floor", lambda_min, floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::init_deep_linear;

    #[test]
    fn report_direction() {
        assert!(CheckReport::upper("u", 1.0, 1.0).passed);
        assert!(!CheckReport::upper("u", 1.1, 1.0).passed);
        assert!(CheckReport::lower("l", 1.1, 1.0).passed);
        assert!(!CheckReport::lower("l", 0.9, 1.0).passed);
        assert!(!CheckReport::upper("u", f64::NAN, 1.0).passed);
        let v = CheckReport::vacuous("v");
        assert!(v.passed && v.slack == 0.0);
    }

    #[test]
    fn single_layer_is_vacuous() {
        let p = init_deep_linear::<f64>(1, 1, 3, 2, 0).unwrap();
        let r = check_init_spectra(&p, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].passed);
    }

    #[test]
    fn descent_trivial_cases() {
        let r = check_local_descent("d", &[2.0], 0.5);
        assert!(r.passed && r.measured == 1.0 && r.bound == 1.0);
        let r = check_local_descent("d", &[2.0, 2.0, 2.0], 1.0);
        assert!(r.passed);
        let r = check_local_descent("d", &[2.0, 1.5], 0.5);
        assert!(!r.passed);
        assert_eq!(r.step, Some(1));
    }

    #[test]
    fn deviation_zero_at_first_step() {
        let g = DVector::from_vec(vec![1.0, 2.0]);
        let r = check_local_deviation(&[g.clone(), g.clone()], &g, 0.0, 1.0, 1);
        assert!(r.iter().all(|c| c.passed && c.measured == 0.0));
    }

    #[test]
    fn zero_drift_at_start() {
        let p = init_deep_linear::<f64>(2, 3, 2, 1, 0).unwrap();
        assert!(check_drift(&p, &p, 0.0).iter().all(|r| r.passed));
    }
}
