//! Gram matrices, spectra, contraction bounds, the first-order residual
//! predictor and runtime checks of the convergence inequalities.

mod bounds;
mod checks;
mod dynamics;
mod gram;
mod monitor;
mod spectrum;

pub use bounds::{
    bound_series, condition_number, contraction_factor, lambda_min_floor, layer_drift_radius,
    local_drift_radius, neuron_drift_radius, theorem_eta, BoundSeries,
};
pub use checks::{
    check_drift, check_h_infinity_trace, check_init_spectra, check_lambda_floor, check_local_descent,
    check_local_deviation, check_local_drift, check_neuron_drift, check_output_deviation,
    descent_factor_deep_linear, descent_factor_relu, BoundKind, CheckReport, CHECK_TOL,
    INTERIOR_CONSTANT,
};
pub use dynamics::{predict_first_order, FirstOrderPrediction};
pub use gram::{assemble_padded, block_widths, gram_h_infinity, gram_h_tkc, gram_p0, gram_p_tkc};
pub use monitor::{DeepLinearMonitor, MonitorChecks, Schedule, StopBelow, TwoLayerMonitor};
pub use spectrum::{sigma_min_nonzero, spectrum, symmetric_spectrum, GramSpectrum, SYMMETRY_TOL};
