//! Turning a configuration into a federated workload, and running it.

use fedpp_core::analysis::{
    bound_series, condition_number, gram_h_infinity, gram_p0, sigma_min_nonzero, symmetric_spectrum,
    theorem_eta, BoundSeries,
};
use fedpp_core::data::{load_idx, partition_noniid, partition_round_robin, preprocess_unit_norm, synth_linear_dataset, synth_relu_dataset};
use fedpp_core::federation::{run_fedavg_observed, NoObserver, Participation, RoundObserver};
use fedpp_core::linalg::spectral_norm;
use fedpp_core::models::{init_deep_linear, init_two_layer};
use fedpp_core::{Batch, Dataset, DeepLinear, FederationConfig, Matrix, RoundTrace, TwoLayer};

use crate::config::{DataSpec, EtaName, EtaSpec, ExperimentConfig, ModelSpec, PartitionKind};
use crate::error::AppError;

#[derive(Debug, Clone)]
pub enum Model {
    DeepLinear(DeepLinear),
    TwoLayer(TwoLayer),
}

/// Everything a run needs, derived deterministically from the config.
#[derive(Debug, Clone)]
pub struct Workload {
    pub fed: FederationConfig,
    pub model: Model,
    pub batches: Vec<Batch>,
    /// Client inputs stacked in ascending client order.
    pub features: Matrix,
    pub d_out: usize,
    /// Samples left out by the label-skew partitioner.
    pub dropped: usize,
    /// Inputs nudged apart by the unit-norm preprocessing.
    pub perturbed: usize,
    /// `λ_min(P(0))` over the rank of the data (deep linear) or
    /// `λ_min(H∞)` (ReLU); `None` above `max_gram_dim`.
    pub lambda_min: Option<f64>,
}

fn load(cfg: &ExperimentConfig) -> Result<Dataset, AppError> {
    let seed = cfg.seed;
    let ds = match &cfg.data {
        DataSpec::SyntheticLinear { d_in, d_out, n } => synth_linear_dataset(*d_in, *d_out, *n, seed)?.0,
        DataSpec::SyntheticRelu { d, n } => synth_relu_dataset(*d, *n, seed)?,
        DataSpec::Idx { images, labels, subset } => {
            let ds: Dataset = load_idx(images, labels)?;
            match subset {
                Some(n) if *n < ds.len() => ds.head(*n),
                _ => ds,
            }
        }
    };
    Ok(ds)
}

/// Builds data, partition, initial network, learning rate and, when
/// `theory` is set, the least Gram eigenvalue behind the round bounds.
pub fn prepare(cfg: &ExperimentConfig, theory: bool) -> Result<Workload, AppError> {
    cfg.validate()?;
    let f = &cfg.federation;
    let mut ds = load(cfg)?;
    let mut perturbed = 0;
    if let ModelSpec::TwoLayer { .. } = cfg.model {
        if ds.output_dim() != 1 {
            ds = ds.with_scalar_targets()?;
        }
        let pre = preprocess_unit_norm(&ds)?;
        perturbed = pre.perturbed.len();
        ds = pre.dataset;
    }
    let partition = match (f.partition, ds.labels().is_some()) {
        (PartitionKind::Noniid, false) => {
            return Err(AppError::Config("federation.partition: \"noniid\" needs labeled data".into()))
        }
        (PartitionKind::Noniid, true) | (PartitionKind::Auto, true) => {
            partition_noniid(&ds, f.clients, f.classes_per_client, cfg.seed)?
        }
        _ => partition_round_robin(&ds, f.clients)?,
    };
    let batches = partition.batches(&ds)?;
    let stacked = partition.stacked(&ds)?;
    let features = stacked.features().clone();
    let d_out = ds.output_dim();
    let d_in = ds.dim();

    let model = match cfg.model {
        ModelSpec::DeepLinear { depth, width } => Model::DeepLinear(init_deep_linear(depth, width, d_in, d_out, cfg.seed)?),
        ModelSpec::TwoLayer { width } => Model::TwoLayer(init_two_layer(width, d_in, cfg.seed)?),
    };

    let eta = match f.eta {
        EtaSpec::Value(v) => v,
        EtaSpec::Named(EtaName::Theorem) => {
            let depth = match &model {
                Model::DeepLinear(p) => p.depth(),
                Model::TwoLayer(_) => unreachable!("rejected by validation"),
            };
            let norm_x = spectral_norm(&features);
            let (sigma_min, _) = sigma_min_nonzero(&features)?;
            theorem_eta(d_out, depth, condition_number(norm_x, sigma_min), f.local_steps, norm_x)
        }
    };
    let participation = match &f.schedule {
        Some(s) => Participation::Explicit(s.clone()),
        None => Participation::Rate(f.rate),
    };
    let fed = FederationConfig {
        clients: f.clients,
        local_steps: f.local_steps,
        rounds: f.rounds,
        eta,
        participation,
        seed: cfg.seed,
    };
    fed.validate()?;

    let lambda_min = if theory && features.ncols() * d_out <= cfg.analysis.max_gram_dim {
        Some(least_eigenvalue(&model, &features)?)
    } else {
        None
    };

    Ok(Workload { fed, model, batches, features, d_out, dropped: partition.dropped(), perturbed, lambda_min })
}

/// `λ_min(P(0))` restricted to the rank of the data, or `λ_min(H∞)`.
pub fn least_eigenvalue(model: &Model, x: &Matrix) -> Result<f64, AppError> {
    match model {
        Model::DeepLinear(p) => {
            let (_, rank) = sigma_min_nonzero(x)?;
            let s = symmetric_spectrum(&gram_p0(p, x)?)?;
            Ok(s.lambda_at_rank(rank * p.d_out()).unwrap_or(0.0))
        }
        Model::TwoLayer(_) => {
            let s = symmetric_spectrum(&gram_h_infinity(x)?)?;
            Ok(s.lambda_min.unwrap_or(0.0))
        }
    }
}

/// Loss trajectory and per-round traces of one run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub traces: Vec<RoundTrace>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub params: Model,
}

impl Outcome {
    /// `L(0), …, L(T)`.
    pub fn curve(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self.traces.iter().map(|t| t.loss).collect();
        c.push(self.final_loss);
        c
    }
}

pub fn run(w: &Workload) -> Result<Outcome, AppError> {
    match &w.model {
        Model::DeepLinear(p) => run_deep_linear(w, p, &mut NoObserver),
        Model::TwoLayer(p) => run_two_layer(w, p, &mut NoObserver),
    }
}

pub fn run_deep_linear(
    w: &Workload,
    init: &DeepLinear,
    observer: &mut dyn RoundObserver<DeepLinear, f64>,
) -> Result<Outcome, AppError> {
    let r = run_fedavg_observed(&w.fed, init, &w.batches, observer)?;
    Ok(Outcome { traces: r.traces, initial_loss: r.initial_loss, final_loss: r.final_loss, params: Model::DeepLinear(r.params) })
}

pub fn run_two_layer(
    w: &Workload,
    init: &TwoLayer,
    observer: &mut dyn RoundObserver<TwoLayer, f64>,
) -> Result<Outcome, AppError> {
    let r = run_fedavg_observed(&w.fed, init, &w.batches, observer)?;
    Ok(Outcome { traces: r.traces, initial_loss: r.initial_loss, final_loss: r.final_loss, params: Model::TwoLayer(r.params) })
}

/// Fills `rho` and `bound` on every trace. Returns `None` when no bound is
/// available: the eigenvalue was skipped, is not positive, or some factor
/// is not positive.
pub fn attach_bound(w: &Workload, out: &mut Outcome) -> Option<BoundSeries<f64>> {
    let lambda = w.lambda_min?;
    let sizes: Vec<usize> = out.traces.iter().map(|t| t.members.len()).collect();
    let b = bound_series(out.initial_loss, w.fed.eta, w.fed.local_steps, w.fed.clients, lambda, &sizes).ok()?;
    for (t, tr) in out.traces.iter_mut().enumerate() {
        tr.rho = Some(b.factors[t]);
        tr.bound = Some(b.value(t));
    }
    Some(b)
}
