use nalgebra::DMatrix;
use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{participants_for_rate, ClientSet, FederationConfig, Participation};
use crate::analysis::CheckReport;
use crate::error::{DivergenceSite, Error, Result};
use crate::models::{LabeledBatch, Network};
use crate::rng::{stream, Purpose};
use crate::scalar::{count, Scalar};

/// Draws `S_t`. Fixed-rate schedules sample from the stream keyed by
/// `(seed, t)`, so a round's participants do not depend on earlier rounds.
pub fn sample_participants<T: Scalar>(t: usize, cfg: &FederationConfig<T>) -> Result<ClientSet> {
    match &cfg.participation {
        Participation::Rate(rate) => {
            let k = participants_for_rate(*rate, cfg.clients);
            let mut rng = stream(cfg.seed, Purpose::Participants, t as u64);
            let members = index::sample(&mut rng, cfg.clients, k).into_vec();
            ClientSet::new(t, members, cfg.clients)
        }
        Participation::Explicit(sets) => {
            let set = sets
                .get(t)
                .ok_or_else(|| Error::invalid(format!("explicit schedule has no entry for round {t}")))?;
            ClientSet::new(t, set.clone(), cfg.clients)
        }
    }
}

/// Result of `K` local steps on one client.
#[derive(Debug, Clone)]
pub struct LocalRun<P, T> {
    pub params: P,
    /// `losses[k]` is the local loss after `k` steps; `losses[0]` is the
    /// loss of the broadcast model.
    pub losses: Vec<T>,
    /// `θ_0, …, θ_K` when recorded, empty otherwise.
    pub trajectory: Vec<P>,
}

fn descend<T: Scalar, P: Network<T>>(
    params: &P,
    batch: &LabeledBatch<T>,
    eta: T,
    steps: usize,
    record: bool,
) -> Result<LocalRun<P, T>> {
    let mut current = params.clone();
    let mut losses = Vec::with_capacity(steps + 1);
    let mut trajectory = Vec::new();
    if record {
        trajectory.reserve(steps + 1);
        trajectory.push(current.clone());
    }
    for k in 0..steps {
        let (loss, grads) = current.loss_and_gradients(batch)?;
        if !loss.is_finite() {
            return Err(Error::Divergence(DivergenceSite { step: k, ..Default::default() }));
        }
        losses.push(loss);
        let next: Vec<DMatrix<T>> = current
            .tensors()
            .iter()
            .zip(grads)
            .map(|(w, g)| w - g * eta)
            .collect();
        current = current.with_tensors(next)?;
        if record {
            trajectory.push(current.clone());
        }
    }
    let last = current.loss(batch)?;
    if !last.is_finite() {
        return Err(Error::Divergence(DivergenceSite { step: steps, ..Default::default() }));
    }
    losses.push(last);
    Ok(LocalRun { params: current, losses, trajectory })
}

/// `θ_k = θ_{k−1} − η∇L_c(θ_{k−1})` applied `steps` times, all tensors
/// updated from the gradient at the previous iterate.
pub fn local_train<T: Scalar, P: Network<T>>(
    params: &P,
    batch: &LabeledBatch<T>,
    eta: T,
    steps: usize,
) -> Result<LocalRun<P, T>> {
    descend(params, batch, eta, steps, false)
}

/// [`local_train`] keeping every intermediate iterate.
pub fn local_train_recorded<T: Scalar, P: Network<T>>(
    params: &P,
    batch: &LabeledBatch<T>,
    eta: T,
    steps: usize,
) -> Result<LocalRun<P, T>> {
    descend(params, batch, eta, steps, true)
}

/// Entrywise mean of the given parameter sets, accumulated in list order.
pub fn aggregate<T: Scalar, P: Network<T>>(params: &[P]) -> Result<P> {
    let first = params
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate an empty parameter list"))?;
    let mut acc: Vec<DMatrix<T>> = first
        .tensors()
        .iter()
        .map(|t| DMatrix::zeros(t.nrows(), t.ncols()))
        .collect();
    for p in params {
        let tensors = p.tensors();
        if tensors.len() != acc.len() || tensors.iter().zip(&acc).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::invalid("parameter sets with different shapes cannot be averaged"));
        }
        for (a, t) in acc.iter_mut().zip(tensors) {
            *a += t;
        }
    }
    let n = count::<T>(params.len());
    first.with_tensors(acc.into_iter().map(|a| a / n).collect())
}

/// One row of the training trace.
#[derive(Debug, Clone, Serialize)]
pub struct RoundTrace<T: Scalar> {
    pub t: usize,
    pub members: Vec<usize>,
    /// Global loss `L(t)` before the round.
    pub loss: T,
    /// Global loss after aggregation, `L(t+1)`.
    pub next_loss: T,
    /// `L(t)/N`, the client-averaged objective.
    pub objective: T,
    /// Final local loss of each participant, in `members` order.
    pub client_losses: Vec<T>,
    /// `L(t+1)/L(t)`; zero once the loss is exactly zero.
    pub ratio: T,
    /// Theoretical per-round factor `ρ_t`, when a spectrum is available.
    pub rho: Option<T>,
    /// `L(0)·Π_{i<t} ρ_i`, the bound on `loss`.
    pub bound: Option<T>,
    pub diagnostics: Vec<CheckReport>,
}

/// Everything an observer may inspect after a round has been aggregated.
pub struct RoundContext<'a, P, T: Scalar> {
    pub cfg: &'a FederationConfig<T>,
    pub members: &'a ClientSet,
    /// Global parameters broadcast at the start of the round.
    pub global: &'a P,
    /// Aggregated parameters after the round.
    pub next_global: &'a P,
    /// Every client's batch, indexed by client.
    pub batches: &'a [LabeledBatch<T>],
    /// Per participant (in `members` order): loss after each local step.
    pub local_losses: &'a [Vec<T>],
    /// Per participant: `θ_0 … θ_K`, present when the observer asked for them.
    pub trajectories: Option<&'a [Vec<P>]>,
    pub loss: T,
    pub next_loss: T,
}

impl<P, T: Scalar> RoundContext<'_, P, T> {
    pub fn round(&self) -> usize {
        self.members.round()
    }
}

#[derive(Debug, Default)]
pub struct Observation {
    pub reports: Vec<CheckReport>,
    pub stop: bool,
}

/// Hook run once per round, after aggregation and before the trace row is
/// stored. Reports land in [`RoundTrace::diagnostics`]; `stop` ends the run
/// after the current round.
pub trait RoundObserver<P, T: Scalar> {
    fn wants_trajectories(&self, _round: usize) -> bool {
        false
    }

    fn observe(&mut self, ctx: &RoundContext<'_, P, T>) -> Result<Observation>;
}

pub struct NoObserver;

impl<P, T: Scalar> RoundObserver<P, T> for NoObserver {
    fn observe(&mut self, _ctx: &RoundContext<'_, P, T>) -> Result<Observation> {
        Ok(Observation::default())
    }
}

#[derive(Debug, Clone)]
pub struct FedAvgRun<P, T: Scalar> {
    pub traces: Vec<RoundTrace<T>>,
    pub params: P,
    pub initial_loss: T,
    pub final_loss: T,
    /// Set when an observer ended the run before `cfg.rounds`.
    pub stopped_early: bool,
}

fn global_loss<T: Scalar, P: Network<T>>(params: &P, batches: &[LabeledBatch<T>]) -> Result<T> {
    let mut total = T::zero();
    for b in batches {
        total += params.loss(b)?;
    }
    Ok(total)
}

pub fn run_fedavg<T: Scalar, P: Network<T>>(
    cfg: &FederationConfig<T>,
    init: &P,
    batches: &[LabeledBatch<T>],
) -> Result<FedAvgRun<P, T>> {
    run_fedavg_observed(cfg, init, batches, &mut NoObserver)
}

/// Algorithm loop with a per-round observer. Local training of the
/// participants of one round fans out over the rayon pool; results are
/// collected and averaged in ascending client order, so the output does not
/// depend on the number of worker threads.
pub fn run_fedavg_observed<T: Scalar, P: Network<T>>(
    cfg: &FederationConfig<T>,
    init: &P,
    batches: &[LabeledBatch<T>],
    observer: &mut dyn RoundObserver<P, T>,
) -> Result<FedAvgRun<P, T>> {
    cfg.validate()?;
    if batches.len() != cfg.clients {
        return Err(Error::invalid(format!(
            "{} client batches for N = {} clients",
            batches.len(),
            cfg.clients
        )));
    }
    if let Some(c) = batches.iter().position(|b| b.is_empty()) {
        return Err(Error::invalid(format!("client {c} has no samples")));
    }

    let mut global = init.clone();
    let mut loss = global_loss(&global, batches)?;
    if !loss.is_finite() {
        return Err(Error::Divergence(DivergenceSite::default()));
    }
    let initial_loss = loss;
    let mut traces = Vec::with_capacity(cfg.rounds);
    let mut stopped_early = false;

    for t in 0..cfg.rounds {
        let members = sample_participants(t, cfg)?;
        let record = observer.wants_trajectories(t);
        let runs: Vec<Result<LocalRun<P, T>>> = members
            .members()
            .par_iter()
            .map(|&c| {
                descend(&global, &batches[c], cfg.eta, cfg.local_steps, record)
                    .map_err(|e| e.in_round(t, c))
            })
            .collect();
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

        let mut local_losses = Vec::with_capacity(runs.len());
        let mut locals = Vec::with_capacity(runs.len());
        let mut trajectories = Vec::new();
        for run in runs {
            local_losses.push(run.losses);
            locals.push(run.params);
            if record {
                trajectories.push(run.trajectory);
            }
        }
        let next = aggregate(&locals)?;
        let next_loss = global_loss(&next, batches)?;
        if !next_loss.is_finite() {
            return Err(Error::Divergence(DivergenceSite {
                round: Some(t),
                client: None,
                step: cfg.local_steps,
            }));
        }

        let ctx = RoundContext {
            cfg,
            members: &members,
            global: &global,
            next_global: &next,
            batches,
            local_losses: &local_losses,
            trajectories: record.then_some(trajectories.as_slice()),
            loss,
            next_loss,
        };
        let observation = observer.observe(&ctx)?;

        traces.push(RoundTrace {
            t,
            members: members.members().to_vec(),
            loss,
            next_loss,
            objective: loss / count::<T>(cfg.clients),
            client_losses: local_losses.iter().map(|l| *l.last().expect("K+1 losses")).collect(),
            ratio: if loss > T::zero() { next_loss / loss } else { T::zero() },
            rho: None,
            bound: None,
            diagnostics: observation.reports,
        });
        global = next;
        loss = next_loss;
        if observation.stop {
            stopped_early = t + 1 < cfg.rounds;
            break;
        }
    }

    Ok(FedAvgRun {
        traces,
        params: global,
        initial_loss,
        final_loss: loss,
        stopped_early,
    })
}
