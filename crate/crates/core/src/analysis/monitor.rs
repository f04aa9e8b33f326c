use std::collections::BTreeSet;

use nalgebra::DMatrix;

use super::bounds::{layer_drift_radius, local_drift_radius, neuron_drift_radius};
use super::checks::{
    check_drift, check_local_descent, check_local_deviation, check_local_drift, check_neuron_drift,
    check_output_deviation, descent_factor_deep_linear, descent_factor_relu,
};
use super::dynamics::{predict_first_order, FirstOrderPrediction};
use super::spectrum::sigma_min_nonzero;
use crate::error::{Error, Result};
use crate::federation::{Observation, RoundContext, RoundObserver};
use crate::linalg::{hcat, spectral_norm, vectorize};
use crate::models::{forward_two_layer, DeepLinearParams, LabeledBatch, Network, TwoLayerParams};
use crate::scalar::Scalar;

/// Which runtime checks a monitor evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorChecks {
    pub descent: bool,
    pub deviation: bool,
    pub drift: bool,
    pub local_drift: bool,
}

impl Default for MonitorChecks {
    fn default() -> Self {
        Self { descent: true, deviation: true, drift: true, local_drift: true }
    }
}

impl MonitorChecks {
    pub fn none() -> Self {
        Self { descent: false, deviation: false, drift: false, local_drift: false }
    }
}

/// Rounds a monitor looks at and when it asks the engine to stop.
#[derive(Debug, Clone)]
pub struct Schedule<T> {
    /// `None` checks every round.
    pub rounds: Option<BTreeSet<usize>>,
    /// Stop once the global loss after a round is at or below this value.
    pub stop_below: Option<T>,
}

impl<T> Default for Schedule<T> {
    fn default() -> Self {
        Self { rounds: None, stop_below: None }
    }
}

impl<T: Scalar> Schedule<T> {
    fn active(&self, t: usize) -> bool {
        self.rounds.as_ref().is_none_or(|r| r.contains(&t))
    }

    fn stop(&self, loss: T) -> bool {
        self.stop_below.is_some_and(|b| loss <= b)
    }
}

fn stacked_x<T: Scalar>(batches: &[LabeledBatch<T>]) -> Result<DMatrix<T>> {
    let xs: Vec<&DMatrix<T>> = batches.iter().map(|b| b.x()).collect();
    hcat(&xs)
}

#[derive(Debug, Clone)]
struct ClientStats<T> {
    lambda_xtx: T,
    norm_x: T,
    sigma_min_x: T,
}

/// Runtime checks for deep linear FedAvg: local descent, stacked local
/// deviation, layer drift from initialization and per-round local drift,
/// plus an optional first-order prediction at one round.
pub struct DeepLinearMonitor<T: Scalar> {
    init: DeepLinearParams<T>,
    clients: Vec<ClientStats<T>>,
    norm_x: T,
    layer_radius: T,
    pub checks: MonitorChecks,
    pub schedule: Schedule<T>,
    pub first_order_round: Option<usize>,
    pub first_order: Option<FirstOrderPrediction<T>>,
}

impl<T: Scalar> DeepLinearMonitor<T> {
    /// `loss0` plays the role of the loss bound `B` in the layer radius.
    pub fn new(init: &DeepLinearParams<T>, batches: &[LabeledBatch<T>], loss0: T) -> Result<Self> {
        let x = stacked_x(batches)?;
        let norm_x = spectral_norm(&x);
        let (sigma_min_x, _) = sigma_min_nonzero(&x)?;
        let clients = batches
            .iter()
            .map(|b| {
                let (s, _) = sigma_min_nonzero(b.x())?;
                Ok(ClientStats { lambda_xtx: s * s, norm_x: spectral_norm(b.x()), sigma_min_x: s })
            })
            .collect::<Result<Vec<_>>>()?;
        let layer_radius = layer_drift_radius(loss0, init.d_out(), batches.len(), norm_x, init.depth(), sigma_min_x);
        Ok(Self {
            init: init.clone(),
            clients,
            norm_x,
            layer_radius,
            checks: MonitorChecks::default(),
            schedule: Schedule::default(),
            first_order_round: None,
            first_order: None,
        })
    }

    pub fn layer_radius(&self) -> T {
        self.layer_radius
    }

    fn needs_trajectories(&self, t: usize) -> bool {
        (self.schedule.active(t) && (self.checks.deviation || self.checks.local_drift))
            || self.first_order_round == Some(t)
    }
}

impl<T: Scalar> RoundObserver<DeepLinearParams<T>, T> for DeepLinearMonitor<T> {
    fn wants_trajectories(&self, round: usize) -> bool {
        self.needs_trajectories(round)
    }

    fn observe(&mut self, ctx: &RoundContext<'_, DeepLinearParams<T>, T>) -> Result<Observation> {
        let t = ctx.round();
        let stop = self.schedule.stop(ctx.next_loss);
        if self.first_order_round == Some(t) {
            let traj = ctx.trajectories.ok_or_else(|| Error::invalid("first-order prediction needs local trajectories"))?;
            self.first_order = Some(predict_first_order(
                &self.init,
                ctx.global,
                ctx.next_global,
                traj,
                ctx.batches,
                ctx.members,
                ctx.cfg.eta,
                ctx.cfg.local_steps,
            )?);
        }
        if !self.schedule.active(t) {
            return Ok(Observation { reports: Vec::new(), stop });
        }
        let eta = ctx.cfg.eta;
        let depth = self.init.depth();
        let d_out = self.init.d_out();
        let mut reports = Vec::new();
        if self.checks.descent {
            for (j, &c) in ctx.members.members().iter().enumerate() {
                let factor = descent_factor_deep_linear(eta, depth, self.clients[c].lambda_xtx, d_out);
                reports.push(
                    check_local_descent("local-descent", &ctx.local_losses[j], factor)
                        .at_round(t)
                        .for_client(c),
                );
            }
        }
        if let Some(traj) = ctx.trajectories {
            if self.checks.deviation {
                let mut global = Vec::new();
                for &c in ctx.members.members() {
                    global.push(ctx.global.output(ctx.batches[c].x())? - ctx.batches[c].y());
                }
                let global_stack = vectorize(&hcat(&global.iter().collect::<Vec<_>>())?);
                let steps = traj[0].len();
                let mut stacks = Vec::with_capacity(steps);
                for k in 0..steps {
                    let mut parts = Vec::with_capacity(traj.len());
                    for (j, &c) in ctx.members.members().iter().enumerate() {
                        parts.push(traj[j][k].output(ctx.batches[c].x())? - ctx.batches[c].y());
                    }
                    stacks.push(vectorize(&hcat(&parts.iter().collect::<Vec<_>>())?));
                }
                reports.extend(
                    check_local_deviation(&stacks, &global_stack, eta, self.norm_x, d_out)
                        .into_iter()
                        .map(|r| r.at_round(t)),
                );
            }
            if self.checks.local_drift {
                for (j, &c) in ctx.members.members().iter().enumerate() {
                    let b = &ctx.batches[c];
                    let res = (ctx.global.output(b.x())? - b.y()).norm();
                    let s = &self.clients[c];
                    let radius = local_drift_radius(d_out, s.norm_x, depth, s.sigma_min_x, res);
                    for (k, local) in traj[j].iter().enumerate().skip(1) {
                        reports.extend(
                            check_local_drift(local, ctx.global, radius)
                                .into_iter()
                                .map(|r| r.at_round(t).at_step(k).for_client(c)),
                        );
                    }
                }
            }
        }
        if self.checks.drift {
            reports.extend(
                check_drift(ctx.next_global, &self.init, self.layer_radius)
                    .into_iter()
                    .map(|r| r.at_round(t)),
            );
        }
        Ok(Observation { reports, stop })
    }
}

/// Runtime checks for two-layer ReLU FedAvg: local descent, output
/// deviation during local steps, and per-neuron drift from initialization.
pub struct TwoLayerMonitor<T: Scalar> {
    init: TwoLayerParams<T>,
    lambda: T,
    samples: usize,
    neuron_radius: T,
    pub checks: MonitorChecks,
    pub schedule: Schedule<T>,
}

impl<T: Scalar> TwoLayerMonitor<T> {
    /// `lambda` is `λ_min(H∞)` of the full input set.
    pub fn new(init: &TwoLayerParams<T>, batches: &[LabeledBatch<T>], lambda: T) -> Result<Self> {
        if !(lambda > T::zero()) {
            return Err(Error::invalid(format!("least eigenvalue of H-infinity must be positive, got {lambda}")));
        }
        let samples: usize = batches.iter().map(|b| b.len()).sum();
        let mut residual_sq = T::zero();
        for b in batches {
            let r = (forward_two_layer(init, b.x())? - b.y()).norm();
            residual_sq += r * r;
        }
        let neuron_radius = neuron_drift_radius(batches.len(), samples, residual_sq.sqrt(), init.width(), lambda);
        Ok(Self {
            init: init.clone(),
            lambda,
            samples,
            neuron_radius,
            checks: MonitorChecks { local_drift: false, ..MonitorChecks::default() },
            schedule: Schedule::default(),
        })
    }

    pub fn neuron_radius(&self) -> T {
        self.neuron_radius
    }
}

impl<T: Scalar> RoundObserver<TwoLayerParams<T>, T> for TwoLayerMonitor<T> {
    fn wants_trajectories(&self, round: usize) -> bool {
        self.schedule.active(round) && self.checks.deviation
    }

    fn observe(&mut self, ctx: &RoundContext<'_, TwoLayerParams<T>, T>) -> Result<Observation> {
        let t = ctx.round();
        let stop = self.schedule.stop(ctx.next_loss);
        if !self.schedule.active(t) {
            return Ok(Observation { reports: Vec::new(), stop });
        }
        let eta = ctx.cfg.eta;
        let mut reports = Vec::new();
        if self.checks.descent {
            let factor = descent_factor_relu(eta, self.lambda);
            for (j, &c) in ctx.members.members().iter().enumerate() {
                reports.push(
                    check_local_descent("local-descent", &ctx.local_losses[j], factor)
                        .at_round(t)
                        .for_client(c),
                );
            }
        }
        if let (true, Some(traj)) = (self.checks.deviation, ctx.trajectories) {
            for (j, &c) in ctx.members.members().iter().enumerate() {
                let b = &ctx.batches[c];
                let global_out = forward_two_layer(ctx.global, b.x())?;
                let outs = traj[j]
                    .iter()
                    .map(|p| forward_two_layer(p, b.x()))
                    .collect::<Result<Vec<_>>>()?;
                reports.extend(
                    check_output_deviation(&outs, &global_out, b.y(), eta, self.samples, ctx.cfg.local_steps)
                        .into_iter()
                        .map(|r| r.at_round(t).for_client(c)),
                );
            }
        }
        if self.checks.drift {
            reports.push(check_neuron_drift(ctx.next_global, &self.init, self.neuron_radius).at_round(t));
        }
        Ok(Observation { reports, stop })
    }
}

/// Stops once the loss after a round reaches a threshold; no checks.
pub struct StopBelow<T>(pub T);

impl<P, T: Scalar> RoundObserver<P, T> for StopBelow<T> {
    fn observe(&mut self, ctx: &RoundContext<'_, P, T>) -> Result<Observation> {
        Ok(Observation { reports: Vec::new(), stop: ctx.next_loss <= self.0 })
    }
}
