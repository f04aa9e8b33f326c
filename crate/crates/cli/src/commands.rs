//! `train`, `sweep` and `verify`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use fedpp_core::analysis::{
    check_h_infinity_trace, check_init_spectra, check_lambda_floor, gram_h_infinity, lambda_min_floor,
    sigma_min_nonzero, symmetric_spectrum, CheckReport, DeepLinearMonitor, MonitorChecks, Schedule, TwoLayerMonitor,
};
use serde::Serialize;

use crate::config::{Check, ExperimentConfig};
use crate::error::{write_file, AppError};
use crate::experiment::{attach_bound, least_eigenvalue, prepare, run, run_deep_linear, run_two_layer, Model, Workload};
use crate::plot::{log_plot, Series};

pub const TRACE_HEADER: &str = "t,participants,loss,ratio,rho_theory,bound_cum";
pub const SWEEP_HEADER: &str = "rate,t,mean_loss,min_loss,max_loss";

/// Relative first-order error allowed at the predicted round.
pub const FIRST_ORDER_TOL: f64 = 1e-2;
/// Accepted range of err(η)/err(η/2).
pub const HALVING_RANGE: (f64, f64) = (3.5, 4.5);

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn create_dir(out: &Path) -> Result<(), AppError> {
    std::fs::create_dir_all(out).map_err(|e| AppError::io(out, e))
}

fn to_json<S: Serialize>(value: &S) -> Result<String, AppError> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| AppError::Io(format!("serializing output: {e}")))
}

#[derive(Serialize)]
struct TraceFile<'a> {
    config: &'a ExperimentConfig,
    eta: f64,
    lambda_min: Option<f64>,
    dropped_samples: usize,
    perturbed_inputs: usize,
    initial_loss: f64,
    final_loss: f64,
    rounds: &'a [fedpp_core::RoundTrace],
}

/// Summary of a finished `train`.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub rounds: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub bounded: bool,
}

pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainSummary, AppError> {
    let w = prepare(cfg, true)?;
    let mut outcome = run(&w)?;
    let bound = attach_bound(&w, &mut outcome);

    let mut csv = String::from(TRACE_HEADER);
    csv.push('\n');
    for tr in &outcome.traces {
        let members: Vec<String> = tr.members.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            tr.t,
            members.join(";"),
            num(tr.loss),
            num(tr.ratio),
            opt(tr.rho),
            opt(tr.bound)
        );
    }
    create_dir(out)?;
    write_file(out.join("trace.csv"), csv)?;
    let file = TraceFile {
        config: cfg,
        eta: w.fed.eta,
        lambda_min: w.lambda_min,
        dropped_samples: w.dropped,
        perturbed_inputs: w.perturbed,
        initial_loss: outcome.initial_loss,
        final_loss: outcome.final_loss,
        rounds: &outcome.traces,
    };
    write_file(out.join("trace.json"), to_json(&file)?)?;

    let curve = outcome.curve();
    let mut series = vec![Series {
        label: "loss".into(),
        points: curve.iter().enumerate().map(|(t, &l)| (t as f64, l)).collect(),
        dashed: false,
    }];
    if let Some(b) = &bound {
        series.push(Series {
            label: "bound".into(),
            points: (0..=b.rounds()).map(|t| (t as f64, b.value(t))).collect(),
            dashed: true,
        });
    }
    write_file(out.join("loss.svg"), log_plot("global loss", "round", "loss", &series))?;
    Ok(TrainSummary {
        rounds: outcome.traces.len(),
        initial_loss: outcome.initial_loss,
        final_loss: outcome.final_loss,
        bounded: bound.is_some(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub rate: f64,
    pub seed: u64,
    pub final_loss: Option<f64>,
    pub error: Option<String>,
}

/// Loss statistics at round `t` over the seeds that finished.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub t: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub cells: Vec<SweepCell>,
    pub curves: Vec<(f64, Vec<SweepRow>)>,
}

pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<SweepSummary, AppError> {
    cfg.validate()?;
    let mut cells = Vec::new();
    let mut curves = Vec::new();
    let mut first_error = None;
    for &rate in &cfg.sweep.rates {
        let mut runs: Vec<Vec<f64>> = Vec::new();
        for &seed in &cfg.sweep.seeds {
            let mut c = cfg.clone();
            c.seed = seed;
            c.federation.rate = rate;
            c.federation.schedule = None;
            match prepare(&c, false).and_then(|w| run(&w)) {
                Ok(o) => {
                    cells.push(SweepCell { rate, seed, final_loss: Some(o.final_loss), error: None });
                    runs.push(o.curve());
                }
                Err(e) => {
                    cells.push(SweepCell { rate, seed, final_loss: None, error: Some(e.to_string()) });
                    first_error.get_or_insert(e);
                }
            }
        }
        let mut rows = Vec::new();
        if let Some(len) = runs.iter().map(|r| r.len()).min() {
            for t in 0..len {
                let vals: Vec<f64> = runs.iter().map(|r| r[t]).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                rows.push(SweepRow { t, mean, min, max });
            }
        }
        curves.push((rate, rows));
    }
    if cells.iter().all(|c| c.error.is_some()) {
        if let Some(e) = first_error {
            return Err(e);
        }
    }

    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for (rate, rows) in &curves {
        for r in rows {
            let _ = writeln!(csv, "{rate},{},{},{},{}", r.t, num(r.mean), num(r.min), num(r.max));
        }
    }
    create_dir(out)?;
    write_file(out.join("sweep.csv"), csv)?;
    #[derive(Serialize)]
    struct SweepFile<'a> {
        config: &'a ExperimentConfig,
        cells: &'a [SweepCell],
    }
    write_file(out.join("sweep.json"), to_json(&SweepFile { config: cfg, cells: &cells })?)?;
    let series: Vec<Series> = curves
        .iter()
        .map(|(rate, rows)| Series {
            label: format!("rate {rate}"),
            points: rows.iter().map(|r| (r.t as f64, r.mean)).collect(),
            dashed: false,
        })
        .collect();
    write_file(out.join("sweep.svg"), log_plot("mean global loss", "round", "loss", &series))?;
    Ok(SweepSummary { cells, curves })
}

/// Pass/fail tally for the reports sharing one name.
#[derive(Debug, Clone, Serialize)]
pub struct CheckTally {
    pub evaluated: usize,
    pub failed: usize,
    pub worst_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub summary: BTreeMap<String, CheckTally>,
    pub reports: Vec<CheckReport>,
}

impl VerifyReport {
    fn new(checks: Vec<Check>, reports: Vec<CheckReport>) -> Self {
        let mut summary: BTreeMap<String, CheckTally> = BTreeMap::new();
        for r in &reports {
            let e = summary
                .entry(r.name.clone())
                .or_insert(CheckTally { evaluated: 0, failed: 0, worst_slack: 0.0 });
            e.evaluated += 1;
            e.failed += usize::from(!r.passed);
            if r.slack > e.worst_slack || r.slack.is_nan() {
                e.worst_slack = r.slack;
            }
        }
        let passed = reports.iter().all(|r| r.passed);
        Self { passed, checks, summary, reports }
    }
}

pub fn verify(cfg: &ExperimentConfig, out: &Path) -> Result<VerifyReport, AppError> {
    let checks = cfg.selected_checks();
    let reports = if checks.is_empty() {
        cfg.validate()?;
        Vec::new()
    } else {
        let w = prepare(cfg, false)?;
        match &w.model {
            Model::DeepLinear(_) => verify_deep_linear(cfg, &w, &checks)?,
            Model::TwoLayer(_) => verify_two_layer(cfg, &w, &checks)?,
        }
    };
    let report = VerifyReport::new(checks, reports);
    create_dir(out)?;
    write_file(out.join("verify.json"), to_json(&report)?)?;
    Ok(report)
}

fn schedule(cfg: &ExperimentConfig) -> Schedule<f64> {
    Schedule { rounds: cfg.analysis.rounds.as_ref().map(|r| r.iter().copied().collect::<BTreeSet<_>>()), stop_below: None }
}

fn monitor_checks(checks: &[Check]) -> MonitorChecks {
    MonitorChecks {
        descent: checks.contains(&Check::LocalDescent),
        deviation: checks.contains(&Check::LocalDeviation),
        drift: checks.contains(&Check::Drift),
        local_drift: checks.contains(&Check::LocalDrift),
    }
}

fn verify_deep_linear(cfg: &ExperimentConfig, w: &Workload, checks: &[Check]) -> Result<Vec<CheckReport>, AppError> {
    let Model::DeepLinear(init) = &w.model else { unreachable!() };
    let mut reports = Vec::new();
    if checks.contains(&Check::InitSpectra) {
        reports.extend(check_init_spectra(init, &w.features)?);
    }
    if checks.contains(&Check::LambdaFloor) {
        let lambda = least_eigenvalue(&w.model, &w.features)?;
        let (sigma_min, rank) = sigma_min_nonzero(&w.features)?;
        let floor = lambda_min_floor(init.depth(), sigma_min, w.d_out);
        reports.push(
            check_lambda_floor(lambda, floor)
                .input("sigma_min_x", sigma_min)
                .input("rank_x", rank as f64),
        );
    }
    let mc = monitor_checks(checks);
    let first_order = checks.contains(&Check::FirstOrder);
    if mc == MonitorChecks::none() && !first_order {
        return Ok(reports);
    }
    let fo_round = cfg.analysis.first_order_round.unwrap_or(3.min(w.fed.rounds.saturating_sub(1)));
    let loss0 = loss_at_init(w)?;
    let mut monitor = DeepLinearMonitor::new(init, &w.batches, loss0)?;
    monitor.checks = mc;
    monitor.schedule = schedule(cfg);
    if first_order && w.fed.rounds > 0 {
        monitor.first_order_round = Some(fo_round);
    }
    let outcome = run_deep_linear(w, init, &mut monitor)?;
    for tr in outcome.traces {
        reports.extend(tr.diagnostics);
    }
    if first_order {
        match monitor.first_order.take() {
            None => reports.push(CheckReport::vacuous("first-order-error")),
            Some(pred) => {
                let err = pred.relative_error;
                reports.push(
                    CheckReport::upper("first-order-error", err, FIRST_ORDER_TOL)
                        .at_round(fo_round)
                        .input("fourth", pred.fourth)
                        .input("third", pred.third),
                );
                let mut half = w.clone();
                half.fed.eta = w.fed.eta / 2.0;
                half.fed.rounds = fo_round + 1;
                let mut m2 = DeepLinearMonitor::new(init, &half.batches, loss0)?;
                m2.checks = MonitorChecks::none();
                m2.first_order_round = Some(fo_round);
                run_deep_linear(&half, init, &mut m2)?;
                let err_half = m2.first_order.map(|p| p.relative_error).unwrap_or(f64::NAN);
                let ratio = err / err_half;
                reports.push(
                    CheckReport::lower("first-order-halving-low", ratio, HALVING_RANGE.0)
                        .at_round(fo_round)
                        .input("error_half_step", err_half),
                );
                reports.push(
                    CheckReport::upper("first-order-halving-high", ratio, HALVING_RANGE.1)
                        .at_round(fo_round)
                        .input("error_half_step", err_half),
                );
            }
        }
    }
    Ok(reports)
}

fn loss_at_init(w: &Workload) -> Result<f64, AppError> {
    use fedpp_core::models::Network;
    let mut total = 0.0;
    for b in &w.batches {
        total += match &w.model {
            Model::DeepLinear(p) => p.loss(b)?,
            Model::TwoLayer(p) => p.loss(b)?,
        };
    }
    Ok(total)
}

fn verify_two_layer(cfg: &ExperimentConfig, w: &Workload, checks: &[Check]) -> Result<Vec<CheckReport>, AppError> {
    let Model::TwoLayer(init) = &w.model else { unreachable!() };
    let mut reports = Vec::new();
    let h = gram_h_infinity(&w.features)?;
    let lambda = symmetric_spectrum(&h)?.lambda_min.unwrap_or(0.0);
    if checks.contains(&Check::HInfinityTrace) {
        reports.push(check_h_infinity_trace(&h));
    }
    if checks.contains(&Check::HInfinityPositive) {
        reports.push(CheckReport::lower("h-infinity-positive", lambda, 1e-12));
    }
    let mc = monitor_checks(checks);
    if mc == MonitorChecks::none() {
        return Ok(reports);
    }
    if lambda.is_nan() || lambda <= 0.0 {
        if !checks.contains(&Check::HInfinityPositive) {
            reports.push(CheckReport::lower("h-infinity-positive", lambda, 1e-12));
        }
        return Ok(reports);
    }
    let mut monitor = TwoLayerMonitor::new(init, &w.batches, lambda)?;
    monitor.checks = mc;
    monitor.schedule = schedule(cfg);
    let outcome = run_two_layer(w, init, &mut monitor)?;
    for tr in outcome.traces {
        reports.extend(tr.diagnostics);
    }
    Ok(reports)
}
