//! The FedAvg engine: each round broadcasts the global model to a sampled
//! participant set, runs `K` local gradient steps per participant and
//! replaces the global model by the unweighted mean of the returned
//! parameters.

mod config;
mod engine;

pub use config::{ClientSet, FederationConfig, Participation};
pub use engine::{
    aggregate, local_train, local_train_recorded, run_fedavg, run_fedavg_observed,
    sample_participants, FedAvgRun, LocalRun, NoObserver, Observation, RoundContext,
    RoundObserver, RoundTrace,
};
