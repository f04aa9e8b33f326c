use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How the participant set `S_t` is chosen each round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Participation {
    /// `⌈rate·N⌉` clients drawn uniformly without replacement.
    Rate(f64),
    /// One explicit set per round.
    Explicit(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationConfig<T: Scalar> {
    pub clients: usize,
    pub local_steps: usize,
    pub rounds: usize,
    pub eta: T,
    pub participation: Participation,
    pub seed: u64,
}

impl<T: Scalar> FederationConfig<T> {
    pub fn full(clients: usize, local_steps: usize, rounds: usize, eta: T, seed: u64) -> Self {
        Self {
            clients,
            local_steps,
            rounds,
            eta,
            participation: Participation::Rate(1.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.clients == 0 {
            return Err(Error::invalid("client count N must be at least 1"));
        }
        if self.local_steps == 0 {
            return Err(Error::invalid("local steps K must be at least 1"));
        }
        if !(self.eta > T::zero()) || !self.eta.is_finite() {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.eta)));
        }
        match &self.participation {
            Participation::Rate(rate) => {
                if !(*rate > 0.0 && *rate <= 1.0) {
                    return Err(Error::invalid(format!(
                        "participation rate must lie in (0, 1], got {rate}"
                    )));
                }
            }
            Participation::Explicit(sets) => {
                if sets.len() < self.rounds {
                    return Err(Error::invalid(format!(
                        "explicit schedule lists {} rounds but {} are configured",
                        sets.len(),
                        self.rounds
                    )));
                }
                for (t, set) in sets.iter().enumerate().take(self.rounds) {
                    ClientSet::new(t, set.clone(), self.clients)?;
                }
            }
        }
        Ok(())
    }

    /// `⌈rate·N⌉` for fixed-rate schedules.
    pub fn per_round(&self) -> Option<usize> {
        match self.participation {
            Participation::Rate(rate) => Some(participants_for_rate(rate, self.clients)),
            Participation::Explicit(_) => None,
        }
    }
}

pub(crate) fn participants_for_rate(rate: f64, clients: usize) -> usize {
    // the small offset keeps products like 0.1·20 from rounding up to 3
    let k = (rate * clients as f64 - 1e-9).ceil() as usize;
    k.clamp(1, clients)
}

/// The participants of one round: nonempty, strictly increasing, all `< N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientSet {
    round: usize,
    members: Vec<usize>,
}

impl ClientSet {
    pub fn new(round: usize, mut members: Vec<usize>, clients: usize) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid(format!("round {round}: participant set is empty")));
        }
        members.sort_unstable();
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("round {round}: duplicate client in participant set")));
        }
        if let Some(&bad) = members.iter().find(|&&c| c >= clients) {
            return Err(Error::invalid(format!(
                "round {round}: client {bad} out of range for N = {clients}"
            )));
        }
        Ok(Self { round, members })
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, client: usize) -> bool {
        self.members.binary_search(&client).is_ok()
    }
}
