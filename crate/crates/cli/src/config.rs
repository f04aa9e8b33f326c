//! JSON experiment configuration. Every field is optional; absent fields
//! take the defaults below.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub const DEFAULT_ETA: f64 = 0.0005;
pub const DEFAULT_WIDTH: usize = 500;
pub const DEFAULT_DEPTH: usize = 3;
pub const DEFAULT_LOCAL_STEPS: usize = 5;
pub const DEFAULT_CLIENTS: usize = 20;
pub const DEFAULT_ROUNDS: usize = 100;
pub const DEFAULT_CLASSES_PER_CLIENT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    DeepLinear {
        #[serde(default = "default_depth")]
        depth: usize,
        #[serde(default = "default_width")]
        width: usize,
    },
    TwoLayer {
        #[serde(default = "default_width")]
        width: usize,
    },
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::DeepLinear { depth: DEFAULT_DEPTH, width: DEFAULT_WIDTH }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    SyntheticLinear { d_in: usize, d_out: usize, n: usize },
    SyntheticRelu { d: usize, n: usize },
    Idx {
        images: PathBuf,
        labels: PathBuf,
        /// Keep only the first `subset` samples.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subset: Option<usize>,
    },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::SyntheticLinear { d_in: 10, d_out: 5, n: 32 }
    }
}

/// Either a number or `"theorem"`, which derives `d_out/(50·L·κ·K·‖X‖²)`
/// from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Value(f64),
    Named(EtaName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaName {
    Theorem,
}

impl Default for EtaSpec {
    fn default() -> Self {
        EtaSpec::Value(DEFAULT_ETA)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionKind {
    /// Label-skew split for labeled data, round-robin otherwise.
    Auto,
    Noniid,
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationSpec {
    pub clients: usize,
    pub local_steps: usize,
    pub rounds: usize,
    pub eta: EtaSpec,
    pub rate: f64,
    /// Explicit participant sets, one per round; overrides `rate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<Vec<usize>>>,
    pub partition: PartitionKind,
    pub classes_per_client: usize,
}

impl Default for FederationSpec {
    fn default() -> Self {
        Self {
            clients: DEFAULT_CLIENTS,
            local_steps: DEFAULT_LOCAL_STEPS,
            rounds: DEFAULT_ROUNDS,
            eta: EtaSpec::default(),
            rate: 1.0,
            schedule: None,
            partition: PartitionKind::Auto,
            classes_per_client: DEFAULT_CLASSES_PER_CLIENT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    InitSpectra,
    LambdaFloor,
    LocalDescent,
    LocalDeviation,
    Drift,
    LocalDrift,
    HInfinityTrace,
    HInfinityPositive,
    FirstOrder,
}

impl Check {
    pub const DEEP_LINEAR: [Check; 7] = [
        Check::InitSpectra,
        Check::LambdaFloor,
        Check::LocalDescent,
        Check::LocalDeviation,
        Check::Drift,
        Check::LocalDrift,
        Check::FirstOrder,
    ];
    pub const TWO_LAYER: [Check; 5] = [
        Check::HInfinityTrace,
        Check::HInfinityPositive,
        Check::LocalDescent,
        Check::LocalDeviation,
        Check::Drift,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    /// Checks run by `verify`; `None` selects every check that applies to
    /// the model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<Check>>,
    /// Rounds the per-round checks look at; `None` means all rounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<Vec<usize>>,
    /// Round of the first-order prediction; defaults to `min(3, T − 1)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_order_round: Option<usize>,
    /// Largest `n·d_out` for which theoretical factors are computed.
    pub max_gram_dim: usize,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self { checks: None, rounds: None, first_order_round: None, max_gram_dim: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { rates: vec![0.1, 0.5, 1.0], seeds: vec![0, 1, 2, 3, 4] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub data: DataSpec,
    pub federation: FederationSpec,
    pub analysis: AnalysisSpec,
    pub sweep: SweepSpec,
    pub output: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            data: DataSpec::default(),
            federation: FederationSpec::default(),
            analysis: AnalysisSpec::default(),
            sweep: SweepSpec::default(),
            output: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn default_depth() -> usize {
    DEFAULT_DEPTH
}

fn default_width() -> usize {
    DEFAULT_WIDTH
}

#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "at `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.to_string(), message: message.into() }
}

/// Parses and validates a JSON document. An empty or whitespace-only
/// document yields the defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = if text.trim().is_empty() {
        ExperimentConfig::default()
    } else {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| err(&e.path().to_string(), e.inner().to_string()))?
    };
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.model {
            ModelSpec::DeepLinear { depth, width } => {
                if *depth == 0 {
                    return Err(err("model.deep_linear.depth", "must be at least 1"));
                }
                if *width == 0 {
                    return Err(err("model.deep_linear.width", "must be at least 1"));
                }
            }
            ModelSpec::TwoLayer { width } => {
                if *width == 0 {
                    return Err(err("model.two_layer.width", "must be at least 1"));
                }
                if let DataSpec::SyntheticLinear { d_out, .. } = self.data {
                    if d_out != 1 {
                        return Err(err("data.synthetic_linear.d_out", "the two-layer model needs d_out = 1"));
                    }
                }
            }
        }
        match &self.data {
            DataSpec::SyntheticLinear { d_in, d_out, n } => {
                if *d_in == 0 || *d_out == 0 {
                    return Err(err("data.synthetic_linear", "dimensions must be positive"));
                }
                if n < d_in {
                    return Err(err("data.synthetic_linear.n", "must be at least d_in"));
                }
            }
            DataSpec::SyntheticRelu { d, n } => {
                if *d == 0 || *n == 0 {
                    return Err(err("data.synthetic_relu", "dimensions must be positive"));
                }
            }
            DataSpec::Idx { subset, .. } => {
                if *subset == Some(0) {
                    return Err(err("data.idx.subset", "must be positive"));
                }
            }
        }
        let f = &self.federation;
        if f.clients == 0 {
            return Err(err("federation.clients", "must be at least 1"));
        }
        if f.local_steps == 0 {
            return Err(err("federation.local_steps", "must be at least 1"));
        }
        if !(f.rate > 0.0 && f.rate <= 1.0) {
            return Err(err("federation.rate", format!("must lie in (0, 1], got {}", f.rate)));
        }
        if let EtaSpec::Value(eta) = f.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(err("federation.eta", format!("must be positive, got {eta}")));
            }
        }
        if let (EtaSpec::Named(EtaName::Theorem), ModelSpec::TwoLayer { .. }) = (&f.eta, &self.model) {
            return Err(err("federation.eta", "\"theorem\" is only defined for the deep linear model"));
        }
        if f.classes_per_client == 0 {
            return Err(err("federation.classes_per_client", "must be at least 1"));
        }
        if let Some(schedule) = &f.schedule {
            if schedule.len() < f.rounds {
                return Err(err(
                    "federation.schedule",
                    format!("lists {} rounds but {} are configured", schedule.len(), f.rounds),
                ));
            }
            for (t, set) in schedule.iter().enumerate() {
                let path = format!("federation.schedule[{t}]");
                if set.is_empty() {
                    return Err(err(&path, "participant set is empty"));
                }
                let mut s = set.clone();
                s.sort_unstable();
                if s.windows(2).any(|w| w[0] == w[1]) {
                    return Err(err(&path, "duplicate client"));
                }
                if let Some(bad) = s.iter().find(|&&c| c >= f.clients) {
                    return Err(err(&path, format!("client {bad} out of range")));
                }
            }
        }
        if let Some(rounds) = &self.analysis.rounds {
            if let Some(bad) = rounds.iter().find(|&&r| r >= f.rounds) {
                return Err(err("analysis.rounds", format!("round {bad} outside [0, {})", f.rounds)));
            }
        }
        if let Some(r) = self.analysis.first_order_round {
            if r >= f.rounds {
                return Err(err("analysis.first_order_round", format!("round {r} outside [0, {})", f.rounds)));
            }
        }
        if self.sweep.rates.is_empty() {
            return Err(err("sweep.rates", "must not be empty"));
        }
        if let Some(bad) = self.sweep.rates.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(err("sweep.rates", format!("rate {bad} outside (0, 1]")));
        }
        if self.sweep.seeds.is_empty() {
            return Err(err("sweep.seeds", "must not be empty"));
        }
        Ok(())
    }

    /// Checks `verify` runs, in a fixed order.
    pub fn selected_checks(&self) -> Vec<Check> {
        let applicable: &[Check] = match self.model {
            ModelSpec::DeepLinear { .. } => &Check::DEEP_LINEAR,
            ModelSpec::TwoLayer { .. } => &Check::TWO_LAYER,
        };
        match &self.analysis.checks {
            None => applicable.to_vec(),
            Some(list) => {
                let mut v: Vec<Check> = list.iter().copied().filter(|c| applicable.contains(c)).collect();
                v.sort_unstable();
                v.dedup();
                v
            }
        }
    }
}
