//! Experiment configuration files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use eslr_core::objectives::ObjectiveSpec;
use eslr_core::rate::{default_burn_in, DEFAULT_BATCHES, DEFAULT_TAIL_FRACTION};
use eslr_core::{AlgorithmConfig, Objective, StepSizeRule};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    pub objective: ObjectiveSpec,
    pub algorithm: AlgorithmSection,
    /// Defaults to the all-ones vector.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub sigma0: f64,
    #[serde(default = "default_k_max")]
    pub k_max: u64,
    #[serde(default)]
    pub estimator: EstimatorSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub lambda: usize,
    pub mu: usize,
    /// Defaults to equal weights 1/mu.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub d_sigma: f64,
    pub rule: StepSizeRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSection {
    /// Chain length for the rate estimate.
    #[serde(default = "default_t")]
    pub t: usize,
    /// Defaults to 10 n.
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Replicate chains for the per-iteration log progress; skipped when
    /// absent.
    #[serde(default)]
    pub replicates: Option<usize>,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
    /// Chain start, and direction of the diagnose grid. Defaults to all ones.
    #[serde(default)]
    pub z0: Option<Vec<f64>>,
    /// Drift exponent; searched on the default grid when absent.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_z_norms")]
    pub z_norms: Vec<f64>,
    /// Monte Carlo sample count of the condition and drift estimators.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            t: default_t(),
            burn_in: None,
            batches: default_batches(),
            replicates: None,
            tail_fraction: default_tail(),
            z0: None,
            alpha: None,
            z_norms: default_z_norms(),
            samples: default_samples(),
        }
    }
}

fn one() -> f64 {
    1.0
}

fn default_k_max() -> u64 {
    1000
}

fn default_t() -> usize {
    100_000
}

fn default_batches() -> usize {
    DEFAULT_BATCHES
}

fn default_tail() -> f64 {
    DEFAULT_TAIL_FRACTION
}

fn default_z_norms() -> Vec<f64> {
    vec![1.0, 1e2, 1e4, 1e6]
}

fn default_samples() -> usize {
    1_000_000
}

/// A configuration with every default filled in and the seed fixed, plus the
/// objects built from it.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub algorithm: AlgorithmConfig,
    pub objective: Objective,
}

impl Resolved {
    pub fn x0(&self) -> &[f64] {
        self.config.x0.as_deref().expect("resolved")
    }

    pub fn z0(&self) -> &[f64] {
        self.config.estimator.z0.as_deref().expect("resolved")
    }

    pub fn burn_in(&self) -> usize {
        self.config.estimator.burn_in.expect("resolved")
    }
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn vector_or_ones(v: &Option<Vec<f64>>, n: usize, field: &str) -> Result<Vec<f64>, CliError> {
    match v {
        None => Ok(vec![1.0; n]),
        Some(v) if v.len() != n => Err(CliError::Config(format!("{field}: expected {n} entries, got {}", v.len()))),
        Some(v) if v.iter().any(|x| !x.is_finite()) => Err(CliError::Config(format!("{field}: entries must be finite"))),
        Some(v) => Ok(v.clone()),
    }
}

/// Fill defaults, apply the command-line seed and build the objective and
/// algorithm.
pub fn resolve(mut config: ExperimentConfig, seed_override: Option<u64>) -> Result<Resolved, CliError> {
    if config.schema_version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "schema_version: expected {SCHEMA_VERSION}, got {}",
            config.schema_version
        )));
    }
    let seed = seed_override
        .or(config.seed)
        .ok_or_else(|| CliError::Config("seed: required, in the config or via --seed".into()))?;
    config.seed = Some(seed);
    let objective = config.objective.build()?;
    let n = config.objective.n;
    let a = &config.algorithm;
    let weights = a.weights.clone().unwrap_or_else(|| vec![1.0 / a.mu as f64; a.mu]);
    let algorithm = AlgorithmConfig::new(n, a.lambda, a.mu, weights.clone(), a.d_sigma, a.rule)?;
    config.algorithm.weights = Some(weights);
    config.x0 = Some(vector_or_ones(&config.x0, n, "x0")?);
    config.estimator.z0 = Some(vector_or_ones(&config.estimator.z0, n, "estimator.z0")?);
    config.estimator.burn_in = Some(config.estimator.burn_in.unwrap_or(default_burn_in(n)));
    Ok(Resolved {
        config,
        seed,
        algorithm,
        objective,
    })
}
