//! The (mu/mu_w, lambda)-ES iteration with pluggable step-size rules.

mod algorithm;
mod config;
mod selection;
mod step_size;
mod steps;

pub use algorithm::{
    run, sample_offspring, step, update_mean, EsState, RunTrace, StopReason, TraceRow, OVERFLOW_LIMIT,
    UNDERFLOW_LIMIT,
};
pub use config::{expected_chi_norm, AlgorithmConfig, StepSizeRule};
pub use selection::select;
pub use step_size::{
    gamma, gamma_csa0, gamma_csa1, gamma_lower_bound, gamma_xnes, log_gamma, log_gamma_csa0, log_gamma_csa1,
    log_gamma_xnes, multiplier,
};
pub use steps::{SelectedSteps, Steps};

pub(crate) use selection::{evaluate, gather, rank};
