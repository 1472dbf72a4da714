//! Step-size adaptive (mu/mu_w, lambda)-evolution strategies on
//! scaling-invariant functions, and estimators for their linear convergence
//! or divergence rate.
//!
//! * [`es`]: the ES iteration with CSA1, CSA0, xNES and constant step-size rules.
//! * [`objectives`]: scaling-invariant test functions with reference points.
//! * [`chain`]: the sigma-normalized Markov chain and drift diagnostics.
//! * [`rate`]: rate estimates with batch-means confidence intervals.
//! * [`condition`]: normal order-statistic moments and the step-size increase
//!   condition on linear functions.

pub mod chain;
pub mod condition;
pub mod error;
pub mod es;
pub mod objectives;
pub mod quadrature;
pub mod rate;
pub mod rng;
pub mod stats;

pub use error::{EsError, Result};
pub use es::{AlgorithmConfig, EsState, RunTrace, StepSizeRule, Steps, TraceRow};
pub use objectives::{FunctionClass, Objective, ObjectiveSpec};
pub use rng::EsRng;
