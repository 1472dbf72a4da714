//! Step-size multipliers computed from the selected sigma-normalized steps.
//!
//! Each rule is evaluated in log space first; the logarithm is what the trace
//! and the estimators record, and sigma is multiplied by its exponential.

use crate::error::{EsError, Result};

use super::config::{AlgorithmConfig, StepSizeRule};
use super::steps::Steps;

fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// log of the CSA1 multiplier: (||sum w_i u_i||^2 / ||w||^2 - n) / (2 d_sigma n).
pub fn log_gamma_csa1(sel: &Steps, cfg: &AlgorithmConfig) -> f64 {
    let n = cfg.n() as f64;
    let rec = sel.weighted_sum(cfg.weights());
    (squared_norm(&rec) / cfg.derived.weight_norm_sq - n) / (2.0 * cfg.d_sigma() * n)
}

/// log of the CSA0 multiplier: (||sum w_i u_i|| / (||w|| E||N_n||) - 1) / d_sigma.
pub fn log_gamma_csa0(sel: &Steps, cfg: &AlgorithmConfig) -> f64 {
    let rec = sel.weighted_sum(cfg.weights());
    let ratio = squared_norm(&rec).sqrt() / (cfg.derived.weight_norm_sq.sqrt() * cfg.derived.expected_chi);
    (ratio - 1.0) / cfg.d_sigma()
}

/// log of the xNES multiplier:
/// sum_i (w_i / sum_j |w_j|) (||u_i||^2 - n) / (2 d_sigma n).
pub fn log_gamma_xnes(sel: &Steps, cfg: &AlgorithmConfig) -> f64 {
    let n = cfg.n() as f64;
    let s: f64 = sel
        .rows()
        .zip(cfg.weights())
        .map(|(u, w)| w * (squared_norm(u) - n))
        .sum();
    s / (cfg.derived.weight_abs_sum * 2.0 * cfg.d_sigma() * n)
}

/// log Gamma for the rule configured in `cfg`.
pub fn log_gamma(sel: &Steps, cfg: &AlgorithmConfig) -> f64 {
    match cfg.rule() {
        StepSizeRule::Csa1 => log_gamma_csa1(sel, cfg),
        StepSizeRule::Csa0 => log_gamma_csa0(sel, cfg),
        StepSizeRule::Xnes => log_gamma_xnes(sel, cfg),
        StepSizeRule::Constant(c) => c.ln(),
    }
}

pub fn gamma_csa1(sel: &Steps, cfg: &AlgorithmConfig) -> f64 {
    log_gamma_csa1(sel, cfg).exp()
}

pub fn gamma_csa0(sel: &Steps, cfg: &AlgorithmConfig) -> f64 {
    log_gamma_csa0(sel, cfg).exp()
}

/// The xNES multiplier; defined only for nonnegative weights.
pub fn gamma_xnes(sel: &Steps, cfg: &AlgorithmConfig) -> Result<f64> {
    if cfg.weights().iter().any(|&w| w < 0.0) {
        return Err(EsError::config("weights", "XNES requires nonnegative weights"));
    }
    Ok(log_gamma_xnes(sel, cfg).exp())
}

pub fn gamma(sel: &Steps, cfg: &AlgorithmConfig) -> f64 {
    multiplier(log_gamma(sel, cfg), cfg.rule())
}

/// The multiplier with log `lg`; a constant rule returns its factor exactly
/// rather than the rounded `exp(ln c)`.
pub fn multiplier(lg: f64, rule: StepSizeRule) -> f64 {
    match rule {
        StepSizeRule::Constant(c) => c,
        _ => lg.exp(),
    }
}

/// Lower bound of the multiplier over all inputs, when one is known:
/// exp(-1/(2 d_sigma)) for CSA1 and xNES, exp(-1/d_sigma) for CSA0.
pub fn gamma_lower_bound(cfg: &AlgorithmConfig) -> f64 {
    match cfg.rule() {
        StepSizeRule::Csa1 | StepSizeRule::Xnes => (-0.5 / cfg.d_sigma()).exp(),
        StepSizeRule::Csa0 => (-1.0 / cfg.d_sigma()).exp(),
        StepSizeRule::Constant(c) => c,
    }
}
