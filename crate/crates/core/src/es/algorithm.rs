use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EsError, Result};
use crate::objectives::Objective;
use crate::rng::fill_normal;

use super::config::AlgorithmConfig;
use super::selection::{evaluate, gather, rank};
use super::step_size::{log_gamma, multiplier};
use super::steps::{SelectedSteps, Steps};

/// Magnitude limits outside of which a run stops instead of iterating on
/// meaningless floating point values.
pub const UNDERFLOW_LIMIT: f64 = 1e-300;
pub const OVERFLOW_LIMIT: f64 = 1e300;

/// Incumbent and step-size at iteration `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsState {
    pub x: Vec<f64>,
    pub sigma: f64,
    pub k: u64,
}

impl EsState {
    pub fn new(x: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(EsError::argument("sigma0", format!("must be positive and finite, got {sigma}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(EsError::argument("x0", "entries must be finite"));
        }
        Ok(Self { x, sigma, k: 0 })
    }

    /// ||x - x_star||, scaled so that it neither overflows nor underflows
    /// before the result does.
    pub fn distance(&self, x_star: &[f64]) -> f64 {
        scaled_norm(self.x.iter().zip(x_star).map(|(a, b)| a - b))
    }

    /// The sigma-normalized point (x - x_star) / sigma.
    pub fn normalized(&self, x_star: &[f64]) -> Vec<f64> {
        self.x
            .iter()
            .zip(x_star)
            .map(|(a, b)| (a - b) / self.sigma)
            .collect()
    }
}

pub(crate) fn scaled_norm<I: Iterator<Item = f64> + Clone>(v: I) -> f64 {
    let scale = v.clone().fold(0.0f64, |m, d| m.max(d.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.map(|d| (d / scale) * (d / scale)).sum::<f64>().sqrt()
}

/// One trace row: the state at iteration `k` and the log step-size change
/// of the transition to `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: u64,
    pub dist: f64,
    pub sigma: f64,
    pub log_gamma: f64,
}

/// Why a run ended before `k_max` iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    SigmaUnderflow,
    SigmaOverflow,
    DistanceUnderflow,
    DistanceOverflow,
    /// Candidate f-values became subnormal.
    ObjectiveUnderflow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub final_state: EsState,
    pub stop: Option<StopReason>,
}

/// lambda independent standard normal n-vectors.
pub fn sample_offspring<R: Rng + ?Sized>(rng: &mut R, cfg: &AlgorithmConfig) -> Steps {
    let mut u = Steps::zeros(cfg.n(), cfg.lambda());
    fill_normal(rng, u.as_flat_mut());
    u
}

/// x + sigma sum_i w_i u^{i:lambda}.
pub fn update_mean(state: &EsState, sel: &Steps, cfg: &AlgorithmConfig) -> Vec<f64> {
    let rec = sel.weighted_sum(cfg.weights());
    state
        .x
        .iter()
        .zip(&rec)
        .map(|(x, r)| x + state.sigma * r)
        .collect()
}

fn is_subnormal(v: f64) -> bool {
    v != 0.0 && v.abs() < f64::MIN_POSITIVE
}

/// Rank the candidates `x + sigma u^i` and return the selected unit-scale
/// steps.
fn select_scaled(
    f: &Objective,
    state: &EsState,
    u: &Steps,
    cfg: &AlgorithmConfig,
) -> Result<SelectedSteps> {
    let values = evaluate(f, &state.x, &u.scaled(state.sigma))?;
    if values.iter().any(|&v| is_subnormal(v)) {
        return Err(EsError::PrecisionExhausted { k: state.k });
    }
    Ok(gather(u, &rank(&values), cfg.mu()))
}

/// One iteration: sample, select, recombine, and rescale sigma.
///
/// Fails with [`EsError::PrecisionExhausted`] when candidate f-values are
/// subnormal, in which case the returned state would rank on noise.
pub fn step<R: Rng + ?Sized>(
    state: &EsState,
    f: &Objective,
    cfg: &AlgorithmConfig,
    rng: &mut R,
) -> Result<(EsState, TraceRow)> {
    let u = sample_offspring(rng, cfg);
    let sel = select_scaled(f, state, &u, cfg)?;
    let lg = log_gamma(&sel, cfg);
    let next = EsState {
        x: update_mean(state, &sel, cfg),
        sigma: state.sigma * multiplier(lg, cfg.rule()),
        k: state.k + 1,
    };
    let row = TraceRow {
        k: state.k,
        dist: state.distance(f.x_star()),
        sigma: state.sigma,
        log_gamma: lg,
    };
    Ok((next, row))
}

fn guard(state: &EsState, x_star: &[f64]) -> Option<StopReason> {
    let dist = state.distance(x_star);
    if state.sigma < UNDERFLOW_LIMIT {
        Some(StopReason::SigmaUnderflow)
    } else if state.sigma > OVERFLOW_LIMIT {
        Some(StopReason::SigmaOverflow)
    } else if dist < UNDERFLOW_LIMIT {
        Some(StopReason::DistanceUnderflow)
    } else if dist > OVERFLOW_LIMIT {
        Some(StopReason::DistanceOverflow)
    } else {
        None
    }
}

fn check_dims(cfg: &AlgorithmConfig, f: &Objective, x: &[f64]) -> Result<()> {
    if f.dim() != cfg.n() {
        return Err(EsError::config("objective.n", format!("objective has dimension {}, algorithm {}", f.dim(), cfg.n())));
    }
    if x.len() != cfg.n() {
        return Err(EsError::argument("x0", format!("expected {} entries, got {}", cfg.n(), x.len())));
    }
    Ok(())
}

/// Iterate [`step`] up to `k_max` times from `(x0, sigma0)`.
///
/// The run stops early, recording the reason, when sigma or the distance to
/// the reference point leaves `[1e-300, 1e300]` or candidate f-values become
/// subnormal.
pub fn run<R: Rng + ?Sized>(
    cfg: &AlgorithmConfig,
    f: &Objective,
    x0: &[f64],
    sigma0: f64,
    k_max: u64,
    rng: &mut R,
) -> Result<RunTrace> {
    if k_max == 0 {
        return Err(EsError::argument("k_max", "must be at least 1"));
    }
    check_dims(cfg, f, x0)?;
    let mut state = EsState::new(x0.to_vec(), sigma0)?;
    let mut rows = Vec::with_capacity(k_max.min(1 << 20) as usize);
    let mut stop = None;
    while state.k < k_max {
        if let Some(reason) = guard(&state, f.x_star()) {
            stop = Some(reason);
            break;
        }
        match step(&state, f, cfg, rng) {
            Ok((next, row)) => {
                rows.push(row);
                state = next;
            }
            Err(EsError::PrecisionExhausted { .. }) => {
                stop = Some(StopReason::ObjectiveUnderflow);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunTrace {
        rows,
        final_state: state,
        stop,
    })
}
