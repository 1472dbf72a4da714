//! Convergence and divergence rate estimation.
//!
//! The rate of an ES on a scaling-invariant function is the stationary mean
//! of log Gamma along the sigma-normalized chain. [`estimate_rate`] averages
//! one long chain and attaches a CLT interval whose asymptotic variance comes
//! from non-overlapping batch means. [`fit_slopes`] reads the same rate off an
//! ES trace as the slopes of log distance and log step-size, and
//! [`expected_log_progress`] averages log Gamma across replicates per
//! iteration.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{simulate, ChainState, McEstimate};
use crate::error::{EsError, Result};
use crate::es::{AlgorithmConfig, RunTrace};
use crate::objectives::Objective;
use crate::rng::substream;
use crate::stats::{batch_means, linear_fit, RunningStats};

pub const DEFAULT_BATCHES: usize = 30;
pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;
/// Normal quantile of the fixed 95% confidence level.
pub const Z_95: f64 = 1.96;

/// 10 n iterations of burn-in.
pub fn default_burn_in(n: usize) -> usize {
    10 * n
}

/// Estimate of the stationary expected log step-size change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rate: f64,
    /// Batch-means estimate of the asymptotic variance.
    pub gamma2: f64,
    /// 95% confidence interval (low, high).
    pub ci: (f64, f64),
    pub t: usize,
    pub burn_in: usize,
    pub batches: usize,
}

impl RateEstimate {
    /// sqrt(gamma2 / (t - burn_in)).
    pub fn stderr(&self) -> f64 {
        (self.gamma2 / (self.t - self.burn_in) as f64).sqrt()
    }

    pub fn ci_width(&self) -> f64 {
        self.ci.1 - self.ci.0
    }
}

/// Average log Gamma over steps `burn_in..t` of the chain started at `z0`.
pub fn estimate_rate<R: Rng + ?Sized>(
    f: &Objective,
    cfg: &AlgorithmConfig,
    z0: &[f64],
    t: usize,
    burn_in: usize,
    batches: usize,
    rng: &mut R,
) -> Result<RateEstimate> {
    if batches < 2 {
        return Err(EsError::config("batches", "at least two batches are required"));
    }
    if t < 10 * burn_in || t <= burn_in {
        return Err(EsError::config("t", format!("need t >= 10 * burn_in and t > burn_in, got t={t}, burn_in={burn_in}")));
    }
    let (lgs, _) = simulate(&ChainState::new(z0.to_vec())?, f, cfg, t, rng)?;
    rate_from_log_gammas(&lgs[burn_in..], burn_in, batches)
}

/// Rate estimate from post-burn-in log Gamma values.
pub fn rate_from_log_gammas(values: &[f64], burn_in: usize, batches: usize) -> Result<RateEstimate> {
    let bm = batch_means(values, batches)?;
    let half = Z_95 * (bm.gamma2 / values.len() as f64).sqrt();
    Ok(RateEstimate {
        rate: bm.mean,
        gamma2: bm.gamma2,
        ci: (bm.mean - half, bm.mean + half),
        t: values.len() + burn_in,
        burn_in,
        batches,
    })
}

/// Least-squares slopes of log distance and log step-size over the tail of
/// a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope_x: f64,
    pub slope_sigma: f64,
    /// RMS residual of the log-distance fit.
    pub residual: f64,
    pub rows_used: usize,
    /// Set when rows with zero distance were cut from the end of the trace.
    pub truncated: bool,
}

pub fn fit_slopes(trace: &RunTrace, tail_fraction: f64) -> Result<SlopeFit> {
    if trace.rows.len() < 100 {
        return Err(EsError::argument("trace", format!("need at least 100 rows, got {}", trace.rows.len())));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(EsError::argument("tail_fraction", "must lie in (0, 1]"));
    }
    let usable = trace
        .rows
        .iter()
        .position(|r| r.dist <= 0.0 || r.sigma <= 0.0)
        .unwrap_or(trace.rows.len());
    let truncated = usable < trace.rows.len();
    let take = ((usable as f64 * tail_fraction).ceil() as usize).min(usable);
    if take < 2 {
        return Err(EsError::argument("trace", "fewer than two usable rows in the tail"));
    }
    let tail = &trace.rows[usable - take..usable];
    let k: Vec<f64> = tail.iter().map(|r| r.k as f64).collect();
    let log_dist: Vec<f64> = tail.iter().map(|r| r.dist.ln()).collect();
    let log_sigma: Vec<f64> = tail.iter().map(|r| r.sigma.ln()).collect();
    let (slope_x, _, residual) = linear_fit(&k, &log_dist);
    let (slope_sigma, _, _) = linear_fit(&k, &log_sigma);
    Ok(SlopeFit {
        slope_x,
        slope_sigma,
        residual,
        rows_used: take,
        truncated,
    })
}

/// Per-iteration mean of log(sigma_{k+1} / sigma_k) across independent
/// replicates of the chain started at the same z0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProgress {
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub replicates: usize,
    #[serde(skip)]
    per_replicate: Vec<Vec<f64>>,
}

impl LogProgress {
    /// Mean over the trailing `fraction` of iterations, with a standard error
    /// computed across replicates.
    pub fn tail_estimate(&self, fraction: f64) -> McEstimate {
        let k = self.means.len();
        let take = ((k as f64 * fraction).ceil() as usize).clamp(1, k);
        self.per_replicate
            .iter()
            .map(|row| row[k - take..].iter().sum::<f64>() / take as f64)
            .collect::<RunningStats>()
            .into()
    }
}

pub fn expected_log_progress<R: Rng + ?Sized>(
    f: &Objective,
    cfg: &AlgorithmConfig,
    z0: &[f64],
    k_max: usize,
    replicates: usize,
    rng: &mut R,
) -> Result<LogProgress> {
    if replicates < 100 {
        return Err(EsError::argument("replicates", "need at least 100 replicates"));
    }
    if k_max == 0 {
        return Err(EsError::argument("k_max", "must be at least 1"));
    }
    let start = ChainState::new(z0.to_vec())?;
    let seed: u64 = rng.random();
    let per_replicate: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut g = substream(seed, r as u64);
            simulate(&start, f, cfg, k_max, &mut g).map(|(lgs, _)| lgs)
        })
        .collect::<Result<_>>()?;
    let (means, stderrs) = (0..k_max)
        .map(|k| {
            let s: RunningStats = per_replicate.iter().map(|row| row[k]).collect();
            (s.mean(), s.stderr())
        })
        .unzip();
    Ok(LogProgress {
        means,
        stderrs,
        replicates,
        per_replicate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::es::{run, StepSizeRule};
    use crate::objectives::{linear, sphere};
    use crate::rng::seeded;

    fn defaults(rule: StepSizeRule) -> AlgorithmConfig {
        AlgorithmConfig::equal_weights(10, 11, 3, rule).unwrap()
    }

    #[test]
    fn constant_rule_rate_is_exact() {
        let cfg = defaults(StepSizeRule::Constant(1.25));
        let est = estimate_rate(&sphere(10), &cfg, &[1.0; 10], 10_000, 100, 30, &mut seeded(0)).unwrap();
        assert_eq!(est.rate, 1.25f64.ln());
        assert_eq!(est.gamma2, 0.0);
        assert_eq!(est.ci, (est.rate, est.rate));
    }

    #[test]
    fn rejects_degenerate_settings() {
        let cfg = defaults(StepSizeRule::Csa1);
        let f = sphere(10);
        let z = [1.0; 10];
        let mut g = seeded(0);
        assert!(estimate_rate(&f, &cfg, &z, 1000, 10, 1, &mut g).is_err());
        assert!(estimate_rate(&f, &cfg, &z, 1000, 200, 30, &mut g).is_err());
        assert!(estimate_rate(&f, &cfg, &z, 20, 0, 30, &mut g).is_err());
    }

    #[test]
    fn sphere_rate_is_negative() {
        let cfg = defaults(StepSizeRule::Csa1);
        let est = estimate_rate(&sphere(10), &cfg, &[1.0; 10], 200_000, 100, 30, &mut seeded(9)).unwrap();
        assert!(est.ci.0 <= est.rate && est.rate <= est.ci.1);
        assert!(est.ci.1 < 0.0, "{est:?}");
    }

    #[test]
    fn fit_slopes_of_constant_rule() {
        let cfg = defaults(StepSizeRule::Constant(2.0));
        let trace = run(&cfg, &linear(10), &[1.0; 10], 1.0, 400, &mut seeded(1)).unwrap();
        let fit = fit_slopes(&trace, 0.5).unwrap();
        assert!((fit.slope_sigma - 2f64.ln()).abs() < 1e-12);
        assert!(!fit.truncated);
        assert_eq!(fit.rows_used, 200);
    }

    #[test]
    fn fit_slopes_preconditions_and_truncation() {
        let cfg = defaults(StepSizeRule::Constant(2.0));
        let short = run(&cfg, &linear(10), &[1.0; 10], 1.0, 50, &mut seeded(1)).unwrap();
        assert!(fit_slopes(&short, 0.5).is_err());
        let mut trace = run(&cfg, &linear(10), &[1.0; 10], 1.0, 300, &mut seeded(1)).unwrap();
        assert!(fit_slopes(&trace, 0.0).is_err());
        assert!(fit_slopes(&trace, 1.5).is_err());
        for row in trace.rows.iter_mut().skip(250) {
            row.dist = 0.0;
        }
        let fit = fit_slopes(&trace, 0.5).unwrap();
        assert!(fit.truncated);
        assert_eq!(fit.rows_used, 125);
    }

    #[test]
    fn expected_log_progress_constant_rule() {
        let cfg = defaults(StepSizeRule::Constant(3.0));
        let lp = expected_log_progress(&sphere(10), &cfg, &[1.0; 10], 20, 100, &mut seeded(4)).unwrap();
        assert!(lp.means.iter().all(|&m| m == 3f64.ln()));
        assert!(expected_log_progress(&sphere(10), &cfg, &[1.0; 10], 20, 99, &mut seeded(4)).is_err());
    }

    #[test]
    fn expected_log_progress_is_flat_on_linear_functions() {
        let cfg = defaults(StepSizeRule::Csa1);
        let lp = expected_log_progress(&linear(10), &cfg, &[0.0; 10], 200, 500, &mut seeded(6)).unwrap();
        let k: Vec<f64> = (0..200).map(f64::from).collect();
        let (slope, _, res) = linear_fit(&k, &lp.means);
        // Standard error of an OLS slope on independent noise of size `res`.
        let sxx: f64 = k.iter().map(|v| (v - 99.5) * (v - 99.5)).sum();
        assert!(slope.abs() < 4.0 * res / sxx.sqrt(), "slope {slope}");
    }

    #[test]
    fn expected_log_progress_matches_chain_rate_on_sphere() {
        let cfg = defaults(StepSizeRule::Csa1);
        let f = sphere(10);
        let z0 = [1.0; 10];
        let lp = expected_log_progress(&f, &cfg, &z0, 400, 1000, &mut seeded(7)).unwrap();
        let tail = lp.tail_estimate(0.5);
        let est = estimate_rate(&f, &cfg, &z0, 400_000, 100, 30, &mut seeded(8)).unwrap();
        let joint = 4.0 * (tail.stderr + est.stderr());
        assert!((tail.mean - est.rate).abs() <= joint, "{tail:?} vs {est:?}");
    }
}
