//! The four subcommands. Each returns the bytes to write; nothing is printed
//! until the computation has finished.

use std::fmt::Write as _;

use serde::Serialize;

use eslr_core::chain::{default_alpha_grid, drift_ratio, find_drift_alpha, DriftAlpha, DriftReport, McEstimate};
use eslr_core::condition::{condition_report, sufficient_condition, ConditionReport, ConditionRule};
use eslr_core::es::{run, RunTrace, StopReason};
use eslr_core::quadrature::QuadratureSpec;
use eslr_core::rate::{estimate_rate, expected_log_progress, fit_slopes, RateEstimate, SlopeFit};
use eslr_core::rng::seeded;
use eslr_core::StepSizeRule;

use crate::config::{ExperimentConfig, Resolved, SCHEMA_VERSION};
use crate::error::{ensure, CliError};

/// Output of a command. A numerical abort still carries the data produced
/// before the stop.
pub struct Output {
    pub bytes: Vec<u8>,
    pub abort: Option<String>,
}

impl Output {
    fn complete(bytes: Vec<u8>) -> Self {
        Self { bytes, abort: None }
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    schema_version: u32,
    command: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    #[serde(flatten)]
    body: T,
}

fn json<T: Serialize>(r: &Resolved, command: &'static str, body: T) -> Result<Vec<u8>, CliError> {
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command,
        seed: r.seed,
        config: &r.config,
        body,
    };
    let mut s = serde_json::to_string_pretty(&report).map_err(|e| CliError::Invariant(e.to_string()))?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn describe(stop: StopReason) -> &'static str {
    match stop {
        StopReason::SigmaUnderflow => "step-size fell below 1e-300",
        StopReason::SigmaOverflow => "step-size exceeded 1e300",
        StopReason::DistanceUnderflow => "distance to the reference point fell below 1e-300",
        StopReason::DistanceOverflow => "distance to the reference point exceeded 1e300",
        StopReason::ObjectiveUnderflow => "objective values became subnormal",
    }
}

fn stop_message(trace: &RunTrace) -> Option<String> {
    trace
        .stop
        .map(|s| format!("run stopped after {} iterations: {}", trace.rows.len(), describe(s)))
}

/// Trace CSV with columns k, dist, sigma, log_gamma; floats carry 17
/// significant digits.
pub fn trace_csv(trace: &RunTrace) -> String {
    let mut s = String::from("k,dist,sigma,log_gamma\n");
    for r in &trace.rows {
        writeln!(s, "{},{:.16e},{:.16e},{:.16e}", r.k, r.dist, r.sigma, r.log_gamma).unwrap();
    }
    s
}

pub fn cmd_run(r: &Resolved) -> Result<Output, CliError> {
    let c = &r.config;
    let trace = run(&r.algorithm, &r.objective, r.x0(), c.sigma0, c.k_max, &mut seeded(r.seed))?;
    ensure(
        trace.rows.iter().enumerate().all(|(i, row)| row.k == i as u64),
        || "trace rows are not consecutive".into(),
    )?;
    Ok(Output {
        bytes: trace_csv(&trace).into_bytes(),
        abort: stop_message(&trace),
    })
}

#[derive(Serialize)]
struct RateBody {
    rate: RateEstimate,
    slope_fit: Option<SlopeFit>,
    /// Why no slope fit is reported.
    #[serde(skip_serializing_if = "Option::is_none")]
    slope_fit_error: Option<String>,
    run_stop: Option<StopReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_progress: Option<McEstimate>,
}

pub fn cmd_rate(r: &Resolved) -> Result<Output, CliError> {
    let c = &r.config;
    let e = &c.estimator;
    let mut g = seeded(r.seed);
    let rate = estimate_rate(&r.objective, &r.algorithm, r.z0(), e.t, r.burn_in(), e.batches, &mut g)?;
    ensure(rate.ci.0 <= rate.rate && rate.rate <= rate.ci.1, || {
        format!("rate {} outside its interval {:?}", rate.rate, rate.ci)
    })?;
    let trace = run(&r.algorithm, &r.objective, r.x0(), c.sigma0, c.k_max, &mut g)?;
    let (slope_fit, slope_fit_error) = match fit_slopes(&trace, e.tail_fraction) {
        Ok(fit) => (Some(fit), None),
        Err(err) => (None, Some(err.to_string())),
    };
    let log_progress = match e.replicates {
        Some(reps) => {
            let k = c.k_max as usize;
            let lp = expected_log_progress(&r.objective, &r.algorithm, r.z0(), k, reps, &mut g)?;
            Some(lp.tail_estimate(e.tail_fraction))
        }
        None => None,
    };
    let body = RateBody {
        rate,
        slope_fit,
        slope_fit_error,
        run_stop: trace.stop,
        log_progress,
    };
    Ok(Output::complete(json(r, "rate", body)?))
}

#[derive(Serialize)]
struct ConditionBody {
    report: ConditionReport,
    /// lambda >= 3, mu < lambda / 2 and nonincreasing nonnegative weights.
    sufficient_condition: bool,
}

pub fn cmd_condition(r: &Resolved) -> Result<Output, CliError> {
    let a = &r.algorithm;
    let rule = match a.rule() {
        StepSizeRule::Csa1 => ConditionRule::Csa1,
        StepSizeRule::Xnes => ConditionRule::Xnes,
        other => {
            return Err(CliError::Config(format!(
                "algorithm.rule: the condition is defined for CSA1 and XNES, not {other}"
            )))
        }
    };
    let report = condition_report(
        rule,
        a.weights(),
        a.lambda(),
        a.d_sigma(),
        a.n(),
        r.config.estimator.samples,
        &QuadratureSpec::default(),
        &mut seeded(r.seed),
    )?;
    let body = ConditionBody {
        report,
        sufficient_condition: sufficient_condition(a.lambda(), a.mu(), a.weights()),
    };
    Ok(Output::complete(json(r, "condition", body)?))
}

#[derive(Serialize)]
struct DiagnoseBody {
    alpha: f64,
    /// Present when alpha was searched rather than configured.
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_search: Option<DriftAlpha>,
    reports: Vec<DriftReport>,
}

pub fn cmd_diagnose(r: &Resolved) -> Result<Output, CliError> {
    let e = &r.config.estimator;
    if let Some(i) = e.z_norms.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(CliError::Config(format!(
            "estimator.z_norms[{i}]: the drift ratio needs a finite nonzero ||z||, got {}",
            e.z_norms[i]
        )));
    }
    let dir = r.z0();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(CliError::Config("estimator.z0: direction must be nonzero".into()));
    }
    let mut g = seeded(r.seed);
    let (alpha, alpha_search) = match e.alpha {
        Some(a) => (a, None),
        None => {
            let found = find_drift_alpha(&r.algorithm, &default_alpha_grid(), e.samples, &mut g)?;
            match found.alpha {
                Some(a) => (a, Some(found)),
                None => {
                    return Err(CliError::Numerical(format!(
                        "no drift exponent on the default grid: E[log Gamma*] = {} +- {}",
                        found.log_drift.mean, found.log_drift.stderr
                    )))
                }
            }
        }
    };
    let reports = e
        .z_norms
        .iter()
        .map(|&target| {
            let z: Vec<f64> = dir.iter().map(|v| v * target / norm).collect();
            drift_ratio(&z, alpha, &r.objective, &r.algorithm, e.samples, &mut g)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let body = DiagnoseBody {
        alpha,
        alpha_search,
        reports,
    };
    Ok(Output::complete(json(r, "diagnose", body)?))
}
