//! The sigma-normalized chain Z_k = (X_k - x_star) / sigma_k.
//!
//! On scaling-invariant objectives Z_k is a homogeneous Markov chain driven
//! by the same selected steps as the ES itself, so it can be simulated
//! without ever touching X_k or sigma_k. The estimators here sample
//! R_f(z), the expected log step-size change from state z, and the moment
//! ratios used as an empirical geometric drift diagnostic.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EsError, Result};
use crate::es::{evaluate, gather, log_gamma, multiplier, rank, sample_offspring, AlgorithmConfig};
use crate::objectives::{linear, Objective};
use crate::rng::{substream, EsRng};
use crate::stats::{parallel_monte_carlo, RunningStats, MC_CHUNK};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub z: Vec<f64>,
}

impl ChainState {
    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.iter().any(|v| !v.is_finite()) {
            return Err(EsError::argument("z", "entries must be finite"));
        }
        Ok(Self { z })
    }

    pub fn norm(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn check(f: &Objective, cfg: &AlgorithmConfig, z: &[f64]) -> Result<()> {
    if !f.class().is_scaling_invariant() {
        return Err(EsError::argument(
            "f",
            format!("`{}` is not scaling-invariant; the normalized chain is undefined", f.name()),
        ));
    }
    if f.dim() != cfg.n() || z.len() != cfg.n() {
        return Err(EsError::argument("z", "dimension mismatch"));
    }
    Ok(())
}

/// log Gamma of the steps selected at x_star + z, and the steps' weighted sum.
fn selected_log_gamma<R: Rng + ?Sized>(
    z: &[f64],
    f: &Objective,
    cfg: &AlgorithmConfig,
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let u = sample_offspring(rng, cfg);
    let x: Vec<f64> = f.x_star().iter().zip(z).map(|(a, b)| a + b).collect();
    let values = evaluate(f, &x, &u)?;
    let sel = gather(&u, &rank(&values), cfg.mu());
    Ok((log_gamma(&sel, cfg), sel.weighted_sum(cfg.weights())))
}

/// Z' = (z + sum_i w_i v_i) / Gamma(v), v the steps selected at x_star + z
/// with unit step-size. Returns the new state and log Gamma(v).
pub fn chain_step<R: Rng + ?Sized>(
    z: &ChainState,
    f: &Objective,
    cfg: &AlgorithmConfig,
    rng: &mut R,
) -> Result<(ChainState, f64)> {
    check(f, cfg, &z.z)?;
    let (lg, rec) = selected_log_gamma(&z.z, f, cfg, rng)?;
    let g = multiplier(lg, cfg.rule());
    let next = z.z.iter().zip(&rec).map(|(a, r)| (a + r) / g).collect();
    Ok((ChainState { z: next }, lg))
}

/// Simulate `steps` transitions from `z0`, returning the log Gamma of each
/// transition and the final state.
pub fn simulate<R: Rng + ?Sized>(
    z0: &ChainState,
    f: &Objective,
    cfg: &AlgorithmConfig,
    steps: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, ChainState)> {
    check(f, cfg, &z0.z)?;
    let mut z = z0.clone();
    let mut log_gammas = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (next, lg) = chain_step(&z, f, cfg, rng)?;
        log_gammas.push(lg);
        z = next;
    }
    Ok((log_gammas, z))
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl From<RunningStats> for McEstimate {
    fn from(s: RunningStats) -> Self {
        Self {
            mean: s.mean(),
            stderr: s.stderr(),
            samples: s.count(),
        }
    }
}

impl McEstimate {
    /// Whether the +-4 stderr intervals of the two estimates overlap.
    pub fn agrees_with(&self, other: &McEstimate) -> bool {
        (self.mean - other.mean).abs() <= 4.0 * (self.stderr + other.stderr)
    }
}

/// Monte Carlo estimate of R_f(z) = E[log Gamma(alpha_f(x_star + z, U))]
/// from `m` independent draws of U.
pub fn estimate_rf<R: Rng + ?Sized>(
    z: &[f64],
    f: &Objective,
    cfg: &AlgorithmConfig,
    m: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if m < 2 {
        return Err(EsError::argument("m", "need at least two samples"));
    }
    check(f, cfg, z)?;
    let seed: u64 = rng.random();
    let failure = std::sync::Mutex::new(None);
    let stats = parallel_monte_carlo(seed, m, |g, len| {
        let mut s = RunningStats::new();
        for _ in 0..len {
            match selected_log_gamma(z, f, cfg, g) {
                Ok((lg, _)) => s.push(lg),
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e);
                    break;
                }
            }
        }
        s
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(stats.into())
}

/// `m` draws of log Gamma* (the step-size change on the linear function
/// x -> x_1), generated in fixed chunks from `seed`.
pub fn linear_log_gammas(cfg: &AlgorithmConfig, m: usize, seed: u64) -> Vec<f64> {
    let l = linear(cfg.n());
    let origin = vec![0.0; cfg.n()];
    let chunks = m.div_ceil(MC_CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let len = MC_CHUNK.min(m - j * MC_CHUNK);
            let mut g: EsRng = substream(seed, j as u64);
            (0..len)
                .map(|_| {
                    selected_log_gamma(&origin, &l, cfg, &mut g)
                        .expect("linear objective is finite")
                        .0
                })
                .collect()
        })
        .collect();
    parts.concat()
}

/// Empirical drift diagnostic at one state z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub z_norm: f64,
    pub alpha: f64,
    /// Estimate of E[||Z_1||^alpha | Z_0 = z] / ||z||^alpha.
    pub ratio: f64,
    pub ratio_stderr: f64,
    /// Estimate of E[(Gamma*)^(-alpha)], the limit of the ratio as ||z|| grows.
    pub limit_ref: f64,
    pub limit_stderr: f64,
    /// Four standard errors of `ratio`.
    pub ci_halfwidth: f64,
    pub samples: u64,
}

impl DriftReport {
    /// Whether the +-4 stderr intervals of ratio and limit overlap.
    pub fn agrees_with_limit(&self) -> bool {
        (self.ratio - self.limit_ref).abs() <= 4.0 * (self.ratio_stderr + self.limit_stderr)
    }
}

/// E[(Gamma*)^(-alpha)] from linear-function samples.
pub fn linear_inverse_moment(cfg: &AlgorithmConfig, alpha: f64, m: usize, seed: u64) -> McEstimate {
    linear_log_gammas(cfg, m, seed)
        .into_iter()
        .map(|lg| multiplier(lg, cfg.rule()).powf(-alpha))
        .collect::<RunningStats>()
        .into()
}

/// Estimate E[||Z_1||^alpha | Z_0 = z] / ||z||^alpha with `m` chain steps from
/// z, next to its large-||z|| limit E[(Gamma*)^(-alpha)].
pub fn drift_ratio<R: Rng + ?Sized>(
    z: &[f64],
    alpha: f64,
    f: &Objective,
    cfg: &AlgorithmConfig,
    m: usize,
    rng: &mut R,
) -> Result<DriftReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EsError::argument("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if m < 100 {
        return Err(EsError::argument("m", "need at least 100 samples"));
    }
    let start = ChainState::new(z.to_vec())?;
    let z_norm = start.norm();
    if z_norm == 0.0 {
        return Err(EsError::argument("z", "the ratio is undefined at z = 0"));
    }
    check(f, cfg, z)?;
    let seed: u64 = rng.random();
    let ratio: RunningStats = {
        let chunks = m.div_ceil(MC_CHUNK);
        let parts: Vec<Result<RunningStats>> = (0..chunks)
            .into_par_iter()
            .map(|j| {
                let len = MC_CHUNK.min(m - j * MC_CHUNK);
                let mut g = substream(seed, j as u64);
                let mut s = RunningStats::new();
                for _ in 0..len {
                    let (next, _) = chain_step(&start, f, cfg, &mut g)?;
                    s.push((next.norm() / z_norm).powf(alpha));
                }
                Ok(s)
            })
            .collect();
        let mut total = RunningStats::new();
        for p in parts {
            total.merge(&p?);
        }
        total
    };
    let limit = linear_inverse_moment(cfg, alpha, m, rng.random());
    Ok(DriftReport {
        z_norm,
        alpha,
        ratio: ratio.mean(),
        ratio_stderr: ratio.stderr(),
        limit_ref: limit.mean,
        limit_stderr: limit.stderr,
        ci_halfwidth: 4.0 * ratio.stderr(),
        samples: ratio.count(),
    })
}

/// The grid {0.05, 0.10, ..., 0.95}.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..20).map(|i| i as f64 * 0.05).collect()
}

/// Outcome of the search for a drift exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftAlpha {
    /// Smallest grid alpha with E[(Gamma*)^(-alpha)] < 1 - 4 stderr.
    pub alpha: Option<f64>,
    /// E[(Gamma*)^(-alpha)] at the returned alpha.
    pub moment: Option<McEstimate>,
    /// E[log Gamma*], which must be positive for any alpha to exist.
    pub log_drift: McEstimate,
}

/// Scan `alpha_grid` for an exponent certifying E[(Gamma*)^(-alpha)] < 1.
///
/// Returns no alpha when E[log Gamma*] is not positive by a 4-stderr margin;
/// by Jensen's inequality no alpha can exist then.
pub fn find_drift_alpha<R: Rng + ?Sized>(
    cfg: &AlgorithmConfig,
    alpha_grid: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<DriftAlpha> {
    if m < 2 {
        return Err(EsError::argument("m", "need at least two samples"));
    }
    if alpha_grid.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
        return Err(EsError::argument("alpha_grid", "grid points must lie in (0, 1)"));
    }
    let lgs = linear_log_gammas(cfg, m, rng.random());
    let log_drift: McEstimate = lgs.iter().copied().collect::<RunningStats>().into();
    let mut out = DriftAlpha {
        alpha: None,
        moment: None,
        log_drift,
    };
    if log_drift.mean - 4.0 * log_drift.stderr <= 0.0 {
        return Ok(out);
    }
    let mut grid = alpha_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    for alpha in grid {
        let moment: McEstimate = lgs
            .iter()
            .map(|&lg| multiplier(lg, cfg.rule()).powf(-alpha))
            .collect::<RunningStats>()
            .into();
        if moment.mean < 1.0 - 4.0 * moment.stderr {
            out.alpha = Some(alpha);
            out.moment = Some(moment);
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::es::{run, StepSizeRule, Steps};
    use crate::objectives::{one_norm, sphere};
    use crate::rng::{fill_normal, seeded};
    use crate::stats::ks_two_sample;

    fn defaults(rule: StepSizeRule) -> AlgorithmConfig {
        AlgorithmConfig::equal_weights(10, 11, 3, rule).unwrap()
    }

    #[test]
    fn constructed_null_step_lands_on_origin() {
        // With Gamma = 1 and sum w_i v_i = -z the update is exactly zero.
        // Reproduce F_w directly on a hand-made selection.
        let cfg = AlgorithmConfig::new(2, 2, 2, vec![0.5, 0.5], 1.0, StepSizeRule::Constant(1.0)).unwrap();
        let z = [1.0, -2.0];
        let v = Steps::from_rows(&[[-1.0, 2.0], [-1.0, 2.0]]);
        let rec = v.weighted_sum(cfg.weights());
        let g = crate::es::gamma(&v, &cfg);
        let next: Vec<f64> = z.iter().zip(&rec).map(|(a, r)| (a + r) / g).collect();
        assert_eq!(next, vec![0.0, 0.0]);
    }

    #[test]
    fn chain_step_matches_normalized_es_step() {
        let cfg = defaults(StepSizeRule::Csa1);
        let f = sphere(10);
        let x0 = vec![0.3; 10];
        let sigma0 = 0.05;
        let state = crate::es::EsState::new(x0.clone(), sigma0).unwrap();
        let (next, _) = crate::es::step(&state, &f, &cfg, &mut seeded(31)).unwrap();
        let z0 = ChainState::new(state.normalized(f.x_star())).unwrap();
        let (z1, _) = chain_step(&z0, &f, &cfg, &mut seeded(31)).unwrap();
        for (a, b) in z1.z.iter().zip(next.normalized(f.x_star())) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn chain_matches_es_run_for_a_thousand_steps() {
        let cfg = defaults(StepSizeRule::Xnes);
        let f = crate::objectives::ellipsoid(10);
        let trace = run(&cfg, &f, &[1.0; 10], 1.0, 1000, &mut seeded(3)).unwrap();
        assert!(trace.stop.is_none());
        let mut z = ChainState::new(vec![1.0; 10]).unwrap();
        let mut g = seeded(3);
        for _ in 0..1000 {
            z = chain_step(&z, &f, &cfg, &mut g).unwrap().0;
        }
        for (a, b) in z.z.iter().zip(trace.final_state.normalized(f.x_star())) {
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_objectives_outside_the_class() {
        let cfg = defaults(StepSizeRule::Csa1);
        let z = ChainState::new(vec![1.0; 10]).unwrap();
        assert!(chain_step(&z, &one_norm(10), &cfg, &mut seeded(0)).is_err());
    }

    #[test]
    fn linear_log_gamma_is_stationary_along_the_chain() {
        let cfg = defaults(StepSizeRule::Csa1);
        let f = linear(10);
        let z0 = ChainState::new(vec![5.0; 10]).unwrap();
        let (lgs, _) = simulate(&z0, &f, &cfg, 100_000, &mut seeded(44)).unwrap();
        let (_, p) = ks_two_sample(&lgs[..50_000], &lgs[50_000..]);
        assert!(p > 0.01, "KS p-value {p}");
    }

    #[test]
    fn constant_rule_rf_is_exact() {
        let cfg = defaults(StepSizeRule::Constant(1.5));
        let est = estimate_rf(&[0.2; 10], &sphere(10), &cfg, 1000, &mut seeded(1)).unwrap();
        assert_eq!(est.mean, 1.5f64.ln());
        assert_eq!(est.stderr, 0.0);
        assert!(estimate_rf(&[0.2; 10], &sphere(10), &cfg, 1, &mut seeded(1)).is_err());
    }

    #[test]
    fn rf_is_constant_on_linear_functions() {
        let cfg = defaults(StepSizeRule::Csa1);
        let f = linear(10);
        let mut g = seeded(90);
        let reference = estimate_rf(&[0.0; 10], &f, &cfg, 100_000, &mut g).unwrap();
        for _ in 0..5 {
            let mut z = vec![0.0; 10];
            fill_normal(&mut g, &mut z);
            z.iter_mut().for_each(|v| *v *= 100.0);
            let est = estimate_rf(&z, &f, &cfg, 100_000, &mut g).unwrap();
            assert!(est.agrees_with(&reference), "{est:?} vs {reference:?}");
        }
    }

    #[test]
    fn rf_at_sphere_optimum_matches_independent_sampler() {
        let cfg = defaults(StepSizeRule::Csa1);
        let est = estimate_rf(&[0.0; 10], &sphere(10), &cfg, 200_000, &mut seeded(5)).unwrap();
        // Independent path: rank the lambda norms directly and average the
        // CSA1 exponent of the mean of the three shortest vectors.
        let mut g = seeded(999);
        let mut s = RunningStats::new();
        let mut u = vec![0.0; 110];
        for _ in 0..200_000 {
            fill_normal(&mut g, &mut u);
            let mut norms: Vec<(f64, usize)> = (0..11)
                .map(|i| (u[i * 10..(i + 1) * 10].iter().map(|v| v * v).sum(), i))
                .collect();
            norms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut rec = [0.0; 10];
            for &(_, i) in &norms[..3] {
                for j in 0..10 {
                    rec[j] += u[i * 10 + j];
                }
            }
            // ||sum w u||^2 / ||w||^2 with w = 1/3: ||rec||^2 / 3
            let sq: f64 = rec.iter().map(|v| v * v).sum::<f64>() / 3.0;
            s.push((sq - 10.0) / 20.0);
        }
        let oracle: McEstimate = s.into();
        assert!(est.mean < 0.0);
        assert!(est.agrees_with(&oracle), "{est:?} vs {oracle:?}");
    }

    #[test]
    fn rf_is_bounded_by_the_selection_factor() {
        let cfg = AlgorithmConfig::equal_weights(4, 5, 2, StepSizeRule::Csa1).unwrap();
        let mut g = seeded(8);
        // E|log Gamma(N_{n mu})| by plain sampling of mu unselected vectors.
        let mut abs = RunningStats::new();
        let mut v = Steps::zeros(4, 2);
        for _ in 0..100_000 {
            fill_normal(&mut g, v.as_flat_mut());
            abs.push(log_gamma(&v, &cfg).abs());
        }
        let factor = 5.0 * 4.0; // lambda! / (lambda - mu)!
        for z in [[0.0; 4], [1.0, 0.0, 0.0, 0.0], [0.0, 30.0, -2.0, 1.0]] {
            let est = estimate_rf(&z, &sphere(4), &cfg, 50_000, &mut g).unwrap();
            assert!(est.mean.abs() <= factor * abs.mean() + 6.0 * est.stderr);
        }
    }

    #[test]
    fn drift_ratio_rejects_bad_input() {
        let cfg = defaults(StepSizeRule::Csa1);
        let f = sphere(10);
        let mut g = seeded(0);
        assert!(drift_ratio(&[0.0; 10], 0.5, &f, &cfg, 200, &mut g).is_err());
        assert!(drift_ratio(&[1.0; 10], 1.0, &f, &cfg, 200, &mut g).is_err());
        assert!(drift_ratio(&[1.0; 10], 0.5, &f, &cfg, 50, &mut g).is_err());
    }

    #[test]
    fn constant_rule_inverse_moment_is_exact() {
        let cfg = defaults(StepSizeRule::Constant(2.0));
        let r = drift_ratio(&[3.0; 10], 0.5, &sphere(10), &cfg, 500, &mut seeded(2)).unwrap();
        assert_eq!(r.limit_ref, 2f64.powf(-0.5));
        assert_eq!(r.limit_stderr, 0.0);
    }

    #[test]
    fn drift_ratio_approaches_limit_with_growing_norm() {
        let cfg = defaults(StepSizeRule::Csa1);
        let f = sphere(10);
        let mut g = seeded(21);
        let dir = {
            let mut d = vec![0.0; 10];
            fill_normal(&mut g, &mut d);
            let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            d.into_iter().map(|v| v / n).collect::<Vec<_>>()
        };
        let at = |r: f64, g: &mut EsRng| {
            let z: Vec<f64> = dir.iter().map(|v| v * r).collect();
            drift_ratio(&z, 0.5, &f, &cfg, 200_000, g).unwrap()
        };
        let near = at(3.0, &mut g);
        let mid = at(1e3, &mut g);
        let far = at(1e6, &mut g);
        assert!(far.agrees_with_limit(), "{far:?}");
        let gap = |r: &DriftReport| (r.ratio - r.limit_ref).abs();
        assert!(gap(&near) > gap(&mid), "{near:?} {mid:?}");
        assert!(gap(&near) > gap(&far));
    }

    #[test]
    fn drift_alpha_search() {
        let mut g = seeded(13);
        let grid = default_alpha_grid();
        assert_eq!(grid.len(), 19);

        let constant = defaults(StepSizeRule::Constant(2.0));
        let found = find_drift_alpha(&constant, &grid, 1000, &mut g).unwrap();
        assert_eq!(found.alpha, Some(0.05));

        let csa = defaults(StepSizeRule::Csa1);
        let found = find_drift_alpha(&csa, &grid, 100_000, &mut g).unwrap();
        let alpha = found.alpha.expect("positive log drift admits an alpha");
        assert!(alpha > 0.0 && alpha < 1.0);
        assert!(found.moment.unwrap().mean < 1.0);

        let pair = AlgorithmConfig::equal_weights(10, 2, 1, StepSizeRule::Csa1).unwrap();
        let found = find_drift_alpha(&pair, &grid, 100_000, &mut g).unwrap();
        assert_eq!(found.alpha, None);
    }
}
