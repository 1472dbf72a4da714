//! Running moments, batch means, regression and the two-sample
//! Kolmogorov–Smirnov test used by the estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EsError, Result};
use crate::rng::{substream, EsRng};

/// Welford accumulator for mean and variance.
///
/// Adding a value equal to the current mean leaves the mean bit-identical, so
/// a stream of identical values has exactly that mean and zero variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Combine two accumulators (Chan et al. pairwise update).
    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / total as f64;
        if delta != 0.0 {
            self.mean += delta * w;
        }
        self.m2 += other.m2 + delta * delta * self.count as f64 * w;
        self.count = total;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Samples per parallel Monte Carlo chunk. Chunking is fixed so results do not
/// depend on the number of worker threads.
pub(crate) const MC_CHUNK: usize = 1 << 15;

/// Run `samples` Monte Carlo draws split into fixed-size chunks, chunk `j`
/// drawing from stream `j` of `seed`, and merge the chunk statistics in order.
pub(crate) fn parallel_monte_carlo<F>(seed: u64, samples: usize, draw: F) -> RunningStats
where
    F: Fn(&mut EsRng, usize) -> RunningStats + Sync,
{
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<RunningStats> = (0..chunks)
        .into_par_iter()
        .map(|j| {
            let len = MC_CHUNK.min(samples - j * MC_CHUNK);
            let mut rng = substream(seed, j as u64);
            draw(&mut rng, len)
        })
        .collect();
    let mut total = RunningStats::new();
    for p in &parts {
        total.merge(p);
    }
    total
}

/// Non-overlapping batch means summary of a correlated series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    /// Mean over the whole series.
    pub mean: f64,
    /// Estimated asymptotic variance: batch length times the sample variance
    /// of the batch means.
    pub gamma2: f64,
    pub batches: usize,
    pub batch_len: usize,
}

/// Batch means estimate of the asymptotic variance of the mean of `values`.
///
/// The series is cut into `batches` blocks of equal length; a trailing
/// remainder shorter than one block is left out of the variance estimate but
/// still counts towards the mean.
pub fn batch_means(values: &[f64], batches: usize) -> Result<BatchMeans> {
    if batches < 2 {
        return Err(EsError::config("batches", "at least two batches are required"));
    }
    let batch_len = values.len() / batches;
    if batch_len == 0 {
        return Err(EsError::config(
            "batches",
            format!("{} values cannot fill {batches} batches", values.len()),
        ));
    }
    let mean = values.iter().copied().collect::<RunningStats>().mean();
    let between: RunningStats = values
        .chunks_exact(batch_len)
        .take(batches)
        .map(|b| b.iter().copied().collect::<RunningStats>().mean())
        .collect();
    Ok(BatchMeans {
        mean,
        gamma2: batch_len as f64 * between.variance(),
        batches,
        batch_len,
    })
}

/// Ordinary least-squares fit of `y` against `x`: returns (slope, intercept,
/// root mean square residual).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert!(!a.is_empty() && !b.is_empty());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sq = ne.sqrt();
    (d, kolmogorov_q((sq + 0.12 + 0.11 / sq) * d))
}

/// Complementary Kolmogorov distribution function.
fn kolmogorov_q(x: f64) -> f64 {
    if x < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * x * x).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Compensated (Neumaier) sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
