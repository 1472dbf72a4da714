use crate::error::{EsError, Result};
use crate::objectives::Objective;

use super::steps::{SelectedSteps, Steps};

/// f(z + u^i) for every sampled step, rejecting non-finite values.
pub(crate) fn evaluate(f: &Objective, z: &[f64], u: &Steps) -> Result<Vec<f64>> {
    let mut x = vec![0.0; z.len()];
    u.rows()
        .enumerate()
        .map(|(i, row)| {
            for ((xi, zi), ui) in x.iter_mut().zip(z).zip(row) {
                *xi = zi + ui;
            }
            let v = f.eval(&x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(EsError::NonFiniteObjective { index: i, value: v })
            }
        })
        .collect()
}

/// Indices 0..values.len() ordered by value; equal values keep index order.
pub(crate) fn rank(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // sort_by is stable, which implements the index tie-break.
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

pub(crate) fn gather(u: &Steps, order: &[usize], mu: usize) -> SelectedSteps {
    let indices: Vec<usize> = order[..mu].to_vec();
    let mut steps = Steps::zeros(u.dim(), mu);
    for (slot, &i) in indices.iter().enumerate() {
        steps.row_mut(slot).copy_from_slice(u.row(i));
    }
    SelectedSteps::new(steps, indices)
}

/// The selection function: the `mu` steps of `u` whose candidates `z + u^i`
/// have the smallest f-values, best first, ties broken by sample index.
pub fn select(f: &Objective, z: &[f64], u: &Steps, mu: usize) -> Result<SelectedSteps> {
    if u.is_empty() {
        return Err(EsError::argument("u", "no sampled steps"));
    }
    if mu == 0 || mu > u.len() {
        return Err(EsError::argument("mu", format!("need 1 <= mu <= {}", u.len())));
    }
    if z.len() != u.dim() {
        return Err(EsError::argument("z", "dimension mismatch with the sampled steps"));
    }
    let values = evaluate(f, z, u)?;
    Ok(gather(u, &rank(&values), mu))
}
