//! Scaling-invariant test objectives with their reference points.
//!
//! Every objective carries the point `x_star` it is scaling-invariant with
//! respect to and a [`FunctionClass`] tag telling whether the convergence
//! theory covers it.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{EsError, Result};
use crate::rng;

/// Which function class an objective belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FunctionClass {
    /// Increasing transform of a C1 scaling-invariant function with a unique
    /// global argmin.
    F1,
    /// Increasing transform of a nontrivial linear function.
    F2,
    Other,
}

impl FunctionClass {
    pub fn is_scaling_invariant(self) -> bool {
        matches!(self, FunctionClass::F1 | FunctionClass::F2)
    }
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// An objective function on R^n to be minimized.
#[derive(Clone)]
pub struct Objective {
    name: String,
    x_star: Vec<f64>,
    class: FunctionClass,
    eval: Arc<EvalFn>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("class", &self.class)
            .finish_non_exhaustive()
    }
}

impl Objective {
    pub fn new<F>(name: impl Into<String>, x_star: Vec<f64>, class: FunctionClass, eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            x_star,
            class,
            eval: Arc::new(eval),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn class(&self) -> FunctionClass {
        self.class
    }

    /// The same function translated so that its reference point becomes
    /// `self.x_star() + shift`.
    pub fn shifted(&self, shift: &[f64]) -> Result<Objective> {
        if shift.len() != self.dim() {
            return Err(EsError::argument("shift", "dimension mismatch"));
        }
        let inner = self.eval.clone();
        let shift = shift.to_vec();
        let x_star = self.x_star.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let offset = shift.clone();
        Ok(Objective {
            name: format!("shifted({})", self.name),
            x_star,
            class: self.class,
            eval: Arc::new(move |x: &[f64]| {
                let y: Vec<f64> = x.iter().zip(&offset).map(|(a, b)| a - b).collect();
                inner(&y)
            }),
        })
    }
}

/// f(x) = ||x||^2.
pub fn sphere(n: usize) -> Objective {
    Objective::new("sphere", vec![0.0; n], FunctionClass::F1, |x| {
        x.iter().map(|v| v * v).sum()
    })
}

/// f(x) = sum_i 10^(3(i-1)/(n-1)) x_i^2, condition number 1000.
pub fn ellipsoid(n: usize) -> Objective {
    let coeffs: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                1.0
            } else {
                10f64.powf(3.0 * i as f64 / (n - 1) as f64)
            }
        })
        .collect();
    Objective::new("ellipsoid", vec![0.0; n], FunctionClass::F1, move |x| {
        x.iter().zip(&coeffs).map(|(v, c)| c * v * v).sum()
    })
}

/// l(x) = x_1, with reference point the origin.
pub fn linear(n: usize) -> Objective {
    Objective::new("linear", vec![0.0; n], FunctionClass::F2, |x| x[0])
}

/// Number of Fourier terms in the directional perturbation.
const PERTURBATION_TERMS: usize = 5;

/// f(x) = ||x|| (1 + beta s(x / ||x||)) where `s` is a smooth, seeded
/// trigonometric series on the unit sphere with values in [-1, 1].
///
/// `f` is positively homogeneous of degree one, positive away from the origin
/// when |beta| < 1, and has non-spherical (for large beta non-convex) level
/// sets.
pub fn perturbed_sphere(n: usize, beta: f64, frequency: f64, seed: u64) -> Result<Objective> {
    if !(beta.abs() < 1.0) {
        return Err(EsError::argument("beta", format!("need |beta| < 1, got {beta}")));
    }
    if !frequency.is_finite() {
        return Err(EsError::argument("frequency", "must be finite"));
    }
    if n == 0 {
        return Err(EsError::argument("n", "dimension must be positive"));
    }
    let mut g = rng::seeded(seed);
    let mut directions = Vec::with_capacity(PERTURBATION_TERMS);
    let mut phases = Vec::with_capacity(PERTURBATION_TERMS);
    let mut amplitudes = Vec::with_capacity(PERTURBATION_TERMS);
    for _ in 0..PERTURBATION_TERMS {
        let mut a = vec![0.0; n];
        rng::fill_normal(&mut g, &mut a);
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        a.iter_mut().for_each(|v| *v /= norm);
        directions.push(a);
        phases.push(g.random::<f64>() * std::f64::consts::TAU);
        amplitudes.push(g.random::<f64>() + 0.1);
    }
    let total: f64 = amplitudes.iter().sum();
    amplitudes.iter_mut().for_each(|c| *c /= total);

    Ok(Objective::new(
        "perturbed_sphere",
        vec![0.0; n],
        FunctionClass::F1,
        move |x| {
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r == 0.0 {
                return 0.0;
            }
            let s: f64 = directions
                .iter()
                .zip(&phases)
                .zip(&amplitudes)
                .map(|((a, phase), c)| {
                    let proj = a.iter().zip(x).map(|(ai, xi)| ai * xi).sum::<f64>() / r;
                    c * (frequency * proj + phase).sin()
                })
                .sum();
            r * (1.0 + beta * s)
        },
    ))
}

/// Strictly increasing transformations applied on top of an objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Exp,
    Cube,
    /// t + floor(t): discontinuous but strictly increasing.
    Staircase,
}

impl Transform {
    #[inline]
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Transform::Exp => t.exp(),
            Transform::Cube => t * t * t,
            Transform::Staircase => t + t.floor(),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Transform::Exp => "exp",
            Transform::Cube => "cube",
            Transform::Staircase => "staircase",
        }
    }
}

impl FromStr for Transform {
    type Err = EsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp" => Ok(Transform::Exp),
            "cube" => Ok(Transform::Cube),
            "staircase" => Ok(Transform::Staircase),
            other => Err(EsError::config("objective.phi", format!("unknown transform `{other}`"))),
        }
    }
}

/// phi o f, keeping the class tag and reference point of `f`.
pub fn compose_increasing(f: &Objective, phi: Transform) -> Objective {
    let inner = f.eval.clone();
    Objective {
        name: format!("{}({})", phi.label(), f.name),
        x_star: f.x_star.clone(),
        class: f.class,
        eval: Arc::new(move |x: &[f64]| phi.apply(inner(x))),
    }
}

/// sum_i |x_i|. Level sets are not C1, so outside F1.
pub fn one_norm(n: usize) -> Objective {
    Objective::new("one_norm", vec![0.0; n], FunctionClass::Other, |x| {
        x.iter().map(|v| v.abs()).sum()
    })
}

/// sum_i sqrt|x_i|.
pub fn half_norm(n: usize) -> Objective {
    Objective::new("half_norm", vec![0.0; n], FunctionClass::Other, |x| {
        x.iter().map(|v| v.abs().sqrt()).sum()
    })
}

/// Name-addressable description of an objective, as found in experiment
/// configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub name: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Transform>,
}

impl ObjectiveSpec {
    pub fn named(name: &str, n: usize) -> Self {
        Self {
            name: name.to_string(),
            n,
            beta: None,
            frequency: None,
            perturbation_seed: None,
            phi: None,
        }
    }

    pub fn build(&self) -> Result<Objective> {
        if self.n == 0 {
            return Err(EsError::config("objective.n", "dimension must be positive"));
        }
        let n = self.n;
        let base = match self.name.as_str() {
            "sphere" => sphere(n),
            "ellipsoid" => ellipsoid(n),
            "linear" => linear(n),
            "one_norm" => one_norm(n),
            "half_norm" => half_norm(n),
            "perturbed_sphere" => perturbed_sphere(
                n,
                self.beta.unwrap_or(0.5),
                self.frequency.unwrap_or(3.0),
                self.perturbation_seed.unwrap_or(0),
            )
            .map_err(|e| EsError::config("objective.beta", e.to_string()))?,
            other => {
                return Err(EsError::config("objective.name", format!("unknown objective `{other}`")))
            }
        };
        Ok(match self.phi {
            Some(phi) => compose_increasing(&base, phi),
            None => base,
        })
    }
}
