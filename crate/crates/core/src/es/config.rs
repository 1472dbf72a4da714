use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{EsError, Result};

/// Multiplicative step-size update applied to the selected steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSizeRule {
    /// Squared length of the recombined step against its expectation n.
    Csa1,
    /// Length of the recombined step against E||N(0, I_n)||. Not C1.
    Csa0,
    /// Weighted sum of squared lengths of the selected steps.
    Xnes,
    /// sigma is multiplied by the given constant every iteration.
    Constant(f64),
}

impl fmt::Display for StepSizeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSizeRule::Csa1 => f.write_str("CSA1"),
            StepSizeRule::Csa0 => f.write_str("CSA0"),
            StepSizeRule::Xnes => f.write_str("XNES"),
            StepSizeRule::Constant(c) => write!(f, "CONSTANT({c})"),
        }
    }
}

impl FromStr for StepSizeRule {
    type Err = EsError;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        match upper.as_str() {
            "CSA1" => return Ok(StepSizeRule::Csa1),
            "CSA0" => return Ok(StepSizeRule::Csa0),
            "XNES" => return Ok(StepSizeRule::Xnes),
            _ => {}
        }
        if let Some(inner) = upper
            .strip_prefix("CONSTANT(")
            .and_then(|r| r.strip_suffix(')'))
        {
            let c: f64 = inner
                .trim()
                .parse()
                .map_err(|_| EsError::config("rule", format!("bad constant in `{s}`")))?;
            return Ok(StepSizeRule::Constant(c));
        }
        Err(EsError::config("rule", format!("unknown step-size rule `{s}`")))
    }
}

impl Serialize for StepSizeRule {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StepSizeRule {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parameters of a (mu/mu_w, lambda)-ES.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmConfig {
    n: usize,
    lambda: usize,
    mu: usize,
    weights: Vec<f64>,
    d_sigma: f64,
    rule: StepSizeRule,
    #[serde(skip)]
    pub(crate) derived: Derived,
}

/// Weight norms and constants reused by every step-size evaluation.
#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct Derived {
    pub weight_norm_sq: f64,
    pub weight_abs_sum: f64,
    pub expected_chi: f64,
}

impl AlgorithmConfig {
    pub fn new(
        n: usize,
        lambda: usize,
        mu: usize,
        weights: Vec<f64>,
        d_sigma: f64,
        rule: StepSizeRule,
    ) -> Result<Self> {
        if n == 0 {
            return Err(EsError::config("n", "dimension must be positive"));
        }
        if lambda == 0 {
            return Err(EsError::config("lambda", "population size must be positive"));
        }
        if mu == 0 || mu > lambda {
            return Err(EsError::config("mu", format!("need 1 <= mu <= lambda, got mu={mu}, lambda={lambda}")));
        }
        if weights.len() != mu {
            return Err(EsError::config("weights", format!("expected {mu} weights, got {}", weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(EsError::config("weights", "weights must be finite"));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(EsError::config("weights", "weight vector must be nonzero"));
        }
        if !(d_sigma > 0.0) || !d_sigma.is_finite() {
            return Err(EsError::config("d_sigma", format!("must be positive, got {d_sigma}")));
        }
        match rule {
            StepSizeRule::Xnes if weights.iter().any(|&w| w < 0.0) => {
                return Err(EsError::config("weights", "XNES requires nonnegative weights"));
            }
            StepSizeRule::Constant(c) if !(c > 0.0) || !c.is_finite() => {
                return Err(EsError::config("rule", format!("constant factor must be positive, got {c}")));
            }
            _ => {}
        }
        let derived = Derived {
            weight_norm_sq: weights.iter().map(|w| w * w).sum(),
            weight_abs_sum: weights.iter().map(|w| w.abs()).sum(),
            expected_chi: expected_chi_norm(n),
        };
        Ok(Self {
            n,
            lambda,
            mu,
            weights,
            d_sigma,
            rule,
            derived,
        })
    }

    /// Equal weights 1/mu and d_sigma = 1.
    pub fn equal_weights(n: usize, lambda: usize, mu: usize, rule: StepSizeRule) -> Result<Self> {
        if mu == 0 {
            return Err(EsError::config("mu", "must be positive"));
        }
        Self::new(n, lambda, mu, vec![1.0 / mu as f64; mu], 1.0, rule)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn d_sigma(&self) -> f64 {
        self.d_sigma
    }

    pub fn rule(&self) -> StepSizeRule {
        self.rule
    }

    /// Same parameters with a different step-size rule.
    pub fn with_rule(&self, rule: StepSizeRule) -> Result<Self> {
        Self::new(self.n, self.lambda, self.mu, self.weights.clone(), self.d_sigma, rule)
    }
}

/// E||N(0, I_n)|| = sqrt(2) Gamma((n+1)/2) / Gamma(n/2), via log-gamma so that
/// large n does not overflow.
pub fn expected_chi_norm(n: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    let n = n as f64;
    std::f64::consts::SQRT_2 * (ln_gamma(0.5 * (n + 1.0)) - ln_gamma(0.5 * n)).exp()
}
