use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mest::radial::RadialLaw;

/// Radial weight functions `u1` (location) and `u2` (scatter) of an
/// M-estimator, evaluated at squared Mahalanobis distances `s > 0`.
///
/// Implementations must be pure.
pub trait WeightFunctions: Send + Sync + fmt::Debug {
    fn u1(&self, s: f64) -> f64;
    fn u2(&self, s: f64) -> f64;

    /// Derivative of `phi2(s) = s u2(s)`.
    fn phi2_prime(&self, s: f64) -> f64 {
        let h = 1e-6 * s.max(1e-3);
        ((s + h) * self.u2(s + h) - (s - h) * self.u2(s - h)) / (2.0 * h)
    }

    /// Points where the weights are not smooth; used to split quadrature.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }

    /// True when both weights are identically one.
    fn is_constant(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy)]
struct GaussianWeights;

impl WeightFunctions for GaussianWeights {
    fn u1(&self, _: f64) -> f64 {
        1.0
    }
    fn u2(&self, _: f64) -> f64 {
        1.0
    }
    fn phi2_prime(&self, _: f64) -> f64 {
        1.0
    }
    fn is_constant(&self) -> bool {
        true
    }
}

/// Maximum-likelihood weights of the elliptical t distribution.
#[derive(Debug, Clone, Copy)]
struct TWeights {
    nu: f64,
    p: f64,
}

impl WeightFunctions for TWeights {
    fn u1(&self, s: f64) -> f64 {
        (self.p + self.nu) / (self.nu + s)
    }
    fn u2(&self, s: f64) -> f64 {
        (self.p + self.nu) / (self.nu + s)
    }
    fn phi2_prime(&self, s: f64) -> f64 {
        (self.p + self.nu) * self.nu / ((self.nu + s) * (self.nu + s))
    }
}

/// Huber-type weights with threshold `k` on the Mahalanobis distance and a
/// consistency factor `c` for the scatter weight.
#[derive(Debug, Clone, Copy)]
struct HuberWeights {
    k: f64,
    c: f64,
}

impl WeightFunctions for HuberWeights {
    fn u1(&self, s: f64) -> f64 {
        (self.k / s.sqrt()).min(1.0)
    }
    fn u2(&self, s: f64) -> f64 {
        self.c * (self.k * self.k / s).min(1.0)
    }
    fn phi2_prime(&self, s: f64) -> f64 {
        if s < self.k * self.k {
            self.c
        } else {
            0.0
        }
    }
    fn kinks(&self) -> Vec<f64> {
        vec![self.k * self.k]
    }
}

/// Identifies an M-estimator family independently of the dimension.
///
/// String forms: `gaussian`, `t:<nu>`, `huber:<k>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum EstimatorKind {
    Gaussian,
    T { nu: f64 },
    Huber { k: f64 },
    Custom { name: String },
}

impl EstimatorKind {
    /// Resolves the weights for dimension `p`.
    pub fn build(&self, p: usize) -> Result<EstimatorSpec> {
        if p == 0 {
            return Err(Error::Spec("dimension must be positive".into()));
        }
        let weights: Arc<dyn WeightFunctions> = match *self {
            EstimatorKind::Gaussian => Arc::new(GaussianWeights),
            EstimatorKind::T { nu } => Arc::new(TWeights { nu, p: p as f64 }),
            EstimatorKind::Huber { k } => {
                // c makes E[phi2(R)] = p for R ~ chi^2_p.
                let chi = RadialLaw::ChiSquare { p };
                let k2 = k * k;
                let mean_clipped = chi.expect(|r| r.min(k2), &[k2])?;
                Arc::new(HuberWeights {
                    k,
                    c: p as f64 / mean_clipped,
                })
            }
            EstimatorKind::Custom { ref name } => {
                return Err(Error::Spec(format!(
                    "custom estimator `{name}` needs weights; use EstimatorSpec::custom"
                )))
            }
        };
        Ok(EstimatorSpec {
            kind: self.clone(),
            p,
            weights,
        })
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorKind::Gaussian => write!(f, "gaussian"),
            EstimatorKind::T { nu } => write!(f, "t:{nu}"),
            EstimatorKind::Huber { k } => write!(f, "huber:{k}"),
            EstimatorKind::Custom { name } => write!(f, "{name}"),
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let number = |what: &str| -> Result<f64> {
            let raw = arg.ok_or_else(|| Error::Spec(format!("`{name}` needs a parameter, e.g. `{name}:{what}`")))?;
            let v: f64 = raw
                .parse()
                .map_err(|_| Error::Spec(format!("invalid parameter `{raw}` for `{name}`")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Spec(format!("parameter of `{name}` must be positive, got {v}")));
            }
            Ok(v)
        };
        match name.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => {
                if arg.is_some() {
                    return Err(Error::Spec("`gaussian` takes no parameter".into()));
                }
                Ok(EstimatorKind::Gaussian)
            }
            "t" => Ok(EstimatorKind::T { nu: number("5")? }),
            "huber" => Ok(EstimatorKind::Huber { k: number("1.345")? }),
            "tyler" => Err(Error::Spec(
                "Tyler's shape estimator is not supported: its scatter weight has constant phi2".into(),
            )),
            other => Err(Error::Spec(format!("unknown estimator `{other}`"))),
        }
    }
}

impl From<EstimatorKind> for String {
    fn from(k: EstimatorKind) -> String {
        k.to_string()
    }
}

impl TryFrom<String> for EstimatorKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// An M-estimator family resolved for a fixed dimension.
#[derive(Debug, Clone)]
pub struct EstimatorSpec {
    kind: EstimatorKind,
    p: usize,
    weights: Arc<dyn WeightFunctions>,
}

impl EstimatorSpec {
    pub fn gaussian(p: usize) -> Self {
        EstimatorKind::Gaussian.build(p).expect("gaussian spec is always valid")
    }

    pub fn t(nu: f64, p: usize) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(Error::Spec(format!("degrees of freedom must be positive, got {nu}")));
        }
        EstimatorKind::T { nu }.build(p)
    }

    pub fn huber(k: f64, p: usize) -> Result<Self> {
        if !(k > 0.0) {
            return Err(Error::Spec(format!("Huber threshold must be positive, got {k}")));
        }
        EstimatorKind::Huber { k }.build(p)
    }

    /// Parses `gaussian`, `t:<nu>` or `huber:<k>` for dimension `p`.
    pub fn parse(s: &str, p: usize) -> Result<Self> {
        s.parse::<EstimatorKind>()?.build(p)
    }

    pub fn custom(name: impl Into<String>, p: usize, weights: Arc<dyn WeightFunctions>) -> Self {
        EstimatorSpec {
            kind: EstimatorKind::Custom { name: name.into() },
            p,
            weights,
        }
    }

    pub fn kind(&self) -> &EstimatorKind {
        &self.kind
    }

    pub fn name(&self) -> String {
        self.kind.to_string()
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn weights(&self) -> &dyn WeightFunctions {
        self.weights.as_ref()
    }

    pub fn u1(&self, s: f64) -> f64 {
        self.weights.u1(s)
    }

    pub fn u2(&self, s: f64) -> f64 {
        self.weights.u2(s)
    }

    pub fn phi2(&self, s: f64) -> f64 {
        s * self.weights.u2(s)
    }

    pub fn phi2_prime(&self, s: f64) -> f64 {
        self.weights.phi2_prime(s)
    }

    pub fn is_constant(&self) -> bool {
        self.weights.is_constant()
    }

    /// Grid check of monotonicity: `u1`, `u2` non-increasing and
    /// `s u1(s)`, `s u2(s)` non-decreasing on 1000 points of `(0, 100]`.
    pub fn check_monotone(&self) -> Result<()> {
        let grid: Vec<f64> = (1..=1000).map(|i| i as f64 * 0.1).collect();
        let slack = 1e-12;
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            let checks = [
                ("u1 non-increasing", self.u1(b) <= self.u1(a) + slack),
                ("u2 non-increasing", self.u2(b) <= self.u2(a) + slack),
                ("phi1 non-decreasing", b * self.u1(b) >= a * self.u1(a) - slack),
                ("phi2 non-decreasing", self.phi2(b) >= self.phi2(a) - slack),
            ];
            if let Some((what, _)) = checks.iter().find(|(_, ok)| !ok) {
                return Err(Error::Spec(format!(
                    "{}: {what} fails between s = {a} and s = {b}",
                    self.name()
                )));
            }
        }
        Ok(())
    }
}
