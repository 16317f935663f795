use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad::{integrate_half_line, QuadOptions};

/// Tolerance on the total mass of a user-supplied radial density.
pub const MASS_TOL: f64 = 1e-8;

/// Default sample size for Monte Carlo radial laws.
pub const MONTE_CARLO_DRAWS: usize = 1_000_000;

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Law of the squared Mahalanobis radius `R = (X - mu)' S^{-1} (X - mu)`.
#[derive(Clone)]
pub enum RadialLaw {
    /// Gaussian data: `R ~ chi^2_p`.
    ChiSquare { p: usize },
    /// Elliptical t data with `nu` degrees of freedom: `R / p ~ F(p, nu)`.
    ScaledF { p: usize, nu: f64 },
    /// Expectations are sample averages over the stored draws.
    Empirical { p: usize, samples: Arc<[f64]> },
    /// A user-supplied density on `(0, inf)`.
    Density {
        p: usize,
        name: String,
        density: DensityFn,
        breaks: Vec<f64>,
    },
}

impl fmt::Debug for RadialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadialLaw::ChiSquare { p } => write!(f, "ChiSquare {{ p: {p} }}"),
            RadialLaw::ScaledF { p, nu } => write!(f, "ScaledF {{ p: {p}, nu: {nu} }}"),
            RadialLaw::Empirical { p, samples } => {
                write!(f, "Empirical {{ p: {p}, draws: {} }}", samples.len())
            }
            RadialLaw::Density { p, name, .. } => write!(f, "Density {{ p: {p}, name: {name:?} }}"),
        }
    }
}

impl RadialLaw {
    pub fn chi_square(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Spec("dimension must be positive".into()));
        }
        Ok(RadialLaw::ChiSquare { p })
    }

    pub fn t(nu: f64, p: usize) -> Result<Self> {
        if p == 0 || !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Spec(format!("invalid t radial law: p = {p}, nu = {nu}")));
        }
        Ok(RadialLaw::ScaledF { p, nu })
    }

    pub fn empirical(p: usize, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Spec(
                "empirical radial law needs finite non-negative draws".into(),
            ));
        }
        Ok(RadialLaw::Empirical {
            p,
            samples: samples.into(),
        })
    }

    /// Wraps a user density and checks that it integrates to one.
    pub fn from_density(p: usize, name: impl Into<String>, density: DensityFn, breaks: Vec<f64>) -> Result<Self> {
        let law = RadialLaw::Density {
            p,
            name: name.into(),
            density,
            breaks,
        };
        let mass = law.total_mass()?;
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Spec(format!("radial density integrates to {mass}, not 1")));
        }
        Ok(law)
    }

    /// Replaces an analytic law by `n` draws from it.
    pub fn monte_carlo(&self, n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let samples = (0..n).map(|_| self.sample(&mut rng)).collect::<Result<Vec<_>>>()?;
        RadialLaw::empirical(self.dim(), samples)
    }

    pub fn dim(&self) -> usize {
        match self {
            RadialLaw::ChiSquare { p }
            | RadialLaw::ScaledF { p, .. }
            | RadialLaw::Empirical { p, .. }
            | RadialLaw::Density { p, .. } => *p,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RadialLaw::ChiSquare { .. } => "chi-square",
            RadialLaw::ScaledF { .. } => "scaled-f",
            RadialLaw::Empirical { .. } => "empirical",
            RadialLaw::Density { .. } => "user-density",
        }
    }

    /// Density at `r`, or `None` for empirical laws.
    pub fn density(&self, r: f64) -> Option<f64> {
        if r <= 0.0 {
            return Some(0.0);
        }
        match self {
            RadialLaw::ChiSquare { p } => {
                let h = *p as f64 / 2.0;
                Some(((h - 1.0) * r.ln() - r / 2.0 - h * 2f64.ln() - ln_gamma(h)).exp())
            }
            RadialLaw::ScaledF { p, nu } => {
                let h = *p as f64 / 2.0;
                let log = -h * nu.ln() + (h - 1.0) * r.ln() - (h + nu / 2.0) * (r / nu).ln_1p() - ln_beta(h, nu / 2.0);
                Some(log.exp())
            }
            RadialLaw::Empirical { .. } => None,
            RadialLaw::Density { density, .. } => Some(density(r)),
        }
    }

    /// `d/dr log g(r)` for the density generator `g` of the underlying
    /// elliptical law, when it is known in closed form.
    pub fn generator_logderiv(&self) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        match *self {
            RadialLaw::ChiSquare { .. } => Some(Box::new(|_| -0.5)),
            RadialLaw::ScaledF { p, nu } => {
                let a = (p as f64 + nu) / 2.0;
                Some(Box::new(move |r| -a / (nu + r)))
            }
            _ => None,
        }
    }

    fn default_breaks(&self) -> Vec<f64> {
        let p = self.dim() as f64;
        let mut b = vec![0.25 * p, p, 4.0 * p];
        if let RadialLaw::Density { breaks, .. } = self {
            b.extend_from_slice(breaks);
        }
        b
    }

    /// `E[f(R)]`. `breaks` marks kinks of `f`; quadrature is split there.
    pub fn expect(&self, f: impl Fn(f64) -> f64, breaks: &[f64]) -> Result<f64> {
        if let RadialLaw::Empirical { samples, .. } = self {
            return Ok(samples.iter().map(|&r| f(r)).sum::<f64>() / samples.len() as f64);
        }
        let mut all = self.default_breaks();
        all.extend_from_slice(breaks);
        integrate_half_line(
            |r| {
                let d = self.density(r).unwrap_or(0.0);
                if d == 0.0 {
                    0.0
                } else {
                    f(r) * d
                }
            },
            &all,
            &QuadOptions::default(),
        )
    }

    pub fn total_mass(&self) -> Result<f64> {
        self.expect(|_| 1.0, &[])
    }

    /// Draws one radius.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        match self {
            RadialLaw::ChiSquare { p } => Ok(chi2(*p as f64).sample(rng)),
            RadialLaw::ScaledF { p, nu } => {
                let num = chi2(*p as f64).sample(rng);
                let den = chi2(*nu).sample(rng) / nu;
                Ok(num / den)
            }
            RadialLaw::Empirical { samples, .. } => Ok(samples[rng.random_range(0..samples.len())]),
            RadialLaw::Density { name, .. } => Err(Error::Spec(format!("radial density `{name}` has no sampler"))),
        }
    }
}

fn chi2(k: f64) -> ChiSquared<f64> {
    ChiSquared::new(k).expect("positive degrees of freedom")
}
