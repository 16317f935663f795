use serde::Serialize;

use crate::covsel::AsymptoticScalars;
use crate::error::{Error, Result};
use crate::mest::radial::RadialLaw;
use crate::mest::spec::EstimatorSpec;
use crate::quad::increasing_root;

/// Scalars of the sample covariance matrix at an elliptical law with
/// excess kurtosis `kappa`.
pub fn scalars_sample_cov(kappa: f64, p: usize) -> Result<AsymptoticScalars> {
    if !kappa.is_finite() {
        return Err(Error::ScalarBounds(format!("kurtosis must be finite, got {kappa}")));
    }
    AsymptoticScalars::new(1.0 + kappa / 3.0, kappa / 3.0, 1.0, p)
}

/// Excess kurtosis of a univariate marginal of the elliptical t law.
pub fn t_excess_kurtosis(nu: f64) -> Result<f64> {
    if !(nu > 4.0) {
        return Err(Error::ScalarBounds(format!(
            "fourth moments of t_{nu} are infinite (need nu > 4)"
        )));
    }
    Ok(6.0 / (nu - 4.0))
}

/// Scalars of the elliptical maximum likelihood estimator when the data
/// follow the same law. `g_logderiv` is `g'/g` for the density generator.
pub fn scalars_emle(radial: &RadialLaw, g_logderiv: impl Fn(f64) -> f64) -> Result<AsymptoticScalars> {
    let p = radial.dim() as f64;
    let m = radial.expect(
        |r| {
            let u = -2.0 * g_logderiv(r);
            r * r * u * u
        },
        &[],
    )?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Quadrature(m));
    }
    let s1 = p * (p + 2.0) / m;
    let s2 = -2.0 * s1 * (1.0 - s1) / (2.0 + p * (1.0 - s1));
    AsymptoticScalars::new(s1, s2, 1.0, radial.dim())
}

/// The M-functional quantities that determine [`scalars_m`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MFunctional {
    /// Solution `t` of `E[phi2(t R)] = p`. The estimator converges to
    /// `S / t`.
    pub root: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl MFunctional {
    pub fn scalars(&self, p: usize) -> Result<AsymptoticScalars> {
        let pf = p as f64;
        let (g1, g2) = (self.gamma1, self.gamma2);
        let denom = (2.0 * g2 + pf).powi(2);
        let s1 = (pf + 2.0).powi(2) * g1 / denom;
        let s2 = ((g1 - 1.0) - 2.0 * g1 * (g2 - 1.0) * (pf + (pf + 4.0) * g2) / denom) / (g2 * g2);
        AsymptoticScalars::new(s1, s2, 1.0 / self.root, p)
    }
}

fn radius_kinks(spec: &EstimatorSpec, t: f64) -> Vec<f64> {
    spec.weights().kinks().into_iter().map(|s| s / t).collect()
}

/// `E[phi2(t R)] - p` as a function of `t`.
pub fn m_functional_residual(spec: &EstimatorSpec, radial: &RadialLaw, t: f64) -> Result<f64> {
    let mean = radial.expect(|r| spec.phi2(t * r), &radius_kinks(spec, t))?;
    Ok(mean - spec.dim() as f64)
}

pub fn m_functional(spec: &EstimatorSpec, radial: &RadialLaw) -> Result<MFunctional> {
    let p = spec.dim();
    if radial.dim() != p {
        return Err(Error::Dimension {
            expected: p,
            actual: radial.dim(),
        });
    }
    let pf = p as f64;
    let root = increasing_root(|t| m_functional_residual(spec, radial, t), 1.0, 1e-12 * pf)
        .map_err(|e| e.context(format!("no M-functional for `{}` at this radial law", spec.name())))?;
    let kinks = radius_kinks(spec, root);
    let gamma1 = radial.expect(|r| spec.phi2(root * r).powi(2), &kinks)? / (pf * (pf + 2.0));
    let gamma2 = radial.expect(|r| root * r * spec.phi2_prime(root * r), &kinks)? / pf;
    if !(gamma2 > 0.0) {
        return Err(Error::ScalarBounds(format!("gamma2 = {gamma2} must be positive")));
    }
    Ok(MFunctional { root, gamma1, gamma2 })
}

/// Scalars of the M-estimator `spec` at data with radial law `radial`.
pub fn scalars_m(spec: &EstimatorSpec, radial: &RadialLaw) -> Result<AsymptoticScalars> {
    m_functional(spec, radial)?.scalars(spec.dim())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_cov_closed_forms() {
        assert_eq!(scalars_sample_cov(0.0, 3).unwrap(), AsymptoticScalars::gaussian());
        let s = scalars_sample_cov(1.0, 3).unwrap();
        assert!((s.sigma1 - 4.0 / 3.0).abs() < 1e-15 && (s.sigma2 - 1.0 / 3.0).abs() < 1e-15);
        assert!(scalars_sample_cov(-3.5, 3).is_err());
    }

    #[test]
    fn gaussian_functional_is_trivial() {
        let p = 4;
        let f = m_functional(&EstimatorSpec::gaussian(p), &RadialLaw::chi_square(p).unwrap()).unwrap();
        assert!((f.root - 1.0).abs() < 1e-10);
        assert!((f.gamma1 - 1.0).abs() < 1e-10 && (f.gamma2 - 1.0).abs() < 1e-10);
        let s = f.scalars(p).unwrap();
        assert!((s.sigma1 - 1.0).abs() < 1e-10 && s.sigma2.abs() < 1e-10);
    }

    #[test]
    fn t_mle_closed_form() {
        // At its own law the t MLE has sigma1 = 1 + 2 / (p + nu).
        for (p, nu) in [(3usize, 5.0), (6, 2.5), (2, 10.0)] {
            let radial = RadialLaw::t(nu, p).unwrap();
            let g = radial.generator_logderiv().unwrap();
            let s = scalars_emle(&radial, g).unwrap();
            assert!((s.sigma1 - (1.0 + 2.0 / (p as f64 + nu))).abs() < 1e-9, "{s:?}");
            assert!(s.sigma2 > 0.0);
            let m = scalars_m(&EstimatorSpec::t(nu, p).unwrap(), &radial).unwrap();
            assert!((m.sigma1 - s.sigma1).abs() < 1e-9);
            assert!((m.sigma2 - s.sigma2).abs() < 1e-9, "{m:?} vs {s:?}");
            assert!((m.eta - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn root_residual_for_huber() {
        let p = 3;
        let spec = EstimatorSpec::huber(1.345, p).unwrap();
        let radial = RadialLaw::t(5.0, p).unwrap();
        let f = m_functional(&spec, &radial).unwrap();
        assert!(m_functional_residual(&spec, &radial, f.root).unwrap().abs() <= 1e-9);
    }
}
