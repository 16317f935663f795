//! M-estimators of multivariate location and scatter, with and without a
//! graphical constraint on the scatter, and their asymptotic scalars.

pub mod radial;
pub mod scalars;
pub mod spec;

use nalgebra::{DMatrix, DVector};

use crate::covsel::{h_g, h_g_from, AsymptoticScalars, HgOptions};
use crate::error::{Error, Result};
use crate::graphs::GraphIndex;
use crate::linops::{PositionSet, SpdMatrix};

pub use radial::RadialLaw;
pub use scalars::{
    m_functional, m_functional_residual, scalars_emle, scalars_m, scalars_sample_cov, t_excess_kurtosis, MFunctional,
};
pub use spec::{EstimatorKind, EstimatorSpec, WeightFunctions};

/// Condition number of the sample covariance above which data are treated
/// as rank deficient.
pub const DEGENERATE_CONDITION: f64 = 1e13;

/// Ratio of the `h_G` tolerance to the outer residual in the double loop,
/// and of the plug-in `h_G` tolerance to the M-estimation tolerance.
pub const INNER_TOL_FACTOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MOptions {
    pub tol: f64,
    /// Maximum number of outer fixed-point iterations.
    pub max_iter: usize,
    /// Return an error instead of an unconverged result.
    pub strict: bool,
}

impl Default for MOptions {
    fn default() -> Self {
        MOptions {
            tol: 1e-9,
            max_iter: 500,
            strict: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub mu: DVector<f64>,
    pub scatter: SpdMatrix,
    pub scalars: Option<AsymptoticScalars>,
    pub iterations: usize,
    /// Total IPS sweeps spent in `h_G` calls.
    pub inner_iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

/// One fixed-point evaluation at `(mu, s)`.
struct Step {
    mu_next: DVector<f64>,
    /// Weighted scatter about `mu`.
    scatter_here: DMatrix<f64>,
    /// Weighted scatter about `mu_next`, with the same weights.
    scatter_next: DMatrix<f64>,
    /// Mahalanobis length of `mu_next - mu`.
    location_change: f64,
}

fn step(x: &DMatrix<f64>, mu: &DVector<f64>, s: &SpdMatrix, spec: &EstimatorSpec) -> Result<Step> {
    let n = x.nrows() as f64;
    let mut centered = x.transpose();
    for mut col in centered.column_iter_mut() {
        col -= mu;
    }
    let l = s.cholesky().l();
    let z = l.solve_lower_triangular(&centered).ok_or(Error::NotPositiveDefinite)?;
    let radii: Vec<f64> = z.column_iter().map(|c| c.norm_squared()).collect();
    let w1: Vec<f64> = radii.iter().map(|&r| spec.u1(r)).collect();
    let w2: Vec<f64> = radii.iter().map(|&r| spec.u2(r)).collect();
    let sum1: f64 = w1.iter().sum();
    let sum2: f64 = w2.iter().sum();
    if !(sum1 > 0.0 && sum1.is_finite() && sum2.is_finite()) {
        return Err(Error::DegenerateData);
    }
    let delta = &centered * DVector::from_vec(w1) / sum1;
    let mut scaled = centered.clone();
    for (mut col, &w) in scaled.column_iter_mut().zip(&w2) {
        col *= w;
    }
    let scatter_here = &scaled * centered.transpose() / n;
    let a = scaled.column_sum();
    let cross = &a * delta.transpose();
    let scatter_next = &scatter_here - (&cross + cross.transpose()) / n + (&delta * delta.transpose()) * (sum2 / n);
    let location_change = l
        .solve_lower_triangular(&delta)
        .ok_or(Error::NotPositiveDefinite)?
        .norm();
    Ok(Step {
        mu_next: mu + delta,
        scatter_here,
        scatter_next,
        location_change,
    })
}

fn scatter_gap<'a>(s: &DMatrix<f64>, w: &DMatrix<f64>, positions: impl Iterator<Item = (usize, usize)> + 'a) -> f64 {
    positions
        .map(|(i, j)| (s[(i, j)] - w[(i, j)]).abs() / (s[(i, i)] * s[(j, j)]).sqrt())
        .fold(0.0, f64::max)
}

/// Scale-free residual of the unconstrained M-estimating equations at
/// `(mu, s)`.
pub fn m_residual(x: &DMatrix<f64>, mu: &DVector<f64>, s: &SpdMatrix, spec: &EstimatorSpec) -> Result<f64> {
    let st = step(x, mu, s, spec)?;
    let all = PositionSet::lower_triangle(s.dim());
    Ok(st
        .location_change
        .max(scatter_gap(s.as_matrix(), &st.scatter_here, all.iter())))
}

/// Scale-free residual of the graphical M-estimating equations: location
/// equation, weighted-scatter match on the diagonal and edges, and zeros of
/// the inverse on the non-edges.
pub fn mg_residual(
    x: &DMatrix<f64>,
    mu: &DVector<f64>,
    s: &SpdMatrix,
    idx: &GraphIndex,
    spec: &EstimatorSpec,
) -> Result<f64> {
    let st = step(x, mu, s, spec)?;
    let k = s.inverse().into_inner();
    let zeros = idx
        .d_positions()
        .iter()
        .map(|(i, j)| k[(i, j)].abs() / (k[(i, i)] * k[(j, j)]).sqrt())
        .fold(0.0, f64::max);
    Ok(st
        .location_change
        .max(scatter_gap(s.as_matrix(), &st.scatter_here, idx.k_positions().iter()))
        .max(zeros))
}

/// Sample mean and `1/n` sample covariance after checking sample size and
/// rank.
fn moments(x: &DMatrix<f64>, spec: &EstimatorSpec) -> Result<(DVector<f64>, SpdMatrix)> {
    let (n, p) = x.shape();
    if p != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            actual: p,
        });
    }
    if n <= p {
        return Err(Error::SampleSize {
            required: p + 1,
            actual: n,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("data contain non-finite values".into()));
    }
    let mu = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mu.transpose();
    }
    let cov = centered.transpose() * &centered / n as f64;
    let cov = SpdMatrix::new(cov).map_err(|_| Error::DegenerateData)?;
    if cov.condition_number() > DEGENERATE_CONDITION {
        return Err(Error::DegenerateData);
    }
    Ok((mu, cov))
}

fn finish(fit: FitResult, opts: &MOptions) -> Result<FitResult> {
    if !fit.converged && opts.strict {
        return Err(Error::NoConvergence {
            iterations: fit.iterations,
            residual: fit.residual,
        });
    }
    Ok(fit)
}

fn check_tol(opts: &MOptions) -> Result<()> {
    if !(opts.tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    Ok(())
}

/// Solves the M-estimating equations for location and scatter by
/// alternating fixed-point iteration from the sample mean and covariance.
pub fn m_estimate(x: &DMatrix<f64>, spec: &EstimatorSpec, opts: &MOptions) -> Result<FitResult> {
    check_tol(opts)?;
    let (mut mu, mut s) = moments(x, spec)?;
    let all = PositionSet::lower_triangle(s.dim());
    let mut residual = f64::INFINITY;
    for it in 0..=opts.max_iter {
        let st = step(x, &mu, &s, spec)?;
        residual = st
            .location_change
            .max(scatter_gap(s.as_matrix(), &st.scatter_here, all.iter()));
        if residual <= opts.tol {
            return Ok(FitResult {
                mu,
                scatter: s,
                scalars: None,
                iterations: it,
                inner_iterations: 0,
                converged: true,
                residual,
            });
        }
        if it == opts.max_iter {
            break;
        }
        mu = st.mu_next;
        s = SpdMatrix::new(st.scatter_next).map_err(|_| Error::DegenerateData)?;
    }
    finish(
        FitResult {
            mu,
            scatter: s,
            scalars: None,
            iterations: opts.max_iter,
            inner_iterations: 0,
            converged: false,
            residual,
        },
        opts,
    )
}

/// Solves the graphical M-estimating equations with a double loop: each
/// outer step reweights the data at the current fit and maps the weighted
/// scatter through `h_G`, warm-started at the previous concentration.
pub fn graphical_m_estimate(
    x: &DMatrix<f64>,
    idx: &GraphIndex,
    spec: &EstimatorSpec,
    opts: &MOptions,
) -> Result<FitResult> {
    check_tol(opts)?;
    if idx.dim() != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            actual: idx.dim(),
        });
    }
    let (mut mu, cov) = moments(x, spec)?;
    let floor = INNER_TOL_FACTOR * opts.tol;
    let first = h_g(
        &cov,
        idx,
        &HgOptions {
            tol: floor,
            ..Default::default()
        },
    )?;
    let mut inner = first.iterations;
    let mut s = first.matrix;
    let mut k = first.concentration;
    let mut residual = f64::INFINITY;
    for it in 0..=opts.max_iter {
        let st = step(x, &mu, &s, spec)?;
        residual = st
            .location_change
            .max(scatter_gap(s.as_matrix(), &st.scatter_here, idx.k_positions().iter()));
        if residual <= opts.tol {
            return Ok(FitResult {
                mu,
                scatter: s,
                scalars: None,
                iterations: it,
                inner_iterations: inner,
                converged: true,
                residual,
            });
        }
        if it == opts.max_iter {
            break;
        }
        let target = SpdMatrix::new(st.scatter_next).map_err(|_| Error::DegenerateData)?;
        let inner_opts = HgOptions {
            tol: (INNER_TOL_FACTOR * residual).min(1e-3).max(floor),
            ..Default::default()
        };
        let sol = h_g_from(&target, idx, &inner_opts, Some(&k))?;
        inner += sol.iterations;
        mu = st.mu_next;
        s = sol.matrix;
        k = sol.concentration;
    }
    finish(
        FitResult {
            mu,
            scatter: s,
            scalars: None,
            iterations: opts.max_iter,
            inner_iterations: inner,
            converged: false,
            residual,
        },
        opts,
    )
}

/// `(mu_n, h_G(S_n))` with `(mu_n, S_n)` from [`m_estimate`].
pub fn plug_in_estimate(
    x: &DMatrix<f64>,
    idx: &GraphIndex,
    spec: &EstimatorSpec,
    opts: &MOptions,
) -> Result<FitResult> {
    if idx.dim() != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            actual: idx.dim(),
        });
    }
    let fit = m_estimate(x, spec, opts)?;
    let sol = h_g(
        &fit.scatter,
        idx,
        &HgOptions {
            tol: (INNER_TOL_FACTOR * opts.tol).min(1e-10),
            ..Default::default()
        },
    )?;
    Ok(FitResult {
        scatter: sol.matrix,
        inner_iterations: sol.iterations,
        residual: fit.residual.max(sol.residual),
        ..fit
    })
}
