//! Deviance tests between nested graphical models, backward elimination,
//! and asymptotic efficiency of graph-constrained partial correlations.

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::covsel::{h_g, inverse_in_model, AsymptoticScalars, HgOptions, MODEL_TOL};
use crate::error::{Error, Result};
use crate::graphs::{Graph, GraphIndex};
use crate::linops::{self, kron, symmetrization_matrix, vec_index, SpdMatrix, SymMatrix, MAX_DENSE_DIM};
use crate::mest::{graphical_m_estimate, m_estimate, EstimatorSpec, MOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DevianceReport {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// Divisor applied to the raw deviance.
    pub sigma1: f64,
    pub n: usize,
}

/// Upper tail probability of `chi^2_df` at `x`.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    let dist = ChiSquared::new(df as f64).expect("positive degrees of freedom");
    dist.sf(x.max(0.0)).clamp(0.0, 1.0)
}

/// Upper `alpha` quantile of `chi^2_df`.
pub fn chi2_quantile(prob: f64, df: usize) -> f64 {
    ChiSquared::new(df as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(prob)
}

fn label((i, j): (usize, usize)) -> String {
    format!("{}-{}", j + 1, i + 1)
}

/// Checks that `g0` is a proper subgraph of `g1`.
pub fn check_nested(g0: &Graph, g1: &Graph) -> Result<()> {
    if g0.dim() != g1.dim() {
        return Err(Error::Dimension {
            expected: g1.dim(),
            actual: g0.dim(),
        });
    }
    if let Some(e) = g0.edges_not_in(g1).next() {
        return Err(Error::NotNested(format!(
            "edge {} of the null graph is missing from the alternative",
            label(e)
        )));
    }
    if g0.num_edges() == g1.num_edges() {
        return Err(Error::NotNested("null and alternative graphs are identical".into()));
    }
    Ok(())
}

fn log_det_hg(s: &SpdMatrix, graph: &Graph) -> Result<f64> {
    let idx = GraphIndex::new(graph.clone());
    Ok(h_g(s, &idx, &HgOptions::default())?.matrix.log_det())
}

fn report(raw: f64, df: usize, n: usize, sigma1: f64) -> DevianceReport {
    // Clamp the rounding-level negatives that arise when the models agree.
    let statistic = (raw / sigma1).max(0.0);
    DevianceReport {
        statistic,
        df,
        p_value: chi2_sf(statistic, df),
        sigma1,
        n,
    }
}

/// Deviance `n {log det h_G0(S) - log det h_G1(S)} / sigma1` of the null
/// graph `G0` within the alternative `G1`, referred to `chi^2_{q0 - q1}`.
pub fn deviance(
    s_hat: &SpdMatrix,
    idx0: &GraphIndex,
    idx1: &GraphIndex,
    n: usize,
    sigma1: f64,
) -> Result<DevianceReport> {
    check_nested(idx0.graph(), idx1.graph())?;
    if idx0.dim() != s_hat.dim() {
        return Err(Error::Dimension {
            expected: idx0.dim(),
            actual: s_hat.dim(),
        });
    }
    if !(sigma1 > 0.0 && sigma1.is_finite()) {
        return Err(Error::ScalarBounds(format!("sigma1 must be positive, got {sigma1}")));
    }
    let ld0 = h_g(s_hat, idx0, &HgOptions::default())?.matrix.log_det();
    let ld1 = h_g(s_hat, idx1, &HgOptions::default())?.matrix.log_det();
    Ok(report(n as f64 * (ld0 - ld1), idx0.q() - idx1.q(), n, sigma1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EliminationOptions {
    pub alpha: f64,
    pub sigma1: f64,
    /// Refit the graphical M-estimator for every candidate instead of
    /// projecting one unconstrained estimate.
    pub refit_graphical: bool,
    pub fit: MOptions,
}

impl Default for EliminationOptions {
    fn default() -> Self {
        EliminationOptions {
            alpha: 0.05,
            sigma1: 1.0,
            refit_graphical: false,
            fit: MOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EliminationStep {
    /// 0-based `(larger, smaller)` vertex pair.
    pub removed_edge: (usize, usize),
    pub deviance_delta: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone)]
pub struct Elimination {
    pub graph: Graph,
    pub steps: Vec<EliminationStep>,
    /// The weakest remaining edge when the search stopped, if any.
    pub stopping_candidate: Option<EliminationStep>,
    /// Set when a candidate evaluation failed; `graph` and `steps` then
    /// hold the state reached before the failing step.
    pub failure: Option<Error>,
}

/// Backward elimination from the complete graph: at each step the edge
/// with the smallest single-edge deviance is removed while its p-value
/// exceeds `alpha`. A failure of the initial unconstrained fit is an
/// error; later failures end the search and are reported in the result.
pub fn backward_elimination(x: &DMatrix<f64>, spec: &EstimatorSpec, opts: &EliminationOptions) -> Result<Elimination> {
    if !(opts.alpha >= 0.0 && opts.alpha <= 1.0) {
        return Err(Error::Argument(format!("alpha must lie in [0, 1], got {}", opts.alpha)));
    }
    if !(opts.sigma1 > 0.0) {
        return Err(Error::ScalarBounds(format!(
            "sigma1 must be positive, got {}",
            opts.sigma1
        )));
    }
    let n = x.nrows();
    let p = x.ncols();
    let s_hat = m_estimate(x, spec, &opts.fit)
        .map_err(|e| e.context("unconstrained fit"))?
        .scatter;
    let log_det = |g: &Graph| -> Result<f64> {
        if opts.refit_graphical {
            let idx = GraphIndex::new(g.clone());
            Ok(graphical_m_estimate(x, &idx, spec, &opts.fit)?.scatter.log_det())
        } else {
            log_det_hg(&s_hat, g)
        }
    };
    let mut graph = Graph::complete(p);
    let mut current = s_hat.log_det();
    let mut steps = Vec::new();
    for step in 1.. {
        let edges: Vec<(usize, usize)> = graph.edges().collect();
        if edges.is_empty() {
            return Ok(Elimination {
                graph,
                steps,
                stopping_candidate: None,
                failure: None,
            });
        }
        let candidates = edges
            .par_iter()
            .map(|&(i, j)| {
                let mut g = graph.clone();
                g.remove_edge(i, j);
                log_det(&g)
                    .map(|ld| {
                        let r = report(n as f64 * (ld - current), 1, n, opts.sigma1);
                        (r.statistic, (i, j), ld)
                    })
                    .map_err(|e| e.context(format!("step {step}, candidate edge {}", label((i, j)))))
            })
            .collect::<Result<Vec<(f64, (usize, usize), f64)>>>();
        let candidates = match candidates {
            Ok(c) => c,
            Err(e) => {
                return Ok(Elimination {
                    graph,
                    steps,
                    stopping_candidate: None,
                    failure: Some(e),
                })
            }
        };
        let (delta, edge, ld) = candidates
            .into_iter()
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .expect("at least one candidate");
        let entry = EliminationStep {
            removed_edge: edge,
            deviance_delta: delta,
            p_value: chi2_sf(delta, 1),
        };
        if entry.p_value > opts.alpha {
            graph.remove_edge(edge.0, edge.1);
            current = ld;
            steps.push(entry);
        } else {
            return Ok(Elimination {
                graph,
                steps,
                stopping_candidate: Some(entry),
                failure: None,
            });
        }
    }
    unreachable!("the loop only exits by returning")
}

fn inv_sqrt_diag(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    a.diagonal()
        .iter()
        .map(|&d| {
            if d > 0.0 && d.is_finite() {
                Ok(1.0 / d.sqrt())
            } else {
                Err(Error::NotPositiveDefinite)
            }
        })
        .collect()
}

/// `pi(A) = -A_D^{-1/2} A A_D^{-1/2}`: off the diagonal the partial
/// correlations when `A` is a concentration matrix, `-1` on it.
pub fn partial_correlation(a: &SpdMatrix) -> SymMatrix {
    let m = a.as_matrix();
    let w = inv_sqrt_diag(m).expect("positive definite matrices have positive diagonals");
    let pi = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        if i == j {
            return -1.0;
        }
        let (r, c) = (i.max(j), i.min(j));
        -m[(r, c)] * (w[r] * w[c])
    });
    SymMatrix::new(pi).expect("congruence of a symmetric matrix is symmetric")
}

/// Directional derivative of `pi` at `a` along `e` (symmetrized).
pub fn partial_correlation_directional(a: &SpdMatrix, e: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = a.dim();
    if e.shape() != (p, p) {
        return Err(Error::Dimension {
            expected: p,
            actual: e.nrows(),
        });
    }
    let m = a.as_matrix();
    let w = inv_sqrt_diag(m)?;
    let pi = partial_correlation(a).into_inner();
    let es = linops::symmetric_part(e);
    let n: Vec<f64> = (0..p).map(|i| es[(i, i)] / m[(i, i)]).collect();
    Ok(DMatrix::from_fn(p, p, |i, j| {
        -es[(i, j)] * w[i] * w[j] - 0.5 * (n[i] + n[j]) * pi[(i, j)]
    }))
}

/// `D pi(A) = -M_p {pi(A) kron A_D^{-1}} J_p - (A_D^{-1/2} kron A_D^{-1/2}) M_p`
/// as a dense `p^2 x p^2` matrix.
pub fn partial_correlation_derivative(a: &SpdMatrix) -> Result<DMatrix<f64>> {
    let p = a.dim();
    if p > MAX_DENSE_DIM {
        return Err(Error::TooLargeForDense {
            p,
            limit: MAX_DENSE_DIM,
        });
    }
    let m = a.as_matrix();
    let w = inv_sqrt_diag(m)?;
    let pi = partial_correlation(a).into_inner();
    let mp = symmetrization_matrix(p)?;
    let ad_inv = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 / m[(i, i)] } else { 0.0 });
    let delta = DMatrix::from_fn(p, p, |i, j| if i == j { w[i] } else { 0.0 });
    let mut jp = DMatrix::zeros(p * p, p * p);
    for i in 0..p {
        let v = vec_index((i, i), p);
        jp[(v, v)] = 1.0;
    }
    Ok(-(&mp * kron(&pi, &ad_inv) * jp) - kron(&delta, &delta) * mp)
}

/// Gradient of `pi(K)_{ij}` with respect to `K`, as a symmetric matrix.
fn pi_gradient(k: &DMatrix<f64>, (i, j): (usize, usize)) -> DMatrix<f64> {
    let (di, dj) = (k[(i, i)], k[(j, j)]);
    let pij = -k[(i, j)] / (di * dj).sqrt();
    let mut r = DMatrix::zeros(k.nrows(), k.ncols());
    r[(i, j)] = -0.5 / (di * dj).sqrt();
    r[(j, i)] = r[(i, j)];
    r[(i, i)] += -0.5 * pij / di;
    r[(j, j)] += -0.5 * pij / dj;
    r
}

/// Asymptotic variance of the partial correlation at `position` derived
/// from a scatter estimate with limit `v`, either unconstrained (`idx`
/// absent) or constrained to the graph of `idx`.
pub fn asv_partial_correlation(
    v: &SpdMatrix,
    idx: Option<&GraphIndex>,
    s: &AsymptoticScalars,
    position: (usize, usize),
) -> Result<f64> {
    let p = v.dim();
    let (i, j) = position;
    if i >= p || j >= p || i == j {
        return Err(Error::InvalidPositions(format!(
            "partial correlation position ({i}, {j}) must be off-diagonal in dimension {p}"
        )));
    }
    s.check(p)?;
    let k = v.inverse().into_inner();
    let r = pi_gradient(&k, position);
    match idx {
        None => {
            let rk = &r * &k;
            Ok(2.0 * s.sigma1 * (&rk * &rk).trace())
        }
        Some(idx) => {
            if idx.dim() != p {
                return Err(Error::Dimension {
                    expected: p,
                    actual: idx.dim(),
                });
            }
            if !inverse_in_model(v, idx, MODEL_TOL) {
                return Err(Error::Precondition(
                    "inverse of the scatter limit does not vanish on the non-edge positions".into(),
                ));
            }
            let z = idx.k_positions().positions();
            let g = linops::duplication_project(&r, z);
            let gram = linops::duplication_gram(v.as_matrix(), z);
            let chol = Cholesky::new(gram).ok_or(Error::NotPositiveDefinite)?;
            let sol = chol.solve(&g);
            Ok(2.0 * s.sigma1 * g.dot(&sol))
        }
    }
}

/// The concentration matrix of the chordless `p`-cycle with all partial
/// correlations equal to `c`, and its inverse.
pub fn chordless_cycle_shape(p: usize, c: f64) -> Result<(SpdMatrix, SpdMatrix)> {
    if p < 4 {
        return Err(Error::Precondition(format!("a chordless cycle needs p >= 4, got {p}")));
    }
    if !(c.abs() < 0.5) {
        return Err(Error::Precondition(format!(
            "|c| must be below 1/2 for a positive definite cycle, got {c}"
        )));
    }
    let k = DMatrix::from_fn(p, p, |i, j| {
        let d = (i + p - j) % p;
        if i == j {
            1.0
        } else if d == 1 || d == p - 1 {
            -c
        } else {
            0.0
        }
    });
    let k = SpdMatrix::new(k)?;
    let s = k.inverse();
    Ok((k, s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AreResult {
    pub p: usize,
    pub c: f64,
    pub asv_unconstrained: f64,
    pub asv_constrained: f64,
    pub are: f64,
}

/// Efficiency of the cycle-constrained estimate of the partial correlation
/// of variables 1 and 2 relative to the unconstrained estimate.
pub fn are_chordless_cycle(p: usize, c: f64) -> Result<AreResult> {
    let (_, s) = chordless_cycle_shape(p, c)?;
    are_at(&s, p, c, (1, 0))
}

/// As [`are_chordless_cycle`] for a given cycle shape matrix and edge.
pub fn are_at(s: &SpdMatrix, p: usize, c: f64, position: (usize, usize)) -> Result<AreResult> {
    let idx = GraphIndex::new(Graph::cycle(p)?);
    let unit = AsymptoticScalars::gaussian();
    let asv_unconstrained = asv_partial_correlation(s, None, &unit, position)?;
    let asv_constrained = asv_partial_correlation(s, Some(&idx), &unit, position)?;
    Ok(AreResult {
        p,
        c,
        asv_unconstrained,
        asv_constrained,
        are: asv_unconstrained / asv_constrained,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_of_identity_and_two_by_two() {
        let pi = partial_correlation(&SpdMatrix::identity(3)).into_inner();
        assert_eq!(pi, -DMatrix::identity(3, 3));
        let k = SpdMatrix::new(nalgebra::dmatrix![1.0, -0.3; -0.3, 1.0]).unwrap();
        assert!((partial_correlation(&k).as_matrix()[(0, 1)] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn cycle_shape_properties() {
        let (k, s) = chordless_cycle_shape(5, 0.0).unwrap();
        assert_eq!(k.as_matrix(), &DMatrix::identity(5, 5));
        assert!((s.as_matrix() - DMatrix::identity(5, 5)).norm() < 1e-15);
        assert!(chordless_cycle_shape(5, 0.5).is_err());
        assert!(chordless_cycle_shape(3, 0.1).is_err());
    }

    #[test]
    fn table_spot_values() {
        for (p, c, want) in [(7, -0.3, 1.23), (5, -0.49, 2.27), (4, -0.49, 1.48), (50, -0.49, 2.36)] {
            let r = are_chordless_cycle(p, c).unwrap();
            assert!(
                ((r.are * 100.0).round() / 100.0 - want).abs() < 1e-9,
                "p={p} c={c}: {}",
                r.are
            );
        }
        assert!((are_chordless_cycle(9, 0.0).unwrap().are - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nesting_errors_name_the_edge() {
        let g0 = Graph::from_edges(4, [(1, 0), (3, 2)]).unwrap();
        let g1 = Graph::from_edges(4, [(1, 0), (2, 1)]).unwrap();
        let err = check_nested(&g0, &g1).unwrap_err();
        assert!(err.to_string().contains("3-4"), "{err}");
        assert!(check_nested(&g1, &g1).is_err());
    }

    #[test]
    fn deviance_zero_when_null_holds_exactly() {
        let (_, s) = chordless_cycle_shape(5, -0.3).unwrap();
        let idx0 = GraphIndex::new(Graph::cycle(5).unwrap());
        let idx1 = GraphIndex::new(Graph::complete(5));
        let r = deviance(&s, &idx0, &idx1, 100, 1.0).unwrap();
        assert!(r.statistic < 1e-7 && r.df == 5);
        assert!(r.p_value > 0.999);
    }
}
