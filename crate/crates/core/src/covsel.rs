//! The covariance-selection map `h_G`, its derivative, and the asymptotic
//! covariance matrices of graph-constrained scatter estimates.
//!
//! `h_G(A)` is the positive definite matrix that agrees with `A` on the
//! diagonal and on edge positions of `G` while its inverse vanishes on the
//! non-edge positions. It is computed by iterative proportional scaling
//! over the maximal cliques of `G`, which converges for any graph.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::graphs::GraphIndex;
use crate::linops::{self, symmetric_part, vec, vec_index, SpdMatrix, MAX_DENSE_DIM};

/// Conditioning above which a result is flagged.
pub const ILL_CONDITIONED: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HgOptions {
    /// Bound on [`eq1_residual`].
    pub tol: f64,
    /// Maximum number of full clique sweeps.
    pub max_iter: usize,
}

impl Default for HgOptions {
    fn default() -> Self {
        HgOptions {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HgSolution {
    /// `h_G(A)`.
    pub matrix: SpdMatrix,
    /// `h_G(A)^{-1}`; exactly zero on the non-edge positions.
    pub concentration: SpdMatrix,
    /// Completed clique sweeps.
    pub iterations: usize,
    pub residual: f64,
    /// Residual after each sweep.
    pub residual_history: Vec<f64>,
    /// Condition number of the input.
    pub condition: f64,
    pub ill_conditioned: bool,
}

/// Scale-free violation of the defining conditions of `h_G(A)` by a
/// candidate `sigma` with inverse `kappa`: the largest of
/// `|sigma_ij - a_ij| / sqrt(a_ii a_jj)` over the diagonal and edge positions
/// and `|kappa_ij| / sqrt(kappa_ii kappa_jj)` over the non-edge positions.
pub fn eq1_residual(a: &DMatrix<f64>, sigma: &DMatrix<f64>, kappa: &DMatrix<f64>, idx: &GraphIndex) -> f64 {
    let on_k = idx
        .k_positions()
        .iter()
        .map(|(i, j)| (sigma[(i, j)] - a[(i, j)]).abs() / (a[(i, i)] * a[(j, j)]).sqrt());
    let on_d = idx
        .d_positions()
        .iter()
        .map(|(i, j)| kappa[(i, j)].abs() / (kappa[(i, i)] * kappa[(j, j)]).sqrt());
    on_k.chain(on_d).fold(0.0, f64::max)
}

/// True when `v^{-1}` vanishes on the non-edge positions of `idx` up to the
/// relative tolerance `tol`.
pub fn inverse_in_model(v: &SpdMatrix, idx: &GraphIndex, tol: f64) -> bool {
    pattern_violation(v, idx) <= tol
}

fn pattern_violation(v: &SpdMatrix, idx: &GraphIndex) -> f64 {
    let k = v.inverse().into_inner();
    idx.d_positions()
        .iter()
        .map(|(i, j)| k[(i, j)].abs() / (k[(i, i)] * k[(j, j)]).sqrt())
        .fold(0.0, f64::max)
}

/// Computes `h_G(a)` by clique-wise iterative proportional scaling, starting
/// from `diag(a)^{-1}`.
pub fn h_g(a: &SpdMatrix, idx: &GraphIndex, opts: &HgOptions) -> Result<HgSolution> {
    h_g_from(a, idx, opts, None)
}

/// As [`h_g`] but starting from the concentration matrix `start`, which
/// must vanish on the non-edge positions (e.g. a previous solution).
pub fn h_g_from(a: &SpdMatrix, idx: &GraphIndex, opts: &HgOptions, start: Option<&SpdMatrix>) -> Result<HgSolution> {
    let p = a.dim();
    if idx.dim() != p {
        return Err(Error::Dimension {
            expected: idx.dim(),
            actual: p,
        });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let condition = a.condition_number();
    let ill_conditioned = condition > ILL_CONDITIONED;
    let am = a.as_matrix();

    if idx.q() == 0 {
        return Ok(HgSolution {
            matrix: a.clone(),
            concentration: a.inverse(),
            iterations: 0,
            residual: 0.0,
            residual_history: Vec::new(),
            condition,
            ill_conditioned,
        });
    }

    let mut k = match start {
        Some(s) => {
            if s.dim() != p || idx.d_positions().iter().any(|(i, j)| s.as_matrix()[(i, j)] != 0.0) {
                return Err(Error::Precondition(
                    "starting concentration matrix must vanish on non-edge positions".into(),
                ));
            }
            s.as_matrix().clone()
        }
        None => DMatrix::from_diagonal(&am.diagonal().map(|x| 1.0 / x)),
    };
    let cliques = idx.graph().maximal_cliques();
    // Inverses of the fixed target blocks.
    let targets: Vec<DMatrix<f64>> = cliques
        .iter()
        .map(|c| {
            let block = am.select_rows(c).select_columns(c);
            Cholesky::new(block)
                .map(|l| l.inverse())
                .ok_or(Error::NotPositiveDefinite)
        })
        .collect::<Result<_>>()?;

    let mut sigma = invert_spd(&k)?;
    let mut history = Vec::new();
    let mut residual = eq1_residual(am, &sigma, &k, idx);
    for sweep in 1..=opts.max_iter {
        for (c, target_inv) in cliques.iter().zip(&targets) {
            let sigma_cc = sigma.select_rows(c).select_columns(c);
            let sigma_cc_inv = Cholesky::new(sigma_cc.clone())
                .map(|l| l.inverse())
                .ok_or(Error::NotPositiveDefinite)?;
            let correction = target_inv - &sigma_cc_inv;
            for (a_pos, &ci) in c.iter().enumerate() {
                for (b_pos, &cj) in c.iter().enumerate() {
                    k[(ci, cj)] += correction[(a_pos, b_pos)];
                }
            }
            // Rank-|C| update of sigma.
            let a_cc = am.select_rows(c).select_columns(c);
            let mid = &sigma_cc_inv * (&sigma_cc - a_cc) * &sigma_cc_inv;
            let sigma_c = sigma.select_columns(c);
            sigma -= &sigma_c * mid * sigma_c.transpose();
        }
        k = symmetric_part(&k);
        sigma = invert_spd(&k)?;
        residual = eq1_residual(am, &sigma, &k, idx);
        history.push(residual);
        if residual <= opts.tol {
            return Ok(HgSolution {
                matrix: SpdMatrix::new(sigma)?,
                concentration: SpdMatrix::new(k)?,
                iterations: sweep,
                residual,
                residual_history: history,
                condition,
                ill_conditioned,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

fn invert_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Cholesky::new(m.clone())
        .map(|l| symmetric_part(&l.inverse()))
        .ok_or(Error::NotPositiveDefinite)
}

/// The derivative of `h_G` at a point, held in factored form.
///
/// As a `p^2 x p^2` matrix it equals
/// `M_p - M_p Q_D^T H^{-1} Q_D (B kron B) M_p` with `B = h_G(A)^{-1}` and
/// `H = Q_D M_p (B kron B) Q_D^T`; for a complete graph it is `M_p`.
#[derive(Debug, Clone)]
pub struct HgDerivative {
    p: usize,
    b: DMatrix<f64>,
    d: Vec<(usize, usize)>,
    h: Option<Cholesky<f64, Dyn>>,
    /// Rough condition estimate of `H` from its Cholesky factor.
    pub h_condition: f64,
}

/// Derivative of `h_G` at `a`.
pub fn h_g_derivative(a: &SpdMatrix, idx: &GraphIndex, opts: &HgOptions) -> Result<HgDerivative> {
    let sol = h_g(a, idx, opts)?;
    HgDerivative::at_solution(&sol, idx)
}

impl HgDerivative {
    /// Builds the derivative from an already computed `h_G(A)`.
    pub fn at_solution(sol: &HgSolution, idx: &GraphIndex) -> Result<Self> {
        let b = sol.concentration.as_matrix().clone();
        let d: Vec<(usize, usize)> = idx.d_positions().positions().to_vec();
        let q = d.len();
        if q == 0 {
            return Ok(HgDerivative {
                p: idx.dim(),
                b,
                d,
                h: None,
                h_condition: 1.0,
            });
        }
        let mut h = DMatrix::zeros(q, q);
        for (r, &(i, j)) in d.iter().enumerate() {
            for (c, &(k, l)) in d.iter().enumerate().skip(r) {
                let v = 0.5 * (b[(i, k)] * b[(l, j)] + b[(i, l)] * b[(k, j)]);
                h[(r, c)] = v;
                h[(c, r)] = v;
            }
        }
        let chol = Cholesky::new(h).ok_or(Error::NotPositiveDefinite)?;
        let diag = chol.l_dirty().diagonal();
        let h_condition = (diag.max() / diag.min()).powi(2);
        Ok(HgDerivative {
            p: idx.dim(),
            b,
            d,
            h: Some(chol),
            h_condition,
        })
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// `mat(Dh_G(A) vec(e))`.
    pub fn apply(&self, e: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = symmetric_part(e);
        let Some(h) = &self.h else {
            return out;
        };
        let beb = &self.b * &out * &self.b;
        let f = DVector::from_iterator(self.d.len(), self.d.iter().map(|&pos| beb[pos]));
        let y = h.solve(&f);
        for (&(i, j), &yd) in self.d.iter().zip(y.iter()) {
            out[(i, j)] -= 0.5 * yd;
            out[(j, i)] -= 0.5 * yd;
        }
        out
    }

    /// The `p^2 x p^2` matrix.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let p = self.p;
        let mut out = linops::symmetrization_matrix(p)?;
        let Some(h) = &self.h else {
            return Ok(out);
        };
        let b = &self.b;
        let q = self.d.len();
        let mut f = DMatrix::zeros(q, p * p);
        for (r, &(i, j)) in self.d.iter().enumerate() {
            for col in 0..p {
                for row in 0..p {
                    f[(r, vec_index((row, col), p))] = 0.5 * (b[(i, row)] * b[(col, j)] + b[(i, col)] * b[(row, j)]);
                }
            }
        }
        let y = h.solve(&f);
        for (r, &(i, j)) in self.d.iter().enumerate() {
            let yr = y.row(r);
            for idx in [vec_index((i, j), p), vec_index((j, i), p)] {
                let mut row = out.row_mut(idx);
                row -= &yr * 0.5;
            }
        }
        Ok(out)
    }
}

/// The scalars `sigma1`, `sigma2` and `eta` that fix the asymptotic
/// covariance of an affine equivariant scatter estimator at an elliptical
/// law, where the estimator converges to `eta * S`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AsymptoticScalars {
    pub sigma1: f64,
    pub sigma2: f64,
    pub eta: f64,
}

impl AsymptoticScalars {
    /// Checks `sigma1 >= 0`, `sigma2 >= -2 sigma1 / p` and `eta > 0`.
    pub fn new(sigma1: f64, sigma2: f64, eta: f64, p: usize) -> Result<Self> {
        let s = AsymptoticScalars { sigma1, sigma2, eta };
        s.check(p)?;
        Ok(s)
    }

    pub fn check(&self, p: usize) -> Result<()> {
        let bound = -2.0 * self.sigma1 / p as f64;
        // Boundary values computed in floating point may land a few ulps
        // below the bound.
        let slack = 1e-12 * self.sigma1.abs().max(1.0);
        if !(self.sigma1 >= 0.0) {
            return Err(Error::ScalarBounds(format!("sigma1 = {} < 0", self.sigma1)));
        }
        if !(self.sigma2 >= bound - slack) {
            return Err(Error::ScalarBounds(format!(
                "sigma2 = {} < -2 sigma1 / p = {bound}",
                self.sigma2
            )));
        }
        if !(self.eta > 0.0) {
            return Err(Error::ScalarBounds(format!("eta = {} must be positive", self.eta)));
        }
        Ok(())
    }

    /// `(1, 0, 1)`: the sample covariance matrix at Gaussian data.
    pub fn gaussian() -> Self {
        AsymptoticScalars {
            sigma1: 1.0,
            sigma2: 0.0,
            eta: 1.0,
        }
    }
}

fn dense_check(p: usize) -> Result<()> {
    if p > MAX_DENSE_DIM {
        return Err(Error::TooLargeForDense {
            p,
            limit: MAX_DENSE_DIM,
        });
    }
    Ok(())
}

/// `2 sigma1 M_p (V kron V) + sigma2 vec(V) vec(V)^T`.
pub fn cov_w_v(v: &SpdMatrix, s: &AsymptoticScalars) -> Result<DMatrix<f64>> {
    let p = v.dim();
    dense_check(p)?;
    s.check(p)?;
    let vm = v.as_matrix();
    let mp = linops::symmetrization_matrix(p)?;
    let vv = vec(vm);
    Ok(mp * linops::kron(vm, vm) * (2.0 * s.sigma1) + &vv * vv.transpose() * s.sigma2)
}

/// General form
/// `2 sigma1 Dh_G(V) (V kron V) Dh_G(V)^T + sigma2 vec(V_G) vec(V_G)^T`,
/// valid for any `V`.
pub fn cov_w_vg_general(
    v: &SpdMatrix,
    idx: &GraphIndex,
    s: &AsymptoticScalars,
    opts: &HgOptions,
) -> Result<DMatrix<f64>> {
    let p = v.dim();
    dense_check(p)?;
    s.check(p)?;
    let sol = h_g(v, idx, opts)?;
    let dh = HgDerivative::at_solution(&sol, idx)?.to_dense()?;
    let vm = v.as_matrix();
    let vg = vec(sol.matrix.as_matrix());
    let w = &dh * linops::kron(vm, vm) * dh.transpose() * (2.0 * s.sigma1) + &vg * vg.transpose() * s.sigma2;
    Ok(symmetric_part(&w))
}

/// Reduced form for `V^{-1}` satisfying the graph:
/// `2 sigma1 M_p [V kron V - Q_D^T H^{-1} Q_D M_p] + sigma2 vec(V) vec(V)^T`
/// with `H = Q_D M_p (V^{-1} kron V^{-1}) Q_D^T`.
pub fn cov_w_vg_reduced(v: &SpdMatrix, idx: &GraphIndex, s: &AsymptoticScalars) -> Result<DMatrix<f64>> {
    let p = v.dim();
    dense_check(p)?;
    s.check(p)?;
    require_in_model(v, idx)?;
    let vm = v.as_matrix();
    let b = v.inverse().into_inner();
    let d = idx.d_positions().positions();
    let q = d.len();
    let mp = linops::symmetrization_matrix(p)?;
    let mut inner = linops::kron(vm, vm);
    if q > 0 {
        let mut h = DMatrix::zeros(q, q);
        for (r, &(i, j)) in d.iter().enumerate() {
            for (c, &(k, l)) in d.iter().enumerate() {
                h[(r, c)] = 0.5 * (b[(i, k)] * b[(l, j)] + b[(i, l)] * b[(k, j)]);
            }
        }
        let h_inv = Cholesky::new(symmetric_part(&h))
            .ok_or(Error::NotPositiveDefinite)?
            .inverse();
        // Q_D^T H^{-1} Q_D M_p: rows at D positions, each row of H^{-1}
        // spread over the symmetrized columns.
        for (r, &dr) in d.iter().enumerate() {
            let row = vec_index(dr, p);
            for (c, &(k, l)) in d.iter().enumerate() {
                let val = 0.5 * h_inv[(r, c)];
                inner[(row, vec_index((k, l), p))] -= val;
                inner[(row, vec_index((l, k), p))] -= val;
            }
        }
    }
    let vv = vec(vm);
    let w = mp * inner * (2.0 * s.sigma1) + &vv * vv.transpose() * s.sigma2;
    Ok(symmetric_part(&w))
}

/// Asymptotic covariance of `vec h_G(V_n)`: the reduced form when `V^{-1}`
/// satisfies the graph, the general form otherwise.
pub fn cov_w_vg(v: &SpdMatrix, idx: &GraphIndex, s: &AsymptoticScalars) -> Result<DMatrix<f64>> {
    if inverse_in_model(v, idx, MODEL_TOL) {
        cov_w_vg_reduced(v, idx, s)
    } else {
        cov_w_vg_general(v, idx, s, &HgOptions::default())
    }
}

/// Relative tolerance for "`V^{-1}` vanishes on the non-edge positions".
pub const MODEL_TOL: f64 = 1e-8;

fn require_in_model(v: &SpdMatrix, idx: &GraphIndex) -> Result<()> {
    let violation = pattern_violation(v, idx);
    if violation > MODEL_TOL {
        return Err(Error::Precondition(format!(
            "inverse does not vanish on the non-edge positions (relative violation {violation:.3e})"
        )));
    }
    Ok(())
}

/// Asymptotic covariance of the free entries `Q_K vec(h_G(V_n)^{-1})`:
/// `2 sigma1 {Q~_K D_p^T (V kron V) D_p Q~_K^T}^{-1} + sigma2 u u^T`.
/// Works without `p^2`-sized intermediates, so any `p` is accepted.
pub fn cov_w_ug(v: &SpdMatrix, idx: &GraphIndex, s: &AsymptoticScalars) -> Result<DMatrix<f64>> {
    s.check(v.dim())?;
    require_in_model(v, idx)?;
    let k = idx.k_positions().positions();
    let gram = linops::duplication_gram(v.as_matrix(), k);
    let inv = Cholesky::new(gram).ok_or(Error::NotPositiveDefinite)?.inverse();
    let b = v.inverse().into_inner();
    let u = DVector::from_iterator(k.len(), k.iter().map(|&pos| b[pos]));
    Ok(symmetric_part(
        &(inv * (2.0 * s.sigma1) + &u * u.transpose() * s.sigma2),
    ))
}
