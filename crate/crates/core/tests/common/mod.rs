//! Oracles and fixtures shared by the integration tests. Everything here is
//! written from first principles so it can check the library rather than
//! mirror it.
#![allow(dead_code)]

use egm::graphs::Graph;
use egm::linops::SpdMatrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Wishart-like SPD matrix with a ridge, condition number typically < 100.
pub fn random_spd(p: usize, rng: &mut impl Rng) -> SpdMatrix {
    let k = p + 3;
    let w = DMatrix::from_fn(p, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = &w * w.transpose() / k as f64 + DMatrix::identity(p, p) * 0.2;
    SpdMatrix::new((&a + a.transpose()) * 0.5).unwrap()
}

pub fn random_symmetric(p: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let e = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&e + e.transpose()) * 0.5
}

pub fn random_graph(p: usize, prob: f64, rng: &mut impl Rng) -> Graph {
    let mut g = Graph::empty(p);
    for i in 0..p {
        for j in 0..i {
            if rng.random::<f64>() < prob {
                g.add_edge(i, j).unwrap();
            }
        }
    }
    g
}

/// Random graph containing the chordless 4-cycle 0-1-2-3-0, hence not
/// chordal.
pub fn random_non_decomposable(p: usize, prob: f64, rng: &mut impl Rng) -> Graph {
    assert!(p >= 4);
    let mut g = Graph::from_edges(p, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
    for i in 0..p {
        for j in 0..i {
            let chord = (i, j) == (2, 0) || (i, j) == (3, 1);
            if !chord && !g.has_edge(i, j) && rng.random::<f64>() < prob {
                g.add_edge(i, j).unwrap();
            }
        }
    }
    g
}

/// Diagonally dominant concentration matrix with zeros off the edges of `g`.
pub fn concentration_in_model(g: &Graph, rng: &mut impl Rng) -> SpdMatrix {
    let p = g.dim();
    let mut k = DMatrix::<f64>::zeros(p, p);
    for (i, j) in g.edges() {
        let v = rng.random_range(-0.5..0.5);
        k[(i, j)] = v;
        k[(j, i)] = v;
    }
    for i in 0..p {
        let off: f64 = (0..p).filter(|&j| j != i).map(|j| k[(i, j)].abs()).sum();
        k[(i, i)] = 1.0 + off + rng.random_range(0.0..0.5);
    }
    SpdMatrix::new(k).unwrap()
}

pub fn frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Lower-triangle positions that are free in a concentration matrix
/// constrained by `g`: the diagonal and the edges.
fn free_positions(g: &Graph) -> Vec<(usize, usize)> {
    let p = g.dim();
    let mut pos = Vec::new();
    for j in 0..p {
        for i in j..p {
            if i == j || g.has_edge(i, j) {
                pos.push((i, j));
            }
        }
    }
    pos
}

fn unit(p: usize, (i, j): (usize, usize)) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(p, p);
    e[(i, j)] = 1.0;
    e[(j, i)] = 1.0;
    e
}

/// Maximizes `log det K - tr(K A)` over concentration matrices vanishing
/// off the edges of `g` by damped Newton on the free entries and returns
/// `K^{-1}`.
pub fn gaussian_mle_oracle(a: &DMatrix<f64>, g: &Graph) -> DMatrix<f64> {
    let p = g.dim();
    let pos = free_positions(g);
    let units: Vec<DMatrix<f64>> = pos.iter().map(|&ij| unit(p, ij)).collect();
    let objective = |k: &DMatrix<f64>| -> Option<f64> {
        let chol = k.clone().cholesky()?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Some(logdet - (k * a).trace())
    };
    let mut k = DMatrix::from_diagonal(&a.diagonal().map(|d| 1.0 / d));
    for _ in 0..200 {
        let sigma = k.clone().cholesky().unwrap().inverse();
        let r = &sigma - a;
        let grad = nalgebra::DVector::from_iterator(pos.len(), units.iter().map(|e| (&r * e).trace()));
        if grad.amax() < 1e-14 {
            break;
        }
        let mut hess = DMatrix::zeros(pos.len(), pos.len());
        for (x, ex) in units.iter().enumerate() {
            let sex = &sigma * ex;
            for (y, ey) in units.iter().enumerate() {
                hess[(x, y)] = -(&sex * &sigma * ey).trace();
            }
        }
        let step = (-hess).cholesky().unwrap().solve(&grad);
        let mut dk = DMatrix::zeros(p, p);
        for (s, e) in step.iter().zip(&units) {
            dk += e * *s;
        }
        let f0 = objective(&k).unwrap();
        let mut t = 1.0;
        loop {
            let cand = &k + &dk * t;
            if let Some(f) = objective(&cand) {
                if f >= f0 - 1e-15 * f0.abs() {
                    k = cand;
                    break;
                }
            }
            t *= 0.5;
            assert!(t > 1e-12, "line search failed");
        }
    }
    k.cholesky().unwrap().inverse()
}

/// Central difference `(f(a + h e) - f(a - h e)) / 2h`.
pub fn central_difference(
    f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
    a: &DMatrix<f64>,
    e: &DMatrix<f64>,
    h: f64,
) -> DMatrix<f64> {
    (f(&(a + e * h)) - f(&(a - e * h))) / (2.0 * h)
}

pub fn relative_error(approx: &DMatrix<f64>, exact: &DMatrix<f64>) -> f64 {
    (approx - exact).norm() / exact.norm().max(1e-300)
}

/// Chordality by exhaustive search for an induced cycle of length >= 4.
pub fn is_chordal_brute_force(g: &Graph) -> bool {
    let p = g.dim();
    for mask in 0u32..(1 << p) {
        let verts: Vec<usize> = (0..p).filter(|v| mask & (1 << v) != 0).collect();
        if verts.len() < 4 {
            continue;
        }
        let deg = |v: usize| verts.iter().filter(|&&w| w != v && g.has_edge(v, w)).count();
        if !verts.iter().all(|&v| deg(v) == 2) {
            continue;
        }
        // 2-regular: a cycle exactly when connected.
        let mut seen = vec![verts[0]];
        let mut frontier = vec![verts[0]];
        while let Some(v) = frontier.pop() {
            for &w in &verts {
                if g.has_edge(v, w) && !seen.contains(&w) {
                    seen.push(w);
                    frontier.push(w);
                }
            }
        }
        if seen.len() == verts.len() {
            return false;
        }
    }
    true
}

/// Every graph on `p` vertices, enumerated through the edge bitmask.
pub fn all_graphs(p: usize) -> impl Iterator<Item = Graph> {
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    let count = 1u64 << pairs.len();
    (0..count).map(move |mask| {
        Graph::from_edges(
            p,
            pairs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask & (1 << b) != 0)
                .map(|(_, &e)| e),
        )
        .unwrap()
    })
}

/// Sample covariance of the rows of `w` around their mean.
pub fn sample_covariance(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows() as f64;
    let mean = w.row_mean();
    let mut c = DMatrix::zeros(w.ncols(), w.ncols());
    for r in w.row_iter() {
        let d = r - &mean;
        c += d.transpose() * &d;
    }
    c / (n - 1.0)
}

/// Entrywise standard errors of the sample covariance of the rows of `w`,
/// from the spread of the centred outer products.
pub fn covariance_standard_errors(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let k = w.ncols();
    let mean = w.row_mean();
    let mut m1 = DMatrix::zeros(k, k);
    let mut m2 = DMatrix::zeros(k, k);
    for r in w.row_iter() {
        let d = r - &mean;
        let o = d.transpose() * &d;
        m2 += o.component_mul(&o);
        m1 += o;
    }
    let nf = n as f64;
    let mean1 = &m1 / nf;
    let var = &m2 / nf - mean1.component_mul(&mean1);
    var.map(|v| (v.max(0.0) / nf).sqrt())
}
