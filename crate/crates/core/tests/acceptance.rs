//! End-to-end acceptance checks. Each test prints one `PASS` or `FAIL`
//! line before asserting.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use common::{central_difference, frobenius, max_abs, relative_error};
use egm::covsel::*;
use egm::graphs::{Graph, GraphIndex};
use egm::inference::{chordless_cycle_shape, partial_correlation, partial_correlation_derivative};
use egm::linops::{self, kron, vec, SpdMatrix};
use egm::mest::{scalars_emle, scalars_m, scalars_sample_cov, EstimatorSpec, MOptions, RadialLaw};
use egm::simulate::{deviance_null_study, equivalence_study, EllipticalModel, Family};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use statrs::distribution::{ChiSquared, ContinuousCDF, FisherSnedecor};

fn verdict(criterion: u32, title: &str, failures: &[String], elapsed: Duration) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout();
    writeln!(
        out,
        "{status} criterion {criterion}: {title} ({:.1} s)",
        elapsed.as_secs_f64()
    )
    .unwrap();
    for f in failures {
        writeln!(out, "    {f}").unwrap();
    }
    assert!(failures.is_empty(), "criterion {criterion} failed: {failures:?}");
}

const TABLE_P: [usize; 13] = [4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 20, 30, 50];
const TABLE: [(f64, [f64; 13]); 7] = [
    (0.0, [1.00; 13]),
    (-0.05, [1.01; 13]),
    (-0.1, [1.02; 13]),
    (
        -0.2,
        [
            1.08, 1.09, 1.09, 1.09, 1.09, 1.09, 1.09, 1.09, 1.09, 1.09, 1.09, 1.09, 1.09,
        ],
    ),
    (
        -0.3,
        [
            1.18, 1.24, 1.23, 1.23, 1.23, 1.23, 1.23, 1.23, 1.23, 1.23, 1.23, 1.23, 1.23,
        ],
    ),
    (
        -0.4,
        [
            1.32, 1.55, 1.49, 1.54, 1.52, 1.54, 1.53, 1.53, 1.53, 1.53, 1.53, 1.53, 1.53,
        ],
    ),
    (
        -0.49,
        [
            1.48, 2.27, 1.93, 2.43, 2.12, 2.44, 2.22, 2.43, 2.27, 2.41, 2.35, 2.36, 2.36,
        ],
    ),
];

#[test]
fn criterion_1_efficiency_table() {
    let start = Instant::now();
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = egm::cli::run(["egm", "are-table", "--format", "csv"], &mut out, &mut err);
    let elapsed = start.elapsed();
    let mut failures = Vec::new();
    if code != 0 {
        failures.push(format!("exit code {code}: {}", String::from_utf8_lossy(&err)));
    }
    let text = String::from_utf8(out).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .unwrap_or("")
        .split(',')
        .skip(1)
        .map(String::from)
        .collect();
    let expected_header: Vec<String> = TABLE_P.iter().map(|p| p.to_string()).collect();
    if header != expected_header {
        failures.push(format!("header {header:?}"));
    }
    let rows: Vec<&str> = lines.collect();
    if rows.len() != TABLE.len() {
        failures.push(format!("{} rows", rows.len()));
    }
    for ((c, printed), row) in TABLE.iter().zip(&rows) {
        let cells: Vec<&str> = row.split(',').collect();
        if cells[0].parse::<f64>().ok() != Some(*c) {
            failures.push(format!("row label {}", cells[0]));
        }
        for ((p, want), got) in TABLE_P.iter().zip(printed).zip(&cells[1..]) {
            if *got != format!("{want:.2}") {
                failures.push(format!("(p = {p}, c = {c}): got {got}, printed {want:.2}"));
            }
        }
    }
    if elapsed > Duration::from_secs(30) {
        failures.push("slower than 30 s".into());
    }
    verdict(1, "efficiency table reproduces every printed cell", &failures, elapsed);
}

#[test]
fn criterion_2_covariance_selection_oracle() {
    let start = Instant::now();
    let mut rng = common::rng(2024);
    let mut failures = Vec::new();
    let mut non_decomposable = 0;
    for case in 0..50 {
        let p = 4 + case % 5;
        let g = if case % 2 == 0 {
            common::random_non_decomposable(p, 0.3, &mut rng)
        } else {
            common::random_graph(p, rng.random_range(0.2..0.8), &mut rng)
        };
        if !g.is_chordal() {
            non_decomposable += 1;
        }
        let idx = GraphIndex::new(g.clone());
        let a = common::random_spd(p, &mut rng);
        let sol = match h_g(&a, &idx, &HgOptions::default()) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("case {case}: {e}"));
                continue;
            }
        };
        let resid = eq1_residual(
            a.as_matrix(),
            sol.matrix.as_matrix(),
            sol.concentration.as_matrix(),
            &idx,
        );
        let oracle = common::gaussian_mle_oracle(a.as_matrix(), &g);
        let dist = frobenius(sol.matrix.as_matrix(), &oracle);
        if resid > 1e-8 || dist > 1e-6 {
            failures.push(format!(
                "case {case} (p = {p}): residual {resid:.2e}, oracle distance {dist:.2e}"
            ));
        }
    }
    if non_decomposable < 25 {
        failures.push(format!("only {non_decomposable} non-decomposable graphs"));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        failures.push("slower than 60 s".into());
    }
    verdict(
        2,
        "proportional scaling matches the likelihood oracle on 50 graphs",
        &failures,
        elapsed,
    );
}

fn hg_matrix(a: &DMatrix<f64>, idx: &GraphIndex, opts: &HgOptions) -> DMatrix<f64> {
    h_g(&SpdMatrix::new(a.clone()).unwrap(), idx, opts)
        .unwrap()
        .matrix
        .into_inner()
}

#[test]
fn criterion_3_derivatives() {
    let start = Instant::now();
    let tight = HgOptions {
        tol: 1e-13,
        ..HgOptions::default()
    };
    let mut rng = common::rng(33);
    let mut failures = Vec::new();
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..20 {
        let p = rng.random_range(4..=7);
        let idx = GraphIndex::new(common::random_non_decomposable(p, 0.3, &mut rng));
        let a = common::random_spd(p, &mut rng);
        let e = common::random_symmetric(p, &mut rng);
        let analytic = h_g_derivative(&a, &idx, &tight).unwrap().apply(&e);
        let fd = central_difference(|x| hg_matrix(x, &idx, &tight), a.as_matrix(), &e, 1e-6);
        let rel = relative_error(&fd, &analytic);
        worst.0 = worst.0.max(rel);
        if rel > 1e-5 {
            failures.push(format!("h_G case {case}: relative error {rel:.2e}"));
        }
    }
    for case in 0..20 {
        let p = rng.random_range(3..=7);
        let a = common::random_spd(p, &mut rng);
        let e = common::random_symmetric(p, &mut rng);
        let dense = partial_correlation_derivative(&a).unwrap();
        let analytic = linops::mat((&dense * vec(&e)).as_slice(), p).unwrap();
        let fd = central_difference(
            |x| partial_correlation(&SpdMatrix::new(x.clone()).unwrap()).into_inner(),
            a.as_matrix(),
            &e,
            1e-6,
        );
        let rel = relative_error(&fd, &analytic);
        worst.1 = worst.1.max(rel);
        if rel > 1e-5 {
            failures.push(format!("pi case {case}: relative error {rel:.2e}"));
        }
    }
    let scalars = [
        AsymptoticScalars::gaussian(),
        AsymptoticScalars::new(1.25, 0.5, 1.0, 5).unwrap(),
        AsymptoticScalars::new(1.4, -0.1, 0.8, 5).unwrap(),
    ];
    for case in 0..10 {
        let p = 4 + case % 3;
        let g = common::random_non_decomposable(p, 0.3, &mut rng);
        let idx = GraphIndex::new(g.clone());
        let v = common::concentration_in_model(&g, &mut rng).inverse();
        for s in &scalars {
            let general = cov_w_vg_general(&v, &idx, s, &tight).unwrap();
            let reduced = cov_w_vg_reduced(&v, &idx, s).unwrap();
            let d = frobenius(&general, &reduced);
            worst.2 = worst.2.max(d);
            if d > 1e-10 {
                failures.push(format!("covariance forms case {case}: distance {d:.2e}"));
            }
        }
    }
    writeln!(
        std::io::stdout(),
        "    worst: h_G {:.1e}, pi {:.1e}, covariance forms {:.1e}",
        worst.0,
        worst.1,
        worst.2
    )
    .unwrap();
    verdict(
        3,
        "derivatives match finite differences, covariance forms agree",
        &failures,
        start.elapsed(),
    );
}

fn null_graphs() -> (GraphIndex, GraphIndex, SpdMatrix) {
    let p = 5;
    let g0 = Graph::cycle(p).unwrap();
    let mut g1 = g0.clone();
    g1.add_edge(2, 0).unwrap();
    let (_, s) = chordless_cycle_shape(p, 0.3).unwrap();
    (GraphIndex::new(g0), GraphIndex::new(g1), s)
}

#[test]
fn criterion_4_deviance_calibration() {
    let start = Instant::now();
    let (i0, i1, s) = null_graphs();
    let mut failures = Vec::new();
    let target = 3.841458820694124;
    let cases = [
        ("gaussian", Family::Gaussian, EstimatorSpec::gaussian(5)),
        ("t:5", Family::T { nu: 5.0 }, EstimatorSpec::t(5.0, 5).unwrap()),
    ];
    for (name, family, spec) in cases {
        let model = EllipticalModel::centered(s.clone(), family).unwrap();
        let r = deviance_null_study(&i0, &i1, &model, &spec, 500, 5000, 4, &MOptions::default()).unwrap();
        let q95 = r.summary["q95"];
        let rel = (q95 - target).abs() / target;
        let mut out = std::io::stdout();
        writeln!(
            out,
            "    {name}: q95 = {q95:.3}, sigma1 = {:.3}, failures = {}",
            r.summary["sigma1"], r.failures
        )
        .unwrap();
        if rel > 0.08 {
            failures.push(format!(
                "{name}: q95 = {q95:.3} is {:.1}% from {target:.3}",
                100.0 * rel
            ));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(600) {
        failures.push("slower than 10 min".into());
    }
    verdict(
        4,
        "rescaled deviance 95th percentile matches chi-square(1)",
        &failures,
        elapsed,
    );
}

#[test]
fn criterion_5_plug_in_graphical_equivalence() {
    let start = Instant::now();
    let (idx, _, s) = null_graphs();
    let n_grid = [250, 1000, 4000];
    let opts = MOptions::default();
    let mut failures = Vec::new();
    let mut out = std::io::stdout();

    let t_model = EllipticalModel::centered(s.clone(), Family::T { nu: 5.0 }).unwrap();
    let r = equivalence_study(
        &idx,
        &t_model,
        &EstimatorSpec::t(5.0, 5).unwrap(),
        &n_grid,
        200,
        5,
        &opts,
    )
    .unwrap();
    let med: Vec<f64> = n_grid
        .iter()
        .map(|n| r.summary[&format!("median_delta_scatter_n{n}")])
        .collect();
    writeln!(out, "    t:5 medians {med:.4?}").unwrap();
    let halved = med[2] < 0.5 * med[0];
    if !halved {
        failures.push(format!(
            "median at n = 4000 ({:.4}) not below half of n = 250 ({:.4})",
            med[2], med[0]
        ));
    }

    let model = EllipticalModel::centered(s, Family::Gaussian).unwrap();
    let r = equivalence_study(&idx, &model, &EstimatorSpec::gaussian(5), &n_grid, 200, 5, &opts).unwrap();
    let worst = n_grid
        .iter()
        .flat_map(|n| r.values(&format!("delta_scatter_n{n}")))
        .fold(0.0, f64::max);
    writeln!(out, "    gaussian largest discrepancy {worst:.2e}").unwrap();
    if worst > 1e-7 {
        failures.push(format!("gaussian discrepancy {worst:.2e}"));
    }
    verdict(
        5,
        "plug-in and graphical estimates converge together",
        &failures,
        start.elapsed(),
    );
}

/// One draw per stratum of `(0, 1)` pushed through the inverse CDF of `R^2`.
fn stratified_radii(law: &RadialLaw, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = common::rng(seed);
    let unit = Uniform::new(0.0, 1.0).unwrap();
    let u = |i: usize, rng: &mut rand_chacha::ChaCha20Rng| (i as f64 + unit.sample(rng)) / n as f64;
    match *law {
        RadialLaw::ChiSquare { p } => {
            let d = ChiSquared::new(p as f64).unwrap();
            (0..n).map(|i| d.inverse_cdf(u(i, &mut rng))).collect()
        }
        RadialLaw::ScaledF { p, nu } => {
            let d = FisherSnedecor::new(p as f64, nu).unwrap();
            (0..n).map(|i| p as f64 * d.inverse_cdf(u(i, &mut rng))).collect()
        }
        _ => unreachable!("analytic laws only"),
    }
}

#[test]
fn criterion_6_scalars() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let exact = scalars_sample_cov(0.0, 4).unwrap();
    if (exact.sigma1, exact.sigma2, exact.eta) != (1.0, 0.0, 1.0) {
        failures.push(format!("sample covariance at zero kurtosis: {exact:?}"));
    }

    for p in [2, 3, 5, 8] {
        let radial = RadialLaw::t(5.0, p).unwrap();
        let m = scalars_m(&EstimatorSpec::t(5.0, p).unwrap(), &radial).unwrap();
        let e = scalars_emle(&radial, radial.generator_logderiv().unwrap()).unwrap();
        let d = (m.sigma1 - e.sigma1)
            .abs()
            .max((m.sigma2 - e.sigma2).abs())
            .max((m.eta - e.eta).abs());
        if d > 1e-6 {
            failures.push(format!("p = {p}: M-functional {m:?} vs likelihood {e:?}"));
        }
    }

    let p = 3;
    let laws = [
        ("t:5 law", RadialLaw::t(5.0, p).unwrap()),
        ("gaussian law", RadialLaw::chi_square(p).unwrap()),
    ];
    let mut out = std::io::stdout();
    for (law_name, law) in &laws {
        let draws = RadialLaw::empirical(p, stratified_radii(law, 1_000_000, 6)).unwrap();
        for spec_name in ["t:5", "t:2", "huber:1.345", "huber:2.5"] {
            let spec = EstimatorSpec::parse(spec_name, p).unwrap();
            let quad = scalars_m(&spec, law).unwrap();
            let mc = scalars_m(&spec, &draws).unwrap();
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
            let worst = rel(quad.sigma1, mc.sigma1)
                .max(rel(quad.sigma2, mc.sigma2))
                .max(rel(quad.eta, mc.eta));
            writeln!(
                out,
                "    {spec_name} at {law_name}: sigma1 {:.4}, sigma2 {:.4}, eta {:.4}, worst relative gap {worst:.1e}",
                quad.sigma1, quad.sigma2, quad.eta
            )
            .unwrap();
            if worst > 0.01 {
                failures.push(format!(
                    "{spec_name} at {law_name}: quadrature {quad:?} vs Monte Carlo {mc:?}"
                ));
            }
        }
    }
    verdict(
        6,
        "scalar closed forms and Monte Carlo cross-checks",
        &failures,
        start.elapsed(),
    );
}

#[test]
fn criterion_7_structural_identities() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rng = common::rng(77);
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };
    for p in 1..=6 {
        let m = p * (p + 1) / 2;
        let (d, d_pinv) = linops::duplication_matrix(p).unwrap();
        let mp = linops::symmetrization_matrix(p).unwrap();
        let kp = linops::commutation_matrix(p).unwrap();
        let id = DMatrix::<f64>::identity(p * p, p * p);
        check(max_abs(&(&d * &d_pinv - &mp)) <= 1e-12, format!("D D+ = M at p = {p}"));
        check(
            max_abs(&(&d_pinv * &d - DMatrix::identity(m, m))) <= 1e-12,
            format!("D+ D = I at p = {p}"),
        );
        check(max_abs(&(&kp * &kp - &id)) <= 1e-12, format!("K involution at p = {p}"));
        check(
            max_abs(&(&kp * kp.transpose() - &id)) <= 1e-12,
            format!("K orthogonal at p = {p}"),
        );
        for _ in 0..5 {
            let a = DMatrix::from_fn(p, p, |_, _| rng.random_range(-2.0..2.0));
            let aa = kron(&a, &a);
            let tol = 1e-12 * aa.amax().max(1.0);
            let mam = &mp * &aa * &mp;
            let ma = &mp * &aa;
            check(
                max_abs(&(&mam - &ma)) <= tol,
                format!("M(A x A)M = M(A x A) at p = {p}"),
            );
            check(
                max_abs(&(&ma - &aa * &mp)) <= tol,
                format!("M(A x A) = (A x A)M at p = {p}"),
            );
            let idx = GraphIndex::new(common::random_graph(p, 0.5, &mut rng));
            for z in [idx.d_positions(), idx.k_positions()] {
                let q = linops::selection_matrix(z).unwrap();
                let gram = &q * q.transpose();
                check(
                    max_abs(&(gram - DMatrix::identity(z.len(), z.len()))) <= 1e-12,
                    format!("Q rows at p = {p}"),
                );
            }
        }
    }
    let tight = HgOptions {
        tol: 1e-13,
        ..HgOptions::default()
    };
    for case in 0..30 {
        let p = rng.random_range(4..=7);
        let idx = GraphIndex::new(common::random_non_decomposable(p, 0.3, &mut rng));
        let a = common::random_spd(p, &mut rng);
        let once = hg_matrix(a.as_matrix(), &idx, &tight);
        let twice = hg_matrix(&once, &idx, &tight);
        check(max_abs(&(&twice - &once)) <= 1e-8, format!("idempotence case {case}"));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(p, |_, _| rng.random_range(0.2..5.0)));
        let lhs = hg_matrix(&(&d * a.as_matrix() * &d), &idx, &tight);
        let rhs = &d * &once * &d;
        check(max_abs(&(lhs - rhs)) <= 1e-8, format!("congruence case {case}"));
    }
    verdict(
        7,
        "structural identities and covariance selection invariances",
        &failures,
        start.elapsed(),
    );
}
