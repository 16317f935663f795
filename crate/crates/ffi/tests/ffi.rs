use std::ffi::{CStr, CString};
use std::ptr;

use egm_ffi::*;

fn last_error() -> String {
    let p = egm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn cycle(p: usize) -> *mut EgmGraph {
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { egm_graph_cycle(p, &mut g) }, EgmStatus::Ok);
    g
}

#[test]
fn graph_lifecycle() {
    let g = egm_graph_new(4);
    unsafe {
        assert_eq!(egm_graph_dim(g), 4);
        assert_eq!(egm_graph_add_edge(g, 0, 1), EgmStatus::Ok);
        assert_eq!(egm_graph_add_edge(g, 2, 3), EgmStatus::Ok);
        assert_eq!(egm_graph_num_edges(g), 2);
        assert_eq!(egm_graph_add_edge(g, 1, 1), EgmStatus::InvalidGraph);
        assert!(last_error().contains("invalid graph"));
        assert_eq!(egm_graph_add_edge(g, 0, 9), EgmStatus::InvalidGraph);
        egm_graph_free(g);
        egm_graph_free(ptr::null_mut());
        assert_eq!(egm_graph_dim(ptr::null()), 0);
    }
}

#[test]
fn parse_graph_text() {
    let text = CString::new("p 4\n1 2\n2 3\n3 4\n").unwrap();
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(egm_graph_parse(text.as_ptr(), &mut g), EgmStatus::Ok);
        assert_eq!(egm_graph_dim(g), 4);
        assert_eq!(egm_graph_num_edges(g), 3);
        egm_graph_free(g);
        assert_eq!(egm_graph_parse(ptr::null(), &mut g), EgmStatus::NullPointer);
    }
}

#[test]
fn h_g_matches_core() {
    let p = 5;
    let g = cycle(p);
    let mut a = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            a[i * p + j] = if i == j { 2.0 } else { 0.3 + 0.05 * (i + j) as f64 };
        }
    }
    let mut out = vec![0.0; p * p];
    let mut iters = 0usize;
    let status = unsafe { egm_h_g(a.as_ptr(), p, g, 0.0, out.as_mut_ptr(), &mut iters) };
    assert_eq!(status, EgmStatus::Ok);
    assert!(iters > 0);

    let am = egm::linops::SpdMatrix::new(nalgebra::DMatrix::from_row_slice(p, p, &a)).unwrap();
    let idx = egm::graphs::GraphIndex::new(egm::graphs::Graph::cycle(p).unwrap());
    let sol = egm::covsel::h_g(&am, &idx, &Default::default()).unwrap();
    for i in 0..p {
        for j in 0..p {
            assert_eq!(out[i * p + j], sol.matrix.as_matrix()[(i, j)]);
        }
    }
    unsafe { egm_graph_free(g) };
}

#[test]
fn h_g_rejects_indefinite_input() {
    let g = cycle(4);
    let a = [
        1.0, 2.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0,
    ];
    let mut out = [0.0; 16];
    let status = unsafe { egm_h_g(a.as_ptr(), 4, g, 0.0, out.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(status, EgmStatus::NotPositiveDefinite);
    unsafe { egm_graph_free(g) };
}

#[test]
fn dimension_mismatch_is_reported() {
    let g = cycle(5);
    let a = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
    let mut out = [0.0; 9];
    let status = unsafe { egm_h_g(a.as_ptr(), 3, g, 0.0, out.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(status, EgmStatus::Dimension);
    unsafe { egm_graph_free(g) };
}

#[test]
fn are_value() {
    let mut are = 0.0;
    assert_eq!(unsafe { egm_are_chordless_cycle(4, 0.4, &mut are) }, EgmStatus::Ok);
    let core = egm::inference::are_chordless_cycle(4, 0.4).unwrap().are;
    assert_eq!(are, core);
    assert!(are > 1.0);
    assert_eq!(
        unsafe { egm_are_chordless_cycle(4, 0.7, &mut are) },
        EgmStatus::InvalidArgument
    );
    assert!(!last_error().is_empty());
}

#[test]
fn partial_correlation_of_tridiagonal() {
    let k = [2.0, -1.0, -1.0, 2.0];
    let mut out = [0.0; 4];
    assert_eq!(
        unsafe { egm_partial_correlation(k.as_ptr(), 2, out.as_mut_ptr()) },
        EgmStatus::Ok
    );
    assert!((out[1] - 0.5).abs() < 1e-15);
    assert!((out[2] - 0.5).abs() < 1e-15);
}

fn sample(n: usize, p: usize) -> Vec<f64> {
    let model =
        egm::simulate::EllipticalModel::centered(egm::linops::SpdMatrix::identity(p), egm::simulate::Family::Gaussian)
            .unwrap();
    let x = model.sample(n, 7);
    let mut rows = vec![0.0; n * p];
    for i in 0..n {
        for j in 0..p {
            rows[i * p + j] = x[(i, j)];
        }
    }
    rows
}

#[test]
fn fit_round_trip() {
    let (n, p) = (200, 4);
    let x = sample(n, p);
    let g = cycle(p);
    let name = CString::new("t:5").unwrap();
    let mut fit = ptr::null_mut();
    let status = unsafe { egm_fit(x.as_ptr(), n, p, g, name.as_ptr(), EgmMethod::Graphical, 0.0, &mut fit) };
    assert_eq!(status, EgmStatus::Ok, "{}", last_error());
    unsafe {
        assert_eq!(egm_fit_dim(fit), p);
        assert!(egm_fit_iterations(fit) > 0);
        assert!(egm_fit_residual(fit) <= 1e-9);
        let mut mu = vec![0.0; p];
        let mut s = vec![0.0; p * p];
        assert_eq!(egm_fit_location(fit, mu.as_mut_ptr()), EgmStatus::Ok);
        assert_eq!(egm_fit_scatter(fit, s.as_mut_ptr()), EgmStatus::Ok);
        assert!(mu.iter().all(|m| m.abs() < 0.5));
        for i in 0..p {
            assert!(s[i * p + i] > 0.0);
            for j in 0..p {
                assert_eq!(s[i * p + j], s[j * p + i]);
            }
        }

        let full = egm_graph_new(p);
        for i in 0..p {
            for j in 0..i {
                egm_graph_add_edge(full, i, j);
            }
        }
        let (mut stat, mut pval) = (0.0, 0.0);
        let st = egm_deviance(s.as_ptr(), p, g, full, n, 1.0, &mut stat, &mut pval);
        assert_eq!(st, EgmStatus::Ok);
        assert!(stat >= 0.0);
        assert!((0.0..=1.0).contains(&pval));
        assert_eq!(
            egm_deviance(s.as_ptr(), p, full, g, n, 1.0, &mut stat, &mut pval),
            EgmStatus::NotNested
        );
        egm_graph_free(full);
        egm_fit_free(fit);
        egm_graph_free(g);
    }
}

#[test]
fn fit_rejects_bad_estimator_and_small_samples() {
    let (n, p) = (50, 3);
    let x = sample(n, p);
    let g = egm_graph_new(p);
    let bad = CString::new("tyler").unwrap();
    let good = CString::new("gaussian").unwrap();
    let mut fit = ptr::null_mut();
    unsafe {
        let st = egm_fit(x.as_ptr(), n, p, g, bad.as_ptr(), EgmMethod::Plugin, 0.0, &mut fit);
        assert_eq!(st, EgmStatus::InvalidArgument);
        let st = egm_fit(x.as_ptr(), 2, p, g, good.as_ptr(), EgmMethod::Plugin, 0.0, &mut fit);
        assert_eq!(st, EgmStatus::SampleSize);
        assert!(fit.is_null());
        egm_graph_free(g);
    }
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/egm.h");
    for name in [
        "egm_last_error_message",
        "egm_graph_new",
        "egm_graph_cycle",
        "egm_graph_parse",
        "egm_graph_add_edge",
        "egm_graph_free",
        "egm_h_g",
        "egm_partial_correlation",
        "egm_are_chordless_cycle",
        "egm_deviance",
        "egm_fit",
        "egm_fit_scatter",
        "egm_fit_location",
        "egm_fit_free",
        "EGM_STATUS_NOT_NESTED",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
