//! C interface to the `egm` library.
//!
//! Matrices cross the boundary as row-major `double` arrays. Objects are
//! opaque handles released with their `_free` function. Every fallible
//! function returns an [`EgmStatus`]; the message of the most recent
//! failure on the calling thread is available from
//! [`egm_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use egm::covsel::{h_g, HgOptions};
use egm::graphs::{Graph, GraphIndex};
use egm::inference::{are_chordless_cycle, deviance, partial_correlation};
use egm::linops::SpdMatrix;
use egm::mest::{graphical_m_estimate, plug_in_estimate, EstimatorSpec, FitResult, MOptions};
use egm::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    NotPositiveDefinite = 4,
    InvalidGraph = 5,
    NotNested = 6,
    SampleSize = 7,
    DegenerateData = 8,
    NoConvergence = 9,
    Numerical = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EgmMethod {
    Plugin = 0,
    Graphical = 1,
}

/// Undirected graph on vertices `0..p`.
pub struct EgmGraph(Graph);

/// Result of a location/scatter fit.
pub struct EgmFit(FitResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg).unwrap_or_else(|_| CString::new("error message contained NUL").unwrap());
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> EgmStatus {
    match e.root() {
        Error::Dimension { .. } | Error::TooLargeForDense { .. } => EgmStatus::Dimension,
        Error::NotSymmetric(_) | Error::NotPositiveDefinite => EgmStatus::NotPositiveDefinite,
        Error::InvalidGraph(_) => EgmStatus::InvalidGraph,
        Error::NotNested(_) => EgmStatus::NotNested,
        Error::SampleSize { .. } => EgmStatus::SampleSize,
        Error::DegenerateData => EgmStatus::DegenerateData,
        Error::NoConvergence { .. } => EgmStatus::NoConvergence,
        Error::Quadrature(_) | Error::RootBracket(_) | Error::FailureRate { .. } => EgmStatus::Numerical,
        _ => EgmStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Error>) -> EgmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            EgmStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            EgmStatus::Panic
        }
    }
}

fn null_check(ok: bool) -> Result<(), Error> {
    if ok {
        Ok(())
    } else {
        Err(Error::Argument("null pointer argument".into()))
    }
}

/// # Safety
/// `data` must point to `rows * cols` readable doubles.
unsafe fn read_matrix(data: *const f64, rows: usize, cols: usize) -> DMatrix<f64> {
    let s = std::slice::from_raw_parts(data, rows * cols);
    DMatrix::from_row_slice(rows, cols, s)
}

/// # Safety
/// `out` must point to `m.len()` writable doubles.
unsafe fn write_matrix(m: &DMatrix<f64>, out: *mut f64) {
    let dst = std::slice::from_raw_parts_mut(out, m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dst[i * m.ncols() + j] = m[(i, j)];
        }
    }
}

fn graph_ref<'a>(g: *const EgmGraph) -> Result<&'a Graph, Error> {
    null_check(!g.is_null())?;
    // SAFETY: non-null handles come from `egm_graph_*` constructors.
    Ok(unsafe { &(*g).0 })
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn egm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Graph on `p` vertices without edges.
#[no_mangle]
pub extern "C" fn egm_graph_new(p: usize) -> *mut EgmGraph {
    Box::into_raw(Box::new(EgmGraph(Graph::empty(p))))
}

/// Chordless cycle `0 - 1 - ... - (p-1) - 0`; requires `p >= 3`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn egm_graph_cycle(p: usize, out: *mut *mut EgmGraph) -> EgmStatus {
    if out.is_null() {
        return EgmStatus::NullPointer;
    }
    guard(|| {
        let g = Graph::cycle(p)?;
        *out = Box::into_raw(Box::new(EgmGraph(g)));
        Ok(())
    })
}

/// Parses the text graph format (1-based vertex labels).
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn egm_graph_parse(text: *const c_char, out: *mut *mut EgmGraph) -> EgmStatus {
    if text.is_null() || out.is_null() {
        return EgmStatus::NullPointer;
    }
    guard(|| {
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|_| Error::Argument("graph text is not UTF-8".into()))?;
        *out = Box::into_raw(Box::new(EgmGraph(Graph::parse(s)?)));
        Ok(())
    })
}

/// Adds the edge between 0-based vertices `i` and `j`.
///
/// # Safety
/// `g` must be a live graph handle.
#[no_mangle]
pub unsafe extern "C" fn egm_graph_add_edge(g: *mut EgmGraph, i: usize, j: usize) -> EgmStatus {
    if g.is_null() {
        return EgmStatus::NullPointer;
    }
    guard(|| (*g).0.add_edge(i, j))
}

/// # Safety
/// `g` must be a live graph handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn egm_graph_dim(g: *const EgmGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.dim())
}

/// # Safety
/// `g` must be a live graph handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn egm_graph_num_edges(g: *const EgmGraph) -> usize {
    g.as_ref().map_or(0, |g| g.0.num_edges())
}

/// # Safety
/// `g` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn egm_graph_free(g: *mut EgmGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Computes `h_G(a)` for the `p x p` matrix `a`, writing it to `out`.
/// `tol <= 0` selects the default tolerance.
///
/// # Safety
/// `a` and `out` must hold `p * p` doubles; `iterations` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn egm_h_g(
    a: *const f64,
    p: usize,
    g: *const EgmGraph,
    tol: f64,
    out: *mut f64,
    iterations: *mut usize,
) -> EgmStatus {
    if a.is_null() || out.is_null() || g.is_null() {
        return EgmStatus::NullPointer;
    }
    guard(|| {
        let graph = graph_ref(g)?;
        let a = SpdMatrix::new(read_matrix(a, p, p))?;
        let mut opts = HgOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        let sol = h_g(&a, &GraphIndex::new(graph.clone()), &opts)?;
        write_matrix(sol.matrix.as_matrix(), out);
        if !iterations.is_null() {
            *iterations = sol.iterations;
        }
        Ok(())
    })
}

/// Partial correlation matrix `-K_D^{-1/2} K K_D^{-1/2}` of the
/// concentration matrix `k`.
///
/// # Safety
/// `k` and `out` must hold `p * p` doubles.
#[no_mangle]
pub unsafe extern "C" fn egm_partial_correlation(k: *const f64, p: usize, out: *mut f64) -> EgmStatus {
    if k.is_null() || out.is_null() {
        return EgmStatus::NullPointer;
    }
    guard(|| {
        let k = SpdMatrix::new(read_matrix(k, p, p))?;
        write_matrix(partial_correlation(&k).as_matrix(), out);
        Ok(())
    })
}

/// Asymptotic relative efficiency of the cycle-constrained partial
/// correlation estimate in the chordless `p`-cycle with partial
/// correlation `c`.
///
/// # Safety
/// `are` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn egm_are_chordless_cycle(p: usize, c: f64, are: *mut f64) -> EgmStatus {
    if are.is_null() {
        return EgmStatus::NullPointer;
    }
    guard(|| {
        *are = are_chordless_cycle(p, c)?.are;
        Ok(())
    })
}

/// Deviance of `g0` within `g1` at the scatter estimate `s` from `n`
/// observations, divided by `sigma1`.
///
/// # Safety
/// `s` must hold `p * p` doubles; `statistic` and `p_value` must be valid.
#[no_mangle]
pub unsafe extern "C" fn egm_deviance(
    s: *const f64,
    p: usize,
    g0: *const EgmGraph,
    g1: *const EgmGraph,
    n: usize,
    sigma1: f64,
    statistic: *mut f64,
    p_value: *mut f64,
) -> EgmStatus {
    if s.is_null() || g0.is_null() || g1.is_null() || statistic.is_null() || p_value.is_null() {
        return EgmStatus::NullPointer;
    }
    guard(|| {
        let s = SpdMatrix::new(read_matrix(s, p, p))?;
        let idx0 = GraphIndex::new(graph_ref(g0)?.clone());
        let idx1 = GraphIndex::new(graph_ref(g1)?.clone());
        let r = deviance(&s, &idx0, &idx1, n, sigma1)?;
        *statistic = r.statistic;
        *p_value = r.p_value;
        Ok(())
    })
}

/// Fits location and graph-constrained scatter to the row-major `n x p`
/// data `x` with the estimator named by `estimator` (`gaussian`, `t:<nu>`,
/// `huber:<k>`). `tol <= 0` selects the default tolerance.
///
/// # Safety
/// `x` must hold `n * p` doubles, `estimator` must be NUL-terminated and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn egm_fit(
    x: *const f64,
    n: usize,
    p: usize,
    g: *const EgmGraph,
    estimator: *const c_char,
    method: EgmMethod,
    tol: f64,
    out: *mut *mut EgmFit,
) -> EgmStatus {
    if x.is_null() || g.is_null() || estimator.is_null() || out.is_null() {
        return EgmStatus::NullPointer;
    }
    guard(|| {
        let name = CStr::from_ptr(estimator)
            .to_str()
            .map_err(|_| Error::Argument("estimator name is not UTF-8".into()))?;
        let spec = EstimatorSpec::parse(name, p)?;
        let idx = GraphIndex::new(graph_ref(g)?.clone());
        let data = read_matrix(x, n, p);
        let mut opts = MOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        let fit = match method {
            EgmMethod::Plugin => plug_in_estimate(&data, &idx, &spec, &opts)?,
            EgmMethod::Graphical => graphical_m_estimate(&data, &idx, &spec, &opts)?,
        };
        *out = Box::into_raw(Box::new(EgmFit(fit)));
        Ok(())
    })
}

/// # Safety
/// `fit` must be a live fit handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn egm_fit_dim(fit: *const EgmFit) -> usize {
    fit.as_ref().map_or(0, |f| f.0.mu.len())
}

/// # Safety
/// `fit` must be a live fit handle; `out` must hold `p` doubles.
#[no_mangle]
pub unsafe extern "C" fn egm_fit_location(fit: *const EgmFit, out: *mut f64) -> EgmStatus {
    if fit.is_null() || out.is_null() {
        return EgmStatus::NullPointer;
    }
    let mu = &(*fit).0.mu;
    std::slice::from_raw_parts_mut(out, mu.len()).copy_from_slice(mu.as_slice());
    EgmStatus::Ok
}

/// # Safety
/// `fit` must be a live fit handle; `out` must hold `p * p` doubles.
#[no_mangle]
pub unsafe extern "C" fn egm_fit_scatter(fit: *const EgmFit, out: *mut f64) -> EgmStatus {
    if fit.is_null() || out.is_null() {
        return EgmStatus::NullPointer;
    }
    write_matrix((*fit).0.scatter.as_matrix(), out);
    EgmStatus::Ok
}

/// # Safety
/// `fit` must be a live fit handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn egm_fit_iterations(fit: *const EgmFit) -> usize {
    fit.as_ref().map_or(0, |f| f.0.iterations)
}

/// # Safety
/// `fit` must be a live fit handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn egm_fit_residual(fit: *const EgmFit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.0.residual)
}

/// # Safety
/// `fit` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn egm_fit_free(fit: *mut EgmFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
