//! Adaptive Gauss-Kronrod (7/15) quadrature and a bracketing root finder.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_intervals: 4000,
        }
    }
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Interval {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = half * XGK[k];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    Interval {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, opts: &QuadOptions) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut heap = BinaryHeap::new();
    let first = gk15(&f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    heap.push(first);
    while error > opts.abs_tol.max(opts.rel_tol * value.abs()) {
        if heap.len() >= opts.max_intervals {
            return Err(Error::Quadrature(error));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if !value.is_finite() {
            return Err(Error::Quadrature(f64::INFINITY));
        }
    }
    // Recompute the totals to shed accumulated cancellation.
    Ok(heap.iter().map(|iv| iv.value).sum())
}

/// Integrates `f` over `[a, inf)`. For `a > 0` the substitution
/// `r = a / s^2` keeps algebraic tails down to `r^{-3/2}` smooth; otherwise
/// `r = a + t / (1 - t)` is used.
pub fn integrate_to_infinity(f: impl Fn(f64) -> f64, a: f64, opts: &QuadOptions) -> Result<f64> {
    let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
    if a > 0.0 {
        let g = |s: f64| {
            if s <= 0.0 {
                return 0.0;
            }
            finite(f(a / (s * s)) * 2.0 * a / (s * s * s))
        };
        return integrate(g, 0.0, 1.0, opts);
    }
    let g = |t: f64| {
        let one_minus = 1.0 - t;
        finite(f(a + t / one_minus) / (one_minus * one_minus))
    };
    integrate(g, 0.0, 1.0, opts)
}

/// Integrates over `[0, inf)`, splitting at the given interior breakpoints.
pub fn integrate_half_line(f: impl Fn(f64) -> f64, breaks: &[f64], opts: &QuadOptions) -> Result<f64> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|b| *b > 0.0 && b.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    let mut lo = 0.0;
    for &hi in &pts {
        total += integrate(&f, lo, hi, opts)?;
        lo = hi;
    }
    total += integrate_to_infinity(&f, lo, opts)?;
    Ok(total)
}

/// Finds a root of the increasing function `f` on `(0, inf)` by geometric
/// bracket expansion from `guess` followed by bisection-secant steps.
pub fn increasing_root(f: impl Fn(f64) -> Result<f64>, guess: f64, tol: f64) -> Result<f64> {
    let mut lo = guess;
    let mut hi = guess;
    let mut f_lo = f(lo)?;
    let mut f_hi = f_lo;
    let mut expansions = 0;
    while f_lo > 0.0 {
        hi = lo;
        f_hi = f_lo;
        lo /= 2.0;
        f_lo = f(lo)?;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::RootBracket(
                "function stays positive as the argument shrinks".into(),
            ));
        }
    }
    while f_hi < 0.0 {
        lo = hi;
        f_lo = f_hi;
        hi *= 2.0;
        f_hi = f(hi)?;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::RootBracket(
                "function stays negative as the argument grows".into(),
            ));
        }
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    for iter in 0..500 {
        // Secant inside the bracket, bisection every third step.
        let mut x = if iter % 3 == 2 {
            0.5 * (lo + hi)
        } else {
            lo - f_lo * (hi - lo) / (f_hi - f_lo)
        };
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx.abs() <= tol || (hi - lo) <= 4.0 * f64::EPSILON * x {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
            f_lo = fx;
        } else {
            hi = x;
            f_hi = fx;
        }
    }
    Err(Error::RootBracket("root refinement did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, &QuadOptions::default()).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn half_line_exponential_and_singular() {
        let opts = QuadOptions::default();
        let v = integrate_half_line(|x| (-x).exp(), &[1.0], &opts).unwrap();
        assert!((v - 1.0).abs() < 1e-11);
        // Gamma(1/2) = sqrt(pi), integrable endpoint singularity.
        let v = integrate_half_line(|x| x.powf(-0.5) * (-x).exp(), &[], &opts).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-9, "{v}");
    }

    #[test]
    fn root_of_increasing_function() {
        let r = increasing_root(|x| Ok(x * x - 2.0), 10.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(increasing_root(|_| Ok(-1.0), 1.0, 1e-12).is_err());
    }
}
