//! Sampling from elliptical laws and seeded Monte Carlo studies.
//!
//! Replicate `r` of a study with seed `s` draws from the ChaCha20 stream
//! `r` of the generator seeded with `s`, so results do not depend on
//! scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::covsel::{inverse_in_model, MODEL_TOL};
use crate::error::{Error, Result};
use crate::graphs::GraphIndex;
use crate::inference::{check_nested, chi2_quantile, deviance};
use crate::linops::SpdMatrix;
use crate::mest::{graphical_m_estimate, m_estimate, plug_in_estimate, scalars_m, EstimatorSpec, MOptions, RadialLaw};

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(into = "String")]
pub enum Family {
    Gaussian,
    T { nu: f64 },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gaussian => write!(f, "gaussian"),
            Family::T { nu } => write!(f, "t:{nu}"),
        }
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.to_string()
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("gaussian") || s.eq_ignore_ascii_case("normal") {
            return Ok(Family::Gaussian);
        }
        if let Some(raw) = s.strip_prefix("t:") {
            let nu: f64 = raw
                .parse()
                .map_err(|_| Error::Spec(format!("invalid degrees of freedom `{raw}`")))?;
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(Error::Spec(format!("degrees of freedom must be positive, got {nu}")));
            }
            return Ok(Family::T { nu });
        }
        Err(Error::Spec(format!(
            "unknown family `{s}` (expected `gaussian` or `t:<nu>`)"
        )))
    }
}

impl Family {
    pub fn radial(&self, p: usize) -> Result<RadialLaw> {
        match *self {
            Family::Gaussian => RadialLaw::chi_square(p),
            Family::T { nu } => RadialLaw::t(nu, p),
        }
    }

    /// The maximum likelihood M-estimator of this family.
    pub fn mle(&self, p: usize) -> Result<EstimatorSpec> {
        match *self {
            Family::Gaussian => Ok(EstimatorSpec::gaussian(p)),
            Family::T { nu } => EstimatorSpec::t(nu, p),
        }
    }
}

/// `X = mu + S^{1/2} Z` with `Z` spherical Gaussian or spherical t.
#[derive(Debug, Clone)]
pub struct EllipticalModel {
    mu: DVector<f64>,
    shape: SpdMatrix,
    root: DMatrix<f64>,
    family: Family,
}

impl EllipticalModel {
    pub fn new(mu: DVector<f64>, shape: SpdMatrix, family: Family) -> Result<Self> {
        if mu.len() != shape.dim() {
            return Err(Error::Dimension {
                expected: shape.dim(),
                actual: mu.len(),
            });
        }
        let root = shape.sqrt();
        Ok(EllipticalModel {
            mu,
            shape,
            root,
            family,
        })
    }

    /// Zero location.
    pub fn centered(shape: SpdMatrix, family: Family) -> Result<Self> {
        let p = shape.dim();
        Self::new(DVector::zeros(p), shape, family)
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn shape(&self) -> &SpdMatrix {
        &self.shape
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn radial(&self) -> Result<RadialLaw> {
        self.family.radial(self.dim())
    }

    /// Rows of `mu + S^{1/2} z` for the rows `z` of `z`.
    pub fn push_forward(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = z * &self.root;
        for mut row in x.row_iter_mut() {
            row += self.mu.transpose();
        }
        x
    }

    /// `n` spherical draws (the law at `mu = 0`, `S = I`).
    pub fn spherical<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let p = self.dim();
        let mut z = DMatrix::zeros(n, p);
        let chi = match self.family {
            Family::T { nu } => Some((ChiSquared::new(nu).expect("positive degrees of freedom"), nu)),
            Family::Gaussian => None,
        };
        for i in 0..n {
            for j in 0..p {
                z[(i, j)] = StandardNormal.sample(rng);
            }
            if let Some((dist, nu)) = &chi {
                let scale = (dist.sample(rng) / nu).sqrt();
                for j in 0..p {
                    z[(i, j)] /= scale;
                }
            }
        }
        z
    }

    pub fn sample_with_rng<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        self.push_forward(&self.spherical(n, rng))
    }

    pub fn sample(&self, n: usize, seed: u64) -> DMatrix<f64> {
        self.sample_with_rng(n, &mut ChaCha20Rng::seed_from_u64(seed))
    }
}

/// The generator for replicate `r` of a study seeded with `seed`.
pub fn replicate_rng(seed: u64, r: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub kind: String,
    pub seed: u64,
    pub replicates: usize,
    pub failures: usize,
    /// Per-replicate values; `None` marks a failed replicate.
    pub metrics: BTreeMap<String, Vec<Option<f64>>>,
    pub summary: BTreeMap<String, f64>,
}

impl StudyReport {
    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.metrics
            .get(metric)
            .map(|v| v.iter().flatten().copied().collect())
            .unwrap_or_default()
    }

    /// One row per replicate; failed entries are empty.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let names: Vec<&String> = self.metrics.keys().collect();
        let mut header = vec!["replicate".to_string()];
        header.extend(names.iter().map(|s| s.to_string()));
        w.write_record(&header).map_err(csv_err)?;
        for r in 0..self.replicates {
            let mut row = vec![r.to_string()];
            for name in &names {
                row.push(self.metrics[*name][r].map(|v| format!("{v:e}")).unwrap_or_default());
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Argument(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Argument(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Argument(format!("CSV output: {e}"))
}

/// Linear-interpolation sample quantile of sorted data.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

fn check_failures(failures: usize, total: usize) -> Result<()> {
    if failures as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::FailureRate {
            failures,
            replicates: total,
        });
    }
    Ok(())
}

fn require_model(model: &EllipticalModel, idx: &GraphIndex, what: &str) -> Result<()> {
    if idx.dim() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            actual: idx.dim(),
        });
    }
    if !inverse_in_model(model.shape(), idx, MODEL_TOL) {
        return Err(Error::Precondition(format!(
            "the inverse of the model shape does not vanish on the non-edges of the {what}"
        )));
    }
    Ok(())
}

/// Compares plug-in and graphical M-estimates on the same data:
/// `delta = sqrt(n) (|mu_P - mu_M| + |vec(S_P - S_M)|)` per replicate and
/// sample size, with medians in the summary.
pub fn equivalence_study(
    idx: &GraphIndex,
    model: &EllipticalModel,
    spec: &EstimatorSpec,
    n_grid: &[usize],
    replicates: usize,
    seed: u64,
    opts: &MOptions,
) -> Result<StudyReport> {
    require_model(model, idx, "graph")?;
    if n_grid.is_empty() || replicates == 0 {
        return Err(Error::Argument(
            "study needs a sample size and at least one replicate".into(),
        ));
    }
    let rows: Vec<Vec<Option<(f64, f64)>>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r);
            n_grid
                .iter()
                .map(|&n| {
                    let x = model.sample_with_rng(n, &mut rng);
                    let plug = plug_in_estimate(&x, idx, spec, opts).ok()?;
                    let gm = graphical_m_estimate(&x, idx, spec, opts).ok()?;
                    let root_n = (n as f64).sqrt();
                    let dmu = (&plug.mu - &gm.mu).norm();
                    let ds = (plug.scatter.as_matrix() - gm.scatter.as_matrix()).norm();
                    Some((root_n * (dmu + ds), root_n * ds))
                })
                .collect()
        })
        .collect();
    let mut metrics = BTreeMap::new();
    let mut summary = BTreeMap::new();
    let mut failures = 0;
    for (g, &n) in n_grid.iter().enumerate() {
        let delta: Vec<Option<f64>> = rows.iter().map(|row| row[g].map(|v| v.0)).collect();
        let delta_s: Vec<Option<f64>> = rows.iter().map(|row| row[g].map(|v| v.1)).collect();
        failures += delta.iter().filter(|v| v.is_none()).count();
        let ok: Vec<f64> = delta.iter().flatten().copied().collect();
        let ok_s: Vec<f64> = delta_s.iter().flatten().copied().collect();
        summary.insert(format!("median_delta_n{n}"), median(&ok));
        summary.insert(format!("median_delta_scatter_n{n}"), median(&ok_s));
        metrics.insert(format!("delta_n{n}"), delta);
        metrics.insert(format!("delta_scatter_n{n}"), delta_s);
    }
    check_failures(failures, replicates * n_grid.len())?;
    Ok(StudyReport {
        kind: "equivalence".into(),
        seed,
        replicates,
        failures,
        metrics,
        summary,
    })
}

/// Quantile levels reported by [`deviance_null_study`].
pub const NULL_QUANTILES: [f64; 4] = [0.5, 0.9, 0.95, 0.99];

/// Null distribution of the `sigma1`-rescaled deviance of `idx0` within
/// `idx1` for data drawn under `idx0`, with `sigma1` computed for
/// `(spec, model)`.
#[allow(clippy::too_many_arguments)]
pub fn deviance_null_study(
    idx0: &GraphIndex,
    idx1: &GraphIndex,
    model: &EllipticalModel,
    spec: &EstimatorSpec,
    n: usize,
    replicates: usize,
    seed: u64,
    opts: &MOptions,
) -> Result<StudyReport> {
    check_nested(idx0.graph(), idx1.graph())?;
    require_model(model, idx0, "null graph")?;
    if replicates == 0 {
        return Err(Error::Argument("study needs at least one replicate".into()));
    }
    let sigma1 = scalars_m(spec, &model.radial()?)?.sigma1;
    let df = idx0.q() - idx1.q();
    let stats: Vec<Option<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let x = model.sample_with_rng(n, &mut replicate_rng(seed, r));
            let s_hat = m_estimate(&x, spec, opts).ok()?.scatter;
            deviance(&s_hat, idx0, idx1, n, sigma1).ok().map(|d| d.statistic)
        })
        .collect();
    let failures = stats.iter().filter(|v| v.is_none()).count();
    check_failures(failures, replicates)?;
    let mut sorted: Vec<f64> = stats.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let mut summary = BTreeMap::new();
    summary.insert("sigma1".into(), sigma1);
    summary.insert("df".into(), df as f64);
    summary.insert("n".into(), n as f64);
    for q in NULL_QUANTILES {
        summary.insert(format!("q{}", q * 100.0), quantile(&sorted, q));
        summary.insert(format!("chi2_q{}", q * 100.0), chi2_quantile(q, df));
    }
    let crit = chi2_quantile(0.95, df);
    let rejections = sorted.iter().filter(|&&s| s > crit).count();
    summary.insert("rejection_rate_0.05".into(), rejections as f64 / sorted.len() as f64);
    let mut metrics = BTreeMap::new();
    metrics.insert("statistic".into(), stats);
    Ok(StudyReport {
        kind: "deviance-null".into(),
        seed,
        replicates,
        failures,
        metrics,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_strings() {
        assert_eq!("gaussian".parse::<Family>().unwrap(), Family::Gaussian);
        assert_eq!("t:5".parse::<Family>().unwrap(), Family::T { nu: 5.0 });
        assert!("t:0".parse::<Family>().is_err());
        assert!("cauchy".parse::<Family>().is_err());
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let m = EllipticalModel::centered(SpdMatrix::identity(3), Family::T { nu: 5.0 }).unwrap();
        assert_eq!(m.sample(10, 42), m.sample(10, 42));
        assert_ne!(m.sample(10, 42), m.sample(10, 43));
        let a: Vec<u32> = (0..3).map(|_| replicate_rng(1, 0).random()).collect();
        let b: u32 = replicate_rng(1, 1).random();
        assert_eq!(a[0], a[1]);
        assert_ne!(a[0], b);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-15);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }
}
