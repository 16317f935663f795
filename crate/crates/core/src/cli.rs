//! The `egm` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure
//! (non-convergence, failure-rate cap).

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::graphs::{Graph, GraphIndex};
use crate::inference::{
    are_chordless_cycle, backward_elimination, chordless_cycle_shape, deviance, partial_correlation,
    EliminationOptions, EliminationStep,
};
use crate::linops::SpdMatrix;
use crate::mest::{graphical_m_estimate, m_estimate, plug_in_estimate, scalars_m, EstimatorSpec, FitResult, MOptions};
use crate::simulate::{deviance_null_study, equivalence_study, EllipticalModel, Family, StudyReport};

pub const DEFAULT_P_LIST: [usize; 13] = [4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 20, 30, 50];
pub const DEFAULT_C_LIST: [f64; 7] = [0.0, -0.05, -0.1, -0.2, -0.3, -0.4, -0.49];

#[derive(Debug, Parser)]
#[command(
    name = "egm",
    version,
    about = "Robust estimation and testing in elliptical graphical models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Plugin,
    Graphical,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StudyKind {
    Equivalence,
    DevianceNull,
}

#[derive(Debug, clap::Args)]
struct DataArgs {
    /// Comma-separated numeric data, one observation per row.
    #[arg(long)]
    data: PathBuf,
    /// The first row of the data file is a header.
    #[arg(long)]
    header: bool,
}

#[derive(Debug, clap::Args)]
struct FitArgs {
    /// Estimator: `gaussian`, `t:<nu>` or `huber:<k>`.
    #[arg(long, default_value = "gaussian")]
    estimator: String,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

#[derive(Debug, clap::Args)]
struct ScaleArgs {
    /// Scalar dividing the deviance.
    #[arg(long, conflicts_with = "family")]
    sigma1: Option<f64>,
    /// Assumed data family (`gaussian` or `t:<nu>`), used to compute sigma1.
    #[arg(long)]
    family: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit plug-in and/or graphical M-estimates of location and scatter.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        /// Graph file; the complete graph when omitted.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, value_enum, default_value = "both")]
        method: Method,
        /// Data family (`gaussian` or `t:<nu>`) for the asymptotic scalars.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Deviance test of a graph within a larger one.
    Test {
        #[command(flatten)]
        data: DataArgs,
        /// Null graph file.
        #[arg(long)]
        graph0: PathBuf,
        /// Alternative graph file; the complete graph when omitted.
        #[arg(long)]
        graph1: Option<PathBuf>,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        scale: ScaleArgs,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Backward elimination starting from the complete graph.
    Search {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        scale: ScaleArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Refit the graphical M-estimator for every candidate graph.
        #[arg(long)]
        refit: bool,
        /// Also write the selected graph in graph file format.
        #[arg(long)]
        graph_output: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Efficiency table for partial correlations in chordless cycles.
    AreTable {
        #[arg(long, value_delimiter = ',')]
        p_list: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        c_list: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Seeded Monte Carlo studies.
    Study {
        #[arg(long, value_enum)]
        kind: StudyKind,
        /// `cycle:<c>` (chordless cycle with partial correlation c) or
        /// `csv:<path>` (shape matrix file).
        #[arg(long, default_value = "cycle:-0.3")]
        shape: String,
        /// Dimension for `cycle:` shapes.
        #[arg(long, default_value_t = 5)]
        p: usize,
        /// Graph file; the cycle graph for `cycle:` shapes when omitted.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Alternative graph for `deviance-null`; by default the null graph
        /// plus its first missing edge.
        #[arg(long)]
        graph1: Option<PathBuf>,
        /// Data family: `gaussian` or `t:<nu>`.
        #[arg(long, default_value = "t:5")]
        family: String,
        /// Estimator; the maximum likelihood estimator of the family when
        /// omitted.
        #[arg(long)]
        estimator: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "250,1000,4000")]
        n_grid: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        replicates: usize,
        #[arg(long, env = "EGM_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Per-replicate metrics as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Runs the tool with process arguments and standard streams.
pub fn main_from_env() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Runs the tool; returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 1;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Fit {
            data,
            graph,
            fit,
            method,
            family,
            output,
            format,
        } => cmd_fit(
            &data,
            graph.as_deref(),
            &fit,
            method,
            family.as_deref(),
            output.as_deref(),
            format,
            out,
        ),
        Command::Test {
            data,
            graph0,
            graph1,
            fit,
            scale,
            output,
        } => cmd_test(&data, &graph0, graph1.as_deref(), &fit, &scale, output.as_deref(), out),
        Command::Search {
            data,
            fit,
            scale,
            alpha,
            refit,
            graph_output,
            output,
        } => cmd_search(
            &data,
            &fit,
            &scale,
            alpha,
            refit,
            graph_output.as_deref(),
            output.as_deref(),
            out,
        ),
        Command::AreTable {
            p_list,
            c_list,
            format,
            output,
        } => cmd_are_table(
            p_list.as_deref().unwrap_or(&DEFAULT_P_LIST),
            c_list.as_deref().unwrap_or(&DEFAULT_C_LIST),
            format,
            output.as_deref(),
            out,
        ),
        Command::Study {
            kind,
            shape,
            p,
            graph,
            graph1,
            family,
            estimator,
            n_grid,
            n,
            replicates,
            seed,
            tol,
            output,
            csv,
        } => {
            let setup = StudySetup::new(&shape, p, graph.as_deref(), &family, estimator.as_deref())?;
            let opts = MOptions {
                tol,
                ..MOptions::default()
            };
            let report = match kind {
                StudyKind::Equivalence => {
                    equivalence_study(&setup.idx, &setup.model, &setup.spec, &n_grid, replicates, seed, &opts)?
                }
                StudyKind::DevianceNull => {
                    let g1 = match graph1 {
                        Some(path) => read_graph(&path)?,
                        None => one_more_edge(setup.idx.graph())?,
                    };
                    let idx1 = GraphIndex::new(g1);
                    deviance_null_study(&setup.idx, &idx1, &setup.model, &setup.spec, n, replicates, seed, &opts)?
                }
            };
            if let Some(path) = csv {
                write_file(&path, &report.to_csv()?)?;
            }
            emit(&study_json(&report, &setup), output.as_deref(), out)?;
            Ok(0)
        }
    }
}

struct StudySetup {
    idx: GraphIndex,
    model: EllipticalModel,
    spec: EstimatorSpec,
    family: Family,
}

impl StudySetup {
    fn new(shape: &str, p: usize, graph: Option<&Path>, family: &str, estimator: Option<&str>) -> Result<Self> {
        let family: Family = family.parse()?;
        let (shape, default_graph) = if let Some(c) = shape.strip_prefix("cycle:") {
            let c: f64 = c
                .parse()
                .map_err(|_| Error::Argument(format!("invalid cycle partial correlation `{c}`")))?;
            let (_, s) = chordless_cycle_shape(p, c)?;
            (s, Some(Graph::cycle(p)?))
        } else if let Some(path) = shape.strip_prefix("csv:") {
            let m = read_csv(Path::new(path), false)?;
            let s = SpdMatrix::new(m).map_err(|e| e.context(format!("shape matrix {path}")))?;
            (s, None)
        } else {
            return Err(Error::Argument(format!(
                "invalid shape `{shape}` (expected `cycle:<c>` or `csv:<path>`)"
            )));
        };
        let graph = match (graph, default_graph) {
            (Some(path), _) => read_graph(path)?,
            (None, Some(g)) => g,
            (None, None) => return Err(Error::Argument("`--graph` is required for csv shapes".into())),
        };
        let p = shape.dim();
        let spec = match estimator {
            Some(s) => EstimatorSpec::parse(s, p)?,
            None => family.mle(p)?,
        };
        Ok(StudySetup {
            idx: GraphIndex::new(graph),
            model: EllipticalModel::centered(shape, family)?,
            spec,
            family,
        })
    }
}

fn one_more_edge(g: &Graph) -> Result<Graph> {
    let p = g.dim();
    let complete = Graph::complete(p);
    let missing = complete
        .edges()
        .filter(|&(i, j)| !g.has_edge(i, j))
        .min_by_key(|&(i, j)| (j, i))
        .ok_or_else(|| Error::Argument("the null graph is complete; no alternative exists".into()))?;
    let mut g1 = g.clone();
    g1.add_edge(missing.0, missing.1)?;
    Ok(g1)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Argument(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn emit(value: &Value, output: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize") + "\n";
    emit_text(&text, output, out)
}

fn emit_text(text: &str, output: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match output {
        Some(path) => write_file(path, text),
        None => out
            .write_all(text.as_bytes())
            .map_err(|e| Error::Argument(format!("writing output: {e}"))),
    }
}

/// Reads a comma-separated numeric matrix. Errors name the 1-based row of
/// the file.
pub fn read_csv(path: &Path, header: bool) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_csv(&text, header).map_err(|e| e.context(path.display().to_string()))
}

pub fn parse_csv(text: &str, header: bool) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Argument(format!("malformed CSV: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(col, field)| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Argument(format!("row {line}, column {}: `{field}` is not a number", col + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if values.len() != first.len() {
                return Err(Error::Argument(format!(
                    "row {line}: expected {} columns, found {}",
                    first.len(),
                    values.len()
                )));
            }
        }
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(Error::Argument("no data rows".into()));
    }
    let p = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
}

fn read_graph(path: &Path) -> Result<Graph> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Graph::parse(&text).map_err(|e| e.context(path.display().to_string()))
}

fn graph_or_complete(path: Option<&Path>, p: usize) -> Result<Graph> {
    let g = match path {
        Some(path) => read_graph(path)?,
        None => Graph::complete(p),
    };
    if g.dim() != p {
        return Err(Error::Argument(format!(
            "graph has {} vertices but the data have {p} columns",
            g.dim()
        )));
    }
    Ok(g)
}

fn estimator(fit: &FitArgs, p: usize) -> Result<(EstimatorSpec, MOptions)> {
    let spec = EstimatorSpec::parse(&fit.estimator, p)?;
    spec.check_monotone()?;
    let opts = MOptions {
        tol: fit.tol,
        max_iter: fit.max_iter,
        strict: false,
    };
    Ok((spec, opts))
}

fn sigma1_for(scale: &ScaleArgs, spec: &EstimatorSpec) -> Result<f64> {
    if let Some(s) = scale.sigma1 {
        return Ok(s);
    }
    if let Some(f) = &scale.family {
        let family: Family = f.parse()?;
        return Ok(scalars_m(spec, &family.radial(spec.dim())?)?.sigma1);
    }
    if spec.is_constant() {
        return Ok(1.0);
    }
    Err(Error::Argument(format!(
        "estimator `{}` needs `--sigma1` or `--family` to scale the deviance",
        spec.name()
    )))
}

/// Row-major nested arrays with the dimension alongside.
pub fn matrix_json(m: &DMatrix<f64>) -> Value {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    json!({ "p": m.nrows(), "rows": rows })
}

/// As [`matrix_json`] with `null` on the diagonal.
pub fn partial_correlation_json(m: &DMatrix<f64>) -> Value {
    let rows: Vec<Vec<Value>> = (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| if i == j { Value::Null } else { json!(m[(i, j)]) })
                .collect()
        })
        .collect();
    json!({ "p": m.nrows(), "rows": rows })
}

fn vector_json(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

fn edge_json((i, j): (usize, usize)) -> Value {
    json!([j + 1, i + 1])
}

pub fn graph_json(g: &Graph) -> Value {
    let mut edges: Vec<(usize, usize)> = g.edges().collect();
    edges.sort_by_key(|&(i, j)| (j, i));
    json!({ "p": g.dim(), "edges": edges.into_iter().map(edge_json).collect::<Vec<_>>() })
}

fn fit_json(fit: &FitResult) -> Value {
    json!({
        "mu": vector_json(&fit.mu),
        "scatter": matrix_json(fit.scatter.as_matrix()),
        "partial_correlation": partial_correlation_json(partial_correlation(&fit.scatter.inverse()).as_matrix()),
        "iterations": fit.iterations,
        "inner_iterations": fit.inner_iterations,
        "converged": fit.converged,
        "residual": fit.residual,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    data: &DataArgs,
    graph: Option<&Path>,
    fit: &FitArgs,
    method: Method,
    family: Option<&str>,
    output: Option<&Path>,
    format: Format,
    out: &mut dyn Write,
) -> Result<i32> {
    let x = read_csv(&data.data, data.header)?;
    let (n, p) = x.shape();
    let idx = GraphIndex::new(graph_or_complete(graph, p)?);
    let (spec, opts) = estimator(fit, p)?;
    let scalars = match family {
        Some(f) => {
            let family: Family = f.parse()?;
            Some(scalars_m(&spec, &family.radial(p)?)?)
        }
        None => None,
    };
    let mut report = serde_json::Map::new();
    let mut fits = Vec::new();
    if matches!(method, Method::Plugin | Method::Both) {
        let unconstrained = m_estimate(&x, &spec, &opts)?;
        let plug = plug_in_estimate(&x, &idx, &spec, &opts)?;
        report.insert("unconstrained".into(), fit_json(&unconstrained));
        report.insert("plugin".into(), fit_json(&plug));
        fits.push(plug);
    }
    if matches!(method, Method::Graphical | Method::Both) {
        let gm = graphical_m_estimate(&x, &idx, &spec, &opts)?;
        report.insert("graphical".into(), fit_json(&gm));
        fits.push(gm);
    }
    report.insert("estimator".into(), json!(spec.name()));
    report.insert("n".into(), json!(n));
    report.insert("p".into(), json!(p));
    report.insert("graph".into(), graph_json(idx.graph()));
    report.insert("scalars".into(), serde_json::to_value(scalars).expect("serializable"));
    let converged = fits.iter().all(|f| f.converged);
    report.insert("converged".into(), json!(converged));
    let value = Value::Object(report);
    match format {
        Format::Json => emit(&value, output, out)?,
        Format::Csv | Format::Text => emit_text(&fit_text(&value), output, out)?,
    }
    Ok(if converged { 0 } else { 2 })
}

fn fit_text(v: &Value) -> String {
    let mut s = format!("estimator {}  n = {}  p = {}\n", v["estimator"], v["n"], v["p"]);
    for key in ["plugin", "graphical"] {
        if let Some(f) = v.get(key) {
            s += &format!(
                "\n[{key}] converged = {} after {} iterations\nmu = {}\nscatter =\n",
                f["converged"], f["iterations"], f["mu"]
            );
            if let Some(rows) = f["scatter"]["rows"].as_array() {
                for row in rows {
                    let cells: Vec<String> = row
                        .as_array()
                        .into_iter()
                        .flatten()
                        .map(|x| format!("{:>12.6}", x.as_f64().unwrap_or(f64::NAN)))
                        .collect();
                    s += &cells.join(" ");
                    s += "\n";
                }
            }
        }
    }
    s
}

fn cmd_test(
    data: &DataArgs,
    graph0: &Path,
    graph1: Option<&Path>,
    fit: &FitArgs,
    scale: &ScaleArgs,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    let x = read_csv(&data.data, data.header)?;
    let (n, p) = x.shape();
    let g0 = graph_or_complete(Some(graph0), p)?;
    let g1 = graph_or_complete(graph1, p)?;
    crate::inference::check_nested(&g0, &g1)?;
    let (spec, opts) = estimator(fit, p)?;
    let sigma1 = sigma1_for(scale, &spec)?;
    let s_hat = m_estimate(&x, &spec, &MOptions { strict: true, ..opts })?;
    let r = deviance(&s_hat.scatter, &GraphIndex::new(g0), &GraphIndex::new(g1), n, sigma1)?;
    let mut v = serde_json::to_value(r).expect("serializable");
    v["estimator"] = json!(spec.name());
    emit(&v, output, out)?;
    Ok(0)
}

fn step_json(s: &EliminationStep) -> Value {
    json!({
        "removed_edge": edge_json(s.removed_edge),
        "deviance_delta": s.deviance_delta,
        "p_value": s.p_value,
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_search(
    data: &DataArgs,
    fit: &FitArgs,
    scale: &ScaleArgs,
    alpha: f64,
    refit: bool,
    graph_output: Option<&Path>,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    let x = read_csv(&data.data, data.header)?;
    let (spec, opts) = estimator(fit, x.ncols())?;
    let sigma1 = sigma1_for(scale, &spec)?;
    let result = backward_elimination(
        &x,
        &spec,
        &EliminationOptions {
            alpha,
            sigma1,
            refit_graphical: refit,
            fit: MOptions { strict: true, ..opts },
        },
    )?;
    let v = json!({
        "alpha": alpha,
        "sigma1": sigma1,
        "n": x.nrows(),
        "estimator": spec.name(),
        "graph": graph_json(&result.graph),
        "graph_file": result.graph.to_string(),
        "steps": result.steps.iter().map(step_json).collect::<Vec<_>>(),
        "stopping_candidate": result.stopping_candidate.as_ref().map(step_json),
        "error": result.failure.as_ref().map(|e| e.to_string()),
    });
    if let Some(path) = graph_output {
        write_file(path, &result.graph.to_string())?;
    }
    emit(&v, output, out)?;
    Ok(match &result.failure {
        None => 0,
        Some(e) if e.is_numerical() => 2,
        Some(_) => 1,
    })
}

fn cmd_are_table(
    p_list: &[usize],
    c_list: &[f64],
    format: Format,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    if let Some(p) = p_list.iter().find(|&&p| p < 4) {
        return Err(Error::Argument(format!("chordless cycles need p >= 4, got {p}")));
    }
    if let Some(c) = c_list.iter().find(|c| !(c.abs() < 0.5)) {
        return Err(Error::Argument(format!("partial correlations need |c| < 1/2, got {c}")));
    }
    let mut grid = Vec::new();
    for &c in c_list {
        let row = p_list
            .iter()
            .map(|&p| are_chordless_cycle(p, c))
            .collect::<Result<Vec<_>>>()?;
        grid.push(row);
    }
    let text = match format {
        Format::Json => {
            let cells: Vec<Value> = grid
                .iter()
                .flatten()
                .map(|r| serde_json::to_value(r).expect("serializable"))
                .collect();
            serde_json::to_string_pretty(&json!({ "p_list": p_list, "c_list": c_list, "cells": cells }))
                .expect("JSON values serialize")
                + "\n"
        }
        Format::Csv => {
            let mut s = String::from("c");
            for p in p_list {
                s += &format!(",{p}");
            }
            s += "\n";
            for (c, row) in c_list.iter().zip(&grid) {
                s += &c.to_string();
                for r in row {
                    s += &format!(",{:.2}", r.are);
                }
                s += "\n";
            }
            s
        }
        Format::Text => {
            let mut s = format!("{:>7} |", "c \\ p");
            for p in p_list {
                s += &format!(" {p:>5}");
            }
            s += "\n";
            s += &"-".repeat(9 + 6 * p_list.len());
            s += "\n";
            for (c, row) in c_list.iter().zip(&grid) {
                s += &format!("{c:>7} |");
                for r in row {
                    s += &format!(" {:>5.2}", r.are);
                }
                s += "\n";
            }
            s
        }
    };
    emit_text(&text, output, out)?;
    Ok(0)
}

fn study_json(report: &StudyReport, setup: &StudySetup) -> Value {
    let mut v = serde_json::to_value(report).expect("serializable");
    v["estimator"] = json!(setup.spec.name());
    v["family"] = json!(setup.family.to_string());
    v["graph"] = graph_json(setup.idx.graph());
    v["shape"] = matrix_json(setup.model.shape().as_matrix());
    v
}
