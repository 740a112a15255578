//! Experiment runner: reads a JSON problem file, runs one subcommand and
//! writes `report.json`, CSV tables and `manifest.json` into an output
//! directory.
//!
//! CSV columns per subcommand:
//!
//! | file | columns |
//! |------|---------|
//! | `instability.csv` | `k,lambda,log_norm,norm` |
//! | `domain.csv` | `level,log_graph_norm,graph_norm,ratio` |
//! | `path.csv`, `heat_*.csv` | `t,c1_re,c1_im,...` |
//! | `profile.csv` | `t,h,second_difference` |
//! | `weyl.csv` | `lambda,count,ratio,limit` |
//! | `probe.csv` | `sample,ratio,running_max` |
//!
//! Floats are written with 17 significant digits; non-finite values as
//! `inf`, `-inf` or `nan`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use fvp_core::semigroup::DomainDiagnostic;
use fvp_core::{
    compatibility_check, heat_compatibility, height_profile, instability_table, parse_problem,
    solve_final_value, solve_heat_fvp, stability_probe, weyl_count, x1_norm, x_norm, y1_norm,
    Coefficients, CompatibilityOptions, CompatibilityReport, DomainSettings, Error, FinalValueProblem,
    HeatProblem, LogValue, ProblemSpec, SolutionPath, TimeGrid, Verdict,
};
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Instability,
    Roundtrip,
    Compat,
    Solve,
    Heat,
    Convexity,
    Weyl,
    Probe,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Instability => "instability",
            Self::Roundtrip => "roundtrip",
            Self::Compat => "compat",
            Self::Solve => "solve",
            Self::Heat => "heat",
            Self::Convexity => "convexity",
            Self::Weyl => "weyl",
            Self::Probe => "probe",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub problem: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub tol: Option<f64>,
    pub levels: Option<Vec<usize>>,
}

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Compute(String),
    /// The report was written; the data failed the compatibility test.
    NotCompatible(Verdict),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Compute(_) => 3,
            Self::NotCompatible(_) => 4,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Compute(m) => write!(f, "compute error: {m}"),
            Self::NotCompatible(v) => write!(f, "data are not compatible (verdict {v})"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Self::Config(e.to_string()),
            other => Self::Compute(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> RunError {
    RunError::Compute(format!("{}: {e}", path.display()))
}

/// Result of one subcommand before it is written to disk.
struct Output {
    results: Value,
    tables: Vec<(String, Vec<String>, Vec<Vec<String>>)>,
    verdict: Option<Verdict>,
}

impl Output {
    fn new(results: Value) -> Self {
        Self { results, tables: Vec::new(), verdict: None }
    }

    fn table(mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        self.tables.push((name.to_string(), header.iter().map(|s| s.to_string()).collect(), rows));
        self
    }
}

pub fn run(config: &RunConfig) -> Result<(), RunError> {
    let text = fs::read_to_string(&config.problem)
        .map_err(|e| RunError::Config(format!("{}: {e}", config.problem.display())))?;
    let spec = parse_problem(&text)?;
    let settings = settings(config, &spec)?;

    let output = match config.command {
        Command::Instability => instability(&spec)?,
        Command::Roundtrip => roundtrip(&spec, &settings)?,
        Command::Compat => compat(&spec, &settings)?,
        Command::Solve => solve(&spec, &settings)?,
        Command::Heat => heat(&spec, &settings)?,
        Command::Convexity => convexity(&spec)?,
        Command::Weyl => weyl(&spec)?,
        Command::Probe => probe(&spec, config.seed)?,
    };

    fs::create_dir_all(&config.out).map_err(|e| io_error(&config.out, e))?;
    let mut files = vec!["report.json".to_string()];
    for (name, header, rows) in &output.tables {
        write_csv(&config.out.join(name), header, rows)?;
        files.push(name.clone());
    }
    let report = json!({
        "command": config.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "settings": settings_json(&settings, &spec),
        "results": output.results,
    });
    write_json(&config.out.join("report.json"), &report)?;
    let manifest = json!({
        "command": config.command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "inputs": {"problem": config.problem.display().to_string(), "bytes": text.len()},
        "files": files,
    });
    write_json(&config.out.join("manifest.json"), &manifest)?;

    match output.verdict {
        Some(v) if v != Verdict::InDomain => Err(RunError::NotCompatible(v)),
        _ => Ok(()),
    }
}

fn settings(config: &RunConfig, spec: &ProblemSpec) -> Result<CompatibilityOptions, RunError> {
    let tau = config.tol.or(spec.params.tau);
    if let Some(t) = tau {
        if !(t > 0.0 && t < 1.0) {
            return Err(RunError::Config(format!("tolerance must lie in (0, 1), got {t}")));
        }
    }
    let levels = config.levels.clone().or_else(|| spec.params.levels.clone());
    Ok(CompatibilityOptions {
        domain: tau.map(DomainSettings::with_tau).unwrap_or_default(),
        levels,
    })
}

fn settings_json(options: &CompatibilityOptions, spec: &ProblemSpec) -> Value {
    let grid = spec.grid.as_ref().map(|g| {
        json!({
            "T": num(g.t_final()),
            "M": g.cells(),
            "grading": num(g.grading()),
            "cluster": format!("{:?}", g.cluster()).to_lowercase(),
        })
    });
    json!({
        "tau": num(options.domain.tau),
        "amplification_limit": num(options.domain.amplification_limit),
        "levels": options.levels,
        "grid": grid,
        "dim": spec.dim(),
    })
}

/// 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt17(x))
    }
}

fn log_json(v: &LogValue) -> Value {
    json!({"value": num(v.value), "log": num(v.log)})
}

fn diagnostic_json(d: &DomainDiagnostic) -> Value {
    json!({
        "verdict": d.verdict.to_string(),
        "levels": d.levels,
        "log_graph_norms": d.graph_norms.iter().map(|g| num(g.log)).collect::<Vec<_>>(),
        "graph_norms": d.graph_norms.iter().map(|g| num(g.value)).collect::<Vec<_>>(),
        "ratios": d.ratios.iter().map(|&r| num(r)).collect::<Vec<_>>(),
        "tail": num(d.tail),
        "max_log_amplification": num(d.max_log_amplification),
        "unresolved": d.unresolved,
        "threshold": num(d.threshold),
        "amplification_limit": num(d.amplification_limit),
    })
}

fn domain_rows(d: &DomainDiagnostic) -> Vec<Vec<String>> {
    d.levels
        .iter()
        .zip(&d.graph_norms)
        .enumerate()
        .map(|(i, (level, g))| {
            let ratio = if i == 0 { String::new() } else { fmt17(d.ratios[i - 1]) };
            vec![level.to_string(), fmt17(g.log), fmt17(g.value), ratio]
        })
        .collect()
}

fn h_norm_opt(spec: &ProblemSpec, v: Option<&Coefficients>) -> Value {
    v.map_or(Value::Null, |v| num(spec.operator.h_norm(v)))
}

fn compatibility_json(spec: &ProblemSpec, r: &CompatibilityReport) -> Value {
    json!({
        "verdict": r.verdict().to_string(),
        "diagnostic": diagnostic_json(&r.diagnostic),
        "y_f_norm": num(spec.operator.h_norm(&r.y_f)),
        "difference_norm": num(spec.operator.h_norm(&r.difference)),
        "u0_norm": h_norm_opt(spec, r.reconstructed_u0.as_ref()),
        "amplified_norm": log_json(&r.amplified_norm),
        "y_norm": log_json(&r.y_norm),
    })
}

fn path_header(dim: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for j in 1..=dim {
        h.push(format!("c{j}_re"));
        h.push(format!("c{j}_im"));
    }
    h
}

fn path_rows(grid: &TimeGrid, states: &[Coefficients]) -> Vec<Vec<String>> {
    grid.nodes()
        .iter()
        .zip(states)
        .map(|(t, s)| {
            let mut row = vec![fmt17(*t)];
            for z in s.iter() {
                row.push(fmt17(z.re));
                row.push(fmt17(z.im));
            }
            row
        })
        .collect()
}

fn path_table(out: Output, name: &str, grid: &TimeGrid, states: &[Coefficients]) -> Output {
    let dim = states.first().map_or(0, |s| s.len());
    let header = path_header(dim);
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.table(name, &refs, path_rows(grid, states))
}

fn solution_json(spec: &ProblemSpec, path: &SolutionPath, u_final: &Coefficients, x: f64) -> Value {
    let residual = spec.operator.h_norm(&(path.final_state() - u_final));
    json!({
        "nodes": path.states.len(),
        "x_norm": num(x),
        "final_residual": num(residual),
        "final_relative_error": num(residual / spec.operator.h_norm(u_final).max(f64::MIN_POSITIVE)),
    })
}

fn abstract_problem(spec: &ProblemSpec) -> Result<FinalValueProblem, RunError> {
    Ok(FinalValueProblem::new(
        spec.operator.clone(),
        spec.source()?,
        spec.final_state()?,
        spec.grid()?.clone(),
    )?)
}

fn instability(spec: &ProblemSpec) -> Result<Output, RunError> {
    let model = spec.spectral()?;
    let t_final = spec.t_final()?;
    let ks = spec.params.ks.clone().unwrap_or_else(|| (1..=model.dim().min(5)).collect());
    let rows = instability_table(model, t_final, &ks)?;
    let table = rows
        .iter()
        .map(|r| vec![r.k.to_string(), fmt17(r.lambda), fmt17(r.log_norm), fmt17(r.norm)])
        .collect();
    let results = json!({
        "T": num(t_final),
        "rows": rows.iter().map(|r| json!({
            "k": r.k, "lambda": num(r.lambda), "log_norm": num(r.log_norm), "norm": num(r.norm),
        })).collect::<Vec<_>>(),
    });
    Ok(Output::new(results).table("instability.csv", &["k", "lambda", "log_norm", "norm"], table))
}

fn compat(spec: &ProblemSpec, options: &CompatibilityOptions) -> Result<Output, RunError> {
    let problem = abstract_problem(spec)?;
    let report = compatibility_check(&problem, options)?;
    let rows = domain_rows(&report.diagnostic);
    let results = json!({"compatibility": compatibility_json(spec, &report)});
    Ok(Output::new(results).table("domain.csv", &["level", "log_graph_norm", "graph_norm", "ratio"], rows))
}

fn solve(spec: &ProblemSpec, options: &CompatibilityOptions) -> Result<Output, RunError> {
    let problem = abstract_problem(spec)?;
    let report = compatibility_check(&problem, options)?;
    let mut results = Map::new();
    results.insert("compatibility".into(), compatibility_json(spec, &report));
    let mut out = Output::new(Value::Null).table(
        "domain.csv",
        &["level", "log_graph_norm", "graph_norm", "ratio"],
        domain_rows(&report.diagnostic),
    );
    if report.verdict() == Verdict::InDomain {
        let path = solve_final_value(&problem, &report)?;
        let x = x_norm(&spec.operator, &path)?;
        results.insert("solution".into(), solution_json(spec, &path, &problem.u_final, x));
        out = path_table(out, "path.csv", &problem.grid, &path.states);
    }
    out.results = Value::Object(results);
    out.verdict = Some(report.verdict());
    Ok(out)
}

fn roundtrip(spec: &ProblemSpec, options: &CompatibilityOptions) -> Result<Output, RunError> {
    let problem = abstract_problem(spec)?;
    let report = compatibility_check(&problem, options)?;
    let mut results = Map::new();
    results.insert("compatibility".into(), compatibility_json(spec, &report));
    let mut out = Output::new(Value::Null);
    if let Some(u0) = &report.reconstructed_u0 {
        let path = fvp_core::duhamel_path(&spec.operator, u0, &problem.f, &problem.grid)?;
        let err = spec.operator.h_norm(&(path.final_state() - &problem.u_final));
        let scale = spec.operator.h_norm(&problem.u_final).max(f64::MIN_POSITIVE);
        results.insert(
            "roundtrip".into(),
            json!({"final_error": num(err), "final_relative_error": num(err / scale)}),
        );
        out = path_table(out, "path.csv", &problem.grid, &path.states);
    }
    out.results = Value::Object(results);
    out.verdict = Some(report.verdict());
    Ok(out)
}

fn heat(spec: &ProblemSpec, options: &CompatibilityOptions) -> Result<Output, RunError> {
    let basis = spec.basis()?.clone();
    let grid = spec.grid()?.clone();
    let problem = HeatProblem::new(basis, spec.source()?, spec.boundary()?, spec.final_state()?, grid)?;
    let report = heat_compatibility(&problem, options)?;
    let mut results = Map::new();
    results.insert("compatibility".into(), compatibility_json(spec, &report.compatibility));
    results.insert("g_norm".into(), num(report.g_norm));
    results.insert(
        "boundary_yield".into(),
        match &report.boundary_yield {
            Some(by) => json!({
                "norm": num(by.value().norm()),
                "error_estimate": num(by.error_estimate()),
                "exact_norm": num(by.exact.norm()),
                "discrepancy": num(by.discrepancy()),
            }),
            None => Value::Null,
        },
    );
    let mut out = Output::new(Value::Null).table(
        "domain.csv",
        &["level", "log_graph_norm", "graph_norm", "ratio"],
        domain_rows(&report.compatibility.diagnostic),
    );
    if report.verdict() == Verdict::InDomain {
        let sol = solve_heat_fvp(&problem, &report)?;
        let x = x1_norm(&problem.basis, &sol.path)?;
        results.insert("solution".into(), solution_json(spec, &sol.path, &problem.u_final, x));
        results.insert("y1_norm".into(), num(y1_norm(&report)?));
        let lift = report.lift.coefficients();
        let sup = sol
            .path
            .states
            .iter()
            .zip(&lift)
            .map(|(u, k)| (u - k).norm())
            .fold(0.0, f64::max);
        results.insert("sup_deviation_from_lift".into(), num(sup));
        out = path_table(out, "path.csv", &problem.grid, &sol.path.states);
        out = path_table(out, "heat_homogeneous.csv", &problem.grid, &sol.homogeneous);
        out = path_table(out, "heat_source.csv", &problem.grid, &sol.source);
        out = path_table(out, "heat_boundary.csv", &problem.grid, &sol.boundary);
    }
    out.results = Value::Object(results);
    out.verdict = Some(report.verdict());
    Ok(out)
}

fn convexity(spec: &ProblemSpec) -> Result<Output, RunError> {
    let grid = spec.grid()?;
    let u0 = spec.initial_state()?;
    let profile = height_profile(&spec.operator, u0, grid.nodes())?;
    let n = profile.times.len();
    let rows = (0..n)
        .map(|i| {
            let second = if i == 0 || i + 1 == n { String::new() } else { fmt17(profile.second_differences[i - 1]) };
            vec![fmt17(profile.times[i]), fmt17(profile.values[i]), second]
        })
        .collect();
    let results = json!({
        "min_second_difference": num(profile.min_second_difference()),
        "strictly_convex": profile.strictly_convex(),
        "initial_slope": num(profile.initial_slope),
        "slope_step": num(profile.slope_step),
        "lower_bound": num(profile.lower_bound),
        "slope_bound": num(profile.slope_bound),
        "slope_bound_holds": profile.slope_bound_holds(1e-6),
    });
    Ok(Output::new(results).table("profile.csv", &["t", "h", "second_difference"], rows))
}

fn weyl(spec: &ProblemSpec) -> Result<Output, RunError> {
    let basis = spec.basis()?;
    let lambdas = spec
        .params
        .lambdas
        .clone()
        .ok_or_else(|| RunError::Config("config error at /params/lambdas: required by weyl".into()))?;
    let rows = weyl_count(basis, &lambdas)?;
    let table = rows
        .iter()
        .map(|r| vec![fmt17(r.lambda), r.count.to_string(), fmt17(r.ratio), fmt17(r.limit)])
        .collect();
    let results = json!({
        "coverage": num(basis.domain.coverage()),
        "rows": rows.iter().map(|r| json!({
            "lambda": num(r.lambda), "count": r.count, "ratio": num(r.ratio), "limit": num(r.limit),
        })).collect::<Vec<_>>(),
    });
    Ok(Output::new(results).table("weyl.csv", &["lambda", "count", "ratio", "limit"], table))
}

fn probe(spec: &ProblemSpec, seed: u64) -> Result<Output, RunError> {
    let grid = spec.grid()?;
    let samples = spec.params.samples.unwrap_or(100);
    let result = stability_probe(&spec.operator, grid, samples, seed)?;
    let refined_grid = TimeGrid::graded(grid.t_final(), grid.cells() * 2, grid.grading(), grid.cluster())?;
    let refined = stability_probe(&spec.operator, &refined_grid, samples, seed)?;
    let mut running = 0.0f64;
    let rows = result
        .ratios
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            running = running.max(r);
            vec![i.to_string(), fmt17(r), fmt17(running)]
        })
        .collect();
    let change = (refined.empirical_c - result.empirical_c).abs() / result.empirical_c;
    let results = json!({
        "samples": samples,
        "empirical_c": num(result.empirical_c),
        "empirical_c_refined": num(refined.empirical_c),
        "relative_change": num(change),
    });
    Ok(Output::new(results).table("probe.csv", &["sample", "ratio", "running_max"], rows))
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| RunError::Compute(format!("{}: {e}", path.display())))?;
    let err = |e: csv::Error| RunError::Compute(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn write_json(path: &Path, value: &Value) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}
