//! Experiment configuration, single runs, parameter sweeps and CSV traces.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_baseline, Algo, LineSearchParams};
use crate::error::{Error, Result};
use crate::objectives::{Problem, ProblemKind};
use crate::optimizer::{run_from, ScheduleConstants};
use crate::par::{self, ExecMode};
use crate::trace::{RunStatus, StoppingRule, TraceRecord};

/// Exact CSV header.
pub const CSV_HEADER: &str = "grad_eval_index,outer_t,inner_k,f,grad_norm,step_norm,wall_time_s";
pub const SUMMARY_FILE: &str = "summary.json";
pub const DEFAULT_SWEEP_C_KAPPA: [f64; 3] = [10.0, 30.0, 100.0];
pub const DEFAULT_SWEEP_C_SIGMA: [f64; 4] = [1e3, 1e4, 1e5, 1e6];

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_BAD_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Aqn,
    Gd,
    Bfgs,
    Dfp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Aqn => "aqn",
            Method::Gd => "gd",
            Method::Bfgs => "bfgs",
            Method::Dfp => "dfp",
        }
    }

    pub fn baseline(self) -> Option<Algo> {
        match self {
            Method::Aqn => None,
            Method::Gd => Some(Algo::Gd),
            Method::Bfgs => Some(Algo::Bfgs),
            Method::Dfp => Some(Algo::Dfp),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Method::Aqn, Method::Gd, Method::Bfgs, Method::Dfp]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?} (expected aqn, gd, bfgs or dfp)")))
    }
}

/// One experiment. JSON keys are the field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub dim: usize,
    pub algo: Method,
    pub c_kappa: f64,
    pub c_sigma: f64,
    pub c_delta: f64,
    pub fixed_t: Option<u64>,
    pub c_armijo: f64,
    pub shrink: f64,
    pub init_step: f64,
    pub max_backtracks: usize,
    pub seed: u64,
    pub eps_grad: f64,
    pub max_grad_evals: u64,
    pub max_wall_s: Option<f64>,
    /// CSV path for `run`, output directory for `sweep`.
    pub out: Option<PathBuf>,
    pub trace_stride: u64,
    /// Row-major Hessian for the quadratic problem; identity when absent.
    pub quad_matrix: Option<Vec<Vec<f64>>>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let c = ScheduleConstants::default();
        let lp = LineSearchParams::default();
        let stop = StoppingRule::default();
        Self {
            problem: ProblemKind::Rosenbrock,
            dim: 100,
            algo: Method::Aqn,
            c_kappa: c.c_kappa,
            c_sigma: c.c_sigma,
            c_delta: c.c_delta,
            fixed_t: c.fixed_t,
            c_armijo: lp.c_armijo,
            shrink: lp.shrink,
            init_step: lp.init_step,
            max_backtracks: lp.max_backtracks,
            seed: 0,
            eps_grad: stop.eps_grad,
            max_grad_evals: stop.max_grad_evals,
            max_wall_s: stop.max_wall_s,
            out: None,
            trace_stride: 1,
            quad_matrix: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn schedule(&self) -> ScheduleConstants {
        ScheduleConstants {
            c_kappa: self.c_kappa,
            c_sigma: self.c_sigma,
            c_delta: self.c_delta,
            fixed_t: self.fixed_t,
        }
    }

    pub fn line_search(&self) -> LineSearchParams {
        LineSearchParams {
            c_armijo: self.c_armijo,
            shrink: self.shrink,
            init_step: self.init_step,
            max_backtracks: self.max_backtracks,
        }
    }

    pub fn stopping(&self) -> StoppingRule {
        StoppingRule {
            eps_grad: self.eps_grad,
            max_grad_evals: self.max_grad_evals,
            max_wall_s: self.max_wall_s,
        }
    }

    pub fn build_problem(&self) -> Result<Problem> {
        let matrix = match &self.quad_matrix {
            None => None,
            Some(rows) => {
                if self.problem != ProblemKind::Quadratic {
                    return Err(Error::Config("quad_matrix is only valid for the quadratic problem".into()));
                }
                if rows.len() != self.dim || rows.iter().any(|r| r.len() != self.dim) {
                    return Err(Error::Config(format!("quad_matrix must be {0}x{0}", self.dim)));
                }
                Some(DMatrix::from_fn(self.dim, self.dim, |i, j| rows[i][j]))
            }
        };
        Problem::new(self.problem, self.dim, matrix).map_err(into_config)
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> Result<Problem> {
        let problem = self.build_problem()?;
        if self.trace_stride == 0 {
            return Err(Error::Config("trace_stride must be at least 1".into()));
        }
        if !(self.eps_grad >= 0.0) {
            return Err(Error::Config(format!("eps_grad must be nonnegative, got {}", self.eps_grad)));
        }
        if let Some(w) = self.max_wall_s {
            if !(w > 0.0) {
                return Err(Error::Config(format!("max_wall_s must be positive, got {w}")));
            }
        }
        match self.algo {
            Method::Aqn => self.schedule().validate(self.dim).map_err(into_config)?,
            _ => self.line_search().validate().map_err(into_config)?,
        }
        Ok(problem)
    }

    /// `<problem>_<algo>_seed<seed>.csv`, used when `out` is unset.
    pub fn default_csv_name(&self) -> String {
        format!("{}_{}_seed{}.csv", self.problem, self.algo, self.seed)
    }
}

fn into_config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::ScheduleInvalid(_) => EXIT_BAD_CONFIG,
        Error::DivergedNumerics { .. } => EXIT_DIVERGED,
        _ => EXIT_FAILURE,
    }
}

/// Records kept at stride `n`: every `n`-th evaluation counted from the
/// first, every averaged-iterate evaluation, and the last record.
pub fn apply_stride(trace: &[TraceRecord], stride: u64) -> Vec<TraceRecord> {
    let stride = stride.max(1);
    let last = trace.len().saturating_sub(1);
    trace
        .iter()
        .enumerate()
        .filter(|(i, r)| (r.grad_eval_index - 1) % stride == 0 || r.is_average() || *i == last)
        .map(|(_, r)| r.clone())
        .collect()
}

pub fn write_trace_csv(path: &Path, trace: &[TraceRecord]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    if trace.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in trace {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::InvalidInput(format!("{}: unexpected CSV header {header:?}", path.display())));
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Smallest gradient norm at an averaged iterate, or over all rows when the
/// trace has none (baselines).
pub fn running_min_grad_norm(trace: &[TraceRecord]) -> Option<f64> {
    let pick = |avg: bool| {
        trace
            .iter()
            .filter(|r| !avg || r.is_average())
            .map(|r| r.grad_norm)
            .reduce(f64::min)
    };
    pick(true).or_else(|| pick(false))
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Finished(RunStatus),
    Failed(Error),
}

#[derive(Debug, Clone)]
pub struct SingleReport {
    pub outcome: Outcome,
    /// Full, unstrided trace.
    pub trace: Vec<TraceRecord>,
    pub grad_evals: u64,
    pub initial_grad_norm: Option<f64>,
    pub best_grad_norm: Option<f64>,
    pub csv_path: Option<PathBuf>,
}

impl SingleReport {
    pub fn exit_code(&self) -> i32 {
        match &self.outcome {
            Outcome::Finished(_) => EXIT_OK,
            Outcome::Failed(e) => exit_code(e),
        }
    }

    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.trace.last()
    }
}

/// Runs one experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<SingleReport> {
    let problem = cfg.validate()?;
    let x_init = problem.sample_initial(cfg.seed);
    let result = match cfg.algo.baseline() {
        None => run_from(&problem, &cfg.schedule(), x_init, &cfg.stopping()),
        Some(algo) => run_baseline(&problem, algo, x_init, &cfg.line_search(), &cfg.stopping()),
    };
    Ok(match result {
        Ok(out) => SingleReport {
            outcome: Outcome::Finished(out.status),
            grad_evals: out.grad_evals,
            initial_grad_norm: out.trace.first().map(|r| r.grad_norm),
            best_grad_norm: out.best_grad_norm,
            trace: out.trace,
            csv_path: None,
        },
        Err(fail) => SingleReport {
            outcome: Outcome::Failed(fail.error),
            grad_evals: fail.trace.last().map_or(0, |r| r.grad_eval_index),
            initial_grad_norm: fail.trace.first().map(|r| r.grad_norm),
            best_grad_norm: running_min_grad_norm(&fail.trace),
            trace: fail.trace,
            csv_path: None,
        },
    })
}

/// Runs one experiment and writes its CSV, also on failure.
pub fn run_single(cfg: &ExperimentConfig) -> Result<SingleReport> {
    let mut report = execute(cfg)?;
    let path = cfg.out.clone().unwrap_or_else(|| PathBuf::from(cfg.default_csv_name()));
    write_trace_csv(&path, &apply_stride(&report.trace, cfg.trace_stride))?;
    report.csv_path = Some(path);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub c_kappa: Vec<f64>,
    pub c_sigma: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            c_kappa: DEFAULT_SWEEP_C_KAPPA.to_vec(),
            c_sigma: DEFAULT_SWEEP_C_SIGMA.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub problem: ProblemKind,
    pub c_kappa: f64,
    pub c_sigma: f64,
    pub c_delta: f64,
    pub seed: u64,
    pub file: String,
    /// `converged`, `budget_exhausted` or `failed`.
    pub status: String,
    pub error: Option<String>,
    pub grad_evals: u64,
    pub initial_grad_norm: Option<f64>,
    pub final_min_grad_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestCell {
    pub c_kappa: f64,
    pub c_sigma: f64,
    pub file: String,
    pub final_min_grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub dim: usize,
    pub max_grad_evals: u64,
    pub grid: SweepGrid,
    pub cells: Vec<CellSummary>,
    pub best: BTreeMap<String, BestCell>,
}

/// `<problem>_ck<κ>_cs<σ>_seed<seed>.csv`.
pub fn cell_file_name(problem: ProblemKind, c_kappa: f64, c_sigma: f64, seed: u64) -> String {
    format!("{problem}_ck{c_kappa}_cs{c_sigma}_seed{seed}.csv")
}

/// Argmin of the final running-min gradient norm per problem; ties keep the
/// earlier cell.
pub fn best_cells(cells: &[CellSummary]) -> BTreeMap<String, BestCell> {
    let mut best: BTreeMap<String, BestCell> = BTreeMap::new();
    for c in cells {
        let Some(v) = c.final_min_grad_norm.filter(|v| v.is_finite()) else {
            continue;
        };
        let entry = best.entry(c.problem.to_string());
        let candidate = BestCell {
            c_kappa: c.c_kappa,
            c_sigma: c.c_sigma,
            file: c.file.clone(),
            final_min_grad_norm: v,
        };
        match entry {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(candidate);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                if v < e.get().final_min_grad_norm {
                    e.insert(candidate);
                }
            }
        }
    }
    best
}

/// Runs every `(problem, c_κ, c_σ)` cell with the accelerated method and
/// writes one CSV per cell plus `summary.json` into `out_dir`. Failed cells
/// keep their partial CSV and are recorded in the summary.
pub fn run_sweep(
    base: &ExperimentConfig,
    problems: &[ProblemKind],
    grid: &SweepGrid,
    out_dir: &Path,
    mode: ExecMode,
) -> Result<SweepSummary> {
    if grid.c_kappa.is_empty() || grid.c_sigma.is_empty() || problems.is_empty() {
        return Err(Error::Config("sweep grid and problem list must be nonempty".into()));
    }
    if base.algo != Method::Aqn {
        return Err(Error::Config(format!("sweeps vary the accelerated method's constants; got algo {}", base.algo)));
    }
    let mut cells = Vec::new();
    for &problem in problems {
        for &c_kappa in &grid.c_kappa {
            for &c_sigma in &grid.c_sigma {
                let cfg = ExperimentConfig {
                    problem,
                    c_kappa,
                    c_sigma,
                    quad_matrix: None,
                    out: Some(out_dir.join(cell_file_name(problem, c_kappa, c_sigma, base.seed))),
                    ..base.clone()
                };
                cfg.validate()?;
                cells.push(cfg);
            }
        }
    }
    fs::create_dir_all(out_dir)?;

    let results = par::map(mode, &cells, |cfg| -> Result<CellSummary> {
        let report = run_single(cfg)?;
        let (status, error) = match &report.outcome {
            Outcome::Finished(RunStatus::Converged) => ("converged", None),
            Outcome::Finished(RunStatus::BudgetExhausted) => ("budget_exhausted", None),
            Outcome::Failed(e) => ("failed", Some(e.to_string())),
        };
        Ok(CellSummary {
            problem: cfg.problem,
            c_kappa: cfg.c_kappa,
            c_sigma: cfg.c_sigma,
            c_delta: cfg.c_delta,
            seed: cfg.seed,
            file: cell_file_name(cfg.problem, cfg.c_kappa, cfg.c_sigma, cfg.seed),
            status: status.to_string(),
            error,
            grad_evals: report.grad_evals,
            initial_grad_norm: report.initial_grad_norm,
            final_min_grad_norm: running_min_grad_norm(&report.trace),
        })
    });
    let cells = results.into_iter().collect::<Result<Vec<_>>>()?;
    let summary = SweepSummary {
        dim: base.dim,
        max_grad_evals: base.max_grad_evals,
        grid: grid.clone(),
        best: best_cells(&cells),
        cells,
    };
    fs::write(out_dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}
