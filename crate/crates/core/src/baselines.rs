//! Comparison methods: gradient descent, BFGS and DFP with Armijo
//! backtracking. BFGS and DFP keep an inverse-Hessian approximation and
//! skip the update unless the curvature `⟨y,s⟩` is safely positive.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::Problem;
use crate::trace::{Budget, RunFailure, RunOutput, RunResult, RunStatus, StoppingRule, TraceRecord};

/// Curvature gate: update only if `⟨y,s⟩ > CAUTIOUS_TOL·‖s‖²`.
pub const CAUTIOUS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchParams {
    pub c_armijo: f64,
    pub shrink: f64,
    pub init_step: f64,
    pub max_backtracks: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            c_armijo: 1e-4,
            shrink: 0.5,
            init_step: 1.0,
            max_backtracks: 60,
        }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.c_armijo) || !open_unit(self.shrink) {
            return Err(Error::InvalidInput(format!(
                "c_armijo and shrink must lie in (0,1), got {} and {}",
                self.c_armijo, self.shrink
            )));
        }
        if !(self.init_step > 0.0 && self.init_step.is_finite()) {
            return Err(Error::InvalidInput(format!("init_step must be positive, got {}", self.init_step)));
        }
        if self.max_backtracks == 0 {
            return Err(Error::InvalidInput("max_backtracks must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub step: f64,
    pub f_new: f64,
    /// Function evaluations spent, not counting `f_x`.
    pub n_f_evals: usize,
}

/// Backtracking from `init_step` by `shrink` until the sufficient-decrease
/// condition holds, trying at most `max_backtracks` step sizes.
pub fn armijo(
    problem: &Problem,
    x: &DVector<f64>,
    f_x: f64,
    g_x: &DVector<f64>,
    p: &DVector<f64>,
    lp: &LineSearchParams,
) -> Result<LineSearchOutcome> {
    lp.validate()?;
    let slope = g_x.dot(p);
    if !(slope < 0.0) {
        return Err(Error::InvalidInput(format!("not a descent direction: <g,p> = {slope}")));
    }
    let mut step = lp.init_step;
    for trial in 1..=lp.max_backtracks {
        let f_new = problem.value(&(x + p * step))?;
        if f_new <= f_x + lp.c_armijo * step * slope {
            return Ok(LineSearchOutcome {
                step,
                f_new,
                n_f_evals: trial,
            });
        }
        step *= lp.shrink;
    }
    Err(Error::LineSearchFailed {
        trials: lp.max_backtracks,
    })
}

fn passes_gate(s: &DVector<f64>, y: &DVector<f64>, tol: f64) -> Option<f64> {
    let ys = y.dot(s);
    (ys > tol * s.norm_squared()).then_some(ys)
}

/// Inverse BFGS: `H' = (I − ρsyᵀ)H(I − ρysᵀ) + ρssᵀ`, `ρ = 1/⟨y,s⟩`.
pub fn bfgs_update(h: &DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>, cautious_tol: f64) -> DMatrix<f64> {
    let Some(ys) = passes_gate(s, y, cautious_tol) else {
        return h.clone();
    };
    let rho = 1.0 / ys;
    let hy = h * y;
    let yhy = y.dot(&hy);
    // expanded form: H − ρ(Hy sᵀ + s yᵀH) + (ρ²⟨y,Hy⟩ + ρ) ssᵀ
    let mut out = h - (&hy * s.transpose() + s * hy.transpose()) * rho;
    out += s * s.transpose() * (rho * rho * yhy + rho);
    symmetrize(out)
}

/// Inverse DFP: `H' = H − HyyᵀH/⟨y,Hy⟩ + ssᵀ/⟨y,s⟩`.
pub fn dfp_update(h: &DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>, cautious_tol: f64) -> DMatrix<f64> {
    let Some(ys) = passes_gate(s, y, cautious_tol) else {
        return h.clone();
    };
    let hy = h * y;
    let yhy = y.dot(&hy);
    if !(yhy > 0.0) {
        return h.clone();
    }
    let out = h - &hy * hy.transpose() / yhy + s * s.transpose() / ys;
    symmetrize(out)
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Gd,
    Bfgs,
    Dfp,
}

impl Algo {
    pub const ALL: [Algo; 3] = [Algo::Gd, Algo::Bfgs, Algo::Dfp];

    pub fn name(self) -> &'static str {
        match self {
            Algo::Gd => "gd",
            Algo::Bfgs => "bfgs",
            Algo::Dfp => "dfp",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline algorithm {s:?}")))
    }
}

/// Per-step data handed to the observer of [`run_baseline_observed`].
pub struct BaselineStep<'a> {
    pub x: &'a DVector<f64>,
    pub f_x: f64,
    pub g_x: &'a DVector<f64>,
    pub direction: &'a DVector<f64>,
    pub line_search: LineSearchOutcome,
    /// Whether the quasi-Newton direction was replaced by `−g`.
    pub fell_back: bool,
    pub x_next: &'a DVector<f64>,
    pub g_next: &'a DVector<f64>,
    pub h_prev: &'a DMatrix<f64>,
    pub h_next: &'a DMatrix<f64>,
}

pub fn run_baseline(
    problem: &Problem,
    algo: Algo,
    x_init: DVector<f64>,
    lp: &LineSearchParams,
    stop: &StoppingRule,
) -> RunResult {
    run_baseline_observed(problem, algo, x_init, lp, stop, &mut |_| {})
}

/// Runs one baseline. Only gradient evaluations count against the budget and
/// appear in the trace; line-search function values do not.
pub fn run_baseline_observed(
    problem: &Problem,
    algo: Algo,
    x_init: DVector<f64>,
    lp: &LineSearchParams,
    stop: &StoppingRule,
    observer: &mut dyn FnMut(BaselineStep<'_>),
) -> RunResult {
    let mut trace = Vec::new();
    let fail = |error: Error, trace: Vec<TraceRecord>| RunFailure { error, trace };
    if let Err(e) = lp.validate() {
        return Err(fail(e, trace));
    }
    let d = problem.dim();
    if x_init.len() != d {
        return Err(fail(
            Error::InvalidInput(format!("initial point has length {} but the problem has dim {d}", x_init.len())),
            trace,
        ));
    }
    let budget = Budget::new(*stop);
    if !budget.allows(0) {
        return Ok(RunOutput {
            x: x_init,
            status: RunStatus::BudgetExhausted,
            trace,
            grad_evals: 0,
            initial_grad_norm: f64::NAN,
            best_grad_norm: None,
        });
    }

    let (mut f, mut g) = match problem.value_grad(&x_init) {
        Ok(v) => v,
        Err(e) => return Err(fail(e, trace)),
    };
    let mut x = x_init;
    let mut h = DMatrix::<f64>::identity(d, d);
    let mut grad_evals = 1u64;
    let initial_grad_norm = g.norm();
    let mut best = (initial_grad_norm, x.clone());
    let mut last_step = 0.0;

    for k in 0u64.. {
        let grad_norm = g.norm();
        trace.push(TraceRecord {
            grad_eval_index: grad_evals,
            outer_t: k,
            inner_k: 0,
            f,
            grad_norm,
            step_norm: last_step,
            wall_time_s: budget.elapsed(),
            extra: None,
        });
        if !f.is_finite() || !grad_norm.is_finite() {
            return Err(fail(Error::DivergedNumerics { grad_evals }, trace));
        }
        if grad_norm < best.0 {
            best = (grad_norm, x.clone());
        }
        let finish = |status, trace, best: (f64, DVector<f64>)| RunOutput {
            x: best.1,
            status,
            trace,
            grad_evals,
            initial_grad_norm,
            best_grad_norm: Some(best.0),
        };
        if grad_norm <= stop.eps_grad {
            return Ok(finish(RunStatus::Converged, trace, best));
        }
        if !budget.allows(grad_evals) {
            return Ok(finish(RunStatus::BudgetExhausted, trace, best));
        }

        let steepest = -&g;
        let (direction, line_search, fell_back) = {
            let first = match algo {
                Algo::Gd => Err(None),
                _ => {
                    let p = -(&h * &g);
                    match armijo(problem, &x, f, &g, &p, lp) {
                        Ok(ls) => Ok((p, ls)),
                        Err(e @ (Error::LineSearchFailed { .. } | Error::InvalidInput(_))) => Err(Some(e)),
                        Err(e) => return Err(fail(e, trace)),
                    }
                }
            };
            match first {
                Ok((p, ls)) => (p, ls, false),
                Err(prev) => match armijo(problem, &x, f, &g, &steepest, lp) {
                    Ok(ls) => (steepest, ls, prev.is_some()),
                    Err(e) => return Err(fail(e, trace)),
                },
            }
        };

        let s = &direction * line_search.step;
        let x_next = &x + &s;
        let (f_next, g_next) = match problem.value_grad(&x_next) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, trace)),
        };
        grad_evals += 1;
        let y = &g_next - &g;
        let h_next = match algo {
            Algo::Gd => h.clone(),
            Algo::Bfgs => bfgs_update(&h, &s, &y, CAUTIOUS_TOL),
            Algo::Dfp => dfp_update(&h, &s, &y, CAUTIOUS_TOL),
        };
        observer(BaselineStep {
            x: &x,
            f_x: f,
            g_x: &g,
            direction: &direction,
            line_search,
            fell_back,
            x_next: &x_next,
            g_next: &g_next,
            h_prev: &h,
            h_next: &h_next,
        });
        last_step = s.norm();
        x = x_next;
        f = f_next;
        g = g_next;
        h = h_next;
    }
    unreachable!("baseline loop only exits by returning")
}
