//! Parameter-free accelerated quasi-Newton method.
//!
//! Outer iteration `t` fixes `(κ, σ, δ)` from a schedule, sets
//! `θ = d/κ⁵` and `K = ⌊κ⌋`, and runs `K` inner steps. Each inner step
//! minimizes a quartic-regularized model whose linear term mixes the
//! current gradient with the `(2i+1)`-weighted gradient history, then
//! updates `B` with a scaled PSB correction. After the inner loop the
//! gradient at the weighted average `x̄_K` decides whether to stop; if not,
//! the next outer iteration warm-starts from `(x_K, B_K)`.

use std::mem;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{Problem, ProblemKind};
use crate::psb::{apply_update, gamma, residual};
use crate::subproblem::{solve, ModelInstance, SubproblemSolution};
use crate::trace::{
    Budget, RunFailure, RunOutput, RunResult, RunStatus, StoppingRule, TraceExtra, TraceRecord, AVERAGE_INNER_K,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConstants {
    pub c_kappa: f64,
    pub c_sigma: f64,
    pub c_delta: f64,
    /// Known number of outer iterations; freezes the parameters at their
    /// `T`-dependent values instead of growing them with `t`.
    pub fixed_t: Option<u64>,
}

impl Default for ScheduleConstants {
    fn default() -> Self {
        Self {
            c_kappa: 10.0,
            c_sigma: 1e4,
            c_delta: 1e-5,
            fixed_t: None,
        }
    }
}

impl ScheduleConstants {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let floor = (dim as f64).powf(0.2);
        if !(self.c_kappa > floor) || !self.c_kappa.is_finite() {
            return Err(Error::ScheduleInvalid(format!(
                "c_kappa = {} must exceed dim^(1/5) = {floor}",
                self.c_kappa
            )));
        }
        if !(self.c_sigma > 0.0 && self.c_sigma.is_finite()) {
            return Err(Error::ScheduleInvalid(format!("c_sigma must be positive, got {}", self.c_sigma)));
        }
        if !(self.c_delta > 0.0 && self.c_delta.is_finite()) {
            return Err(Error::ScheduleInvalid(format!("c_delta must be positive, got {}", self.c_delta)));
        }
        if self.fixed_t == Some(0) {
            return Err(Error::ScheduleInvalid("fixed_t must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterParams {
    pub kappa: f64,
    pub sigma: f64,
    pub delta: f64,
    pub theta: f64,
    /// Inner iterations, `⌊κ⌋`.
    pub k_inner: usize,
}

/// Parameters for outer iteration `t`:
/// `κ = c_κ n^{1/12}`, `σ = c_σ n^{2/3}`, `δ = c_δ n^{-5/24}` with
/// `n = t + 1`, or `n = T` in fixed-horizon mode.
pub fn schedule(t: u64, c: &ScheduleConstants, dim: usize) -> Result<OuterParams> {
    c.validate(dim)?;
    let n = match c.fixed_t {
        Some(total) => total as f64,
        None => (t + 1) as f64,
    };
    let kappa = c.c_kappa * n.powf(1.0 / 12.0);
    let sigma = c.c_sigma * n.powf(2.0 / 3.0);
    let delta = c.c_delta * n.powf(-5.0 / 24.0);
    let theta = dim as f64 / kappa.powi(5);
    Ok(OuterParams {
        kappa,
        sigma,
        delta,
        theta,
        k_inner: kappa.floor() as usize,
    })
}

/// Inner-loop state. `accum_grad` holds `Σ_{i≤k} (2i+1)∇f(x_i)` and
/// `accum_x` holds `Σ_{i<k} (2i+1) x_i`.
#[derive(Debug, Clone)]
pub struct InnerState {
    pub x: DVector<f64>,
    pub b: DMatrix<f64>,
    /// Cached `∇f(x)`.
    pub grad: DVector<f64>,
    /// Cached `f(x)`.
    pub f: f64,
    pub accum_grad: DVector<f64>,
    pub accum_x: DVector<f64>,
    pub k: usize,
    pub grad_evals: u64,
}

impl InnerState {
    /// Fresh inner loop at `x` with known `f(x)` and `∇f(x)`.
    pub fn new(x: DVector<f64>, b: DMatrix<f64>, f: f64, grad: DVector<f64>) -> Self {
        let d = x.len();
        Self {
            accum_grad: grad.clone(),
            accum_x: DVector::zeros(d),
            x,
            b,
            grad,
            f,
            k: 0,
            grad_evals: 0,
        }
    }

    /// Starts the next outer iteration from the current `(x, B)`, reusing
    /// the cached gradient.
    pub fn restart(&mut self) {
        self.accum_grad.copy_from(&self.grad);
        self.accum_x.fill(0.0);
        self.k = 0;
    }

    /// Linear term of the model, `∇f(x_k) + accum_grad/(k+1)`.
    pub fn model_linear_term(&self) -> DVector<f64> {
        &self.grad + &self.accum_grad / (self.k + 1) as f64
    }

    /// `x̄_k = (accum_x + k x_k) / (k(k+1))`.
    pub fn averaged_iterate(&self) -> Result<DVector<f64>> {
        if self.k == 0 {
            return Err(Error::NotReady);
        }
        let k = self.k as f64;
        Ok((&self.accum_x + &self.x * k) / (k * (k + 1.0)))
    }
}

/// Free-function form of [`InnerState::averaged_iterate`].
pub fn averaged_iterate(state: &InnerState) -> Result<DVector<f64>> {
    state.averaged_iterate()
}

/// `ḡ_k = (Σ_{i<k}(2i+1) g_i + k g_k) / (k(k+1))`, computed from scratch.
pub fn gbar(grads: &[DVector<f64>], k: usize) -> Result<DVector<f64>> {
    if k == 0 || grads.len() < k + 1 {
        return Err(Error::InvalidInput(format!(
            "gbar needs k >= 1 and k+1 gradients, got k = {k} with {}",
            grads.len()
        )));
    }
    let mut acc = &grads[k] * k as f64;
    for (i, g) in grads.iter().take(k).enumerate() {
        acc += g * (2 * i + 1) as f64;
    }
    Ok(acc / (k * (k + 1)) as f64)
}

/// Everything one inner step produced. `x_prev`, `b_prev`, `grad_prev` are
/// the pre-step values moved out of the state.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub k: usize,
    pub x_prev: DVector<f64>,
    pub b_prev: DMatrix<f64>,
    pub grad_prev: DVector<f64>,
    pub g_lin: DVector<f64>,
    pub solution: SubproblemSolution,
    pub residual: DVector<f64>,
    /// Rank-2 term added to `B` before scaling; `None` on a zero step.
    pub correction: Option<DMatrix<f64>>,
}

impl StepReport {
    pub fn step(&self) -> &DVector<f64> {
        &self.solution.s
    }
}

/// One inner iteration. Evaluates the objective exactly once, at the new
/// iterate. Non-finite values are stored as-is; callers check `state.f` and
/// `state.grad`.
pub fn inner_step(state: &mut InnerState, p: &OuterParams, problem: &Problem) -> Result<StepReport> {
    let k = state.k;
    let g_lin = state.model_linear_term();
    let inst = ModelInstance::new(g_lin, state.b.clone(), p.sigma, p.delta)?;
    let solution = solve(&inst)?;
    let g_lin = inst.g_lin;
    let s = &solution.s;

    let x_next = &state.x + s;
    let (f_next, grad_next) = problem.value_grad(&x_next)?;
    state.grad_evals += 1;

    let r = residual(&grad_next, &state.grad, &state.b, s);
    let update = apply_update(&state.b, s, &r, p.theta, state.x.norm())?;

    state.accum_x += &state.x * (2 * k + 1) as f64;
    state.accum_grad += &grad_next * (2 * k + 3) as f64;
    let x_prev = mem::replace(&mut state.x, x_next);
    let b_prev = mem::replace(&mut state.b, update.b_next);
    let grad_prev = mem::replace(&mut state.grad, grad_next);
    state.f = f_next;
    state.k += 1;

    Ok(StepReport {
        k,
        x_prev,
        b_prev,
        grad_prev,
        g_lin,
        solution,
        residual: r,
        correction: update.correction,
    })
}

/// Callbacks fired during [`run_observed`].
pub enum RunEvent<'a> {
    Step {
        outer_t: u64,
        params: &'a OuterParams,
        report: &'a StepReport,
        state: &'a InnerState,
    },
    Average {
        outer_t: u64,
        params: &'a OuterParams,
        state: &'a InnerState,
        x_bar: &'a DVector<f64>,
        grad_at_x_bar: &'a DVector<f64>,
    },
}

/// Runs from `sample_initial(seed)`.
pub fn run(problem: &Problem, c: &ScheduleConstants, seed: u64, stop: &StoppingRule) -> RunResult {
    let x_init = problem.sample_initial(seed);
    run_from(problem, c, x_init, stop)
}

pub fn run_from(problem: &Problem, c: &ScheduleConstants, x_init: DVector<f64>, stop: &StoppingRule) -> RunResult {
    run_observed(problem, c, x_init, stop, &mut |_| {})
}

pub fn run_observed(
    problem: &Problem,
    c: &ScheduleConstants,
    x_init: DVector<f64>,
    stop: &StoppingRule,
    observer: &mut dyn FnMut(RunEvent<'_>),
) -> RunResult {
    let mut trace = Vec::new();
    let fail = |error: Error, trace: Vec<TraceRecord>| RunFailure { error, trace };
    if let Err(e) = c.validate(problem.dim()) {
        return Err(fail(e, trace));
    }
    if x_init.len() != problem.dim() {
        return Err(fail(
            Error::InvalidInput(format!(
                "initial point has length {} but the problem has dim {}",
                x_init.len(),
                problem.dim()
            )),
            trace,
        ));
    }

    let budget = Budget::new(*stop);
    // Exact Hessian for the γ diagnostic on the quadratic oracle.
    let oracle_hessian = match problem.kind() {
        ProblemKind::Quadratic => problem.quad_matrix().cloned(),
        _ => None,
    };
    let d = problem.dim();

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
    let (f0, g0) = match problem.value_grad(&x_init) {
        Ok(v) => v,
        Err(e) => return Err(fail(e, trace)),
    };
    let initial_grad_norm = g0.norm();
    let mut state = InnerState::new(x_init, DMatrix::zeros(d, d), f0, g0);
    state.grad_evals = 1;
    trace.push(TraceRecord {
        grad_eval_index: 1,
        outer_t: 0,
        inner_k: 0,
        f: f0,
        grad_norm: initial_grad_norm,
        step_norm: 0.0,
        wall_time_s: budget.elapsed(),
        extra: None,
    });
    if !f0.is_finite() || !initial_grad_norm.is_finite() {
        return Err(fail(Error::DivergedNumerics { grad_evals: 1 }, trace));
    }

    let mut best: Option<(f64, DVector<f64>)> = None;
    let finish = |status, state: &InnerState, best: Option<(f64, DVector<f64>)>, trace| {
        let (best_grad_norm, x) = match best {
            Some((n, x)) => (Some(n), x),
            None => (None, state.x.clone()),
        };
        RunOutput {
            x,
            status,
            trace,
            grad_evals: state.grad_evals,
            initial_grad_norm,
            best_grad_norm,
        }
    };

    for t in 0u64.. {
        let params = match schedule(t, c, d) {
            Ok(p) => p,
            Err(e) => return Err(fail(e, trace)),
        };
        for _ in 0..params.k_inner {
            if !budget.allows(state.grad_evals) {
                return Ok(finish(RunStatus::BudgetExhausted, &state, best, trace));
            }
            let report = match inner_step(&mut state, &params, problem) {
                Ok(r) => r,
                Err(e) => return Err(fail(e, trace)),
            };
            let extra = oracle_hessian.as_ref().and_then(|h| {
                gamma(&state.b, h, params.theta)
                    .ok()
                    .map(|gamma| TraceExtra { gamma })
            });
            let grad_norm = state.grad.norm();
            trace.push(TraceRecord {
                grad_eval_index: state.grad_evals,
                outer_t: t,
                inner_k: state.k as i64,
                f: state.f,
                grad_norm,
                step_norm: report.step().norm(),
                wall_time_s: budget.elapsed(),
                extra,
            });
            if !state.f.is_finite() || !grad_norm.is_finite() {
                return Err(fail(
                    Error::DivergedNumerics {
                        grad_evals: state.grad_evals,
                    },
                    trace,
                ));
            }
            observer(RunEvent::Step {
                outer_t: t,
                params: &params,
                report: &report,
                state: &state,
            });
        }

        if !budget.allows(state.grad_evals) {
            return Ok(finish(RunStatus::BudgetExhausted, &state, best, trace));
        }
        let x_bar = match state.averaged_iterate() {
            Ok(x) => x,
            Err(e) => return Err(fail(e, trace)),
        };
        let (f_bar, g_bar) = match problem.value_grad(&x_bar) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, trace)),
        };
        state.grad_evals += 1;
        let norm_bar = g_bar.norm();
        trace.push(TraceRecord {
            grad_eval_index: state.grad_evals,
            outer_t: t,
            inner_k: AVERAGE_INNER_K,
            f: f_bar,
            grad_norm: norm_bar,
            step_norm: 0.0,
            wall_time_s: budget.elapsed(),
            extra: None,
        });
        if !f_bar.is_finite() || !norm_bar.is_finite() {
            return Err(fail(
                Error::DivergedNumerics {
                    grad_evals: state.grad_evals,
                },
                trace,
            ));
        }
        observer(RunEvent::Average {
            outer_t: t,
            params: &params,
            state: &state,
            x_bar: &x_bar,
            grad_at_x_bar: &g_bar,
        });
        if best.as_ref().map_or(true, |(n, _)| norm_bar < *n) {
            best = Some((norm_bar, x_bar));
        }
        if norm_bar <= stop.eps_grad {
            return Ok(finish(RunStatus::Converged, &state, best, trace));
        }
        state.restart();
    }
    unreachable!("outer loop only exits by returning")
}
