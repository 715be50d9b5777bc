use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// `inner_k` value marking a gradient evaluation at the averaged iterate.
pub const AVERAGE_INNER_K: i64 = -1;

/// Optional diagnostics attached to a record (quadratic oracle runs only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceExtra {
    pub gamma: f64,
}

/// One row per gradient evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based count of gradient evaluations so far.
    pub grad_eval_index: u64,
    pub outer_t: u64,
    /// Inner iterate index; [`AVERAGE_INNER_K`] for the averaged iterate.
    pub inner_k: i64,
    pub f: f64,
    pub grad_norm: f64,
    pub step_norm: f64,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub extra: Option<TraceExtra>,
}

impl TraceRecord {
    pub fn is_average(&self) -> bool {
        self.inner_k == AVERAGE_INNER_K
    }

    /// Record equality ignoring wall-clock time, compared bitwise on floats.
    pub fn same_except_time(&self, other: &TraceRecord) -> bool {
        self.grad_eval_index == other.grad_eval_index
            && self.outer_t == other.outer_t
            && self.inner_k == other.inner_k
            && self.f.to_bits() == other.f.to_bits()
            && self.grad_norm.to_bits() == other.grad_norm.to_bits()
            && self.step_norm.to_bits() == other.step_norm.to_bits()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub eps_grad: f64,
    pub max_grad_evals: u64,
    pub max_wall_s: Option<f64>,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            eps_grad: 1e-8,
            max_grad_evals: 200_000,
            max_wall_s: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Best averaged iterate for the accelerated method, best iterate for
    /// the baselines. Falls back to the current iterate if nothing was
    /// checked yet.
    pub x: DVector<f64>,
    pub status: RunStatus,
    pub trace: Vec<TraceRecord>,
    pub grad_evals: u64,
    pub initial_grad_norm: f64,
    /// Smallest checked gradient norm (`‖∇f(x̄)‖` for the accelerated method).
    pub best_grad_norm: Option<f64>,
}

/// A run that ended in an error, with everything traced up to that point.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub trace: Vec<TraceRecord>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} trace records)", self.error, self.trace.len())
    }
}

impl std::error::Error for RunFailure {}

pub type RunResult = std::result::Result<RunOutput, RunFailure>;

/// Budget and clock shared by the optimizer and the baselines.
pub(crate) struct Budget {
    pub rule: StoppingRule,
    pub start: Instant,
}

impl Budget {
    pub fn new(rule: StoppingRule) -> Self {
        Self {
            rule,
            start: Instant::now(),
        }
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    /// Whether another gradient evaluation is allowed after `used` of them.
    pub fn allows(&self, used: u64) -> bool {
        if used >= self.rule.max_grad_evals {
            return false;
        }
        match self.rule.max_wall_s {
            Some(limit) => self.elapsed() < limit,
            None => true,
        }
    }
}
