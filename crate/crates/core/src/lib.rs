//! Parameter-free accelerated quasi-Newton optimization with scaled PSB
//! Hessian approximations, plus baselines and an experiment harness.

pub mod baselines;
pub mod error;
pub mod harness;
pub mod numerics;
pub mod objectives;
pub mod optimizer;
pub mod par;
pub mod psb;
pub mod subproblem;
pub mod trace;
pub mod verify;

pub use baselines::{run_baseline, Algo, LineSearchParams};
pub use error::{Error, Result};
pub use harness::{ExperimentConfig, Method};
pub use objectives::{Problem, ProblemKind};
pub use optimizer::{run, run_from, ScheduleConstants};
pub use par::ExecMode;
pub use trace::{RunFailure, RunOutput, RunStatus, StoppingRule, TraceRecord};
