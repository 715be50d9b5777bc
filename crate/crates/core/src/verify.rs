//! Randomized property suites behind the `verify` command. Each suite draws
//! its instances from a seeded stream and reports how many failed and the
//! worst violation seen.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::baselines::{bfgs_update, dfp_update, CAUTIOUS_TOL};
use crate::error::Result;
use crate::numerics::{random_symmetric_with_spectrum, sym_operator_norm, RngState};
use crate::objectives::Problem;
use crate::optimizer::{gbar, run_observed, RunEvent, ScheduleConstants};
use crate::par::{self, ExecMode};
use crate::psb::{gamma, increment_term, optimal_rank2, scaled_psb_update};
use crate::subproblem::{solve, ModelInstance};
use crate::trace::StoppingRule;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// Largest `violation / tolerance` ratio; at most 1 when everything passed.
    pub worst_ratio: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn from_ratios(name: &'static str, ratios: &[f64]) -> Self {
        Self {
            name,
            cases: ratios.len(),
            failures: ratios.iter().filter(|r| !(**r <= 1.0)).count(),
            worst_ratio: ratios.iter().copied().fold(0.0, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) }),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub seed: u64,
    pub cases: usize,
    pub mode: ExecMode,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            cases: 200,
            mode: ExecMode::Parallel,
        }
    }
}

fn case_rng(seed: u64, suite: u64, case: usize) -> RngState {
    let mut base = RngState::new(seed ^ suite.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    for _ in 0..(case % 7) {
        base.next_u64();
    }
    RngState::new(base.next_u64().wrapping_add(case as u64))
}

/// Model-gradient contract `‖∇m(s)‖ ≤ δ‖s‖` on random indefinite instances.
pub fn subproblem_contract(opts: &VerifyOptions) -> SuiteReport {
    let idx: Vec<usize> = (0..opts.cases).collect();
    let ratios = par::map(opts.mode, &idx, |&i| {
        let mut rng = case_rng(opts.seed, 1, i);
        let d = 1 + (rng.next_u64() % 10) as usize;
        let b = random_symmetric_with_spectrum(&mut rng, d, -3.0, 3.0);
        let g = rng.normal_vector(d);
        let sigma = 10f64.powf(-1.0 + 2.0 * rng.next_uniform());
        let delta = 10f64.powf(-8.0 + 6.0 * rng.next_uniform());
        let run = || -> Result<f64> {
            let inst = ModelInstance::new(g.clone(), b, sigma, delta)?;
            let sol = solve(&inst)?;
            let s_norm = sol.s.norm();
            let gm = inst.grad(&sol.s).norm();
            Ok(if s_norm == 0.0 { gm } else { gm / (delta * s_norm) })
        };
        run().unwrap_or(f64::INFINITY)
    });
    SuiteReport::from_ratios("subproblem_contract", &ratios)
}

/// Unscaled PSB satisfies the secant equation `B's = Bs + r`.
pub fn psb_secant(opts: &VerifyOptions) -> SuiteReport {
    let idx: Vec<usize> = (0..opts.cases).collect();
    let ratios = par::map(opts.mode, &idx, |&i| {
        let mut rng = case_rng(opts.seed, 2, i);
        let d = 1 + (rng.next_u64() % 12) as usize;
        let b = random_symmetric_with_spectrum(&mut rng, d, -5.0, 5.0);
        let s = rng.normal_vector(d);
        let r = rng.normal_vector(d);
        let target = &b * &s + &r;
        match scaled_psb_update(&b, &s, &r, 0.0) {
            Ok(b2) => (&b2 * &s - &target).norm() / (1e-10 * (1.0 + target.norm())),
            Err(_) => f64::INFINITY,
        }
    });
    SuiteReport::from_ratios("psb_secant", &ratios)
}

/// The closed-form rank-2 optimum is attained by the PSB term and no
/// random feasible competitor does better.
pub fn rank2_optimality(opts: &VerifyOptions) -> SuiteReport {
    let idx: Vec<usize> = (0..opts.cases).collect();
    let ratios = par::map(opts.mode, &idx, |&i| {
        let mut rng = case_rng(opts.seed, 3, i);
        let d = 1 + (rng.next_u64() % 8) as usize;
        let s = rng.normal_vector(d);
        let r = rng.normal_vector(d);
        // any symmetric E with Es = r: the value of ‖X‖² − 2⟨X,E⟩ does not
        // depend on which one
        let Ok((x, value)) = optimal_rank2(&r, &s) else {
            return f64::INFINITY;
        };
        let ss = s.norm_squared();
        let p = DMatrix::identity(d, d) - &s * s.transpose() / ss;
        let f = random_symmetric_with_spectrum(&mut rng, d, -1.0, 1.0);
        let e = &x + &p * f * &p;
        let attained = increment_term(&x, &e, &DMatrix::zeros(d, d));
        let mut worst = (attained - value).abs() / (1e-10 * (1.0 + value.abs()));
        for _ in 0..4 {
            let v = rng.normal_vector(d);
            let y = &v * s.transpose() + &s * v.transpose();
            let other = increment_term(&y, &e, &DMatrix::zeros(d, d));
            worst = worst.max((value - other) / (1e-10 * (1.0 + value.abs())));
        }
        worst
    });
    SuiteReport::from_ratios("rank2_optimality", &ratios)
}

/// Inverse secant `H'y = s` for BFGS and DFP whenever the curvature gate passes.
pub fn baseline_inverse_secant(opts: &VerifyOptions) -> SuiteReport {
    let idx: Vec<usize> = (0..opts.cases).collect();
    let ratios = par::map(opts.mode, &idx, |&i| {
        let mut rng = case_rng(opts.seed, 4, i);
        let d = 1 + (rng.next_u64() % 10) as usize;
        let h = random_symmetric_with_spectrum(&mut rng, d, 0.1, 10.0);
        let s = rng.normal_vector(d);
        let y = rng.normal_vector(d);
        let gate = y.dot(&s) > CAUTIOUS_TOL * s.norm_squared();
        [bfgs_update(&h, &s, &y, CAUTIOUS_TOL), dfp_update(&h, &s, &y, CAUTIOUS_TOL)]
            .iter()
            .map(|h2| {
                if gate {
                    (h2 * &y - &s).norm() / (1e-10 * (1.0 + s.norm()))
                } else if h2 == &h {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max)
    });
    SuiteReport::from_ratios("baseline_inverse_secant", &ratios)
}

/// Runs the accelerated method on a random quadratic and returns the worst
/// ratios of the averaging identity and the γ-potential chain.
fn quadratic_run_ratios(rng: &mut RngState, max_evals: u64) -> (f64, f64) {
    let d = 2 + (rng.next_u64() % 19) as usize;
    let h = random_symmetric_with_spectrum(rng, d, -2.0, 4.0);
    let Ok(problem) = Problem::quadratic(h.clone()) else {
        return (f64::INFINITY, f64::INFINITY);
    };
    let l = sym_operator_norm(&h).unwrap_or(f64::INFINITY);
    let dl2 = d as f64 * l * l;
    let c = ScheduleConstants {
        c_kappa: 2.0 * (d as f64).powf(0.2) + 1.0,
        c_sigma: 10.0,
        c_delta: 1e-6,
        fixed_t: None,
    };
    let stop = StoppingRule {
        eps_grad: 1e-10,
        max_grad_evals: max_evals,
        max_wall_s: None,
    };
    let x0 = rng.normal_vector(d) * 3.0;
    let mut avg_worst = 0.0f64;
    let mut chain_worst = 0.0f64;
    let mut grads: Vec<DVector<f64>> = Vec::new();
    let result = run_observed(&problem, &c, x0, &stop, &mut |ev| match ev {
        RunEvent::Step {
            params, report, state, ..
        } => {
            if report.k == 0 {
                grads.clear();
                grads.push(report.grad_prev.clone());
            }
            grads.push(state.grad.clone());
            let theta = params.theta;
            let (Ok(g0), Ok(g1)) = (gamma(&report.b_prev, &h, theta), gamma(&state.b, &h, theta)) else {
                chain_worst = f64::INFINITY;
                return;
            };
            let slack = 2.0 * dl2 * theta;
            let mut worst = (g1 + (1.0 - theta) * dl2).min(0.0).abs() / 1e-8;
            if let Some(x) = &report.correction {
                let bound = slack + increment_term(x, &h, &report.b_prev);
                worst = worst.max((g1 - g0 - bound) / 1e-8);
                let rho = report.residual.norm_squared() / report.step().norm_squared();
                worst = worst.max((rho - slack - (g0 - g1)) / 1e-8);
            }
            chain_worst = chain_worst.max(if worst.is_nan() { f64::INFINITY } else { worst });
        }
        RunEvent::Average {
            state, grad_at_x_bar, ..
        } => {
            let ratio = match gbar(&grads, state.k) {
                Ok(gb) => (grad_at_x_bar - &gb).norm() / (1e-9 * (1.0 + gb.norm())),
                Err(_) => f64::INFINITY,
            };
            avg_worst = avg_worst.max(if ratio.is_nan() { f64::INFINITY } else { ratio });
        }
    });
    if result.is_err() {
        return (f64::INFINITY, f64::INFINITY);
    }
    (avg_worst, chain_worst)
}

/// Averaging identity `∇f(x̄_k) = ḡ_k` and the γ-potential chain along runs
/// on random (possibly indefinite) quadratics.
pub fn quadratic_runs(opts: &VerifyOptions) -> [SuiteReport; 2] {
    let n = opts.cases.div_ceil(10).max(1);
    let idx: Vec<usize> = (0..n).collect();
    let pairs = par::map(opts.mode, &idx, |&i| {
        let mut rng = case_rng(opts.seed, 5, i);
        quadratic_run_ratios(&mut rng, 400)
    });
    let avg: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let chain: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    [
        SuiteReport::from_ratios("averaging_identity", &avg),
        SuiteReport::from_ratios("potential_chain", &chain),
    ]
}

/// Every suite, in a fixed order.
pub fn run_all(opts: &VerifyOptions) -> Vec<SuiteReport> {
    let mut out = vec![
        subproblem_contract(opts),
        psb_secant(opts),
        rank2_optimality(opts),
        baseline_inverse_secant(opts),
    ];
    out.extend(quadratic_runs(opts));
    out
}
