use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use aqn_core::harness::{self, Outcome, SweepGrid, EXIT_FAILURE, EXIT_OK};
use aqn_core::verify::{self, VerifyOptions};
use aqn_core::{Error, ExecMode, ExperimentConfig, Method, ProblemKind};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "aqn", version, about = "Accelerated quasi-Newton experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its trace CSV.
    Run(Common),
    /// Run the c_kappa x c_sigma grid on several problems.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Problems to sweep (default: the four benchmarks).
        #[arg(long, value_delimiter = ',')]
        problems: Vec<ProblemKind>,
        /// c_kappa grid values.
        #[arg(long, value_delimiter = ',')]
        grid_ck: Vec<f64>,
        /// c_sigma grid values.
        #[arg(long, value_delimiter = ',')]
        grid_cs: Vec<f64>,
        /// Run cells one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        /// Difference step.
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        /// Number of sampled points (seeds seed, seed+1, ...).
        #[arg(long, default_value_t = 5)]
        points: u64,
        /// Largest acceptable relative error.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Run the randomized property suites.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long)]
        sequential: bool,
    },
}

/// Flags shared by the experiment commands; each overrides the config file.
#[derive(Args, Clone, Default)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "ck")]
    c_kappa: Option<f64>,
    #[arg(long = "cs")]
    c_sigma: Option<f64>,
    #[arg(long = "cd")]
    c_delta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_grad_evals: Option<u64>,
    /// CSV path for `run`, output directory for `sweep`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trace_stride: Option<u64>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = &self.problem {
            cfg.problem = p.parse()?;
        }
        if let Some(a) = &self.algo {
            cfg.algo = a.parse::<Method>()?;
        }
        macro_rules! set {
            ($($src:ident => $dst:ident),*) => {$(
                if let Some(v) = self.$src.clone() {
                    cfg.$dst = v;
                }
            )*};
        }
        set!(dim => dim, seed => seed, c_kappa => c_kappa, c_sigma => c_sigma, c_delta => c_delta,
             eps => eps_grad, max_grad_evals => max_grad_evals, trace_stride => trace_stride);
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(err) => harness::exit_code(err),
                None => EXIT_FAILURE,
            }
        }
    };
    ExitCode::from(code as u8)
}

fn dispatch(cmd: Command) -> anyhow::Result<i32> {
    match cmd {
        Command::Run(common) => cmd_run(&common),
        Command::Sweep {
            common,
            problems,
            grid_ck,
            grid_cs,
            sequential,
        } => cmd_sweep(&common, problems, grid_ck, grid_cs, sequential),
        Command::Gradcheck { common, h, points, tol } => cmd_gradcheck(&common, h, points, tol),
        Command::Verify { seed, cases, sequential } => cmd_verify(seed, cases, sequential),
    }
}

fn cmd_run(common: &Common) -> anyhow::Result<i32> {
    let cfg = common.resolve()?;
    let report = harness::run_single(&cfg)?;
    let last = report.final_record();
    println!(
        "problem={} dim={} algo={} seed={}",
        cfg.problem, cfg.dim, cfg.algo, cfg.seed
    );
    match &report.outcome {
        Outcome::Finished(status) => println!("status={}", serde_json::to_value(status)?.as_str().unwrap_or("?")),
        Outcome::Failed(e) => println!("status=failed ({e})"),
    }
    println!("final_f={}", last.map_or(f64::NAN, |r| r.f));
    println!("final_grad_norm={}", last.map_or(f64::NAN, |r| r.grad_norm));
    if let Some(best) = report.best_grad_norm {
        println!("best_grad_norm={best}");
    }
    println!("grad_evals={}", report.grad_evals);
    if let Some(path) = &report.csv_path {
        println!("csv={}", path.display());
    }
    if let Outcome::Failed(e) = &report.outcome {
        eprintln!("error: {e}");
    }
    Ok(report.exit_code())
}

fn cmd_sweep(
    common: &Common,
    problems: Vec<ProblemKind>,
    grid_ck: Vec<f64>,
    grid_cs: Vec<f64>,
    sequential: bool,
) -> anyhow::Result<i32> {
    let cfg = common.resolve()?;
    let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("sweep_out"));
    let defaults = SweepGrid::default();
    let grid = SweepGrid {
        c_kappa: if grid_ck.is_empty() { defaults.c_kappa } else { grid_ck },
        c_sigma: if grid_cs.is_empty() { defaults.c_sigma } else { grid_cs },
    };
    let problems = if problems.is_empty() { ProblemKind::BENCHMARKS.to_vec() } else { problems };
    let mode = if sequential { ExecMode::Sequential } else { ExecMode::Parallel };
    let summary = harness::run_sweep(&cfg, &problems, &grid, &out_dir, mode)?;
    let failed = summary.cells.iter().filter(|c| c.status == "failed").count();
    println!("cells={} failed={} out={}", summary.cells.len(), failed, out_dir.display());
    for (problem, best) in &summary.best {
        println!(
            "best {problem}: c_kappa={} c_sigma={} min_grad_norm={}",
            best.c_kappa, best.c_sigma, best.final_min_grad_norm
        );
    }
    Ok(EXIT_OK)
}

fn cmd_gradcheck(common: &Common, h: f64, points: u64, tol: f64) -> anyhow::Result<i32> {
    let cfg = common.resolve()?;
    let problem = cfg.validate()?;
    let mut worst = 0.0f64;
    for k in 0..points.max(1) {
        let x = problem.sample_initial(cfg.seed.wrapping_add(k));
        let err = problem
            .check_gradient(&x, h)
            .with_context(|| format!("gradient check at seed {}", cfg.seed + k))?;
        println!("seed={} rel_err={err}", cfg.seed.wrapping_add(k));
        worst = worst.max(err);
    }
    let ok = worst <= tol;
    println!("{} {} d={} worst={worst} tol={tol}", if ok { "PASS" } else { "FAIL" }, cfg.problem, cfg.dim);
    Ok(if ok { EXIT_OK } else { EXIT_FAILURE })
}

fn cmd_verify(seed: u64, cases: usize, sequential: bool) -> anyhow::Result<i32> {
    if cases == 0 {
        anyhow::bail!(Error::Config("cases must be positive".into()));
    }
    let opts = VerifyOptions {
        seed,
        cases,
        mode: if sequential { ExecMode::Sequential } else { ExecMode::Parallel },
    };
    let reports = verify::run_all(&opts);
    for r in &reports {
        println!(
            "{} {} cases={} failures={} worst_ratio={:.3e}",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.cases,
            r.failures,
            r.worst_ratio
        );
    }
    Ok(if reports.iter().all(|r| r.passed()) { EXIT_OK } else { EXIT_FAILURE })
}
