//! Benchmark objectives with analytic gradients and Hessians.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::RngState;

/// Gradient norm the stored minimizer must satisfy.
const MINIMIZER_GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    DixonPrice,
    Powell,
    Qing,
    Rosenbrock,
    Quadratic,
}

impl ProblemKind {
    /// The four benchmark functions (everything except the quadratic oracle).
    pub const BENCHMARKS: [ProblemKind; 4] = [
        ProblemKind::DixonPrice,
        ProblemKind::Powell,
        ProblemKind::Qing,
        ProblemKind::Rosenbrock,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::DixonPrice => "dixon_price",
            ProblemKind::Powell => "powell",
            ProblemKind::Qing => "qing",
            ProblemKind::Rosenbrock => "rosenbrock",
            ProblemKind::Quadratic => "quadratic",
        }
    }

    pub fn min_dim(self) -> usize {
        match self {
            ProblemKind::DixonPrice | ProblemKind::Rosenbrock => 2,
            ProblemKind::Powell => 4,
            ProblemKind::Qing | ProblemKind::Quadratic => 1,
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dixon_price" => Ok(ProblemKind::DixonPrice),
            "powell" => Ok(ProblemKind::Powell),
            "qing" => Ok(ProblemKind::Qing),
            "rosenbrock" => Ok(ProblemKind::Rosenbrock),
            "quadratic" => Ok(ProblemKind::Quadratic),
            other => Err(Error::Config(format!("unknown problem name `{other}`"))),
        }
    }
}

/// Result of [`Problem::evaluate`].
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub f: f64,
    pub grad: Option<DVector<f64>>,
    pub hess: Option<DMatrix<f64>>,
}

/// A benchmark instance. The minimizer is computed and its gradient checked
/// when the problem is built.
#[derive(Debug, Clone)]
pub struct Problem {
    kind: ProblemKind,
    dim: usize,
    quad_matrix: Option<DMatrix<f64>>,
    minimizer: DVector<f64>,
}

impl Problem {
    /// Builds one of the four benchmarks.
    pub fn benchmark(kind: ProblemKind, dim: usize) -> Result<Self> {
        if kind == ProblemKind::Quadratic {
            return Err(Error::InvalidInput(
                "quadratic problems are built with Problem::quadratic".into(),
            ));
        }
        Self::build(kind, dim, None)
    }

    /// `f(x) = ½ xᵀ H x`; `h` must be symmetric to 1e-12 relative.
    pub fn quadratic(h: DMatrix<f64>) -> Result<Self> {
        if !h.is_square() || h.nrows() == 0 {
            return Err(Error::InvalidInput("quadratic matrix must be square and nonempty".into()));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("quadratic matrix has non-finite entries".into()));
        }
        let scale = h.amax().max(1.0);
        if (&h - h.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidInput("quadratic matrix is not symmetric".into()));
        }
        let sym = (&h + h.transpose()) * 0.5;
        let dim = sym.nrows();
        Self::build(ProblemKind::Quadratic, dim, Some(sym))
    }

    /// Builds any problem by kind; `quad_matrix` must be given iff the kind
    /// is quadratic. A quadratic without a matrix defaults to the identity.
    pub fn new(kind: ProblemKind, dim: usize, quad_matrix: Option<DMatrix<f64>>) -> Result<Self> {
        match (kind, quad_matrix) {
            (ProblemKind::Quadratic, Some(h)) => {
                if h.nrows() != dim {
                    return Err(Error::InvalidInput(format!(
                        "quadratic matrix is {}x{} but dim = {dim}",
                        h.nrows(),
                        h.ncols()
                    )));
                }
                Self::quadratic(h)
            }
            (ProblemKind::Quadratic, None) => {
                if dim == 0 {
                    return Err(Error::InvalidInput("dimension must be positive".into()));
                }
                Self::quadratic(DMatrix::identity(dim, dim))
            }
            (_, Some(_)) => Err(Error::InvalidInput(format!(
                "{kind} does not take a quadratic matrix"
            ))),
            (_, None) => Self::benchmark(kind, dim),
        }
    }

    fn build(kind: ProblemKind, dim: usize, quad_matrix: Option<DMatrix<f64>>) -> Result<Self> {
        if dim < kind.min_dim() {
            return Err(Error::InvalidInput(format!(
                "{kind} needs dim >= {}, got {dim}",
                kind.min_dim()
            )));
        }
        let minimizer = match kind {
            ProblemKind::DixonPrice => DVector::from_iterator(
                dim,
                (1..=dim).map(|i| {
                    let p = 2f64.powi(i as i32);
                    2f64.powf(-(p - 2.0) / p)
                }),
            ),
            ProblemKind::Powell | ProblemKind::Quadratic => DVector::zeros(dim),
            ProblemKind::Qing => DVector::from_iterator(dim, (1..=dim).map(|i| (i as f64).sqrt())),
            ProblemKind::Rosenbrock => DVector::from_element(dim, 1.0),
        };
        let problem = Self {
            kind,
            dim,
            quad_matrix,
            minimizer,
        };
        let (_, g) = problem.value_grad(&problem.minimizer)?;
        if g.norm() > MINIMIZER_GRAD_TOL {
            return Err(Error::InvalidInput(format!(
                "{kind} minimizer has gradient norm {:e}",
                g.norm()
            )));
        }
        Ok(problem)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn quad_matrix(&self) -> Option<&DMatrix<f64>> {
        self.quad_matrix.as_ref()
    }

    /// Known global minimizer (zero for the quadratic family).
    pub fn minimizer(&self) -> &DVector<f64> {
        &self.minimizer
    }

    /// `x* + z` with `z` drawn coordinate-by-coordinate from the seeded
    /// Box–Muller stream.
    pub fn sample_initial(&self, seed: u64) -> DVector<f64> {
        let mut rng = RngState::new(seed);
        &self.minimizer + rng.normal_vector(self.dim)
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "{} expects a point of length {}, got {}",
                self.kind,
                self.dim,
                x.len()
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &DVector<f64>, order: u8) -> Result<Evaluation> {
        if order > 2 {
            return Err(Error::InvalidInput(format!("derivative order {order} not supported")));
        }
        let (f, grad) = if order >= 1 {
            let (f, g) = self.value_grad(x)?;
            (f, Some(g))
        } else {
            (self.value(x)?, None)
        };
        let hess = if order == 2 { Some(self.hessian(x)?) } else { None };
        Ok(Evaluation { f, grad, hess })
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let d = self.dim;
        let f = match self.kind {
            ProblemKind::DixonPrice => {
                let mut f = (x[0] - 1.0).powi(2);
                for j in 1..d {
                    let t = 2.0 * x[j] * x[j] - x[j - 1];
                    f += (j + 1) as f64 * t * t;
                }
                f
            }
            ProblemKind::Powell => (0..d / 4)
                .map(|b| {
                    let (a, p, c, e) = (x[4 * b], x[4 * b + 1], x[4 * b + 2], x[4 * b + 3]);
                    (a + 10.0 * p).powi(2)
                        + 5.0 * (c - e).powi(2)
                        + (p - 2.0 * c).powi(4)
                        + 10.0 * (a - e).powi(4)
                })
                .sum(),
            ProblemKind::Qing => (0..d).map(|i| (x[i] * x[i] - (i + 1) as f64).powi(2)).sum(),
            ProblemKind::Rosenbrock => (0..d - 1)
                .map(|i| 100.0 * (x[i + 1] - x[i] * x[i]).powi(2) + (x[i] - 1.0).powi(2))
                .sum(),
            ProblemKind::Quadratic => {
                let h = self.quad_matrix.as_ref().expect("quadratic has a matrix");
                0.5 * x.dot(&(h * x))
            }
        };
        Ok(f)
    }

    pub fn value_grad(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.check_dim(x)?;
        let d = self.dim;
        let mut g = DVector::zeros(d);
        let f = match self.kind {
            ProblemKind::DixonPrice => {
                let mut f = (x[0] - 1.0).powi(2);
                g[0] = 2.0 * (x[0] - 1.0);
                for j in 1..d {
                    let w = (j + 1) as f64;
                    let t = 2.0 * x[j] * x[j] - x[j - 1];
                    f += w * t * t;
                    g[j] += 8.0 * w * t * x[j];
                    g[j - 1] -= 2.0 * w * t;
                }
                f
            }
            ProblemKind::Powell => {
                let mut f = 0.0;
                for b in 0..d / 4 {
                    let i = 4 * b;
                    let (a, p, c, e) = (x[i], x[i + 1], x[i + 2], x[i + 3]);
                    let t1 = a + 10.0 * p;
                    let t2 = c - e;
                    let t3 = p - 2.0 * c;
                    let t4 = a - e;
                    f += t1 * t1 + 5.0 * t2 * t2 + t3.powi(4) + 10.0 * t4.powi(4);
                    g[i] = 2.0 * t1 + 40.0 * t4.powi(3);
                    g[i + 1] = 20.0 * t1 + 4.0 * t3.powi(3);
                    g[i + 2] = 10.0 * t2 - 8.0 * t3.powi(3);
                    g[i + 3] = -10.0 * t2 - 40.0 * t4.powi(3);
                }
                f
            }
            ProblemKind::Qing => {
                let mut f = 0.0;
                for i in 0..d {
                    let t = x[i] * x[i] - (i + 1) as f64;
                    f += t * t;
                    g[i] = 4.0 * x[i] * t;
                }
                f
            }
            ProblemKind::Rosenbrock => {
                let mut f = 0.0;
                for i in 0..d - 1 {
                    let u = x[i + 1] - x[i] * x[i];
                    let v = x[i] - 1.0;
                    f += 100.0 * u * u + v * v;
                    g[i] += -400.0 * x[i] * u + 2.0 * v;
                    g[i + 1] += 200.0 * u;
                }
                f
            }
            ProblemKind::Quadratic => {
                let h = self.quad_matrix.as_ref().expect("quadratic has a matrix");
                g = h * x;
                0.5 * x.dot(&g)
            }
        };
        Ok((f, g))
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.value_grad(x)?.1)
    }

    pub fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let d = self.dim;
        let mut h = DMatrix::zeros(d, d);
        match self.kind {
            ProblemKind::DixonPrice => {
                h[(0, 0)] = 2.0;
                for j in 1..d {
                    let w = (j + 1) as f64;
                    let t = 2.0 * x[j] * x[j] - x[j - 1];
                    h[(j, j)] += 2.0 * w * (16.0 * x[j] * x[j] + 4.0 * t);
                    h[(j - 1, j - 1)] += 2.0 * w;
                    let off = -8.0 * w * x[j];
                    h[(j, j - 1)] += off;
                    h[(j - 1, j)] += off;
                }
            }
            ProblemKind::Powell => {
                for b in 0..d / 4 {
                    let (ia, ip, ic, ie) = (4 * b, 4 * b + 1, 4 * b + 2, 4 * b + 3);
                    let t3 = x[ip] - 2.0 * x[ic];
                    let t4 = x[ia] - x[ie];
                    let q3 = 12.0 * t3 * t3;
                    let q4 = 120.0 * t4 * t4;
                    let mut add = |i: usize, j: usize, v: f64| {
                        h[(i, j)] += v;
                        if i != j {
                            h[(j, i)] += v;
                        }
                    };
                    add(ia, ia, 2.0 + q4);
                    add(ia, ip, 20.0);
                    add(ip, ip, 200.0 + q3);
                    add(ic, ic, 10.0 + 4.0 * q3);
                    add(ic, ie, -10.0);
                    add(ie, ie, 10.0 + q4);
                    add(ip, ic, -2.0 * q3);
                    add(ia, ie, -q4);
                }
            }
            ProblemKind::Qing => {
                for i in 0..d {
                    h[(i, i)] = 12.0 * x[i] * x[i] - 4.0 * (i + 1) as f64;
                }
            }
            ProblemKind::Rosenbrock => {
                for i in 0..d - 1 {
                    let u = x[i + 1] - x[i] * x[i];
                    h[(i, i)] += -400.0 * u + 800.0 * x[i] * x[i] + 2.0;
                    h[(i + 1, i + 1)] += 200.0;
                    h[(i, i + 1)] += -400.0 * x[i];
                    h[(i + 1, i)] += -400.0 * x[i];
                }
            }
            ProblemKind::Quadratic => {
                h = self.quad_matrix.clone().expect("quadratic has a matrix");
            }
        }
        Ok(h)
    }

    /// Largest relative discrepancy between the analytic gradient and central
    /// differences with step `h`, scaled by `max(1, |∂_i f|)`.
    pub fn check_gradient(&self, x: &DVector<f64>, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::InvalidInput(format!("difference step must be positive, got {h}")));
        }
        let (_, g) = self.value_grad(x)?;
        let mut worst = 0.0f64;
        let mut probe = x.clone();
        for i in 0..self.dim {
            let xi = x[i];
            probe[i] = xi + h;
            let fp = self.value(&probe)?;
            probe[i] = xi - h;
            let fm = self.value(&probe)?;
            probe[i] = xi;
            let fd = (fp - fm) / (2.0 * h);
            worst = worst.max((g[i] - fd).abs() / g[i].abs().max(1.0));
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random_symmetric_with_spectrum;

    fn uniform_point(rng: &mut RngState, d: usize, lo: f64, hi: f64) -> DVector<f64> {
        DVector::from_iterator(d, (0..d).map(|_| lo + (hi - lo) * rng.next_uniform()))
    }

    fn all_problems(d: usize) -> Vec<Problem> {
        let mut rng = RngState::new(99);
        let mut v: Vec<Problem> = ProblemKind::BENCHMARKS
            .iter()
            .map(|&k| Problem::benchmark(k, d).unwrap())
            .collect();
        v.push(Problem::quadratic(random_symmetric_with_spectrum(&mut rng, d, -3.0, 3.0)).unwrap());
        v
    }

    #[test]
    fn names_round_trip() {
        for kind in ProblemKind::BENCHMARKS.iter().chain([ProblemKind::Quadratic].iter()) {
            assert_eq!(kind.name().parse::<ProblemKind>().unwrap(), *kind);
        }
        assert!("sphere".parse::<ProblemKind>().is_err());
    }

    #[test]
    fn dimension_rules() {
        assert!(Problem::benchmark(ProblemKind::Rosenbrock, 1).is_err());
        assert!(Problem::benchmark(ProblemKind::DixonPrice, 1).is_err());
        assert!(Problem::benchmark(ProblemKind::Powell, 3).is_err());
        assert!(Problem::benchmark(ProblemKind::Qing, 1).is_ok());
        assert!(Problem::benchmark(ProblemKind::Quadratic, 2).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(Problem::quadratic(asym).is_err());
        assert!(Problem::new(ProblemKind::Qing, 2, Some(DMatrix::identity(2, 2))).is_err());
        let p = Problem::benchmark(ProblemKind::Qing, 3).unwrap();
        assert!(matches!(p.value(&DVector::zeros(2)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn known_values() {
        let p = Problem::benchmark(ProblemKind::Rosenbrock, 5).unwrap();
        let e = p.evaluate(&DVector::from_element(5, 1.0), 1).unwrap();
        assert_eq!(e.f, 0.0);
        assert_eq!(e.grad.unwrap().amax(), 0.0);

        let p = Problem::benchmark(ProblemKind::DixonPrice, 3).unwrap();
        assert_eq!(p.value(&DVector::from_element(3, 1.0)).unwrap(), 5.0);

        let p = Problem::benchmark(ProblemKind::Qing, 3).unwrap();
        let x = DVector::from_vec(vec![1.0, 2f64.sqrt(), 3f64.sqrt()]);
        let (f, g) = p.value_grad(&x).unwrap();
        assert!(f.abs() < 1e-28 && g.amax() < 1e-14);

        let p = Problem::benchmark(ProblemKind::Powell, 4).unwrap();
        let (f, g) = p.value_grad(&DVector::zeros(4)).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(g.amax(), 0.0);
    }

    #[test]
    fn powell_ignores_trailing_coordinates() {
        let p = Problem::benchmark(ProblemKind::Powell, 6).unwrap();
        let mut x = DVector::zeros(6);
        x[4] = 3.0;
        x[5] = -7.0;
        let (f, g) = p.value_grad(&x).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(g.amax(), 0.0);
        assert_eq!(p.hessian(&x).unwrap().rows(4, 2).amax(), 0.0);
    }

    #[test]
    fn minimizers_are_stationary() {
        for d in [2usize, 4, 10, 100] {
            for kind in ProblemKind::BENCHMARKS {
                if d < kind.min_dim() {
                    continue;
                }
                let p = Problem::benchmark(kind, d).unwrap();
                let g = p.gradient(p.minimizer()).unwrap();
                assert!(g.norm() <= 1e-8, "{kind} d={d}: {}", g.norm());
            }
        }
        let p = Problem::benchmark(ProblemKind::Qing, 4).unwrap();
        assert!(p.minimizer().iter().all(|&v| v > 0.0));
        let p = Problem::benchmark(ProblemKind::DixonPrice, 3).unwrap();
        assert_eq!(p.minimizer()[0], 1.0);
        assert!((p.minimizer()[1] - 2f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn minimizer_beats_perturbations() {
        let mut rng = RngState::new(4);
        for p in all_problems(6).into_iter().filter(|p| p.kind() != ProblemKind::Quadratic) {
            let f_star = p.value(p.minimizer()).unwrap();
            for _ in 0..1000 {
                let x = p.minimizer() + rng.normal_vector(6) * 0.01;
                assert!(f_star <= p.value(&x).unwrap(), "{}", p.name());
            }
        }
    }

    #[test]
    fn gradient_checker_examples() {
        let mut rng = RngState::new(17);
        let p = Problem::quadratic(DMatrix::identity(4, 4)).unwrap();
        assert!(p.check_gradient(&rng.normal_vector(4), 1e-5).unwrap() <= 1e-8);

        let p = Problem::benchmark(ProblemKind::Rosenbrock, 10).unwrap();
        let x = uniform_point(&mut rng, 10, -2.0, 2.0);
        assert!(p.check_gradient(&x, 1e-6).unwrap() <= 1e-5);

        let p = Problem::benchmark(ProblemKind::Powell, 8).unwrap();
        let x = rng.normal_vector(8);
        assert!(p.check_gradient(&x, 1e-6).unwrap() <= 1e-5);

        assert!(p.check_gradient(&x, 0.0).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let d = 9;
        let mut rng = RngState::new(2024);
        for p in all_problems(d) {
            for _ in 0..100 {
                let x = p.minimizer() + rng.normal_vector(d);
                let err = p.check_gradient(&x, 1e-6).unwrap();
                assert!(err <= 1e-5, "{} gradient error {err}", p.name());

                let h = p.hessian(&x).unwrap();
                assert_eq!(h, h.transpose());
                let step = 1e-5;
                for i in 0..d {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    let col = (p.gradient(&xp).unwrap() - p.gradient(&xm).unwrap()) / (2.0 * step);
                    for j in 0..d {
                        let rel = (h[(j, i)] - col[j]).abs() / h[(j, i)].abs().max(1.0);
                        assert!(rel <= 1e-4, "{} hessian ({j},{i}) error {rel}", p.name());
                    }
                }
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_centered() {
        let p = Problem::quadratic(DMatrix::identity(2, 2)).unwrap();
        let a = p.sample_initial(42);
        assert_eq!(a, p.sample_initial(42));
        let mut rng = RngState::new(42);
        assert_eq!(a[0].to_bits(), rng.next_normal().to_bits());
        assert_eq!(a[1].to_bits(), rng.next_normal().to_bits());

        let p = Problem::benchmark(ProblemKind::Qing, 3).unwrap();
        let n = 10_000;
        let mut mean = DVector::zeros(3);
        for seed in 0..n {
            mean += p.sample_initial(seed) - p.minimizer();
        }
        mean /= n as f64;
        assert!(mean.amax() < 0.05, "{mean}");
    }
}
