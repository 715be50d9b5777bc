//! Quartic-regularized quadratic model
//!
//! ```text
//! m(s) = ⟨g, s⟩ + ½⟨Bs, s⟩ + (σ/4)‖s‖⁴
//! ```
//!
//! solved to `‖∇m(s)‖ ≤ δ‖s‖`. For a shift `μ > -λ_min(B)` the step
//! `s(μ) = -(B + μI)⁻¹g` satisfies `∇m(s(μ)) = φ(μ) s(μ)` with
//! `φ(μ) = σ‖s(μ)‖² - μ`, so the problem reduces to a scalar root search on
//! the strictly decreasing function `φ`. When `g` has no component along the
//! bottom eigenspace and `φ` stays negative up to the pole, the minimizer is
//! built in closed form from the minimum eigenvector instead (hard case).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{solve_shifted, sym_eigen, SymEigen, SymTridiagonal};

/// Combined budget of bracketing and bisection steps.
pub const MAX_ITERS: usize = 200;

/// Relative floor on the root tolerance: `|φ(μ)| ≤ 1e-8 max(1, σ‖s‖²)`.
const MU_RTOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub g_lin: DVector<f64>,
    pub b: DMatrix<f64>,
    pub sigma: f64,
    pub delta: f64,
}

impl ModelInstance {
    pub fn new(g_lin: DVector<f64>, b: DMatrix<f64>, sigma: f64, delta: f64) -> Result<Self> {
        let inst = Self {
            g_lin,
            b,
            sigma,
            delta,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidInput(format!("delta must be positive, got {}", self.delta)));
        }
        if self.g_lin.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("model gradient has non-finite entries".into()));
        }
        let d = self.g_lin.len();
        if self.b.nrows() != d || self.b.ncols() != d {
            return Err(Error::InvalidInput(format!(
                "model matrix is {}x{} but the linear term has length {d}",
                self.b.nrows(),
                self.b.ncols()
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.g_lin.len()
    }

    pub fn value(&self, s: &DVector<f64>) -> f64 {
        let n2 = s.norm_squared();
        self.g_lin.dot(s) + 0.5 * s.dot(&(&self.b * s)) + 0.25 * self.sigma * n2 * n2
    }

    /// `g + Bs + σ‖s‖²s`.
    pub fn grad(&self, s: &DVector<f64>) -> DVector<f64> {
        &self.g_lin + &self.b * s + s * (self.sigma * s.norm_squared())
    }

    /// Whether `s` meets `‖∇m(s)‖ ≤ δ‖s‖` as computed.
    pub fn accepts(&self, s: &DVector<f64>) -> bool {
        self.grad(s).norm() <= self.delta * s.norm()
    }
}

/// Free-function form of [`ModelInstance::grad`].
pub fn model_grad(inst: &ModelInstance, s: &DVector<f64>) -> DVector<f64> {
    inst.grad(s)
}

#[derive(Debug, Clone)]
pub struct SubproblemSolution {
    pub s: DVector<f64>,
    /// Shift at acceptance; equals σ‖s‖² up to the root tolerance.
    pub mu: f64,
    pub hard_case: bool,
    pub phi_at_mu: f64,
    pub iterations: usize,
}

/// `φ(μ) = σ Σ g̃ᵢ²/(λᵢ+μ)² - μ` with `g̃ = Vᵀg`.
pub fn phi(eig: &SymEigen, g: &DVector<f64>, sigma: f64, mu: f64) -> Result<f64> {
    let lambda_min = eig.lambda_min();
    if mu + lambda_min <= 0.0 {
        return Err(Error::ShiftNotPositive { mu, lambda_min });
    }
    let coords = eig.project(g);
    let sum: f64 = coords
        .iter()
        .zip(eig.eigenvalues.iter())
        .map(|(c, l)| {
            let t = c / (l + mu);
            t * t
        })
        .sum();
    Ok(sigma * sum - mu)
}

/// The secular function parametrized by the offset `τ = μ - base` from
/// `base = max(0, -λ_min)`, so that the pole at `μ = -λ_min` sits exactly
/// at `τ = 0`.
trait Secular {
    fn base(&self) -> f64;

    /// Returns `(φ, σ‖s‖²)` at offset `tau`.
    fn eval(&self, tau: f64) -> (f64, f64);

    fn derivative(&self, tau: f64) -> f64;

    fn step(&self, tau: f64) -> DVector<f64>;

    /// A few Newton steps on φ from an accepted offset, kept strictly inside
    /// `bracket` and only while `|φ|` keeps shrinking.
    fn polish(&self, mut tau: f64, mut phi: f64, bracket: (f64, f64)) -> (f64, f64) {
        for _ in 0..3 {
            if phi == 0.0 {
                break;
            }
            let next = tau - phi / self.derivative(tau);
            if !(next > bracket.0 && next < bracket.1) {
                break;
            }
            let (phi_next, _) = self.eval(next);
            if !(phi_next.abs() < phi.abs()) {
                break;
            }
            tau = next;
            phi = phi_next;
        }
        (tau, phi)
    }

    /// Polishes the root at `tau` and returns the solution if the resulting
    /// step passes the computed acceptance test.
    fn accept(
        &self,
        inst: &ModelInstance,
        best: &mut Best,
        tau: f64,
        phi: f64,
        bracket: (f64, f64),
        iterations: usize,
    ) -> Option<SubproblemSolution> {
        let (polished, phi_polished) = self.polish(tau, phi, bracket);
        let candidates = [(polished, phi_polished), (tau, phi)];
        let skip = usize::from(polished == tau);
        for &(t, p) in &candidates[..2 - skip] {
            let s = self.step(t);
            if best.offer(inst, &s) {
                return Some(SubproblemSolution {
                    s,
                    mu: self.base() + t,
                    hard_case: false,
                    phi_at_mu: p,
                    iterations,
                });
            }
        }
        None
    }
}

/// φ in the eigenbasis of `B`.
struct EigenSecular<'a> {
    eig: &'a SymEigen,
    coords: DVector<f64>,
    shifted: Vec<f64>,
    base: f64,
    sigma: f64,
}

impl<'a> EigenSecular<'a> {
    fn new(eig: &'a SymEigen, g: &DVector<f64>, sigma: f64) -> Self {
        let base = (-eig.lambda_min()).max(0.0);
        Self {
            eig,
            coords: eig.project(g),
            shifted: eig.eigenvalues.iter().map(|l| l + base).collect(),
            base,
            sigma,
        }
    }
}

impl Secular for EigenSecular<'_> {
    fn base(&self) -> f64 {
        self.base
    }

    fn eval(&self, tau: f64) -> (f64, f64) {
        let n2: f64 = self
            .coords
            .iter()
            .zip(&self.shifted)
            .map(|(c, l)| {
                let t = c / (l + tau);
                t * t
            })
            .sum();
        let reg = self.sigma * n2;
        (reg - (self.base + tau), reg)
    }

    fn derivative(&self, tau: f64) -> f64 {
        let cubic: f64 = self
            .coords
            .iter()
            .zip(&self.shifted)
            .map(|(c, l)| {
                let q = l + tau;
                c * c / (q * q * q)
            })
            .sum();
        -2.0 * self.sigma * cubic - 1.0
    }

    fn step(&self, tau: f64) -> DVector<f64> {
        let scaled = DVector::from_iterator(
            self.coords.len(),
            self.coords.iter().zip(&self.shifted).map(|(c, l)| -c / (l + tau)),
        );
        &self.eig.eigenvectors * scaled
    }
}

/// φ through the tridiagonal form `B = Q T Qᵀ`: `‖(B+μI)⁻¹g‖ = ‖(T+μI)⁻¹Qᵀg‖`.
/// Where `T + μI` is numerically indefinite φ reads as `+∞`, which keeps
/// the search to the right of the pole.
struct TridiagSecular<'a> {
    tri: &'a SymTridiagonal,
    coords: DVector<f64>,
    base: f64,
    sigma: f64,
}

impl Secular for TridiagSecular<'_> {
    fn base(&self) -> f64 {
        self.base
    }

    fn eval(&self, tau: f64) -> (f64, f64) {
        match self.tri.solve_shifted_pd(self.base + tau, &self.coords) {
            Some(w) => {
                let reg = self.sigma * w.norm_squared();
                (reg - (self.base + tau), reg)
            }
            None => (f64::INFINITY, f64::INFINITY),
        }
    }

    fn derivative(&self, tau: f64) -> f64 {
        let mu = self.base + tau;
        let Some(w) = self.tri.solve_shifted_pd(mu, &self.coords) else {
            return f64::NAN;
        };
        let Some(z) = self.tri.solve_shifted_pd(mu, &w) else {
            return f64::NAN;
        };
        -2.0 * self.sigma * w.dot(&z) - 1.0
    }

    fn step(&self, tau: f64) -> DVector<f64> {
        match self.tri.solve_shifted_pd(self.base + tau, &self.coords) {
            Some(w) => -(&self.tri.q * w),
            None => DVector::from_element(self.coords.len(), f64::NAN),
        }
    }
}

/// Tracks the step with the smallest `‖∇m(s)‖/‖s‖` seen so far.
struct Best {
    s: Option<DVector<f64>>,
    ratio: f64,
}

impl Best {
    fn new() -> Self {
        Self {
            s: None,
            ratio: f64::INFINITY,
        }
    }

    fn offer(&mut self, inst: &ModelInstance, s: &DVector<f64>) -> bool {
        let sn = s.norm();
        let gn = inst.grad(s).norm();
        let ratio = if sn > 0.0 { gn / sn } else { f64::INFINITY };
        if ratio < self.ratio || (self.s.is_none() && !ratio.is_nan()) {
            self.ratio = ratio;
            self.s = Some(s.clone());
        }
        gn <= inst.delta * sn
    }
}

enum Search {
    Found(SubproblemSolution),
    /// `φ ≤ 0` already next to the pole; carries `(lo_offset, φ(lo_offset))`.
    NonPositiveAtPole(f64, f64),
    Stalled(usize),
}

/// Brackets the root of φ to the right of the pole by doubling, then
/// bisects until an offset passes the acceptance test.
fn search<S: Secular>(inst: &ModelInstance, sec: &S, best: &mut Best, lambda_min: f64) -> Search {
    let root_tol = |reg: f64| inst.delta.min(MU_RTOL * reg.max(1.0));
    let lo_offset = 1e-12 * (1.0 + lambda_min.abs());
    let (phi_lo, _) = sec.eval(lo_offset);
    if phi_lo <= 0.0 {
        return Search::NonPositiveAtPole(lo_offset, phi_lo);
    }

    let mut iterations = 0;
    let mut hi_mu = (sec.base() + lo_offset).max(1.0);
    let mut hi = hi_mu - sec.base();
    let (mut phi_hi, mut reg_hi) = sec.eval(hi);
    while phi_hi >= 0.0 {
        iterations += 1;
        if phi_hi <= root_tol(reg_hi) {
            if let Some(sol) = sec.accept(inst, best, hi, phi_hi, (lo_offset, f64::INFINITY), iterations) {
                return Search::Found(sol);
            }
        }
        if iterations >= MAX_ITERS {
            return Search::Stalled(iterations);
        }
        hi_mu *= 2.0;
        hi = hi_mu - sec.base();
        (phi_hi, reg_hi) = sec.eval(hi);
    }

    let mut lo = lo_offset;
    let mut phi_lo = phi_lo;
    if phi_hi.abs() <= root_tol(reg_hi) {
        if let Some(sol) = sec.accept(inst, best, hi, phi_hi, (lo, hi), iterations) {
            return Search::Found(sol);
        }
    }
    while iterations < MAX_ITERS {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (phi_mid, reg_mid) = sec.eval(mid);
        if phi_mid.abs() <= root_tol(reg_mid) {
            if let Some(sol) = sec.accept(inst, best, mid, phi_mid, (lo, hi), iterations) {
                return Search::Found(sol);
            }
        }
        if phi_mid > 0.0 {
            lo = mid;
            phi_lo = phi_mid;
        } else {
            hi = mid;
            phi_hi = phi_mid;
        }
    }

    // The bracket collapsed to adjacent floats without reaching the relative
    // floor (a very steep φ next to the pole). Fall back to the plain
    // acceptance contract at the better endpoint.
    let (tau, phi_end) = if phi_lo.abs() < phi_hi.abs() {
        (lo, phi_lo)
    } else {
        (hi, phi_hi)
    };
    if phi_end.abs() <= inst.delta {
        if let Some(sol) = sec.accept(inst, best, tau, phi_end, (lo, hi), iterations) {
            return Search::Found(sol);
        }
    }
    Search::Stalled(iterations)
}

/// Solves the model problem. The common case runs on a tridiagonal
/// reduction of `B`; the hard case and any numerical trouble there are
/// handled by [`solve_with_eigen`].
pub fn solve(inst: &ModelInstance) -> Result<SubproblemSolution> {
    inst.validate()?;
    let tri = SymTridiagonal::new(&inst.b)?;
    let lambda_min = tri.lambda_min();
    if inst.g_lin.iter().any(|&v| v != 0.0) {
        let sec = TridiagSecular {
            coords: tri.q.tr_mul(&inst.g_lin),
            tri: &tri,
            base: (-lambda_min).max(0.0),
            sigma: inst.sigma,
        };
        if let Search::Found(sol) = search(inst, &sec, &mut Best::new(), lambda_min) {
            return Ok(sol);
        }
    }
    let eig = sym_eigen(&inst.b)?;
    solve_with_eigen(inst, &eig)
}

/// Solves the model problem from a precomputed eigendecomposition of `inst.b`.
pub fn solve_with_eigen(inst: &ModelInstance, eig: &SymEigen) -> Result<SubproblemSolution> {
    inst.validate()?;
    let d = inst.dim();
    let lambda_min = eig.lambda_min();

    if lambda_min >= 0.0 && inst.g_lin.iter().all(|&v| v == 0.0) {
        return Ok(SubproblemSolution {
            s: DVector::zeros(d),
            mu: 0.0,
            hard_case: false,
            phi_at_mu: 0.0,
            iterations: 0,
        });
    }

    let sec = EigenSecular::new(eig, &inst.g_lin, inst.sigma);
    let mut best = Best::new();
    match search(inst, &sec, &mut best, lambda_min) {
        Search::Found(sol) => Ok(sol),
        Search::Stalled(iterations) => Err(stalled(best, iterations)),
        Search::NonPositiveAtPole(lo_offset, phi_lo) => {
            if lambda_min < 0.0 {
                if let Some(sol) = hard_case(inst, eig, &mut best) {
                    return Ok(sol);
                }
            }
            // Either the root lies inside (base, base + lo_offset] or the
            // closed form failed the computed check; the pole-side endpoint
            // is the only remaining candidate.
            if phi_lo.abs() <= inst.delta {
                if let Some(sol) = sec.accept(inst, &mut best, lo_offset, phi_lo, (0.0, lo_offset), 1) {
                    return Ok(sol);
                }
            }
            Err(stalled(best, 1))
        }
    }
}

/// Closed-form minimizer `s = s_⊥ + α v_min` with
/// `s_⊥ = -(B - λ_min I)† g` and `α = √(-λ_min/σ - ‖s_⊥‖²)`.
fn hard_case(inst: &ModelInstance, eig: &SymEigen, best: &mut Best) -> Option<SubproblemSolution> {
    let lambda_min = eig.lambda_min();
    let mu = -lambda_min;
    let s_perp = solve_shifted(eig, &inst.g_lin, mu, true).ok()?;
    let slack = mu / inst.sigma - s_perp.norm_squared();
    if slack < 0.0 {
        return None;
    }
    let s = s_perp + eig.min_eigenvector() * slack.sqrt();
    if !best.offer(inst, &s) {
        return None;
    }
    let phi_at_mu = inst.sigma * s.norm_squared() - mu;
    Some(SubproblemSolution {
        s,
        mu,
        hard_case: true,
        phi_at_mu,
        iterations: 1,
    })
}

fn stalled(best: Best, iterations: usize) -> Error {
    let d = best.s.as_ref().map_or(0, |s| s.len());
    Error::SolverStalled {
        iterations,
        best: best.s.unwrap_or_else(|| DVector::zeros(d)),
        best_ratio: best.ratio,
    }
}
