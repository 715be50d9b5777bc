//! Scaled Powell-symmetric-Broyden update and the γ-potential used to
//! track how well `B` tracks the true Hessian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::frobenius_inner;

/// Squared step norms below this are treated as a zero step.
const MIN_STEP_NORM_SQ: f64 = 1e-300;

/// Relative threshold `‖s‖ ≤ 1e-14 max(1, ‖x‖)` under which the optimizer
/// skips the rank-2 term and only rescales `B`.
pub const ZERO_STEP_RTOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsbDiagnostics {
    pub gamma: f64,
    /// `‖r‖²/‖s‖²`, zero for a zero step.
    pub rho: f64,
    pub l_op: Option<f64>,
    pub m_lip: Option<f64>,
}

/// `r = ∇f(x⁺) - ∇f(x) - B s`.
pub fn residual(grad_next: &DVector<f64>, grad_cur: &DVector<f64>, b: &DMatrix<f64>, s: &DVector<f64>) -> DVector<f64> {
    grad_next - grad_cur - b * s
}

/// Symmetric rank-2 correction `(rsᵀ + srᵀ)/‖s‖² - (⟨r,s⟩/‖s‖⁴) ssᵀ`,
/// filled from the upper triangle so the result is exactly symmetric.
fn rank2_term(r: &DVector<f64>, s: &DVector<f64>) -> Result<DMatrix<f64>> {
    if r.len() != s.len() {
        return Err(Error::InvalidInput("residual and step lengths differ".into()));
    }
    let ss = s.norm_squared();
    if !(ss >= MIN_STEP_NORM_SQ) {
        return Err(Error::ZeroStep);
    }
    let rs = r.dot(s) / (ss * ss);
    let d = s.len();
    let mut x = DMatrix::zeros(d, d);
    for j in 0..d {
        for i in 0..=j {
            let v = (r[i] * s[j] + s[i] * r[j]) / ss - rs * s[i] * s[j];
            x[(i, j)] = v;
            x[(j, i)] = v;
        }
    }
    Ok(x)
}

/// The minimizer `X` of `‖X‖²_F - 2⟨X, G - B⟩` over `X = vsᵀ + svᵀ` given
/// `(G - B)s = r`, together with the optimal value
/// `⟨r,s⟩²/‖s‖⁴ - 2‖r‖²/‖s‖²`.
pub fn optimal_rank2(r: &DVector<f64>, s: &DVector<f64>) -> Result<(DMatrix<f64>, f64)> {
    let x = rank2_term(r, s)?;
    let ss = s.norm_squared();
    let rs = r.dot(s);
    let value = rs * rs / (ss * ss) - 2.0 * r.norm_squared() / ss;
    Ok((x, value))
}

/// `B' = ((1-θ)/(1+θ)) (B + X)` with `X` the PSB rank-2 term.
pub fn scaled_psb_update(b: &DMatrix<f64>, s: &DVector<f64>, r: &DVector<f64>, theta: f64) -> Result<DMatrix<f64>> {
    check_theta(theta)?;
    if b.nrows() != s.len() || b.ncols() != s.len() {
        return Err(Error::InvalidInput("matrix and step dimensions differ".into()));
    }
    let x = rank2_term(r, s)?;
    Ok((b + x) * scale_factor(theta))
}

/// `(1-θ)/(1+θ)`.
pub fn scale_factor(theta: f64) -> f64 {
    (1.0 - theta) / (1.0 + theta)
}

fn check_theta(theta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::InvalidInput(format!("theta must lie in [0, 1), got {theta}")));
    }
    Ok(())
}

/// Outcome of [`apply_update`].
#[derive(Debug, Clone)]
pub struct UpdateOutcome {
    pub b_next: DMatrix<f64>,
    /// The rank-2 term that was added, `None` when the step was treated as zero.
    pub correction: Option<DMatrix<f64>>,
}

/// Update used inside the optimizer: the scaled PSB step, or pure scaling
/// when `‖s‖ ≤ 1e-14 max(1, ‖x‖)`.
pub fn apply_update(b: &DMatrix<f64>, s: &DVector<f64>, r: &DVector<f64>, theta: f64, x_norm: f64) -> Result<UpdateOutcome> {
    check_theta(theta)?;
    let c = scale_factor(theta);
    if s.norm() <= ZERO_STEP_RTOL * x_norm.max(1.0) || s.norm_squared() < MIN_STEP_NORM_SQ {
        return Ok(UpdateOutcome {
            b_next: b * c,
            correction: None,
        });
    }
    let x = rank2_term(r, s)?;
    Ok(UpdateOutcome {
        b_next: (b + &x) * c,
        correction: Some(x),
    })
}

/// `γ = ‖B - H‖²_F - ‖H‖²_F + θ/(1-θ) ‖B‖²_F`.
pub fn gamma(b: &DMatrix<f64>, h_true: &DMatrix<f64>, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    if b.shape() != h_true.shape() {
        return Err(Error::InvalidInput("matrix shapes differ".into()));
    }
    Ok((b - h_true).norm_squared() - h_true.norm_squared() + theta / (1.0 - theta) * b.norm_squared())
}

/// `‖X‖²_F - 2⟨X, G - B⟩`, the X-dependent part of the γ increment bound.
pub fn increment_term(x: &DMatrix<f64>, g_avg: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    x.norm_squared() - 2.0 * frobenius_inner(x, &(g_avg - b))
}

/// `‖r‖²/‖s‖²` with the zero-step convention.
pub fn rho(r: &DVector<f64>, s: &DVector<f64>) -> f64 {
    let ss = s.norm_squared();
    if ss < MIN_STEP_NORM_SQ {
        0.0
    } else {
        r.norm_squared() / ss
    }
}
