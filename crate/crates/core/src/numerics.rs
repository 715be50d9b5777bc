//! Dense numeric services: symmetric eigendecomposition, shifted solves in
//! the eigenbasis, Hessian averaging along a segment, and a seeded normal
//! generator that reproduces bit-for-bit across platforms.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative cutoff below which a shifted eigenvalue counts as zero in the
/// pseudo-inverse solve.
pub const NULL_SPACE_RTOL: f64 = 1e-12;

/// Default Simpson panel count for diagnostics.
pub const DEFAULT_SIMPSON_PANELS: usize = 32;

fn check_symmetric_input(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidInput(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    if a.nrows() == 0 {
        return Err(Error::InvalidInput("empty matrix".into()));
    }
    Ok(())
}

/// Eigendecomposition `A = V diag(λ) Vᵀ` with eigenvalues ascending.
///
/// Each eigenvector is sign-normalized so that its largest-magnitude entry is
/// positive, which makes the decomposition deterministic for simple spectra.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymEigen {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// Unit eigenvector for the smallest eigenvalue.
    pub fn min_eigenvector(&self) -> DVector<f64> {
        self.eigenvectors.column(0).into_owned()
    }

    /// Coordinates of `g` in the eigenbasis, `Vᵀ g`.
    pub fn project(&self, g: &DVector<f64>) -> DVector<f64> {
        self.eigenvectors.tr_mul(g)
    }

    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (j, lambda) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*lambda);
        }
        scaled * self.eigenvectors.transpose()
    }
}

/// Symmetric eigendecomposition of `a`, symmetrized as `(A + Aᵀ)/2` first.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<SymEigen> {
    check_symmetric_input(a)?;
    let d = a.nrows();
    let sym = (a + a.transpose()) * 0.5;
    let raw = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| raw.eigenvalues[i].total_cmp(&raw.eigenvalues[j]));

    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&i| raw.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = raw.eigenvectors.column(src).into_owned();
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        eigenvectors.set_column(dst, &col);
    }
    Ok(SymEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Returns `s = -(B + μI)⁻¹ g` using the eigendecomposition of `B`.
///
/// With `pseudo` set, components whose shifted eigenvalue satisfies
/// `|λ_i + μ| <= 1e-12 max(1, |λ_max|)` are dropped (Moore–Penrose solve).
pub fn solve_shifted(eig: &SymEigen, g: &DVector<f64>, mu: f64, pseudo: bool) -> Result<DVector<f64>> {
    if g.len() != eig.dim() {
        return Err(Error::InvalidInput(format!(
            "vector length {} does not match matrix dimension {}",
            g.len(),
            eig.dim()
        )));
    }
    let lambda_min = eig.lambda_min();
    if !pseudo && mu + lambda_min <= 0.0 {
        return Err(Error::ShiftNotPositive { mu, lambda_min });
    }
    let cutoff = NULL_SPACE_RTOL * eig.lambda_max().abs().max(1.0);
    let coords = eig.project(g);
    let scaled = DVector::from_iterator(
        coords.len(),
        coords.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| {
            let shifted = l + mu;
            if pseudo && shifted.abs() <= cutoff {
                0.0
            } else {
                -c / shifted
            }
        }),
    );
    Ok(&eig.eigenvectors * scaled)
}

/// Composite Simpson approximation of `∫₀¹ H(x + τ s) dτ`.
pub fn hessian_path_average<F>(hess: F, x: &DVector<f64>, s: &DVector<f64>, n_panels: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> DMatrix<f64>,
{
    if n_panels < 2 || n_panels % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "Simpson rule needs an even panel count >= 2, got {n_panels}"
        )));
    }
    if x.len() != s.len() {
        return Err(Error::InvalidInput("point and direction lengths differ".into()));
    }
    let d = x.len();
    let h = 1.0 / n_panels as f64;
    let mut acc = DMatrix::zeros(d, d);
    for j in 0..=n_panels {
        let weight = if j == 0 || j == n_panels {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let tau = j as f64 * h;
        let point = x + s * tau;
        let hj = hess(&point);
        if hj.nrows() != d || hj.ncols() != d {
            return Err(Error::InvalidInput("Hessian callback returned wrong shape".into()));
        }
        if hj.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite Hessian at tau = {tau}")));
        }
        acc += hj * weight;
    }
    acc *= h / 3.0;
    Ok((&acc + acc.transpose()) * 0.5)
}

/// SplitMix64 state with a cached Box–Muller spare.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RngState {
    pub state: u64,
    pub cached_normal: Option<f64>,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            cached_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in (0, 1) with 53 bits of resolution; zero is rejected.
    pub fn next_uniform(&mut self) -> f64 {
        loop {
            let u = (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Standard normal via Box–Muller; the second value of each pair is
    /// cached and returned by the following call.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        // libm rather than the platform math library: transcendental results
        // must not vary between targets.
        let radius = (-2.0 * libm::log(u1)).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }

    pub fn normal_vector(&mut self, d: usize) -> DVector<f64> {
        DVector::from_iterator(d, (0..d).map(|_| self.next_normal()))
    }
}

/// Functional form of [`RngState::next_normal`].
pub fn rng_next_normal(state: RngState) -> (RngState, f64) {
    let mut next = state;
    let z = next.next_normal();
    (next, z)
}

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// Gaussian matrix (column signs fixed by the diagonal of R).
pub fn random_orthogonal(rng: &mut RngState, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.next_normal());
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Symmetric matrix `Q diag(λ) Qᵀ` with eigenvalues drawn uniformly from
/// `[lo, hi]` and a random orthogonal `Q`.
pub fn random_symmetric_with_spectrum(rng: &mut RngState, d: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let q = random_orthogonal(rng, d);
    let mut scaled = q.clone();
    for j in 0..d {
        let lambda = lo + (hi - lo) * rng.next_uniform();
        scaled.column_mut(j).scale_mut(lambda);
    }
    let a = scaled * q.transpose();
    (&a + a.transpose()) * 0.5
}

/// Householder reduction `A = Q T Qᵀ` with `T` symmetric tridiagonal.
/// About a third of the cost of a full eigendecomposition; shifted solves
/// with `T` are O(d).
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    pub q: DMatrix<f64>,
    pub diagonal: DVector<f64>,
    /// `off_diagonal[i] = T[i+1, i]`.
    pub off_diagonal: DVector<f64>,
}

impl SymTridiagonal {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        check_symmetric_input(a)?;
        let sym = (a + a.transpose()) * 0.5;
        let (q, diagonal, off_diagonal) = nalgebra::linalg::SymmetricTridiagonal::new(sym).unpack();
        Ok(Self {
            q,
            diagonal,
            off_diagonal,
        })
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for i in 0..self.dim() {
            let e2 = if i == 0 { 0.0 } else { self.off_diagonal[i - 1].powi(2) };
            q = self.diagonal[i] - x - if i == 0 { 0.0 } else { e2 / q };
            if q == 0.0 {
                q = -f64::MIN_POSITIVE;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Smallest eigenvalue by bisection on the Sturm count, to a few ulps.
    pub fn lambda_min(&self) -> f64 {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let radius = if i > 0 { self.off_diagonal[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.off_diagonal[i].abs() } else { 0.0 };
            lo = lo.min(self.diagonal[i] - radius);
            hi = hi.max(self.diagonal[i] + radius);
        }
        let pad = f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        lo -= pad;
        hi += pad;
        for _ in 0..2100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
                break;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Solves `(T + μI) w = rhs` by an LDLᵀ sweep. Returns `None` if a
    /// pivot is not positive, i.e. `T + μI` is not numerically positive
    /// definite.
    pub fn solve_shifted_pd(&self, mu: f64, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.dim();
        let mut pivots = Vec::with_capacity(n);
        let mut w = rhs.clone();
        for i in 0..n {
            let mut p = self.diagonal[i] + mu;
            if i > 0 {
                let e = self.off_diagonal[i - 1];
                let l = e / pivots[i - 1];
                p -= l * e;
                w[i] -= l * w[i - 1];
            }
            if !(p > 0.0) {
                return None;
            }
            pivots.push(p);
        }
        w[n - 1] /= pivots[n - 1];
        for i in (0..n - 1).rev() {
            w[i] = (w[i] - self.off_diagonal[i] * w[i + 1]) / pivots[i];
        }
        Some(w)
    }
}

pub(crate) fn frobenius_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Operator 2-norm of a symmetric matrix.
pub fn sym_operator_norm(a: &DMatrix<f64>) -> Result<f64> {
    let eig = sym_eigen(a)?;
    Ok(eig.lambda_min().abs().max(eig.lambda_max().abs()))
}
