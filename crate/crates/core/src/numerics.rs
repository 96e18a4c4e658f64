//! Dense positive-(semi)definite linear algebra and seeded Gaussian sampling.
//!
//! Every `(·)⁻¹` in the regression formulas is realized through a Cholesky
//! factor. Factorization never escalates jitter on its own: it tries the
//! matrix as given and then, only if the caller supplied one, the jittered
//! matrix. Equivalence checks between the regressors rely on all of them
//! sharing this exact arithmetic.

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Asymmetry above which symmetrization logs a warning.
pub const ASYMMETRY_WARN: f64 = 1e-10;

/// Relative asymmetry accepted by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Largest diagonal jitter [`mvn_sample`] may add to a covariance.
pub const SAMPLING_JITTER: f64 = 1e-8;

/// Largest absolute entry of a matrix (0 for an empty matrix).
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest absolute entrywise difference between two equally sized matrices.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Largest `|m_ij - m_ji|`; `None` when the matrix is not square.
pub fn max_asymmetry(m: &DMatrix<f64>) -> Option<f64> {
    if !m.is_square() {
        return None;
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    Some(worst)
}

/// A finite, square, symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Accepts `m` if it is square, finite and symmetric to within
    /// [`SYMMETRY_TOL`] relative to its largest entry.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        check_finite(&m)?;
        let asym = max_asymmetry(&m).ok_or(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        })?;
        if asym > SYMMETRY_TOL * (1.0 + max_abs(&m)) {
            return Err(Error::NotSymmetric { max_asymmetry: asym });
        }
        Ok(Self(symmetrize(m)))
    }

    /// Replaces `m` by `(m + mᵀ)/2`, warning when the discarded asymmetry
    /// exceeds [`ASYMMETRY_WARN`].
    pub fn symmetrized(m: DMatrix<f64>) -> Result<Self> {
        check_finite(&m)?;
        let asym = max_asymmetry(&m).ok_or(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        })?;
        if asym > ASYMMETRY_WARN {
            log::warn!("symmetrizing matrix with asymmetry {asym:e}");
        }
        Ok(Self(symmetrize(m)))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl AsRef<DMatrix<f64>> for SymMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("matrix entry".into()))
    }
}

/// Lower Cholesky factor `L` of `m + jitter·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholFactor {
    lower: DMatrix<f64>,
    jitter: f64,
}

impl CholFactor {
    pub fn order(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// Diagonal jitter that was needed for the factorization to succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `L·Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.lower * self.lower.transpose()
    }

    pub fn min_diagonal(&self) -> f64 {
        self.lower.diagonal().min()
    }

    /// Solves `L·Lᵀ·X = B`.
    pub fn solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        psd_solve(self, b)
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_rows(b.nrows())?;
        let half = self.lower.solve_lower_triangular(b).ok_or(Error::SingularMatrix)?;
        self.lower
            .tr_solve_lower_triangular(&half)
            .ok_or(Error::SingularMatrix)
    }

    /// Solves `L·W = B` only; `‖W‖²` columnwise gives the quadratic forms
    /// `bᵀ(L·Lᵀ)⁻¹b` without cancellation.
    pub fn half_solve(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(b.nrows())?;
        self.lower.solve_lower_triangular(b).ok_or(Error::SingularMatrix)
    }

    /// `bᵀ(L·Lᵀ)⁻¹b`.
    pub fn quad_form(&self, b: &DVector<f64>) -> Result<f64> {
        self.check_rows(b.nrows())?;
        let w = self.lower.solve_lower_triangular(b).ok_or(Error::SingularMatrix)?;
        Ok(w.norm_squared())
    }

    /// `(L·Lᵀ)⁻¹`, by solving against the identity and symmetrizing.
    pub fn inverse(&self) -> Result<DMatrix<f64>> {
        let n = self.order();
        let inv = self.solve(&DMatrix::identity(n, n))?;
        Ok(symmetrize(inv))
    }

    pub fn logdet(&self) -> f64 {
        psd_logdet(self)
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                found: rows,
            });
        }
        Ok(())
    }
}

/// Plain Cholesky. A pivot fails unless it exceeds `n·ε` times its diagonal
/// entry, so rank deficiency is not hidden by round-off.
fn cholesky_lower(m: &DMatrix<f64>, jitter: f64) -> std::result::Result<DMatrix<f64>, usize> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let diag = m[(j, j)] + jitter;
        let mut d = diag;
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > n as f64 * f64::EPSILON * diag.abs()) || !d.is_finite() {
            return Err(j);
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Cholesky factor of `m`, retrying once with `m + jitter·I` when the plain
/// factorization fails and `jitter > 0`.
pub fn psd_factorize(m: &SymMatrix, jitter: f64) -> Result<CholFactor> {
    if !(jitter >= 0.0) || !jitter.is_finite() {
        return Err(Error::InvalidParameter(format!("jitter {jitter} must be >= 0")));
    }
    match cholesky_lower(m.matrix(), 0.0) {
        Ok(lower) => Ok(CholFactor { lower, jitter: 0.0 }),
        Err(pivot) if jitter == 0.0 => Err(Error::NotPositiveDefinite { pivot }),
        Err(_) => cholesky_lower(m.matrix(), jitter)
            .map(|lower| CholFactor { lower, jitter })
            .map_err(|pivot| Error::NotPositiveDefinite { pivot }),
    }
}

/// Solves `(L·Lᵀ)·X = B`.
pub fn psd_solve(f: &CholFactor, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    f.check_rows(b.nrows())?;
    let half = f.lower.solve_lower_triangular(b).ok_or(Error::SingularMatrix)?;
    f.lower
        .tr_solve_lower_triangular(&half)
        .ok_or(Error::SingularMatrix)
}

/// `log det(L·Lᵀ) = 2·Σ log L_ii`.
pub fn psd_logdet(f: &CholFactor) -> f64 {
    2.0 * f.lower.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// Square root `R` with `R·Rᵀ = m` for a positive *semi*definite `m`.
///
/// Pivots within `tol` of zero get a zero column; a pivot below `-tol`
/// means `m` is indefinite.
fn semidefinite_root(m: &DMatrix<f64>, tol: f64) -> std::result::Result<DMatrix<f64>, usize> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !d.is_finite() || d < -tol {
            return Err(j);
        }
        if d <= tol {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Tolerance used to decide that a covariance pivot is zero.
fn zero_pivot_tol(m: &DMatrix<f64>) -> f64 {
    let scale = m.diagonal().iter().fold(1.0_f64, |a, d| a.max(d.abs()));
    1e-12 * scale
}

/// True when `m` is positive semidefinite up to round-off.
pub fn is_positive_semidefinite(m: &SymMatrix) -> bool {
    semidefinite_root(m.matrix(), zero_pivot_tol(m.matrix())).is_ok()
}

/// Seeded random stream; identical seeds give bit-identical draws.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    rng: ChaCha8Rng,
}

impl SeededRng {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn algorithm(&self) -> &'static str {
        Self::ALGORITHM
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(&mut self.rng)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// How a sampling covariance was factored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingRoot {
    /// Plain Cholesky succeeded.
    Cholesky,
    /// Rank-deficient covariance; zero pivots were dropped.
    Semidefinite,
    /// Cholesky of `cov + jitter·I`.
    Jittered(f64),
}

impl SamplingRoot {
    pub fn jitter(&self) -> f64 {
        match self {
            SamplingRoot::Jittered(j) => *j,
            _ => 0.0,
        }
    }
}

/// Draws from a multivariate normal: one draw per row.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDraws {
    pub draws: DMatrix<f64>,
    pub root: SamplingRoot,
}

/// Square root of a sampling covariance: Cholesky, then the semidefinite
/// root, then Cholesky with [`SAMPLING_JITTER`].
pub fn sampling_root(cov: &SymMatrix) -> Result<(DMatrix<f64>, SamplingRoot)> {
    if let Ok(l) = cholesky_lower(cov.matrix(), 0.0) {
        return Ok((l, SamplingRoot::Cholesky));
    }
    if let Ok(l) = semidefinite_root(cov.matrix(), zero_pivot_tol(cov.matrix())) {
        return Ok((l, SamplingRoot::Semidefinite));
    }
    match cholesky_lower(cov.matrix(), SAMPLING_JITTER) {
        Ok(l) => {
            log::warn!("sampling covariance needed jitter {SAMPLING_JITTER:e}");
            Ok((l, SamplingRoot::Jittered(SAMPLING_JITTER)))
        }
        Err(pivot) => Err(Error::NotPositiveDefinite { pivot }),
    }
}

/// `count` draws `mean + L·z`, `z ~ N(0, I)`, returned as rows.
pub fn mvn_sample(
    mean: &DVector<f64>,
    cov: &SymMatrix,
    rng: &mut SeededRng,
    count: usize,
) -> Result<GaussianDraws> {
    let dim = mean.len();
    if cov.order() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: cov.order(),
        });
    }
    let (root, kind) = sampling_root(cov)?;
    let mut draws = DMatrix::<f64>::zeros(count, dim);
    let mut z = DVector::<f64>::zeros(dim);
    for s in 0..count {
        for zi in z.iter_mut() {
            *zi = rng.standard_normal();
        }
        let x = mean + &root * &z;
        draws.set_row(s, &x.transpose());
    }
    Ok(GaussianDraws { draws, root: kind })
}

/// `(Z + U·L·Vᵀ)⁻¹` evaluated through the matrix inversion lemma
/// `Z⁻¹ − Z⁻¹U(L⁻¹ + VᵀZ⁻¹U)⁻¹VᵀZ⁻¹`.
///
/// `Z` (n×n) and `L` (k×k) must be positive definite; `U` and `V` are n×k.
pub fn woodbury_inverse(
    z: &SymMatrix,
    u: &DMatrix<f64>,
    l: &SymMatrix,
    v: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = z.order();
    let k = l.order();
    for m in [u, v] {
        if m.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: m.nrows(),
            });
        }
        if m.ncols() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: m.ncols(),
            });
        }
    }
    let z_inv = psd_factorize(z, 0.0)?.inverse()?;
    let l_inv = psd_factorize(l, 0.0)?.inverse()?;
    let z_inv_u = &z_inv * u;
    let vt_z_inv = v.transpose() * &z_inv;
    let inner = l_inv + v.transpose() * &z_inv_u;
    let rhs = inner.lu().solve(&vt_z_inv).ok_or(Error::SingularMatrix)?;
    Ok(&z_inv - z_inv_u * rhs)
}

/// Relative tolerance for round-off negativity in predictive variances.
pub const VARIANCE_CLAMP: f64 = 1e-10;

/// Clamps `prior − reduction` at zero. Negativity beyond
/// `VARIANCE_CLAMP·max(1, prior)` is an error.
pub fn clamp_variance(prior: f64, reduction: f64) -> Result<f64> {
    let var = prior - reduction;
    if var >= 0.0 {
        return Ok(var);
    }
    if var < -VARIANCE_CLAMP * prior.abs().max(1.0) || var.is_nan() {
        return Err(Error::NegativeVariance(var));
    }
    log::warn!("clamping predictive variance {var:e} to zero");
    Ok(0.0)
}

/// Central-difference gradient `(f(x+h·e_i) − f(x−h·e_i)) / 2h`.
pub fn finite_diff_grad<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step {h} must be > 0")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFiniteObjective(x.to_vec()));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}
