//! Kernel families, localized bases, design vectors and matrices, and the
//! dual kernel `ψ(x)ᵀ Σρ ψ(z)` induced by a Gaussian weight prior.
//!
//! Design matrices are laid out so that row `i` is the design vector of the
//! `i`-th training input: `Ψ[i][j] = ψ_j(x_i, x_j)`. The training-index
//! noise term `v2·δij` of the squared-exponential family is added only on the
//! diagonal of training design matrices, never for test inputs.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{max_asymmetry, psd_factorize, SymMatrix};

/// Asymmetry below which a design matrix counts as symmetric.
pub const DESIGN_SYMMETRY_TOL: f64 = 1e-10;

/// Inputs of integer-indexed kernels must be within this of an integer.
const INTEGER_TOL: f64 = 1e-9;

/// `L_p` norm used by the localized families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    L1,
    #[default]
    L2,
    Inf,
}

impl Norm {
    pub fn from_p(p: f64) -> Result<Self> {
        if p == 1.0 {
            Ok(Norm::L1)
        } else if p == 2.0 {
            Ok(Norm::L2)
        } else if p == f64::INFINITY {
            Ok(Norm::Inf)
        } else {
            Err(Error::InvalidParameter(format!("norm p={p} must be 1, 2 or inf")))
        }
    }

    pub fn p(self) -> f64 {
        match self {
            Norm::L1 => 1.0,
            Norm::L2 => 2.0,
            Norm::Inf => f64::INFINITY,
        }
    }

    pub fn distance(self, x: &[f64], z: &[f64]) -> f64 {
        let diffs = x.iter().zip(z).map(|(a, b)| (a - b).abs());
        match self {
            Norm::L1 => diffs.sum(),
            Norm::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Norm::Inf => diffs.fold(0.0, f64::max),
        }
    }
}

/// A parametrized kernel (or basis) family.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `a·exp(−‖x−z‖^β / λ) + v1 + v2·δij`.
    SquaredExpGeneral {
        a: f64,
        lambda: f64,
        beta: f64,
        v1: f64,
        v2: f64,
    },
    /// `exp(−‖x−z‖_p / λ)`.
    RadialExponential { lambda: f64, p: Norm },
    /// `1` if `‖x−z‖_p ≤ ε`, else `0`.
    Boxcar { epsilon: f64, p: Norm },
    /// `min{x, z}` on `x, z ≥ 0`.
    Wiener,
    /// `min{x, z} − x·z` on `[0, 1]`.
    BrownianBridge,
    /// `σ²/(2θ)·e^{−θ(x+z)}·(e^{2θ·min{x,z}} − 1)` on `x, z ≥ 0`.
    OrnsteinUhlenbeck {
        theta: f64,
        sigma: f64,
        mu0: f64,
        nu: f64,
    },
    /// `γ^{|t−t'|}·σv²/(1−γ²)` on integer time indices.
    Ar1Discrete { gamma: f64, process_var: f64 },
}

impl KernelSpec {
    /// Gaussian bump `a·exp(−‖x−z‖²/λ)`.
    pub fn squared_exponential(a: f64, lambda: f64) -> Self {
        KernelSpec::SquaredExpGeneral {
            a,
            lambda,
            beta: 2.0,
            v1: 0.0,
            v2: 0.0,
        }
    }

    pub const FAMILIES: [&'static str; 7] = [
        "squared-exp-general",
        "radial-exponential",
        "boxcar",
        "wiener",
        "brownian-bridge",
        "ornstein-uhlenbeck",
        "ar1-discrete",
    ];

    pub fn family(&self) -> &'static str {
        match self {
            KernelSpec::SquaredExpGeneral { .. } => "squared-exp-general",
            KernelSpec::RadialExponential { .. } => "radial-exponential",
            KernelSpec::Boxcar { .. } => "boxcar",
            KernelSpec::Wiener => "wiener",
            KernelSpec::BrownianBridge => "brownian-bridge",
            KernelSpec::OrnsteinUhlenbeck { .. } => "ornstein-uhlenbeck",
            KernelSpec::Ar1Discrete { .. } => "ar1-discrete",
        }
    }

    /// Builds a kernel from a family name and a flat parameter map.
    ///
    /// Optional parameters: `a` (1), `beta` (2), `v1` (0), `v2` (0), `p` (2),
    /// `mu0` (0), `nu` (0). Unknown names are rejected.
    pub fn from_params(family: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match family {
            "squared-exp-general" => &["a", "lambda", "beta", "v1", "v2"],
            "radial-exponential" => &["lambda", "p"],
            "boxcar" => &["epsilon", "p"],
            "wiener" | "brownian-bridge" => &[],
            "ornstein-uhlenbeck" => &["theta", "sigma", "mu0", "nu"],
            "ar1-discrete" => &["gamma", "process_var"],
            other => return Err(Error::InvalidParameter(format!("unknown kernel family {other:?}"))),
        };
        if let Some(bad) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!(
                "parameter {bad:?} is not used by {family}"
            )));
        }
        let get = |name: &str, default: Option<f64>| -> Result<f64> {
            params
                .get(name)
                .copied()
                .or(default)
                .ok_or_else(|| Error::InvalidParameter(format!("{family} needs parameter {name:?}")))
        };
        let spec = match family {
            "squared-exp-general" => KernelSpec::SquaredExpGeneral {
                a: get("a", Some(1.0))?,
                lambda: get("lambda", None)?,
                beta: get("beta", Some(2.0))?,
                v1: get("v1", Some(0.0))?,
                v2: get("v2", Some(0.0))?,
            },
            "radial-exponential" => KernelSpec::RadialExponential {
                lambda: get("lambda", None)?,
                p: Norm::from_p(get("p", Some(2.0))?)?,
            },
            "boxcar" => KernelSpec::Boxcar {
                epsilon: get("epsilon", None)?,
                p: Norm::from_p(get("p", Some(2.0))?)?,
            },
            "wiener" => KernelSpec::Wiener,
            "brownian-bridge" => KernelSpec::BrownianBridge,
            "ornstein-uhlenbeck" => KernelSpec::OrnsteinUhlenbeck {
                theta: get("theta", None)?,
                sigma: get("sigma", None)?,
                mu0: get("mu0", Some(0.0))?,
                nu: get("nu", Some(0.0))?,
            },
            _ => KernelSpec::Ar1Discrete {
                gamma: get("gamma", None)?,
                process_var: get("process_var", None)?,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Flat parameter map, the inverse of [`KernelSpec::from_params`].
    pub fn params(&self) -> BTreeMap<String, f64> {
        let pairs: Vec<(&str, f64)> = match *self {
            KernelSpec::SquaredExpGeneral { a, lambda, beta, v1, v2 } => {
                vec![("a", a), ("lambda", lambda), ("beta", beta), ("v1", v1), ("v2", v2)]
            }
            KernelSpec::RadialExponential { lambda, p } => vec![("lambda", lambda), ("p", p.p())],
            KernelSpec::Boxcar { epsilon, p } => vec![("epsilon", epsilon), ("p", p.p())],
            KernelSpec::Wiener | KernelSpec::BrownianBridge => vec![],
            KernelSpec::OrnsteinUhlenbeck { theta, sigma, mu0, nu } => {
                vec![("theta", theta), ("sigma", sigma), ("mu0", mu0), ("nu", nu)]
            }
            KernelSpec::Ar1Discrete { gamma, process_var } => {
                vec![("gamma", gamma), ("process_var", process_var)]
            }
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name}={v} must be > 0")))
            }
        }
        fn nonneg(name: &str, v: f64) -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name}={v} must be >= 0")))
            }
        }
        match *self {
            KernelSpec::SquaredExpGeneral { a, lambda, beta, v1, v2 } => {
                positive("a", a)?;
                positive("lambda", lambda)?;
                positive("beta", beta)?;
                nonneg("v1", v1)?;
                nonneg("v2", v2)
            }
            KernelSpec::RadialExponential { lambda, .. } => positive("lambda", lambda),
            KernelSpec::Boxcar { epsilon, .. } => positive("epsilon", epsilon),
            KernelSpec::Wiener | KernelSpec::BrownianBridge => Ok(()),
            KernelSpec::OrnsteinUhlenbeck { theta, sigma, mu0, nu } => {
                positive("theta", theta)?;
                positive("sigma", sigma)?;
                if mu0.is_finite() && nu.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("mu0 and nu must be finite".into()))
                }
            }
            KernelSpec::Ar1Discrete { gamma, process_var } => {
                if !(gamma.abs() < 1.0) {
                    return Err(Error::InvalidParameter(format!("|gamma|={} must be < 1", gamma.abs())));
                }
                positive("process_var", process_var)
            }
        }
    }

    /// True for the families defined only on scalar time-like inputs.
    pub fn scalar_only(&self) -> bool {
        matches!(
            self,
            KernelSpec::Wiener
                | KernelSpec::BrownianBridge
                | KernelSpec::OrnsteinUhlenbeck { .. }
                | KernelSpec::Ar1Discrete { .. }
        )
    }

    /// Checks that `x` lies in the family's input domain.
    pub fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("input is not finite".into()));
        }
        if !self.scalar_only() {
            return Ok(());
        }
        let [t] = x else {
            return Err(Error::Domain(format!("{} needs scalar inputs", self.family())));
        };
        let t = *t;
        match self {
            KernelSpec::Wiener | KernelSpec::OrnsteinUhlenbeck { .. } if t < 0.0 => {
                Err(Error::Domain(format!("{} needs x >= 0, got {t}", self.family())))
            }
            KernelSpec::BrownianBridge if !(0.0..=1.0).contains(&t) => {
                Err(Error::Domain(format!("brownian-bridge needs x in [0,1], got {t}")))
            }
            KernelSpec::Ar1Discrete { .. } if (t - t.round()).abs() > INTEGER_TOL => {
                Err(Error::Domain(format!("ar1-discrete needs integer time, got {t}")))
            }
            _ => Ok(()),
        }
    }

    /// Kernel value at `(x, z)`, without the training-index `v2` term.
    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        if x.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: z.len(),
            });
        }
        self.check_input(x)?;
        self.check_input(z)?;
        let value = match *self {
            KernelSpec::SquaredExpGeneral { a, lambda, beta, v1, .. } => {
                let r = Norm::L2.distance(x, z);
                a * (-r.powf(beta) / lambda).exp() + v1
            }
            KernelSpec::RadialExponential { lambda, p } => (-p.distance(x, z) / lambda).exp(),
            KernelSpec::Boxcar { epsilon, p } => {
                if p.distance(x, z) <= epsilon {
                    1.0
                } else {
                    0.0
                }
            }
            KernelSpec::Wiener => x[0].min(z[0]),
            KernelSpec::BrownianBridge => x[0].min(z[0]) - x[0] * z[0],
            KernelSpec::OrnsteinUhlenbeck { theta, sigma, .. } => {
                let (s, t) = (x[0], z[0]);
                sigma * sigma / (2.0 * theta)
                    * (-theta * (s + t)).exp()
                    * (2.0 * theta * s.min(t)).exp_m1()
            }
            KernelSpec::Ar1Discrete { gamma, process_var } => {
                let lag = (x[0] - z[0]).abs().round() as i32;
                gamma.powi(lag) * process_var / (1.0 - gamma * gamma)
            }
        };
        Ok(value)
    }

    /// The `v2` added when both arguments are the same training datum.
    pub fn same_index_extra(&self) -> f64 {
        match *self {
            KernelSpec::SquaredExpGeneral { v2, .. } => v2,
            _ => 0.0,
        }
    }

    /// Prior mean of the process; zero except for Ornstein–Uhlenbeck.
    pub fn mean(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(match *self {
            KernelSpec::OrnsteinUhlenbeck { theta, mu0, nu, .. } => {
                let decay = (-theta * x[0]).exp();
                decay * mu0 + nu * (1.0 - decay)
            }
            _ => 0.0,
        })
    }
}

pub fn eval_kernel(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    spec.eval(x, z)
}

pub fn mean_function(spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    spec.mean(x)
}

/// A covariance function usable as a GP prior.
pub trait Covariance {
    fn cov(&self, x: &[f64], z: &[f64]) -> Result<f64>;

    /// Extra variance on the diagonal of training matrices only.
    fn same_index_extra(&self) -> f64 {
        0.0
    }

    /// Rejects training inputs outside the kernel's domain.
    fn check_inputs(&self, _inputs: &[Vec<f64>]) -> Result<()> {
        Ok(())
    }
}

impl Covariance for KernelSpec {
    fn cov(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        self.eval(x, z)
    }

    fn same_index_extra(&self) -> f64 {
        KernelSpec::same_index_extra(self)
    }

    fn check_inputs(&self, inputs: &[Vec<f64>]) -> Result<()> {
        inputs.iter().try_for_each(|x| self.check_input(x))
    }
}

/// One localized basis function `ψ_n(·, x_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFunction {
    pub center: Vec<f64>,
    pub spec: KernelSpec,
}

impl BasisFunction {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.spec.eval(x, &self.center)
    }
}

/// Basis functions, one per training input in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    entries: Vec<BasisFunction>,
}

impl BasisSet {
    pub fn new(entries: Vec<BasisFunction>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for e in &entries {
            e.spec.validate()?;
            e.spec.check_input(&e.center)?;
        }
        Ok(Self { entries })
    }

    /// The same family centred at every input.
    pub fn homogeneous(spec: &KernelSpec, centers: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            centers
                .iter()
                .map(|c| BasisFunction {
                    center: c.clone(),
                    spec: spec.clone(),
                })
                .collect(),
        )
    }

    /// A family per input, e.g. alternating bandwidths.
    pub fn heterogeneous(specs: &[KernelSpec], centers: &[Vec<f64>]) -> Result<Self> {
        if specs.len() != centers.len() {
            return Err(Error::DimensionMismatch {
                expected: centers.len(),
                found: specs.len(),
            });
        }
        Self::new(
            centers
                .iter()
                .zip(specs)
                .map(|(c, s)| BasisFunction {
                    center: c.clone(),
                    spec: s.clone(),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[BasisFunction] {
        &self.entries
    }

    pub fn is_homogeneous(&self) -> bool {
        self.entries.windows(2).all(|w| w[0].spec == w[1].spec)
    }

    /// Keeps the listed entries, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut entries = Vec::with_capacity(indices.len());
        for &i in indices {
            entries.push(
                self.entries
                    .get(i)
                    .cloned()
                    .ok_or(Error::IndexOutOfRange { index: i, len: self.len() })?,
            );
        }
        Self::new(entries)
    }

    pub fn design_vector(&self, x: &[f64]) -> Result<DVector<f64>> {
        design_vector(self, x)
    }
}

/// `ψ(x) = [ψ_1(x, x_1), …, ψ_N(x, x_N)]ᵀ`.
pub fn design_vector(basis: &BasisSet, x: &[f64]) -> Result<DVector<f64>> {
    let values = basis
        .entries
        .iter()
        .map(|b| b.eval(x))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(values))
}

/// Stacked design vectors `V = [ψ(p_1), …, ψ(p_P)]` (basis count × P).
pub fn design_columns(basis: &BasisSet, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let mut v = DMatrix::zeros(basis.len(), points.len());
    for (j, p) in points.iter().enumerate() {
        v.set_column(j, &design_vector(basis, p)?);
    }
    Ok(v)
}

/// A design matrix with its symmetry verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    matrix: DMatrix<f64>,
    symmetric: bool,
}

impl DesignMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let symmetric = max_asymmetry(&matrix).is_some_and(|a| a <= DESIGN_SYMMETRY_TOL);
        Self { matrix, symmetric }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn symmetric_flag(&self) -> bool {
        self.symmetric
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Keeps the listed columns (bases).
    pub fn select_columns(&self, indices: &[usize]) -> Self {
        Self::from_matrix(self.matrix.select_columns(indices))
    }
}

/// `Ψ` with row `i` equal to `ψ(x_i)ᵀ` plus `v2` on the diagonal.
pub fn design_matrix(basis: &BasisSet, inputs: &[Vec<f64>]) -> Result<DesignMatrix> {
    let mut m = design_columns(basis, inputs)?.transpose();
    if m.is_square() {
        for (i, b) in basis.entries.iter().enumerate() {
            m[(i, i)] += b.spec.same_index_extra();
        }
    }
    Ok(DesignMatrix::from_matrix(m))
}

/// Training covariance `[k(x_i, x_j)]` plus the training-index extra.
pub fn kernel_matrix<K: Covariance + ?Sized>(kernel: &K, inputs: &[Vec<f64>]) -> Result<DesignMatrix> {
    kernel.check_inputs(inputs)?;
    let n = inputs.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = kernel.cov(&inputs[i], &inputs[j])?;
        }
        m[(i, i)] += kernel.same_index_extra();
    }
    Ok(DesignMatrix::from_matrix(m))
}

/// Cross-covariance `[k(x_i, p_j)]` (N × P).
pub fn cross_matrix<K: Covariance + ?Sized>(
    kernel: &K,
    inputs: &[Vec<f64>],
    points: &[Vec<f64>],
) -> Result<DMatrix<f64>> {
    let mut v = DMatrix::zeros(inputs.len(), points.len());
    for (i, x) in inputs.iter().enumerate() {
        for (j, p) in points.iter().enumerate() {
            v[(i, j)] = kernel.cov(x, p)?;
        }
    }
    Ok(v)
}

/// Outcome of checking a design matrix for use as a covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub symmetric: bool,
    pub max_asymmetry: f64,
    pub factorizes: bool,
    pub failing_pivot: Option<usize>,
    pub min_cholesky_diagonal: Option<f64>,
    pub finite: bool,
}

impl CovarianceReport {
    /// Symmetric and Cholesky-factorizable.
    pub fn valid_for_gp(&self) -> bool {
        self.finite && self.symmetric && self.factorizes
    }

    /// Any finite design works for weight-space regression.
    pub fn valid_for_rvm(&self) -> bool {
        self.finite
    }
}

/// Symmetry and factorization verdicts; the Cholesky attempt runs on the
/// symmetric part.
pub fn validate_covariance(m: &DesignMatrix, jitter: f64) -> CovarianceReport {
    let finite = m.matrix.iter().all(|v| v.is_finite());
    let asym = max_asymmetry(&m.matrix).unwrap_or(f64::INFINITY);
    let mut report = CovarianceReport {
        symmetric: m.symmetric,
        max_asymmetry: asym,
        factorizes: false,
        failing_pivot: None,
        min_cholesky_diagonal: None,
        finite,
    };
    if !finite || !m.matrix.is_square() {
        return report;
    }
    let sym = SymMatrix::symmetrized(m.matrix.clone()).expect("finite square matrix");
    match psd_factorize(&sym, jitter) {
        Ok(f) => {
            report.factorizes = true;
            report.min_cholesky_diagonal = Some(f.min_diagonal());
        }
        Err(Error::NotPositiveDefinite { pivot }) => report.failing_pivot = Some(pivot),
        Err(_) => {}
    }
    report
}

fn check_prior(basis: &BasisSet, prior_cov: &SymMatrix) -> Result<()> {
    if prior_cov.order() != basis.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.len(),
            found: prior_cov.order(),
        });
    }
    Ok(())
}

/// `ψ(x)ᵀ Σρ ψ(z)`.
pub fn dual_kernel(basis: &BasisSet, prior_cov: &SymMatrix, x: &[f64], z: &[f64]) -> Result<f64> {
    check_prior(basis, prior_cov)?;
    let px = design_vector(basis, x)?;
    let pz = design_vector(basis, z)?;
    Ok((px.transpose() * prior_cov.matrix() * pz)[(0, 0)])
}

/// `V Σρ Vᵀ` over `points`, `V` holding their design vectors as rows.
pub fn dual_kernel_matrix(basis: &BasisSet, prior_cov: &SymMatrix, points: &[Vec<f64>]) -> Result<SymMatrix> {
    check_prior(basis, prior_cov)?;
    let v = design_columns(basis, points)?;
    SymMatrix::symmetrized(v.transpose() * prior_cov.matrix() * v)
}

/// Correlation of `f(x)` and `f(z)` under the weight prior.
pub fn induced_correlation(basis: &BasisSet, prior_cov: &SymMatrix, x: &[f64], z: &[f64]) -> Result<f64> {
    let kxx = dual_kernel(basis, prior_cov, x, x)?;
    let kzz = dual_kernel(basis, prior_cov, z, z)?;
    for k in [kxx, kzz] {
        if !(k > 1e-300) {
            return Err(Error::DegenerateVariance(k));
        }
    }
    Ok(dual_kernel(basis, prior_cov, x, z)? / (kxx.sqrt() * kzz.sqrt()))
}

/// The covariance function a weight prior induces on `f(x) = ψ(x)ᵀρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualKernel {
    basis: BasisSet,
    prior_cov: SymMatrix,
}

impl DualKernel {
    pub fn new(basis: BasisSet, prior_cov: SymMatrix) -> Result<Self> {
        check_prior(&basis, &prior_cov)?;
        Ok(Self { basis, prior_cov })
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn prior_cov(&self) -> &SymMatrix {
        &self.prior_cov
    }
}

impl Covariance for DualKernel {
    fn cov(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        dual_kernel(&self.basis, &self.prior_cov, x, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn squared_exp_at_zero_distance_is_signal_variance() {
        let k = KernelSpec::SquaredExpGeneral {
            a: 0.7,
            lambda: 2.0,
            beta: 2.0,
            v1: 0.0,
            v2: 0.0,
        };
        assert_eq!(k.eval(&[1.3], &[1.3]).unwrap(), 0.7);
    }

    #[test]
    fn table_kernels() {
        assert_eq!(KernelSpec::Wiener.eval(&[1.0], &[2.0]).unwrap(), 1.0);
        assert_eq!(KernelSpec::BrownianBridge.eval(&[0.5], &[0.5]).unwrap(), 0.25);
        assert!(matches!(
            KernelSpec::BrownianBridge.eval(&[1.5], &[0.5]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(KernelSpec::Wiener.eval(&[-1.0], &[0.5]), Err(Error::Domain(_))));
        assert!(matches!(
            KernelSpec::Wiener.eval(&[1.0, 2.0], &[0.5, 1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ou_covariance_matches_closed_form() {
        let k = KernelSpec::OrnsteinUhlenbeck {
            theta: 0.5,
            sigma: 1.2,
            mu0: 0.0,
            nu: 0.0,
        };
        let (s, t) = (1.0_f64, 3.0_f64);
        let expected = 1.44 / 1.0 * (-0.5 * 4.0_f64).exp() * ((2.0 * 0.5 * 1.0_f64).exp() - 1.0);
        assert!((k.eval(&[s], &[t]).unwrap() - expected).abs() < 1e-15);
        assert_eq!(k.eval(&[0.0], &[2.0]).unwrap(), 0.0);
    }

    #[test]
    fn mean_functions() {
        assert_eq!(KernelSpec::Wiener.mean(&[3.0]).unwrap(), 0.0);
        let ou = KernelSpec::OrnsteinUhlenbeck {
            theta: 1.0,
            sigma: 1.0,
            mu0: 0.7,
            nu: 2.0,
        };
        assert_eq!(ou.mean(&[0.0]).unwrap(), 0.7);
        let far = KernelSpec::OrnsteinUhlenbeck {
            theta: 1.0,
            sigma: 1.0,
            mu0: 0.0,
            nu: 2.0,
        };
        assert!((far.mean(&[60.0]).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn params_round_trip() {
        for spec in [
            KernelSpec::SquaredExpGeneral {
                a: 0.8,
                lambda: 3.0,
                beta: 1.5,
                v1: 0.1,
                v2: 0.0,
            },
            KernelSpec::Boxcar {
                epsilon: 0.5,
                p: Norm::Inf,
            },
            KernelSpec::Ar1Discrete {
                gamma: -0.3,
                process_var: 2.0,
            },
            KernelSpec::Wiener,
        ] {
            let back = KernelSpec::from_params(spec.family(), &spec.params()).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn from_params_rejects_bad_input() {
        let mut p = BTreeMap::new();
        p.insert("lambda".to_string(), 1.0);
        p.insert("bogus".to_string(), 1.0);
        assert!(KernelSpec::from_params("radial-exponential", &p).is_err());
        assert!(KernelSpec::from_params("matern", &BTreeMap::new()).is_err());
        let mut p = BTreeMap::new();
        p.insert("gamma".to_string(), 1.0);
        p.insert("process_var".to_string(), 1.0);
        assert!(KernelSpec::from_params("ar1-discrete", &p).is_err());
    }

    #[test]
    fn design_vector_cases() {
        let se = KernelSpec::squared_exponential(1.0, 1.0);
        let basis = BasisSet::homogeneous(&se, &pts(&[0.3])).unwrap();
        assert_eq!(design_vector(&basis, &[0.3]).unwrap().as_slice(), &[1.0]);

        let boxcar = KernelSpec::Boxcar {
            epsilon: 0.5,
            p: Norm::L2,
        };
        let basis = BasisSet::homogeneous(&boxcar, &pts(&[0.0, 1.0, 2.0])).unwrap();
        assert!(design_vector(&basis, &[5.0]).unwrap().iter().all(|&v| v == 0.0));

        let basis = BasisSet::homogeneous(&se, &pts(&[0.0, 1.0, 2.0])).unwrap();
        let v = design_vector(&basis, &[1.5]).unwrap();
        assert_eq!(v[1], v[2]);
    }

    #[test]
    fn design_matrix_symmetry_flag() {
        let se = KernelSpec::squared_exponential(1.0, 2.0);
        let inputs = pts(&[0.0, 0.7, 1.9]);
        let d = design_matrix(&BasisSet::homogeneous(&se, &inputs).unwrap(), &inputs).unwrap();
        assert!(d.symmetric_flag());

        let inputs = pts(&[0.0, 1.0]);
        let basis = BasisSet::heterogeneous(
            &[KernelSpec::squared_exponential(1.0, 1.0), KernelSpec::squared_exponential(1.0, 4.0)],
            &inputs,
        )
        .unwrap();
        let d = design_matrix(&basis, &inputs).unwrap();
        // Ψ[0][1] = exp(-1/4), Ψ[1][0] = exp(-1/1)
        assert!((d.matrix()[(0, 1)] - (-0.25_f64).exp()).abs() < 1e-15);
        assert!((d.matrix()[(1, 0)] - (-1.0_f64).exp()).abs() < 1e-15);
        assert!(!d.symmetric_flag());

        let one = design_matrix(&BasisSet::homogeneous(&se, &pts(&[4.0])).unwrap(), &pts(&[4.0])).unwrap();
        assert_eq!(one.matrix()[(0, 0)], 1.0);
    }

    #[test]
    fn v2_only_on_training_diagonal() {
        let k = KernelSpec::SquaredExpGeneral {
            a: 1.0,
            lambda: 1.0,
            beta: 2.0,
            v1: 0.0,
            v2: 0.5,
        };
        assert_eq!(k.eval(&[1.0], &[1.0]).unwrap(), 1.0);
        let inputs = pts(&[1.0, 1.0]);
        let m = kernel_matrix(&k, &inputs).unwrap();
        assert_eq!(m.matrix()[(0, 0)], 1.5);
        assert_eq!(m.matrix()[(0, 1)], 1.0);
    }

    #[test]
    fn validation_reports() {
        let id = DesignMatrix::from_matrix(DMatrix::identity(3, 3));
        let r = validate_covariance(&id, 0.0);
        assert!(r.valid_for_gp() && r.valid_for_rvm());
        assert_eq!(r.min_cholesky_diagonal, Some(1.0));

        let inputs = pts(&[0.0, 1.0]);
        let basis = BasisSet::heterogeneous(
            &[KernelSpec::squared_exponential(1.0, 1.0), KernelSpec::squared_exponential(1.0, 4.0)],
            &inputs,
        )
        .unwrap();
        let r = validate_covariance(&design_matrix(&basis, &inputs).unwrap(), 0.0);
        assert!(!r.valid_for_gp() && r.valid_for_rvm());

        let boxcar = KernelSpec::Boxcar {
            epsilon: 0.1,
            p: Norm::L1,
        };
        let inputs = pts(&[0.0, 1.0, 1.0]);
        let d = design_matrix(&BasisSet::homogeneous(&boxcar, &inputs).unwrap(), &inputs).unwrap();
        let r = validate_covariance(&d, 0.0);
        assert!(!r.factorizes);
        assert_eq!(r.failing_pivot, Some(2));
    }

    #[test]
    fn dual_kernel_cases() {
        let se = KernelSpec::squared_exponential(1.0, 1.0);
        let basis = BasisSet::homogeneous(&se, &pts(&[0.0, 1.0])).unwrap();
        let (x, z) = ([0.4], [1.7]);
        let px = design_vector(&basis, &x).unwrap();
        let pz = design_vector(&basis, &z).unwrap();
        let k = dual_kernel(&basis, &SymMatrix::identity(2), &x, &z).unwrap();
        assert!((k - px.dot(&pz)).abs() < 1e-15);

        // explicit 2×2 expansion with a full prior covariance
        let s = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5])).unwrap();
        let hand = px[0] * (2.0 * pz[0] + 0.3 * pz[1]) + px[1] * (0.3 * pz[0] + 0.5 * pz[1]);
        assert!((dual_kernel(&basis, &s, &x, &z).unwrap() - hand).abs() < 1e-15);
        assert!(dual_kernel(&basis, &s, &x, &x).unwrap() >= 0.0);

        assert!(matches!(
            dual_kernel(&basis, &SymMatrix::identity(3), &x, &z),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dual_kernel_matrix_cases() {
        let boxcar = KernelSpec::Boxcar {
            epsilon: 0.1,
            p: Norm::L2,
        };
        let inputs = pts(&[0.0, 1.0, 2.0]);
        let basis = BasisSet::homogeneous(&boxcar, &inputs).unwrap();
        let k = dual_kernel_matrix(&basis, &SymMatrix::identity(3), &inputs).unwrap();
        assert_eq!(k.matrix(), &DMatrix::<f64>::identity(3, 3));

        let se = KernelSpec::squared_exponential(1.0, 0.8);
        let inputs = pts(&[0.0, 0.9, 2.1, 2.8, 4.0]);
        let basis = BasisSet::homogeneous(&se, &inputs).unwrap();
        let prior = SymMatrix::from_diagonal(&[1.0, 0.5, 2.0, 1.5, 0.7]).unwrap();
        let k = dual_kernel_matrix(&basis, &prior, &inputs).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let direct = dual_kernel(&basis, &prior, &inputs[i], &inputs[j]).unwrap();
                assert!((k.matrix()[(i, j)] - direct).abs() <= 1e-12);
            }
        }
        assert!(psd_factorize(&k, 0.0).is_ok());
    }

    #[test]
    fn induced_correlation_cases() {
        let se = KernelSpec::squared_exponential(1.0, 1.0);
        let basis = BasisSet::homogeneous(&se, &pts(&[0.0, 1.0])).unwrap();
        let prior = SymMatrix::identity(2);
        assert!((induced_correlation(&basis, &prior, &[0.3], &[0.3]).unwrap() - 1.0).abs() < 1e-15);

        let boxcar = KernelSpec::Boxcar {
            epsilon: 0.2,
            p: Norm::L2,
        };
        let basis = BasisSet::homogeneous(&boxcar, &pts(&[0.0, 1.0])).unwrap();
        assert_eq!(induced_correlation(&basis, &prior, &[0.0], &[1.0]).unwrap(), 0.0);
        assert!(matches!(
            induced_correlation(&basis, &prior, &[0.0], &[5.0]),
            Err(Error::DegenerateVariance(_))
        ));
    }
}
