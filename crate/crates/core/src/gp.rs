//! Gaussian-process regression with a zero prior mean and the training
//! covariance `Ψ` as the prior covariance of `f` at the inputs.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, GaussianState, PredictiveCurve};
use crate::error::{Error, Result};
use crate::kernels::{cross_matrix, kernel_matrix, Covariance, DesignMatrix, KernelSpec};
use crate::numerics::{clamp_variance, mvn_sample, psd_factorize, CholFactor, GaussianDraws, SeededRng, SymMatrix};

#[derive(Debug, Clone)]
pub struct GpModel<K: Covariance = KernelSpec> {
    dataset: Dataset,
    kernel: K,
    design: DesignMatrix,
    noise_var: f64,
    train_factor: CholFactor,
    /// `(Ψ + σe²I)⁻¹y`.
    weights: DVector<f64>,
}

/// Joint Gaussian posterior of `f` over several query points.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPosterior {
    pub points: Vec<Vec<f64>>,
    pub mean: DVector<f64>,
    pub cov: SymMatrix,
}

impl<K: Covariance> GpModel<K> {
    /// Requires a symmetric training covariance with `Ψ + σe²I` positive
    /// definite. Scalar-only kernels reject multidimensional inputs here.
    pub fn new(dataset: Dataset, kernel: K, noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance {noise_var} must be finite and >= 0")));
        }
        let design = kernel_matrix(&kernel, dataset.inputs())?;
        if !design.symmetric_flag() {
            return Err(Error::NotSymmetric {
                max_asymmetry: crate::numerics::max_asymmetry(design.matrix()).unwrap_or(f64::INFINITY),
            });
        }
        let mut t = design.matrix().clone();
        for i in 0..t.nrows() {
            t[(i, i)] += noise_var;
        }
        let train_factor = psd_factorize(&SymMatrix::symmetrized(t)?, 0.0)?;
        let weights = train_factor.solve_vec(dataset.outputs())?;
        Ok(Self {
            dataset,
            kernel,
            design,
            noise_var,
            train_factor,
            weights,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.design
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Cholesky factor of `Ψ + σe²I`.
    pub fn train_factor(&self) -> &CholFactor {
        &self.train_factor
    }

    fn cross_vector(&self, x: &[f64]) -> Result<DVector<f64>> {
        let col = cross_matrix(&self.kernel, self.dataset.inputs(), &[x.to_vec()])?;
        Ok(col.column(0).into_owned())
    }

    /// Mean `ψ(x)ᵀ(Ψ + σe²I)⁻¹y`, variance `k(x,x) − ψ(x)ᵀ(Ψ + σe²I)⁻¹ψ(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        let psi_x = self.cross_vector(x)?;
        let mean = psi_x.dot(&self.weights);
        let var = clamp_variance(self.kernel.cov(x, x)?, self.train_factor.quad_form(&psi_x)?)?;
        Ok((mean, var))
    }

    pub fn predict_curve(&self, points: &[Vec<f64>]) -> Result<PredictiveCurve> {
        let mut mean = Vec::with_capacity(points.len());
        let mut variance = Vec::with_capacity(points.len());
        for p in points {
            let (m, v) = self.predict(p)?;
            mean.push(m);
            variance.push(v);
        }
        Ok(PredictiveCurve {
            points: points.to_vec(),
            mean,
            variance,
        })
    }

    /// Prior covariance `C` over `points`.
    pub fn prior_cov(&self, points: &[Vec<f64>]) -> Result<SymMatrix> {
        SymMatrix::symmetrized(cross_matrix(&self.kernel, points, points)?)
    }

    /// `μ = Vᵀ(Ψ + σe²I)⁻¹y`, `Σ = C − Vᵀ(Ψ + σe²I)⁻¹V`.
    pub fn predict_joint(&self, points: &[Vec<f64>]) -> Result<JointPosterior> {
        let v = cross_matrix(&self.kernel, self.dataset.inputs(), points)?;
        let c = cross_matrix(&self.kernel, points, points)?;
        let w = self.train_factor.half_solve(&v)?;
        Ok(JointPosterior {
            points: points.to_vec(),
            mean: v.transpose() * &self.weights,
            cov: SymMatrix::symmetrized(c - w.transpose() * w)?,
        })
    }

    /// Mean `Ψ(Ψ + σe²I)⁻¹y`, covariance `Ψ − Ψ(Ψ + σe²I)⁻¹Ψ`.
    pub fn smooth(&self) -> Result<GaussianState> {
        let psi = self.design.matrix();
        let w = self.train_factor.half_solve(psi)?;
        Ok(GaussianState {
            mean: psi * &self.weights,
            cov: SymMatrix::symmetrized(psi - w.transpose() * w)?.into_inner(),
        })
    }

    /// Draws from `N(0, C)`; the returned root records any jitter used.
    pub fn sample_prior(&self, points: &[Vec<f64>], rng: &mut SeededRng, count: usize) -> Result<GaussianDraws> {
        let c = self.prior_cov(points)?;
        mvn_sample(&DVector::zeros(points.len()), &c, rng, count)
    }

    /// Draws from the joint posterior over `points`.
    pub fn sample_posterior(&self, points: &[Vec<f64>], rng: &mut SeededRng, count: usize) -> Result<GaussianDraws> {
        let joint = self.predict_joint(points)?;
        mvn_sample(&joint.mean, &joint.cov, rng, count)
    }

    /// `(Ψ + σe²I)⁻¹ψ(x)`.
    pub fn smoother_weights(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.train_factor.solve_vec(&self.cross_vector(x)?)
    }

    /// Smoother weights for many points, one column per point.
    pub fn smoother_matrix(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        self.train_factor
            .solve(&cross_matrix(&self.kernel, self.dataset.inputs(), points)?)
    }
}
