//! Quasi-GP: probabilistic kernel ridge regression, i.e. the weight-space
//! model with `Σρ = Ψ⁻¹`. Implemented directly on factors of `Ψ` and
//! `Ψ + σe²I` so that no inverse is ever formed.

use nalgebra::DVector;

use crate::data::{Dataset, GaussianState, PredictiveCurve};
use crate::error::{Error, Result};
use crate::kernels::{design_matrix, design_vector, validate_covariance, BasisSet, DesignMatrix};
use crate::numerics::{clamp_variance, psd_factorize, CholFactor, SymMatrix};
use crate::rvm::WeightPosterior;

#[derive(Debug, Clone)]
pub struct QgpModel {
    dataset: Dataset,
    basis: BasisSet,
    design: DesignMatrix,
    noise_var: f64,
    design_factor: CholFactor,
    train_factor: CholFactor,
    /// `(Ψ + σe²I)⁻¹y`.
    weights: DVector<f64>,
}

impl QgpModel {
    pub fn new(dataset: Dataset, basis: BasisSet, noise_var: f64) -> Result<Self> {
        if !basis.is_homogeneous() {
            return Err(Error::InvalidParameter("quasi-GP needs a homogeneous basis".into()));
        }
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance {noise_var} must be finite and >= 0")));
        }
        let design = design_matrix(&basis, dataset.inputs())?;
        if design.ncols() != dataset.len() {
            return Err(Error::DimensionMismatch {
                expected: dataset.len(),
                found: design.ncols(),
            });
        }
        let report = validate_covariance(&design, 0.0);
        if !report.symmetric {
            return Err(Error::NotSymmetric {
                max_asymmetry: report.max_asymmetry,
            });
        }
        let psi = SymMatrix::symmetrized(design.matrix().clone())?;
        let design_factor = psd_factorize(&psi, 0.0)?;
        let train_factor = if noise_var == 0.0 {
            design_factor.clone()
        } else {
            let mut t = psi.into_inner();
            for i in 0..t.nrows() {
                t[(i, i)] += noise_var;
            }
            psd_factorize(&SymMatrix::symmetrized(t)?, 0.0)?
        };
        let weights = train_factor.solve_vec(dataset.outputs())?;
        Ok(Self {
            dataset,
            basis,
            design,
            noise_var,
            design_factor,
            train_factor,
            weights,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
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

    /// `ρ̂ = (Ψ + σe²I)⁻¹y`, `Σ_{ρ|y} = Ψ⁻¹ − (Ψ + σe²I)⁻¹`.
    pub fn weight_posterior(&self) -> Result<WeightPosterior> {
        let cov = self.design_factor.inverse()? - self.train_factor.inverse()?;
        Ok(WeightPosterior {
            mean: self.weights.clone(),
            cov: SymMatrix::symmetrized(cov)?,
        })
    }

    /// Mean `ψᵀ(Ψ + σe²I)⁻¹y`, variance `ψᵀΨ⁻¹ψ − ψᵀ(Ψ + σe²I)⁻¹ψ`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        let psi_x = design_vector(&self.basis, x)?;
        let mean = psi_x.dot(&self.weights);
        let var = clamp_variance(
            self.design_factor.quad_form(&psi_x)?,
            self.train_factor.quad_form(&psi_x)?,
        )?;
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

    /// Mean `Ψ(Ψ + σe²I)⁻¹y`, covariance `Ψ − Ψ(Ψ + σe²I)⁻¹Ψ`.
    pub fn smooth(&self) -> Result<GaussianState> {
        let psi = self.design.matrix();
        let w = self.train_factor.half_solve(psi)?;
        let cov = SymMatrix::symmetrized(psi - w.transpose() * w)?.into_inner();
        Ok(GaussianState {
            mean: psi * &self.weights,
            cov,
        })
    }

    /// `(Ψ + σe²I)⁻¹ψ(x)`.
    pub fn smoother_weights(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.train_factor.solve_vec(&design_vector(&self.basis, x)?)
    }
}
