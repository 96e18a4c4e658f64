//! Shared data model: observations, Gaussian states and predictive curves.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `N` input rows of dimension `d` paired with `N` scalar outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Vec<f64>>,
    outputs: DVector<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.len() != outputs.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                found: outputs.len(),
            });
        }
        let dim = inputs[0].len();
        if dim == 0 {
            return Err(Error::InvalidParameter("inputs must have at least one column".into()));
        }
        for row in &inputs {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("input".into()));
            }
        }
        if outputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("output".into()));
        }
        Ok(Self {
            inputs,
            outputs: DVector::from_vec(outputs),
        })
    }

    /// Scalar inputs `x_n` with outputs `y_n`.
    pub fn scalar(xs: &[f64], ys: &[f64]) -> Result<Self> {
        Self::new(xs.iter().map(|&x| vec![x]).collect(), ys.to_vec())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    /// Same inputs, different outputs.
    pub fn with_outputs(&self, outputs: Vec<f64>) -> Result<Self> {
        Self::new(self.inputs.clone(), outputs)
    }

    /// First `n` rows.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.len(),
            });
        }
        Self::new(
            self.inputs[..n].to_vec(),
            self.outputs.as_slice()[..n].to_vec(),
        )
    }
}

/// Mean vector and covariance matrix of a Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianState {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variances(&self) -> DVector<f64> {
        self.cov.diagonal()
    }
}

/// Per-query-point predictive mean and variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveCurve {
    pub points: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Weight-space draws `Σ ρ_n ψ_n(x)` or direct function-space draws of the
/// Gaussian over the query points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingScheme {
    #[default]
    WeightSpace,
    FunctionSpace,
}
