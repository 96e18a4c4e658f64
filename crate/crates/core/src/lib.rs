//! Bayesian kernel regression under a single data model.
//!
//! The crate covers three probabilistic regressors that share the same
//! observation equation `y_i = f(x_i) + e_i`:
//!
//! * [`rvm`]: Bayesian linear-in-weights regression with localized bases and a
//!   Gaussian prior over the weights (relevance vector machine).
//! * [`qgp`]: the quasi-GP, i.e. probabilistic kernel ridge regression, which is
//!   the RVM with the weight prior covariance set to the inverse design matrix.
//! * [`gp`]: Gaussian-process regression with the design matrix as the prior
//!   covariance of the latent function.
//!
//! Around them sit the [`kernels`] library, marginal likelihoods and
//! hyperparameter inference in [`evidence`], classical linear smoothers and
//! digital filters in [`smoothers`], and the scalar AR(1) Kalman filter in
//! [`kalman`]. Dense linear algebra and seeded Gaussian sampling live in
//! [`numerics`].
//!
//! All regression models assume a zero prior mean.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod evidence;
pub mod gp;
pub mod kalman;
pub mod kernels;
pub mod numerics;
pub mod qgp;
pub mod rvm;
pub mod smoothers;

pub use data::{Dataset, GaussianState, PredictiveCurve, SamplingScheme};
pub use error::{Error, Result};
pub use kernels::{BasisFunction, BasisSet, Covariance, DesignMatrix, DualKernel, KernelSpec, Norm};
pub use numerics::{CholFactor, SeededRng, SymMatrix};
