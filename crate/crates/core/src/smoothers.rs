//! Linear smoothers `f̂(x) = Σ φ_n(x, x_n)·y_n` and FIR/IIR filters.
//!
//! Every smoother produces a [`WeightProfile`]; prediction is its dot product
//! with the outputs.

use nalgebra::DVector;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::kernels::{Covariance, KernelSpec, Norm};
use crate::rvm::RvmModel;

/// Kernel mass below which Nadaraya–Watson falls back to the plain mean.
pub const NW_MIN_MASS: f64 = 1e-300;

/// Allowed deviation from the common spacing of a sinc grid.
pub const GRID_TOL: f64 = 1e-9;

/// Query point and the weight attached to each datum, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    pub query: Vec<f64>,
    pub weights: DVector<f64>,
}

impl WeightProfile {
    pub fn apply(&self, y: &DVector<f64>) -> Result<f64> {
        if y.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: y.len(),
            });
        }
        Ok(self.weights.dot(y))
    }
}

/// Anything whose prediction is linear in the outputs.
pub trait LinearSmoother {
    fn weights(&self, x: &[f64], inputs: &[Vec<f64>]) -> Result<WeightProfile>;

    fn predict(&self, x: &[f64], data: &Dataset) -> Result<f64> {
        self.weights(x, data.inputs())?.apply(data.outputs())
    }
}

/// Data-driven local smoothers.
#[derive(Debug, Clone, PartialEq)]
pub enum Smoother {
    /// `h_λ(x, x_n) / Σ_j h_λ(x, x_j)` with `h_λ` a kernel family.
    NadarayaWatson { kernel: KernelSpec },
    /// Mean of the `k` nearest outputs; ties go to the lower index.
    Knn { k: usize },
    /// Weights `∝ ‖x − x_n‖^{−p}`, the datum itself at a node.
    InverseDistance { p: f64 },
    /// Lagrange basis polynomials on distinct scalar nodes.
    Lagrange,
    /// `sinc((x − x_n)/T₀)` on an equidistant scalar grid.
    Sinc,
}

impl Smoother {
    pub fn idw() -> Self {
        Smoother::InverseDistance { p: 2.0 }
    }
}

fn check_dims(x: &[f64], inputs: &[Vec<f64>]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(row) = inputs.iter().find(|r| r.len() != x.len()) {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: row.len(),
        });
    }
    Ok(())
}

fn scalars(inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    inputs
        .iter()
        .map(|r| match r.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::Domain("scalar inputs required".into())),
        })
        .collect()
}

impl LinearSmoother for Smoother {
    fn weights(&self, x: &[f64], inputs: &[Vec<f64>]) -> Result<WeightProfile> {
        check_dims(x, inputs)?;
        let n = inputs.len();
        let weights = match self {
            Smoother::NadarayaWatson { kernel } => {
                let h = inputs
                    .iter()
                    .map(|xn| kernel.eval(x, xn))
                    .collect::<Result<Vec<_>>>()?;
                let mass: f64 = h.iter().sum();
                if mass < NW_MIN_MASS {
                    log::warn!("kernel mass {mass:e} at {x:?}; using the unweighted mean");
                    vec![1.0 / n as f64; n]
                } else {
                    h.iter().map(|v| v / mass).collect()
                }
            }
            Smoother::Knn { k } => {
                if *k == 0 || *k > n {
                    return Err(Error::BadK { k: *k, n });
                }
                let mut order: Vec<(f64, usize)> =
                    inputs.iter().enumerate().map(|(i, xn)| (Norm::L2.distance(x, xn), i)).collect();
                order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut w = vec![0.0; n];
                for &(_, i) in &order[..*k] {
                    w[i] = 1.0 / *k as f64;
                }
                w
            }
            Smoother::InverseDistance { p } => {
                if !(*p > 0.0) {
                    return Err(Error::InvalidParameter(format!("idw exponent {p} must be > 0")));
                }
                let d: Vec<f64> = inputs.iter().map(|xn| Norm::L2.distance(x, xn)).collect();
                let mut w = vec![0.0; n];
                if let Some(hit) = d.iter().position(|&v| v == 0.0) {
                    w[hit] = 1.0;
                } else {
                    let raw: Vec<f64> = d.iter().map(|v| v.powf(-p)).collect();
                    let total: f64 = raw.iter().sum();
                    for (wi, r) in w.iter_mut().zip(&raw) {
                        *wi = r / total;
                    }
                }
                w
            }
            Smoother::Lagrange => {
                let nodes = scalars(inputs)?;
                for j in 1..n {
                    if nodes[..j].contains(&nodes[j]) {
                        return Err(Error::DuplicateInputs(j));
                    }
                }
                let t = x[0];
                (0..n)
                    .map(|i| {
                        (0..n)
                            .filter(|&m| m != i)
                            .map(|m| (t - nodes[m]) / (nodes[i] - nodes[m]))
                            .product()
                    })
                    .collect()
            }
            Smoother::Sinc => {
                let nodes = scalars(inputs)?;
                if n < 2 {
                    return Err(Error::NonEquidistantGrid);
                }
                let step = nodes[1] - nodes[0];
                if step == 0.0 || nodes.windows(2).any(|w| ((w[1] - w[0]) - step).abs() > GRID_TOL) {
                    return Err(Error::NonEquidistantGrid);
                }
                nodes.iter().map(|xn| sinc((x[0] - xn) / step)).collect()
            }
        };
        Ok(WeightProfile {
            query: x.to_vec(),
            weights: DVector::from_vec(weights),
        })
    }
}

/// `sin(πu)/(πu)`, exact at the integers.
fn sinc(u: f64) -> f64 {
    let r = u.round();
    if (u - r).abs() < 1e-12 {
        return if r == 0.0 { 1.0 } else { 0.0 };
    }
    let a = std::f64::consts::PI * u;
    a.sin() / a
}

fn same_inputs(inputs: &[Vec<f64>], data: &Dataset) -> Result<()> {
    if inputs != data.inputs() {
        return Err(Error::InvalidParameter("inputs differ from the fitted dataset".into()));
    }
    Ok(())
}

impl LinearSmoother for RvmModel {
    fn weights(&self, x: &[f64], inputs: &[Vec<f64>]) -> Result<WeightProfile> {
        same_inputs(inputs, self.dataset())?;
        Ok(WeightProfile {
            query: x.to_vec(),
            weights: self.smoother_weights(x)?,
        })
    }
}

impl<K: Covariance> LinearSmoother for GpModel<K> {
    fn weights(&self, x: &[f64], inputs: &[Vec<f64>]) -> Result<WeightProfile> {
        same_inputs(inputs, self.dataset())?;
        Ok(WeightProfile {
            query: x.to_vec(),
            weights: self.smoother_weights(x)?,
        })
    }
}

/// Feedforward taps `a₀..a_R` and feedback taps `b₁..b_L`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    pub feedforward: Vec<f64>,
    pub feedback: Vec<f64>,
}

impl FilterSpec {
    pub fn fir(feedforward: Vec<f64>) -> Self {
        Self {
            feedforward,
            feedback: Vec::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.feedforward.is_empty() {
            return Err(Error::InvalidParameter("filter needs at least one feedforward tap".into()));
        }
        if self.feedforward.iter().chain(&self.feedback).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("filter coefficient".into()));
        }
        Ok(())
    }

    /// The `R` in `a₀..a_R`.
    pub fn order(&self) -> usize {
        self.feedforward.len().saturating_sub(1)
    }
}

/// `f̂_t = Σ_r a_r·y_{t−r}` for the `N − R` times with a full window.
pub fn fir_apply(spec: &FilterSpec, y: &[f64]) -> Result<Vec<f64>> {
    if !spec.feedback.is_empty() {
        return Err(Error::InvalidParameter("FIR filter has feedback taps".into()));
    }
    iir_apply(spec, y, &[])
}

/// `f̂_t = Σ_ℓ b_ℓ·f̂_{t−ℓ} + Σ_r a_r·y_{t−r}` over the full-window times.
/// `init[ℓ−1]` is `f̂` at `ℓ` steps before the first output; missing entries
/// are zero.
pub fn iir_apply(spec: &FilterSpec, y: &[f64], init: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    let r = spec.order();
    if y.len() <= r {
        return Err(Error::SequenceTooShort { len: y.len(), order: r });
    }
    if y.iter().chain(init).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("filter input".into()));
    }
    let mut out: Vec<f64> = Vec::with_capacity(y.len() - r);
    for t in r..y.len() {
        let k = out.len();
        let mut acc: f64 = spec.feedforward.iter().enumerate().map(|(i, a)| a * y[t - i]).sum();
        for (l, b) in spec.feedback.iter().enumerate() {
            let lag = l + 1;
            let past = if lag <= k {
                out[k - lag]
            } else {
                init.get(lag - k - 1).copied().unwrap_or(0.0)
            };
            acc += b * past;
        }
        out.push(acc);
    }
    Ok(out)
}
