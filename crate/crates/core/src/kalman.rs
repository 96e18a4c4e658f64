//! Scalar AR(1) state-space model `f_t = γ·f_{t−1} + v_t`, `y_t = f_t + e_t`
//! on the integer times `1..N`: Kalman filter, backward smoother, lag
//! prediction and the equivalent stationary kernel.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::numerics::SymMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSpaceAR1 {
    gamma: f64,
    process_var: f64,
    obs_var: f64,
}

/// Moments of `f_0` before the first observation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FilterInit {
    /// `N(0, σf²)`.
    #[default]
    Stationary,
    /// `N(μ₀, σ₀²)`; `Known(0, 0)` reproduces the transient from a fixed start.
    Known(f64, f64),
}

/// Predicted and filtered marginals for `t = 1..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterTrack {
    pub pred_mean: Vec<f64>,
    pub pred_var: Vec<f64>,
    pub filt_mean: Vec<f64>,
    pub filt_var: Vec<f64>,
}

impl FilterTrack {
    pub fn len(&self) -> usize {
        self.filt_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filt_mean.is_empty()
    }
}

/// Smoothed marginals `p(f_t | y_1..y_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothTrack {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl StateSpaceAR1 {
    pub fn new(gamma: f64, process_var: f64, obs_var: f64) -> Result<Self> {
        if !(gamma.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!("|gamma|={} must be < 1", gamma.abs())));
        }
        if !(process_var > 0.0 && process_var.is_finite()) {
            return Err(Error::InvalidParameter(format!("process variance {process_var} must be > 0")));
        }
        if !(obs_var >= 0.0 && obs_var.is_finite()) {
            return Err(Error::InvalidParameter(format!("observation variance {obs_var} must be >= 0")));
        }
        Ok(Self {
            gamma,
            process_var,
            obs_var,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn process_var(&self) -> f64 {
        self.process_var
    }

    pub fn obs_var(&self) -> f64 {
        self.obs_var
    }

    /// `σf² = σv²/(1 − γ²)`.
    pub fn stationary_variance(&self) -> f64 {
        self.process_var / (1.0 - self.gamma * self.gamma)
    }

    /// `γ^{|t−t'|}·σf²`.
    pub fn ar1_kernel(&self, t: i64, s: i64) -> f64 {
        self.gamma.powi((t - s).unsigned_abs() as i32) * self.stationary_variance()
    }

    /// The equivalent covariance as a kernel family.
    pub fn kernel_spec(&self) -> KernelSpec {
        KernelSpec::Ar1Discrete {
            gamma: self.gamma,
            process_var: self.process_var,
        }
    }

    /// `[γ^{|i−j|}·σf²]` of order `n`.
    pub fn stationary_covariance(&self, n: usize) -> SymMatrix {
        let m = DMatrix::from_fn(n, n, |i, j| self.ar1_kernel(i as i64, j as i64));
        SymMatrix::symmetrized(m).expect("finite square matrix")
    }

    /// Tridiagonal inverse of the stationary covariance: `(1+γ²)/σv²` inside
    /// the diagonal, `1/σv²` at the corners, `−γ/σv²` beside the diagonal.
    pub fn precision_matrix(&self, n: usize) -> Result<SymMatrix> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!("precision matrix order {n} must be >= 2")));
        }
        let (g, v) = (self.gamma, self.process_var);
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            p[(i, i)] = if i == 0 || i == n - 1 { 1.0 / v } else { (1.0 + g * g) / v };
            if i + 1 < n {
                p[(i, i + 1)] = -g / v;
                p[(i + 1, i)] = -g / v;
            }
        }
        SymMatrix::new(p)
    }

    fn predict_step(&self, mean: f64, var: f64) -> (f64, f64) {
        (self.gamma * mean, self.gamma * self.gamma * var + self.process_var)
    }

    /// Forward Kalman recursion over `y_1..y_N`.
    pub fn forward_filter(&self, y: &[f64], init: FilterInit) -> Result<FilterTrack> {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation".into()));
        }
        let (mut mean, mut var) = match init {
            FilterInit::Stationary => (0.0, self.stationary_variance()),
            FilterInit::Known(m, v) => {
                if !(v >= 0.0 && v.is_finite() && m.is_finite()) {
                    return Err(Error::InvalidParameter(format!("initial moments ({m}, {v})")));
                }
                (m, v)
            }
        };
        let n = y.len();
        let mut track = FilterTrack {
            pred_mean: Vec::with_capacity(n),
            pred_var: Vec::with_capacity(n),
            filt_mean: Vec::with_capacity(n),
            filt_var: Vec::with_capacity(n),
        };
        let se = self.obs_var;
        for &yt in y {
            let (pm, pv) = self.predict_step(mean, var);
            track.pred_mean.push(pm);
            track.pred_var.push(pv);
            if se == 0.0 {
                mean = yt;
                var = 0.0;
            } else {
                let total = pv + se;
                mean = se / total * pm + pv / total * yt;
                var = pv * se / total;
            }
            track.filt_mean.push(mean);
            track.filt_var.push(var);
        }
        Ok(track)
    }

    /// Backward recursion from `t = N−1` down to `1` with gain
    /// `J = γ·σ²_{t|t}/σ²_{t+1|t}`:
    /// `μ_{t|N} = μ_{t|t} + J(μ_{t+1|N} − μ_{t+1|t})`,
    /// `σ²_{t|N} = σ²_{t|t} + J²(σ²_{t+1|N} − σ²_{t+1|t})`.
    pub fn backward_smooth(&self, track: &FilterTrack) -> SmoothTrack {
        let n = track.len();
        let mut mean = track.filt_mean.clone();
        let mut var = track.filt_var.clone();
        for t in (0..n.saturating_sub(1)).rev() {
            let j = self.gamma * track.filt_var[t] / track.pred_var[t + 1];
            mean[t] = track.filt_mean[t] + j * (mean[t + 1] - track.pred_mean[t + 1]);
            var[t] = track.filt_var[t] + j * j * (var[t + 1] - track.pred_var[t + 1]);
        }
        SmoothTrack { mean, var }
    }

    /// `p(f_{t+τ} | y_1..y_t)` for the 1-based time `t`.
    pub fn predict_lag(&self, track: &FilterTrack, t: usize, tau: usize) -> Result<(f64, f64)> {
        if t == 0 || t > track.len() {
            return Err(Error::IndexOutOfRange {
                index: t,
                len: track.len(),
            });
        }
        if tau == 0 {
            return Err(Error::InvalidParameter("lag must be >= 1".into()));
        }
        let (mut mean, mut var) = (track.filt_mean[t - 1], track.filt_var[t - 1]);
        for _ in 0..tau {
            (mean, var) = self.predict_step(mean, var);
        }
        Ok((mean, var))
    }

    /// Largest relative violation of `1/σ²_{t|t} = 1/σ²_{t|t−1} + 1/σe²`.
    pub fn precision_form_gap(&self, track: &FilterTrack) -> f64 {
        if self.obs_var == 0.0 {
            return 0.0;
        }
        let pe = 1.0 / self.obs_var;
        track
            .pred_var
            .iter()
            .zip(&track.filt_var)
            .map(|(pv, fv)| {
                let lhs = 1.0 / fv;
                (lhs - (1.0 / pv + pe)).abs() / lhs.max(1.0)
            })
            .fold(0.0, f64::max)
    }
}
