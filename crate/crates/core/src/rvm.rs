//! Bayesian linear-in-weights regression `y_i = ψ(x_i)ᵀρ + e_i` with a
//! Gaussian weight prior `ρ ~ N(0, Σρ)` (relevance vector machine).
//!
//! All posterior quantities go through `A = ΨΣρΨᵀ + σe²I`, which needs no
//! inverse of `Σρ` and stays valid in the noiseless limit.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, GaussianState, PredictiveCurve, SamplingScheme};
use crate::error::{Error, Result};
use crate::evidence::log_density_from_factor;
use crate::kernels::{design_columns, design_matrix, design_vector, BasisSet, DesignMatrix};
use crate::numerics::{
    clamp_variance, is_positive_semidefinite, mvn_sample, psd_factorize, CholFactor, GaussianDraws, SeededRng,
    SymMatrix,
};

/// Agreement required between the alternative posterior forms.
pub const FORM_TOL: f64 = 1e-8;

/// Precision above which a weight counts as switched off.
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e6;

/// Search interval for `log α` during relevance learning.
pub const LOG_ALPHA_BOUNDS: (f64, f64) = (-13.8, 23.0);

const RELEVANCE_TOL: f64 = 1e-8;
const GOLDEN_STEPS: usize = 80;

/// Gaussian prior `N(0, Σρ)` over the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPrior {
    cov: SymMatrix,
}

impl WeightPrior {
    pub fn new(cov: SymMatrix) -> Result<Self> {
        if !is_positive_semidefinite(&cov) {
            return Err(Error::NotPositiveDefinite { pivot: 0 });
        }
        Ok(Self { cov })
    }

    /// `σρ²·I`.
    pub fn isotropic(n: usize, var: f64) -> Result<Self> {
        Self::diagonal(&vec![var; n])
    }

    pub fn diagonal(vars: &[f64]) -> Result<Self> {
        if let Some(v) = vars.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("prior variance {v} must be >= 0")));
        }
        Ok(Self {
            cov: SymMatrix::from_diagonal(vars)?,
        })
    }

    /// `diag(1/α)` from per-weight precisions.
    pub fn from_precisions(alpha: &[f64]) -> Result<Self> {
        Self::diagonal(&alpha.iter().map(|a| 1.0 / a).collect::<Vec<_>>())
    }

    /// `Σρ = Ψ⁻¹`, the choice that turns the model into the quasi-GP.
    pub fn inverse_design(design: &DesignMatrix) -> Result<Self> {
        if !design.symmetric_flag() {
            return Err(Error::NotSymmetric {
                max_asymmetry: crate::numerics::max_asymmetry(design.matrix()).unwrap_or(f64::INFINITY),
            });
        }
        let f = psd_factorize(&SymMatrix::symmetrized(design.matrix().clone())?, 0.0)?;
        Ok(Self {
            cov: SymMatrix::symmetrized(f.inverse()?)?,
        })
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }

    pub fn order(&self) -> usize {
        self.cov.order()
    }

    /// The diagonal, if `Σρ` has no off-diagonal entries.
    pub fn diagonal_entries(&self) -> Option<Vec<f64>> {
        let m = self.cov.matrix();
        let n = m.nrows();
        let off = (0..n).any(|i| (0..n).any(|j| i != j && m[(i, j)] != 0.0));
        (!off).then(|| m.diagonal().iter().copied().collect())
    }
}

/// Posterior `N(ρ̂, Σ_{ρ|y})` of the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPosterior {
    pub mean: DVector<f64>,
    pub cov: SymMatrix,
}

/// Data, basis, design, prior and noise level of an RVM.
#[derive(Debug, Clone)]
pub struct RvmModel {
    dataset: Dataset,
    basis: BasisSet,
    design: DesignMatrix,
    prior: WeightPrior,
    noise_var: f64,
    /// Cholesky factor of `ΨΣρΨᵀ + σe²I`.
    evidence_factor: CholFactor,
    /// `ΨΣρ` (N × M).
    psi_sigma: DMatrix<f64>,
}

impl RvmModel {
    /// Builds the design matrix of `basis` over the dataset inputs.
    pub fn new(dataset: Dataset, basis: BasisSet, prior: WeightPrior, noise_var: f64) -> Result<Self> {
        let design = design_matrix(&basis, dataset.inputs())?;
        Self::from_design(dataset, basis, design, prior, noise_var)
    }

    /// Uses a precomputed design, e.g. a column subset after pruning.
    pub fn from_design(
        dataset: Dataset,
        basis: BasisSet,
        design: DesignMatrix,
        prior: WeightPrior,
        noise_var: f64,
    ) -> Result<Self> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise variance {noise_var} must be finite and >= 0")));
        }
        if design.nrows() != dataset.len() {
            return Err(Error::DimensionMismatch {
                expected: dataset.len(),
                found: design.nrows(),
            });
        }
        for found in [design.ncols(), prior.order()] {
            if found != basis.len() {
                return Err(Error::DimensionMismatch {
                    expected: basis.len(),
                    found,
                });
            }
        }
        if design.matrix().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix".into()));
        }
        let psi = design.matrix();
        let psi_sigma = psi * prior.cov.matrix();
        let mut a = &psi_sigma * psi.transpose();
        for i in 0..a.nrows() {
            a[(i, i)] += noise_var;
        }
        let evidence_factor = match psd_factorize(&SymMatrix::symmetrized(a)?, 0.0) {
            Ok(f) => f,
            Err(Error::NotPositiveDefinite { .. }) if noise_var == 0.0 => return Err(Error::SingularDesign),
            Err(e) => return Err(e),
        };
        Ok(Self {
            dataset,
            basis,
            design,
            prior,
            noise_var,
            evidence_factor,
            psi_sigma,
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

    pub fn prior(&self) -> &WeightPrior {
        &self.prior
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Cholesky factor of `C_yy = ΨΣρΨᵀ + σe²I`.
    pub fn evidence_factor(&self) -> &CholFactor {
        &self.evidence_factor
    }

    /// `ρ̂ = ΣρΨᵀA⁻¹y` and `Σ_{ρ|y} = Σρ − ΣρΨᵀA⁻¹ΨΣρ`.
    pub fn weight_posterior(&self) -> Result<WeightPosterior> {
        let y = self.dataset.outputs();
        let mean = self.psi_sigma.transpose() * self.evidence_factor.solve_vec(y)?;
        let w = self.evidence_factor.half_solve(&self.psi_sigma)?;
        let cov = SymMatrix::symmetrized(self.prior.cov.matrix() - w.transpose() * w)?;
        Ok(WeightPosterior { mean, cov })
    }

    /// [`RvmModel::weight_posterior`], cross-checked against the forms built
    /// on `ΨᵀΨ + σe²Σρ⁻¹`. Returns [`Error::FormMismatch`] when they disagree
    /// by more than [`FORM_TOL`] relative.
    pub fn weight_posterior_checked(&self) -> Result<WeightPosterior> {
        let post = self.weight_posterior()?;
        let psi = self.design.matrix();
        let y = self.dataset.outputs();
        let gram = psi.transpose() * psi;
        let psi_t_y = psi.transpose() * y;
        let scale = 1.0 + post.mean.amax();
        let mut worst: f64 = 0.0;
        if self.noise_var == 0.0 {
            let mean = gram.lu().solve(&psi_t_y).ok_or(Error::SingularDesign)?;
            worst = worst.max((&mean - &post.mean).amax() / scale);
        } else {
            let prior_inv = psd_factorize(&self.prior.cov, 0.0)?.inverse()?;
            let s2 = self.noise_var;
            // (ΨᵀΨ + σe²Σρ⁻¹)⁻¹Ψᵀy
            let m1 = (&gram + &prior_inv * s2).lu().solve(&psi_t_y).ok_or(Error::SingularMatrix)?;
            // σe⁻²(σe⁻²ΨᵀΨ + Σρ⁻¹)⁻¹Ψᵀy and (σe⁻²ΨᵀΨ + Σρ⁻¹)⁻¹
            let precision = SymMatrix::symmetrized(&gram / s2 + &prior_inv)?;
            let cov = psd_factorize(&precision, 0.0)?.inverse()?;
            let m0 = &cov * &psi_t_y / s2;
            worst = worst
                .max((&m0 - &post.mean).amax() / scale)
                .max((&m1 - &post.mean).amax() / scale);
            let cov_scale = 1.0 + post.cov.matrix().amax();
            worst = worst.max((cov - post.cov.matrix()).amax() / cov_scale);
        }
        if !(worst <= FORM_TOL) {
            return Err(Error::FormMismatch(worst));
        }
        Ok(post)
    }

    /// Predictive mean `ψ(x)ᵀρ̂` and variance
    /// `ψᵀΣρψ − ψᵀΣρΨᵀA⁻¹ΨΣρψ`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        let psi_x = design_vector(&self.basis, x)?;
        let sigma_psi = self.prior.cov.matrix() * &psi_x;
        let prior_var = psi_x.dot(&sigma_psi);
        let b = self.design.matrix() * &sigma_psi;
        let mean = b.dot(&self.evidence_factor.solve_vec(self.dataset.outputs())?);
        let var = clamp_variance(prior_var, self.evidence_factor.quad_form(&b)?)?;
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

    /// Posterior of `f = Ψρ` at the training inputs.
    pub fn smooth(&self) -> Result<GaussianState> {
        let prior_f = &self.psi_sigma * self.design.matrix().transpose();
        let w = self.evidence_factor.half_solve(&prior_f)?;
        let mean = &prior_f * self.evidence_factor.solve_vec(self.dataset.outputs())?;
        let cov = SymMatrix::symmetrized(&prior_f - w.transpose() * w)?.into_inner();
        Ok(GaussianState { mean, cov })
    }

    /// Zero-mean prior `VᵀΣρV` induced on `f` at `points`.
    pub fn induced_prior(&self, points: &[Vec<f64>]) -> Result<GaussianState> {
        let v = design_columns(&self.basis, points)?;
        let cov = SymMatrix::symmetrized(v.transpose() * self.prior.cov.matrix() * v)?.into_inner();
        Ok(GaussianState {
            mean: DVector::zeros(points.len()),
            cov,
        })
    }

    /// Posterior of `f` at `points`: mean `Vᵀρ̂`, covariance `VᵀΣ_{ρ|y}V`.
    pub fn posterior_at(&self, points: &[Vec<f64>]) -> Result<GaussianState> {
        let post = self.weight_posterior()?;
        let v = design_columns(&self.basis, points)?;
        let cov = SymMatrix::symmetrized(v.transpose() * post.cov.matrix() * &v)?.into_inner();
        Ok(GaussianState {
            mean: v.transpose() * post.mean,
            cov,
        })
    }

    pub fn sample_prior(
        &self,
        points: &[Vec<f64>],
        rng: &mut SeededRng,
        count: usize,
        scheme: SamplingScheme,
    ) -> Result<GaussianDraws> {
        let zero = DVector::zeros(self.basis.len());
        match scheme {
            SamplingScheme::WeightSpace => self.weight_space_draws(&zero, &self.prior.cov, points, rng, count),
            SamplingScheme::FunctionSpace => {
                let g = self.induced_prior(points)?;
                mvn_sample(&g.mean, &SymMatrix::symmetrized(g.cov)?, rng, count)
            }
        }
    }

    pub fn sample_posterior(
        &self,
        points: &[Vec<f64>],
        rng: &mut SeededRng,
        count: usize,
        scheme: SamplingScheme,
    ) -> Result<GaussianDraws> {
        match scheme {
            SamplingScheme::WeightSpace => {
                let post = self.weight_posterior()?;
                self.weight_space_draws(&post.mean, &post.cov, points, rng, count)
            }
            SamplingScheme::FunctionSpace => {
                let g = self.posterior_at(points)?;
                mvn_sample(&g.mean, &SymMatrix::symmetrized(g.cov)?, rng, count)
            }
        }
    }

    /// Draws `ρ⁽ˢ⁾` and evaluates `Σ_n ρ_n⁽ˢ⁾ψ_n` at the points.
    fn weight_space_draws(
        &self,
        mean: &DVector<f64>,
        cov: &SymMatrix,
        points: &[Vec<f64>],
        rng: &mut SeededRng,
        count: usize,
    ) -> Result<GaussianDraws> {
        let v = design_columns(&self.basis, points)?;
        let weights = mvn_sample(mean, cov, rng, count)?;
        Ok(GaussianDraws {
            draws: weights.draws * v,
            root: weights.root,
        })
    }

    /// `w(x)` with `f̂(x) = w(x)ᵀy`, namely `A⁻¹ΨΣρψ(x)`.
    pub fn smoother_weights(&self, x: &[f64]) -> Result<DVector<f64>> {
        let psi_x = design_vector(&self.basis, x)?;
        self.evidence_factor.solve_vec(&(&self.psi_sigma * psi_x))
    }

    /// Learns per-weight precisions by maximizing the log marginal likelihood
    /// over `log α`, coordinate by coordinate with golden-section search, and
    /// prunes weights whose precision exceeds `prune_threshold`. The noise
    /// variance stays fixed.
    pub fn learn_relevance(&self, max_iter: usize, prune_threshold: f64) -> Result<RelevanceFit> {
        let vars = self
            .prior
            .diagonal_entries()
            .ok_or_else(|| Error::InvalidParameter("relevance learning needs a diagonal prior".into()))?;
        let (lo, hi) = LOG_ALPHA_BOUNDS;
        let mut log_alpha: Vec<f64> = vars
            .iter()
            .map(|&v| if v > 0.0 { (-v.ln()).clamp(lo, hi) } else { hi })
            .collect();
        let psi = self.design.matrix();
        let y = self.dataset.outputs();
        let objective = |la: &[f64]| -> Result<(f64, CholFactor)> {
            let mut a = DMatrix::<f64>::zeros(psi.nrows(), psi.nrows());
            for (j, l) in la.iter().enumerate() {
                let col = psi.column(j);
                a += (-l).exp() * col * col.transpose();
            }
            for i in 0..a.nrows() {
                a[(i, i)] += self.noise_var;
            }
            let f = psd_factorize(&SymMatrix::symmetrized(a)?, 0.0)
                .map_err(|e| Error::OptimizerDivergence(format!("evidence covariance: {e}")))?;
            let value = log_density_from_factor(&f, y)?;
            if !value.is_finite() {
                return Err(Error::OptimizerDivergence(format!("objective {value} at log alpha {la:?}")));
            }
            Ok((value, f))
        };

        let (mut current, mut factor) = objective(&log_alpha)?;
        let mut trace = vec![current];
        for _ in 0..max_iter {
            let sweep_start = current;
            for i in 0..log_alpha.len() {
                let col = psi.column(i).into_owned();
                let big_s = factor.quad_form(&col)?;
                let big_q = col.dot(&factor.solve_vec(y)?);
                let a = log_alpha[i].exp();
                // sparsity and quality factors with weight i left out
                let denom = a - big_s;
                if !(denom > 0.0) {
                    continue;
                }
                let s = a * big_s / denom;
                let q = a * big_q / denom;
                let gain = |u: f64| {
                    let alpha = u.exp();
                    0.5 * (u - (alpha + s).ln() + q * q / (alpha + s))
                };
                let best = golden_max(gain, lo, hi);
                let mut trial = log_alpha.clone();
                trial[i] = best;
                let (value, f) = objective(&trial)?;
                if value >= current {
                    log_alpha = trial;
                    current = value;
                    factor = f;
                }
            }
            trace.push(current);
            if (current - sweep_start).abs() <= RELEVANCE_TOL * sweep_start.abs().max(1.0) {
                break;
            }
        }

        let alpha: Vec<f64> = log_alpha.iter().map(|l| l.exp()).collect();
        let kept: Vec<usize> = (0..alpha.len()).filter(|&i| !(alpha[i] > prune_threshold)).collect();
        let pruned: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] > prune_threshold).collect();
        let model = if kept.is_empty() {
            None
        } else {
            let prior = WeightPrior::from_precisions(&kept.iter().map(|&i| alpha[i]).collect::<Vec<_>>())?;
            Some(RvmModel::from_design(
                self.dataset.clone(),
                self.basis.select(&kept)?,
                self.design.select_columns(&kept),
                prior,
                self.noise_var,
            )?)
        };
        Ok(RelevanceFit {
            alpha,
            kept,
            pruned,
            objective_trace: trace,
            model,
        })
    }
}

/// Result of [`RvmModel::learn_relevance`].
#[derive(Debug, Clone)]
pub struct RelevanceFit {
    /// Learned precision of every original weight.
    pub alpha: Vec<f64>,
    pub kept: Vec<usize>,
    pub pruned: Vec<usize>,
    /// Log marginal likelihood after each sweep, starting from the initial prior.
    pub objective_trace: Vec<f64>,
    /// Refit on the surviving bases; `None` if every weight was pruned.
    pub model: Option<RvmModel>,
}

/// Maximizer of a unimodal `g` on `[lo, hi]`, endpoints included.
fn golden_max<G: Fn(f64) -> f64>(g: G, lo: f64, hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..GOLDEN_STEPS {
        if gc >= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    let mid = 0.5 * (a + b);
    [lo, mid, hi]
        .into_iter()
        .max_by(|x, y| g(*x).total_cmp(&g(*y)))
        .unwrap_or(mid)
}
