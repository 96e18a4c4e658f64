//! Marginal likelihoods `p(y|θ) = N(y | 0, C_yy)`, their fit/complexity
//! split, type-II maximum likelihood, Metropolis sampling of `p(θ|y)` and
//! the mixture predictive that integrates the hyperparameters out.
//!
//! `C_yy = ΨΣρΨᵀ + σe²I` for the RVM and `Ψ + σe²I` for both the GP and the
//! quasi-GP, which therefore share one evidence and one hyperparameter
//! estimate.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::data::{Dataset, PredictiveCurve};
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::kernels::{BasisSet, KernelSpec};
use crate::numerics::{CholFactor, SeededRng};
use crate::qgp::QgpModel;
use crate::rvm::{RvmModel, WeightPrior};

/// Name of the observation-noise entry in [`HyperParams`].
pub const NOISE_VAR: &str = "noise_var";
/// Name of the isotropic weight-prior variance used by [`RvmFamily`].
pub const PRIOR_VAR: &str = "prior_var";

/// Optimizer restarts after the run from `θ₀`.
pub const RESTARTS: usize = 2;

/// The three addends of `−log p(y|θ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllDecomposition {
    /// `½ yᵀC_yy⁻¹y`.
    pub fit: f64,
    /// `½ log det C_yy`.
    pub complexity: f64,
    /// `(N/2) log 2π`.
    pub constant: f64,
}

impl NllDecomposition {
    pub fn total(&self) -> f64 {
        self.fit + self.complexity + self.constant
    }
}

/// Decomposition for the Gaussian with Cholesky factor `f`.
pub fn nll_from_factor(f: &CholFactor, y: &nalgebra::DVector<f64>) -> Result<NllDecomposition> {
    Ok(NllDecomposition {
        fit: 0.5 * f.quad_form(y)?,
        complexity: 0.5 * f.logdet(),
        constant: 0.5 * y.len() as f64 * (2.0 * PI).ln(),
    })
}

/// `log N(y | 0, LLᵀ)`.
pub fn log_density_from_factor(f: &CholFactor, y: &nalgebra::DVector<f64>) -> Result<f64> {
    Ok(-nll_from_factor(f, y)?.total())
}

pub fn rvm_log_marginal(model: &RvmModel) -> Result<f64> {
    log_density_from_factor(model.evidence_factor(), model.dataset().outputs())
}

pub fn gp_log_marginal<K: crate::kernels::Covariance>(model: &GpModel<K>) -> Result<f64> {
    log_density_from_factor(model.train_factor(), model.dataset().outputs())
}

pub fn qgp_log_marginal(model: &QgpModel) -> Result<f64> {
    log_density_from_factor(model.train_factor(), model.dataset().outputs())
}

/// Named hyperparameters: kernel parameters plus [`NOISE_VAR`] and, for the
/// RVM, [`PRIOR_VAR`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HyperParams(pub BTreeMap<String, f64>);

impl HyperParams {
    pub fn new<I: IntoIterator<Item = (S, f64)>, S: Into<String>>(pairs: I) -> Self {
        Self(pairs.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("missing hyperparameter {name:?}")))
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    /// Everything except the listed names.
    fn without(&self, names: &[&str]) -> BTreeMap<String, f64> {
        self.0
            .iter()
            .filter(|(k, _)| !names.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), *v))
            .collect()
    }

    /// `log θ_i` for the free names; each must be strictly positive.
    pub fn to_log(&self, free: &[String]) -> Result<Vec<f64>> {
        free.iter()
            .map(|name| {
                let v = self.get(name)?;
                if v > 0.0 && v.is_finite() {
                    Ok(v.ln())
                } else {
                    Err(Error::InvalidParameter(format!("{name}={v} must be > 0 to be free")))
                }
            })
            .collect()
    }

    /// Copy with the free names set to `exp(u_i)`.
    pub fn with_log(&self, free: &[String], u: &[f64]) -> Self {
        let mut out = self.clone();
        for (name, ui) in free.iter().zip(u) {
            out.set(name, ui.exp());
        }
        out
    }
}

/// A model family indexed by hyperparameters.
pub trait HyperModel {
    fn dataset(&self) -> &Dataset;

    /// Cholesky factor of `C_yy` at `θ`.
    fn evidence_factor(&self, theta: &HyperParams) -> Result<CholFactor>;

    /// Predictive mean and variance of the model built at `θ`.
    fn predictive(&self, theta: &HyperParams, points: &[Vec<f64>]) -> Result<PredictiveCurve>;

    fn log_marginal(&self, theta: &HyperParams) -> Result<f64> {
        log_density_from_factor(&self.evidence_factor(theta)?, self.dataset().outputs())
    }

    fn nll_decomposition(&self, theta: &HyperParams) -> Result<NllDecomposition> {
        nll_from_factor(&self.evidence_factor(theta)?, self.dataset().outputs())
    }
}

/// GP (equivalently quasi-GP) evidence for one kernel family.
#[derive(Debug, Clone)]
pub struct GpFamily {
    pub dataset: Dataset,
    pub family: String,
}

impl GpFamily {
    pub fn new(dataset: Dataset, family: &str) -> Self {
        Self {
            dataset,
            family: family.to_string(),
        }
    }

    pub fn kernel(&self, theta: &HyperParams) -> Result<KernelSpec> {
        KernelSpec::from_params(&self.family, &theta.without(&[NOISE_VAR]))
    }

    pub fn build(&self, theta: &HyperParams) -> Result<GpModel> {
        GpModel::new(self.dataset.clone(), self.kernel(theta)?, theta.get(NOISE_VAR)?)
    }
}

impl HyperModel for GpFamily {
    fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    fn evidence_factor(&self, theta: &HyperParams) -> Result<CholFactor> {
        Ok(self.build(theta)?.train_factor().clone())
    }

    fn predictive(&self, theta: &HyperParams, points: &[Vec<f64>]) -> Result<PredictiveCurve> {
        self.build(theta)?.predict_curve(points)
    }
}

/// RVM evidence with the family centred at every input and `Σρ = prior_var·I`.
#[derive(Debug, Clone)]
pub struct RvmFamily {
    pub dataset: Dataset,
    pub family: String,
}

impl RvmFamily {
    pub fn new(dataset: Dataset, family: &str) -> Self {
        Self {
            dataset,
            family: family.to_string(),
        }
    }

    pub fn build(&self, theta: &HyperParams) -> Result<RvmModel> {
        let spec = KernelSpec::from_params(&self.family, &theta.without(&[NOISE_VAR, PRIOR_VAR]))?;
        let basis = BasisSet::homogeneous(&spec, self.dataset.inputs())?;
        let prior = WeightPrior::isotropic(basis.len(), theta.get(PRIOR_VAR)?)?;
        RvmModel::new(self.dataset.clone(), basis, prior, theta.get(NOISE_VAR)?)
    }
}

impl HyperModel for RvmFamily {
    fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    fn evidence_factor(&self, theta: &HyperParams) -> Result<CholFactor> {
        Ok(self.build(theta)?.evidence_factor().clone())
    }

    fn predictive(&self, theta: &HyperParams, points: &[Vec<f64>]) -> Result<PredictiveCurve> {
        self.build(theta)?.predict_curve(points)
    }
}

/// Box constraints on the free hyperparameters; its keys are the free set.
pub type Bounds = BTreeMap<String, (f64, f64)>;

/// One improvement of the best point found so far.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub theta: HyperParams,
    pub nll: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Type2Fit {
    pub theta: HyperParams,
    pub nll: f64,
    /// Starts at `θ₀`; `nll` is non-increasing along it.
    pub trace: Vec<TraceEntry>,
}

type LogBox = (Vec<String>, Vec<(f64, f64)>);

fn log_bounds(theta0: &HyperParams, bounds: &Bounds) -> Result<LogBox> {
    let mut free = Vec::new();
    let mut lb = Vec::new();
    for (name, &(lo, hi)) in bounds {
        let v = theta0.get(name)?;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::InvalidParameter(format!("bounds ({lo}, {hi}) for {name} must satisfy 0 < lo <= hi")));
        }
        if !(lo <= v && v <= hi) {
            return Err(Error::InvalidParameter(format!("{name}={v} lies outside ({lo}, {hi})")));
        }
        free.push(name.clone());
        lb.push((lo.ln(), hi.ln()));
    }
    Ok((free, lb))
}

/// Minimizes `−log p(y|θ)` over the log of the bounded parameters with
/// Nelder–Mead, once from `θ₀` and [`RESTARTS`] more times from perturbed
/// starts. `max_iter` caps each run.
pub fn optimize_type2<M: HyperModel + ?Sized>(
    model: &M,
    theta0: &HyperParams,
    bounds: &Bounds,
    max_iter: usize,
) -> Result<Type2Fit> {
    let (free, lb) = log_bounds(theta0, bounds)?;
    let u0 = theta0.to_log(&free)?;
    let nll = |u: &[f64]| -> f64 {
        if u.iter().zip(&lb).any(|(x, (lo, hi))| !(*lo <= *x && *x <= *hi)) {
            return f64::INFINITY;
        }
        match model.log_marginal(&theta0.with_log(&free, u)) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };
    let f0 = nll(&u0);
    if !f0.is_finite() {
        return Err(Error::OptimizerDivergence(format!("objective is not finite at {:?}", theta0.0)));
    }
    let mut best = (u0.clone(), f0);
    let mut trace = vec![TraceEntry {
        iteration: 0,
        theta: theta0.clone(),
        nll: f0,
    }];
    if max_iter > 0 && !free.is_empty() {
        let mut iteration = 0;
        for run in 0..=RESTARTS {
            let start: Vec<f64> = u0
                .iter()
                .enumerate()
                .map(|(i, &u)| {
                    let shift = if run == 0 {
                        0.0
                    } else {
                        0.3 * run as f64 * if (i + run) % 2 == 0 { 1.0 } else { -1.0 }
                    };
                    (u + shift).clamp(lb[i].0, lb[i].1)
                })
                .collect();
            nelder_mead(&nll, &start, &lb, max_iter, |u, f| {
                iteration += 1;
                if f < best.1 {
                    best = (u.to_vec(), f);
                    trace.push(TraceEntry {
                        iteration,
                        theta: theta0.with_log(&free, u),
                        nll: f,
                    });
                }
            });
        }
    }
    Ok(Type2Fit {
        theta: theta0.with_log(&free, &best.0),
        nll: best.1,
        trace,
    })
}

/// Bounded Nelder–Mead; `report` sees the simplex best after every iteration.
fn nelder_mead<F, R>(f: &F, start: &[f64], bounds: &[(f64, f64)], max_iter: usize, mut report: R)
where
    F: Fn(&[f64]) -> f64,
    R: FnMut(&[f64], f64),
{
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(start.to_vec(), f(start))];
    for i in 0..n {
        let mut p = start.to_vec();
        let step = 0.5;
        p[i] = if p[i] + step <= bounds[i].1 { p[i] + step } else { p[i] - step };
        let fp = f(&p);
        simplex.push((p, fp));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[n].1);
        let diameter = simplex
            .iter()
            .flat_map(|(p, _)| p.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if hi.is_finite() && (hi - lo).abs() <= 1e-10 * (1.0 + lo.abs()) && diameter <= 1e-8 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(p, _)| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let reflected = along(1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = along(2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = if fr < simplex[n].1 { along(0.5) } else { along(-0.5) };
            let fc = f(&contracted);
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for (p, fp) in simplex.iter_mut().skip(1) {
                    for (x, b) in p.iter_mut().zip(&best) {
                        *x = b + 0.5 * (*x - b);
                    }
                    *fp = f(p);
                }
            }
        }
        let best = simplex
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty simplex");
        report(&best.0, best.1);
    }
}

/// Prior over the free hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum HyperPrior {
    /// Constant density in `θ`.
    Flat,
    /// Independent `log θ_i ~ N(log median_i, log_sd²)`.
    LogNormal { median: HyperParams, log_sd: f64 },
}

impl HyperPrior {
    /// Log-normal centred at `θ₀` with log-sd 1.
    pub fn default_for(theta0: &HyperParams) -> Self {
        HyperPrior::LogNormal {
            median: theta0.clone(),
            log_sd: 1.0,
        }
    }

    /// `log p(θ)` up to a constant, evaluated at `u = log θ`.
    fn log_density(&self, free: &[String], u: &[f64]) -> Result<f64> {
        match self {
            HyperPrior::Flat => Ok(0.0),
            HyperPrior::LogNormal { median, log_sd } => {
                let mut total = 0.0;
                for (name, ui) in free.iter().zip(u) {
                    let m = median.get(name)?.ln();
                    let z = (ui - m) / log_sd;
                    total += -ui - 0.5 * z * z - (log_sd * (2.0 * PI).sqrt()).ln();
                }
                Ok(total)
            }
        }
    }
}

/// Chain settings; `chain_len` counts every step after tuning, burn-in included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    pub chain_len: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub proposal_scale: f64,
    /// One pilot run of `burn_in` steps that halves or doubles the scale
    /// when its acceptance falls outside `[0.2, 0.5]`.
    pub tune: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            chain_len: 5000,
            burn_in: 1000,
            thin: 4,
            proposal_scale: 0.5,
            tune: true,
        }
    }
}

/// One proposed move of the chain, in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct MoveRecord {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub log_target_from: f64,
    pub log_target_to: f64,
    pub accept_prob: f64,
    pub uniform: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperPosterior {
    pub draws: Vec<HyperParams>,
    /// Uniform for MCMC draws.
    pub log_weights: Vec<f64>,
    pub acceptance_rate: f64,
    pub proposal_scale: f64,
    pub config: McmcConfig,
    pub moves: Vec<MoveRecord>,
}

impl HyperPosterior {
    /// A weighted set of fixed draws, e.g. a single point estimate.
    pub fn from_draws(draws: Vec<HyperParams>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::InvalidParameter("need at least one draw".into()));
        }
        let s = draws.len();
        Ok(Self {
            draws,
            log_weights: vec![-(s as f64).ln(); s],
            acceptance_rate: 1.0,
            proposal_scale: 0.0,
            config: McmcConfig {
                chain_len: s,
                burn_in: 0,
                thin: 1,
                proposal_scale: 0.0,
                tune: false,
            },
            moves: Vec::new(),
        })
    }
}

/// Random-walk Metropolis over `u = log θ` for the names in `free`. The
/// target is `log p(y|θ) + log p(θ) + Σ u_i`, the last term being the
/// Jacobian of `θ = exp(u)`.
pub fn sample_hyperposterior<M: HyperModel + ?Sized>(
    model: &M,
    prior: &HyperPrior,
    theta0: &HyperParams,
    free: &[String],
    rng: &mut SeededRng,
    config: McmcConfig,
) -> Result<HyperPosterior> {
    if config.chain_len == 0 || config.thin == 0 || config.burn_in >= config.chain_len {
        return Err(Error::InvalidParameter(format!(
            "chain_len {} must exceed burn_in {} and thin {} must be >= 1",
            config.chain_len, config.burn_in, config.thin
        )));
    }
    if !(config.proposal_scale >= 0.0 && config.proposal_scale.is_finite()) {
        return Err(Error::InvalidParameter(format!("proposal scale {}", config.proposal_scale)));
    }
    let target = |u: &[f64]| -> f64 {
        let theta = theta0.with_log(free, u);
        let lp = match (model.log_marginal(&theta), prior.log_density(free, u)) {
            (Ok(a), Ok(b)) => a + b + u.iter().sum::<f64>(),
            _ => f64::NEG_INFINITY,
        };
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    };
    let mut u = theta0.to_log(free)?;
    let mut lp = target(&u);
    if !lp.is_finite() {
        return Err(Error::NonFiniteTarget);
    }

    let step = |u: &mut Vec<f64>, lp: &mut f64, scale: f64, rng: &mut SeededRng| -> MoveRecord {
        let to: Vec<f64> = u.iter().map(|x| x + scale * rng.standard_normal()).collect();
        let lp_to = target(&to);
        let accept_prob = if lp_to.is_finite() { (lp_to - *lp).exp().min(1.0) } else { 0.0 };
        let uniform = rng.uniform();
        let accepted = uniform < accept_prob;
        let record = MoveRecord {
            from: u.clone(),
            to: to.clone(),
            log_target_from: *lp,
            log_target_to: lp_to,
            accept_prob,
            uniform,
            accepted,
        };
        if accepted {
            *u = to;
            *lp = lp_to;
        }
        record
    };

    let mut scale = config.proposal_scale;
    if config.tune && config.burn_in > 0 {
        let accepted = (0..config.burn_in)
            .filter(|_| step(&mut u, &mut lp, scale, rng).accepted)
            .count();
        let rate = accepted as f64 / config.burn_in as f64;
        if rate < 0.2 {
            scale *= 0.5;
        } else if rate > 0.5 {
            scale *= 2.0;
        }
    }

    let mut moves = Vec::with_capacity(config.chain_len);
    let mut draws = Vec::new();
    for i in 0..config.chain_len {
        moves.push(step(&mut u, &mut lp, scale, rng));
        if i >= config.burn_in && (i - config.burn_in).is_multiple_of(config.thin) {
            draws.push(theta0.with_log(free, &u));
        }
    }
    let accepted = moves.iter().filter(|m| m.accepted).count();
    let s = draws.len();
    Ok(HyperPosterior {
        draws,
        log_weights: vec![-(s as f64).ln(); s],
        acceptance_rate: accepted as f64 / config.chain_len as f64,
        proposal_scale: scale,
        config,
        moves,
    })
}

/// Rough `log p(y)` by averaging `p(y|θ_s)` over `count` log-normal prior
/// draws.
pub fn monte_carlo_log_evidence<M: HyperModel + ?Sized>(
    model: &M,
    prior: &HyperPrior,
    free: &[String],
    rng: &mut SeededRng,
    count: usize,
) -> Result<f64> {
    let HyperPrior::LogNormal { median, log_sd } = prior else {
        return Err(Error::InvalidParameter("a flat prior cannot be sampled".into()));
    };
    if count == 0 {
        return Err(Error::InvalidParameter("need at least one prior draw".into()));
    }
    let centre = median.to_log(free)?;
    let mut logs = Vec::with_capacity(count);
    for _ in 0..count {
        let u: Vec<f64> = centre.iter().map(|m| m + log_sd * rng.standard_normal()).collect();
        logs.push(model.log_marginal(&median.with_log(free, &u)).unwrap_or(f64::NEG_INFINITY));
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::NonFiniteObjective(centre));
    }
    let mean: f64 = logs.iter().map(|l| (l - top).exp()).sum::<f64>() / count as f64;
    Ok(top + mean.ln())
}

/// Per-draw predictive laws and their moments under the mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePredictive {
    pub points: Vec<Vec<f64>>,
    /// `f̂(x|θ_s)`, one row per draw.
    pub means: Vec<Vec<f64>>,
    /// `σ²(x|θ_s)`, one row per draw.
    pub variances: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// `f̄(x)`.
    pub mean: Vec<f64>,
    /// `σ̄²(x)`.
    pub within: Vec<f64>,
    /// `V_f(x)`.
    pub between: Vec<f64>,
}

impl MixturePredictive {
    /// `σ̄²(x) + V_f(x)`.
    pub fn total_variance(&self) -> Vec<f64> {
        self.within.iter().zip(&self.between).map(|(w, b)| w + b).collect()
    }
}

/// Averages the predictive laws over the hyperposterior draws.
pub fn mixture_predictive<M: HyperModel + ?Sized>(
    model: &M,
    hyper: &HyperPosterior,
    points: &[Vec<f64>],
) -> Result<MixturePredictive> {
    if hyper.draws.is_empty() || hyper.draws.len() != hyper.log_weights.len() {
        return Err(Error::InvalidParameter("hyperposterior has no usable draws".into()));
    }
    let top = hyper.log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = hyper.log_weights.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();

    let mut means = Vec::with_capacity(hyper.draws.len());
    let mut variances = Vec::with_capacity(hyper.draws.len());
    for theta in &hyper.draws {
        let curve = model.predictive(theta, points)?;
        means.push(curve.mean);
        variances.push(curve.variance);
    }
    let p = points.len();
    let mut mean = vec![0.0; p];
    let mut within = vec![0.0; p];
    for ((m, v), w) in means.iter().zip(&variances).zip(&weights) {
        for j in 0..p {
            mean[j] += w * m[j];
            within[j] += w * v[j];
        }
    }
    let mut between = vec![0.0; p];
    for (m, w) in means.iter().zip(&weights) {
        for j in 0..p {
            between[j] += w * (m[j] - mean[j]).powi(2);
        }
    }
    Ok(MixturePredictive {
        points: points.to_vec(),
        means,
        variances,
        weights,
        mean,
        within,
        between,
    })
}
