//! One function per subcommand, each returning a [`TableOutput`].

use std::path::PathBuf;

use bayeskern::evidence::{
    gp_log_marginal, optimize_type2, qgp_log_marginal, rvm_log_marginal, sample_hyperposterior, Bounds, GpFamily,
    HyperParams, HyperPrior, McmcConfig, NOISE_VAR, PRIOR_VAR,
};
use bayeskern::gp::GpModel;
use bayeskern::kernels::design_matrix;
use bayeskern::numerics::{SamplingRoot, SeededRng};
use bayeskern::qgp::QgpModel;
use bayeskern::rvm::{RvmModel, WeightPrior};
use bayeskern::smoothers::LinearSmoother;
use bayeskern::{BasisSet, Dataset, KernelSpec};
use nalgebra::DMatrix;

use crate::config::{LearnMethod, LoadedConfig, ModelKind, PriorKind, Quantity, RunConfig, SampleTarget, SchemeName};
use crate::error::{CliError, Result};
use crate::table::{fmt_real, ingest_csv, TableOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Predict,
    Smooth,
    Sample,
    Learn,
    Relevance,
    Kalman,
    Compare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Predict => "predict",
            Command::Smooth => "smooth",
            Command::Sample => "sample",
            Command::Learn => "learn",
            Command::Relevance => "relevance",
            Command::Kalman => "kalman",
            Command::Compare => "compare",
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jitter: Option<f64>,
}

/// Means, optional variances and optional full covariance.
type Smoothed = (Vec<f64>, Option<Vec<f64>>, Option<DMatrix<f64>>);

/// A loaded config, its dataset and the effective seed and jitter.
pub struct Run {
    pub config: RunConfig,
    pub data: Dataset,
    pub seed: u64,
    pub jitter: f64,
    digest: String,
}

impl Run {
    pub fn new(loaded: &LoadedConfig, overrides: &Overrides) -> Result<Self> {
        let path = overrides
            .data
            .clone()
            .or_else(|| loaded.data_path())
            .ok_or_else(|| CliError::Config("no dataset: set `data` or pass --data".into()))?;
        let jitter = overrides.jitter.unwrap_or(loaded.config.jitter);
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(CliError::Config(format!("jitter {jitter} must be finite and >= 0")));
        }
        Ok(Self {
            config: loaded.config.clone(),
            data: ingest_csv(&path)?,
            seed: overrides.seed.unwrap_or(loaded.config.seed),
            jitter,
            digest: loaded.digest(),
        })
    }

    fn table<S: Into<String>>(&self, command: Command, header: impl IntoIterator<Item = S>) -> TableOutput {
        let mut t = TableOutput::new(header);
        t.meta("command", command.name());
        t.meta("model", self.config.model.name());
        t.meta("seed", self.seed);
        t.meta("jitter", fmt_real(self.jitter));
        t.meta("version", concat!("bayeskern ", env!("CARGO_PKG_VERSION")));
        t.meta("config_sha256", &self.digest);
        t.meta("n", self.data.len());
        t
    }

    fn input_names(&self, prefix: &str) -> Vec<String> {
        match self.data.dim() {
            1 => vec![prefix.to_string()],
            d => (1..=d).map(|j| format!("{prefix}{j}")).collect(),
        }
    }

    /// The configured kernel, else the AR(1) kernel of the `[kalman]` section.
    fn kernel(&self) -> Result<KernelSpec> {
        match (&self.config.kernel, &self.config.kalman) {
            (Some(k), _) => k.spec(),
            (None, Some(k)) => Ok(k.model(self.config.noise_var)?.kernel_spec()),
            (None, None) => Err(CliError::Config("model needs a [kernel] section".into())),
        }
    }

    fn noise_var(&self) -> Result<f64> {
        let base = match (&self.config.kernel, &self.config.kalman) {
            (None, Some(k)) => k.obs_var.unwrap_or(self.config.noise_var),
            _ => self.config.noise_var,
        };
        Ok(base + self.jitter)
    }

    fn gp(&self) -> Result<GpModel> {
        Ok(GpModel::new(self.data.clone(), self.kernel()?, self.noise_var()?)?)
    }

    fn basis(&self) -> Result<BasisSet> {
        Ok(BasisSet::homogeneous(&self.kernel()?, self.data.inputs())?)
    }

    fn qgp(&self) -> Result<QgpModel> {
        Ok(QgpModel::new(self.data.clone(), self.basis()?, self.noise_var()?)?)
    }

    fn rvm(&self) -> Result<RvmModel> {
        let basis = self.basis()?;
        let p = &self.config.prior;
        let prior = match p.kind {
            PriorKind::Isotropic => WeightPrior::isotropic(basis.len(), p.var)?,
            PriorKind::Diagonal => WeightPrior::diagonal(&p.vars)?,
            PriorKind::InverseDesign => WeightPrior::inverse_design(&design_matrix(&basis, self.data.inputs())?)?,
        };
        Ok(RvmModel::new(self.data.clone(), basis, prior, self.noise_var()?)?)
    }

    fn kalman_parts(&self) -> Result<(bayeskern::kalman::StateSpaceAR1, bayeskern::kalman::FilterInit)> {
        let k = self
            .config
            .kalman
            .as_ref()
            .ok_or_else(|| CliError::Config("needs a [kalman] section".into()))?;
        Ok((k.model(self.config.noise_var + self.jitter)?, k.init()?))
    }

    /// Predictive means and, where defined, variances at `points`.
    fn predictive(&self, model: ModelKind, points: &[Vec<f64>]) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let curve = match model {
            ModelKind::Gp => self.gp()?.predict_curve(points)?,
            ModelKind::Qgp => self.qgp()?.predict_curve(points)?,
            ModelKind::Rvm => self.rvm()?.predict_curve(points)?,
            ModelKind::Smoother => {
                let s = self.smoother()?;
                let mean = points.iter().map(|x| s.predict(x, &self.data)).collect::<bayeskern::Result<Vec<_>>>()?;
                return Ok((mean, None));
            }
            ModelKind::Kalman => return Err(CliError::Unsupported("prediction".into(), "kalman".into())),
        };
        Ok((curve.mean, Some(curve.variance)))
    }

    /// Smoothed means at the training inputs with variances and, for the
    /// Bayesian models, the full covariance.
    fn smoothed(&self, model: ModelKind) -> Result<Smoothed> {
        let state = match model {
            ModelKind::Gp => self.gp()?.smooth()?,
            ModelKind::Qgp => self.qgp()?.smooth()?,
            ModelKind::Rvm => self.rvm()?.smooth()?,
            ModelKind::Smoother => return self.predictive(model, self.data.inputs()).map(|(m, _)| (m, None, None)),
            ModelKind::Kalman => {
                let (ar, init) = self.kalman_parts()?;
                let y: Vec<f64> = self.data.outputs().iter().copied().collect();
                let s = ar.backward_smooth(&ar.forward_filter(&y, init)?);
                return Ok((s.mean, Some(s.var), None));
            }
        };
        let var = (0..state.cov.nrows()).map(|i| state.cov[(i, i)]).collect();
        Ok((state.mean.iter().copied().collect(), Some(var), Some(state.cov)))
    }

    fn smoother(&self) -> Result<bayeskern::smoothers::Smoother> {
        self.config
            .smoother
            .as_ref()
            .ok_or_else(|| CliError::Config("model smoother needs a [smoother] section".into()))?
            .build()
    }

    fn unsupported(&self, command: Command) -> CliError {
        CliError::Unsupported(command.name().into(), self.config.model.name().into())
    }
}

pub fn run_command(command: Command, loaded: &LoadedConfig, overrides: &Overrides) -> Result<TableOutput> {
    let run = Run::new(loaded, overrides)?;
    match command {
        Command::Fit => fit(&run),
        Command::Predict => predict(&run),
        Command::Smooth => smooth(&run),
        Command::Sample => sample(&run),
        Command::Learn => learn(&run),
        Command::Relevance => relevance(&run),
        Command::Kalman => kalman(&run),
        Command::Compare => compare(&run),
    }
}

fn fit(run: &Run) -> Result<TableOutput> {
    let (log_marginal, posterior, basis) = match run.config.model {
        ModelKind::Gp => {
            let gp = run.gp()?;
            let alpha = gp.train_factor().solve_vec(run.data.outputs())?;
            let mut header = vec!["index".to_string()];
            header.extend(run.input_names("x"));
            header.push("alpha".into());
            let mut t = run.table(Command::Fit, header);
            t.meta("log_marginal", fmt_real(gp_log_marginal(&gp)?));
            for (i, x) in run.data.inputs().iter().enumerate() {
                let mut row = vec![i as f64];
                row.extend(x);
                row.push(alpha[i]);
                t.push_reals(&row);
            }
            return Ok(t);
        }
        ModelKind::Qgp => {
            let m = run.qgp()?;
            (qgp_log_marginal(&m)?, m.weight_posterior()?, m.basis().clone())
        }
        ModelKind::Rvm => {
            let m = run.rvm()?;
            (rvm_log_marginal(&m)?, m.weight_posterior()?, m.basis().clone())
        }
        _ => return Err(run.unsupported(Command::Fit)),
    };
    let mut header = vec!["index".to_string()];
    header.extend(run.input_names("center"));
    header.extend(["weight_mean".to_string(), "weight_var".to_string()]);
    let mut t = run.table(Command::Fit, header);
    t.meta("log_marginal", fmt_real(log_marginal));
    let cov = posterior.cov.matrix();
    for (i, entry) in basis.entries().iter().enumerate() {
        let mut row = vec![i as f64];
        row.extend(&entry.center);
        row.extend([posterior.mean[i], cov[(i, i)]]);
        t.push_reals(&row);
    }
    t.sidecars.push(("weight_cov".into(), TableOutput::matrix(cov)));
    Ok(t)
}

fn predict(run: &Run) -> Result<TableOutput> {
    let points = run.config.points.resolve(run.data.inputs())?;
    let (mean, var) = run.predictive(run.config.model, &points)?;
    let mut header = run.input_names("x");
    header.push("mean".into());
    if var.is_some() {
        header.push("variance".into());
    }
    let mut t = run.table(Command::Predict, header);
    for (i, x) in points.iter().enumerate() {
        let mut row = x.clone();
        row.push(mean[i]);
        if let Some(v) = &var {
            row.push(v[i]);
        }
        t.push_reals(&row);
    }
    Ok(t)
}

fn smooth(run: &Run) -> Result<TableOutput> {
    let (mean, var, cov) = run.smoothed(run.config.model)?;
    let mut header = vec!["index".to_string()];
    header.extend(run.input_names("x"));
    header.extend(["y".to_string(), "mean".to_string()]);
    if var.is_some() {
        header.push("variance".into());
    }
    let mut t = run.table(Command::Smooth, header);
    for (i, x) in run.data.inputs().iter().enumerate() {
        let mut row = vec![i as f64];
        row.extend(x);
        row.extend([run.data.outputs()[i], mean[i]]);
        if let Some(v) = &var {
            row.push(v[i]);
        }
        t.push_reals(&row);
    }
    if let Some(c) = cov {
        t.sidecars.push(("cov".into(), TableOutput::matrix(&c)));
    }
    Ok(t)
}

fn sample(run: &Run) -> Result<TableOutput> {
    let points = run.config.points.resolve(run.data.inputs())?;
    let cfg = run.config.sample;
    let mut rng = SeededRng::new(run.seed);
    let draws = match (run.config.model, cfg.target) {
        (ModelKind::Gp, SampleTarget::Prior) => run.gp()?.sample_prior(&points, &mut rng, cfg.count)?,
        (ModelKind::Gp, SampleTarget::Posterior) => run.gp()?.sample_posterior(&points, &mut rng, cfg.count)?,
        (ModelKind::Rvm, SampleTarget::Prior) => run.rvm()?.sample_prior(&points, &mut rng, cfg.count, cfg.scheme.into())?,
        (ModelKind::Rvm, SampleTarget::Posterior) => {
            run.rvm()?.sample_posterior(&points, &mut rng, cfg.count, cfg.scheme.into())?
        }
        _ => return Err(run.unsupported(Command::Sample)),
    };
    let mut header = run.input_names("x");
    header.extend((1..=cfg.count).map(|s| format!("draw_{s}")));
    let mut t = run.table(Command::Sample, header);
    t.meta("target", format!("{:?}", cfg.target).to_lowercase());
    if run.config.model == ModelKind::Rvm {
        let scheme = match cfg.scheme {
            SchemeName::WeightSpace => "weight-space",
            SchemeName::FunctionSpace => "function-space",
        };
        t.meta("scheme", scheme);
    }
    t.meta("rng", rng.algorithm());
    let root = match draws.root {
        SamplingRoot::Cholesky => "cholesky".to_string(),
        SamplingRoot::Semidefinite => "semidefinite".to_string(),
        SamplingRoot::Jittered(j) => format!("jittered({})", fmt_real(j)),
    };
    t.meta("sampling_root", root);
    for (i, x) in points.iter().enumerate() {
        let mut row = x.clone();
        row.extend(draws.draws.column(i).iter());
        t.push_reals(&row);
    }
    Ok(t)
}

fn learn(run: &Run) -> Result<TableOutput> {
    let spec = run.kernel()?;
    let family = spec.family();
    let mut theta0 = HyperParams(spec.params());
    theta0.set(NOISE_VAR, run.noise_var()?);
    let cfg = &run.config.learn;
    let free: Vec<String> = cfg.bounds.keys().cloned().collect();
    if free.is_empty() {
        return Err(CliError::Config("learn.bounds must name at least one free hyperparameter".into()));
    }
    let bounds: Bounds = cfg.bounds.iter().map(|(k, b)| (k.clone(), (b[0], b[1]))).collect();
    let gp_family;
    let rvm_family;
    let model: &dyn bayeskern::evidence::HyperModel = match run.config.model {
        ModelKind::Gp | ModelKind::Qgp => {
            gp_family = GpFamily::new(run.data.clone(), family);
            &gp_family
        }
        ModelKind::Rvm => {
            theta0.set(PRIOR_VAR, cfg.prior_var);
            rvm_family = bayeskern::evidence::RvmFamily::new(run.data.clone(), family);
            &rvm_family
        }
        _ => return Err(run.unsupported(Command::Learn)),
    };
    match cfg.method {
        LearnMethod::Type2 => {
            let fit = optimize_type2(model, &theta0, &bounds, cfg.max_iter)?;
            let mut header = vec!["iteration".to_string()];
            header.extend(free.iter().cloned());
            header.push("nll".into());
            let mut t = run.table(Command::Learn, header);
            t.meta("method", "type2");
            t.meta("max_iter", cfg.max_iter);
            t.meta("restarts", bayeskern::evidence::RESTARTS);
            t.meta("nll", fmt_real(fit.nll));
            for (k, v) in &fit.theta.0 {
                t.meta(&format!("theta.{k}"), fmt_real(*v));
            }
            for entry in &fit.trace {
                let mut row = vec![entry.iteration as f64];
                for name in &free {
                    row.push(entry.theta.get(name)?);
                }
                row.push(entry.nll);
                t.push_reals(&row);
            }
            Ok(t)
        }
        LearnMethod::Mcmc => {
            for (name, b) in &cfg.bounds {
                let v = theta0.get(name)?;
                if !(b[0] <= v && v <= b[1]) {
                    return Err(CliError::Config(format!("{name}={v} lies outside its bounds")));
                }
            }
            let defaults = McmcConfig::default();
            let mc = McmcConfig {
                chain_len: cfg.chain_len.unwrap_or(defaults.chain_len),
                burn_in: cfg.burn_in.unwrap_or(defaults.burn_in),
                thin: cfg.thin.unwrap_or(defaults.thin),
                proposal_scale: cfg.proposal_scale.unwrap_or(defaults.proposal_scale),
                tune: cfg.tune.unwrap_or(defaults.tune),
            };
            let prior = HyperPrior::LogNormal {
                median: theta0.clone(),
                log_sd: cfg.log_sd.unwrap_or(1.0),
            };
            let mut rng = SeededRng::new(run.seed);
            let post = sample_hyperposterior(model, &prior, &theta0, &free, &mut rng, mc)?;
            let mut header = vec!["draw".to_string()];
            header.extend(free.iter().cloned());
            header.push("log_weight".into());
            let mut t = run.table(Command::Learn, header);
            t.meta("method", "mcmc");
            t.meta("chain_len", mc.chain_len);
            t.meta("burn_in", mc.burn_in);
            t.meta("thin", mc.thin);
            t.meta("tune", mc.tune);
            t.meta("initial_proposal_scale", fmt_real(mc.proposal_scale));
            t.meta("proposal_scale", fmt_real(post.proposal_scale));
            t.meta("acceptance_rate", fmt_real(post.acceptance_rate));
            t.meta("hyperprior", format!("log-normal(median=start, log_sd={})", fmt_real(cfg.log_sd.unwrap_or(1.0))));
            for (s, (theta, lw)) in post.draws.iter().zip(&post.log_weights).enumerate() {
                let mut row = vec![s as f64];
                for name in &free {
                    row.push(theta.get(name)?);
                }
                row.push(*lw);
                t.push_reals(&row);
            }
            Ok(t)
        }
    }
}

fn relevance(run: &Run) -> Result<TableOutput> {
    if run.config.model != ModelKind::Rvm {
        return Err(run.unsupported(Command::Relevance));
    }
    let cfg = run.config.relevance;
    let fit = run.rvm()?.learn_relevance(cfg.max_iter, cfg.prune_threshold)?;
    let refit_mean = match &fit.model {
        Some(m) => Some(m.weight_posterior()?.mean),
        None => None,
    };
    let mut header = vec!["index".to_string()];
    header.extend(run.input_names("center"));
    header.extend(["alpha", "kept", "weight_mean"].map(String::from));
    let mut t = run.table(Command::Relevance, header);
    t.meta("prune_threshold", fmt_real(cfg.prune_threshold));
    t.meta("kept", fit.kept.len());
    t.meta("sweeps", fit.objective_trace.len() - 1);
    t.meta("log_marginal", fmt_real(*fit.objective_trace.last().expect("trace starts with the initial objective")));
    let basis = run.basis()?;
    for (i, entry) in basis.entries().iter().enumerate() {
        let mut row = vec![i as f64];
        row.extend(&entry.center);
        let slot = fit.kept.iter().position(|&k| k == i);
        let w = match (slot, &refit_mean) {
            (Some(s), Some(m)) => m[s],
            _ => 0.0,
        };
        row.extend([fit.alpha[i], if slot.is_some() { 1.0 } else { 0.0 }, w]);
        t.push_reals(&row);
    }
    Ok(t)
}

fn kalman(run: &Run) -> Result<TableOutput> {
    let (ar, init) = run.kalman_parts()?;
    let y: Vec<f64> = run.data.outputs().iter().copied().collect();
    let track = ar.forward_filter(&y, init)?;
    let smooth = ar.backward_smooth(&track);
    let header = ["t", "y", "pred_mean", "pred_var", "filt_mean", "filt_var", "smooth_mean", "smooth_var"];
    let mut t = run.table(Command::Kalman, header);
    t.meta("gamma", fmt_real(ar.gamma()));
    t.meta("process_var", fmt_real(ar.process_var()));
    t.meta("obs_var", fmt_real(ar.obs_var()));
    for (i, &yi) in y.iter().enumerate() {
        t.push_reals(&[
            (i + 1) as f64,
            yi,
            track.pred_mean[i],
            track.pred_var[i],
            track.filt_mean[i],
            track.filt_var[i],
            smooth.mean[i],
            smooth.var[i],
        ]);
    }
    Ok(t)
}

fn compare(run: &Run) -> Result<TableOutput> {
    let cfg = run
        .config
        .compare
        .clone()
        .ok_or_else(|| CliError::Config("compare needs a [compare] section".into()))?;
    let (points, (lm, lv), (rm, rv)) = match cfg.quantity {
        Quantity::Predict => {
            let points = run.config.points.resolve(run.data.inputs())?;
            let l = run.predictive(cfg.left, &points)?;
            let r = run.predictive(cfg.right, &points)?;
            (points, l, r)
        }
        Quantity::Smooth => {
            let (a, b, _) = run.smoothed(cfg.left)?;
            let (c, d, _) = run.smoothed(cfg.right)?;
            (run.data.inputs().to_vec(), (a, b), (c, d))
        }
    };
    let (left, right) = (cfg.left.name(), cfg.right.name());
    let mut header = vec!["row".to_string()];
    header.extend(run.input_names("x"));
    header.extend([format!("{left}_mean"), format!("{right}_mean"), "mean_delta".into()]);
    let vars = lv.zip(rv);
    if vars.is_some() {
        header.extend([format!("{left}_var"), format!("{right}_var"), "var_delta".into()]);
    }
    let width = header.len();
    let mut t = run.table(Command::Compare, header);
    t.meta("left", left);
    t.meta("right", right);
    t.meta("quantity", format!("{:?}", cfg.quantity).to_lowercase());
    let (mut max_mean, mut max_var): (f64, f64) = (0.0, 0.0);
    for (i, x) in points.iter().enumerate() {
        let mut row = vec![(i + 1) as f64];
        row.extend(x);
        let dm = lm[i] - rm[i];
        max_mean = max_mean.max(dm.abs());
        row.extend([lm[i], rm[i], dm]);
        if let Some((a, b)) = &vars {
            let dv = a[i] - b[i];
            max_var = max_var.max(dv.abs());
            row.extend([a[i], b[i], dv]);
        }
        t.push_reals(&row);
    }
    let mut summary = vec![String::new(); width];
    summary[0] = "max_abs".into();
    let mean_col = 1 + run.data.dim() + 2;
    summary[mean_col] = fmt_real(max_mean);
    t.meta("max_abs_mean_delta", fmt_real(max_mean));
    if vars.is_some() {
        summary[mean_col + 3] = fmt_real(max_var);
        t.meta("max_abs_var_delta", fmt_real(max_var));
    }
    t.push(summary);
    Ok(t)
}
