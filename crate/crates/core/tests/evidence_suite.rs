mod common;

use bayeskern::evidence::{
    mixture_predictive, monte_carlo_log_evidence, optimize_type2, sample_hyperposterior, Bounds, GpFamily, HyperModel,
    HyperParams, HyperPosterior, HyperPrior, McmcConfig, NOISE_VAR,
};
use bayeskern::kernels::kernel_matrix;
use bayeskern::numerics::{mvn_sample, SeededRng, SymMatrix};
use bayeskern::{Dataset, KernelSpec};
use common::{jittered_grid, pts};
use std::f64::consts::PI;

fn se_truth() -> HyperParams {
    HyperParams::new([("a", 1.0), ("lambda", 3.0), (NOISE_VAR, 0.25)])
}

/// Draws `y ~ N(0, K + σe²I)` at 60 jittered inputs on [0, 30].
fn synthetic(seed: u64) -> Dataset {
    let mut rng = SeededRng::new(seed);
    let xs = jittered_grid(&mut rng, 60, 0.0, 30.0);
    let inputs = pts(&xs);
    let k = kernel_matrix(&KernelSpec::squared_exponential(1.0, 3.0), &inputs).unwrap();
    let cov = SymMatrix::symmetrized(k.matrix() + nalgebra::DMatrix::identity(60, 60) * 0.25).unwrap();
    let y = mvn_sample(&nalgebra::DVector::zeros(60), &cov, &mut rng, 1).unwrap();
    Dataset::scalar(&xs, y.draws.row(0).iter().copied().collect::<Vec<_>>().as_slice()).unwrap()
}

fn se_bounds() -> Bounds {
    [
        ("a".to_string(), (1e-2, 1e2)),
        ("lambda".to_string(), (1e-2, 1e3)),
        (NOISE_VAR.to_string(), (1e-4, 1e2)),
    ]
    .into_iter()
    .collect()
}

#[test]
fn type2_fit_beats_the_generating_point() {
    for seed in [1, 2, 3] {
        let fam = GpFamily::new(synthetic(seed), "squared-exp-general");
        let theta0 = HyperParams::new([("a", 2.0), ("lambda", 1.0), (NOISE_VAR, 1.0)]);
        let fit = optimize_type2(&fam, &theta0, &se_bounds(), 400).unwrap();
        let at_truth = -fam.log_marginal(&se_truth()).unwrap();
        assert!(fit.nll <= at_truth, "fit {} vs truth {at_truth}", fit.nll);
        assert_eq!(fit.trace[0].theta, theta0);
        assert!(fit.trace.windows(2).all(|w| w[1].nll <= w[0].nll));
        assert_eq!(fit.trace.last().unwrap().nll, fit.nll);
        let d = fam.nll_decomposition(&fit.theta).unwrap();
        assert!((d.fit + d.complexity + d.constant - fit.nll).abs() <= 1e-9 * fit.nll.abs().max(1.0));
        assert!((d.constant - 30.0 * (2.0 * PI).ln()).abs() <= 1e-12);
    }
}

/// One observation `y` at 0 under a unit SE kernel; only `σe²` is free.
fn scalar_family(y: f64) -> (GpFamily, HyperParams, HyperPrior, Vec<String>) {
    let fam = GpFamily::new(Dataset::scalar(&[0.0], &[y]).unwrap(), "squared-exp-general");
    let theta0 = HyperParams::new([("a", 1.0), ("lambda", 1.0), (NOISE_VAR, 0.5)]);
    let prior = HyperPrior::LogNormal {
        median: theta0.clone(),
        log_sd: 1.0,
    };
    (fam, theta0, prior, vec![NOISE_VAR.to_string()])
}

/// Posterior moments of `u = log σe²` by quadrature on a fine grid.
fn grid_moments(y: f64) -> (f64, f64, f64) {
    let m = 0.5f64.ln();
    let log_target = |u: f64| {
        let v = 1.0 + u.exp();
        -0.5 * (2.0 * PI * v).ln() - 0.5 * y * y / v - 0.5 * (u - m).powi(2) - 0.5 * (2.0 * PI).ln()
    };
    let h = 1e-3;
    let (mut z, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for i in 0..=24_000 {
        let u = -14.0 + h * i as f64;
        let w = log_target(u).exp() * h;
        z += w;
        s1 += w * u;
        s2 += w * u * u;
    }
    let mean = s1 / z;
    (mean, s2 / z - mean * mean, z.ln())
}

fn chain_log_noise(seed: u64, y: f64) -> Vec<f64> {
    let (fam, theta0, prior, free) = scalar_family(y);
    let config = McmcConfig {
        chain_len: 40_000,
        burn_in: 2000,
        thin: 2,
        proposal_scale: 1.0,
        tune: true,
    };
    let post = sample_hyperposterior(&fam, &prior, &theta0, &free, &mut SeededRng::new(seed), config).unwrap();
    assert!(post.acceptance_rate > 0.1 && post.acceptance_rate < 0.9);
    assert!(post.moves.iter().any(|m| m.accepted));
    post.draws.iter().map(|t| t.get(NOISE_VAR).unwrap().ln()).collect()
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
}

#[test]
fn metropolis_matches_grid_posterior() {
    let y = 1.7;
    let (gm, gv, _) = grid_moments(y);
    let (cm, cv) = mean_var(&chain_log_noise(7, y));
    assert!((cm - gm).abs() <= 0.08, "chain mean {cm} vs grid {gm}");
    assert!((cv / gv - 1.0).abs() <= 0.15, "chain variance {cv} vs grid {gv}");
}

#[test]
fn independent_chains_agree() {
    let y = -0.4;
    let (a, _) = mean_var(&chain_log_noise(11, y));
    let (b, _) = mean_var(&chain_log_noise(12, y));
    assert!((a - b).abs() <= 0.1, "{a} vs {b}");
}

#[test]
fn chains_are_reproducible() {
    assert_eq!(chain_log_noise(3, 0.9), chain_log_noise(3, 0.9));
}

#[test]
fn monte_carlo_evidence_matches_quadrature() {
    let y = 1.1;
    let (fam, _, prior, free) = scalar_family(y);
    let (_, _, log_z) = grid_moments(y);
    let mc = monte_carlo_log_evidence(&fam, &prior, &free, &mut SeededRng::new(5), 20_000).unwrap();
    assert!((mc - log_z).abs() <= 0.02, "{mc} vs {log_z}");
}

#[test]
fn mixture_variance_two_routes_agree() {
    let fam = GpFamily::new(synthetic(4).prefix(15).unwrap(), "squared-exp-general");
    let mut rng = SeededRng::new(9);
    let draws: Vec<HyperParams> = (0..25)
        .map(|_| HyperParams::new([("a", 0.5 + rng.uniform()), ("lambda", 1.0 + 4.0 * rng.uniform()), (NOISE_VAR, 0.1 + 0.5 * rng.uniform())]))
        .collect();
    let hyper = HyperPosterior::from_draws(draws).unwrap();
    let points = pts(&[-2.0, 0.3, 3.3, 7.0, 12.0]);
    let mix = mixture_predictive(&fam, &hyper, &points).unwrap();
    let total = mix.total_variance();
    for (j, tj) in total.iter().enumerate() {
        let second: f64 = (0..25).map(|s| mix.weights[s] * (mix.variances[s][j] + mix.means[s][j].powi(2))).sum();
        let direct = second - mix.mean[j].powi(2);
        assert!((direct - tj).abs() <= 1e-10, "{direct} vs {tj}");
    }
}

#[test]
fn single_draw_mixture_collapses() {
    let fam = GpFamily::new(synthetic(5).prefix(12).unwrap(), "squared-exp-general");
    let hyper = HyperPosterior::from_draws(vec![se_truth()]).unwrap();
    let points = pts(&[0.0, 2.5, 40.0]);
    let mix = mixture_predictive(&fam, &hyper, &points).unwrap();
    let curve = fam.predictive(&se_truth(), &points).unwrap();
    assert_eq!(mix.mean, curve.mean);
    assert_eq!(mix.within, curve.variance);
    assert!(mix.between.iter().all(|&b| b == 0.0));
}

#[test]
fn degenerate_proposal_barely_moves() {
    let (fam, theta0, _, free) = scalar_family(0.3);
    let config = McmcConfig {
        chain_len: 500,
        burn_in: 100,
        thin: 1,
        proposal_scale: 1e-9,
        tune: false,
    };
    let post = sample_hyperposterior(&fam, &HyperPrior::Flat, &theta0, &free, &mut SeededRng::new(1), config).unwrap();
    assert!(post.acceptance_rate >= 0.99);
}

#[test]
fn chain_mode_sits_in_the_top_decile_of_the_grid() {
    let y = 2.5;
    let draws = chain_log_noise(21, y);
    let (lo, hi) = (-6.0, 6.0);
    let bins = 60;
    let mut counts = vec![0usize; bins];
    for &u in &draws {
        if (lo..hi).contains(&u) {
            counts[((u - lo) / (hi - lo) * bins as f64) as usize] += 1;
        }
    }
    let top = (0..bins).max_by_key(|&b| counts[b]).unwrap();
    let mode = lo + (top as f64 + 0.5) * (hi - lo) / bins as f64;
    let (fam, theta0, prior, free) = scalar_family(y);
    let target = |u: f64| {
        let theta = theta0.with_log(&free, &[u]);
        let HyperPrior::LogNormal { median, log_sd } = &prior else { unreachable!() };
        let m = median.get(NOISE_VAR).unwrap().ln();
        fam.log_marginal(&theta).unwrap() - 0.5 * ((u - m) / log_sd).powi(2)
    };
    let mut grid: Vec<f64> = (0..=2000).map(|i| target(lo + (hi - lo) * i as f64 / 2000.0)).collect();
    grid.sort_by(f64::total_cmp);
    assert!(target(mode) >= grid[(0.9 * grid.len() as f64) as usize]);
}

/// Batch-means standard error of a correlated sample.
fn batch_se(v: &[f64]) -> f64 {
    let b = 50;
    let len = v.len() / b;
    let means: Vec<f64> = (0..b).map(|i| v[i * len..(i + 1) * len].iter().sum::<f64>() / len as f64).collect();
    let (_, var) = mean_var(&means);
    (var / b as f64).sqrt()
}

#[test]
fn lengthscale_chains_agree_within_standard_errors() {
    let mut rng = SeededRng::new(33);
    let xs = jittered_grid(&mut rng, 8, 0.0, 7.0);
    let ys: Vec<f64> = xs.iter().map(|x| (0.8 * x).sin() + 0.1 * rng.standard_normal()).collect();
    let fam = GpFamily::new(Dataset::scalar(&xs, &ys).unwrap(), "squared-exp-general");
    let theta0 = HyperParams::new([("a", 1.0), ("lambda", 1.0), (NOISE_VAR, 0.05)]);
    let free = vec!["lambda".to_string()];
    let prior = HyperPrior::default_for(&theta0);
    let config = McmcConfig {
        chain_len: 20_000,
        burn_in: 2000,
        thin: 2,
        ..McmcConfig::default()
    };
    let run = |seed| -> Vec<f64> {
        let post = sample_hyperposterior(&fam, &prior, &theta0, &free, &mut SeededRng::new(seed), config).unwrap();
        post.draws.iter().map(|t| t.get("lambda").unwrap().ln()).collect()
    };
    let (a, b) = (run(1), run(2));
    let se = (batch_se(&a).powi(2) + batch_se(&b).powi(2)).sqrt();
    let gap = (mean_var(&a).0 - mean_var(&b).0).abs();
    assert!(gap <= 4.0 * se, "gap {gap} vs 4·se {}", 4.0 * se);
}

#[test]
fn recorded_moves_satisfy_the_metropolis_rule() {
    let (fam, theta0, prior, free) = scalar_family(0.8);
    let config = McmcConfig {
        chain_len: 400,
        burn_in: 50,
        thin: 1,
        proposal_scale: 0.8,
        tune: false,
    };
    let post = sample_hyperposterior(&fam, &prior, &theta0, &free, &mut SeededRng::new(4), config).unwrap();
    let target = |u: f64| {
        let m = 0.5f64.ln();
        fam.log_marginal(&theta0.with_log(&free, &[u])).unwrap() - 0.5 * (u - m).powi(2)
    };
    for mv in &post.moves {
        let delta = target(mv.to[0]) - target(mv.from[0]);
        assert!((mv.accept_prob - delta.exp().min(1.0)).abs() <= 1e-12);
        assert_eq!(mv.accepted, mv.uniform < mv.accept_prob);
    }
    let accepted = post.moves.iter().filter(|m| m.accepted).count() as f64 / post.moves.len() as f64;
    assert_eq!(post.moves.len(), 400);
    assert!((accepted - post.acceptance_rate).abs() <= 1e-12);
}

#[test]
fn identical_draws_have_no_between_variance() {
    let fam = GpFamily::new(synthetic(6).prefix(10).unwrap(), "squared-exp-general");
    let hyper = HyperPosterior::from_draws(vec![se_truth(); 4]).unwrap();
    let points = pts(&[1.0, 8.0]);
    let mix = mixture_predictive(&fam, &hyper, &points).unwrap();
    let curve = fam.predictive(&se_truth(), &points).unwrap();
    for j in 0..2 {
        assert!(mix.between[j].abs() <= 1e-15);
        assert!((mix.within[j] - curve.variance[j]).abs() <= 1e-15);
        assert!(mix.total_variance()[j] >= mix.within[j]);
    }
}
