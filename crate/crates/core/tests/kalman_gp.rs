use bayeskern::gp::GpModel;
use bayeskern::kalman::{FilterInit, StateSpaceAR1};
use bayeskern::numerics::SeededRng;
use bayeskern::Dataset;

fn ar1_series(model: &StateSpaceAR1, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = SeededRng::new(seed);
    let mut f = model.stationary_variance().sqrt() * rng.standard_normal();
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        f = model.gamma() * f + model.process_var().sqrt() * rng.standard_normal();
        y.push(f + model.obs_var().sqrt() * rng.standard_normal());
    }
    y
}

fn times(n: usize) -> Vec<f64> {
    (1..=n).map(|t| t as f64).collect()
}

#[test]
fn filter_matches_prefix_gp() {
    for (gamma, seed) in [(0.8, 1), (-0.6, 2), (0.0, 3)] {
        let model = StateSpaceAR1::new(gamma, 0.5, 0.3).unwrap();
        let y = ar1_series(&model, 40, seed);
        let track = model.forward_filter(&y, FilterInit::Stationary).unwrap();
        let ts = times(40);
        for t in 1..=40 {
            let d = Dataset::scalar(&ts[..t], &y[..t]).unwrap();
            let gp = GpModel::new(d, model.kernel_spec(), model.obs_var()).unwrap();
            let (m, v) = gp.predict(&[t as f64]).unwrap();
            assert!((m - track.filt_mean[t - 1]).abs() <= 1e-8);
            assert!((v - track.filt_var[t - 1]).abs() <= 1e-8);
        }
    }
}

#[test]
fn smoother_matches_batch_gp() {
    let model = StateSpaceAR1::new(0.8, 0.36, 0.5).unwrap();
    let y = ar1_series(&model, 100, 4);
    let smooth = model.backward_smooth(&model.forward_filter(&y, FilterInit::Stationary).unwrap());
    let gp = GpModel::new(Dataset::scalar(&times(100), &y).unwrap(), model.kernel_spec(), 0.5).unwrap();
    let s = gp.smooth().unwrap();
    for t in 0..100 {
        assert!((s.mean[t] - smooth.mean[t]).abs() <= 1e-8);
        assert!((s.cov[(t, t)] - smooth.var[t]).abs() <= 1e-8);
    }
}

#[test]
fn variance_recursions_are_ordered() {
    let model = StateSpaceAR1::new(0.9, 0.2, 0.4).unwrap();
    let y = ar1_series(&model, 80, 5);
    let track = model.forward_filter(&y, FilterInit::Stationary).unwrap();
    let smooth = model.backward_smooth(&track);
    for t in 0..80 {
        assert!(track.filt_var[t] >= 0.0);
        assert!(track.filt_var[t] <= track.pred_var[t].min(model.obs_var()));
        assert!(smooth.var[t] <= track.filt_var[t] + 1e-12);
    }
    assert!(model.precision_form_gap(&track) <= 1e-12);
}
