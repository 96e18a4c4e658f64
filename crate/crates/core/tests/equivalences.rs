mod common;

use bayeskern::evidence::{gp_log_marginal, qgp_log_marginal, rvm_log_marginal};
use bayeskern::gp::GpModel;
use bayeskern::kernels::{design_matrix, design_vector};
use bayeskern::numerics::{psd_factorize, SeededRng, SymMatrix};
use bayeskern::qgp::QgpModel;
use bayeskern::rvm::{RvmModel, WeightPrior};
use bayeskern::{BasisSet, Dataset, DualKernel, KernelSpec};
use common::{jittered_grid, normals, pts, uniform};
use nalgebra::DMatrix;

fn se(a: f64, lambda: f64) -> KernelSpec {
    KernelSpec::squared_exponential(a, lambda)
}

fn data(seed: u64, n: usize, span: f64) -> Dataset {
    let mut rng = SeededRng::new(seed);
    let xs = jittered_grid(&mut rng, n, 0.0, span);
    let ys: Vec<f64> = xs.iter().map(|x| (0.7 * x).sin() + 0.2 * rng.standard_normal()).collect();
    Dataset::scalar(&xs, &ys).unwrap()
}

fn three_models(d: &Dataset, kernel: &KernelSpec, noise: f64) -> (GpModel, QgpModel, RvmModel) {
    let basis = BasisSet::homogeneous(kernel, d.inputs()).unwrap();
    let gp = GpModel::new(d.clone(), kernel.clone(), noise).unwrap();
    let qgp = QgpModel::new(d.clone(), basis.clone(), noise).unwrap();
    let design = design_matrix(&basis, d.inputs()).unwrap();
    let prior = WeightPrior::inverse_design(&design).unwrap();
    let rvm = RvmModel::new(d.clone(), basis, prior, noise).unwrap();
    (gp, qgp, rvm)
}

#[test]
fn gp_and_quasi_gp_means_coincide() {
    let d = data(1, 40, 20.0);
    let (gp, qgp, _) = three_models(&d, &se(1.0, 0.4), 0.1);
    let mut rng = SeededRng::new(2);
    for _ in 0..50 {
        let x = [uniform(&mut rng, -3.0, 23.0)];
        let g = gp.predict(&x).unwrap().0;
        let q = qgp.predict(&x).unwrap().0;
        assert!((g - q).abs() <= 1e-9 * (1.0 + g.abs()));
    }
}

#[test]
fn smoothing_agrees_across_all_three_models() {
    let d = data(3, 50, 25.0);
    let (gp, qgp, rvm) = three_models(&d, &se(1.2, 0.3), 0.2);
    let (a, b, c) = (gp.smooth().unwrap(), qgp.smooth().unwrap(), rvm.smooth().unwrap());
    assert!((&a.mean - &b.mean).amax() <= 1e-9);
    assert!((&a.cov - &b.cov).amax() <= 1e-9);
    assert!((&a.mean - &c.mean).amax() <= 1e-9);
    assert!((&a.cov - &c.cov).amax() <= 1e-9);
}

#[test]
fn quasi_gp_is_the_inverse_design_rvm() {
    let d = data(4, 20, 10.0);
    let (_, qgp, rvm) = three_models(&d, &se(0.9, 0.4), 0.3);
    let (pq, pr) = (qgp.weight_posterior().unwrap(), rvm.weight_posterior().unwrap());
    assert!((&pq.mean - &pr.mean).amax() <= 1e-9 * (1.0 + pq.mean.amax()));
    assert!((pq.cov.matrix() - pr.cov.matrix()).amax() <= 1e-9 * (1.0 + pq.cov.matrix().amax()));
    for x in [-1.0, 2.3, 5.55, 9.9, 14.0] {
        let (mq, vq) = qgp.predict(&[x]).unwrap();
        let (mr, vr) = rvm.predict(&[x]).unwrap();
        assert!((mq - mr).abs() <= 1e-9 && (vq - vr).abs() <= 1e-9);
    }
}

#[test]
fn scalar_quasi_gp_posterior_matches_rvm() {
    let d = Dataset::scalar(&[0.0], &[2.0]).unwrap();
    let (_, qgp, rvm) = three_models(&d, &se(1.0, 1.0), 1.0);
    let (a, b) = (qgp.weight_posterior().unwrap(), rvm.weight_posterior().unwrap());
    assert!((a.mean[0] - 1.0).abs() < 1e-15 && (b.mean[0] - 1.0).abs() < 1e-15);
    assert!((a.cov.matrix()[(0, 0)] - 0.5).abs() < 1e-15 && (b.cov.matrix()[(0, 0)] - 0.5).abs() < 1e-15);
}

#[test]
fn heterogeneous_rvm_is_a_gp_under_its_dual_kernel() {
    let mut rng = SeededRng::new(5);
    let xs = jittered_grid(&mut rng, 30, 0.0, 15.0);
    let ys = normals(&mut rng, 30, 1.0);
    let d = Dataset::scalar(&xs, &ys).unwrap();
    let specs: Vec<KernelSpec> = (0..30).map(|i| se(1.0, if i % 2 == 0 { 0.3 } else { 1.5 })).collect();
    let basis = BasisSet::heterogeneous(&specs, d.inputs()).unwrap();
    let vars: Vec<f64> = (0..30).map(|_| uniform(&mut rng, 0.5, 2.0)).collect();
    let prior = WeightPrior::diagonal(&vars).unwrap();
    let rvm = RvmModel::new(d.clone(), basis.clone(), prior.clone(), 0.05).unwrap();
    let dual = DualKernel::new(basis, prior.cov().clone()).unwrap();
    let gp = GpModel::new(d, dual, 0.05).unwrap();
    for _ in 0..20 {
        let x = [uniform(&mut rng, -2.0, 17.0)];
        let (mr, vr) = rvm.predict(&x).unwrap();
        let (mg, vg) = gp.predict(&x).unwrap();
        assert!((mr - mg).abs() <= 1e-8, "mean {mr} vs {mg}");
        assert!((vr - vg).abs() <= 1e-8, "variance {vr} vs {vg}");
    }
}

#[test]
fn noiseless_models_interpolate() {
    let d = data(6, 12, 12.0);
    let kernel = se(1.0, 0.5);
    let (gp, qgp, rvm) = three_models(&d, &kernel, 0.0);
    let iso = RvmModel::new(
        d.clone(),
        BasisSet::homogeneous(&kernel, d.inputs()).unwrap(),
        WeightPrior::isotropic(12, 1.0).unwrap(),
        0.0,
    )
    .unwrap();
    for (x, y) in d.inputs().iter().zip(d.outputs().iter()) {
        for m in [gp.predict(x).unwrap(), qgp.predict(x).unwrap(), rvm.predict(x).unwrap(), iso.predict(x).unwrap()] {
            assert!((m.0 - y).abs() <= 1e-6);
        }
        assert!(gp.predict(x).unwrap().1 <= 1e-8);
    }
    let psi = SymMatrix::symmetrized(design_matrix(&BasisSet::homogeneous(&kernel, d.inputs()).unwrap(), d.inputs()).unwrap().matrix().clone()).unwrap();
    let f = psd_factorize(&psi, 0.0).unwrap();
    for i in 0..200 {
        let x = [-2.0 + 16.0 * i as f64 / 199.0];
        assert!(qgp.predict(&x).unwrap().1 <= 1e-8);
        assert!(iso.predict(&x).unwrap().1 <= 1e-8);
        let psi_x = design_vector(qgp.basis(), &x).unwrap();
        let expected = kernel.eval(&x, &x).unwrap() - f.quad_form(&psi_x).unwrap();
        assert!((gp.predict(&x).unwrap().1 - expected).abs() <= 1e-8);
    }
}

#[test]
fn far_field_behaviour() {
    let d = data(7, 15, 10.0);
    let lambda = 0.6;
    let (gp, qgp, _) = three_models(&d, &se(0.8, lambda), 0.09);
    for x in [10.0 + 20.0 * lambda, -20.0 * lambda, 200.0] {
        let (mg, vg) = gp.predict(&[x]).unwrap();
        let (mq, vq) = qgp.predict(&[x]).unwrap();
        assert!(mg.abs() <= 1e-6 && (vg - 0.8).abs() <= 1e-6);
        assert!(mq.abs() <= 1e-6 && vq.abs() <= 1e-6);
    }
}

#[test]
fn gp_and_quasi_gp_evidence_bit_equal() {
    for seed in 0..5 {
        let d = data(10 + seed, 25, 12.0);
        let (gp, qgp, rvm) = three_models(&d, &se(1.1, 0.35), 0.15);
        let g = gp_log_marginal(&gp).unwrap();
        assert_eq!(g.to_bits(), qgp_log_marginal(&qgp).unwrap().to_bits());
        assert!((rvm_log_marginal(&rvm).unwrap() - g).abs() <= 1e-10);
    }
}

#[test]
fn scalar_evidence_value() {
    let d = Dataset::scalar(&[0.0], &[0.0]).unwrap();
    let (gp, _, _) = three_models(&d, &se(1.0, 1.0), 1.0);
    let expected = -0.5 * (2.0 * std::f64::consts::PI * 2.0).ln();
    assert!((gp_log_marginal(&gp).unwrap() - expected).abs() < 1e-15);
}

#[test]
fn uninformative_prior_recovers_design_inverse() {
    let d = data(8, 8, 8.0);
    let basis = BasisSet::homogeneous(&se(1.0, 0.5), d.inputs()).unwrap();
    let m = RvmModel::new(d.clone(), basis, WeightPrior::isotropic(8, 1e12).unwrap(), 1.0).unwrap();
    let direct = m.design().matrix().clone().lu().solve(d.outputs()).unwrap();
    let mean = m.weight_posterior().unwrap().mean;
    assert!((&mean - &direct).amax() <= 1e-4 * direct.amax());
}

#[test]
fn posterior_forms_agree_on_random_instances() {
    let mut rng = SeededRng::new(9);
    for seed in 0..10 {
        let d = data(100 + seed, 10, 8.0);
        let vars: Vec<f64> = (0..10).map(|_| uniform(&mut rng, 0.3, 3.0)).collect();
        let basis = BasisSet::homogeneous(&se(1.0, uniform(&mut rng, 0.3, 1.0)), d.inputs()).unwrap();
        let noise = uniform(&mut rng, 0.05, 1.0);
        let m = RvmModel::new(d, basis, WeightPrior::diagonal(&vars).unwrap(), noise).unwrap();
        m.weight_posterior_checked().unwrap();
    }
}

#[test]
fn rvm_posterior_shrinks_the_prior() {
    let d = data(12, 10, 8.0);
    let basis = BasisSet::homogeneous(&se(1.0, 0.7), d.inputs()).unwrap();
    let m = RvmModel::new(d, basis, WeightPrior::isotropic(10, 2.0).unwrap(), 0.2).unwrap();
    let post = m.weight_posterior().unwrap();
    let gap = SymMatrix::symmetrized(m.prior().cov().matrix() - post.cov.matrix()).unwrap();
    assert!(psd_factorize(&gap, 1e-10).is_ok());
}

#[test]
fn gp_marginalization_is_consistent() {
    let d = data(13, 10, 8.0);
    let gp = GpModel::new(d, se(1.0, 1.0), 0.1).unwrap();
    let a = pts(&[0.5, 3.3, 9.0]);
    let mut ab = a.clone();
    ab.extend(pts(&[1.7, -1.0, 6.2, 4.4]));
    let ja = gp.predict_joint(&a).unwrap();
    let jab = gp.predict_joint(&ab).unwrap();
    assert!((ja.mean - jab.mean.rows(0, 3)).amax() <= 1e-10);
    let block: DMatrix<f64> = jab.cov.matrix().view((0, 0), (3, 3)).into_owned();
    assert!((ja.cov.matrix() - block).amax() <= 1e-10);
}
