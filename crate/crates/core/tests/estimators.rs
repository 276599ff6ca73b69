use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use torus_wle::estimators::{
    check_convergence, classify, fit, fit_from, moment_start, posterior_lattice_weights, select_root, single_update,
    wcem_fit, EstimatorKind, FitConfig, FitResult,
};
use torus_wle::experiments::{
    generate_contaminated, sample_wrapped_normal, sqrt_angular_separation, ContaminationSpec, Scenario,
};
use torus_wle::kde::Bandwidth;
use torus_wle::raf::RafKind;
use torus_wle::residual::residual_distance;
use torus_wle::torus::{AngleVector, LatticeBox, NormalGenerator, WrappedModelParams};
use torus_wle::Error;

fn av(v: &[f64]) -> AngleVector {
    AngleVector::new(v.to_vec()).unwrap()
}

fn sample(params: &WrappedModelParams, n: usize, seed: u64) -> Vec<AngleVector> {
    sample_wrapped_normal(params, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn smoothing(kind: EstimatorKind, sigma: f64) -> FitConfig {
    FitConfig::default().with_smoothing(kind, if kind.uses_distance_bandwidth() { 0.5 } else { sigma / 2.0 })
}

fn contaminated(fraction: f64, shift: f64, seed: u64) -> torus_wle::experiments::ContaminatedSample {
    let scenario = Scenario { contamination: ContaminationSpec { fraction, shift, ..Default::default() }, ..Default::default() };
    generate_contaminated(&scenario, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn separation(fit: &FitResult, truth: &WrappedModelParams) -> f64 {
    sqrt_angular_separation(fit.params.mu(), truth.mu()).unwrap()
}

#[test]
fn em_and_cem_recover_a_concentrated_model() {
    let truth = WrappedModelParams::isotropic(av(&[3.0, 3.0]), PI / 8.0).unwrap();
    let data = sample(&truth, 2000, 1);
    let em = fit(&data, EstimatorKind::Em, &FitConfig::default()).unwrap();
    let cem = fit(&data, EstimatorKind::Cem, &FitConfig::default()).unwrap();
    assert!(em.converged && cem.converged);
    assert!(separation(&em, &truth) < 0.02);
    assert!(sqrt_angular_separation(em.params.mu(), cem.params.mu()).unwrap() < 1e-3);
    assert!((em.params.sigma() - truth.sigma()).norm() < 0.02);
}

#[test]
fn repeated_point_hits_the_degenerate_scatter_path() {
    let point = av(&[1.0, 4.0]);
    let data = vec![point.clone(); 50];
    let err = fit(&data, EstimatorKind::Em, &FitConfig::default()).unwrap_err();
    assert!(matches!(err, Error::InitializationFailed), "{err:?}");

    let start = WrappedModelParams::isotropic(av(&[0.8, 4.3]), 0.5).unwrap();
    match fit_from(&data, EstimatorKind::Em, &FitConfig::default(), &start).unwrap_err() {
        Error::DegenerateScatter { mu, .. } => {
            assert!((mu[0] - 1.0).abs() < 1e-12 && (mu[1] - 4.0).abs() < 1e-12, "{mu:?}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn posterior_lattice_weights_examples() {
    let lattice = LatticeBox::new(2, 1).unwrap();
    let tight = WrappedModelParams::isotropic(av(&[1.0]), PI / 8.0).unwrap();
    let w = posterior_lattice_weights(&av(&[1.0]), &tight, &NormalGenerator, &lattice).unwrap();
    for (j, v) in &w {
        if j.0 == [0] {
            assert!((v - 1.0).abs() < 1e-15);
        } else {
            assert!(*v < 1e-30);
        }
    }

    // At y = μ itself the largest share is 0.5011, just above one half.
    let wide = WrappedModelParams::isotropic(av(&[1.0]), 5.0).unwrap();
    let w = posterior_lattice_weights(&av(&[1.0 + PI / 2.0]), &wide, &NormalGenerator, &LatticeBox::new(3, 1).unwrap()).unwrap();
    let total: f64 = w.iter().map(|(_, v)| v).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(w.iter().all(|(_, v)| *v < 0.5));
    assert!(w.iter().filter(|(_, v)| *v > 0.01).count() >= 4);
}

#[test]
fn classification_ties_prefer_the_smaller_winding() {
    let params = WrappedModelParams::isotropic(av(&[0.5]), 0.4).unwrap();
    let lattice = LatticeBox::new(2, 1).unwrap();
    let j = classify(&av(&[0.5 + PI]), &params, &NormalGenerator, &lattice).unwrap();
    assert_eq!(j.0, [0]);
    let j = classify(&av(&[0.5 - PI]), &params, &NormalGenerator, &lattice).unwrap();
    assert!(j.0[0].abs() <= 1);
}

#[test]
fn weighted_fits_agree_with_likelihood_fits_on_clean_data() {
    let s = contaminated(0.0, PI, 4);
    let em = fit(&s.data, EstimatorKind::Em, &FitConfig::default()).unwrap();
    let cem = fit(&s.data, EstimatorKind::Cem, &FitConfig::default()).unwrap();
    let wem = fit(&s.data, EstimatorKind::Wem, &smoothing(EstimatorKind::Wem, PI / 8.0)).unwrap();
    assert!(sqrt_angular_separation(wem.params.mu(), em.params.mu()).unwrap() < 0.01);
    for kind in [EstimatorKind::WcemTorus, EstimatorKind::WcemUnwrap, EstimatorKind::WcemDist] {
        let w = wcem_fit(&s.data, kind, &smoothing(kind, PI / 8.0)).unwrap();
        let gap = sqrt_angular_separation(w.params.mu(), cem.params.mu()).unwrap();
        assert!(gap < 0.01, "{kind}: {gap}");
    }
}

#[test]
fn weighted_fits_resist_far_contamination() {
    let s = contaminated(0.2, PI, 9);
    let em = separation(&fit(&s.data, EstimatorKind::Em, &FitConfig::default()).unwrap(), &s.truth);
    // the shift runs along one unit direction, so EM moves by about επ and lands near 0.45
    assert!(em > 0.3, "EM {em}");
    for kind in [EstimatorKind::Wem, EstimatorKind::WcemTorus, EstimatorKind::WcemUnwrap] {
        let w = separation(&fit(&s.data, kind, &smoothing(kind, PI / 8.0)).unwrap(), &s.truth);
        assert!(w < 0.1 && em > 5.0 * w, "{kind}: {w} vs EM {em}");
    }
}

#[test]
fn outliers_get_small_weights() {
    let s = contaminated(0.1, PI / 2.0, 5);
    for kind in [EstimatorKind::Wem, EstimatorKind::WcemTorus, EstimatorKind::WcemUnwrap] {
        let w = fit(&s.data, kind, &smoothing(kind, PI / 8.0)).unwrap();
        let split = |outlier: bool| -> Vec<f64> {
            w.weights.iter().zip(&s.outlier_mask).filter(|(_, &m)| m == outlier).map(|(&x, _)| x).collect()
        };
        let (out, bulk) = (median(split(true)), median(split(false)));
        assert!(out < 0.1 && bulk > 0.9, "{kind}: outliers {out}, bulk {bulk}");
    }
}

#[test]
fn identity_raf_reproduces_likelihood_fits_exactly() {
    let s = contaminated(0.1, PI, 2);
    let base = FitConfig { raf: RafKind::Identity, ..FitConfig::default() };
    let start = moment_start(&s.data, base.ridge).unwrap();
    let em = fit_from(&s.data, EstimatorKind::Em, &base, &start).unwrap();
    let cem = fit_from(&s.data, EstimatorKind::Cem, &base, &start).unwrap();
    let pairs = [
        (EstimatorKind::Wem, &em),
        (EstimatorKind::WcemTorus, &cem),
        (EstimatorKind::WcemUnwrap, &cem),
        (EstimatorKind::WcemDist, &cem),
    ];
    for (kind, reference) in pairs {
        let w = fit_from(&s.data, kind, &base.clone().with_smoothing(kind, 0.3), &start).unwrap();
        assert_eq!(w.params, reference.params, "{kind}");
        assert_eq!(w.iterations, reference.iterations, "{kind}");
        let lls = |f: &FitResult| f.trace.iter().map(|t| t.log_likelihood).collect::<Vec<_>>();
        assert_eq!(lls(&w), lls(reference), "{kind}");
        assert!(w.weights.iter().all(|&x| x == 1.0));
    }
}

#[test]
fn distance_weights_depend_only_on_distances() {
    let s = contaminated(0.1, PI, 6);
    let cfg = smoothing(EstimatorKind::WcemDist, PI / 8.0);
    let w = fit(&s.data, EstimatorKind::WcemDist, &cfg).unwrap();
    let b = w.distance_bandwidth;
    for (i, &d2) in w.distances.iter().enumerate() {
        let delta = residual_distance(d2, &w.distances, 2, b, None).unwrap();
        assert!((cfg.raf.weight(delta) - w.weights[i]).abs() < 1e-6, "observation {i}");
    }
}

#[test]
fn moment_start_examples() {
    // ρ̂ = e^{-1/2} gives unit variance
    let a = (-0.5f64).exp().acos();
    let data: Vec<AngleVector> = (0..40).map(|i| av(&[if i % 2 == 0 { a } else { -a }, 0.1 * i as f64])).collect();
    let start = moment_start(&data, 1e-8).unwrap();
    assert!((start.sigma()[(0, 0)] - 1.0).abs() < 1e-9);

    // a constant margin has ρ̂ = 1 and only survives through the ridge
    let constant: Vec<AngleVector> = (0..40).map(|i| av(&[2.0, 0.1 * i as f64])).collect();
    let start = moment_start(&constant, 1e-8).unwrap();
    let shift = 1e-8 * start.sigma().trace() / 2.0;
    assert!(start.sigma()[(0, 0)] > 0.0 && start.sigma()[(0, 0)] < 2.0 * shift);

    // identical margins are perfectly correlated
    let twin: Vec<AngleVector> = (0..40).map(|i| av(&[0.05 * i as f64, 0.05 * i as f64])).collect();
    let s = moment_start(&twin, 1e-8).unwrap();
    let m = s.sigma();
    assert!((m[(0, 1)] - (m[(0, 0)] * m[(1, 1)]).sqrt()).abs() < 1e-6 * m[(0, 0)]);
}

#[test]
fn root_selection() {
    let s = contaminated(0.3, PI, 8);
    let cfg = smoothing(EstimatorKind::WcemUnwrap, PI / 8.0);
    let bulk = fit_from(&s.data, EstimatorKind::WcemUnwrap, &cfg, &s.truth).unwrap();
    let far_mu: Vec<f64> = s.shift_direction.iter().map(|d| d * PI).collect();
    let far_start = WrappedModelParams::new(av(&far_mu), s.truth.sigma().clone()).unwrap();
    let far = fit_from(&s.data, EstimatorKind::WcemUnwrap, &cfg, &far_start).unwrap();
    assert!(sqrt_angular_separation(far.params.mu(), bulk.params.mu()).unwrap() > 0.5);

    assert_eq!(select_root(&[], -0.5), None);
    assert_eq!(select_root(std::slice::from_ref(&far), -0.5), Some(0));
    assert_eq!(select_root(&[bulk.clone(), bulk.clone()], -0.5), Some(0));
    assert_eq!(select_root(&[far.clone(), bulk.clone()], -0.5), Some(1));
    assert_eq!(select_root(&[bulk, far], -0.5), Some(0));
}

#[test]
fn convergence_measures_chordal_and_frobenius_change() {
    let a = WrappedModelParams::isotropic(av(&[0.0, 1.0]), 0.3).unwrap();
    let same = check_convergence(&a, &a, 1e-6);
    assert!(same.converged && same.mu_change == 0.0 && same.sigma_change == 0.0);
    let across = WrappedModelParams::isotropic(av(&[TAU - 1e-9, 1.0]), 0.3).unwrap();
    assert!(check_convergence(&a, &across, 1e-6).converged);
    let b = WrappedModelParams::new(av(&[0.0, 1.0]), DMatrix::identity(2, 2) * 0.0901).unwrap();
    let c = check_convergence(&a, &b, 1e-6);
    assert!(!c.converged && (c.sigma_change - 2f64.sqrt() * 1e-4).abs() < 1e-12);
}

#[test]
fn converged_fits_are_fixed_points() {
    let truth = WrappedModelParams::isotropic(av(&[5.0, 0.5]), 0.5).unwrap();
    let data = sample(&truth, 300, 3);
    let cfg = FitConfig { tol: 1e-10, ..smoothing(EstimatorKind::Wem, 0.5) };
    for kind in [EstimatorKind::Em, EstimatorKind::Wem] {
        let f = fit(&data, kind, &cfg).unwrap();
        assert!(f.converged);
        let next = single_update(&data, kind, &cfg, &f.params).unwrap();
        let step = check_convergence(&f.params, &next, 1e-8);
        assert!(step.converged, "{kind}: {step:?}");
    }
}

#[test]
fn weights_under_the_model_are_close_to_one() {
    let sigma = PI / 8.0;
    let truth = WrappedModelParams::isotropic(av(&[2.0]), sigma).unwrap();
    let data = sample(&truth, 2000, 12);
    let lattice = LatticeBox::new(2, 1).unwrap();
    let h = Bandwidth::new(sigma / 2.0).unwrap();
    let raf = RafKind::default();
    let total: f64 = data
        .iter()
        .map(|y| raf.weight(torus_wle::residual::residual_torus(y, &data, &truth, h, &lattice).unwrap()))
        .sum();
    assert!(total / 2000.0 >= 0.9, "mean weight {}", total / 2000.0);
}

#[test]
fn error_paths() {
    let truth = WrappedModelParams::isotropic(av(&[1.0, 1.0]), 0.3).unwrap();
    let data = sample(&truth, 50, 1);
    for kind in [EstimatorKind::Wem, EstimatorKind::WcemTorus, EstimatorKind::WcemUnwrap] {
        assert!(matches!(fit(&data, kind, &FitConfig::default()), Err(Error::InvalidArgument(_))));
    }
    assert!(fit(&data, EstimatorKind::WcemDist, &FitConfig::default()).is_ok());
    assert!(wcem_fit(&data, EstimatorKind::Em, &FitConfig::default()).is_err());
    assert!(matches!(fit(&data[..5], EstimatorKind::Em, &FitConfig::default()), Err(Error::InvalidArgument(_))));
    let bad = FitConfig { raf: RafKind::Gkl { tau: 2.0 }, ..FitConfig::default() };
    assert!(fit(&data, EstimatorKind::Em, &bad).is_err());
    let mut mixed = data.clone();
    mixed.push(av(&[1.0]));
    assert!(matches!(fit(&mixed, EstimatorKind::Em, &FitConfig::default()), Err(Error::DimensionMismatch { .. })));
    let wide = vec![AngleVector::zeros(17); 40];
    assert!(matches!(fit(&wide, EstimatorKind::Em, &FitConfig::default()), Err(Error::DimensionTooLarge(17))));
}
