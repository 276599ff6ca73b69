use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution};
use torus_wle::experiments::sample_wrapped_normal;
use torus_wle::kde::{
    chi2_density, chi2_quantile, smoothed_wn_model, torus_kde, Bandwidth, LogDistanceKde, SmoothedReference,
};
use torus_wle::numeric::{periodic_trapezoid, simpson};
use torus_wle::raf::RafKind;
use torus_wle::residual::{residual_distance, residual_unwrapped, UnwrappedModelForm};
use torus_wle::torus::{wrapped_density, AngleVector, LatticeBox, WrappedModelParams};

fn chi2_sample(dof: usize, n: usize, seed: u64) -> Vec<f64> {
    let dist = ChiSquared::new(dof as f64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| dist.sample(&mut rng)).collect()
}

fn log_scale_mass(kde: &LogDistanceKde, lo: f64, hi: f64) -> f64 {
    simpson(|t| kde.density(t), lo, hi, 20_000)
}

#[test]
fn distance_kde_is_a_density_on_the_half_line() {
    let d2 = chi2_sample(4, 2000, 1);
    let kde = LogDistanceKde::new(&d2, None).unwrap();
    assert_eq!(kde.density(0.0), 0.0);
    assert!(kde.density(200.0) < 1e-12);
    // substitute t = e^s so the spike near zero is resolved
    let mass = simpson(|s: f64| (kde.log_density_log_scale(s)).exp(), -30.0, 6.0, 20_000);
    assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    assert!((log_scale_mass(&kde, 1e-9, 60.0) - 1.0).abs() < 1e-3);

    let grid: Vec<f64> = (1..400).map(|i| i as f64 * 0.02).collect();
    let mode = grid.iter().copied().max_by(|a, b| kde.density(*a).total_cmp(&kde.density(*b))).unwrap();
    assert!((mode - 2.0).abs() < 0.2 * 2.0 + 0.2, "mode {mode}");
}

#[test]
fn distance_kde_error_shrinks_with_sample_size() {
    let grid: Vec<f64> = (0..=60).map(|i| 0.5 + i as f64 * 0.125).collect();
    let sup_error = |n: usize| -> f64 {
        (0..20)
            .map(|seed| {
                let kde = LogDistanceKde::new(&chi2_sample(2, n, 100 + seed), None).unwrap();
                grid.iter().map(|&t| (kde.density(t) - chi2_density(t, 2)).abs()).fold(0.0, f64::max)
            })
            .sum::<f64>()
            / 20.0
    };
    let (e1, e2, e3) = (sup_error(250), sup_error(1000), sup_error(4000));
    for ratio in [e2 / e1, e3 / e2] {
        assert!((0.35..=0.65).contains(&ratio), "errors {e1} {e2} {e3}");
    }
}

#[test]
fn smoothed_reference_tends_to_chi2() {
    for dof in [2, 4, 7] {
        let r = SmoothedReference::chi2(dof, 1e-3).unwrap();
        for t in [0.5, 2.0, 6.0, 12.0] {
            let rel = (r.log_density(t) - chi2_density(t, dof).ln()).abs();
            assert!(rel < 1e-4, "dof {dof} t {t}: {rel}");
        }
    }
}

#[test]
fn smoothed_wrapped_model_is_the_convolution() {
    let params = WrappedModelParams::isotropic(AngleVector::new(vec![1.0]).unwrap(), 0.4).unwrap();
    let h = Bandwidth::new(0.25).unwrap();
    let lattice = LatticeBox::new(3, 1).unwrap();
    let at = |y: f64| AngleVector::new(vec![y]).unwrap();
    let kernel = WrappedModelParams::isotropic(AngleVector::zeros(1), 0.25).unwrap();
    for y in [0.0, 1.0, 2.5, 4.0] {
        let conv = periodic_trapezoid(
            |x| wrapped_density(&at(x), &params, &lattice).unwrap() * wrapped_density(&at(y - x), &kernel, &lattice).unwrap(),
            0.0,
            TAU,
            2048,
        );
        let closed = smoothed_wn_model(&at(y), &params, h, &lattice).unwrap();
        assert!((conv - closed).abs() < 1e-10, "{conv} vs {closed}");
    }
    let tiny = Bandwidth::new(1e-6).unwrap();
    for y in [0.5, 1.0, 3.0] {
        let m = smoothed_wn_model(&at(y), &params, tiny, &lattice).unwrap();
        assert!((m - wrapped_density(&at(y), &params, &lattice).unwrap()).abs() < 1e-9);
    }
    let mass = periodic_trapezoid(|y| smoothed_wn_model(&at(y), &params, h, &lattice).unwrap(), 0.0, TAU, 2048);
    assert!((mass - 1.0).abs() < 1e-10);
}

#[test]
fn isolated_points_get_large_residuals() {
    let params = WrappedModelParams::isotropic(AngleVector::new(vec![0.0]).unwrap(), PI / 8.0).unwrap();
    let bulk = sample_wrapped_normal(&params, 200, &mut ChaCha8Rng::seed_from_u64(2));
    let mut unwrapped: Vec<Vec<f64>> = bulk.iter().map(|y| y.to_signed()).collect();
    unwrapped.push(vec![2.2]);
    unwrapped.push(vec![3.0]);
    let h = Bandwidth::new(PI / 16.0).unwrap();
    // f̂ at an isolated point is dominated by its own kernel, so (δ + 1) m̂ stays put
    let scaled = |x: f64| {
        let d = residual_unwrapped(&[x], &unwrapped, &params, h, UnwrappedModelForm::Gaussian).unwrap();
        let m = torus_wle::kde::log_smoothed_normal_model(&[x], &params, h).unwrap().exp();
        (d, (d + 1.0) * m)
    };
    let (d1, s1) = scaled(2.2);
    let (d2, s2) = scaled(3.0);
    assert!(d2 > 10.0 * d1 && d1 > 10.0);
    assert!((s1 / s2 - 1.0).abs() < 0.01, "{s1} {s2}");
}

#[test]
fn distant_squared_distances_are_downweighted() {
    let mut d2 = chi2_sample(2, 500, 5);
    let far = 4.0 * chi2_quantile(0.99, 2).unwrap();
    d2.push(far);
    let raf = RafKind::default();
    // the smoothed reference has a heavier tail than χ², so the rule-of-thumb
    // bandwidth (≈0.32 here) only brings the weight down to about 0.3
    let default_rule = raf.weight(residual_distance(far, &d2, 2, None, None).unwrap());
    assert!(default_rule < 0.35, "w = {default_rule}");
    let narrow = raf.weight(residual_distance(far, &d2, 2, Some(0.15), None).unwrap());
    assert!(narrow < 0.05, "w = {narrow}");
    let typical = residual_distance(1.4, &d2, 2, None, None).unwrap();
    assert!(raf.weight(typical) > 0.9);
}

#[test]
fn single_point_torus_kde() {
    let y = AngleVector::new(vec![0.3, 5.0]).unwrap();
    let h = Bandwidth::new(0.2).unwrap();
    let f = torus_kde(&y, std::slice::from_ref(&y), h, &LatticeBox::new(1, 2).unwrap()).unwrap();
    assert!((f - 1.0 / (TAU * 0.04)).abs() < 1e-12);
}
