//! Reference values: closed forms, frozen numerical oracles and the published
//! constants the library must reproduce.

use std::f64::consts::{LN_2, PI, TAU};

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use torus_wle::experiments::{scatter_divergence, sigma_unwrapped, sqrt_angular_separation};
use torus_wle::kde::{chi2_density, chi2_quantile, linear_kde, torus_kde, Bandwidth, UnwrappedChi2};
use torus_wle::raf::RafKind;
use torus_wle::torus::{
    angular_separation, circular_correlation, circular_mean, log_likelihood, mean_resultant_length, unwrapped_distance_bound,
    wrap, wrapped_density, AngleVector, LatticeBox, Spd, WrappedModelParams,
};

fn av(v: &[f64]) -> AngleVector {
    AngleVector::new(v.to_vec()).unwrap()
}

// Wrapped normal density at the mode for σ = π/8, summed over |j| <= 10.
const MODE_DENSITY: f64 = 1.015_898_174_9;

#[test]
fn wrap_examples() {
    assert_eq!(wrap(0.0).unwrap(), 0.0);
    assert_relative_eq!(wrap(-PI / 2.0).unwrap(), 1.5 * PI, epsilon = 1e-15);
    assert_relative_eq!(wrap(7.0).unwrap(), 7.0 - TAU, epsilon = 1e-15);
    assert!((wrap(7.0).unwrap() - 0.71681).abs() < 1e-5);
}

#[test]
fn lattice_sizes() {
    assert_eq!(LatticeBox::new(1, 2).unwrap().len(), 9);
    assert_eq!(LatticeBox::new(2, 2).unwrap().len(), 25);
    assert_eq!(LatticeBox::new(2, 5).unwrap().len(), 3125);
}

#[test]
fn mahalanobis_examples() {
    assert_eq!(Spd::identity(2).mahalanobis_sq(&[0.0, 0.0]), 0.0);
    assert_relative_eq!(Spd::identity(2).mahalanobis_sq(&[1.0, 1.0]), 2.0, epsilon = 1e-15);
    let s = Spd::new(DMatrix::from_element(1, 1, 4.0)).unwrap();
    assert_relative_eq!(s.mahalanobis_sq(&[2.0]), 1.0, epsilon = 1e-15);
}

#[test]
fn wrapped_density_oracles() {
    let flat = WrappedModelParams::isotropic(av(&[0.0]), 10.0).unwrap();
    let wide = LatticeBox::new(6, 1).unwrap();
    for y in [0.0, 1.0, 3.0, 5.5] {
        assert!((wrapped_density(&av(&[y]), &flat, &wide).unwrap() - 1.0 / TAU).abs() < 2e-3);
    }
    let peaked = WrappedModelParams::isotropic(av(&[0.0]), PI / 8.0).unwrap();
    let j3 = LatticeBox::new(3, 1).unwrap();
    let at_mode = wrapped_density(&av(&[0.0]), &peaked, &j3).unwrap();
    assert_relative_eq!(at_mode, MODE_DENSITY, epsilon = 1e-9);
    let ll = log_likelihood(&[av(&[0.0])], &peaked, &j3).unwrap();
    assert_relative_eq!(ll, MODE_DENSITY.ln(), epsilon = 1e-9);
    let five = vec![av(&[0.0]); 5];
    assert_relative_eq!(log_likelihood(&five, &peaked, &j3).unwrap(), 5.0 * ll, epsilon = 1e-12);
}

#[test]
fn circular_summaries() {
    assert_eq!(circular_mean(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
    assert_relative_eq!(circular_mean(&[PI / 2.0, PI / 2.0]).unwrap(), PI / 2.0, epsilon = 1e-15);
    assert!(circular_mean(&[0.0, PI]).is_err());
    assert_relative_eq!(mean_resultant_length(&[1.0, 1.0, 1.0]).unwrap(), 1.0, epsilon = 1e-15);
    assert!(mean_resultant_length(&[0.0, PI]).unwrap() < 1e-15);
    assert_relative_eq!(mean_resultant_length(&[0.0, PI / 2.0]).unwrap(), (PI / 4.0).cos(), epsilon = 1e-15);
}

#[test]
fn circular_correlation_examples() {
    let a = [0.1, 0.5, 1.3, 2.0, 4.0, 5.5];
    assert_relative_eq!(circular_correlation(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
    let neg: Vec<f64> = a.iter().map(|x| wrap(-x).unwrap()).collect();
    assert_relative_eq!(circular_correlation(&a, &neg).unwrap(), -1.0, epsilon = 1e-12);
}

#[test]
fn angular_separation_examples() {
    let a = av(&[1.0, 2.0]);
    assert_eq!(angular_separation(&a, &a).unwrap(), vec![0.0, 0.0]);
    let b = av(&[1.0 + PI, 2.0 + PI / 2.0]);
    let sep = angular_separation(&a, &b).unwrap();
    assert_relative_eq!(sep[0], 2.0, epsilon = 1e-12);
    assert_relative_eq!(sep[1], 2f64.sqrt(), epsilon = 1e-12);
}

#[test]
fn metric_examples() {
    let t = av(&[0.3, 4.0]);
    assert_eq!(sqrt_angular_separation(&t, &t).unwrap(), 0.0);
    let off = av(&[0.3 + PI, 4.0 + PI]);
    assert_relative_eq!(sqrt_angular_separation(&off, &t).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
    let half = av(&[0.3 + PI / 2.0, 4.0]);
    assert_relative_eq!(sqrt_angular_separation(&half, &t).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);

    let sigma = Spd::from_rows(&[vec![0.2, 0.05], vec![0.05, 0.1]]).unwrap();
    assert!(scatter_divergence(&sigma, &sigma).unwrap().abs() < 1e-12);
    let doubled = Spd::new(sigma.matrix() * 2.0).unwrap();
    assert_relative_eq!(scatter_divergence(&doubled, &sigma).unwrap(), 4.0 - 2.0 * LN_2 - 2.0, epsilon = 1e-12);
}

#[test]
fn kde_examples() {
    let datum = av(&[2.0]);
    let j3 = LatticeBox::new(3, 1).unwrap();
    let f = torus_kde(&datum, std::slice::from_ref(&datum), Bandwidth::new(PI / 8.0).unwrap(), &j3).unwrap();
    assert_relative_eq!(f, MODE_DENSITY, epsilon = 1e-9);
    let lin = linear_kde(&[1.5], &[vec![1.5]], Bandwidth::new(1.0).unwrap()).unwrap();
    assert_relative_eq!(lin, 1.0 / TAU.sqrt(), epsilon = 1e-15);
    assert!((lin - 0.39894).abs() < 1e-5);
}

#[test]
fn chi2_oracles() {
    assert!((chi2_quantile(0.99, 2).unwrap() - 9.2103).abs() < 1e-4);
    assert!((chi2_quantile(0.99, 7).unwrap() - 18.4753).abs() < 1e-4);
    assert_relative_eq!(chi2_density(0.0, 2), 0.5, epsilon = 1e-15);
}

#[test]
fn unwrapped_distance_support() {
    let bound = |s: f64| unwrapped_distance_bound(&Spd::new(DMatrix::identity(6, 6) * s * s).unwrap());
    assert_relative_eq!(bound(PI / 2.0), 24.0, epsilon = 1e-12);
    assert_relative_eq!(bound(3.0 * PI / 8.0), 6.0 * 64.0 / 9.0, epsilon = 1e-12);
    for s in [0.4, 1.0, 2.0] {
        assert_relative_eq!(bound(s), 6.0 * PI * PI / (s * s), epsilon = 1e-12);
    }
    let mc = UnwrappedChi2::simulate(&Spd::new(DMatrix::identity(6, 6) * (PI / 2.0).powi(2)).unwrap(), 10_000, 3).unwrap();
    assert!(mc.max() < 24.0);
    assert_relative_eq!(mc.support_bound(), 24.0, epsilon = 1e-12);
}

#[test]
fn sigma_unwrapped_reproduces_published_values() {
    assert!((sigma_unwrapped(3.0 * PI / 8.0).unwrap() - 1.163).abs() < 5e-3);
    assert!((sigma_unwrapped(PI / 2.0).unwrap() - 1.460).abs() < 5e-3);
    assert!((sigma_unwrapped(PI / 16.0).unwrap() - PI / 16.0).abs() < 1e-6);
}

#[test]
fn raf_oracles() {
    let gkl1 = RafKind::Gkl { tau: 1.0 };
    assert_relative_eq!(gkl1.eval(1.0), LN_2, epsilon = 1e-15);
    assert_relative_eq!(gkl1.weight(9.0), (10f64.ln() + 1.0) / 10.0, epsilon = 1e-15);
    assert!((gkl1.weight(9.0) - 0.33026).abs() < 1e-5);
    for raf in [RafKind::default(), RafKind::Pwd { lambda: -0.5 }, RafKind::Schi] {
        assert_eq!(raf.eval(0.0), 0.0);
        assert_eq!(raf.weight(0.0), 1.0);
    }
    // A(δ) + 1 < 0 near δ = -1 for GKL with τ close to one
    let gkl9 = RafKind::Gkl { tau: 0.9 };
    assert!(gkl9.eval(-0.99) + 1.0 < 0.0);
    assert_eq!(gkl9.weight(-0.99), 0.0);
}
