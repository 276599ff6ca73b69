use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use torus_wle::detection::{detect_by_distance, detect_by_weight, swamping_and_power};
use torus_wle::estimators::{fit, EstimatorKind, FitConfig, FitResult};
use torus_wle::experiments::sample_wrapped_normal;
use torus_wle::kde::{linear_kde, torus_kde, Bandwidth};
use torus_wle::numeric::periodic_trapezoid;
use torus_wle::raf::RafKind;
use torus_wle::residual::residual_torus;
use torus_wle::table::{AngleTable, AngleUnit};
use torus_wle::torus::{circular_mean, wrap, wrapped_density, AngleVector, LatticeBox, Spd, WrappedModelParams};

fn av(v: Vec<f64>) -> AngleVector {
    AngleVector::new(v).unwrap()
}

fn angle() -> impl Strategy<Value = f64> {
    0.0..TAU
}

fn circ_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn shift_all(data: &[AngleVector], c: &[f64]) -> Vec<AngleVector> {
    data.iter().map(|y| av(y.as_slice().iter().zip(c).map(|(a, b)| a + b).collect())).collect()
}

fn sample(params: &WrappedModelParams, n: usize, seed: u64) -> Vec<AngleVector> {
    sample_wrapped_normal(params, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn correlated(sigma: f64, rho: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]) * sigma * sigma
}

proptest! {
    #[test]
    fn wrap_is_idempotent_and_periodic(x in -100.0..100.0f64, k in -20i32..20) {
        let w = wrap(x).unwrap();
        prop_assert!((0.0..TAU).contains(&w));
        prop_assert_eq!(wrap(w).unwrap(), w);
        prop_assert!(circ_diff(wrap(x + TAU * k as f64).unwrap(), w) < 1e-12);
    }

    #[test]
    fn density_is_periodic(
        mu in prop::collection::vec(angle(), 2),
        y in prop::collection::vec(angle(), 2),
        k in prop::collection::vec(-3i32..=3, 2),
        sigma in 0.1..1.5f64,
        rho in -0.8..0.8f64,
    ) {
        let params = WrappedModelParams::new(av(mu), correlated(sigma, rho)).unwrap();
        let lattice = params.adequate_box(8).unwrap();
        let moved: Vec<f64> = y.iter().zip(&k).map(|(a, &j)| a + TAU * j as f64).collect();
        let a = wrapped_density(&av(y), &params, &lattice).unwrap();
        let b = wrapped_density(&av(moved), &params, &lattice).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300) + 1e-300);
    }

    // The 4-SD rule alone leaves up to ~1e-7 of mass outside the box once σ
    // passes about π/2, so wide models get two extra rings.
    #[test]
    fn density_integrates_to_one(mu in angle(), sigma in 0.05..3.0f64) {
        let params = WrappedModelParams::isotropic(av(vec![mu]), sigma).unwrap();
        let rule = params.adequate_box(10).unwrap();
        let lattice = if sigma <= 1.5 { rule } else { LatticeBox::new(rule.radius() + 2, 1).unwrap() };
        let mass = periodic_trapezoid(|y| wrapped_density(&av(vec![y]), &params, &lattice).unwrap(), 0.0, TAU, 4096);
        prop_assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
    }

    // Concentrated domain: on the edge of the 4-SD rule the J vs J+2 gap grows to ~1e-8.
    #[test]
    fn truncation_converges(
        mu in prop::collection::vec(angle(), 2),
        y in prop::collection::vec(angle(), 2),
        sigma in 0.05..1.2f64,
        rho in -0.6..0.6f64,
    ) {
        let params = WrappedModelParams::new(av(mu), correlated(sigma, rho)).unwrap();
        let base = params.adequate_box(8).unwrap();
        let wider = LatticeBox::new(base.radius() + 2, 2).unwrap();
        let y = av(y);
        let a = wrapped_density(&y, &params, &base).unwrap();
        let b = wrapped_density(&y, &params, &wider).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * b + 1e-300, "{a} vs {b}");
    }

    #[test]
    fn mahalanobis_is_affine_invariant(
        v in prop::collection::vec(-3.0..3.0f64, 2),
        a in prop::collection::vec(0.2..2.0f64, 3),
        rho in -0.9..0.9f64,
    ) {
        let sigma = Spd::new(correlated(0.7, rho)).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[a[0], 0.0, a[1] - 1.0, a[2]]);
        let moved = Spd::new(&m * sigma.matrix() * m.transpose()).unwrap();
        let mv = &m * nalgebra::DVector::from_column_slice(&v);
        let d0 = sigma.mahalanobis_sq(&v);
        let d1 = moved.mahalanobis_sq(mv.as_slice());
        prop_assert!((d0 - d1).abs() <= 1e-9 * (1.0 + d0));
    }

    #[test]
    fn circular_mean_is_shift_equivariant(
        centre in angle(),
        spread in prop::collection::vec(-1.0..1.0f64, 3..30),
        c in -10.0..10.0f64,
    ) {
        let xs: Vec<f64> = spread.iter().map(|s| wrap(centre + s).unwrap()).collect();
        let shifted: Vec<f64> = xs.iter().map(|x| wrap(x + c).unwrap()).collect();
        let m = circular_mean(&xs).unwrap();
        prop_assert!(circ_diff(circular_mean(&shifted).unwrap(), m + c) < 1e-9);
    }

    #[test]
    fn torus_kde_is_periodic_and_flat_for_wide_kernels(
        data in prop::collection::vec(prop::collection::vec(angle(), 2), 1..20),
        y in prop::collection::vec(angle(), 2),
        k in -2i32..=2,
        h in 0.1..1.0f64,
    ) {
        let data: Vec<AngleVector> = data.into_iter().map(av).collect();
        let lattice = LatticeBox::new(2, 2).unwrap();
        let bw = Bandwidth::new(h).unwrap();
        let moved: Vec<f64> = y.iter().map(|a| a + TAU * k as f64).collect();
        let a = torus_kde(&av(y.clone()), &data, bw, &lattice).unwrap();
        let b = torus_kde(&av(moved), &data, bw, &lattice).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a + 1e-300);
        let flat = torus_kde(&av(y), &data, Bandwidth::new(10.0).unwrap(), &LatticeBox::new(6, 2).unwrap()).unwrap();
        prop_assert!((flat * TAU * TAU - 1.0).abs() < 5e-3);
    }

    #[test]
    fn torus_kde_matches_linear_kde_when_concentrated(
        offsets in prop::collection::vec(prop::collection::vec(-0.5..0.5f64, 2), 1..20),
        at in prop::collection::vec(-0.5..0.5f64, 2),
        h in 0.02..0.1f64,
    ) {
        let raw: Vec<Vec<f64>> = offsets.iter().map(|o| o.iter().map(|v| PI + v).collect()).collect();
        let x: Vec<f64> = at.iter().map(|v| PI + v).collect();
        let data: Vec<AngleVector> = raw.iter().cloned().map(av).collect();
        let bw = Bandwidth::new(h).unwrap();
        let t = torus_kde(&av(x.clone()), &data, bw, &LatticeBox::new(1, 2).unwrap()).unwrap();
        let l = linear_kde(&x, &raw, bw).unwrap();
        prop_assert!((t - l).abs() < 1e-8);
    }

    #[test]
    fn kde_is_linear_in_the_data(
        data in prop::collection::vec(prop::collection::vec(angle(), 2), 2..15),
        y in prop::collection::vec(angle(), 2),
        h in 0.1..1.0f64,
    ) {
        let data: Vec<AngleVector> = data.into_iter().map(av).collect();
        let (lattice, bw, y) = (LatticeBox::new(2, 2).unwrap(), Bandwidth::new(h).unwrap(), av(y));
        let n = data.len() as f64;
        let mut more = data.clone();
        more.push(data[0].clone());
        let single = torus_kde(&y, &data[..1], bw, &lattice).unwrap();
        let full = torus_kde(&y, &data, bw, &lattice).unwrap();
        let expected = (n * full + single) / (n + 1.0);
        prop_assert!((torus_kde(&y, &more, bw, &lattice).unwrap() - expected).abs() <= 1e-12 * expected.max(1e-300));
    }

    #[test]
    fn raf_weights_are_bounded_and_smooth(delta in -1.0..1000.0f64, tau in 0.05..1.0f64, lambda in -0.9..2.0f64) {
        for raf in [RafKind::Gkl { tau }, RafKind::Pwd { lambda }, RafKind::Schi] {
            let w = raf.weight(delta);
            prop_assert!((0.0..=1.0).contains(&w), "{raf:?} w({delta}) = {w}");
            if (-0.9..=100.0).contains(&delta) {
                let step = 1e-5 * delta.abs().max(1.0);
                let fd = (raf.eval(delta + step) - raf.eval(delta - step)) / (2.0 * step);
                let exact = raf.deriv(delta);
                prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{raf:?} at {delta}: {fd} vs {exact}");
            }
        }
    }

    #[test]
    fn raf_weight_is_continuous(delta in -0.99..500.0f64, tau in 0.05..1.0f64) {
        let raf = RafKind::Gkl { tau };
        let eps = 1e-9 * delta.abs().max(1.0);
        prop_assert!((raf.weight(delta + eps) - raf.weight(delta)).abs() < 1e-6);
    }

    #[test]
    fn table_round_trips_through_csv(rows in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 3), 1..20), signed: bool) {
        let rows: Vec<AngleVector> = rows.into_iter().map(av).collect();
        let table = AngleTable::new(vec!["a".into(), "b".into(), "c".into()], rows).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf, signed).unwrap();
        let back = AngleTable::from_reader(buf.as_slice(), AngleUnit::Radians, None).unwrap();
        prop_assert_eq!(back.len(), table.len());
        for (x, y) in table.rows().iter().zip(back.rows()) {
            for d in 0..3 {
                prop_assert!(circ_diff(x[d], y[d]) < 1e-12);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn residual_is_periodic(
        y in prop::collection::vec(angle(), 2),
        k in prop::collection::vec(-2i32..=2, 2),
        seed in 0u64..1000,
    ) {
        let params = WrappedModelParams::isotropic(av(vec![1.0, 5.0]), 0.4).unwrap();
        let data = sample(&params, 40, seed);
        let lattice = LatticeBox::new(2, 2).unwrap();
        let h = Bandwidth::new(0.2).unwrap();
        let moved: Vec<f64> = y.iter().zip(&k).map(|(a, &j)| a + TAU * j as f64).collect();
        let a = residual_torus(&av(y), &data, &params, h, &lattice).unwrap();
        let b = residual_torus(&av(moved), &data, &params, h, &lattice).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        prop_assert!(RafKind::default().weight(a) == RafKind::default().weight(b) || (a - b).abs() < 1e-10);
    }

    #[test]
    fn em_log_likelihood_never_decreases(seed in 0u64..10_000, sigma in 0.2..1.2f64) {
        let truth = WrappedModelParams::new(av(vec![0.5, 6.0]), correlated(sigma, 0.4)).unwrap();
        let data = sample(&truth, 120, seed);
        let res = fit(&data, EstimatorKind::Em, &FitConfig { seed, ..FitConfig::default() }).unwrap();
        for pair in res.trace.windows(2) {
            let (a, b) = (pair[0].log_likelihood, pair[1].log_likelihood);
            prop_assert!(b >= a - 1e-9 * a.abs().max(1.0), "log-likelihood fell from {a} to {b}");
        }
    }

    #[test]
    fn estimators_are_shift_equivariant(seed in 0u64..10_000, c in prop::collection::vec(-7.0..7.0f64, 2)) {
        let truth = WrappedModelParams::new(av(vec![2.0, 3.0]), correlated(PI / 8.0, 0.3)).unwrap();
        let data = sample(&truth, 80, seed);
        let moved = shift_all(&data, &c);
        for kind in EstimatorKind::ALL {
            let cfg = FitConfig { seed, n_subsamples: 5, ..FitConfig::default() }.with_smoothing(kind, if kind.uses_distance_bandwidth() { 0.5 } else { 0.2 });
            let a = fit(&data, kind, &cfg).unwrap();
            let b = fit(&moved, kind, &cfg).unwrap();
            for d in 0..2 {
                prop_assert!(circ_diff(b.params.mu()[d], a.params.mu()[d] + c[d]) < 1e-6, "{kind} mean");
            }
            prop_assert!((a.params.sigma() - b.params.sigma()).norm() < 1e-6, "{kind} scatter");
        }
    }
}

fn shared_fit() -> &'static FitResult {
    static FIT: OnceLock<FitResult> = OnceLock::new();
    FIT.get_or_init(|| {
        let truth = WrappedModelParams::new(av(vec![1.0, 1.0]), correlated(PI / 8.0, 0.5)).unwrap();
        let mut data = sample(&truth, 200, 11);
        for y in data.iter_mut().take(20) {
            *y = av(vec![y[0] + PI, y[1] + PI]);
        }
        fit(&data, EstimatorKind::WcemUnwrap, &FitConfig::default().with_smoothing(EstimatorKind::WcemUnwrap, 0.2)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_flags_are_monotone_in_alpha(a in 0.001..0.5f64, b in 0.001..0.5f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let fit = shared_fit();
        let strict = detect_by_distance(fit, lo).unwrap();
        let loose = detect_by_distance(fit, hi).unwrap();
        prop_assert!(strict.flags.iter().zip(&loose.flags).all(|(&s, &l)| !s || l));
    }

    #[test]
    fn detection_commutes_with_permutation(perm in Just((0..200usize).collect::<Vec<_>>()).prop_shuffle(), threshold in 0.0..1.0f64) {
        let fit = shared_fit();
        let flags = detect_by_weight(&fit.weights, threshold).unwrap();
        let permuted: Vec<f64> = perm.iter().map(|&i| fit.weights[i]).collect();
        let pflags = detect_by_weight(&permuted, threshold).unwrap();
        prop_assert!(perm.iter().enumerate().all(|(k, &i)| pflags[k] == flags[i]));

        let mask: Vec<bool> = (0..200).map(|i| i < 20).collect();
        let pmask: Vec<bool> = perm.iter().map(|&i| mask[i]).collect();
        prop_assert_eq!(swamping_and_power(&flags, &mask).unwrap(), swamping_and_power(&pflags, &pmask).unwrap());
    }
}
