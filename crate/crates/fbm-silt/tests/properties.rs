use fbm_silt::fbm::{fbm_covariance, mu};
use fbm_silt::kernels::{chaos_series_f, f_kernel, theta, KernelPoint, Region};
use fbm_silt::silt::silt_profile;
use fbm_silt::{FbmPath, HurstConfig, TimeGrid};
use proptest::prelude::*;

fn naive_mu(x: f64, u1: f64, u2: f64, h: f64) -> f64 {
    let p = |t: f64| t.abs().powf(2.0 * h);
    0.5 * (p(x + u2) - p(x + u2 - u1) - p(x) + p(x - u1))
}

fn close(a: f64, b: f64, rel: f64, scale: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(scale)
}

fn hurst() -> impl Strategy<Value = f64> {
    0.05f64..0.95
}

fn interior_point() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0f64..20.0, 0.01f64..5.0, 0.01f64..5.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn mu_agrees_with_the_raw_formula((x, u1, u2) in (0.0f64..10.0, 0.05f64..3.0, 0.05f64..3.0), h in hurst()) {
        let scale = (u1 * u2).powf(h);
        prop_assert!(close(mu(x, u1, u2, h), naive_mu(x, u1, u2, h), 1e-9, scale));
    }

    #[test]
    fn mu_reflection((x, u1, u2) in interior_point(), h in hurst()) {
        let scale = (u1 * u2).powf(h);
        prop_assert!(close(mu(x, u1, u2, h), mu(x + u2 - u1, u2, u1, h), 1e-9, scale));
    }

    #[test]
    fn mu_diagonal(u in 0.001f64..50.0, h in hurst()) {
        prop_assert!(close(mu(0.0, u, u, h), u.powf(2.0 * h), 1e-12, 0.0));
    }

    #[test]
    fn mu_cauchy_schwarz((x, u1, u2) in interior_point(), h in hurst()) {
        prop_assert!(mu(x, u1, u2, h).abs() <= (u1 * u2).powf(h) * (1.0 + 1e-12));
    }

    #[test]
    fn mu_finite_across_magnitudes(ex in -300.0f64..15.0, e1 in -300.0f64..15.0, e2 in -300.0f64..15.0, h in hurst()) {
        let (x, u1, u2) = (10f64.powf(ex), 10f64.powf(e1), 10f64.powf(e2));
        let value = mu(x, u1, u2, h);
        prop_assert!(value.is_finite());
        prop_assert!(value.abs() <= u1.powf(h) * u2.powf(h) * (1.0 + 1e-9) + f64::MIN_POSITIVE);
    }

    #[test]
    fn mu_self_similarity((x, u1, u2) in interior_point(), h in hurst(), lambda in 0.1f64..10.0) {
        let scaled = mu(lambda * x, lambda * u1, lambda * u2, h);
        let scale = (u1 * u2).powf(h) * lambda.powf(2.0 * h);
        prop_assert!(close(scaled, lambda.powf(2.0 * h) * mu(x, u1, u2, h), 1e-9, scale));
    }

    #[test]
    fn covariance_self_similarity(t in 0.0f64..10.0, s in 0.0f64..10.0, h in hurst(), lambda in 0.1f64..10.0) {
        let cfg = HurstConfig::new(h, 1).unwrap();
        let lhs = fbm_covariance(lambda * t, lambda * s, &cfg);
        let rhs = lambda.powf(2.0 * h) * fbm_covariance(t, s, &cfg);
        prop_assert!(close(lhs, rhs, 1e-12, 1e-300));
    }

    #[test]
    fn theta_nonnegative_and_scales((x, u1, u2) in interior_point(), h in hurst(), eps in 1e-4f64..1.0, lambda in 0.2f64..5.0) {
        let cfg = HurstConfig::new(h, 2).unwrap();
        let p = KernelPoint::new(x, u1, u2).unwrap();
        let value = theta(eps, &p, &cfg);
        prop_assert!(value >= 0.0);
        let q = KernelPoint::new(lambda * x, lambda * u1, lambda * u2).unwrap();
        let scaled = theta(lambda.powf(2.0 * h) * eps, &q, &cfg);
        prop_assert!(close(scaled, lambda.powf(4.0 * h) * value, 1e-9, 0.0));
    }

    #[test]
    fn f_nonnegative_scales_and_bounds_the_series(
        (x, u1, u2) in interior_point(),
        h in 0.3f64..0.95,
        d in 1usize..=4,
        eps in 1e-3f64..1.0,
        lambda in 0.2f64..5.0,
        order in 1usize..30,
    ) {
        let cfg = HurstConfig::new(h, d).unwrap();
        let p = KernelPoint::new(x, u1, u2).unwrap();
        let f = f_kernel(eps, &p, &cfg).unwrap();
        prop_assert!(f >= 0.0);
        let q = KernelPoint::new(lambda * x, lambda * u1, lambda * u2).unwrap();
        let scaled = f_kernel(lambda.powf(2.0 * h) * eps, &q, &cfg).unwrap();
        prop_assert!(close(scaled, lambda.powf(-2.0 * h * d as f64) * f, 1e-9, 0.0));
        let series = chaos_series_f(eps, &p, &cfg, order).unwrap();
        prop_assert!(series.value <= f * (1.0 + 1e-12));
        prop_assert!(f - series.value <= series.remainder_bound * (1.0 + 1e-9) + 1e-13 * f);
    }

    #[test]
    fn region_coordinates_round_trip(a in 0.0f64..10.0, b in 0.0f64..10.0, c in 0.0f64..10.0, which in 1usize..=3) {
        let region = Region::from_index(which).unwrap();
        let p = region.point(a, b, c);
        prop_assert!(region.contains(&p));
        let (a2, b2, c2) = region.coords(&p);
        for (lhs, rhs) in [(a, a2), (b, b2), (c, c2)] {
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + a + b + c));
        }
    }

    #[test]
    fn silt_profile_is_nondecreasing(values in prop::collection::vec(-3.0f64..3.0, 2 * 20), eps in 0.01f64..1.0) {
        let mut coords = vec![0.0, 0.0];
        coords.extend(values);
        let path = FbmPath::from_values(TimeGrid::new(1.0, 20).unwrap(), HurstConfig::new(0.6, 2).unwrap(), coords).unwrap();
        let profile = silt_profile(&path, eps);
        prop_assert_eq!(profile[0], 0.0);
        prop_assert!(profile.windows(2).all(|w| w[1] >= w[0]));
    }
}
