use std::f64::consts::PI;

use approx::assert_relative_eq;
use fbm_silt::constants::{
    c_h_const, c_h_quadrature, integrability_probe, lambda_const, power_integral, rho_const, rho_prefactor, rho_tilde, sigma_q_squared,
    sigma_squared, sigma_squared_by_region, sigma_squared_direct, ProbeDomain, QuadSpec, Transform,
};
use fbm_silt::kernels::Region;
use fbm_silt::silt::silt_covariance;
use fbm_silt::{HurstConfig, SiltError};
use statrs::function::beta::beta;

fn cfg(h: f64, d: usize) -> HurstConfig {
    HurstConfig::new(h, d).unwrap()
}

/// `∫_0^∞ u² (1 + u^a)^{-b} du = B(3/a, b - 3/a) / a`.
fn power_integral_oracle(a: f64, b: f64) -> f64 {
    beta(3.0 / a, b - 3.0 / a) / a
}

fn tight() -> QuadSpec {
    QuadSpec::default().with_rel_tol(1e-9)
}

#[test]
fn power_integral_matches_beta_function() {
    for (a, b) in [(1.6, 2.0), (1.5, 2.5), (1.9, 2.0), (1.2, 3.5)] {
        let got = power_integral(2.0, a, b, &tight()).unwrap();
        assert_relative_eq!(got.value, power_integral_oracle(a, b), max_relative = 1e-8);
    }
}

#[test]
fn lambda_values() {
    let got = lambda_const(&cfg(0.8, 2), &tight()).unwrap().value;
    let oracle = 0.5 / (2.0 * PI) * power_integral_oracle(1.6, 2.0);
    assert_relative_eq!(got, oracle, max_relative = 1e-8);
    assert_relative_eq!(got, 0.357_263_3, max_relative = 1e-6);

    let near_edge = lambda_const(&cfg(0.76, 2), &tight()).unwrap().value;
    assert_relative_eq!(near_edge, 0.5 / (2.0 * PI) * power_integral_oracle(1.52, 2.0), max_relative = 1e-6);
    assert!(matches!(lambda_const(&cfg(0.6, 3), &tight()), Err(SiltError::Regime { .. })));
    assert!(matches!(lambda_const(&cfg(0.76, 1), &tight()), Err(SiltError::Domain(_))));
}

#[test]
fn rho_values() {
    assert_relative_eq!(rho_prefactor(3), 3.0 / (16.0 * PI.powf(1.5)), max_relative = 1e-14);
    let got = rho_const(3, &tight()).unwrap().value;
    let oracle = 3.0 / (16.0 * PI.powf(1.5)) * power_integral_oracle(1.5, 2.5);
    assert_relative_eq!(got, oracle, max_relative = 1e-8);
    assert_relative_eq!(got, 0.029_931_2, max_relative = 1e-5);
    assert!(matches!(rho_const(2, &tight()), Err(SiltError::Regime { .. })));
}

#[test]
fn rho_tilde_approaches_rho_monotonically() {
    let rho = rho_const(3, &tight()).unwrap().value;
    let gaps: Vec<f64> = (4..=12).map(|m| (rho_tilde(3, m).unwrap() - rho).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(rho_tilde(3, 0).is_err());
    assert!(rho_tilde(2, 5).is_err());
}

#[test]
fn c_h_values() {
    assert_relative_eq!(c_h_const(0.8).unwrap(), 1.92, max_relative = 1e-14);
    assert!(c_h_const(0.75 + 1e-10).is_err());
    assert!(c_h_const(0.75 + 1e-6).unwrap() > 1e4);
    let spec = QuadSpec::default().with_rel_tol(1e-9).with_max_evals(50_000_000);
    for h in [0.8, 0.9] {
        let quad = c_h_quadrature(h, &spec).unwrap();
        assert_relative_eq!(quad.value, c_h_const(h).unwrap(), max_relative = 1e-6);
    }
}

#[test]
fn line_constants_are_stable_under_transform_and_truncation() {
    let base = QuadSpec::default().with_rel_tol(1e-8);
    for (name, eval) in [
        ("Lambda", Box::new(|s: &QuadSpec| lambda_const(&cfg(0.8, 2), s).unwrap().value) as Box<dyn Fn(&QuadSpec) -> f64>),
        ("rho", Box::new(|s: &QuadSpec| rho_const(3, s).unwrap().value)),
    ] {
        let reference = eval(&base);
        let swapped = eval(&base.with_transform(Transform::Tangent));
        let r = eval(&base.with_radius(Some(50.0)));
        let r2 = eval(&base.with_radius(Some(100.0)));
        assert_relative_eq!(swapped, reference, max_relative = 1e-4);
        assert!((r2 - r).abs() / r2 < 1e-4, "{name}: {r} vs {r2}");
    }
}

#[test]
fn sigma_squared_value_and_guard() {
    let spec = QuadSpec::default();
    let sigma = sigma_squared(&cfg(0.6, 3), &spec).unwrap();
    assert_relative_eq!(sigma.value, 0.039_690_6, max_relative = 1e-3);
    let parts = sigma_squared_by_region(&cfg(0.6, 3), &spec).unwrap();
    assert_relative_eq!(parts.iter().map(|p| p.value).sum::<f64>(), sigma.value, max_relative = 1e-12);
    assert!(matches!(sigma_squared(&cfg(0.8, 2), &spec), Err(SiltError::Regime { .. })));
}

#[test]
fn sigma_squared_without_sector_split_agrees() {
    let spec = QuadSpec::default().with_rel_tol(1e-3).with_max_evals(20_000_000);
    let split = sigma_squared(&cfg(0.6, 3), &spec).unwrap().value;
    let direct = sigma_squared_direct(&cfg(0.6, 3), &spec).unwrap().value;
    assert_relative_eq!(split, direct, max_relative = 5e-3);
}

#[test]
fn sigma_squared_is_the_limit_of_the_rescaled_variance() {
    // Exact finite-ε variance by pair cubature, a separate integration path.
    let c = cfg(0.6, 3);
    let sigma = sigma_squared(&c, &QuadSpec::default()).unwrap().value;
    let eps: f64 = 1e-8;
    let var = silt_covariance(eps, 1.0, 1.0, &c, &QuadSpec::default().with_rel_tol(1e-4)).unwrap().value;
    let ratio = var * eps.powf(2.0 * (1.5 - 0.75 / 0.6)) / sigma;
    assert!(ratio > 0.99 && ratio < 1.0, "{ratio}");
}

#[test]
fn sigma_squared_refines_consistently() {
    let c = cfg(0.6, 3);
    let coarse = sigma_squared(&c, &QuadSpec::default().with_rel_tol(1e-3)).unwrap().value;
    let fine = sigma_squared(&c, &QuadSpec::default().with_rel_tol(1e-5)).unwrap().value;
    assert_relative_eq!(coarse, fine, max_relative = 1e-3);
}

#[test]
fn sigma_squared_grows_toward_the_lower_boundary() {
    let spec = QuadSpec::default().with_rel_tol(1e-3);
    let values: Vec<f64> = [0.7, 0.6, 0.55].iter().map(|h| sigma_squared(&cfg(*h, 3), &spec).unwrap().value).collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
    let edge = sigma_squared(&cfg(0.51, 3), &spec.with_rel_tol(2e-2)).unwrap().value;
    assert!(edge.is_finite() && edge > values[2]);
}

#[test]
fn chaos_shares_decrease_and_stay_below_sigma() {
    let c = cfg(0.6, 3);
    let spec = QuadSpec::default();
    let sigma = sigma_squared(&c, &spec).unwrap().value;
    let shares: Vec<f64> = (1..=6).map(|q| sigma_q_squared(q, &c, &spec).unwrap().value).collect();
    assert!(shares[0] > 0.0 && shares[0] <= sigma);
    assert_relative_eq!(shares[0], 0.019_302, max_relative = 1e-3);
    assert!(shares.windows(2).all(|w| w[1] < w[0]), "{shares:?}");
    let partial: f64 = shares.iter().sum();
    assert!(partial < sigma);
    assert!(sigma_q_squared(0, &c, &spec).is_err());
}

#[test]
fn integrability_probes() {
    let spec = QuadSpec::default().with_rel_tol(1e-3);
    let s1 = integrability_probe(ProbeDomain::Sector(Region::S1), 2.0, &cfg(0.6, 3), &spec).unwrap();
    assert!(s1.result.value.is_finite() && s1.result.value > 0.0);
    let octant = integrability_probe(ProbeDomain::Octant, 2.5, &cfg(0.7, 3), &spec.with_radius(Some(1e4))).unwrap();
    assert!(octant.relative_change < 0.05);
    assert!(matches!(integrability_probe(ProbeDomain::Octant, 2.0, &cfg(0.8, 3), &spec), Err(SiltError::Regime { .. })));
    assert!(integrability_probe(ProbeDomain::Sector(Region::S3), 2.5, &cfg(0.6, 3), &spec).is_err());
}
