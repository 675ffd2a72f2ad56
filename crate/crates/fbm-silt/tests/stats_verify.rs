use approx::assert_relative_eq;
use fbm_silt::constants::QuadSpec;
use fbm_silt::silt::MonteCarloConfig;
use fbm_silt::stats::{ad_p_value, anderson_darling, correlation, covariance_matrix, covariance_with_se, fit_line, skewness_se, StatReport};
use fbm_silt::verify::{run_for_regime, run_subcritical, tightness_probe, CriterionKind, TIGHTNESS_GAPS};
use fbm_silt::{Backend, HurstConfig, SiltError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

#[test]
fn report_moments_of_a_known_sample() {
    let sample: Vec<f64> = (1..=10).map(f64::from).collect();
    let r = StatReport::from_sample(&sample).unwrap();
    assert_eq!(r.n, 10);
    assert_relative_eq!(r.mean, 5.5, max_relative = 1e-15);
    assert_relative_eq!(r.variance, 55.0 / 6.0, max_relative = 1e-14);
    assert!(r.skewness.abs() < 1e-14);
    // Population excess kurtosis of a discrete uniform on 10 points.
    assert_relative_eq!(r.excess_kurtosis, -1.224_242_424_242_424_2, max_relative = 1e-12);
    assert_relative_eq!(r.se_mean, (55.0 / 60.0f64).sqrt(), max_relative = 1e-14);
    assert!(StatReport::from_sample(&sample[..7]).is_err());
    assert!(StatReport::from_sample(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, f64::NAN]).is_err());
}

#[test]
fn skewness_standard_error_formula() {
    assert_relative_eq!(skewness_se(10), (6.0 * 10.0 * 9.0 / (8.0 * 11.0 * 13.0f64)).sqrt(), max_relative = 1e-15);
    assert!((skewness_se(100_000) - (6.0 / 1e5f64).sqrt()).abs() < 1e-6);
}

#[test]
fn anderson_darling_p_values_at_classical_critical_points() {
    let huge = 1_000_000_000;
    assert!((ad_p_value(0.752, huge) - 0.05).abs() < 1e-3);
    assert!((ad_p_value(1.035, huge) - 0.01).abs() < 1e-3);
    assert!(ad_p_value(0.1, huge) > 0.9);
    assert!(ad_p_value(5.0, huge) < 1e-9);
}

#[test]
fn anderson_darling_separates_normal_from_exponential() {
    let normal = normal_sample(2000, 4);
    let r = StatReport::from_sample(&normal).unwrap();
    assert!(r.normality_p > 0.01, "{}", r.normality_p);
    assert!(r.skewness_z().abs() < 4.0 && r.kurtosis_z().abs() < 4.0);

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let skewed: Vec<f64> = (0..2000).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let r = StatReport::from_sample(&skewed).unwrap();
    assert!(r.normality_p < 1e-6);
    assert!(r.skewness_z() > 4.0);
}

/// Direct evaluation of the statistic from its defining sum.
#[test]
fn anderson_darling_statistic_matches_definition() {
    let sample = normal_sample(50, 8);
    let (mean, sd) = (0.1, 1.2);
    let normal = Normal::new(mean, sd).unwrap();
    let mut sorted = sample.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let s: f64 = (0..n)
        .map(|i| (2 * i + 1) as f64 * (normal.cdf(sorted[i]).ln() + (1.0 - normal.cdf(sorted[n - 1 - i])).ln()))
        .sum();
    let oracle = -(n as f64) - s / n as f64;
    assert_relative_eq!(anderson_darling(&sample, mean, sd).0, oracle, max_relative = 1e-10);
}

#[test]
fn covariance_helpers() {
    let x = [1.0, 2.0, 3.0, 4.0];
    let y = [2.0, 4.0, 6.0, 8.0];
    assert_relative_eq!(covariance_with_se(&x, &y).unwrap().0, 10.0 / 3.0, max_relative = 1e-14);
    assert_relative_eq!(correlation(&x, &y).unwrap(), 1.0, max_relative = 1e-14);
    let rows: Vec<Vec<f64>> = x.iter().zip(&y).map(|(a, b)| vec![*a, *b]).collect();
    let cov = covariance_matrix(&rows).unwrap();
    assert_relative_eq!(cov[0][0], 5.0 / 3.0, max_relative = 1e-14);
    assert_eq!(cov[0][1], cov[1][0]);
    assert_relative_eq!(cov[1][1], 20.0 / 3.0, max_relative = 1e-14);
    assert!(covariance_matrix(&[vec![1.0]]).is_err());
    assert!(covariance_matrix(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    assert!(covariance_with_se(&x, &y[..3]).is_err());
}

#[test]
fn line_fit_recovers_exact_line() {
    let x = [0.0, 1.0, 2.0, 3.0, 4.0];
    let y: Vec<f64> = x.iter().map(|v| 1.5 * v - 2.0).collect();
    let fit = fit_line(&x, &y).unwrap();
    assert_relative_eq!(fit.slope, 1.5, max_relative = 1e-14);
    assert_relative_eq!(fit.intercept, -2.0, max_relative = 1e-14);
    assert!(fit.slope_se < 1e-12);
    assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
}

fn small_mc(eps_list: Vec<f64>, replicates: usize) -> MonteCarloConfig {
    MonteCarloConfig { replicates, base_seed: 11, eps_list, steps_per_unit: 64, backend: Backend::Auto, cells_per_scale: 4.0 }
}

#[test]
fn subcritical_experiment_reports_every_check() {
    let cfg = HurstConfig::new(0.6, 3).unwrap();
    let res = run_subcritical(&cfg, &small_mc(vec![0.2, 0.1], 64), &[0.5, 1.0], &QuadSpec::default().with_rel_tol(1e-3)).unwrap();
    assert_eq!(res.reports.len(), 2);
    assert_eq!(res.reports[0].stats.len(), 2);
    for name in ["variance", "covariance", "skewness z", "excess kurtosis z", "normality p"] {
        assert!(res.criterion(name).is_some(), "{name}");
    }
    let gate = res.criteria.iter().filter(|c| c.kind == CriterionKind::Acceptance).all(|c| c.passed);
    assert_eq!(res.passed(), gate);
    assert_eq!(res, run_subcritical(&cfg, &small_mc(vec![0.2, 0.1], 64), &[0.5, 1.0], &QuadSpec::default().with_rel_tol(1e-3)).unwrap());
}

#[test]
fn regime_dispatch_rejects_unsupported_configurations() {
    let mc = small_mc(vec![0.2, 0.1], 16);
    let spec = QuadSpec::default();
    for (h, d) in [(0.3, 3), (0.75, 2), (0.5, 3)] {
        let cfg = HurstConfig::new(h, d).unwrap();
        assert!(matches!(run_for_regime(&cfg, &mc, &[1.0], &spec), Err(SiltError::Regime { .. })));
    }
}

#[test]
fn tightness_probe_guards_the_moment_range() {
    let cfg = HurstConfig::new(0.6, 3).unwrap();
    let mc = small_mc(vec![0.1], 16);
    let spec = QuadSpec::default();
    for p in [2.0, 2.4, 2.5] {
        let err = tightness_probe(&cfg, &mc, 0.0, &TIGHTNESS_GAPS, p, &spec).unwrap_err();
        assert!(matches!(err, SiltError::InvalidParameter(_)), "{p}: {err}");
    }
    let other = HurstConfig::new(0.8, 2).unwrap();
    assert!(matches!(tightness_probe(&other, &mc, 0.0, &TIGHTNESS_GAPS, 2.2, &spec), Err(SiltError::Regime { .. })));
    assert!(tightness_probe(&cfg, &mc, 0.0, &[0.1], 2.2, &spec).is_err());
}
