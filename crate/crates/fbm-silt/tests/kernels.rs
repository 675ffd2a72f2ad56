use std::f64::consts::PI;

use approx::assert_relative_eq;
use fbm_silt::fbm::mu;
use fbm_silt::kernels::{
    alpha_q, alpha_q_exact, beta_q, chaos_series_f, expected_heat_kernel, f_kernel, g_kernel, gap_bound_constant, lnd_margin,
    mu_bound_check, product_moment, span_bound_constant, theta, KernelPoint, Region,
};
use fbm_silt::HurstConfig;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn cfg(h: f64, d: usize) -> HurstConfig {
    HurstConfig::new(h, d).unwrap()
}

fn pt(x: f64, u1: f64, u2: f64) -> KernelPoint {
    KernelPoint::new(x, u1, u2).unwrap()
}

fn mu_oracle(x: f64, u1: f64, u2: f64, h: f64) -> f64 {
    let p = |t: f64| t.abs().powf(2.0 * h);
    0.5 * (p(x + u2) - p(x + u2 - u1) - p(x) + p(x - u1))
}

#[test]
fn theta_examples() {
    assert_relative_eq!(theta(1.0, &pt(3.0, 1.0, 1.0), &cfg(0.5, 2)), 4.0, max_relative = 1e-14);
    assert!(theta(0.0, &pt(0.0, 1.0, 1.0), &cfg(0.7, 2)).abs() < 1e-14);
    for h in [0.3, 0.6, 0.9] {
        assert_relative_eq!(theta(1.0, &pt(0.0, 1.0, 1.0), &cfg(h, 3)), 3.0, max_relative = 1e-14);
    }
}

#[test]
fn f_kernel_examples() {
    assert_eq!(f_kernel(1.0, &pt(5.0, 1.0, 1.0), &cfg(0.5, 3)).unwrap(), 0.0);
    let expected = (2.0 * PI).powi(-3) * (3f64.powf(-1.5) - 4f64.powf(-1.5));
    assert_relative_eq!(f_kernel(1.0, &pt(0.0, 1.0, 1.0), &cfg(0.6, 3)).unwrap(), expected, max_relative = 1e-13);
    assert_relative_eq!(3f64.powf(-1.5) - 4f64.powf(-1.5), 0.067_450_089_7, max_relative = 1e-9);
    assert!(f_kernel(0.0, &pt(0.0, 1.0, 1.0), &cfg(0.6, 3)).is_err());
}

#[test]
fn g_kernel_examples() {
    let c = cfg(0.6, 3);
    let p = pt(0.4, 0.8, 1.9);
    let zeroth = (1.0 + 0.8f64.powf(1.2)).powf(-1.5) * (1.0 + 1.9f64.powf(1.2)).powf(-1.5);
    assert_relative_eq!(g_kernel(0, 1.0, &p, &c), zeroth, max_relative = 1e-14);
    assert_relative_eq!(g_kernel(1, 1.0, &pt(0.0, 1.0, 1.0), &cfg(0.7, 2)), 0.0625, max_relative = 1e-14);
}

#[test]
fn epsilon_scaling_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let h = rng.random_range(0.55..0.95);
        let d = rng.random_range(1..5);
        let c = cfg(h, d);
        let eps: f64 = 10f64.powf(rng.random_range(-4.0..0.0));
        let lam = eps.powf(0.5 / h);
        let (x, u1, u2) = (rng.random_range(0.0..5.0), rng.random_range(0.01..3.0), rng.random_range(0.01..3.0));
        let unit = pt(x, u1, u2);
        let scaled = unit.scaled(lam);
        let factor = eps.powf(-(d as f64));
        for q in 1..4 {
            assert_relative_eq!(g_kernel(q, eps, &scaled, &c), factor * g_kernel(q, 1.0, &unit, &c), max_relative = 1e-10);
        }
        assert_relative_eq!(
            f_kernel(eps, &scaled, &c).unwrap(),
            factor * f_kernel(1.0, &unit, &c).unwrap(),
            max_relative = 1e-9
        );
        assert_relative_eq!(mu(lam * x, lam * u1, lam * u2, h), eps * mu(x, u1, u2, h), max_relative = 1e-9, epsilon = 1e-300);
    }
}

/// `α_q` by direct enumeration of compositions of `q` into `d` parts.
fn alpha_brute(q: usize, d: usize) -> u128 {
    fn central(k: usize) -> u128 {
        (1..=k as u128).fold(1u128, |acc, i| acc * (k as u128 + i) / i)
    }
    fn rec(left: usize, parts: usize) -> u128 {
        if parts == 1 {
            return central(left);
        }
        (0..=left).map(|k| central(k) * rec(left - k, parts - 1)).sum()
    }
    rec(q, d)
}

#[test]
fn alpha_matches_enumeration() {
    assert_eq!(alpha_q_exact(1, 3), BigUint::from(6u32));
    assert_eq!(alpha_q_exact(2, 1), BigUint::from(6u32));
    assert_eq!(alpha_q_exact(2, 2), BigUint::from(16u32));
    for d in 1..=5 {
        assert_eq!(alpha_q(1, d).unwrap(), 2.0 * d as f64);
        for q in 1..=12 {
            assert_eq!(alpha_q_exact(q, d), BigUint::from(alpha_brute(q, d)), "q = {q}, d = {d}");
        }
    }
}

#[test]
fn beta_examples() {
    assert_relative_eq!(beta_q(1, 2).unwrap(), (2.0 * PI).powi(-2), max_relative = 1e-14);
    assert_relative_eq!(beta_q(1, 3).unwrap(), 6.0 / ((2.0 * PI).powi(3) * 4.0), max_relative = 1e-14);
    assert_relative_eq!(beta_q(2, 1).unwrap(), 6.0 / (2.0 * PI * 16.0), max_relative = 1e-14);
}

#[test]
fn series_examples() {
    let zero = chaos_series_f(1.0, &pt(5.0, 1.0, 1.0), &cfg(0.5, 3), 10).unwrap();
    assert_eq!((zero.value, zero.remainder_bound), (0.0, 0.0));

    let c = cfg(0.6, 3);
    let p = pt(0.0, 1.0, 1.0);
    let s = chaos_series_f(1.0, &p, &c, 20).unwrap();
    let f = f_kernel(1.0, &p, &c).unwrap();
    assert!((s.value - f).abs() <= f64::max(1e-10, s.remainder_bound));
    assert!(s.value + s.remainder_bound >= f * (1.0 - 1e-12));
}

#[test]
fn first_chaos_term_is_below_f() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let c = cfg(rng.random_range(0.5..0.74), 3);
        let p = pt(rng.random_range(0.0..10.0), rng.random_range(0.0..5.0), rng.random_range(0.0..5.0));
        let f = f_kernel(1.0, &p, &c).unwrap();
        let g1 = beta_q(1, 3).unwrap() * g_kernel(1, 1.0, &p, &c);
        assert!(g1 <= f * (1.0 + 1e-12), "{p:?}");
        let s1 = chaos_series_f(1.0, &p, &c, 1).unwrap();
        assert!(s1.value <= f * (1.0 + 1e-12));
    }
}

#[test]
fn heat_kernel_mean() {
    assert_relative_eq!(expected_heat_kernel(1.0, 0.0, &cfg(0.7, 2)), 1.0 / (2.0 * PI), max_relative = 1e-14);
    for h in [0.3, 0.8] {
        assert_relative_eq!(expected_heat_kernel(0.5, 1.0, &cfg(h, 2)), 0.106_103_295_394_596_9, max_relative = 1e-12);
    }
}

fn heat(eps: f64, sq: f64, d: usize) -> f64 {
    (2.0 * PI * eps).powf(-0.5 * d as f64) * (-0.5 * sq / eps).exp()
}

#[test]
fn heat_kernel_mean_by_monte_carlo() {
    let (eps, u, h, d): (f64, f64, f64, usize) = (0.3, 0.8, 0.7, 3);
    let sd = u.powf(h);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws: Vec<f64> = (0..10_000)
        .map(|_| {
            let sq: f64 = (0..d).map(|_| (sd * rng.sample::<f64, _>(StandardNormal)).powi(2)).sum();
            heat(eps, sq, d)
        })
        .collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let se = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let target = expected_heat_kernel(eps, u, &cfg(h, d));
    assert!((mean - target).abs() < 3.0 * se, "{mean} ± {se} vs {target}");
}

#[test]
fn product_moment_examples() {
    let c = cfg(0.5, 2);
    assert_relative_eq!(product_moment(1.0, &pt(3.0, 1.0, 1.0), &c), (2.0 * PI).powi(-2) / 4.0, max_relative = 1e-13);
}

#[test]
fn product_moment_by_monte_carlo() {
    let (eps, h, d) = (0.5, 0.7, 2);
    let p = pt(0.3, 0.6, 0.9);
    let (a, b, m) = (p.u1.powf(2.0 * h), p.u2.powf(2.0 * h), mu(p.x, p.u1, p.u2, h));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let draws: Vec<f64> = (0..10_000)
        .map(|_| {
            let (mut sx, mut sy) = (0.0, 0.0);
            for _ in 0..d {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let x = a.sqrt() * z1;
                let y = m / a.sqrt() * z1 + (b - m * m / a).sqrt() * z2;
                sx += x * x;
                sy += y * y;
            }
            heat(eps, sx, d) * heat(eps, sy, d)
        })
        .collect();
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let se = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let target = product_moment(eps, &p, &cfg(h, d));
    assert!((mean - target).abs() < 3.0 * se, "{mean} ± {se} vs {target}");
}

#[test]
fn covariance_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10_000 {
        let c = cfg(rng.random_range(0.3..0.95), rng.random_range(1..5));
        let eps = rng.random_range(0.05..2.0);
        let p = pt(rng.random_range(0.0..3.0), rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
        let f = f_kernel(eps, &p, &c).unwrap();
        let pm = product_moment(eps, &p, &c);
        let means = expected_heat_kernel(eps, p.u1, &c) * expected_heat_kernel(eps, p.u2, &c);
        assert!((f - (pm - means)).abs() <= 1e-12 * pm, "{p:?}");
    }
}

#[test]
fn nondeterminism_margins() {
    let c = cfg(0.5, 1);
    assert_relative_eq!(lnd_margin(Region::S3, 0.7, 1.3, 2.1, &c).unwrap(), 1.0, max_relative = 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let log_gap = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-3.0..3.0));
    let c = cfg(0.75, 1);
    let mut worst = f64::INFINITY;
    for _ in 0..100_000 {
        let (a, b, cc) = (log_gap(&mut rng), log_gap(&mut rng), log_gap(&mut rng));
        worst = worst.min(lnd_margin(Region::S3, a, b, cc, &c).unwrap());
    }
    assert!(worst > 0.05, "{worst}");

    let c = cfg(0.6, 1);
    for _ in 0..10_000 {
        let (a, b, cc) = (log_gap(&mut rng), log_gap(&mut rng), log_gap(&mut rng));
        assert!(lnd_margin(Region::S2, a, b, cc, &c).unwrap() > 0.0);
    }
    assert!(lnd_margin(Region::S1, 0.0, 1.0, 1.0, &c).is_err());
}

#[test]
fn decay_bounds() {
    let h = 0.75;
    let check = mu_bound_check(1.0, 1.0, 1.0, h);
    assert_relative_eq!(check.lhs, mu_oracle(2.0, 1.0, 1.0, h), max_relative = 1e-13);
    assert_relative_eq!(check.lhs, 0.269_649_, max_relative = 1e-5);
    assert_relative_eq!(check.gap_ratio(), check.lhs, max_relative = 1e-14);

    for h in [0.55, 0.7, 0.9] {
        let far = mu_bound_check(0.8, 1e7, 1.3, h);
        assert_relative_eq!(far.gap_ratio(), gap_bound_constant(h), max_relative = 1e-5);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let b = mu_bound_check(rng.random_range(0.01..5.0), rng.random_range(0.0..5.0), rng.random_range(0.01..5.0), h);
            assert!(b.span_ratio() <= span_bound_constant(h) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn region_coordinates_round_trip() {
    for region in Region::ALL {
        let p = region.point(0.3, 0.9, 1.7);
        assert!(region.contains(&p));
        let (a, b, c) = region.coords(&p);
        assert_relative_eq!(a, 0.3, max_relative = 1e-14);
        assert_relative_eq!(b, 0.9, max_relative = 1e-14);
        assert_relative_eq!(c, 1.7, max_relative = 1e-14);
        assert_eq!(Region::from_index(region.index()).unwrap(), region);
    }
}
