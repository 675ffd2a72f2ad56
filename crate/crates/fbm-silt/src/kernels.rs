//! Covariance kernels of the chaos expansion and bound predicates.
//!
//! All kernels are evaluated at a [`KernelPoint`] `(x, u1, u2)`: the offset
//! between the left end points of two increments and their lengths.

use std::f64::consts::PI;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result, SiltError};
use crate::fbm::{mu, HurstConfig};

/// Largest `q` for which `alpha_q` is evaluated exactly with big integers.
pub const ALPHA_EXACT_MAX: usize = 20;
/// Default upper limit for `q` in `alpha_q`.
pub const ALPHA_CAP: usize = 60;

/// Offset and lengths of a pair of increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub x: f64,
    pub u1: f64,
    pub u2: f64,
}

impl KernelPoint {
    pub fn new(x: f64, u1: f64, u2: f64) -> Result<Self> {
        for v in [x, u1, u2] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("kernel coordinates must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { x, u1, u2 })
    }

    pub fn mu(&self, hurst: f64) -> f64 {
        mu(self.x, self.u1, self.u2, hurst)
    }

    /// The point with all coordinates multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { x: self.x * factor, u1: self.u1 * factor, u2: self.u2 * factor }
    }
}

/// One of the three sectors partitioning the positive octant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// Overlapping increments: `x + u2 ≥ u1 ≥ x`.
    S1,
    /// Second increment nested inside the first: `u1 ≥ x + u2`.
    S2,
    /// Disjoint increments: `x ≥ u1`.
    S3,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::S1, Region::S2, Region::S3];

    pub fn contains(&self, p: &KernelPoint) -> bool {
        match self {
            Region::S1 => p.x + p.u2 - p.u1 >= 0.0 && p.u1 - p.x >= 0.0,
            Region::S2 => p.u1 - p.x - p.u2 >= 0.0,
            Region::S3 => p.x - p.u1 >= 0.0,
        }
    }

    /// Maps sector coordinates `(a, b, c) ∈ R₊³` onto the sector. Unit Jacobian.
    pub fn point(&self, a: f64, b: f64, c: f64) -> KernelPoint {
        match self {
            Region::S1 => KernelPoint { x: a, u1: a + b, u2: b + c },
            Region::S2 => KernelPoint { x: a, u1: a + b + c, u2: b },
            Region::S3 => KernelPoint { x: a + b, u1: a, u2: c },
        }
    }

    /// Inverse of [`Region::point`] for points inside the sector.
    pub fn coords(&self, p: &KernelPoint) -> (f64, f64, f64) {
        match self {
            Region::S1 => (p.x, p.u1 - p.x, p.x + p.u2 - p.u1),
            Region::S2 => (p.x, p.u2, p.u1 - p.x - p.u2),
            Region::S3 => (p.u1, p.x - p.u1, p.u2),
        }
    }

    pub fn index(&self) -> usize {
        match self {
            Region::S1 => 1,
            Region::S2 => 2,
            Region::S3 => 3,
        }
    }

    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            1 => Ok(Region::S1),
            2 => Ok(Region::S2),
            3 => Ok(Region::S3),
            _ => Err(invalid(format!("region index {index} not in 1..=3"))),
        }
    }
}

/// `Θ_ε`: determinant of the covariance of the two mollified increments.
pub fn theta(eps: f64, p: &KernelPoint, cfg: &HurstConfig) -> f64 {
    let two_h = cfg.two_h();
    let a = p.u1.powf(two_h);
    let b = p.u2.powf(two_h);
    let m = p.mu(cfg.hurst);
    eps * eps + eps * (a + b) + a * b - m * m
}

/// Variances `ε + u^{2H}` of the two mollified increments and their covariance `μ`.
fn moments(eps: f64, p: &KernelPoint, cfg: &HurstConfig) -> (f64, f64, f64) {
    let two_h = cfg.two_h();
    (eps + p.u1.powf(two_h), eps + p.u2.powf(two_h), p.mu(cfg.hurst))
}

/// Squared correlation `μ² / ((ε + u1^{2H})(ε + u2^{2H}))`.
pub fn correlation_ratio(eps: f64, p: &KernelPoint, cfg: &HurstConfig) -> f64 {
    let (a, b, m) = moments(eps, p, cfg);
    m * m / (a * b)
}

/// `F_{ε,x}(u1, u2)`: covariance of the heat kernel evaluated at two increments.
///
/// Evaluated as `(2π)^{-d} (AB)^{-d/2} ((1 - ρ)^{-d/2} - 1)` to avoid cancellation.
pub fn f_kernel(eps: f64, p: &KernelPoint, cfg: &HurstConfig) -> Result<f64> {
    let (a, b, m) = moments(eps, p, cfg);
    let rho = m * m / (a * b);
    if !(rho < 1.0) {
        return Err(SiltError::Domain(format!(
            "(ε + u1^2H)(ε + u2^2H) <= μ² at {p:?} (ε = {eps})"
        )));
    }
    Ok(f_from_parts(a, b, rho, cfg.d()))
}

/// Unchecked variant of [`f_kernel`] for integrand loops; returns 0 off the domain.
pub(crate) fn f_kernel_unchecked(eps: f64, p: &KernelPoint, cfg: &HurstConfig) -> f64 {
    let (a, b, m) = moments(eps, p, cfg);
    let rho = m * m / (a * b);
    if rho < 1.0 {
        f_from_parts(a, b, rho, cfg.d())
    } else {
        0.0
    }
}

fn f_from_parts(a: f64, b: f64, rho: f64, d: f64) -> f64 {
    let half_d = 0.5 * d;
    let excess = (-half_d * (-rho).ln_1p()).exp_m1();
    (2.0 * PI).powf(-d) * (a * b).powf(-half_d) * excess
}

/// `G^{(q)}_{ε,x}(u1, u2) = (AB)^{-d/2-q} μ^{2q}`.
pub fn g_kernel(q: u32, eps: f64, p: &KernelPoint, cfg: &HurstConfig) -> f64 {
    let (a, b, m) = moments(eps, p, cfg);
    let e = -0.5 * cfg.d() - q as f64;
    a.powf(e) * b.powf(e) * m.powi(2 * q as i32)
}

/// Exact `α_q` as a big integer, by convolving the central binomial series `d` times.
pub fn alpha_q_exact(q: usize, d: usize) -> BigUint {
    let central: Vec<BigUint> = (0..=q).map(central_binomial).collect();
    let mut acc: Vec<BigUint> = (0..=q).map(|k| if k == 0 { BigUint::one() } else { BigUint::zero() }).collect();
    for _ in 0..d {
        let mut next = vec![BigUint::zero(); q + 1];
        for (i, ai) in acc.iter().enumerate() {
            if ai.is_zero() {
                continue;
            }
            for (k, ck) in central.iter().enumerate().take(q + 1 - i) {
                next[i + k] += ai * ck;
            }
        }
        acc = next;
    }
    acc.swap_remove(q)
}

fn central_binomial(k: usize) -> BigUint {
    let mut c = BigUint::one();
    for i in 0..k {
        c = c * BigUint::from(2 * (2 * i + 1)) / BigUint::from(i + 1);
    }
    c
}

/// `ln α_q` via the identity `α_q = 4^q (d/2)_q / q!`.
pub fn ln_alpha_q(q: usize, d: usize) -> f64 {
    let half_d = 0.5 * d as f64;
    q as f64 * 4f64.ln() + ln_gamma(half_d + q as f64) - ln_gamma(half_d) - ln_gamma(q as f64 + 1.0)
}

/// Sum over compositions `q1 + … + qd = q` of `∏ (2q_j)! / (q_j!)²`.
pub fn alpha_q(q: usize, d: usize) -> Result<f64> {
    alpha_q_capped(q, d, ALPHA_CAP)
}

pub fn alpha_q_capped(q: usize, d: usize, cap: usize) -> Result<f64> {
    if q == 0 || d == 0 {
        return Err(invalid("alpha_q needs q >= 1 and d >= 1"));
    }
    if q > cap {
        return Err(SiltError::Range(format!("alpha_q requested for q = {q} above cap {cap}")));
    }
    if q <= ALPHA_EXACT_MAX {
        alpha_q_exact(q, d)
            .to_f64()
            .ok_or_else(|| SiltError::Range(format!("alpha_{q} overflows f64")))
    } else {
        Ok(ln_alpha_q(q, d).exp())
    }
}

/// `β_q = α_q / ((2π)^d 4^q)`.
pub fn beta_q(q: usize, d: usize) -> Result<f64> {
    let alpha = alpha_q(q, d)?;
    Ok(alpha / ((2.0 * PI).powi(d as i32) * 4f64.powi(q as i32)))
}

/// Truncated chaos series of `F` with a remainder bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub remainder_bound: f64,
    pub order: usize,
}

/// Tolerance on `1 - ρ` below which the chaos series is declared divergent.
pub const SERIES_RHO_TOL: f64 = 1e-12;

/// `Σ_{q=1}^{order} β_q G^{(q)}` and a bound on the omitted tail.
///
/// Consecutive terms satisfy `t_{q+1} = t_q ρ (d/2 + q)/(q + 1)`, so the tail
/// after `Q` is dominated by a geometric series with ratio
/// `ρ max(1, (d/2 + Q + 1)/(Q + 2))`. When that ratio reaches 1 the bound falls
/// back to the exact complement of the binomial series.
pub fn chaos_series_f(eps: f64, p: &KernelPoint, cfg: &HurstConfig, order: usize) -> Result<SeriesValue> {
    if order == 0 {
        return Err(invalid("series order must be >= 1"));
    }
    let (a, b, m) = moments(eps, p, cfg);
    let rho = m * m / (a * b);
    if rho >= 1.0 - SERIES_RHO_TOL {
        return Err(SiltError::NonConvergence(format!("correlation ratio {rho} too close to 1")));
    }
    let d = cfg.d();
    let half_d = 0.5 * d;
    let base = (2.0 * PI).powf(-d) * (a * b).powf(-half_d);
    let mut sum = 0.0;
    let mut term = base;
    for q in 1..=order {
        term *= rho * (half_d + q as f64 - 1.0) / q as f64;
        sum += term;
    }
    if rho == 0.0 {
        return Ok(SeriesValue { value: 0.0, remainder_bound: 0.0, order });
    }
    let next = term * rho * (half_d + order as f64) / (order as f64 + 1.0);
    let ratio = rho * f64::max(1.0, (half_d + order as f64 + 1.0) / (order as f64 + 2.0));
    let remainder_bound = if ratio < 1.0 {
        next / (1.0 - ratio)
    } else {
        (f_from_parts(a, b, rho, d) - sum).max(0.0)
    };
    Ok(SeriesValue { value: sum, remainder_bound, order })
}

/// `E[p_ε(B_t - B_s)]` with `u = t - s`.
pub fn expected_heat_kernel(eps: f64, u: f64, cfg: &HurstConfig) -> f64 {
    let d = cfg.d();
    (2.0 * PI).powf(-0.5 * d) * (eps + u.abs().powf(cfg.two_h())).powf(-0.5 * d)
}

/// `E[p_ε(B_{t1} - B_{s1}) p_ε(B_{t2} - B_{s2})] = (2π)^{-d} Θ_ε^{-d/2}`.
pub fn product_moment(eps: f64, p: &KernelPoint, cfg: &HurstConfig) -> f64 {
    let d = cfg.d();
    (2.0 * PI).powf(-d) * theta(eps, p, cfg).powf(-0.5 * d)
}

/// Upper bound `(2π)^{-d} (d/2 + 1) μ²/(u1 u2)^{2H} Θ_ε^{-d/2}` for `F`.
pub fn f_theta_bound(eps: f64, p: &KernelPoint, cfg: &HurstConfig) -> f64 {
    let denom = (p.u1 * p.u2).powf(cfg.two_h());
    if denom == 0.0 {
        return 0.0;
    }
    let m = p.mu(cfg.hurst);
    (2.0 * PI).powf(-cfg.d()) * (0.5 * cfg.d() + 1.0) * m * m / denom * theta(eps, p, cfg).powf(-0.5 * cfg.d())
}

/// Ratio of the increment covariance determinant to the local
/// nondeterminism lower bound (with unit constant) for the ordering
/// associated with `region`.
///
/// Sector coordinates `(a, b, c)` are the gaps of the ordered end points:
/// `S1` is `s1 < s2 < t1 < t2`, `S2` is `s1 < s2 < t2 < t1`,
/// `S3` is `s1 < t1 < s2 < t2`.
pub fn lnd_margin(region: Region, a: f64, b: f64, c: f64, cfg: &HurstConfig) -> Result<f64> {
    for v in [a, b, c] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(format!("ordering requires strictly positive gaps, got ({a}, {b}, {c})")));
        }
    }
    let h2 = cfg.two_h();
    let p = region.point(a, b, c);
    let m = p.mu(cfg.hurst);
    let det = (p.u1 * p.u2).powf(h2) - m * m;
    let bound = match region {
        Region::S1 => (a + b).powf(h2) * c.powf(h2) + (b + c).powf(h2) * a.powf(h2),
        Region::S2 => b.powf(h2) * (a.powf(h2) + c.powf(h2)),
        Region::S3 => a.powf(h2) * c.powf(h2),
    };
    Ok(det / bound)
}

/// Sides of the decay bounds on the covariance of disjoint increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuBound {
    /// `μ(a + b, a, c)`.
    pub lhs: f64,
    /// `b^{2H-2} a c`.
    pub gap_rhs: f64,
    /// `(x + u1 + u2)^{2H-2} u1 u2` with `x = a + b`, `u1 = a`, `u2 = c`.
    pub span_rhs: f64,
}

impl MuBound {
    pub fn gap_ratio(&self) -> f64 {
        self.lhs / self.gap_rhs
    }

    pub fn span_ratio(&self) -> f64 {
        self.lhs / self.span_rhs
    }
}

/// Evaluates both sides of the decay bounds for increments `[0, a]` and `[a + b, a + b + c]`.
pub fn mu_bound_check(a: f64, b: f64, c: f64, hurst: f64) -> MuBound {
    let e = 2.0 * hurst - 2.0;
    MuBound {
        lhs: mu(a + b, a, c, hurst),
        gap_rhs: b.powf(e) * a * c,
        span_rhs: (2.0 * a + b + c).powf(e) * a * c,
    }
}

/// Constant `H(2H - 1)` of the gap bound, sharp as `b → ∞`.
pub fn gap_bound_constant(hurst: f64) -> f64 {
    hurst * (2.0 * hurst - 1.0)
}

/// Constant `H 4^{2-2H}` making the span bound valid for `H > 1/2`.
pub fn span_bound_constant(hurst: f64) -> f64 {
    hurst * 4f64.powf(2.0 - 2.0 * hurst)
}
