//! Limit constants as integrals over unbounded, non-smooth domains.
//!
//! Three-dimensional integrals over the positive octant are split into the
//! sectors of [`Region`], each mapped to `R₊³` with unit Jacobian, and every
//! unbounded axis is compactified by a [`Transform`]. One-dimensional constants
//! are integrated on `[0, R]` and completed with an exact asymptotic series for
//! the tail beyond `R`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubature::{integrate_1d, integrate_box, QuadResult, Tolerance};
use crate::error::{invalid, Result, SiltError};
use crate::fbm::{mu, HurstConfig, Regime};
use crate::kernels::{beta_q, f_kernel_unchecked, gap_bound_constant, KernelPoint, Region};

/// Truncation radius used by one-dimensional constants when none is given.
pub const DEFAULT_LINE_RADIUS: f64 = 50.0;
/// Truncation radius used by integrability probes when none is given.
pub const DEFAULT_PROBE_RADIUS: f64 = 1.0e3;
/// Largest relative change tolerated between a probe at `R` and at `2R`.
pub const DEFAULT_DOUBLING_TOL: f64 = 0.05;

/// Compactification of `[0, ∞)` onto a bounded interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Transform {
    /// `u = v / (1 - v)`.
    #[default]
    Rational,
    /// `u = tan(π v / 2)`.
    Tangent,
    /// `u = v`; needs a finite truncation radius.
    Identity,
}

impl Transform {
    /// Upper end in `v` for a truncation radius (`None` means the full half line).
    pub fn upper(&self, radius: Option<f64>) -> Result<f64> {
        match (self, radius) {
            (Transform::Rational, None) => Ok(1.0),
            (Transform::Rational, Some(r)) => Ok(r / (1.0 + r)),
            (Transform::Tangent, None) => Ok(1.0),
            (Transform::Tangent, Some(r)) => Ok(r.atan() * 2.0 / PI),
            (Transform::Identity, Some(r)) => Ok(r),
            (Transform::Identity, None) => Err(invalid("identity transform needs a truncation radius")),
        }
    }

    /// Returns `(u(v), du/dv)`.
    pub fn map(&self, v: f64) -> (f64, f64) {
        match self {
            Transform::Rational => {
                let w = 1.0 - v;
                (v / w, 1.0 / (w * w))
            }
            Transform::Tangent => {
                let angle = 0.5 * PI * v;
                let c = angle.cos();
                (angle.tan(), 0.5 * PI / (c * c))
            }
            Transform::Identity => (v, 1.0),
        }
    }
}

/// Accuracy and domain settings for constant integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: u64,
    /// Cut-off on every unbounded axis before the transform; `None` integrates the full domain.
    #[serde(default)]
    pub truncation_radius: Option<f64>,
    #[serde(default)]
    pub transform: Transform,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-4, abs_tol: 1e-14, max_evals: 10_000_000, truncation_radius: None, transform: Transform::Rational }
    }
}

impl QuadSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(invalid("quadrature tolerances must be positive"));
        }
        if self.max_evals < 1000 {
            return Err(invalid("max_evals must be at least 1000"));
        }
        if let Some(r) = self.truncation_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid("truncation radius must be positive and finite"));
            }
        }
        if self.transform == Transform::Identity && self.truncation_radius.is_none() {
            return Err(invalid("identity transform needs a truncation radius"));
        }
        Ok(())
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance { rel: self.rel_tol, abs: self.abs_tol, max_evals: self.max_evals }
    }

    pub fn with_radius(mut self, radius: Option<f64>) -> Self {
        self.truncation_radius = radius;
        self
    }

    pub fn with_transform(mut self, transform: Transform) -> Self {
        self.transform = transform;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_max_evals(mut self, max_evals: u64) -> Self {
        self.max_evals = max_evals;
        self
    }
}

fn require_subcritical(cfg: &HurstConfig) -> Result<()> {
    cfg.validate()?;
    cfg.require(Regime::Subcritical)
}

/// Integrates `f` over one sector of the octant, all three axes unbounded.
fn integrate_sector<F>(region: Region, f: F, spec: &QuadSpec, tol: &Tolerance) -> Result<QuadResult>
where
    F: Fn(&KernelPoint) -> f64,
{
    let upper = spec.transform.upper(spec.truncation_radius)?;
    let tr = spec.transform;
    let integrand = |v: &[f64]| {
        let (a, ja) = tr.map(v[0]);
        let (b, jb) = tr.map(v[1]);
        let (c, jc) = tr.map(v[2]);
        let val = f(&region.point(a, b, c));
        if val == 0.0 {
            0.0
        } else {
            val * ja * jb * jc
        }
    };
    Ok(integrate_box(integrand, &[0.0; 3], &[upper; 3], tol))
}

/// Sums the three sector integrals; sectors run in parallel and are added in index order.
fn integrate_octant<F>(f: F, spec: &QuadSpec) -> Result<(QuadResult, Vec<QuadResult>)>
where
    F: Fn(&KernelPoint) -> f64 + Sync,
{
    spec.validate()?;
    let full = spec.tolerance();
    let tol = Tolerance { rel: full.rel, abs: full.abs / 3.0, max_evals: full.max_evals / 3 };
    let parts: Vec<QuadResult> = Region::ALL
        .par_iter()
        .map(|r| integrate_sector(*r, &f, spec, &tol))
        .collect::<Result<_>>()?;
    Ok((QuadResult::combine(&parts).recheck(&full), parts))
}

fn ensure_converged(res: QuadResult, what: &str) -> Result<QuadResult> {
    if res.converged {
        Ok(res)
    } else {
        Err(SiltError::NonConvergence(format!(
            "{what}: value {:e}, error estimate {:e} after {} evaluations",
            res.value, res.error_estimate, res.evals
        )))
    }
}

/// Analytic bound on the mass of a kernel of the form
/// `C μ² (u1 u2)^{-2H} ((1 - k²) A B)^{-e}` over the sector-3 slab `b > R`, `a, c ≤ R`,
/// using `μ ≤ H(2H-1) b^{2H-2} a c`. Only valid for `1/2 < H < 3/4`.
fn sector3_slab_bound(prefactor: f64, exponent: f64, radius: f64, cfg: &HurstConfig) -> Option<f64> {
    let h = cfg.hurst;
    if !(h > 0.5 && h < 0.75) {
        return None;
    }
    let k = gap_bound_constant(h);
    let two_h = cfg.two_h();
    let tol = Tolerance { rel: 1e-8, abs: 1e-300, max_evals: 100_000 };
    let side = integrate_1d(|a: f64| a.powf(2.0 - two_h) * (1.0 + a.powf(two_h)).powf(-exponent), 0.0, radius, &tol);
    let slab = radius.powf(4.0 * h - 3.0) / (3.0 - 4.0 * h);
    Some(prefactor * k * k * (1.0 - k * k).powf(-exponent) * slab * side.value * side.value)
}

/// `σ² = 2 ∫_{R₊³} F_{1,x}(u1, u2)`: variance constant of the subcritical limit.
pub fn sigma_squared(cfg: &HurstConfig, spec: &QuadSpec) -> Result<QuadResult> {
    require_subcritical(cfg)?;
    let c = *cfg;
    let (res, _) = integrate_octant(|p| f_kernel_unchecked(1.0, p, &c), spec)?;
    let mut res = res.scale(2.0);
    if let Some(r) = spec.truncation_radius {
        let pre = 2.0 * (2.0 * PI).powf(-cfg.d()) * (0.5 * cfg.d() + 1.0);
        res.tail_bound = sector3_slab_bound(pre, 0.5 * cfg.d(), r, cfg);
    }
    ensure_converged(res, "sigma_squared")
}

/// Per-sector contributions to `σ²`, in sector order.
pub fn sigma_squared_by_region(cfg: &HurstConfig, spec: &QuadSpec) -> Result<Vec<QuadResult>> {
    require_subcritical(cfg)?;
    let c = *cfg;
    let (_, parts) = integrate_octant(|p| f_kernel_unchecked(1.0, p, &c), spec)?;
    Ok(parts.into_iter().map(|p| p.scale(2.0)).collect())
}

/// `σ²` integrated over the octant in the original coordinates, without sector splitting.
pub fn sigma_squared_direct(cfg: &HurstConfig, spec: &QuadSpec) -> Result<QuadResult> {
    require_subcritical(cfg)?;
    spec.validate()?;
    let upper = spec.transform.upper(spec.truncation_radius)?;
    let tr = spec.transform;
    let c = *cfg;
    let integrand = |v: &[f64]| {
        let (x, jx) = tr.map(v[0]);
        let (u1, j1) = tr.map(v[1]);
        let (u2, j2) = tr.map(v[2]);
        let val = f_kernel_unchecked(1.0, &KernelPoint { x, u1, u2 }, &c);
        if val == 0.0 {
            0.0
        } else {
            val * jx * j1 * j2
        }
    };
    let res = integrate_box(integrand, &[0.0; 3], &[upper; 3], &spec.tolerance()).scale(2.0);
    ensure_converged(res, "sigma_squared_direct")
}

/// `σ_q² = 2 β_q ∫_{R₊³} G^{(q)}_{1,x}(u1, u2)`: share of chaos order `2q` in `σ²`.
pub fn sigma_q_squared(q: usize, cfg: &HurstConfig, spec: &QuadSpec) -> Result<QuadResult> {
    require_subcritical(cfg)?;
    if q == 0 {
        return Err(invalid("chaos index q must be >= 1"));
    }
    let beta = beta_q(q, cfg.dim)?;
    let c = *cfg;
    let half_d = 0.5 * cfg.d();
    let two_h = cfg.two_h();
    let qi = q as i32;
    let kernel = move |p: &KernelPoint| {
        let a = 1.0 + p.u1.powf(two_h);
        let b = 1.0 + p.u2.powf(two_h);
        let m = mu(p.x, p.u1, p.u2, c.hurst);
        let rho = m * m / (a * b);
        // NaN only at infinite coordinates, where the kernel vanishes.
        if rho > 0.0 {
            (a * b).powf(-half_d) * rho.powi(qi)
        } else {
            0.0
        }
    };
    let (res, _) = integrate_octant(kernel, spec)?;
    let mut res = res.scale(2.0 * beta);
    if let Some(r) = spec.truncation_radius {
        let pre = 2.0 * (2.0 * PI).powf(-cfg.d()) * (0.5 * cfg.d() + 1.0);
        res.tail_bound = sector3_slab_bound(pre, half_d, r, cfg);
    }
    ensure_converged(res, &format!("sigma_q_squared(q = {q})"))
}

/// `σ_q²` for `q = 1..=order`.
pub fn sigma_q_sequence(order: usize, cfg: &HurstConfig, spec: &QuadSpec) -> Result<Vec<QuadResult>> {
    (1..=order).map(|q| sigma_q_squared(q, cfg, spec)).collect()
}

/// `∫_R^∞ u^m (1 + u^a)^{-b} du` from the binomial expansion of `(1 + u^{-a})^{-b}`.
///
/// Needs `R > 1` and `a b > m + 1`.
pub fn power_tail(m: f64, a: f64, b: f64, radius: f64) -> Result<f64> {
    if !(radius > 1.0) {
        return Err(invalid("tail series needs a truncation radius above 1"));
    }
    if !(a * b > m + 1.0) {
        return Err(SiltError::Domain(format!("u^{m} (1 + u^{a})^-{b} is not integrable at infinity")));
    }
    let mut sum = 0.0;
    let mut coeff = 1.0;
    for k in 0..1000 {
        let expo = a * (b + k as f64) - m - 1.0;
        let term = coeff * radius.powf(-expo) / expo;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            return Ok(sum);
        }
        coeff *= -(b + k as f64) / (k as f64 + 1.0);
    }
    Err(SiltError::NonConvergence("tail series did not converge".into()))
}

/// `∫_0^∞ u^m (1 + u^a)^{-b} du` by quadrature on `[0, R]` plus the exact tail.
pub fn power_integral(m: f64, a: f64, b: f64, spec: &QuadSpec) -> Result<QuadResult> {
    spec.validate()?;
    let radius = spec.truncation_radius.unwrap_or(DEFAULT_LINE_RADIUS);
    let tail = power_tail(m, a, b, radius)?;
    let tr = spec.transform;
    let upper = tr.upper(Some(radius))?;
    let f = |v: f64| {
        let (u, j) = tr.map(v);
        u.powf(m) * (1.0 + u.powf(a)).powf(-b) * j
    };
    let mut tol = spec.tolerance();
    tol.rel *= 0.1;
    let mut res = integrate_1d(f, 0.0, upper, &tol);
    res.value += tail;
    res.converged = res.error_estimate <= spec.tolerance().target(res.value);
    ensure_converged(res, "power_integral")
}

/// `Λ = ((2π)^{-d/2}/2) ∫_0^∞ (1 + u^{2H})^{-d/2-1} u² du`: scale of the Hermite limit.
pub fn lambda_const(cfg: &HurstConfig, spec: &QuadSpec) -> Result<QuadResult> {
    cfg.validate()?;
    if cfg.hurst <= 0.75 {
        return Err(SiltError::Regime { required: "H > 3/4".into(), actual: cfg.regime() });
    }
    let b = 0.5 * cfg.d() + 1.0;
    if cfg.two_h() * b <= 3.0 {
        return Err(SiltError::Domain(format!(
            "Lambda diverges: tail exponent 2 - 2H(d/2 + 1) = {} >= -1",
            2.0 - cfg.two_h() * b
        )));
    }
    let integral = power_integral(2.0, cfg.two_h(), b, spec)?;
    Ok(integral.scale(0.5 * (2.0 * PI).powf(-0.5 * cfg.d())))
}

/// Prefactor `√(3d) / (2^{(d+5)/2} π^{d/2})` of the critical constant.
pub fn rho_prefactor(dim: usize) -> f64 {
    let d = dim as f64;
    (3.0 * d).sqrt() / (2f64.powf(0.5 * (d + 5.0)) * PI.powf(0.5 * d))
}

fn require_critical_dim(dim: usize) -> Result<()> {
    if dim < 3 {
        let actual = crate::fbm::classify_regime(&HurstConfig { hurst: 0.75, dim: dim.max(1) });
        return Err(SiltError::Regime { required: "Critical (H = 3/4, d >= 3)".into(), actual });
    }
    Ok(())
}

/// `ρ`: standard deviation constant of the critical (`H = 3/4`) limit.
pub fn rho_const(dim: usize, spec: &QuadSpec) -> Result<QuadResult> {
    require_critical_dim(dim)?;
    let integral = power_integral(2.0, 1.5, 0.5 * dim as f64 + 1.0, spec)?;
    Ok(integral.scale(rho_prefactor(dim)))
}

/// Largest resolution accepted by [`rho_tilde`].
pub const RHO_TILDE_MAX_RESOLUTION: u32 = 24;

/// `ρ̃_M`: Riemann-sum approximation of `ρ` on the nodes `k / 2^M`, `k = 2..=M 2^M`.
pub fn rho_tilde(dim: usize, resolution: u32) -> Result<f64> {
    require_critical_dim(dim)?;
    if resolution == 0 || resolution > RHO_TILDE_MAX_RESOLUTION {
        return Err(invalid(format!("resolution must lie in 1..={RHO_TILDE_MAX_RESOLUTION}")));
    }
    let b = 0.5 * dim as f64 + 1.0;
    let scale = 2f64.powi(resolution as i32);
    let last = resolution as u64 * (1u64 << resolution);
    let sum: f64 = (2..=last)
        .map(|k| {
            let u = k as f64 / scale;
            (1.0 + u.powf(1.5)).powf(-b) * u * u
        })
        .sum();
    Ok(rho_prefactor(dim) * sum / scale)
}

/// `c_H = H²(2H - 1)/(4H - 3)`, the variance scale of the order-2 Hermite process.
pub fn c_h_const(hurst: f64) -> Result<f64> {
    if !(hurst > 0.75 + 1e-9 && hurst < 1.0) {
        return Err(SiltError::Range(format!("c_H needs 3/4 < H < 1, got {hurst}")));
    }
    Ok(hurst * hurst * (2.0 * hurst - 1.0) / (4.0 * hurst - 3.0))
}

/// `H²(2H - 1)² ∫_{[0,1]²} |s1 - s2|^{4H-4}` by two-dimensional cubature.
///
/// On the triangle `s2 < s1` the substitution `s2 = s1 (1 - w^{1/(4H-3)})`
/// absorbs the diagonal singularity into the Jacobian.
pub fn c_h_quadrature(hurst: f64, spec: &QuadSpec) -> Result<QuadResult> {
    c_h_const(hurst)?;
    let gamma = 1.0 / (4.0 * hurst - 3.0);
    let integrand = |v: &[f64]| {
        let s1 = v[0];
        let w = v[1];
        let t = w.powf(gamma);
        let diff = s1 * t;
        if diff == 0.0 {
            return 0.0;
        }
        // |s1 - s2|^{4H-4} · ds2/dw with s2 = s1 (1 - t).
        diff.powf(4.0 * hurst - 4.0) * s1 * gamma * w.powf(gamma - 1.0)
    };
    let res = integrate_box(integrand, &[0.0, 0.0], &[1.0, 1.0], &spec.tolerance());
    let k = hurst * (2.0 * hurst - 1.0);
    ensure_converged(res.scale(2.0 * k * k), "c_h_quadrature")
}

/// Integration domain for the tightness probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeDomain {
    Sector(Region),
    Octant,
}

/// Outcome of a truncation-doubling study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    /// Integral truncated at `2R`.
    pub result: QuadResult,
    /// Integral truncated at `R`.
    pub half_radius: QuadResult,
    pub radius: f64,
    pub relative_change: f64,
}

/// `Ψ = μ² (u1 u2)^{-2H} Θ_1^{-d/p}`.
fn tightness_integrand(p: &KernelPoint, cfg: &HurstConfig, moment: f64) -> f64 {
    let two_h = cfg.two_h();
    let a = p.u1.powf(two_h);
    let b = p.u2.powf(two_h);
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let m = mu(p.x, p.u1, p.u2, cfg.hurst);
    let theta = 1.0 + a + b + a * b - m * m;
    m * m / (a * b) * theta.powf(-cfg.d() / moment)
}

fn probe_at(domain: ProbeDomain, moment: f64, cfg: &HurstConfig, spec: &QuadSpec) -> Result<QuadResult> {
    let c = *cfg;
    let f = move |p: &KernelPoint| tightness_integrand(p, &c, moment);
    match domain {
        ProbeDomain::Sector(r) => integrate_sector(r, f, spec, &spec.tolerance()),
        ProbeDomain::Octant => integrate_octant(f, spec).map(|(res, _)| res),
    }
}

/// `∫ μ² (u1 u2)^{-2H} Θ_1^{-d/p}` over a sector or the octant, with a truncation-doubling check.
pub fn integrability_probe(domain: ProbeDomain, moment: f64, cfg: &HurstConfig, spec: &QuadSpec) -> Result<ProbeResult> {
    integrability_probe_with(domain, moment, cfg, spec, DEFAULT_DOUBLING_TOL)
}

pub fn integrability_probe_with(
    domain: ProbeDomain,
    moment: f64,
    cfg: &HurstConfig,
    spec: &QuadSpec,
    doubling_tol: f64,
) -> Result<ProbeResult> {
    cfg.validate()?;
    spec.validate()?;
    let limit = 4.0 * cfg.hurst * cfg.d() / 3.0;
    if !(moment > 0.0 && moment < limit) {
        return Err(invalid(format!("moment p = {moment} must lie in (0, 4Hd/3 = {limit})")));
    }
    if cfg.hurst <= 1.5 / cfg.d() {
        return Err(SiltError::Regime { required: "H > 3/(2d)".into(), actual: cfg.regime() });
    }
    if domain == ProbeDomain::Octant && cfg.hurst >= 0.75 {
        return Err(SiltError::Regime { required: "H < 3/4 for the full octant".into(), actual: cfg.regime() });
    }
    let radius = spec.truncation_radius.unwrap_or(DEFAULT_PROBE_RADIUS);
    let near = probe_at(domain, moment, cfg, &spec.with_radius(Some(radius)))?;
    let mut far = probe_at(domain, moment, cfg, &spec.with_radius(Some(2.0 * radius)))?;
    if matches!(domain, ProbeDomain::Sector(Region::S3) | ProbeDomain::Octant) {
        far.tail_bound = sector3_slab_bound(1.0, cfg.d() / moment, 2.0 * radius, cfg);
    }
    let relative_change = (far.value - near.value).abs() / far.value.abs().max(f64::MIN_POSITIVE);
    let out = ProbeResult { result: far, half_radius: near, radius, relative_change };
    if !far.converged || !near.converged {
        return Err(SiltError::NonConvergence(format!("integrability probe on {domain:?}: {out:?}")));
    }
    if relative_change > doubling_tol {
        return Err(SiltError::NonConvergence(format!(
            "integrability probe on {domain:?} changed by {relative_change:.3e} under truncation doubling"
        )));
    }
    Ok(out)
}

/// Families of ε-dependent tightness integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UniformProbe {
    /// `ε^{-2/H} μ(x, ε^{1/2H} u1, ε^{1/2H} u2)² (u1 u2)^{-2H} Θ_1(ε^{-1/2H} x, u1, u2)^{-d/p}`, `H > 3/4`.
    Supercritical,
    /// The same with `H = 3/4` and an extra factor `ε^{-2/3}/log(1/ε)` in place of `ε^{-2/H}`.
    CriticalLog,
}

/// Evaluates an ε-dependent tightness integral over `x ∈ [0, T]`, `u ∈ R₊²`.
///
/// After `x = ε^{1/2H} y` both families reduce to a prefactor times
/// `∫_{y ≤ T ε^{-1/2H}} Ψ(y, u1, u2)`.
pub fn uniform_probe(
    kind: UniformProbe,
    eps: f64,
    moment: f64,
    horizon: f64,
    cfg: &HurstConfig,
    spec: &QuadSpec,
) -> Result<QuadResult> {
    cfg.validate()?;
    spec.validate()?;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("eps must lie in (0, 1)"));
    }
    let h = cfg.hurst;
    let prefactor = match kind {
        UniformProbe::Supercritical => {
            if h <= 0.75 {
                return Err(SiltError::Regime { required: "H > 3/4".into(), actual: cfg.regime() });
            }
            eps.powf(2.0 - 1.5 / h)
        }
        UniformProbe::CriticalLog => {
            if cfg.regime() != Regime::Critical {
                return Err(SiltError::Regime { required: "Critical".into(), actual: cfg.regime() });
            }
            1.0 / (1.0 / eps).ln()
        }
    };
    let limit = match kind {
        UniformProbe::Supercritical => 4.0 * h * cfg.d() / 3.0,
        UniformProbe::CriticalLog => cfg.d(),
    };
    if !(moment > 0.0 && moment < limit) {
        return Err(invalid(format!("moment p = {moment} must lie in (0, {limit})")));
    }
    let y_max = horizon * eps.powf(-0.5 / h);
    let tr = spec.transform;
    let upper = tr.upper(spec.truncation_radius)?;
    let c = *cfg;
    let full = spec.tolerance();
    let tol = Tolerance { rel: full.rel, abs: full.abs / 3.0, max_evals: full.max_evals / 3 };
    let parts: Vec<QuadResult> = Region::ALL
        .par_iter()
        .map(|region| {
            let region = *region;
            match region {
                Region::S1 | Region::S2 => {
                    let f = |v: &[f64]| {
                        let (b, jb) = tr.map(v[1]);
                        let (cc, jc) = tr.map(v[2]);
                        tightness_integrand(&region.point(v[0], b, cc), &c, moment) * jb * jc
                    };
                    integrate_box(f, &[0.0; 3], &[y_max, upper, upper], &tol)
                }
                Region::S3 => {
                    // x = a + b ≤ y_max with b = (y_max - a) t.
                    let f = |v: &[f64]| {
                        let a = v[0];
                        let span = y_max - a;
                        let (cc, jc) = tr.map(v[2]);
                        tightness_integrand(&region.point(a, span * v[1], cc), &c, moment) * span * jc
                    };
                    integrate_box(f, &[0.0; 3], &[y_max, 1.0, upper], &tol)
                }
            }
        })
        .collect();
    let res = QuadResult::combine(&parts).recheck(&full).scale(prefactor);
    ensure_converged(res, "uniform_probe")
}
