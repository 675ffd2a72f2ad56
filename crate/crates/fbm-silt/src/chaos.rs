//! Second-chaos functionals of fBm: the projection `J₂` of `I_T^ε`, the
//! Hermite-process approximant, and the critical-case functionals `J̃` and
//! `R_{T,M}`.
//!
//! All u-integrals run over grid lags of the simulated path, so no
//! interpolation is involved.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::QuadSpec;
use crate::cubature::QuadResult;
use crate::error::{invalid, Result, SiltError};
use crate::fbm::{mu, FbmPath, HurstConfig, Regime, TimeGrid};
use crate::kernels::g_kernel;
use crate::silt::{symmetric_pair_integral, triangle_profiles};

/// Replicate values of one second-chaos functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosSample {
    pub eps: f64,
    pub horizon: f64,
    pub config: HurstConfig,
    pub values: Vec<f64>,
}

/// Probabilists' Hermite polynomial `H_q(x)`.
pub fn hermite(q: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if q == 0 {
        return prev;
    }
    for k in 1..q {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `(2π)^{-d/2} / 2`.
fn chaos_prefactor(dim: usize) -> f64 {
    0.5 * (2.0 * PI).powf(-0.5 * dim as f64)
}

/// Per-lag coefficients `-c (ε + u^{2H})^{-d/2-1}` and `d u^{2H}` on the path grid.
fn j2_lag_tables(grid: &TimeGrid, cfg: &HurstConfig, eps_list: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let d = cfg.d();
    let c = chaos_prefactor(cfg.dim);
    let dt = grid.dt();
    let var: Vec<f64> = (0..=grid.steps).map(|k| (k as f64 * dt).powf(cfg.two_h())).collect();
    let coef = eps_list
        .iter()
        .map(|eps| var.iter().map(|v| -c * (eps + v).powf(-0.5 * d - 1.0)).collect())
        .collect();
    (coef, var.iter().map(|v| d * v).collect())
}

/// `J₂` at every grid horizon for each ε.
pub fn second_chaos_profiles(path: &FbmPath, eps_list: &[f64]) -> Vec<Vec<f64>> {
    let (coef, centre) = j2_lag_tables(&path.grid, &path.config, eps_list);
    triangle_profiles(path, eps_list.len(), |r2, lag, out| {
        for (o, row) in out.iter_mut().zip(&coef) {
            *o = row[lag] * (r2 - centre[lag]);
        }
    })
}

/// Second-chaos projection `J₂(I_T^ε)` of the trapezoid estimator.
pub fn second_chaos_j2(path: &FbmPath, eps: f64, horizon: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    let m = path.grid.index_of(horizon)?;
    Ok(second_chaos_profiles(path, &[eps]).swap_remove(0)[m])
}

/// `I^ε` and `J₂` profiles for several ε from one sweep: `(silt, chaos)`.
pub fn silt_and_chaos_profiles(path: &FbmPath, eps_list: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = path.config.d();
    let k = eps_list.len();
    let norms: Vec<f64> = eps_list.iter().map(|e| (2.0 * PI * e).powf(-0.5 * d)).collect();
    let (coef, centre) = j2_lag_tables(&path.grid, &path.config, eps_list);
    let mut all = triangle_profiles(path, 2 * k, |r2, lag, out| {
        for e in 0..k {
            out[e] = norms[e] * (-0.5 * r2 / eps_list[e]).exp();
            out[k + e] = coef[e][lag] * (r2 - centre[lag]);
        }
    });
    let chaos = all.split_off(k);
    (all, chaos)
}

/// `E[J₂(T1) J₂(T2)] = d (2π)^{-d}/2 ∫∫ G^{(1)}` by cubature.
pub fn j2_covariance(eps: f64, t1: f64, t2: f64, cfg: &HurstConfig, spec: &QuadSpec) -> Result<QuadResult> {
    if !(eps > 0.0) || !(t1 >= 0.0 && t2 >= 0.0) {
        return Err(invalid("eps must be positive and horizons non-negative"));
    }
    spec.validate()?;
    let c = *cfg;
    let factor = 0.5 * cfg.d() * (2.0 * PI).powf(-cfg.d());
    let res = symmetric_pair_integral(|p| g_kernel(1, eps, p, &c), t1, t2, spec).scale(factor);
    if !res.converged {
        return Err(SiltError::NonConvergence(format!("j2_covariance: {res:?}")));
    }
    Ok(res)
}

/// Number of grid steps spanned by `lag`, which must be a positive multiple of the step.
fn exact_lag_steps(grid: &TimeGrid, lag: f64, what: &str) -> Result<usize> {
    let steps = lag / grid.dt();
    let rounded = steps.round();
    if rounded < 1.0 || (steps - rounded).abs() > 1e-9 * steps.max(1.0) {
        return Err(invalid(format!("{what} = {lag} is not a positive multiple of the grid step {}", grid.dt())));
    }
    Ok(rounded as usize)
}

fn check_reach(grid: &TimeGrid, horizon: f64, lag_steps: usize) -> Result<usize> {
    let m = grid.index_of(horizon)?;
    if m + lag_steps > grid.steps {
        return Err(SiltError::OffGrid { time: grid.time(m) + lag_steps as f64 * grid.dt(), dt: grid.dt(), horizon: grid.horizon });
    }
    Ok(m)
}

/// Trapezoid weights on nodes `0..=m` with step `dt`.
fn trapezoid(m: usize, dt: f64) -> impl Iterator<Item = (usize, f64)> {
    (0..=m).map(move |k| (k, if k == 0 || k == m { 0.5 * dt } else { dt }))
}

/// `ε^{2H-2} ∫_0^T H₂((B^{(j)}_{s+ε} - B^{(j)}_s)/ε^H) ds`.
pub fn hermite_process_approx(path: &FbmPath, eps: f64, horizon: f64, component: usize) -> Result<f64> {
    let cfg = path.config;
    if cfg.hurst <= 0.75 {
        return Err(SiltError::Regime { required: "H > 3/4".into(), actual: cfg.regime() });
    }
    if component >= cfg.dim {
        return Err(invalid(format!("component {component} out of range for d = {}", cfg.dim)));
    }
    let grid = path.grid;
    let lag = exact_lag_steps(&grid, eps, "eps")?;
    if lag < 4 {
        return Err(invalid("hermite_process_approx needs a grid step <= eps/4"));
    }
    let m = check_reach(&grid, horizon, lag)?;
    if m == 0 {
        return Ok(0.0);
    }
    let scale = eps.powf(-cfg.hurst);
    let sum: f64 = trapezoid(m, grid.dt())
        .map(|(k, w)| w * hermite(2, scale * (path.value(k + lag, component) - path.value(k, component))))
        .sum();
    Ok(eps.powf(cfg.two_h() - 2.0) * sum)
}

/// Exact `E[(ε^{2H-2} ∫_0^T H₂(…) ds)²] = 4 ε^{4H-3} ∫_0^{T/ε} (T - εv) μ(v,1,1)² dv`.
pub fn hermite_approx_second_moment(eps: f64, horizon: f64, hurst: f64) -> f64 {
    use crate::cubature::{integrate_1d, Tolerance};
    if horizon <= 0.0 {
        return 0.0;
    }
    let tol = Tolerance { rel: 1e-11, abs: 1e-300, max_evals: 500_000 };
    let upper = horizon / eps;
    let f = |v: f64| {
        let m = mu(v, 1.0, 1.0, hurst);
        (horizon - eps * v) * m * m
    };
    let knee = upper.min(2.0);
    let integral = integrate_1d(f, 0.0, knee, &tol).value + integrate_1d(f, knee, upper, &tol).value;
    4.0 * eps.powf(4.0 * hurst - 3.0) * integral
}

/// Exact second moment of the trapezoid version of [`hermite_process_approx`] on `grid`.
pub fn hermite_approx_second_moment_discrete(grid: &TimeGrid, eps: f64, horizon: f64, hurst: f64) -> Result<f64> {
    exact_lag_steps(grid, eps, "eps")?;
    let m = grid.index_of(horizon)?;
    if m == 0 {
        return Ok(0.0);
    }
    let dt = grid.dt();
    let corr = |lag: usize| mu(lag as f64 * dt / eps, 1.0, 1.0, hurst);
    // Σ_k w_k w_{k+lag} for the trapezoid weights on 0..=m.
    let pair_weight = |lag: usize| -> f64 {
        if lag == 0 {
            dt * dt * (m as f64 - 0.5)
        } else if lag < m {
            2.0 * dt * dt * (m - lag) as f64
        } else {
            2.0 * 0.25 * dt * dt
        }
    };
    let sum: f64 = (0..=m).map(|lag| pair_weight(lag) * 2.0 * corr(lag).powi(2)).sum();
    Ok(eps.powf(4.0 * hurst - 4.0) * sum)
}

/// Covariance `c_H (S^{4H-2} + T^{4H-2} - |T - S|^{4H-2})` of the limiting
/// second-order Hermite process, so that `E[X_T²] = 2 c_H T^{4H-2}`.
pub fn hermite_limit_covariance(s: f64, t: f64, hurst: f64) -> Result<f64> {
    let c_h = crate::constants::c_h_const(hurst)?;
    let a = 4.0 * hurst - 2.0;
    Ok(c_h * (s.powf(a) + t.powf(a) - (t - s).abs().powf(a)))
}

fn require_critical(cfg: &HurstConfig) -> Result<()> {
    cfg.require(Regime::Critical)
}

/// `(1 + u^{3/2})^{-d/2-1}`-weighted u-kernel shared by `J̃` and `R_{T,M}`.
fn critical_weight(v: f64, dim: usize) -> f64 {
    v.powf(1.5) * (1.0 + v.powf(1.5)).powf(-0.5 * dim as f64 - 1.0)
}

/// Discretised `J̃_T^ε` with the scaled lag truncated at `u_max` (default `ε^{-2/3} T`).
pub fn j_tilde(path: &FbmPath, eps: f64, horizon: f64, u_max: Option<f64>) -> Result<f64> {
    let cfg = path.config;
    require_critical(&cfg)?;
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    let scale = eps.powf(2.0 / 3.0);
    let u_max = u_max.unwrap_or(horizon / scale);
    if !(u_max > 0.0) {
        return Err(invalid("u_max must be positive"));
    }
    let grid = path.grid;
    let dt = grid.dt();
    let lags = (scale * u_max / dt).round() as usize;
    let m = check_reach(&grid, horizon, lags)?;
    if m == 0 || lags == 0 {
        return Ok(0.0);
    }
    let d = cfg.d();
    let c = chaos_prefactor(cfg.dim);
    // In the unscaled lag u: -c (ε + u^{3/2})^{-d/2-1} (|ΔB|² - d u^{3/2}).
    let table: Vec<(f64, f64)> = trapezoid(lags, dt)
        .map(|(l, w)| {
            let v = (l as f64 * dt).powf(1.5);
            (w * -c * (eps + v).powf(-0.5 * d - 1.0), d * v)
        })
        .collect();
    let mut total = 0.0;
    for (k, ws) in trapezoid(m, dt) {
        let inner: f64 = table
            .iter()
            .enumerate()
            .skip(1)
            .map(|(l, (coef, centre))| coef * (path.sq_distance(k + l, k) - centre))
            .sum();
        total += ws * inner;
    }
    Ok(total)
}

/// Riemann-sum functional `R_{T,M}^ε` over `u(k) = k/2^M`, `k = 2..M·2^M`.
///
/// Each lag `ε^{2/3} u(k)` is snapped to the nearest grid lag; the Hermite
/// argument is normalised by the snapped lag so every term stays centred.
pub fn riemann_log_chaos(path: &FbmPath, eps: f64, horizon: f64, resolution: u32) -> Result<f64> {
    let cfg = path.config;
    require_critical(&cfg)?;
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    if resolution == 0 || resolution > crate::constants::RHO_TILDE_MAX_RESOLUTION {
        return Err(invalid(format!("resolution must be in 1..={}", crate::constants::RHO_TILDE_MAX_RESOLUTION)));
    }
    let grid = path.grid;
    let dt = grid.dt();
    let scale = eps.powf(2.0 / 3.0);
    let cells = 1u64 << resolution;
    let last = resolution as u64 * cells;
    let max_lag = ((scale * last as f64 / cells as f64) / dt).round().max(1.0) as usize;
    let m = check_reach(&grid, horizon, max_lag)?;
    let mut by_lag: BTreeMap<usize, f64> = BTreeMap::new();
    for k in 2..=last {
        let u = k as f64 / cells as f64;
        let lag = ((scale * u) / dt).round().max(1.0) as usize;
        *by_lag.entry(lag).or_insert(0.0) += critical_weight(u, cfg.dim);
    }
    let d = cfg.dim;
    let mut total = 0.0;
    for (lag, weight) in by_lag {
        let inv_sd = (lag as f64 * dt).powf(-0.75);
        let mut integral = 0.0;
        for (k, ws) in trapezoid(m, dt) {
            let h: f64 = (0..d).map(|j| hermite(2, inv_sd * (path.value(k + lag, j) - path.value(k, j)))).sum();
            integral += ws * h;
        }
        total += weight * integral;
    }
    let c = chaos_prefactor(cfg.dim);
    Ok(-c * eps.powf(2.0 / 3.0 - 0.5 * cfg.d()) / cells as f64 * total)
}
