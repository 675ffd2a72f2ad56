//! Approximate self-intersection local time `I_T^ε` and its exact moments.
//!
//! `I_T^ε = ∫_0^T ∫_0^t p_ε(B_t - B_s) ds dt` is discretised with the
//! trapezoid rule on the square `[0, T]²` halved by symmetry, so a constant
//! integrand is integrated exactly. One sweep over the grid yields the
//! estimate at every grid horizon.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::QuadSpec;
use crate::cubature::{integrate_1d, integrate_box, QuadResult, Tolerance};
use crate::error::{invalid, Result, SiltError};
use crate::fbm::{derive_seed, Backend, FbmGenerator, FbmPath, HurstConfig, Regime, TimeGrid};
use crate::kernels::{expected_heat_kernel, f_kernel_unchecked, product_moment, KernelPoint, Region};

/// Default minimum number of grid cells per correlation length `ε^{1/2H}`.
pub const DEFAULT_CELLS_PER_SCALE: f64 = 4.0;

/// Replicate count, seeding and discretisation of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub replicates: usize,
    pub base_seed: u64,
    pub eps_list: Vec<f64>,
    pub steps_per_unit: usize,
    #[serde(default)]
    pub backend: Backend,
    /// Required grid cells per correlation length `ε^{1/2H}`.
    #[serde(default = "default_cells")]
    pub cells_per_scale: f64,
}

fn default_cells() -> f64 {
    DEFAULT_CELLS_PER_SCALE
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(invalid("at least two replicates are required"));
        }
        if self.eps_list.is_empty() || self.eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(invalid("eps_list must contain positive values"));
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("eps_list must be strictly decreasing"));
        }
        if self.steps_per_unit == 0 {
            return Err(invalid("steps_per_unit must be positive"));
        }
        Ok(())
    }

    /// Grid spanning `[0, horizon]` at the configured resolution.
    pub fn grid(&self, horizon: f64) -> Result<TimeGrid> {
        let steps = (horizon * self.steps_per_unit as f64).round().max(1.0) as usize;
        TimeGrid::new(horizon, steps)
    }

    /// Rejects grids too coarse for the smallest ε.
    pub fn check_resolution(&self, grid: &TimeGrid, cfg: &HurstConfig) -> Result<()> {
        let eps = *self.eps_list.last().expect("validated");
        let cells = cells_per_scale(eps, grid, cfg);
        if cells + 1e-9 < self.cells_per_scale {
            return Err(invalid(format!(
                "grid step {} resolves ε^(1/2H) = {} with {cells:.2} cells, {} required",
                grid.dt(),
                eps.powf(0.5 / cfg.hurst),
                self.cells_per_scale
            )));
        }
        Ok(())
    }
}

/// Number of grid cells per correlation length `ε^{1/2H}`.
pub fn cells_per_scale(eps: f64, grid: &TimeGrid, cfg: &HurstConfig) -> f64 {
    eps.powf(0.5 / cfg.hurst) / grid.dt()
}

/// Monte Carlo sample of `I_T^ε` at several horizons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiltSample {
    pub eps: f64,
    pub horizons: Vec<f64>,
    /// `values[r][h]`: replicate `r`, horizon `h`.
    pub values: Vec<Vec<f64>>,
    pub base_seed: u64,
    pub grid: TimeGrid,
    pub cells_per_scale: f64,
}

/// Trapezoid weight of node `l` for an integral starting at node 0 (interior weight `dt`).
fn lead_weight(l: usize, dt: f64) -> f64 {
    if l == 0 {
        0.5 * dt
    } else {
        dt
    }
}

/// Evaluates `count` symmetric kernels `K(|B_k - B_l|², k - l)` over the
/// triangle `l ≤ k` and returns, per kernel, the trapezoid integral at every
/// grid horizon `t_0, …, t_n`.
pub fn triangle_profiles<K>(path: &FbmPath, count: usize, kernel: K) -> Vec<Vec<f64>>
where
    K: Fn(f64, usize, &mut [f64]),
{
    let n = path.grid.steps;
    let dt = path.grid.dt();
    let mut out = vec![vec![0.0; n + 1]; count];
    let mut row = vec![0.0; count];
    let mut vals = vec![0.0; count];
    let mut diag = vec![0.0; count];
    kernel(0.0, 0, &mut diag);
    // Node 0 enters every horizon t_m, m ≥ 1, through its diagonal term only.
    let w0 = 0.5 * dt;
    let mut prefix: Vec<f64> = diag.iter().map(|k0| 0.5 * w0 * w0 * k0).collect();
    for k in 1..=n {
        row.iter_mut().for_each(|r| *r = 0.0);
        let pk = path.point(k);
        for l in 0..k {
            let r2: f64 = pk.iter().zip(path.point(l)).map(|(a, b)| (a - b) * (a - b)).sum();
            kernel(r2, k - l, &mut vals);
            let w = lead_weight(l, dt);
            for (r, v) in row.iter_mut().zip(&vals) {
                *r += w * v;
            }
        }
        let end = 0.5 * dt;
        let inner = lead_weight(k, dt);
        for i in 0..count {
            out[i][k] = prefix[i] + end * (row[i] + 0.5 * end * diag[i]);
            prefix[i] += inner * (row[i] + 0.5 * inner * diag[i]);
        }
    }
    out
}

/// `I^ε_{t_m}` for every grid horizon `t_m`.
pub fn silt_profile(path: &FbmPath, eps: f64) -> Vec<f64> {
    silt_profiles(path, &[eps]).swap_remove(0)
}

/// `silt_profile` for several ε in one sweep.
pub fn silt_profiles(path: &FbmPath, eps_list: &[f64]) -> Vec<Vec<f64>> {
    let d = path.dim();
    let norms: Vec<f64> = eps_list.iter().map(|e| (2.0 * PI * e).powf(-0.5 * d as f64)).collect();
    triangle_profiles(path, eps_list.len(), |r2, _, out| {
        for ((o, e), c) in out.iter_mut().zip(eps_list).zip(&norms) {
            *o = c * (-0.5 * r2 / e).exp();
        }
    })
}

/// Trapezoid estimate of `I_T^ε` on the path grid.
pub fn silt_estimate(path: &FbmPath, eps: f64, horizon: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    let m = path.grid.index_of(horizon)?;
    Ok(silt_profile(path, eps)[m])
}

/// `E[I_T^ε] = (2π)^{-d/2} ∫_0^T (T - u)(ε + u^{2H})^{-d/2} du`.
pub fn expected_silt(eps: f64, horizon: f64, cfg: &HurstConfig) -> f64 {
    if horizon <= 0.0 {
        return 0.0;
    }
    let tol = Tolerance { rel: 1e-12, abs: 1e-300, max_evals: 200_000 };
    let f = |u: f64| (horizon - u) * expected_heat_kernel(eps, u, cfg);
    let scale = eps.powf(0.5 / cfg.hurst).min(horizon);
    integrate_1d(f, 0.0, scale, &tol).value + integrate_1d(f, scale, horizon, &tol).value
}

/// Exact mean of the trapezoid estimator at every grid horizon.
pub fn expected_silt_discrete(grid: &TimeGrid, eps: f64, cfg: &HurstConfig) -> Vec<f64> {
    let dt = grid.dt();
    let lag_mean: Vec<f64> = (0..=grid.steps).map(|k| expected_heat_kernel(eps, k as f64 * dt, cfg)).collect();
    lag_profile(grid, &lag_mean)
}

/// Trapezoid integral over the triangle of a kernel depending only on the lag.
pub(crate) fn lag_profile(grid: &TimeGrid, lag_value: &[f64]) -> Vec<f64> {
    let n = grid.steps;
    let dt = grid.dt();
    let diag = lag_value[0];
    let mut cumulative = vec![0.0; n + 1];
    for lag in 1..=n {
        cumulative[lag] = cumulative[lag - 1] + lag_value[lag];
    }
    let w0 = 0.5 * dt;
    let mut out = vec![0.0; n + 1];
    let mut prefix = 0.5 * w0 * w0 * diag;
    for k in 1..=n {
        let row = dt * (cumulative[k - 1] + 0.5 * lag_value[k]);
        out[k] = prefix + w0 * (row + 0.5 * w0 * diag);
        prefix += dt * (row + 0.5 * dt * diag);
    }
    out
}

/// Integrates `weight(x, u1, u2) · kernel(x, u1, u2)` over the sector boxes
/// covering `{u1 ≤ a_max, x + u2 ≤ b_max}`.
pub(crate) fn pair_integral<K>(kernel: K, a_max: f64, b_max: f64, spec: &QuadSpec) -> QuadResult
where
    K: Fn(&KernelPoint) -> f64 + Sync,
{
    let full = spec.tolerance();
    let tol = Tolerance { rel: full.rel, abs: full.abs / 3.0, max_evals: full.max_evals / 3 };
    let parts: Vec<QuadResult> = Region::ALL
        .par_iter()
        .map(|region| {
            let upper = match region {
                Region::S1 => [a_max, a_max, b_max],
                Region::S2 => [a_max, a_max, a_max],
                Region::S3 => [a_max, b_max, b_max],
            };
            let f = |v: &[f64]| {
                let p = region.point(v[0], v[1], v[2]);
                let w = (a_max - p.u1).min(b_max - p.x - p.u2);
                if w <= 0.0 {
                    0.0
                } else {
                    w * kernel(&p)
                }
            };
            integrate_box(f, &[0.0; 3], &upper, &tol)
        })
        .collect();
    QuadResult::combine(&parts).recheck(&full)
}

fn check_horizons(eps: f64, t1: f64, t2: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(invalid("eps must be positive"));
    }
    if !(t1 >= 0.0 && t2 >= 0.0 && t1.is_finite() && t2.is_finite()) {
        return Err(invalid("horizons must be finite and non-negative"));
    }
    Ok(())
}

/// Symmetrised pair integral `J(T1, T2) + J(T2, T1)`.
pub(crate) fn symmetric_pair_integral<K>(kernel: K, t1: f64, t2: f64, spec: &QuadSpec) -> QuadResult
where
    K: Fn(&KernelPoint) -> f64 + Sync,
{
    if t1 == 0.0 || t2 == 0.0 {
        return QuadResult::zero();
    }
    if t1 == t2 {
        return pair_integral(&kernel, t1, t2, spec).scale(2.0);
    }
    let a = pair_integral(&kernel, t1, t2, spec);
    let b = pair_integral(&kernel, t2, t1, spec);
    QuadResult::combine(&[a, b]).recheck(&spec.tolerance())
}

/// `Cov[I_{T1}^ε, I_{T2}^ε]` by cubature of `F_ε` over pairs of increments.
pub fn silt_covariance(eps: f64, t1: f64, t2: f64, cfg: &HurstConfig, spec: &QuadSpec) -> Result<QuadResult> {
    check_horizons(eps, t1, t2)?;
    spec.validate()?;
    let c = *cfg;
    let res = symmetric_pair_integral(|p| f_kernel_unchecked(eps, p, &c), t1, t2, spec);
    if !res.converged {
        return Err(SiltError::NonConvergence(format!("silt_covariance: {res:?}")));
    }
    Ok(res)
}

/// `E[I_{T1}^ε I_{T2}^ε]` by cubature of `(2π)^{-d} Θ_ε^{-d/2}`.
pub fn silt_second_moment(eps: f64, t1: f64, t2: f64, cfg: &HurstConfig, spec: &QuadSpec) -> Result<QuadResult> {
    check_horizons(eps, t1, t2)?;
    spec.validate()?;
    let c = *cfg;
    let res = symmetric_pair_integral(|p| product_moment(eps, p, &c), t1, t2, spec);
    if !res.converged {
        return Err(SiltError::NonConvergence(format!("silt_second_moment: {res:?}")));
    }
    Ok(res)
}

/// Normalisation of `I_T^ε - E[I_T^ε]` in the regime of `cfg`.
pub fn rescale_factor(eps: f64, cfg: &HurstConfig) -> Result<f64> {
    let d = cfg.d();
    let h = cfg.hurst;
    match cfg.regime() {
        Regime::Subcritical => Ok(eps.powf(0.5 * d - 0.75 / h)),
        Regime::Supercritical => Ok(eps.powf(0.5 * d - 1.5 / h + 1.0)),
        Regime::Critical => Ok(eps.powf(0.5 * d - 1.0) / (1.0 / eps).ln().sqrt()),
        other => Err(SiltError::Regime { required: "Subcritical, Critical or Supercritical".into(), actual: other }),
    }
}

/// Centres `values` at `E[I_T^ε]` and applies the regime normalisation.
pub fn rescale(values: &[f64], eps: f64, cfg: &HurstConfig, horizon: f64) -> Result<Vec<f64>> {
    let factor = rescale_factor(eps, cfg)?;
    let mean = expected_silt(eps, horizon, cfg);
    Ok(values.iter().map(|v| factor * (v - mean)).collect())
}

/// Maps `f` over replicates in parallel; output order is replicate order.
pub fn replicate_map<T, F>(gen: &FbmGenerator, replicates: usize, base_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &FbmPath) -> T + Sync + Send,
{
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let path = gen.sample(derive_seed(base_seed, r as u64));
            f(r, &path)
        })
        .collect()
}

/// Samples `I_T^ε` for every ε in the configuration at the given horizons.
pub fn sample_silt(cfg: &HurstConfig, mc: &MonteCarloConfig, horizons: &[f64]) -> Result<Vec<SiltSample>> {
    cfg.validate()?;
    mc.validate()?;
    let t_max = horizons.iter().cloned().fold(f64::NAN, f64::max);
    if !(t_max > 0.0) {
        return Err(invalid("at least one positive horizon is required"));
    }
    let grid = mc.grid(t_max)?;
    mc.check_resolution(&grid, cfg)?;
    let idx: Vec<usize> = horizons.iter().map(|t| grid.index_of(*t)).collect::<Result<_>>()?;
    let gen = FbmGenerator::new(grid, *cfg, mc.backend)?;
    let per_rep = replicate_map(&gen, mc.replicates, mc.base_seed, |_, path| {
        silt_profiles(path, &mc.eps_list)
            .into_iter()
            .map(|profile| idx.iter().map(|&m| profile[m]).collect::<Vec<f64>>())
            .collect::<Vec<_>>()
    });
    Ok(mc
        .eps_list
        .iter()
        .enumerate()
        .map(|(e, &eps)| SiltSample {
            eps,
            horizons: horizons.to_vec(),
            values: per_rep.iter().map(|rep| rep[e].clone()).collect(),
            base_seed: mc.base_seed,
            grid,
            cells_per_scale: cells_per_scale(eps, &grid, cfg),
        })
        .collect())
}
