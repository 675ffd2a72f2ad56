//! Monte Carlo experiments for the three limit regimes and the tightness proxy.
//!
//! Each experiment samples `I_T^ε` (and `J₂` where needed) on one grid for
//! every ε of the ladder, compares rescaled statistics against quadrature
//! targets, and records one [`Criterion`] per check. Acceptance criteria
//! decide [`ExperimentResult::passed`]; diagnostics are informational.

use serde::{Deserialize, Serialize};

use crate::chaos::{hermite_approx_second_moment, hermite_process_approx, j2_covariance, silt_and_chaos_profiles};
use crate::constants::{c_h_const, integrability_probe, lambda_const, rho_const, sigma_squared, ProbeDomain, QuadSpec};
use crate::error::{invalid, Result, SiltError};
use crate::fbm::{FbmGenerator, HurstConfig, Regime, TimeGrid};
use crate::kernels::Region;
use crate::silt::{expected_silt_discrete, replicate_map, rescale_factor, silt_covariance, silt_profiles, MonteCarloConfig};
use crate::stats::{correlation, covariance_matrix, fit_line, second_moment_with_se, StatReport};

/// Whether a criterion gates the experiment outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionKind {
    Acceptance,
    Diagnostic,
}

/// One checked statement with its observed and target values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub kind: CriterionKind,
    pub observed: f64,
    pub target: f64,
    pub tolerance: f64,
    pub rule: String,
    pub passed: bool,
}

impl Criterion {
    fn new(name: &str, kind: CriterionKind, observed: f64, target: f64, tolerance: f64, rule: &str, passed: bool) -> Self {
        Self { name: name.into(), kind, observed, target, tolerance, rule: rule.into(), passed }
    }

    /// `|observed / target - 1| ≤ tolerance`.
    fn relative(name: &str, kind: CriterionKind, observed: f64, target: f64, tolerance: f64) -> Self {
        let passed = ((observed / target) - 1.0).abs() <= tolerance;
        Self::new(name, kind, observed, target, tolerance, "relative deviation", passed)
    }

    /// `|observed| < tolerance`.
    fn below(name: &str, kind: CriterionKind, observed: f64, tolerance: f64) -> Self {
        Self::new(name, kind, observed, 0.0, tolerance, "absolute value below tolerance", observed.abs() < tolerance)
    }
}

/// Target value with the constant it comes from and how it was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    pub value: f64,
    pub error_estimate: f64,
    pub method: String,
}

/// Statistics of the rescaled samples at one ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsReport {
    pub eps: f64,
    pub horizons: Vec<f64>,
    pub stats: Vec<StatReport>,
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub config: HurstConfig,
    pub monte_carlo: MonteCarloConfig,
    pub quadrature: QuadSpec,
    pub horizons: Vec<f64>,
    pub grid: TimeGrid,
    pub targets: Vec<Target>,
    pub reports: Vec<EpsReport>,
    pub criteria: Vec<Criterion>,
}

impl ExperimentResult {
    /// True iff every acceptance criterion holds.
    pub fn passed(&self) -> bool {
        self.criteria.iter().filter(|c| c.kind == CriterionKind::Acceptance).all(|c| c.passed)
    }

    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }
}

/// Replicate × horizon samples per ε, centred at the exact discrete mean.
struct CenteredSamples {
    grid: TimeGrid,
    /// `silt[e][r][h]`
    silt: Vec<Vec<Vec<f64>>>,
    /// `chaos[e][r][h]`, present when requested.
    chaos: Option<Vec<Vec<Vec<f64>>>>,
}

fn sample_centered(cfg: &HurstConfig, mc: &MonteCarloConfig, horizons: &[f64], with_chaos: bool) -> Result<CenteredSamples> {
    mc.validate()?;
    if horizons.is_empty() || horizons.iter().any(|t| !(*t > 0.0)) {
        return Err(invalid("horizons must be positive"));
    }
    let t_max = horizons.iter().cloned().fold(0.0, f64::max);
    let grid = mc.grid(t_max)?;
    mc.check_resolution(&grid, cfg)?;
    let idx: Vec<usize> = horizons.iter().map(|t| grid.index_of(*t)).collect::<Result<_>>()?;
    let means: Vec<Vec<f64>> = mc.eps_list.iter().map(|e| expected_silt_discrete(&grid, *e, cfg)).collect();
    let gen = FbmGenerator::new(grid, *cfg, mc.backend)?;
    let per_rep = replicate_map(&gen, mc.replicates, mc.base_seed, |_, path| {
        let pick = |profiles: Vec<Vec<f64>>, centre: bool| -> Vec<Vec<f64>> {
            profiles
                .into_iter()
                .enumerate()
                .map(|(e, p)| idx.iter().map(|&m| p[m] - if centre { means[e][m] } else { 0.0 }).collect())
                .collect()
        };
        if with_chaos {
            let (silt, chaos) = silt_and_chaos_profiles(path, &mc.eps_list);
            (pick(silt, true), Some(pick(chaos, false)))
        } else {
            (pick(silt_profiles(path, &mc.eps_list), true), None)
        }
    });
    let n_eps = mc.eps_list.len();
    let regroup = |select: &dyn Fn(&(Vec<Vec<f64>>, Option<Vec<Vec<f64>>>)) -> Vec<Vec<f64>>| -> Vec<Vec<Vec<f64>>> {
        let rows: Vec<Vec<Vec<f64>>> = per_rep.iter().map(select).collect();
        (0..n_eps).map(|e| rows.iter().map(|r| r[e].clone()).collect()).collect()
    };
    let silt = regroup(&|r| r.0.clone());
    let chaos = if with_chaos { Some(regroup(&|r| r.1.clone().expect("chaos requested"))) } else { None };
    Ok(CenteredSamples { grid, silt, chaos })
}

fn scaled(rows: &[Vec<f64>], factor: f64) -> Vec<Vec<f64>> {
    rows.iter().map(|r| r.iter().map(|v| factor * v).collect()).collect()
}

fn column(rows: &[Vec<f64>], h: usize) -> Vec<f64> {
    rows.iter().map(|r| r[h]).collect()
}

fn eps_report(eps: f64, horizons: &[f64], rows: &[Vec<f64>]) -> Result<EpsReport> {
    let stats = (0..horizons.len()).map(|h| StatReport::from_sample(&column(rows, h))).collect::<Result<_>>()?;
    Ok(EpsReport { eps, horizons: horizons.to_vec(), stats, covariance: covariance_matrix(rows)? })
}

/// Diagnostic comparing a Monte Carlo variance with the exact finite-ε value.
fn finite_eps_check(name: &str, stats: &StatReport, exact: f64) -> Criterion {
    let tol = 4.0 * stats.se_variance;
    Criterion::new(name, CriterionKind::Diagnostic, stats.variance, exact, tol, "within 4 SE", (stats.variance - exact).abs() <= tol)
}

/// `|x_i - 1|` strictly decreasing along the ladder.
fn strictly_toward_one(ratios: &[f64]) -> bool {
    ratios.len() >= 3 && ratios.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs())
}

fn strictly_decreasing(values: &[f64]) -> bool {
    values.len() >= 3 && values.windows(2).all(|w| w[1] < w[0])
}

fn index_of_max(values: &[f64]) -> usize {
    values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0)
}

fn index_of_min(values: &[f64]) -> usize {
    values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0)
}

/// Brownian limit `σ W_T` for `3/(2d) < H < 3/4`.
pub fn run_subcritical(cfg: &HurstConfig, mc: &MonteCarloConfig, horizons: &[f64], spec: &QuadSpec) -> Result<ExperimentResult> {
    use CriterionKind::*;
    cfg.require(Regime::Subcritical)?;
    let sigma2 = sigma_squared(cfg, spec)?;
    let samples = sample_centered(cfg, mc, horizons, false)?;
    let mut reports = Vec::new();
    let mut criteria = Vec::new();
    let t_hi = index_of_max(horizons);
    let t_lo = index_of_min(horizons);
    for (e, &eps) in mc.eps_list.iter().enumerate() {
        let rows = scaled(&samples.silt[e], rescale_factor(eps, cfg)?);
        let report = eps_report(eps, horizons, &rows)?;
        let factor = rescale_factor(eps, cfg)?;
        let exact = silt_covariance(eps, horizons[t_hi], horizons[t_hi], cfg, spec)?.value * factor * factor;
        criteria.push(finite_eps_check(&format!("variance vs finite-eps quadrature eps={eps}"), &report.stats[t_hi], exact));
        criteria.push(Criterion::relative(
            &format!("variance ratio eps={eps}"),
            Diagnostic,
            report.stats[t_hi].variance,
            sigma2.value * horizons[t_hi],
            0.15,
        ));
        reports.push(report);
    }
    let last = reports.last().expect("non-empty ladder");
    let rows = scaled(samples.silt.last().expect("non-empty"), rescale_factor(last.eps, cfg)?);
    criteria.push(Criterion::relative("variance", Acceptance, last.stats[t_hi].variance, sigma2.value * horizons[t_hi], 0.15));
    if t_lo != t_hi {
        criteria.push(Criterion::relative(
            "covariance",
            Acceptance,
            last.covariance[t_lo][t_hi],
            sigma2.value * horizons[t_lo],
            0.20,
        ));
        let early = column(&rows, t_lo);
        let late: Vec<f64> = rows.iter().map(|r| r[t_hi] - r[t_lo]).collect();
        let corr = correlation(&early, &late)?;
        criteria.push(Criterion::below("increment correlation", Diagnostic, corr, 4.0 / (rows.len() as f64).sqrt()));
    }
    let s = &last.stats[t_hi];
    criteria.push(Criterion::below("skewness z", Acceptance, s.skewness_z(), 4.0));
    criteria.push(Criterion::below("excess kurtosis z", Acceptance, s.kurtosis_z(), 4.0));
    criteria.push(Criterion::new("normality p", Diagnostic, s.normality_p, 0.01, 0.01, "p-value above 0.01", s.normality_p > 0.01));
    Ok(ExperimentResult {
        experiment: "subcritical".into(),
        config: *cfg,
        monte_carlo: mc.clone(),
        quadrature: *spec,
        horizons: horizons.to_vec(),
        grid: samples.grid,
        targets: vec![Target {
            name: "sigma^2".into(),
            value: sigma2.value,
            error_estimate: sigma2.error_estimate,
            method: "adaptive cubature of F_1 over the three sectors".into(),
        }],
        reports,
        criteria,
    })
}

/// Settings of the Hermite-approximant sub-run of [`run_supercritical`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HermiteRun {
    pub eps: f64,
    pub replicates: usize,
    pub horizon: f64,
    /// Grid cells per ε.
    pub cells_per_eps: usize,
    pub base_seed: u64,
}

impl Default for HermiteRun {
    fn default() -> Self {
        Self { eps: 1e-5, replicates: 4000, horizon: 1.0, cells_per_eps: 4, base_seed: 0x5eed_4e12 }
    }
}

/// Second moment of the Hermite approximant over independent one-dimensional paths.
pub fn hermite_second_moment_mc(hurst: f64, run: &HermiteRun) -> Result<(f64, f64)> {
    if run.replicates < 2 || run.cells_per_eps < 4 {
        return Err(invalid("Hermite run needs >= 2 replicates and >= 4 cells per eps"));
    }
    let cfg = HurstConfig::new(hurst, 1)?;
    let dt = run.eps / run.cells_per_eps as f64;
    let steps = ((run.horizon + run.eps) / dt).round() as usize;
    let grid = TimeGrid::new(steps as f64 * dt, steps)?;
    let gen = FbmGenerator::new(grid, cfg, crate::fbm::Backend::Circulant)?;
    let horizon = grid.time(steps - run.cells_per_eps);
    let values = replicate_map(&gen, run.replicates, run.base_seed, |_, path| hermite_process_approx(path, run.eps, horizon, 0))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    Ok(second_moment_with_se(&values))
}

/// ε at which the rescaled `J₂` variance is evaluated by quadrature to pick the limit constant.
pub const DEEP_EPS: f64 = 1e-24;

/// Hermite-process limit `-Λ Σ_j X_T^j` for `H > 3/4`.
pub fn run_supercritical(
    cfg: &HurstConfig,
    mc: &MonteCarloConfig,
    horizons: &[f64],
    spec: &QuadSpec,
    hermite: Option<&HermiteRun>,
) -> Result<ExperimentResult> {
    use CriterionKind::*;
    cfg.require(Regime::Supercritical)?;
    let lambda = lambda_const(cfg, spec)?;
    let c_h = c_h_const(cfg.hurst)?;
    let samples = sample_centered(cfg, mc, horizons, true)?;
    let chaos = samples.chaos.as_ref().expect("chaos sampled");
    let t_hi = index_of_max(horizons);
    let t_lo = index_of_min(horizons);
    let d = cfg.d();
    let growth = 4.0 * cfg.hurst - 2.0;
    let (lam, lam_err) = (lambda.value, lambda.error_estimate);
    let derived = 2.0 * d * lam * lam * c_h * horizons[t_hi].powf(growth);
    let displayed = d * (2.0 * std::f64::consts::PI).powf(-d) * lam * lam * c_h * horizons[t_hi].powf(growth) / 2.0;
    let mut reports = Vec::new();
    let mut criteria = Vec::new();
    let mut residuals = Vec::new();
    let mut j2_report = None;
    for (e, &eps) in mc.eps_list.iter().enumerate() {
        let factor = rescale_factor(eps, cfg)?;
        let silt = scaled(&samples.silt[e], factor);
        let j2 = scaled(&chaos[e], factor);
        let residual: Vec<f64> = silt.iter().zip(&j2).map(|(s, j)| s[t_hi] - j[t_hi]).collect();
        let norm = (residual.iter().map(|r| r * r).sum::<f64>() / residual.len() as f64).sqrt();
        residuals.push(norm);
        let t = horizons[t_hi];
        let var_i = silt_covariance(eps, t, t, cfg, spec)?.value;
        let var_j2 = j2_covariance(eps, t, t, cfg, spec)?.value;
        let exact_residual = factor * (var_i - var_j2).max(0.0).sqrt();
        criteria.push(Criterion::new(
            &format!("residual norm eps={eps}"),
            Diagnostic,
            norm,
            exact_residual,
            0.15,
            "relative deviation from the continuous-time residual",
            (norm / exact_residual - 1.0).abs() <= 0.15,
        ));
        let report = eps_report(eps, horizons, &j2)?;
        criteria.push(finite_eps_check(&format!("J2 variance vs finite-eps quadrature eps={eps}"), &report.stats[t_hi], var_j2 * factor * factor));
        reports.push(eps_report(eps, horizons, &silt)?);
        j2_report = Some(report);
    }
    criteria.push(Criterion::new(
        "residual decay",
        Acceptance,
        *residuals.last().expect("non-empty"),
        0.0,
        0.0,
        "rescaled residual strictly decreasing along the ladder",
        strictly_decreasing(&residuals),
    ));
    let j2 = j2_report.expect("non-empty ladder");
    if t_lo != t_hi {
        let ratio = j2.stats[t_hi].variance / j2.stats[t_lo].variance;
        let target = (horizons[t_hi] / horizons[t_lo]).powf(growth);
        criteria.push(Criterion::relative("J2 horizon scaling", Acceptance, ratio, target, 0.15));
    }
    let j2_var = j2.stats[t_hi].variance;
    criteria.push(Criterion::relative("J2 variance vs 2d Lambda^2 c_H T^(4H-2)", Diagnostic, j2_var, derived, 0.15));
    criteria.push(Criterion::relative("J2 variance vs displayed constant", Diagnostic, j2_var, displayed, 0.15));
    // The ladder is far from the limit, so the candidates are compared at a deep ε by quadrature.
    let deep_spec = spec.with_max_evals(spec.max_evals.max(100_000_000));
    let deep = j2_covariance(DEEP_EPS, horizons[t_hi], horizons[t_hi], cfg, &deep_spec)?.value * rescale_factor(DEEP_EPS, cfg)?.powi(2);
    criteria.push(Criterion::relative("deep-eps J2 variance vs 2d Lambda^2 c_H T^(4H-2)", Diagnostic, deep, derived, 0.02));
    let closer_to_derived = ((deep / derived).ln()).abs() < ((deep / displayed).ln()).abs();
    criteria.push(Criterion::new(
        "deep-eps J2 variance closer to derived candidate",
        Diagnostic,
        deep,
        derived,
        0.0,
        "log distance to derived candidate below that to displayed candidate",
        closer_to_derived,
    ));
    let k = reports.last().expect("non-empty").stats[t_hi].kurtosis_z();
    criteria.push(Criterion::new("excess kurtosis z", Diagnostic, k, 4.0, 4.0, "z-score at least 4", k >= 4.0));
    let mut targets = vec![
        Target { name: "Lambda".into(), value: lam, error_estimate: lam_err, method: "1-D quadrature on [0, R] plus binomial tail".into() },
        Target { name: "c_H".into(), value: c_h, error_estimate: 0.0, method: "closed form H^2(2H-1)/(4H-3)".into() },
        Target { name: "2d Lambda^2 c_H T^(4H-2)".into(), value: derived, error_estimate: 4.0 * d * lam * lam_err * c_h, method: "product of constants".into() },
        Target { name: "displayed variance constant".into(), value: displayed, error_estimate: 0.0, method: "product of constants".into() },
    ];
    if let Some(run) = hermite {
        let (moment, se) = hermite_second_moment_mc(cfg.hurst, run)?;
        let limit = 2.0 * c_h * run.horizon.powf(growth);
        let exact = hermite_approx_second_moment(run.eps, run.horizon, cfg.hurst);
        targets.push(Target { name: "2 c_H T^(4H-2)".into(), value: limit, error_estimate: 0.0, method: "closed form".into() });
        targets.push(Target {
            name: "finite-eps Hermite approximant second moment".into(),
            value: exact,
            error_estimate: 0.0,
            method: "1-D quadrature of mu(v,1,1)^2".into(),
        });
        criteria.push(Criterion::relative("Hermite approximant second moment", Acceptance, moment, limit, 0.10));
        criteria.push(Criterion::new(
            "Hermite approximant vs finite-eps moment",
            Diagnostic,
            moment,
            exact,
            4.0 * se,
            "within 4 SE",
            (moment - exact).abs() <= 4.0 * se,
        ));
    }
    Ok(ExperimentResult {
        experiment: "supercritical".into(),
        config: *cfg,
        monte_carlo: mc.clone(),
        quadrature: *spec,
        horizons: horizons.to_vec(),
        grid: samples.grid,
        targets,
        reports,
        criteria,
    })
}

/// Logarithmic Brownian limit `ρ W_T` at `H = 3/4`, `d ≥ 3`.
pub fn run_critical_log(cfg: &HurstConfig, mc: &MonteCarloConfig, horizons: &[f64], spec: &QuadSpec) -> Result<ExperimentResult> {
    use CriterionKind::*;
    cfg.require(Regime::Critical)?;
    let rho = rho_const(cfg.dim, spec)?;
    let samples = sample_centered(cfg, mc, horizons, true)?;
    let chaos = samples.chaos.as_ref().expect("chaos sampled");
    let t_hi = index_of_max(horizons);
    let target = rho.value * rho.value * horizons[t_hi];
    let mut reports = Vec::new();
    let mut criteria = Vec::new();
    let mut ratios = Vec::new();
    let mut exact_ratios = Vec::new();
    let mut residuals = Vec::new();
    for (e, &eps) in mc.eps_list.iter().enumerate() {
        let factor = rescale_factor(eps, cfg)?;
        let silt = scaled(&samples.silt[e], factor);
        let j2 = scaled(&chaos[e], factor);
        let report = eps_report(eps, horizons, &silt)?;
        let ratio = report.stats[t_hi].variance / target;
        ratios.push(ratio);
        let t = horizons[t_hi];
        let exact = silt_covariance(eps, t, t, cfg, spec)?.value * factor * factor;
        exact_ratios.push(exact / target);
        criteria.push(Criterion::new(&format!("variance ratio eps={eps}"), Diagnostic, ratio, exact / target, f64::NAN, "informational", true));
        criteria.push(finite_eps_check(&format!("variance vs finite-eps quadrature eps={eps}"), &report.stats[t_hi], exact));
        let norm = (silt.iter().zip(&j2).map(|(s, j)| (s[t_hi] - j[t_hi]).powi(2)).sum::<f64>() / silt.len() as f64).sqrt();
        residuals.push(norm);
        reports.push(report);
    }
    criteria.push(Criterion::new(
        "variance ratio monotone toward 1",
        Acceptance,
        *ratios.last().expect("non-empty"),
        1.0,
        0.0,
        "|ratio - 1| strictly decreasing along the ladder",
        strictly_toward_one(&ratios),
    ));
    criteria.push(Criterion::new(
        "finite-eps variance ratio monotone toward 1",
        Diagnostic,
        *exact_ratios.last().expect("non-empty"),
        1.0,
        0.0,
        "|ratio - 1| of the quadrature variance strictly decreasing along the ladder",
        strictly_toward_one(&exact_ratios),
    ));
    let p = reports.last().expect("non-empty").stats[t_hi].normality_p;
    criteria.push(Criterion::new("normality p", Acceptance, p, 0.01, 0.01, "p-value above 0.01", p > 0.01));
    criteria.push(Criterion::new(
        "J2 residual decay",
        Diagnostic,
        *residuals.last().expect("non-empty"),
        0.0,
        0.0,
        "rescaled residual strictly decreasing along the ladder",
        strictly_decreasing(&residuals),
    ));
    Ok(ExperimentResult {
        experiment: "critical-log".into(),
        config: *cfg,
        monte_carlo: mc.clone(),
        quadrature: *spec,
        horizons: horizons.to_vec(),
        grid: samples.grid,
        targets: vec![Target {
            name: "rho^2 T".into(),
            value: target,
            error_estimate: 2.0 * rho.value * rho.error_estimate * horizons[t_hi],
            method: "1-D quadrature on [0, R] plus binomial tail".into(),
        }],
        reports,
        criteria,
    })
}

/// Default gap ladder of the tightness probe.
pub const TIGHTNESS_GAPS: [f64; 4] = [0.1, 0.2, 0.4, 0.8];

/// Log-log slope of `E|rescaled(I_{T1+g} - I_{T1})|^p` against the gap `g` at the smallest ε.
pub fn tightness_probe(
    cfg: &HurstConfig,
    mc: &MonteCarloConfig,
    start: f64,
    gaps: &[f64],
    moment: f64,
    spec: &QuadSpec,
) -> Result<ExperimentResult> {
    use CriterionKind::*;
    cfg.require(Regime::Subcritical)?;
    let limit = 4.0 * cfg.hurst * cfg.d() / 3.0;
    if !(moment > 2.0 && moment < limit) {
        return Err(invalid(format!("moment p = {moment} must lie in (2, 4Hd/3 = {limit})")));
    }
    if gaps.len() < 2 || gaps.iter().any(|g| !(*g > 0.0)) || !(start >= 0.0) {
        return Err(invalid("tightness probe needs a start >= 0 and at least two positive gaps"));
    }
    let mut horizons = vec![start];
    horizons.extend(gaps.iter().map(|g| start + g));
    let eps = *mc.eps_list.last().ok_or_else(|| invalid("empty eps_list"))?;
    let single = MonteCarloConfig { eps_list: vec![eps], ..mc.clone() };
    // The start may be 0; sample_centered needs positive horizons.
    let sampled: Vec<f64> = horizons.iter().cloned().filter(|t| *t > 0.0).collect();
    let samples = sample_centered(cfg, &single, &sampled, false)?;
    let rows = scaled(&samples.silt[0], rescale_factor(eps, cfg)?);
    let offset = usize::from(start > 0.0);
    let mut log_gap = Vec::new();
    let mut log_moment = Vec::new();
    for (g, gap) in gaps.iter().enumerate() {
        let m: f64 = rows
            .iter()
            .map(|r| {
                let base = if offset == 1 { r[0] } else { 0.0 };
                (r[g + offset] - base).abs().powf(moment)
            })
            .sum::<f64>()
            / rows.len() as f64;
        log_gap.push(gap.ln());
        log_moment.push(m.ln());
    }
    let fit = fit_line(&log_gap, &log_moment)?;
    let mut criteria = vec![Criterion::new(
        "moment slope",
        Acceptance,
        fit.slope,
        0.5 * moment,
        0.25,
        "absolute deviation from p/2",
        (fit.slope - 0.5 * moment).abs() <= 0.25,
    )];
    let mut targets = Vec::new();
    for region in Region::ALL {
        let probe = integrability_probe(ProbeDomain::Sector(region), moment, cfg, spec);
        let (value, ok) = match &probe {
            Ok(r) => (r.result.value, true),
            Err(_) => (f64::NAN, false),
        };
        criteria.push(Criterion::new(
            &format!("integrability {region:?}"),
            Acceptance,
            value,
            value,
            0.0,
            "truncation-doubling probe converges",
            ok,
        ));
        targets.push(Target {
            name: format!("moment-bound integral over {region:?}"),
            value,
            error_estimate: probe.as_ref().map(|r| r.result.error_estimate).unwrap_or(f64::NAN),
            method: "adaptive cubature with truncation doubling".into(),
        });
    }
    Ok(ExperimentResult {
        experiment: "tightness".into(),
        config: *cfg,
        monte_carlo: single,
        quadrature: *spec,
        horizons,
        grid: samples.grid,
        targets,
        reports: Vec::new(),
        criteria,
    })
}

/// Runs the experiment appropriate for the regime of `cfg`.
pub fn run_for_regime(cfg: &HurstConfig, mc: &MonteCarloConfig, horizons: &[f64], spec: &QuadSpec) -> Result<ExperimentResult> {
    match cfg.regime() {
        Regime::Subcritical => run_subcritical(cfg, mc, horizons, spec),
        Regime::Supercritical => run_supercritical(cfg, mc, horizons, spec, None),
        Regime::Critical => run_critical_log(cfg, mc, horizons, spec),
        other => Err(SiltError::Regime { required: "Subcritical, Critical or Supercritical".into(), actual: other }),
    }
}
