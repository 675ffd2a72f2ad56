//! Fractional Brownian motion: covariance structure and exact sampling.
//!
//! Paths are sampled exactly on a uniform grid, either through a Cholesky
//! factor of the fractional Gaussian noise covariance or through circulant
//! embedding (Davies–Harte). Both backends reproduce the finite-dimensional
//! law of the process on the grid; they differ only in cost.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SiltError};

/// Tolerance used when comparing a Hurst parameter against a regime boundary.
pub const REGIME_TOL: f64 = 1e-12;

/// Hurst parameter and spatial dimension of a d-dimensional fBm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstConfig {
    pub hurst: f64,
    pub dim: usize,
}

impl HurstConfig {
    pub fn new(hurst: f64, dim: usize) -> Result<Self> {
        let cfg = Self { hurst, dim };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.0 && self.hurst < 1.0) {
            return Err(invalid(format!("Hurst parameter {} outside (0, 1)", self.hurst)));
        }
        if self.dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self)
    }

    /// `d` as a float, for exponents.
    pub fn d(&self) -> f64 {
        self.dim as f64
    }

    /// `2H`, the self-similarity exponent of the variance.
    pub fn two_h(&self) -> f64 {
        2.0 * self.hurst
    }

    /// Fails with a regime error unless the configuration lies in `required`.
    pub fn require(&self, required: Regime) -> Result<()> {
        let actual = self.regime();
        if actual == required {
            Ok(())
        } else {
            Err(SiltError::Regime { required: format!("{required:?}"), actual })
        }
    }
}

/// Asymptotic regime of the renormalised self-intersection local time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Regime {
    /// `H < 1/d`: the local time exists in L² without renormalisation.
    L2,
    /// `1/d ≤ H < 3/(2d)`: the centred local time converges in L².
    L2Centered,
    /// `3/(2d) < H < 3/4`: Gaussian limit with Brownian time dependence.
    Subcritical,
    /// `H = 3/4`, `d ≥ 3`: Gaussian limit with logarithmic normalisation.
    Critical,
    /// `H > 3/4`: limit is a sum of independent Hermite processes.
    Supercritical,
    /// `H = 3/(2d)`, or `H = 3/4` with `d = 2`.
    Unsupported,
}

/// Classifies `(H, d)` into its asymptotic regime.
pub fn classify_regime(cfg: &HurstConfig) -> Regime {
    let h = cfg.hurst;
    let d = cfg.d();
    let log_critical = 1.5 / d;
    if (h - log_critical).abs() <= REGIME_TOL {
        return Regime::Unsupported;
    }
    if h < 1.0 / d {
        return Regime::L2;
    }
    if h < log_critical {
        return Regime::L2Centered;
    }
    if (h - 0.75).abs() <= REGIME_TOL {
        return if cfg.dim >= 3 { Regime::Critical } else { Regime::Unsupported };
    }
    if h < 0.75 {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    }
}

/// Covariance `E[B_t B_s]` of one component of a fBm.
pub fn fbm_covariance(t: f64, s: f64, cfg: &HurstConfig) -> f64 {
    let two_h = cfg.two_h();
    0.5 * (t.powf(two_h) + s.powf(two_h) - (t - s).abs().powf(two_h))
}

/// Covariance of the increments `B_{u1}` and `B_{x+u2} - B_x`.
///
/// Negative offsets use the reflection `mu(x, u1, u2) = mu(-x, u2, u1)`.
/// Differences of powers are formed with `expm1`/`ln_1p`, and increments
/// separated by a gap wider than the shorter length use the integral
/// form of the mixed difference, so disjoint increments keep full
/// relative accuracy.
pub fn mu(x: f64, u1: f64, u2: f64, hurst: f64) -> f64 {
    if x < 0.0 {
        return mu(-x, u2, u1, hurst);
    }
    let two_h = 2.0 * hurst;
    let gap = x - u1;
    if gap > 0.0 && gap > u1.min(u2) {
        return if u1 <= u2 { separated_mu(gap, u1, u2, hurst) } else { separated_mu(gap, u2, u1, hurst) };
    }
    let far = power_step(x, u2, two_h);
    let near = if gap >= 0.0 {
        power_step(gap, u2, two_h)
    } else {
        (x + u2 - u1).abs().powf(two_h) - (-gap).powf(two_h)
    };
    0.5 * (far - near)
}

/// `(y + h)^{2H} - y^{2H}` for `y ≥ 0`, `h ≥ 0`.
fn power_step(y: f64, h: f64, two_h: f64) -> f64 {
    if h >= y {
        (y + h).powf(two_h) - y.powf(two_h)
    } else {
        y.powf(two_h) * (two_h * (h / y).ln_1p()).exp_m1()
    }
}

const GAUSS_LEGENDRE_8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_2, 0.101_228_536_290_376_3),
];

/// `μ` for disjoint increments `[0, u1]`, `[u1 + gap, u1 + gap + u2]` with `u1 < gap`:
/// `H g^{2H} ∫_0^{u1/g} (1+s)^{2H-1} ((1 + (u2/g)/(1+s))^{2H-1} - 1) ds`,
/// by 8-point Gauss–Legendre on panels of width at most 1/2.
fn separated_mu(gap: f64, u1: f64, u2: f64, hurst: f64) -> f64 {
    let e = 2.0 * hurst - 1.0;
    let alpha = u1 / gap;
    let gamma = u2 / gap;
    let integrand = |s: f64| (1.0 + s).powf(e) * (e * (gamma / (1.0 + s)).ln_1p()).exp_m1();
    let panels = (2.0 * alpha).ceil().max(1.0) as usize;
    let half = 0.5 * alpha / panels as f64;
    let integral: f64 = (0..panels)
        .map(|k| {
            let mid = half * (2 * k + 1) as f64;
            GAUSS_LEGENDRE_8
                .iter()
                .map(|(node, weight)| weight * (integrand(mid + half * node) + integrand(mid - half * node)))
                .sum::<f64>()
        })
        .sum::<f64>()
        * half;
    hurst * gap.powf(2.0 * hurst) * integral
}

/// Covariance of two increments `B_{t1} - B_{s1}` and `B_{t2} - B_{s2}`.
pub fn increment_covariance(s1: f64, t1: f64, s2: f64, t2: f64, hurst: f64) -> f64 {
    mu(s2 - s1, t1 - s1, t2 - s2, hurst)
}

/// Uniform time grid `t_k = k T / n`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("grid horizon {horizon} must be positive")));
        }
        if steps == 0 {
            return Err(invalid("grid needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    /// Index of the grid node at time `t`, which must coincide with a node.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let dt = self.dt();
        let k = (t / dt).round();
        if t < -1e-12 || (t - k * dt).abs() > 1e-9 * dt.max(1.0) || k as usize > self.steps {
            return Err(SiltError::OffGrid { time: t, dt, horizon: self.horizon });
        }
        Ok(k as usize)
    }

    /// Number of steps spanning a lag, which must be a multiple of `dt`.
    pub fn lag_steps(&self, lag: f64) -> Result<usize> {
        let dt = self.dt();
        let k = (lag / dt).round();
        if lag < 0.0 || (lag - k * dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(SiltError::OffGrid { time: lag, dt, horizon: self.horizon });
        }
        Ok(k as usize)
    }
}

/// A sampled d-dimensional fBm path, stored row-major as `(n + 1) × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub grid: TimeGrid,
    pub config: HurstConfig,
    values: Vec<f64>,
}

impl FbmPath {
    /// Wraps raw values; `values.len()` must equal `(n + 1) d` and start at the origin.
    pub fn from_values(grid: TimeGrid, config: HurstConfig, values: Vec<f64>) -> Result<Self> {
        if values.len() != (grid.steps + 1) * config.dim {
            return Err(invalid(format!(
                "path has {} values, expected {}",
                values.len(),
                (grid.steps + 1) * config.dim
            )));
        }
        if values[..config.dim].iter().any(|v| *v != 0.0) {
            return Err(invalid("path must start at the origin"));
        }
        Ok(Self { grid, config, values })
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    /// Position at grid node `k`.
    pub fn point(&self, k: usize) -> &[f64] {
        let d = self.config.dim;
        &self.values[k * d..(k + 1) * d]
    }

    pub fn value(&self, k: usize, component: usize) -> f64 {
        self.values[k * self.config.dim + component]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Squared Euclidean distance between nodes `k` and `l`.
    pub fn sq_distance(&self, k: usize, l: usize) -> f64 {
        self.point(k).iter().zip(self.point(l)).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Sampling backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Cholesky up to `DEFAULT_CHOLESKY_MAX_STEPS`, circulant embedding beyond.
    #[default]
    Auto,
    Cholesky,
    Circulant,
}

/// Grid size above which `Backend::Auto` switches to circulant embedding.
pub const DEFAULT_CHOLESKY_MAX_STEPS: usize = 256;
/// Hard cap for the Cholesky backend.
pub const CHOLESKY_CAP: usize = 4096;
/// Relative tolerance for negative circulant eigenvalues.
pub const EMBEDDING_TOL: f64 = 1e-10;

/// Autocovariance of fractional Gaussian noise with step `dt` at lag `k`.
pub fn fgn_autocovariance(k: usize, dt: f64, hurst: f64) -> f64 {
    let two_h = 2.0 * hurst;
    let k = k as f64;
    let core = (k + 1.0).powf(two_h) - 2.0 * k.powf(two_h) + (k - 1.0).abs().powf(two_h);
    0.5 * dt.powf(two_h) * core
}

enum Method {
    Cholesky { lower: Vec<f64> },
    Circulant { sqrt_eigen: Vec<f64>, fft: Arc<dyn Fft<f64>> },
}

/// Reusable exact sampler for a fixed grid and configuration.
pub struct FbmGenerator {
    grid: TimeGrid,
    config: HurstConfig,
    method: Method,
}

impl std::fmt::Debug for FbmGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmGenerator")
            .field("grid", &self.grid)
            .field("config", &self.config)
            .field("backend", &self.backend())
            .finish()
    }
}

impl FbmGenerator {
    pub fn new(grid: TimeGrid, config: HurstConfig, backend: Backend) -> Result<Self> {
        Self::with_threshold(grid, config, backend, DEFAULT_CHOLESKY_MAX_STEPS)
    }

    /// Like `new`, with a custom `Auto` switch-over size.
    pub fn with_threshold(
        grid: TimeGrid,
        config: HurstConfig,
        backend: Backend,
        cholesky_max_steps: usize,
    ) -> Result<Self> {
        config.validate()?;
        let n = grid.steps;
        let use_cholesky = match backend {
            Backend::Cholesky => true,
            Backend::Circulant => false,
            Backend::Auto => n <= cholesky_max_steps.min(CHOLESKY_CAP),
        };
        let method = if use_cholesky {
            if n > CHOLESKY_CAP {
                return Err(SiltError::SizeCap { steps: n, cap: CHOLESKY_CAP });
            }
            cholesky_method(grid, config)?
        } else {
            circulant_method(grid, config)?
        };
        Ok(Self { grid, config, method })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn config(&self) -> HurstConfig {
        self.config
    }

    pub fn backend(&self) -> Backend {
        match self.method {
            Method::Cholesky { .. } => Backend::Cholesky,
            Method::Circulant { .. } => Backend::Circulant,
        }
    }

    /// Draws one path; component `j` uses stream `j` of a ChaCha generator keyed by `seed`.
    pub fn sample(&self, seed: u64) -> FbmPath {
        let n = self.grid.steps;
        let d = self.config.dim;
        let mut values = vec![0.0; (n + 1) * d];
        let mut increments = vec![0.0; n];
        let mut scratch = Vec::new();
        for j in 0..d {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            self.fill_increments(&mut rng, &mut increments, &mut scratch);
            let mut acc = 0.0;
            for (k, inc) in increments.iter().enumerate() {
                acc += inc;
                values[(k + 1) * d + j] = acc;
            }
        }
        FbmPath { grid: self.grid, config: self.config, values }
    }

    fn fill_increments(
        &self,
        rng: &mut ChaCha8Rng,
        out: &mut [f64],
        scratch: &mut Vec<Complex<f64>>,
    ) {
        let n = out.len();
        match &self.method {
            Method::Cholesky { lower } => {
                let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                for (i, slot) in out.iter_mut().enumerate() {
                    let row = &lower[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
                    *slot = row.iter().zip(&z).map(|(l, zk)| l * zk).sum();
                }
            }
            Method::Circulant { sqrt_eigen, fft } => {
                scratch.clear();
                scratch.extend(sqrt_eigen.iter().map(|s| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex::new(s * re, s * im)
                }));
                fft.process(scratch);
                for (slot, z) in out.iter_mut().zip(scratch.iter()) {
                    *slot = z.re;
                }
            }
        }
    }
}

fn cholesky_method(grid: TimeGrid, config: HurstConfig) -> Result<Method> {
    let n = grid.steps;
    let dt = grid.dt();
    let gamma: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, dt, config.hurst)).collect();
    let cov = DMatrix::from_fn(n, n, |i, j| gamma[i.abs_diff(j)]);
    let chol = cov
        .cholesky()
        .ok_or_else(|| SiltError::Domain("increment covariance is not positive definite".into()))?;
    let l = chol.l();
    let mut lower = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            lower.push(l[(i, j)]);
        }
    }
    Ok(Method::Cholesky { lower })
}

fn circulant_method(grid: TimeGrid, config: HurstConfig) -> Result<Method> {
    let n = grid.steps;
    let padded = 2 * n.next_power_of_two();
    match circulant_embedding(padded, grid, config) {
        Err(SiltError::Embedding { .. }) if padded != 2 * n => circulant_embedding(2 * n, grid, config),
        other => other,
    }
}

fn circulant_embedding(m: usize, grid: TimeGrid, config: HurstConfig) -> Result<Method> {
    let half = m / 2;
    let dt = grid.dt();
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|k| {
            let lag = if k <= half { k } else { m - k };
            Complex::new(fgn_autocovariance(lag, dt, config.hurst), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    let max_eig = row.iter().map(|z| z.re).fold(f64::MIN, f64::max);
    let min_eig = row.iter().map(|z| z.re).fold(f64::MAX, f64::min);
    if min_eig < -EMBEDDING_TOL * max_eig {
        return Err(SiltError::Embedding { min_eigenvalue: min_eig });
    }
    let sqrt_eigen = row.iter().map(|z| (z.re.max(0.0) / m as f64).sqrt()).collect();
    Ok(Method::Circulant { sqrt_eigen, fft })
}

/// Samples a single path with the default backend.
pub fn sample_fbm(grid: TimeGrid, cfg: HurstConfig, seed: u64) -> Result<FbmPath> {
    Ok(FbmGenerator::new(grid, cfg, Backend::Auto)?.sample(seed))
}

/// SplitMix64 finaliser.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` derived from a base seed.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}
