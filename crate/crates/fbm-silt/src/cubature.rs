//! Adaptive quadrature on finite intervals and boxes.
//!
//! One dimension uses a 7/15-point Gauss–Kronrod pair, higher dimensions the
//! degree 7/5 Genz–Malik rule. Both subdivide the piece with the largest error
//! estimate until the global tolerance or the evaluation budget is met.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

/// Value and error estimate of an adaptive integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evals: u64,
    pub converged: bool,
    /// Analytic bound on mass discarded by truncating the domain, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_bound: Option<f64>,
}

impl QuadResult {
    pub fn zero() -> Self {
        Self { value: 0.0, error_estimate: 0.0, evals: 0, converged: true, tail_bound: None }
    }

    /// Sum of independent pieces; converged only if every piece converged.
    pub fn combine(parts: &[QuadResult]) -> Self {
        let mut out = Self::zero();
        for p in parts {
            out.value += p.value;
            out.error_estimate += p.error_estimate;
            out.evals += p.evals;
            out.converged &= p.converged;
            out.tail_bound = match (out.tail_bound, p.tail_bound) {
                (Some(a), Some(b)) => Some(a + b),
                (a, b) => a.or(b),
            };
        }
        out
    }

    pub fn scale(mut self, factor: f64) -> Self {
        self.value *= factor;
        self.error_estimate *= factor.abs();
        self.tail_bound = self.tail_bound.map(|t| t * factor.abs());
        self
    }

    /// Re-checks convergence of a combined result against a tolerance.
    pub fn recheck(mut self, tol: &Tolerance) -> Self {
        self.converged = self.converged || self.error_estimate <= tol.target(self.value);
        self
    }
}

/// Stopping rule shared by the integrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_evals: u64,
}

impl Tolerance {
    pub fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Applies the 15-point Kronrod rule and its embedded 7-point Gauss rule.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Piece<T> {
    error: f64,
    value: f64,
    data: T,
}

impl<T> PartialEq for Piece<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T> Eq for Piece<T> {}
impl<T> PartialOrd for Piece<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Piece<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate_1d<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: &Tolerance) -> QuadResult {
    if a == b {
        return QuadResult::zero();
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { error: e, value: v, data: (a, b) });
    let mut total = v;
    let mut err = e;
    let mut evals = 15u64;
    let (mut frozen_value, mut frozen_error) = (0.0, 0.0);
    while err > tol.target(total) && evals + 30 <= tol.max_evals {
        let Some(worst) = heap.pop() else { break };
        let (lo, hi) = worst.data;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        evals += 30;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Piece { error: e1, value: v1, data: (lo, mid) });
        heap.push(Piece { error: e2, value: v2, data: (mid, hi) });
    }
    // Resum to shed accumulated rounding from the running updates.
    let (value, error_estimate) = heap.iter().fold((frozen_value, frozen_error), |(v, e), p| (v + p.value, e + p.error));
    QuadResult {
        value,
        error_estimate,
        evals,
        converged: error_estimate <= tol.target(value),
        tail_bound: None,
    }
}

const LAMBDA2: f64 = 0.358_568_582_800_318_1; // sqrt(9/70)
const LAMBDA4: f64 = 0.948_683_298_050_513_8; // sqrt(9/10)
const LAMBDA5: f64 = 0.688_247_201_611_685_3; // sqrt(9/19)

struct GenzMalik {
    dim: usize,
    w: [f64; 5],
    we: [f64; 4],
}

impl GenzMalik {
    fn new(dim: usize) -> Self {
        let n = dim as f64;
        let w = [
            (12824.0 - 9120.0 * n + 400.0 * n * n) / 19683.0,
            980.0 / 6561.0,
            (1820.0 - 400.0 * n) / 19683.0,
            200.0 / 19683.0,
            6859.0 / 19683.0 / 2f64.powi(dim as i32),
        ];
        let we = [
            (729.0 - 950.0 * n + 50.0 * n * n) / 729.0,
            245.0 / 486.0,
            (265.0 - 100.0 * n) / 1458.0,
            25.0 / 729.0,
        ];
        Self { dim, w, we }
    }

    fn points(&self) -> u64 {
        let n = self.dim as u64;
        1 + 4 * n + 2 * n * (n - 1) + (1 << n)
    }

    /// Returns (degree-7 value, error estimate, split axis).
    fn apply<F: Fn(&[f64]) -> f64>(&self, f: &F, center: &[f64], half: &[f64], x: &mut [f64]) -> (f64, f64, usize) {
        let n = self.dim;
        let volume: f64 = half.iter().map(|h| 2.0 * h).product();
        x.copy_from_slice(center);
        let f0 = f(x);
        let mut sum2 = 0.0;
        let mut sum3 = 0.0;
        let mut split = 0;
        let mut best_diff = -1.0;
        for i in 0..n {
            x[i] = center[i] - LAMBDA2 * half[i];
            let a2 = f(x);
            x[i] = center[i] + LAMBDA2 * half[i];
            let b2 = f(x);
            x[i] = center[i] - LAMBDA4 * half[i];
            let a4 = f(x);
            x[i] = center[i] + LAMBDA4 * half[i];
            let b4 = f(x);
            x[i] = center[i];
            sum2 += a2 + b2;
            sum3 += a4 + b4;
            let diff = ((a2 + b2 - 2.0 * f0) - (a4 + b4 - 2.0 * f0) / 7.0).abs();
            let wider = diff == best_diff && half[i] > half[split];
            if diff > best_diff * (1.0 + 1e-10) || wider {
                best_diff = diff;
                split = i;
            }
        }
        let mut sum4 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                for (si, sj) in [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)] {
                    x[i] = center[i] + si * LAMBDA4 * half[i];
                    x[j] = center[j] + sj * LAMBDA4 * half[j];
                    sum4 += f(x);
                }
                x[i] = center[i];
                x[j] = center[j];
            }
        }
        let mut sum5 = 0.0;
        for mask in 0..(1usize << n) {
            for i in 0..n {
                let sign = if mask & (1 << i) == 0 { -1.0 } else { 1.0 };
                x[i] = center[i] + sign * LAMBDA5 * half[i];
            }
            sum5 += f(x);
        }
        let w = &self.w;
        let we = &self.we;
        let r7 = volume * (w[0] * f0 + w[1] * sum2 + w[2] * sum3 + w[3] * sum4 + w[4] * sum5);
        let r5 = volume * (we[0] * f0 + we[1] * sum2 + we[2] * sum3 + we[3] * sum4);
        (r7, (r7 - r5).abs(), split)
    }
}

/// Adaptive Genz–Malik cubature of `f` over the box `[lower, upper]` (dimension ≥ 2).
pub fn integrate_box<F: Fn(&[f64]) -> f64>(f: F, lower: &[f64], upper: &[f64], tol: &Tolerance) -> QuadResult {
    let n = lower.len();
    assert!(n >= 2 && upper.len() == n, "integrate_box needs matching bounds of dimension >= 2");
    if lower.iter().zip(upper).any(|(l, u)| u <= l) {
        return QuadResult::zero();
    }
    let rule = GenzMalik::new(n);
    let per_box = rule.points();
    let mut x = vec![0.0; n];
    let center: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect();
    let half: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| 0.5 * (u - l)).collect();
    let (v, e, axis) = rule.apply(&f, &center, &half, &mut x);
    let mut heap = BinaryHeap::new();
    heap.push(Piece { error: e, value: v, data: (center, half, axis) });
    let mut total = v;
    let mut err = e;
    let mut evals = per_box;
    // Boxes too small to split in floating point keep their contribution.
    let (mut frozen_value, mut frozen_error) = (0.0, 0.0);
    while err > tol.target(total) && evals + 2 * per_box <= tol.max_evals {
        let Some(worst) = heap.pop() else { break };
        let (c, h, axis) = worst.data;
        let mut h_new = h.clone();
        h_new[axis] *= 0.5;
        if h_new[axis] <= f64::EPSILON * c[axis].abs().max(1e-300) {
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        let mut c_lo = c.clone();
        c_lo[axis] -= h_new[axis];
        let mut c_hi = c;
        c_hi[axis] += h_new[axis];
        let (v1, e1, a1) = rule.apply(&f, &c_lo, &h_new, &mut x);
        let (v2, e2, a2) = rule.apply(&f, &c_hi, &h_new, &mut x);
        evals += 2 * per_box;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Piece { error: e1, value: v1, data: (c_lo, h_new.clone(), a1) });
        heap.push(Piece { error: e2, value: v2, data: (c_hi, h_new, a2) });
    }
    let (value, error_estimate) = heap.iter().fold((frozen_value, frozen_error), |(v, e), p| (v + p.value, e + p.error));
    QuadResult {
        value,
        error_estimate,
        evals,
        converged: error_estimate <= tol.target(value),
        tail_bound: None,
    }
}
