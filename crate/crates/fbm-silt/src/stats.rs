//! Sample summaries used by the verification experiments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};

/// Moment summary of one sample with standard errors and a normality test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub se_mean: f64,
    pub se_variance: f64,
    pub se_skewness: f64,
    pub se_kurtosis: f64,
    /// Anderson–Darling statistic with estimated mean and variance.
    pub anderson_darling: f64,
    pub normality_p: f64,
}

impl StatReport {
    pub fn from_sample(sample: &[f64]) -> Result<Self> {
        let n = sample.len();
        if n < 8 {
            return Err(invalid(format!("sample of size {n} is too small for a report (need 8)")));
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(invalid("sample contains non-finite values"));
        }
        let nf = n as f64;
        let mean = sample.iter().sum::<f64>() / nf;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for x in sample {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= nf;
        m3 /= nf;
        m4 /= nf;
        let variance = m2 * nf / (nf - 1.0);
        let (skewness, excess_kurtosis) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) } else { (0.0, 0.0) };
        let se_skewness = skewness_se(n);
        let se_kurtosis = (4.0 * (nf * nf - 1.0) * se_skewness * se_skewness / ((nf - 3.0) * (nf + 5.0))).sqrt();
        let (anderson_darling, normality_p) = if m2 > 0.0 { anderson_darling(sample, mean, variance.sqrt()) } else { (f64::INFINITY, 0.0) };
        Ok(Self {
            n,
            mean,
            variance,
            skewness,
            excess_kurtosis,
            se_mean: (variance / nf).sqrt(),
            se_variance: ((m4 - m2 * m2).max(0.0) / nf).sqrt(),
            se_skewness,
            se_kurtosis,
            anderson_darling,
            normality_p,
        })
    }

    pub fn skewness_z(&self) -> f64 {
        self.skewness / self.se_skewness
    }

    pub fn kurtosis_z(&self) -> f64 {
        self.excess_kurtosis / self.se_kurtosis
    }
}

/// Mean of squares `E[X²]` estimate and its standard error.
pub fn second_moment_with_se(sample: &[f64]) -> (f64, f64) {
    let nf = sample.len() as f64;
    let sq: Vec<f64> = sample.iter().map(|x| x * x).collect();
    let mean = sq.iter().sum::<f64>() / nf;
    let var = sq.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Standard error of the sample skewness under normality.
pub fn skewness_se(n: usize) -> f64 {
    let n = n as f64;
    (6.0 * n * (n - 1.0) / ((n - 2.0) * (n + 1.0) * (n + 3.0))).sqrt()
}

/// Anderson–Darling statistic and p-value for normality with estimated parameters.
///
/// The p-value uses Stephens' small-sample correction and piecewise fit.
pub fn anderson_darling(sample: &[f64], mean: f64, sd: f64) -> (f64, f64) {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut z: Vec<f64> = sample.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let n = z.len();
    let nf = n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let lo = normal.cdf(z[i]).clamp(1e-300, 1.0);
        let hi = normal.sf(z[n - 1 - i]).clamp(1e-300, 1.0);
        s += (2 * i + 1) as f64 * (lo.ln() + hi.ln());
    }
    let a2 = -nf - s / nf;
    (a2, ad_p_value(a2, n))
}

/// Stephens' approximation of the upper tail probability of the adjusted statistic.
pub fn ad_p_value(a2: f64, n: usize) -> f64 {
    let nf = n as f64;
    let a = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    p.clamp(0.0, 1.0)
}

/// Unbiased covariance matrix of the columns of `rows` (`rows[r][i]`).
pub fn covariance_matrix(rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = rows.len();
    if n < 2 {
        return Err(invalid("covariance needs at least two rows"));
    }
    let k = rows[0].len();
    if rows.iter().any(|r| r.len() != k) {
        return Err(invalid("ragged rows"));
    }
    let means: Vec<f64> = (0..k).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / n as f64).collect();
    let mut cov = vec![vec![0.0; k]; k];
    for r in rows {
        for i in 0..k {
            for j in 0..=i {
                cov[i][j] += (r[i] - means[i]) * (r[j] - means[j]);
            }
        }
    }
    for i in 0..k {
        for j in 0..=i {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    Ok(cov)
}

/// Sample covariance of two equally long samples and its standard error.
pub fn covariance_with_se(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(invalid("covariance needs two samples of equal length >= 3"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let cov = prods.iter().sum::<f64>() / (nf - 1.0);
    let mp = prods.iter().sum::<f64>() / nf;
    let var_p = prods.iter().map(|p| (p - mp).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok((cov, (var_p / nf).sqrt()))
}

/// Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    let (cxy, _) = covariance_with_se(x, y)?;
    let (cxx, _) = covariance_with_se(x, x)?;
    let (cyy, _) = covariance_with_se(y, y)?;
    Ok(cxy / (cxx * cyy).sqrt())
}

/// Least-squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(invalid("line fit needs two samples of equal length >= 2"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("line fit needs distinct abscissae"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit { slope, intercept, slope_se })
}
