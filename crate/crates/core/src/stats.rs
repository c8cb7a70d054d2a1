//! Summary statistics, goodness-of-fit tests, resampling helpers, and the
//! log-log increment regression behind Hölder exponent estimates.
//!
//! Kolmogorov-Smirnov p-values use the asymptotic Kolmogorov law with the
//! Stephens finite-sample correction (accurate to a few 1e-3 in p for
//! n >= 20, well inside every tolerance used here). Tests against a normal
//! with moments fitted from the data use the Lilliefors-adjusted statistic
//! instead; plain KS would be anticonservative.

use crate::walks::rng_for;
use rand::Rng;
use statrs::function::erf::erf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {need} samples, got {got}")]
    TooFew { got: usize, need: usize },
    #[error("{0}")]
    BadInput(&'static str),
}

pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "mean of empty sample");
    let mut s = crate::numutil::CompensatedSum::new();
    for &x in xs {
        s.add(x);
    }
    s.value() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    assert!(xs.len() >= 2, "variance needs two samples");
    let m = mean(xs);
    let mut s = crate::numutil::CompensatedSum::new();
    for &x in xs {
        s.add((x - m) * (x - m));
    }
    s.value() / (xs.len() - 1) as f64
}

pub fn std_error_of_mean(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Adjusted Fisher-Pearson skewness G1 = g1 sqrt(n(n-1))/(n-2).
pub fn skewness(xs: &[f64]) -> f64 {
    assert!(xs.len() >= 3, "skewness needs three samples");
    let n = xs.len() as f64;
    let m = mean(xs);
    let (mut m2, mut m3) = (0.0, 0.0);
    for &x in xs {
        let d = x - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    let g1 = m3 / m2.powf(1.5);
    g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "correlation needs paired samples");
    assert!(xs.len() >= 2);
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Least-squares line fit; returns (slope, intercept).
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "regression needs two points");
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn normal_cdf(x: f64, mu: f64, sd: f64) -> f64 {
    0.5 * (1.0 + erf((x - mu) / (sd * std::f64::consts::SQRT_2)))
}

/// Survival function Q(lambda) of the Kolmogorov distribution. The theta
/// dual series is used for small lambda where the alternating series
/// converges slowly.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        let a = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        let mut j = 1u32;
        while j < 64 {
            let term = (-(j as f64 * j as f64) * a).exp();
            s += term;
            if term < 1e-18 {
                break;
            }
            j += 2;
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        let mut sign = 1.0;
        for k in 1..=100u32 {
            let term = (-2.0 * (k as f64 * k as f64) * lambda * lambda).exp();
            s += sign * term;
            if term < 1e-18 {
                break;
            }
            sign = -sign;
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KsReport {
    pub statistic: f64,
    pub p_value: f64,
    /// n for one-sample tests, nm/(n+m) for two-sample tests.
    pub n_eff: f64,
}

/// One-sample Kolmogorov-Smirnov test against a fully specified CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> Result<KsReport, StatsError> {
    if data.len() < 8 {
        return Err(StatsError::TooFew { got: data.len(), need: 8 });
    }
    let mut xs = data.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    Ok(KsReport { statistic: d, p_value: kolmogorov_survival(lambda), n_eff: n })
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsReport, StatsError> {
    if a.len() < 8 || b.len() < 8 {
        return Err(StatsError::TooFew { got: a.len().min(b.len()), need: 8 });
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("NaN in sample"));
    ys.sort_by(|p, q| p.partial_cmp(q).expect("NaN in sample"));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < n && j < m {
        let x = xs[i];
        let y = ys[j];
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n as f64 * m as f64) / (n as f64 + m as f64);
    let lambda = (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d;
    Ok(KsReport { statistic: d, p_value: kolmogorov_survival(lambda), n_eff })
}

/// Critical values of the Lilliefors-adjusted statistic
/// D (sqrt(n) - 0.01 + 0.85/sqrt(n)) for a normal with fitted moments.
const LILLIEFORS_TABLE: [(f64, f64); 5] = [
    (0.775, 0.15),
    (0.819, 0.10),
    (0.895, 0.05),
    (0.995, 0.025),
    (1.035, 0.01),
];

#[derive(Clone, Copy, Debug)]
pub struct LillieforsReport {
    pub statistic: f64,
    pub adjusted: f64,
    /// Interpolated from the critical-value table, clamped to
    /// [0.001, 0.5]; exact only at the tabulated levels.
    pub p_value: f64,
    pub n: usize,
}

/// Kolmogorov-Smirnov test against a normal law with mean and variance
/// estimated from the data, using the Lilliefors adjustment.
pub fn lilliefors_normal(data: &[f64]) -> Result<LillieforsReport, StatsError> {
    if data.len() < 8 {
        return Err(StatsError::TooFew { got: data.len(), need: 8 });
    }
    let mu = mean(data);
    let sd = variance(data).sqrt();
    if !(sd > 0.0) {
        return Err(StatsError::BadInput("degenerate sample"));
    }
    let d = ks_one_sample(data, |x| normal_cdf(x, mu, sd))?.statistic;
    let n = data.len() as f64;
    let adjusted = d * (n.sqrt() - 0.01 + 0.85 / n.sqrt());
    // Log-linear interpolation between tabulated levels.
    let p = if adjusted <= LILLIEFORS_TABLE[0].0 {
        let (s0, p0) = LILLIEFORS_TABLE[0];
        let (s1, p1) = LILLIEFORS_TABLE[1];
        let slope = (p1.ln() - p0.ln()) / (s1 - s0);
        (p0.ln() + slope * (adjusted - s0)).exp().min(0.5)
    } else if adjusted >= LILLIEFORS_TABLE[4].0 {
        let (s0, p0) = LILLIEFORS_TABLE[3];
        let (s1, p1) = LILLIEFORS_TABLE[4];
        let slope = (p1.ln() - p0.ln()) / (s1 - s0);
        (p1.ln() + slope * (adjusted - s1)).exp().max(0.001)
    } else {
        let k = LILLIEFORS_TABLE.windows(2).position(|w| adjusted < w[1].0).unwrap();
        let (s0, p0) = LILLIEFORS_TABLE[k];
        let (s1, p1) = LILLIEFORS_TABLE[k + 1];
        let w = (adjusted - s0) / (s1 - s0);
        (p0.ln() * (1.0 - w) + p1.ln() * w).exp()
    };
    Ok(LillieforsReport { statistic: d, adjusted, p_value: p, n: data.len() })
}

/// Percentile bootstrap confidence interval for a statistic.
pub fn bootstrap_ci<F: Fn(&[f64]) -> f64>(
    data: &[f64],
    stat: F,
    resamples: u32,
    seed: u64,
    level: f64,
) -> Result<(f64, f64), StatsError> {
    if data.len() < 8 {
        return Err(StatsError::TooFew { got: data.len(), need: 8 });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(StatsError::BadInput("confidence level must lie in (0, 1)"));
    }
    if resamples < 100 {
        return Err(StatsError::BadInput("need at least 100 resamples"));
    }
    let mut rng = rng_for(seed);
    let n = data.len();
    let mut scratch = vec![0.0; n];
    let mut stats = Vec::with_capacity(resamples as usize);
    for _ in 0..resamples {
        for slot in scratch.iter_mut() {
            *slot = data[rng.gen_range(0..n)];
        }
        stats.push(stat(&scratch));
    }
    stats.sort_by(|a, b| a.partial_cmp(b).expect("NaN bootstrap statistic"));
    let q = |p: f64| stats[((p * (stats.len() - 1) as f64).round() as usize).min(stats.len() - 1)];
    let tail = (1.0 - level) / 2.0;
    Ok((q(tail), q(1.0 - tail)))
}

/// Jackknife standard error of a statistic.
pub fn jackknife_se<F: Fn(&[f64]) -> f64>(data: &[f64], stat: F) -> Result<f64, StatsError> {
    if data.len() < 8 {
        return Err(StatsError::TooFew { got: data.len(), need: 8 });
    }
    let n = data.len();
    let mut loo = Vec::with_capacity(n);
    let mut scratch = Vec::with_capacity(n - 1);
    for i in 0..n {
        scratch.clear();
        scratch.extend_from_slice(&data[..i]);
        scratch.extend_from_slice(&data[i + 1..]);
        loo.push(stat(&scratch));
    }
    let m = mean(&loo);
    let ss: f64 = loo.iter().map(|v| (v - m) * (v - m)).sum();
    Ok(((n - 1) as f64 / n as f64 * ss).sqrt())
}

/// Dyadic lags 1, 2, 4, ... capped so the largest stays below n_points/4.
pub fn dyadic_lags(n_points: usize, count: usize) -> Vec<usize> {
    let mut lags = Vec::new();
    let mut lag = 1usize;
    while lags.len() < count && lag <= n_points / 4 {
        lags.push(lag);
        lag *= 2;
    }
    lags
}

#[derive(Clone, Debug)]
pub struct HolderFit {
    pub alpha: f64,
    pub ci: (f64, f64),
    pub lags: Vec<usize>,
    pub log_lag: Vec<f64>,
    pub log_mean_max: Vec<f64>,
}

/// Hölder exponent from the scaling of maximal increments: for each dyadic
/// lag the max |x_{i+lag} - x_i| per path is averaged across paths, and the
/// slope of log mean-max against log lag estimates alpha. The bootstrap CI
/// resamples whole paths.
pub fn holder_exponent(
    paths: &[Vec<f64>],
    dt: f64,
    lags: &[usize],
    resamples: u32,
    seed: u64,
) -> Result<HolderFit, StatsError> {
    if paths.is_empty() {
        return Err(StatsError::TooFew { got: 0, need: 1 });
    }
    let len = paths[0].len();
    if len < 33 {
        return Err(StatsError::BadInput("grid too coarse: need at least 33 points"));
    }
    if paths.iter().any(|p| p.len() != len) {
        return Err(StatsError::BadInput("paths must share a grid"));
    }
    if lags.len() < 2 || lags.iter().any(|&l| l == 0 || l >= len) {
        return Err(StatsError::BadInput("need two or more lags below the grid length"));
    }
    // max increment per (path, lag)
    let maxes: Vec<Vec<f64>> = paths
        .iter()
        .map(|p| {
            lags.iter()
                .map(|&lag| {
                    let mut m = 0.0f64;
                    for i in 0..(p.len() - lag) {
                        m = m.max((p[i + lag] - p[i]).abs());
                    }
                    m
                })
                .collect()
        })
        .collect();
    let log_lag: Vec<f64> = lags.iter().map(|&l| (l as f64 * dt).ln()).collect();
    let slope_of = |idx: &[usize]| -> f64 {
        let log_mean: Vec<f64> = (0..lags.len())
            .map(|k| {
                let s: f64 = idx.iter().map(|&i| maxes[i][k]).sum();
                (s / idx.len() as f64).ln()
            })
            .collect();
        ols(&log_lag, &log_mean).0
    };
    let all: Vec<usize> = (0..paths.len()).collect();
    let alpha = slope_of(&all);
    let log_mean_max: Vec<f64> = (0..lags.len())
        .map(|k| {
            let s: f64 = maxes.iter().map(|m| m[k]).sum();
            (s / paths.len() as f64).ln()
        })
        .collect();

    let mut rng = rng_for(seed);
    let mut boots = Vec::with_capacity(resamples as usize);
    let mut idx = vec![0usize; paths.len()];
    for _ in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = rng.gen_range(0..paths.len());
        }
        boots.push(slope_of(&idx));
    }
    boots.sort_by(|a, b| a.partial_cmp(b).expect("NaN bootstrap slope"));
    let q = |p: f64| boots[((p * (boots.len() - 1) as f64).round() as usize).min(boots.len() - 1)];
    Ok(HolderFit {
        alpha,
        ci: (q(0.025), q(0.975)),
        lags: lags.to_vec(),
        log_lag,
        log_mean_max,
    })
}
