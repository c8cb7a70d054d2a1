//! Statistical reports over replica ensembles: Kolmogorov-Smirnov wrappers
//! with the sample-size preconditions of the verification suite, Hölder
//! exponent fits, diffusion-constant estimation, and the moment-growth
//! envelope monitor.

use crate::HarnessError;
use rangelab_core::stats::{
    holder_exponent, jackknife_se, ks_one_sample, ks_two_sample, lilliefors_normal, mean,
    variance, HolderFit,
};
use serde::{Deserialize, Serialize};

/// Minimum ensemble size any distributional report accepts.
pub const MIN_KS_SAMPLES: usize = 50;
pub const MIN_HOLDER_PATHS: usize = 100;
pub const MIN_HOLDER_POINTS: usize = 32;

/// Outcome of one statistical check, serializable into run artifacts.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StatReport {
    pub name: String,
    pub statistic: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    /// Deterministic bound checks store the bound instead of a p-value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    pub passed: bool,
    pub samples: Vec<usize>,
}

impl StatReport {
    pub fn one_line(&self) -> String {
        let crit = match (self.p_value, self.bound) {
            (Some(p), _) => format!("p = {p:.4}"),
            (None, Some(b)) => format!("bound = {b:.3e}"),
            (None, None) => String::new(),
        };
        format!(
            "{}: statistic {:.4} {} [{}]",
            self.name,
            self.statistic,
            crit,
            if self.passed { "ok" } else { "REJECT" }
        )
    }
}

/// Reference distribution of a KS check.
pub enum KsReference<'a> {
    /// Fully specified CDF.
    Cdf(&'a dyn Fn(f64) -> f64),
    /// Normal with location and scale fitted from the sample itself; the
    /// Lilliefors correction replaces the Kolmogorov p-value.
    FittedNormal,
    TwoSample(&'a [f64]),
}

/// KS test with the harness preconditions: at least `MIN_KS_SAMPLES` on
/// every side. `passed` means p > `p_accept`.
pub fn ks_report(
    name: &str,
    samples: &[f64],
    reference: KsReference,
    p_accept: f64,
) -> Result<StatReport, HarnessError> {
    if samples.len() < MIN_KS_SAMPLES {
        return Err(HarnessError::TooFewSamples { got: samples.len(), need: MIN_KS_SAMPLES });
    }
    let (statistic, p_value, sizes) = match reference {
        KsReference::Cdf(cdf) => {
            let r = ks_one_sample(samples, cdf)?;
            (r.statistic, r.p_value, vec![samples.len()])
        }
        KsReference::FittedNormal => {
            let r = lilliefors_normal(samples)?;
            (r.statistic, r.p_value, vec![samples.len()])
        }
        KsReference::TwoSample(other) => {
            if other.len() < MIN_KS_SAMPLES {
                return Err(HarnessError::TooFewSamples {
                    got: other.len(),
                    need: MIN_KS_SAMPLES,
                });
            }
            let r = ks_two_sample(samples, other)?;
            (r.statistic, r.p_value, vec![samples.len(), other.len()])
        }
    };
    Ok(StatReport {
        name: name.into(),
        statistic,
        p_value: Some(p_value),
        bound: None,
        passed: p_value > p_accept,
        samples: sizes,
    })
}

/// Hölder exponent fit over an ensemble of paths sampled on one common
/// uniform grid, with the window check used by the path-regularity
/// criterion. `passed` means the point estimate lies inside `window`.
pub fn holder_report(
    name: &str,
    rows: &[Vec<f64>],
    dt: f64,
    lags: &[usize],
    window: (f64, f64),
    resamples: u32,
    seed: u64,
) -> Result<(StatReport, HolderFit), HarnessError> {
    if rows.len() < MIN_HOLDER_PATHS {
        return Err(HarnessError::TooFewSamples { got: rows.len(), need: MIN_HOLDER_PATHS });
    }
    let points = rows.first().map_or(0, |r| r.len());
    if points < MIN_HOLDER_POINTS {
        return Err(HarnessError::TooFewSamples { got: points, need: MIN_HOLDER_POINTS });
    }
    let fit = holder_exponent(rows, dt, lags, resamples, seed)?;
    let passed = fit.alpha > window.0 && fit.alpha < window.1;
    let report = StatReport {
        name: name.into(),
        statistic: fit.alpha,
        p_value: None,
        bound: Some(window.1),
        passed,
        samples: vec![rows.len(), points],
    };
    Ok((report, fit))
}

/// Diffusion-constant estimate from raw range rows of one diffusive-regime
/// ensemble (rows[r][k] = interpolated range at `t_grid[k] * n`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sigma2Report {
    /// Var(R_n)/n at the full horizon.
    pub sigma2: f64,
    /// Jackknife 95% interval of `sigma2`.
    pub ci: (f64, f64),
    /// Same estimate from the half-horizon column, Var(R_{n/2})/(n/2).
    pub half_sigma2: f64,
    /// Half-horizon agreement within the configured tolerance.
    pub stable: bool,
    /// Worst relative error of Cov(path(s), path(t)) against
    /// sigma2 * min(s, t) over the probe grid.
    pub cov_max_rel_err: f64,
    pub cov_ok: bool,
    pub replicas: usize,
}

/// Probe times of the covariance structure check.
pub const SIGMA2_PROBE: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

pub fn estimate_sigma2(
    rows: &[Vec<f64>],
    t_grid: &[f64],
    n: u64,
    tol: f64,
) -> Result<Sigma2Report, HarnessError> {
    if rows.len() < MIN_KS_SAMPLES {
        return Err(HarnessError::TooFewSamples { got: rows.len(), need: MIN_KS_SAMPLES });
    }
    let col = |t: f64| -> Result<Vec<f64>, HarnessError> {
        let k = t_grid
            .iter()
            .position(|&g| (g - t).abs() < 1e-9)
            .ok_or_else(|| HarnessError::BadConfig(format!("probe time {t} not on the grid")))?;
        Ok(rows.iter().map(|r| r[k]).collect())
    };
    let nf = n as f64;
    let full = col(1.0)?;
    let sigma2 = variance(&full) / nf;
    let se = jackknife_se(&full, |xs| variance(xs) / nf)?;
    let ci = (sigma2 - 1.96 * se, sigma2 + 1.96 * se);

    let half = col(0.5)?;
    let half_sigma2 = variance(&half) / (nf / 2.0);
    let stable = (half_sigma2 / sigma2 - 1.0).abs() <= tol;

    // Brownian structure: Cov(R_{ns}, R_{nt})/n ~ sigma2 * min(s, t).
    let mut cov_max_rel_err = 0.0f64;
    for (i, &s) in SIGMA2_PROBE.iter().enumerate() {
        let xs = col(s)?;
        let mx = mean(&xs);
        for &t in &SIGMA2_PROBE[i..] {
            let ys = col(t)?;
            let my = mean(&ys);
            let mut c = 0.0;
            for (x, y) in xs.iter().zip(&ys) {
                c += (x - mx) * (y - my);
            }
            c /= (rows.len() - 1) as f64 * nf;
            let want = sigma2 * s.min(t);
            cov_max_rel_err = cov_max_rel_err.max((c - want).abs() / want);
        }
    }
    let cov_ok = cov_max_rel_err <= tol;
    Ok(Sigma2Report {
        sigma2,
        ci,
        half_sigma2,
        stable,
        cov_max_rel_err,
        cov_ok,
        replicas: rows.len(),
    })
}

/// Fitted constant of the centered-moment growth bound
/// E[{I}^{2p}] <= (p!)^2 K (E[I])^{2p}, per horizon.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnvelopeK {
    pub n: u64,
    pub k_fitted: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentEnvelopeReport {
    pub p: u32,
    pub per_n: Vec<EnvelopeK>,
    /// max/min of the fitted constants across horizons.
    pub drift_ratio: f64,
    /// Set when the fitted constant drifts beyond the allowed ratio,
    /// signalling that no single K serves every horizon.
    pub flagged: bool,
}

/// Fits K(n) from intersection-count samples at several horizons and flags
/// drift. Sample values are raw counts; centering uses the sample mean.
pub fn moment_envelope(
    samples_by_n: &[(u64, Vec<f64>)],
    p: u32,
    max_drift: f64,
) -> Result<MomentEnvelopeReport, HarnessError> {
    if samples_by_n.is_empty() {
        return Err(HarnessError::TooFewSamples { got: 0, need: 1 });
    }
    let mut per_n = Vec::with_capacity(samples_by_n.len());
    for (n, xs) in samples_by_n {
        if xs.len() < MIN_KS_SAMPLES {
            return Err(HarnessError::TooFewSamples { got: xs.len(), need: MIN_KS_SAMPLES });
        }
        let m1 = mean(xs);
        if !(m1 > 0.0) {
            return Err(HarnessError::BadConfig("intersection means must be positive".into()));
        }
        let centered_moment = mean(
            &xs.iter().map(|x| (x - m1).powi(2 * p as i32)).collect::<Vec<f64>>(),
        );
        let p_fact: f64 = (1..=p).map(|k| k as f64).product();
        let k_fitted = centered_moment / (p_fact * p_fact * m1.powi(2 * p as i32));
        per_n.push(EnvelopeK { n: *n, k_fitted });
    }
    let max = per_n.iter().map(|e| e.k_fitted).fold(f64::MIN, f64::max);
    let min = per_n.iter().map(|e| e.k_fitted).fold(f64::MAX, f64::min);
    let drift_ratio = max / min;
    Ok(MomentEnvelopeReport { p, per_n, drift_ratio, flagged: drift_ratio > max_drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rangelab_core::stats::normal_cdf;
    use rangelab_core::walks::rng_for;
    use statrs::distribution::Normal;

    #[test]
    fn ks_report_requires_fifty_samples() {
        let xs = vec![0.5; 49];
        assert!(matches!(
            ks_report("small", &xs, KsReference::FittedNormal, 0.01),
            Err(HarnessError::TooFewSamples { need: 50, .. })
        ));
    }

    /// Calibration: under the null, rejection at level 0.05 should happen
    /// for roughly 5% of trials.
    #[test]
    fn ks_rejection_rate_is_calibrated() {
        let mut rng = rng_for(1001);
        let mut rejections = 0;
        let trials = 500;
        for _ in 0..trials {
            let xs: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
            let rep = ks_report("unif", &xs, KsReference::Cdf(&|x| x.clamp(0.0, 1.0)), 0.05)
                .unwrap();
            if !rep.passed {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / trials as f64;
        assert!((0.03..=0.07).contains(&rate), "rejection rate {rate}");
    }

    /// Power: a half-sigma location shift at n = 1000 per side is detected
    /// overwhelmingly.
    #[test]
    fn ks_two_sample_power() {
        let nd = Normal::new(0.0, 1.0).unwrap();
        let mut rng = rng_for(1002);
        let a: Vec<f64> = (0..1000).map(|_| rng.sample(nd)).collect();
        let b: Vec<f64> = (0..1000).map(|_| rng.sample(nd) + 0.5).collect();
        let rep = ks_report("shift", &a, KsReference::TwoSample(&b), 0.01).unwrap();
        assert!(!rep.passed);
        assert!(rep.p_value.unwrap() < 1e-6);
        assert_eq!(rep.samples, vec![1000, 1000]);
    }

    #[test]
    fn ks_one_sample_accepts_its_own_cdf() {
        let nd = Normal::new(0.0, 2.0).unwrap();
        let mut rng = rng_for(1003);
        let xs: Vec<f64> = (0..400).map(|_| rng.sample(nd)).collect();
        let rep =
            ks_report("own", &xs, KsReference::Cdf(&|x| normal_cdf(x, 0.0, 2.0)), 0.01).unwrap();
        assert!(rep.passed, "{}", rep.one_line());
    }

    /// Synthetic Brownian rows: sigma2 recovers the diffusion constant, the
    /// half-horizon check holds, and the covariance probe matches min(s,t).
    #[test]
    fn sigma2_recovers_brownian_structure() {
        let nd = Normal::new(0.0, 1.0).unwrap();
        let sigma = 3.0f64;
        let n = 10_000u64;
        let t_grid: Vec<f64> = (0..=16).map(|k| k as f64 / 16.0).collect();
        let mut rng = rng_for(1004);
        let rows: Vec<Vec<f64>> = (0..600)
            .map(|_| {
                let mut v = vec![0.0];
                for _ in 0..16 {
                    let dt = n as f64 / 16.0;
                    let prev = *v.last().unwrap();
                    v.push(prev + sigma * dt.sqrt() * rng.sample(nd));
                }
                v
            })
            .collect();
        let rep = estimate_sigma2(&rows, &t_grid, n, 0.10).unwrap();
        assert!((rep.sigma2 / (sigma * sigma) - 1.0).abs() < 0.15, "sigma2 {}", rep.sigma2);
        assert!(rep.stable);
        assert!(rep.cov_ok, "cov err {}", rep.cov_max_rel_err);
        assert!(rep.ci.0 < rep.sigma2 && rep.sigma2 < rep.ci.1);
    }

    #[test]
    fn sigma2_needs_probe_times_on_grid() {
        let rows = vec![vec![0.0, 1.0]; 60];
        let err = estimate_sigma2(&rows, &[0.0, 1.0], 100, 0.1);
        assert!(matches!(err, Err(HarnessError::BadConfig(_))));
    }

    /// Gaussian samples: E{Z}^{2p} = (2p-1)!! sigma^{2p}, so K(n) is flat in
    /// n and far below the factorial envelope.
    #[test]
    fn moment_envelope_is_stable_for_gaussian_counts() {
        let nd = Normal::new(0.0, 1.0).unwrap();
        let mut rng = rng_for(1005);
        let mut sample = |mu: f64, sd: f64| -> Vec<f64> {
            (0..4000).map(|_| mu + sd * rng.sample(nd)).collect()
        };
        let by_n = vec![(1024u64, sample(50.0, 5.0)), (4096, sample(200.0, 20.0))];
        let rep = moment_envelope(&by_n, 2, 4.0).unwrap();
        assert!(!rep.flagged, "drift {}", rep.drift_ratio);
        assert!(rep.per_n.iter().all(|e| e.k_fitted <= 1.0));
    }
}
