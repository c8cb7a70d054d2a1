//! Energy functionals of the range: weighted sums over site-discovery
//! times, their interpolated counterparts, regime rescaling, and samplers
//! for the limiting weighted integrals.
//!
//! The discrete energy at time t is sum m(t - tau) over discovery times
//! tau <= t. The interpolated form integrates m(t - s) against the
//! interpolated range, which spreads each discovery over the unit step
//! leading up to it; under a constant kernel both reduce to the (shifted)
//! range itself.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rangekit::RangeProcess;
use crate::regvar::{KernelSpec, Regime, RegvarError, ScaleSuite};
use crate::walks::{replica_seed, rng_for};
use crate::youngint::{singular_kernel_integral, HolderPath, YoungError};

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error(transparent)]
    Regvar(#[from] RegvarError),
    #[error(transparent)]
    Young(#[from] YoungError),
    #[error("time {t} outside the path domain [0, {n}]")]
    OutOfDomain { t: f64, n: u64 },
    #[error("kernel index {chi_m} not integrable against this regime (needs > {threshold})")]
    Inadmissible { chi_m: f64, threshold: f64 },
    #[error("no limit paths supplied")]
    MissingPaths,
    #[error("bad time grid: {0}")]
    BadGrid(&'static str),
}

/// Discrete energy sum m(t - tau) over discovery times tau <= t, in walk
/// time.
pub fn energy_discrete(
    rp: &RangeProcess,
    kernel: &KernelSpec,
    t: f64,
) -> Result<f64, EnergyError> {
    if !(t >= 0.0 && t <= rp.n() as f64) {
        return Err(EnergyError::OutOfDomain { t, n: rp.n() });
    }
    let mut total = 0.0;
    for &tau in rp.discovery_times() {
        let tau = tau as f64;
        if tau > t {
            break;
        }
        total += kernel.eval(t - tau);
    }
    Ok(total)
}

/// Interpolated energy: the integral of m(t - s) against the interpolated
/// range. Each discovery at tau contributes M(t - tau + 1) - M(t - tau)
/// (clipped at s = t), with M the kernel antiderivative.
pub fn energy_interpolated(
    rp: &RangeProcess,
    kernel: &KernelSpec,
    t: f64,
) -> Result<f64, EnergyError> {
    if !(t >= 0.0 && t <= rp.n() as f64) {
        return Err(EnergyError::OutOfDomain { t, n: rp.n() });
    }
    let mut total = 0.0;
    for &tau in rp.discovery_times() {
        let tau = tau as f64;
        if tau - 1.0 >= t {
            break;
        }
        total += kernel.antiderivative(t - tau + 1.0) - kernel.antiderivative(t - tau.min(t));
    }
    Ok(total)
}

/// The strict lower bound on the kernel index chi_m for the limiting
/// weighted integral to exist, set by the Hölder regularity of the
/// regime's limit path.
pub fn kernel_threshold(suite: &ScaleSuite) -> f64 {
    match suite.regime() {
        Regime::Sup => -0.5,
        Regime::Mid => suite.d() as f64 / suite.beta() - 2.0,
        Regime::Sub => -1.0 / suite.beta(),
    }
}

/// One rescaled energy observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub value: f64,
    pub t: f64,
    pub n: u64,
    pub seed: u64,
}

/// Rescaled interpolated energy S(n)/m(n) * E(n t), the quantity whose
/// centered ensemble converges to the limiting weighted integral. Errors
/// when the kernel index is below the regime's admissibility threshold.
pub fn rescaled_energy(
    rp: &RangeProcess,
    suite: &ScaleSuite,
    kernel: &KernelSpec,
    n: u64,
    t: f64,
) -> Result<f64, EnergyError> {
    let threshold = kernel_threshold(suite);
    if !(kernel.chi_m > threshold) {
        return Err(EnergyError::Inadmissible { chi_m: kernel.chi_m, threshold });
    }
    let walk_time = n as f64 * t;
    if walk_time > rp.n() as f64 {
        return Err(EnergyError::OutOfDomain { t: walk_time, n: rp.n() });
    }
    let raw = energy_interpolated(rp, kernel, walk_time)?;
    Ok(raw * suite.normalization(n) / kernel.eval(n as f64))
}

/// The weighted-integral identity evaluated segment by segment:
///
///   E(t) = m_n(t) f(t) - int_0^t (f(t) - f(t-s)) m_n'(s) ds
///
/// for a piecewise-linear f on a uniform grid with f(0) = 0, where
/// m_n(x) = m(n x)/m(n). Both the boundary part and the integral have
/// closed forms on each segment, so the returned value matches the direct
/// Stieltjes sum int m_n(t-s) df(s) to rounding accuracy.
pub fn energy_ibp_value(
    kernel: &KernelSpec,
    n: u64,
    dt: f64,
    f: &[f64],
) -> Result<f64, EnergyError> {
    if f.len() < 2 {
        return Err(EnergyError::BadGrid("need at least two values"));
    }
    if f[0] != 0.0 {
        return Err(EnergyError::BadGrid("identity requires f(0) = 0"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(EnergyError::BadGrid("grid step must be positive"));
    }
    let nf = n as f64;
    let m_at_n = kernel.eval(nf);
    let m_n = |x: f64| kernel.eval(nf * x) / m_at_n;
    // M_n(x) = int_0^x m_n = M(n x) / (n m(n))
    let m_n_anti = |x: f64| kernel.antiderivative(nf * x) / (nf * m_at_n);
    let k = f.len() - 1;
    let t = k as f64 * dt;
    let ft = f[k];
    let mut integral = 0.0;
    // segment s in [j dt, (j+1) dt]: f(t - s) is linear between the grid
    // values f[k-j] and f[k-j-1]
    for j in 0..k {
        let a = j as f64 * dt;
        let b = (j + 1) as f64 * dt;
        let fa = f[k - j];
        let fb = f[k - j - 1];
        let c1 = (fb - fa) / dt;
        let c0 = fa - c1 * a;
        let dm = m_n(b) - m_n(a);
        let s_dm = b * m_n(b) - a * m_n(a) - (m_n_anti(b) - m_n_anti(a));
        integral += (ft - c0) * dm - c1 * s_dm;
    }
    Ok(m_n(t) * ft - integral)
}

/// Uniform grid check shared by the limit samplers.
fn check_grid(t_grid: &[f64]) -> Result<(f64, f64), EnergyError> {
    if t_grid.len() < 2 {
        return Err(EnergyError::BadGrid("need at least two grid times"));
    }
    if t_grid[0] != 0.0 {
        return Err(EnergyError::BadGrid("grid must start at 0"));
    }
    let span = *t_grid.last().unwrap();
    if !(span > 0.0 && span.is_finite()) {
        return Err(EnergyError::BadGrid("grid must end at a positive time"));
    }
    let dt = span / (t_grid.len() - 1) as f64;
    for (k, &t) in t_grid.iter().enumerate() {
        if (t - k as f64 * dt).abs() > 1e-9 * span {
            return Err(EnergyError::BadGrid("grid must be uniform"));
        }
    }
    Ok((span, dt))
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.gen_range(-1.0..1.0);
        let v: f64 = rng.gen_range(-1.0..1.0);
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Fine-grid segments per requested grid interval in the Gaussian limit
/// sampler.
const GAUSSIAN_FINE_TARGET: usize = 2048;

/// Samples the diffusive-regime limit energy int_0^t (t-s)^chi dW jointly
/// over a uniform t grid: rows[r][k] uses one Brownian path per replica,
/// with exact segment-average weights, so the values at different t are
/// dependent the way the limit is. Requires chi > -1/2 for the variance
/// to exist.
pub fn limit_energy_gaussian(
    chi: f64,
    t_grid: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, EnergyError> {
    if !(chi > -0.5) || !chi.is_finite() {
        return Err(EnergyError::Inadmissible { chi_m: chi, threshold: -0.5 });
    }
    let (_, grid_dt) = check_grid(t_grid)?;
    let segments = t_grid.len() - 1;
    let per_seg = GAUSSIAN_FINE_TARGET.div_ceil(segments);
    let fine = per_seg * segments;
    let delta = grid_dt / per_seg as f64;
    let anti = |x: f64| x.powf(chi + 1.0) / (chi + 1.0);
    // weights[k-1][i]: segment average of (t_k - s)^chi on fine segment i
    let mut weights: Vec<Vec<f64>> = Vec::with_capacity(segments);
    for k in 1..=segments {
        let m = k * per_seg;
        let tk = t_grid[k];
        let row: Vec<f64> = (0..m)
            .map(|i| {
                let s0 = i as f64 * delta;
                let s1 = (i + 1) as f64 * delta;
                (anti(tk - s0) - anti(tk - s1.min(tk))) / delta
            })
            .collect();
        weights.push(row);
    }
    let mut rows = Vec::with_capacity(replicas);
    let sqrt_delta = delta.sqrt();
    for r in 0..replicas {
        let mut rng = rng_for(replica_seed(seed, r as u64));
        let dw: Vec<f64> = (0..fine).map(|_| sqrt_delta * standard_normal(&mut rng)).collect();
        let mut row = Vec::with_capacity(t_grid.len());
        row.push(0.0);
        for w in &weights {
            row.push(w.iter().zip(&dw).map(|(a, b)| a * b).sum());
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Limit energy through supplied limit-path surrogates: for each path g,
/// the singular-kernel integral int_0^t (t-s)^chi dg at every grid time.
/// This is the route for regimes whose limits are not Gaussian.
pub fn limit_energy_from_paths(
    chi: f64,
    paths: &[HolderPath],
    t_grid: &[f64],
) -> Result<Vec<Vec<f64>>, EnergyError> {
    if paths.is_empty() {
        return Err(EnergyError::MissingPaths);
    }
    check_grid(t_grid)?;
    paths
        .iter()
        .map(|g| {
            t_grid
                .iter()
                .map(|&t| singular_kernel_integral(g, chi, t).map_err(EnergyError::from))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rangekit::range_process;
    use crate::regvar::make_scale_suite;
    use crate::stats::{ks_one_sample, normal_cdf, variance};
    use crate::walks::{sample_path, PathSample, WalkSpec};

    fn path_1d(xs: &[i64]) -> PathSample {
        PathSample::from_positions(1, xs.to_vec(), 0).unwrap()
    }

    #[test]
    fn constant_kernel_reduces_to_range() {
        let kernel = KernelSpec::constant(3.0).unwrap();
        let spec = WalkSpec::lazy_srw(2, 0.5).unwrap();
        let path = sample_path(&spec, 512, 99).unwrap();
        let rp = range_process(&path).unwrap();
        for t in [0.0, 17.0, 100.5, 512.0] {
            let disc = energy_discrete(&rp, &kernel, t).unwrap();
            let want_disc = 3.0 * (rp.r_at(t.floor() as u64) as f64 - 1.0);
            assert!((disc - want_disc).abs() < 1e-9, "t={t}: {disc} vs {want_disc}");
            let interp = energy_interpolated(&rp, &kernel, t).unwrap();
            let want_interp = 3.0 * (rp.interpolate(t).unwrap() - 1.0);
            assert!((interp - want_interp).abs() < 1e-9, "t={t}: {interp} vs {want_interp}");
        }
        assert!(energy_discrete(&rp, &kernel, 513.0).is_err());
    }

    #[test]
    fn hand_path_energy_values() {
        // discoveries at tau = 1 and tau = 3
        let rp = range_process(&path_1d(&[0, 1, 0, 2])).unwrap();
        let kernel = KernelSpec::power_decay(1.0, 0.5).unwrap();
        let disc = energy_discrete(&rp, &kernel, 3.0).unwrap();
        let want = (1.0f64 + 2.0).powf(-0.5) + 1.0;
        assert!((disc - want).abs() < 1e-12);

        let m_anti = |x: f64| 2.0 * ((1.0 + x).sqrt() - 1.0);
        let interp = energy_interpolated(&rp, &kernel, 3.0).unwrap();
        let want = (m_anti(3.0) - m_anti(2.0)) + (m_anti(1.0) - m_anti(0.0));
        assert!((interp - want).abs() < 1e-12);

        // partial segment: tau = 3 only half entered at t = 2.5
        let interp = energy_interpolated(&rp, &kernel, 2.5).unwrap();
        let want = (m_anti(2.5) - m_anti(1.5)) + m_anti(0.5);
        assert!((interp - want).abs() < 1e-12);
    }

    /// The two energies differ by at most the kernel's total variation
    /// over [0, t], at most m(0) for the decreasing family.
    #[test]
    fn discrete_interpolated_gap_bound() {
        let spec = WalkSpec::lazy_srw(2, 0.5).unwrap();
        let kernel = KernelSpec::power_decay(2.5, 0.3).unwrap();
        for seed in 0..20u64 {
            let path = sample_path(&spec, 1024, seed).unwrap();
            let rp = range_process(&path).unwrap();
            for t in [64.0, 500.5, 1024.0] {
                let d = energy_discrete(&rp, &kernel, t).unwrap();
                let i = energy_interpolated(&rp, &kernel, t).unwrap();
                assert!((d - i).abs() <= 2.5 + 1e-9, "seed {seed} t {t}: |{d} - {i}|");
            }
        }
    }

    /// Segment-exact equality of the direct Stieltjes sum and the
    /// boundary-minus-increment form, on sampled walks under both a
    /// constant and a decaying kernel.
    #[test]
    fn ibp_identity_matches_direct_energy() {
        let spec = WalkSpec::lazy_srw(2, 0.5).unwrap();
        let n = 2048u64;
        let suite = make_scale_suite(&spec, n).unwrap();
        let kernels = [
            KernelSpec::constant(1.0).unwrap(),
            KernelSpec::power_decay(1.0, 0.3).unwrap(),
            KernelSpec::power_decay(0.7, 0.8).unwrap(),
        ];
        for seed in 200..220u64 {
            let path = sample_path(&spec, n, seed).unwrap();
            let rp = range_process(&path).unwrap();
            let scale = suite.normalization(n);
            let f: Vec<f64> = (0..=n).map(|k| scale * (rp.r_at(k) as f64 - 1.0)).collect();
            for kernel in &kernels {
                let direct = rescaled_energy(&rp, &suite, kernel, n, 1.0).unwrap();
                let via_ibp = energy_ibp_value(kernel, n, 1.0 / n as f64, &f).unwrap();
                let tol = 1e-8 * direct.abs().max(1.0);
                assert!(
                    (direct - via_ibp).abs() < tol,
                    "seed {seed} chi_m {}: {direct} vs {via_ibp}",
                    kernel.chi_m
                );
            }
        }
    }

    #[test]
    fn admissibility_gates_by_regime() {
        let sup = make_scale_suite(&WalkSpec::srw(4).unwrap(), 1024).unwrap();
        assert_eq!(kernel_threshold(&sup), -0.5);
        let mid = make_scale_suite(&WalkSpec::lazy_srw(2, 0.5).unwrap(), 1024).unwrap();
        assert!((kernel_threshold(&mid) - (-1.0)).abs() < 1e-12);
        let sub = make_scale_suite(&WalkSpec::srw(1).unwrap(), 1024).unwrap();
        assert!((kernel_threshold(&sub) - (-0.5)).abs() < 1e-12);

        let spec = WalkSpec::srw(4).unwrap();
        let path = sample_path(&spec, 1024, 3).unwrap();
        let rp = range_process(&path).unwrap();
        let too_steep = KernelSpec::power_decay(1.0, 0.6).unwrap();
        assert!(matches!(
            rescaled_energy(&rp, &sup, &too_steep, 1024, 1.0),
            Err(EnergyError::Inadmissible { .. })
        ));
        let fine = KernelSpec::power_decay(1.0, 0.25).unwrap();
        assert!(rescaled_energy(&rp, &sup, &fine, 1024, 1.0).is_ok());
    }

    /// The Gaussian sampler must reproduce Var = t^(2 chi + 1)/(2 chi + 1)
    /// and pass a distributional normality check.
    #[test]
    fn gaussian_sampler_distribution() {
        for &chi in &[0.0, -0.25] {
            let rows = limit_energy_gaussian(chi, &[0.0, 1.0, 2.0], 4000, 7_000 + chi.to_bits())
                .unwrap();
            let at1: Vec<f64> = rows.iter().map(|r| r[1]).collect();
            let at2: Vec<f64> = rows.iter().map(|r| r[2]).collect();
            let var_want = 1.0 / (2.0 * chi + 1.0);
            let v1 = variance(&at1);
            assert!(
                (v1 / var_want - 1.0).abs() < 0.08,
                "chi {chi}: var {v1} vs {var_want}"
            );
            let ratio_want = 2.0f64.powf(2.0 * chi + 1.0);
            let v2 = variance(&at2);
            assert!(
                (v2 / v1 / ratio_want - 1.0).abs() < 0.12,
                "chi {chi}: ratio {} vs {ratio_want}",
                v2 / v1
            );
            let sd = v1.sqrt();
            let ks = ks_one_sample(&at1, |x| normal_cdf(x, 0.0, sd)).unwrap();
            assert!(ks.p_value > 0.01, "chi {chi}: normality p {}", ks.p_value);
        }
        assert!(limit_energy_gaussian(-0.5, &[0.0, 1.0], 100, 1).is_err());
        assert!(limit_energy_gaussian(0.0, &[0.5, 1.0], 100, 1).is_err());
    }

    /// Against a known path the path-based sampler is a plain singular
    /// integral: for g(s) = s, int (t-s)^chi ds = t^(chi+1)/(chi+1).
    #[test]
    fn path_sampler_matches_linear_oracle() {
        let g = HolderPath::from_fn(1.0, 4096, 1.0, |s| s).unwrap();
        let chi = -0.25;
        let rows = limit_energy_from_paths(chi, &[g], &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(rows.len(), 1);
        for (k, &t) in [0.0, 0.5f64, 1.0].iter().enumerate() {
            let want = if t == 0.0 { 0.0 } else { t.powf(chi + 1.0) / (chi + 1.0) };
            assert!(
                (rows[0][k] - want).abs() < 1e-6,
                "t={t}: {} vs {want}",
                rows[0][k]
            );
        }
        assert!(matches!(
            limit_energy_from_paths(chi, &[], &[0.0, 1.0]),
            Err(EnergyError::MissingPaths)
        ));
    }
}
