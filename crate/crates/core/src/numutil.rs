//! Small numeric helpers shared across modules: compensated summation,
//! deterministic 64-bit mixing, Gauss-Legendre nodes and Hurwitz zeta.

/// Neumaier variant of Kahan summation. Keeps long scale-function sums
/// accurate to a few ulps regardless of term ordering.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// SplitMix64 step: advances the state and returns the mixed output.
/// Used for counter-based replica seeding so that replica streams are
/// independent of execution order.
#[inline]
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless mix of a single word (SplitMix64 finalizer).
#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut s = x;
    splitmix64(&mut s)
}

/// Nodes and weights of the Gauss-Legendre rule on [-1, 1], computed by
/// Newton iteration on the Legendre recurrence. Exact for polynomials of
/// degree 2n-1; n up to a few hundred is well-conditioned.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature order must be positive");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_pd(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Legendre polynomial P_n and its derivative at x (n >= 1, |x| < 1).
fn legendre_pd(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Hurwitz zeta ζ(s, a) = Σ_{k≥0} (a+k)^{-s} for s > 1, a > 0.
///
/// Euler-Maclaurin with the head summed until the argument reaches 32;
/// absolute error stays below 1e-14 for s in (1, 8].
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0 && a > 0.0, "hurwitz_zeta domain: s > 1, a > 0");
    const SHIFT: f64 = 32.0;
    let mut head = CompensatedSum::new();
    let mut x = a;
    while x < SHIFT {
        head.add(x.powf(-s));
        x += 1.0;
    }
    let inv = 1.0 / x;
    let xs = x.powf(-s);
    // x^{1-s}/(s-1) + x^{-s}/2 + Σ_j B_{2j}/(2j)! (s)_{2j-1} x^{-s-2j+1}
    let mut tail = xs * x / (s - 1.0) + 0.5 * xs;
    let coeffs = [
        1.0 / 12.0,          // B_2 / 2!
        -1.0 / 720.0,        // B_4 / 4!
        1.0 / 30240.0,       // B_6 / 6!
        -1.0 / 1_209_600.0,  // B_8 / 8!
    ];
    let mut rising = s; // s, then s(s+1)(s+2), then s..(s+4), ...
    let mut power = xs * inv; // x^{-s-1}, then x^{-s-3}, ...
    for (j, cj) in coeffs.iter().enumerate() {
        tail += cj * rising * power;
        let k = (2 * j) as f64;
        rising *= (s + k + 1.0) * (s + k + 2.0);
        power *= inv * inv;
    }
    head.value() + tail
}

/// Riemann zeta ζ(s) for s > 1.
pub fn riemann_zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn compensated_sum_handles_cancellation() {
        let mut s = CompensatedSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(0.1);
        }
        s.add(-1e16);
        assert_relative_eq!(s.value(), 100.0, max_relative = 1e-12);
    }

    #[test]
    fn splitmix_reference_values() {
        // Reference output of the standard SplitMix64 sequence from seed 0.
        let mut s = 0u64;
        assert_eq!(splitmix64(&mut s), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(&mut s), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // ∫_{-1}^{1} x^14 dx = 2/15, degree 14 < 2*8
        let v: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(14)).sum();
        assert_relative_eq!(v, 2.0 / 15.0, max_relative = 1e-13);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn gauss_legendre_smooth_integrand() {
        let (x, w) = gauss_legendre(24);
        // ∫_{-1}^{1} cos x dx = 2 sin 1
        let v: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.cos()).sum();
        assert_relative_eq!(v, 2.0 * f64::sin(1.0), max_relative = 1e-14);
    }

    #[test]
    fn zeta_known_values() {
        assert_relative_eq!(riemann_zeta(2.0), PI * PI / 6.0, max_relative = 1e-13);
        assert_relative_eq!(riemann_zeta(4.0), PI.powi(4) / 90.0, max_relative = 1e-13);
        assert_relative_eq!(riemann_zeta(1.5), 2.612_375_348_685_488, max_relative = 1e-12);
    }

    #[test]
    fn hurwitz_matches_shifted_head() {
        // ζ(s, m+1) = ζ(s) - Σ_{k=1}^{m} k^{-s}
        let s = 2.2;
        let head: f64 = (1..=9).map(|k| (k as f64).powf(-s)).sum();
        assert_relative_eq!(
            hurwitz_zeta(s, 10.0),
            riemann_zeta(s) - head,
            max_relative = 1e-12
        );
    }
}
