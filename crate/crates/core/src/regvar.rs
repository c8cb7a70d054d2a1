//! Scale functions and regularly varying memory kernels.
//!
//! Every normalisation used downstream is collected in a `ScaleSuite`: the
//! attraction scale b(n), its slowly varying part s(n), the truncated Green
//! function h(n), the weight sum g(n) and the regime-dependent fluctuation
//! normalisation S(n). Suites are pure values after construction and can be
//! serialized to pin scale functions across experiment runs.
//!
//! The truncated Green function is the only expensive ingredient; it is
//! computed by exact lattice convolution where that is cheap, by graded
//! characteristic-function quadrature on the torus in low dimension, and by
//! Monte Carlo with a declared standard error otherwise. A cost budget
//! arbitrates, and exceeding it is a hard error rather than a silent
//! accuracy downgrade.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{SiteBuildHasher, SitePacker};
use crate::numutil::{gauss_legendre, CompensatedSum};
use crate::walks::{char_fn, replica_seed, walk_visit, IncrementLaw, WalkError, WalkSpec};

#[derive(Debug, Error)]
pub enum RegvarError {
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error("one-sided d=1 increments attract to a one-sided limit; unsupported")]
    OneSidedLimit,
    #[error("n_max {0} exceeds the supported table range 2^26")]
    BadNMax(u64),
    #[error("{what}: cost {required:.3e} exceeds the budget {budget:.3e}")]
    CostExceeded {
        what: &'static str,
        required: f64,
        budget: f64,
    },
    #[error("kernel amplitude must be positive and finite, got {0}")]
    BadAmplitude(f64),
    #[error("kernel decay exponent must be finite and nonnegative, got {0}")]
    BadDelta(f64),
    #[error("kernel table rejected: {0}")]
    BadKernelTable(&'static str),
    #[error("kernel evaluated at negative time {0}")]
    NegativeTime(f64),
    #[error("sample sequence rejected: {0}")]
    BadSamples(&'static str),
}

/// Work budget for Green-function construction, in elementary operations
/// (lattice cell updates, quadrature node visits, or walk steps).
#[derive(Clone, Copy, Debug)]
pub struct CostBudget {
    pub max_ops: f64,
}

impl Default for CostBudget {
    fn default() -> Self {
        Self { max_ops: 2e9 }
    }
}

/// Fluctuation regime, classified by the ratio d/beta.
///
/// `Sub` (d/beta < 1): the walk spends positive fraction of time at fresh
/// sites only in scale b(n); range fluctuations follow the local time of
/// the limit at zero. `Mid` (1 <= d/beta < 3/2): fluctuations are driven by
/// the renormalized self-intersection local time. `Sup` (d/beta >= 3/2):
/// central limit behaviour with Brownian limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "SUB")]
    Sub,
    #[serde(rename = "MID")]
    Mid,
    #[serde(rename = "SUP")]
    Sup,
}

impl Regime {
    pub fn classify(d: usize, beta: f64) -> Regime {
        let r = d as f64 / beta;
        if r < 1.0 {
            Regime::Sub
        } else if r < 1.5 {
            Regime::Mid
        } else {
            Regime::Sup
        }
    }

    /// Holder/intersection exponent chi associated with the regime.
    pub fn chi(d: usize, beta: f64) -> f64 {
        match Regime::classify(d, beta) {
            Regime::Sub => 1.0 / beta,
            Regime::Mid => 2.0 - d as f64 / beta,
            Regime::Sup => 0.5,
        }
    }
}

/// Monotone table with exact values at tabulated arguments and log-log
/// interpolation between them; queries beyond the last entry clamp to it.
#[derive(Clone, Debug, PartialEq)]
struct LogTable {
    pairs: Vec<(u64, f64)>,
}

impl LogTable {
    fn eval(&self, n: u64) -> f64 {
        let pairs = &self.pairs;
        debug_assert!(!pairs.is_empty());
        match pairs.binary_search_by_key(&n, |&(k, _)| k) {
            Ok(i) => pairs[i].1,
            Err(0) => pairs[0].1,
            Err(i) if i == pairs.len() => pairs[i - 1].1,
            Err(i) => {
                let (n0, v0) = pairs[i - 1];
                let (n1, v1) = pairs[i];
                if v0 <= 0.0 || v1 <= 0.0 {
                    // fall back to linear interpolation near zero values
                    let t = (n - n0) as f64 / (n1 - n0) as f64;
                    return v0 + t * (v1 - v0);
                }
                let lt = ((n as f64).ln() - (n0 as f64).ln())
                    / ((n1 as f64).ln() - (n0 as f64).ln());
                (v0.ln() + lt * (v1.ln() - v0.ln())).exp()
            }
        }
    }

}

/// Scale functions of a walk, valid on [1, n_max].
///
/// Serializes to a stable JSON document (keys: d, beta, regime, chi,
/// sigma_hat, h_table, g_table) so experiments can pin the functions used
/// by a run and reload them bit-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SuiteDoc", into = "SuiteDoc")]
pub struct ScaleSuite {
    d: usize,
    beta: f64,
    sigma_hat: f64,
    regime: Regime,
    chi: f64,
    h_tab: LogTable,
    g_tab: LogTable,
    n_max: u64,
}

#[derive(Serialize, Deserialize)]
struct SuiteDoc {
    d: usize,
    beta: f64,
    regime: Regime,
    chi: f64,
    sigma_hat: f64,
    h_table: Vec<(u64, f64)>,
    g_table: Vec<(u64, f64)>,
}

impl From<ScaleSuite> for SuiteDoc {
    fn from(s: ScaleSuite) -> Self {
        SuiteDoc {
            d: s.d,
            beta: s.beta,
            regime: s.regime,
            chi: s.chi,
            sigma_hat: s.sigma_hat,
            h_table: s.h_tab.pairs,
            g_table: s.g_tab.pairs,
        }
    }
}

impl TryFrom<SuiteDoc> for ScaleSuite {
    type Error = String;

    fn try_from(doc: SuiteDoc) -> Result<Self, String> {
        if doc.h_table.is_empty() || doc.g_table.is_empty() {
            return Err("scale tables must be nonempty".into());
        }
        let n_max = doc.g_table.last().unwrap().0;
        Ok(ScaleSuite {
            d: doc.d,
            beta: doc.beta,
            sigma_hat: doc.sigma_hat,
            regime: doc.regime,
            chi: doc.chi,
            h_tab: LogTable {
                pairs: doc.h_table,
            },
            g_tab: LogTable {
                pairs: doc.g_table,
            },
            n_max,
        })
    }
}

impl ScaleSuite {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    /// Attraction scale b(n) = sigma_hat * n^{1/beta}, defined for real
    /// n >= 0 so rescaled times can be queried directly.
    pub fn b(&self, n: f64) -> f64 {
        debug_assert!(n >= 0.0);
        self.sigma_hat * n.powf(1.0 / self.beta)
    }

    /// Slowly varying part s(n) with b(n) = n^{1/beta} s(n); constant for
    /// the built-in calibrated normalisation.
    pub fn s(&self, _n: f64) -> f64 {
        self.sigma_hat
    }

    /// Truncated Green function h(n) = Σ_{k<=n} P(X_k = 0).
    ///
    /// Exact at tabulated arguments; log-log interpolated between them. In
    /// transient dimensions the table may stop short of n_max, beyond which
    /// the value plateaus (h converges there; the omitted tail is the
    /// remaining return mass, documented by the construction budget).
    pub fn h(&self, n: u64) -> f64 {
        assert!(n >= 1 && n <= self.n_max, "h valid on [1, n_max]");
        self.h_tab.eval(n)
    }

    /// Weight sum g(n) = Σ_{k<=n} k^2 b(k)^{-2d}.
    pub fn g(&self, n: u64) -> f64 {
        assert!(n >= 1 && n <= self.n_max, "g valid on [1, n_max]");
        self.g_tab.eval(n)
    }

    /// Regime normalisation S(n) for centered range fluctuations.
    pub fn normalization(&self, n: u64) -> f64 {
        match self.regime {
            Regime::Sub => 1.0 / self.b(n as f64),
            Regime::Mid => {
                let h = self.h(n);
                h * h * self.b(n as f64).powi(self.d as i32) / (n as f64 * n as f64)
            }
            Regime::Sup => 1.0 / (n as f64 * self.g(n)).sqrt(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("suite serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Builds the scale suite of a walk on [1, n_max] with the default budget.
pub fn make_scale_suite(walk: &WalkSpec, n_max: u64) -> Result<ScaleSuite, RegvarError> {
    make_scale_suite_with_budget(walk, n_max, &CostBudget::default())
}

pub fn make_scale_suite_with_budget(
    walk: &WalkSpec,
    n_max: u64,
    budget: &CostBudget,
) -> Result<ScaleSuite, RegvarError> {
    walk.validate()?;
    if walk.is_one_sided() {
        return Err(RegvarError::OneSidedLimit);
    }
    if n_max == 0 || n_max > (1 << 26) {
        return Err(RegvarError::BadNMax(n_max));
    }
    let regime = Regime::classify(walk.dim, walk.beta);
    let chi = Regime::chi(walk.dim, walk.beta);
    let g_tab = LogTable {
        pairs: g_table(walk, n_max),
    };
    let h_tab = LogTable {
        pairs: h_table(walk, n_max, budget)?,
    };
    Ok(ScaleSuite {
        d: walk.dim,
        beta: walk.beta,
        sigma_hat: walk.sigma_hat,
        regime,
        chi,
        h_tab,
        g_tab,
        n_max,
    })
}

/// Grid with all integers up to `dense_to` and `per_octave` geometric
/// points per octave beyond, always ending exactly at n_max.
fn grid_points(n_max: u64, dense_to: u64, per_octave: u32) -> Vec<u64> {
    let dense_end = dense_to.min(n_max);
    let mut grid: Vec<u64> = (1..=dense_end).collect();
    if n_max > dense_end {
        let base = (dense_end as f64).log2();
        let step = 1.0 / per_octave as f64;
        let mut i = 1u32;
        loop {
            let n = 2f64.powf(base + i as f64 * step).round() as u64;
            if n >= n_max {
                break;
            }
            if n > *grid.last().unwrap() {
                grid.push(n);
            }
            i += 1;
        }
        grid.push(n_max);
    }
    grid
}

fn g_table(walk: &WalkSpec, n_max: u64) -> Vec<(u64, f64)> {
    let grid = grid_points(n_max, 4096, 16);
    let e = 2.0 - 2.0 * walk.dim as f64 / walk.beta;
    let c = walk.sigma_hat.powi(-2 * walk.dim as i32);
    let mut acc = CompensatedSum::new();
    let mut out = Vec::with_capacity(grid.len());
    let mut gi = 0usize;
    for k in 1..=n_max {
        acc.add(c * (k as f64).powf(e));
        if gi < grid.len() && grid[gi] == k {
            out.push((k, acc.value()));
            gi += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Truncated Green function
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GreenMethod {
    ExactConvolution,
    Quadrature,
    MonteCarlo { replicas: u64 },
}

/// Value of the truncated Green function, tagged with how it was obtained.
#[derive(Clone, Copy, Debug)]
pub struct Green {
    pub value: f64,
    /// Standard error when the value is a Monte Carlo estimate.
    pub std_error: Option<f64>,
    pub method: GreenMethod,
}

/// h(n) = Σ_{k=1}^n P(X_k = 0) with automatic method selection:
/// exact convolution for small n and d <= 3, characteristic-function
/// quadrature for d <= 2 axis-even laws, else Monte Carlo (>= 10^6
/// replicas). Exceeding the budget is an error.
pub fn green_truncated(walk: &WalkSpec, n: u64) -> Result<Green, RegvarError> {
    green_truncated_with_budget(walk, n, &CostBudget::default())
}

pub fn green_truncated_with_budget(
    walk: &WalkSpec,
    n: u64,
    budget: &CostBudget,
) -> Result<Green, RegvarError> {
    walk.validate()?;
    assert!(n >= 1);
    if let Some(atoms) = law_atoms(walk) {
        if n <= 64 && walk.dim <= 3 {
            let cost = conv_cost(walk.dim, &atoms, n);
            if cost <= budget.max_ops {
                let value = conv_green_series(walk.dim, &atoms, n)?.into_iter().sum();
                return Ok(Green {
                    value,
                    std_error: None,
                    method: GreenMethod::ExactConvolution,
                });
            }
        }
    }
    if walk.dim <= 2 && axis_even(walk) {
        let quad = TorusQuad::build(walk, n);
        return Ok(Green {
            value: quad.h_at(n),
            std_error: None,
            method: GreenMethod::Quadrature,
        });
    }
    let replicas: u64 = 1_000_000;
    let required = replicas as f64 * n as f64;
    if required > budget.max_ops {
        return Err(RegvarError::CostExceeded {
            what: "green_truncated monte carlo",
            required,
            budget: budget.max_ops,
        });
    }
    let est = mc_h_grid(walk, &[n], replicas)?;
    Ok(Green {
        value: est[0].1,
        std_error: Some(est[0].2),
        method: GreenMethod::MonteCarlo { replicas },
    })
}

/// Finite atom list of the law when one exists and is small.
fn law_atoms(walk: &WalkSpec) -> Option<Vec<(Vec<i64>, f64)>> {
    match &walk.law {
        IncrementLaw::Srw => {
            let p = 1.0 / (2 * walk.dim) as f64;
            let mut atoms = Vec::new();
            for axis in 0..walk.dim {
                for sign in [1i64, -1] {
                    let mut a = vec![0i64; walk.dim];
                    a[axis] = sign;
                    atoms.push((a, p));
                }
            }
            Some(atoms)
        }
        IncrementLaw::LazySrw { hold } => {
            let p = (1.0 - hold) / (2 * walk.dim) as f64;
            let mut atoms = vec![(vec![0i64; walk.dim], *hold)];
            if *hold == 0.0 {
                atoms.clear();
            }
            for axis in 0..walk.dim {
                for sign in [1i64, -1] {
                    let mut a = vec![0i64; walk.dim];
                    a[axis] = sign;
                    atoms.push((a, p));
                }
            }
            Some(atoms)
        }
        IncrementLaw::Custom { atoms } => {
            if atoms.len() <= 64 {
                Some(atoms.clone())
            } else {
                None
            }
        }
        IncrementLaw::DiscretePareto | IncrementLaw::ProductPareto => None,
    }
}

fn conv_cost(dim: usize, atoms: &[(Vec<i64>, f64)], n: u64) -> f64 {
    let r = atoms
        .iter()
        .flat_map(|(a, _)| a.iter().map(|c| c.unsigned_abs()))
        .max()
        .unwrap_or(0);
    let side = (2 * r * n + 1) as f64;
    side.powi(dim as i32) * n as f64 * atoms.len() as f64
}

/// P(X_k = 0) for k = 1..=n by sparse lattice convolution (exact up to
/// rounding).
fn conv_green_series(
    dim: usize,
    atoms: &[(Vec<i64>, f64)],
    n: u64,
) -> Result<Vec<f64>, RegvarError> {
    let packer = SitePacker::new(dim).map_err(|_| RegvarError::BadNMax(0))?;
    let origin = packer.pack(&vec![0i64; dim]).expect("origin packs");
    let mut cur: HashMap<u64, f64, SiteBuildHasher> = HashMap::default();
    cur.insert(origin, 1.0);
    let mut out = Vec::with_capacity(n as usize);
    let mut coords = vec![0i64; dim];
    let mut shifted = vec![0i64; dim];
    for _ in 1..=n {
        let mut next: HashMap<u64, f64, SiteBuildHasher> =
            HashMap::with_capacity_and_hasher(cur.len() * atoms.len(), Default::default());
        for (&key, &mass) in &cur {
            packer.unpack(key, &mut coords);
            for (a, p) in atoms {
                for (s, (c, da)) in shifted.iter_mut().zip(coords.iter().zip(a)) {
                    *s = c + da;
                }
                let k = packer
                    .pack(&shifted)
                    .expect("convolution stays inside the packed box");
                *next.entry(k).or_insert(0.0) += mass * p;
            }
        }
        out.push(next.get(&origin).copied().unwrap_or(0.0));
        cur = next;
    }
    Ok(out)
}

/// All built-in laws are even in each coordinate; custom laws are checked.
fn axis_even(walk: &WalkSpec) -> bool {
    match &walk.law {
        IncrementLaw::Srw
        | IncrementLaw::LazySrw { .. }
        | IncrementLaw::DiscretePareto
        | IncrementLaw::ProductPareto => true,
        IncrementLaw::Custom { atoms } => (0..walk.dim).all(|axis| {
            atoms.iter().all(|(a, p)| {
                let mut r = a.clone();
                r[axis] = -r[axis];
                atoms.iter().any(|(b, q)| *b == r && (q - p).abs() <= 1e-12)
            })
        }),
    }
}

/// Graded tensor quadrature on [0, pi]^d for axis-even laws: dyadic panels
/// refine toward the characteristic-function peak at the origin, with
/// Gauss-Legendre nodes per panel. The single-integral identity
/// h(n) = (2 pi)^{-d} ∫ φ (1 - φ^n) / (1 - φ) dx needs one pass per n and
/// the cached φ values are reused across the n-grid.
struct TorusQuad {
    phi: Vec<f64>,
    w: Vec<f64>,
}

impl TorusQuad {
    fn build(walk: &WalkSpec, n_max: u64) -> Self {
        use std::f64::consts::PI;
        let b_max = walk.b_scale(n_max as f64).max(2.0);
        let k0 = (((PI * b_max).log2().ceil() as i64) + 1).clamp(6, 20) as u32;
        // Periodic laws (plain SRW) have |φ| -> 1 at the far corner too, so
        // the grading must refine toward pi as well as toward 0.
        let corner = vec![PI; walk.dim];
        let k_pi = if char_fn(walk, &corner).0.abs() > 0.999 {
            k0
        } else {
            2
        };
        let mut bounds = vec![0.0];
        for i in (0..=k0).rev() {
            bounds.push(PI * 0.5 * 0.5f64.powi(i as i32));
        }
        for j in (1..=k_pi).rev() {
            bounds.push(PI - PI * 0.5 * 0.5f64.powi(j as i32));
        }
        bounds.push(PI);
        let panels = bounds.len() - 1;
        // spend the whole per-axis node budget of 256
        let g_order = (256 / panels).clamp(6, 20);
        let (gx, gw) = gauss_legendre(g_order);
        let mut xs = Vec::new();
        let mut ws = Vec::new();
        let mut push_panel = |a: f64, b: f64| {
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in gx.iter().zip(&gw) {
                xs.push(mid + half * x);
                ws.push(half * w);
            }
        };
        for p in bounds.windows(2) {
            push_panel(p[0], p[1]);
        }
        // tensor product over the dimension, φ cached per node
        let dim = walk.dim;
        let mut phi = Vec::new();
        let mut w = Vec::new();
        match dim {
            1 => {
                for (x, wx) in xs.iter().zip(&ws) {
                    phi.push(char_fn(walk, &[*x]).0);
                    w.push(*wx);
                }
            }
            2 => {
                for (x, wx) in xs.iter().zip(&ws) {
                    for (y, wy) in xs.iter().zip(&ws) {
                        phi.push(char_fn(walk, &[*x, *y]).0);
                        w.push(wx * wy);
                    }
                }
            }
            _ => unreachable!("quadrature is limited to d <= 2"),
        }
        // fold evenness and torus volume into the weights
        let scale = (2.0 / (2.0 * PI)).powi(dim as i32);
        for wi in &mut w {
            *wi *= scale;
        }
        TorusQuad { phi, w }
    }

    fn h_at(&self, n: u64) -> f64 {
        let n_i32 = i32::try_from(n).expect("quadrature horizon fits i32");
        let nf = n as f64;
        let mut acc = CompensatedSum::new();
        for (&phi, &w) in self.phi.iter().zip(&self.w) {
            let one_minus = 1.0 - phi;
            let val = if one_minus.abs() < 1e-9 {
                // series around φ = 1: (1 - φ^n)/(1 - φ) = n (1 - (n-1)(1-φ)/2 + ...)
                phi * nf * (1.0 - (nf - 1.0) * one_minus / 2.0)
            } else {
                phi * (1.0 - phi.powi(n_i32)) / one_minus
            };
            acc.add(w * val);
        }
        acc.value()
    }
}

/// Monte Carlo estimate of h at several horizons in one streaming pass per
/// replica; returns (n, estimate, standard error) per grid point.
fn mc_h_grid(
    walk: &WalkSpec,
    grid: &[u64],
    replicas: u64,
) -> Result<Vec<(u64, f64, f64)>, RegvarError> {
    debug_assert!(grid.windows(2).all(|w| w[0] < w[1]));
    let n_top = *grid.last().expect("nonempty grid");
    let seed_base = walk.fingerprint() ^ 0x9E3779B97F4A7C15;
    let mut sums = vec![0.0f64; grid.len()];
    let mut sumsq = vec![0.0f64; grid.len()];
    let mut cum = vec![0u64; grid.len()];
    for r in 0..replicas {
        cum.iter_mut().for_each(|c| *c = 0);
        let mut returns = 0u64;
        let mut gi = 0usize;
        walk_visit(walk, n_top, replica_seed(seed_base, r), |i, pos| {
            if i >= 1 && pos.iter().all(|&c| c == 0) {
                returns += 1;
            }
            if gi < grid.len() && i == grid[gi] {
                cum[gi] = returns;
                gi += 1;
            }
        })?;
        for (i, &c) in cum.iter().enumerate() {
            let x = c as f64;
            sums[i] += x;
            sumsq[i] += x * x;
        }
    }
    let m = replicas as f64;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mean = sums[i] / m;
            let var = (sumsq[i] / m - mean * mean).max(0.0);
            (n, mean, (var / m).sqrt())
        })
        .collect())
}

/// h-table on the standard grid. Quadrature covers the whole grid in d <= 2
/// for axis-even laws; otherwise exact convolution handles a short dense
/// prefix and Monte Carlo a budget-limited horizon (the table then stops
/// early and h plateaus, appropriate in transient dimensions).
fn h_table(
    walk: &WalkSpec,
    n_max: u64,
    budget: &CostBudget,
) -> Result<Vec<(u64, f64)>, RegvarError> {
    let grid = grid_points(n_max, 64, 16);
    if walk.dim <= 2 && axis_even(walk) {
        let quad = TorusQuad::build(walk, n_max);
        let mut pairs: Vec<(u64, f64)> = grid.iter().map(|&n| (n, quad.h_at(n))).collect();
        // h is a running sum of probabilities: nonnegative and
        // nondecreasing. Clamp out quadrature noise at the 1e-12 scale so
        // the table keeps those exact properties.
        let mut run = 0.0f64;
        for p in &mut pairs {
            run = run.max(p.1);
            p.1 = run;
        }
        return Ok(pairs);
    }
    let mut out: Vec<(u64, f64)> = Vec::new();
    let mut conv_end = 0u64;
    if let Some(atoms) = law_atoms(walk) {
        // dense exact prefix while each convolution step stays cheap
        let mut n_dense = 64u64.min(n_max);
        while n_dense > 1 && conv_cost(walk.dim, &atoms, n_dense) > 5e7 {
            n_dense /= 2;
        }
        if n_dense >= 1 {
            let series = conv_green_series(walk.dim, &atoms, n_dense)?;
            let mut acc = 0.0;
            for (k, p) in series.iter().enumerate() {
                acc += p;
                out.push((k as u64 + 1, acc));
            }
            conv_end = n_dense;
        }
    }
    if conv_end < n_max {
        let replicas = 50_000u64;
        let horizon = ((budget.max_ops / replicas as f64) as u64).clamp(256, n_max);
        let rest: Vec<u64> = grid
            .iter()
            .copied()
            .filter(|&n| n > conv_end && n <= horizon)
            .collect();
        if !rest.is_empty() {
            for (n, v, _se) in mc_h_grid(walk, &rest, replicas)? {
                out.push((n, v));
            }
        }
    }
    if out.is_empty() {
        return Err(RegvarError::CostExceeded {
            what: "h table construction",
            required: f64::INFINITY,
            budget: budget.max_ops,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Potter bounds
// ---------------------------------------------------------------------------

pub const DEFAULT_POTTER_CAP: f64 = 1e3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotterViolation {
    pub x: f64,
    pub y: f64,
    pub required_c: f64,
}

/// Result of a Potter-bound scan: the smallest admissible constant over all
/// sampled pairs, and the pairs whose constant exceeds the cap.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotterReport {
    pub kappa: f64,
    pub eps: f64,
    pub cap: f64,
    pub c_eps: f64,
    pub violations: Vec<PotterViolation>,
}

impl PotterReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Scans all sample pairs (x, f(x)), (y, f(y)) with x > y for the smallest
/// constant C such that
/// C^{-1} (x/y)^{kappa-eps} <= f(x)/f(y) <= C (x/y)^{kappa+eps},
/// reporting pairs that force C beyond the cap. For a regularly varying
/// sequence of index kappa the reported constant stabilises; for functions
/// growing faster than any power it blows up with the range.
pub fn potter_check(
    samples: &[(f64, f64)],
    kappa: f64,
    eps: f64,
) -> Result<PotterReport, RegvarError> {
    potter_check_with_cap(samples, kappa, eps, DEFAULT_POTTER_CAP)
}

pub fn potter_check_with_cap(
    samples: &[(f64, f64)],
    kappa: f64,
    eps: f64,
    cap: f64,
) -> Result<PotterReport, RegvarError> {
    if samples.len() < 2 {
        return Err(RegvarError::BadSamples("need at least two samples"));
    }
    if !(eps > 0.0) {
        return Err(RegvarError::BadSamples("eps must be positive"));
    }
    for w in samples.windows(2) {
        if !(w[0].0 < w[1].0) {
            return Err(RegvarError::BadSamples("arguments must be increasing"));
        }
    }
    if samples.iter().any(|&(x, f)| !(x > 0.0) || !(f > 0.0)) {
        return Err(RegvarError::BadSamples("samples must be positive"));
    }
    let mut c_eps = 1.0f64;
    let mut violations = Vec::new();
    for j in 1..samples.len() {
        for i in 0..j {
            let (y, fy) = samples[i];
            let (x, fx) = samples[j];
            let p = x / y;
            let r = fx / fy;
            let required = (r / p.powf(kappa + eps))
                .max(p.powf(kappa - eps) / r)
                .max(1.0);
            if required > c_eps {
                c_eps = required;
            }
            if required > cap && violations.len() < 1000 {
                violations.push(PotterViolation {
                    x,
                    y,
                    required_c: required,
                });
            }
        }
    }
    Ok(PotterReport {
        kappa,
        eps,
        cap,
        c_eps,
        violations,
    })
}

// ---------------------------------------------------------------------------
// Memory kernels
// ---------------------------------------------------------------------------

/// Parametric or tabulated memory kernel m.
///
/// The parametric family is m(t) = L / (1 + t)^delta with regular-variation
/// index chi_m = -delta. Tabulated kernels interpolate linearly on their
/// grid (clamping beyond it) and must come with a declared index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub form: KernelForm,
    /// Regular-variation index of m (the exponent chi in m(nt)/m(n) -> t^chi).
    pub chi_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelForm {
    PowerDecay {
        amplitude: f64,
        delta: f64,
    },
    Tabulated {
        grid: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        cumulative: Vec<f64>,
    },
}

impl KernelSpec {
    /// m(t) = amplitude / (1 + t)^delta, delta >= 0.
    pub fn power_decay(amplitude: f64, delta: f64) -> Result<Self, RegvarError> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(RegvarError::BadAmplitude(amplitude));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(RegvarError::BadDelta(delta));
        }
        Ok(KernelSpec {
            form: KernelForm::PowerDecay { amplitude, delta },
            chi_m: -delta,
        })
    }

    /// Constant kernel m = amplitude (delta = 0).
    pub fn constant(amplitude: f64) -> Result<Self, RegvarError> {
        Self::power_decay(amplitude, 0.0)
    }

    /// Tabulated kernel on a strictly increasing grid starting at 0, with
    /// positive values and a monotone finite-difference derivative.
    pub fn tabulated(grid: Vec<f64>, values: Vec<f64>, chi_m: f64) -> Result<Self, RegvarError> {
        if grid.len() != values.len() || grid.len() < 2 {
            return Err(RegvarError::BadKernelTable(
                "grid and values must share a length >= 2",
            ));
        }
        if grid[0] != 0.0 {
            return Err(RegvarError::BadKernelTable("grid must start at 0"));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(RegvarError::BadKernelTable("grid must be strictly increasing"));
        }
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(RegvarError::BadKernelTable("values must be positive"));
        }
        let slopes: Vec<f64> = grid
            .windows(2)
            .zip(values.windows(2))
            .map(|(g, v)| (v[1] - v[0]) / (g[1] - g[0]))
            .collect();
        let nondecreasing = slopes.windows(2).all(|s| s[0] <= s[1] + 1e-12);
        let nonincreasing = slopes.windows(2).all(|s| s[0] >= s[1] - 1e-12);
        if !(nondecreasing || nonincreasing) {
            return Err(RegvarError::BadKernelTable(
                "finite-difference derivative must be monotone",
            ));
        }
        let mut cumulative = Vec::with_capacity(grid.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 1..grid.len() {
            acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
            cumulative.push(acc);
        }
        Ok(KernelSpec {
            form: KernelForm::Tabulated {
                grid,
                values,
                cumulative,
            },
            chi_m,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match &self.form {
            KernelForm::PowerDecay { amplitude, delta } => amplitude * (1.0 + t).powf(-delta),
            KernelForm::Tabulated { grid, values, .. } => match locate(grid, t) {
                Segment::Below => values[0],
                Segment::Above => *values.last().unwrap(),
                Segment::In(i, frac) => values[i] + frac * (values[i + 1] - values[i]),
            },
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match &self.form {
            KernelForm::PowerDecay { amplitude, delta } => {
                -delta * amplitude * (1.0 + t).powf(-delta - 1.0)
            }
            KernelForm::Tabulated { grid, values, .. } => match locate(grid, t) {
                Segment::Below | Segment::Above => 0.0,
                Segment::In(i, _) => (values[i + 1] - values[i]) / (grid[i + 1] - grid[i]),
            },
        }
    }

    /// M(t) = ∫_0^t m(s) ds, closed form for the parametric family.
    pub fn antiderivative(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match &self.form {
            KernelForm::PowerDecay { amplitude, delta } => {
                if (delta - 1.0).abs() < 1e-12 {
                    amplitude * (1.0 + t).ln()
                } else {
                    amplitude * ((1.0 + t).powf(1.0 - delta) - 1.0) / (1.0 - delta)
                }
            }
            KernelForm::Tabulated {
                grid,
                values,
                cumulative,
            } => match locate(grid, t) {
                Segment::Below => 0.0,
                Segment::Above => {
                    *cumulative.last().unwrap()
                        + values.last().unwrap() * (t - grid.last().unwrap())
                }
                Segment::In(i, frac) => {
                    let dt = (grid[i + 1] - grid[i]) * frac;
                    let v_t = values[i] + frac * (values[i + 1] - values[i]);
                    cumulative[i] + 0.5 * (values[i] + v_t) * dt
                }
            },
        }
    }
}

enum Segment {
    Below,
    Above,
    In(usize, f64),
}

fn locate(grid: &[f64], t: f64) -> Segment {
    if t <= grid[0] {
        return Segment::Below;
    }
    if t >= *grid.last().unwrap() {
        return Segment::Above;
    }
    let i = grid.partition_point(|&g| g <= t) - 1;
    Segment::In(i, (t - grid[i]) / (grid[i + 1] - grid[i]))
}

/// m(t); errors on negative time.
pub fn kernel_eval(k: &KernelSpec, t: f64) -> Result<f64, RegvarError> {
    if t < 0.0 {
        return Err(RegvarError::NegativeTime(t));
    }
    Ok(k.eval(t))
}

/// Rescaled kernel m_n(x) = m(n x) / m(n).
pub fn kernel_rescaled(k: &KernelSpec, n: u64, x: f64) -> Result<f64, RegvarError> {
    if x < 0.0 {
        return Err(RegvarError::NegativeTime(x));
    }
    assert!(n >= 1);
    Ok(k.eval(n as f64 * x) / k.eval(n as f64))
}

/// Kernel derivative at t; errors on negative time.
pub fn kernel_derivative(k: &KernelSpec, t: f64) -> Result<f64, RegvarError> {
    if t < 0.0 {
        return Err(RegvarError::NegativeTime(t));
    }
    Ok(k.derivative(t))
}
