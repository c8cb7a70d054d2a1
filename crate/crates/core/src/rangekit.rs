//! The range process R_n = |X(0,n)|, its linear interpolation, interval
//! ranges, intersection counts between walks, exact block decompositions
//! of the range, and ensemble rescaling/centering.
//!
//! Interval conventions: X(a,b) is the set of sites visited at times
//! a..=b with both endpoints included; an empty interval (a > b) counts 0.
//! Discovery times are indexed from level 2 because R_0 = 1 at the origin,
//! so tau(i) is the first time the range reaches i for i >= 2.

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{site_counts_with_capacity, site_set, site_set_with_capacity, LatticeError, SitePacker, SiteSet};
use crate::regvar::{Regime, ScaleSuite};
use crate::walks::PathSample;
use crate::youngint::{HolderPath, YoungError};

#[derive(Debug, Error)]
pub enum RangeError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("time {t} outside the path domain [0, {n}]")]
    OutOfDomain { t: f64, n: u64 },
    #[error("index {asked} beyond the path horizon {horizon}")]
    HorizonExceeded { asked: u64, horizon: u64 },
    #[error("block count must be at least 1")]
    BadBlockCount,
    #[error("stable centering needs at least {need} replicas, got {got}")]
    TooFewReplicas { got: usize, need: usize },
    #[error("ensemble mismatch: {0}")]
    MixedEnsemble(&'static str),
    #[error("bad time grid: {0}")]
    BadGrid(&'static str),
    #[error(transparent)]
    Path(#[from] YoungError),
}

/// The visited-site counting process of one path: R_k for k = 0..=n and
/// the discovery times tau(i), i >= 2.
#[derive(Clone, Debug)]
pub struct RangeProcess {
    r: Vec<u32>,
    tau: Vec<u32>,
}

impl RangeProcess {
    pub fn n(&self) -> u64 {
        (self.r.len() - 1) as u64
    }

    pub fn values(&self) -> &[u32] {
        &self.r
    }

    pub fn r_at(&self, k: u64) -> u64 {
        self.r[k as usize] as u64
    }

    pub fn final_range(&self) -> u64 {
        *self.r.last().unwrap() as u64
    }

    /// Discovery times tau(2), tau(3), ... in order.
    pub fn discovery_times(&self) -> &[u32] {
        &self.tau
    }

    /// First time the range reaches `level` (level >= 2), if attained.
    pub fn tau(&self, level: u64) -> Option<u64> {
        if level < 2 {
            return None;
        }
        self.tau.get(level as usize - 2).map(|&t| t as u64)
    }

    /// The linearly interpolated range at real time t in [0, n].
    pub fn interpolate(&self, t: f64) -> Result<f64, RangeError> {
        let n = self.n();
        if !(t >= 0.0 && t <= n as f64) {
            return Err(RangeError::OutOfDomain { t, n });
        }
        let j = t.floor() as usize;
        if j as u64 == n {
            return Ok(self.r[j] as f64);
        }
        let frac = t - j as f64;
        Ok(self.r[j] as f64 + (self.r[j + 1] - self.r[j]) as f64 * frac)
    }
}

/// Streams the path once through a visited-site set.
pub fn range_process(path: &PathSample) -> Result<RangeProcess, RangeError> {
    let packer = SitePacker::new(path.dim())?;
    let mut seen = site_set_with_capacity((path.n() as usize + 1).min(1 << 20));
    let mut r = Vec::with_capacity(path.n() as usize + 1);
    let mut tau = Vec::new();
    for (k, x) in path.positions().enumerate() {
        if seen.insert(packer.pack(x)?) && k > 0 {
            tau.push(k as u32);
        }
        r.push(seen.len() as u32);
    }
    Ok(RangeProcess { r, tau })
}

/// |X(a,b)|: distinct sites visited at times a..=b; 0 when a > b.
pub fn subrange(path: &PathSample, a: u64, b: u64) -> Result<u64, RangeError> {
    if a > b {
        return Ok(0);
    }
    if b > path.n() {
        return Err(RangeError::HorizonExceeded { asked: b, horizon: path.n() });
    }
    let packer = SitePacker::new(path.dim())?;
    let mut seen = site_set();
    for k in a..=b {
        seen.insert(packer.pack(path.position(k))?);
    }
    Ok(seen.len() as u64)
}

/// Both sides of the block decomposition of R_n over p blocks: block k
/// covers times (floor((k-1)n/p), floor(kn/p)], block 1 also includes
/// time 0, and the corrections are the block's overlap with its past.
/// R_n = sum(block_ranges) - sum(past_intersections) holds exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecomposedRange {
    pub total: u64,
    pub block_ranges: Vec<u64>,
    pub past_intersections: Vec<u64>,
}

impl DecomposedRange {
    /// total - (sum of blocks - sum of corrections); 0 when the identity
    /// holds.
    pub fn identity_gap(&self) -> i64 {
        let blocks: u64 = self.block_ranges.iter().sum();
        let past: u64 = self.past_intersections.iter().sum();
        self.total as i64 - (blocks as i64 - past as i64)
    }
}

pub fn decompose_range(path: &PathSample, n: u64, p: u64) -> Result<DecomposedRange, RangeError> {
    if p == 0 {
        return Err(RangeError::BadBlockCount);
    }
    if n > path.n() {
        return Err(RangeError::HorizonExceeded { asked: n, horizon: path.n() });
    }
    let packer = SitePacker::new(path.dim())?;
    let mut past: SiteSet = site_set_with_capacity((n as usize + 1).min(1 << 20));
    let mut block_ranges = Vec::with_capacity(p as usize);
    let mut past_intersections = Vec::with_capacity(p.saturating_sub(1) as usize);
    let mut boundary_prev = 0u64;
    for k in 1..=p {
        let boundary = k * n / p;
        let start = if k == 1 { 0 } else { boundary_prev + 1 };
        let mut block = site_set();
        let mut overlap = site_set();
        for i in start..=boundary {
            let key = packer.pack(path.position(i))?;
            block.insert(key);
            if k > 1 && past.contains(&key) {
                overlap.insert(key);
            }
        }
        block_ranges.push(block.len() as u64);
        if k > 1 {
            past_intersections.push(overlap.len() as u64);
        }
        past.extend(block);
        boundary_prev = boundary;
    }
    Ok(DecomposedRange {
        total: past.len() as u64,
        block_ranges,
        past_intersections,
    })
}

/// Treatment of the degenerate indices in I_{n,m}: the excluded convention
/// sets I_{n,0} = I_{0,m} = 0 even though X(0,0) holds the starting site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeZero {
    /// I_{n,0} = I_{0,m} = 0 by convention.
    Excluded,
    /// Plain set intersection; time-0 sites count everywhere.
    Included,
}

/// I_{n,m} = |X(0,n) ∩ X'(0,m)| under the chosen degenerate-index
/// convention.
pub fn intersect_count(
    a: &PathSample,
    b: &PathSample,
    n: u64,
    m: u64,
    zero: TimeZero,
) -> Result<u64, RangeError> {
    if a.dim() != b.dim() {
        return Err(RangeError::MixedEnsemble("paths have different dimensions"));
    }
    if n > a.n() {
        return Err(RangeError::HorizonExceeded { asked: n, horizon: a.n() });
    }
    if m > b.n() {
        return Err(RangeError::HorizonExceeded { asked: m, horizon: b.n() });
    }
    if zero == TimeZero::Excluded && (n == 0 || m == 0) {
        return Ok(0);
    }
    let packer = SitePacker::new(a.dim())?;
    let mut seen = site_set_with_capacity((n as usize + 1).min(1 << 20));
    for k in 0..=n {
        seen.insert(packer.pack(a.position(k))?);
    }
    let mut matched = site_set();
    for k in 0..=m {
        let key = packer.pack(b.position(k))?;
        if seen.contains(&key) {
            matched.insert(key);
        }
    }
    Ok(matched.len() as u64)
}

/// J_{n,m} = #{(i,j): 0 <= i <= n, 0 <= j <= m, X_i = X'_j} via occupation
/// count multiplication. Pair counts have no degenerate-index convention;
/// I <= J holds against either `TimeZero` choice.
pub fn pair_count(a: &PathSample, b: &PathSample, n: u64, m: u64) -> Result<u64, RangeError> {
    if a.dim() != b.dim() {
        return Err(RangeError::MixedEnsemble("paths have different dimensions"));
    }
    if n > a.n() {
        return Err(RangeError::HorizonExceeded { asked: n, horizon: a.n() });
    }
    if m > b.n() {
        return Err(RangeError::HorizonExceeded { asked: m, horizon: b.n() });
    }
    let packer = SitePacker::new(a.dim())?;
    let mut occ = site_counts_with_capacity((n as usize + 1).min(1 << 20));
    for k in 0..=n {
        *occ.entry(packer.pack(a.position(k))?).or_insert(0) += 1;
    }
    let mut pairs = 0u64;
    for k in 0..=m {
        if let Some(&c) = occ.get(&packer.pack(b.position(k))?) {
            pairs += c as u64;
        }
    }
    Ok(pairs)
}

/// Distinct common sites of two closed time windows of one path.
fn window_intersection(
    path: &PathSample,
    packer: &SitePacker,
    a1: u64,
    b1: u64,
    a2: u64,
    b2: u64,
) -> Result<u64, RangeError> {
    if a1 > b1 || a2 > b2 {
        return Ok(0);
    }
    let mut first = site_set();
    for k in a1..=b1 {
        first.insert(packer.pack(path.position(k))?);
    }
    let mut matched = site_set();
    for k in a2..=b2 {
        let key = packer.pack(path.position(k))?;
        if first.contains(&key) {
            matched.insert(key);
        }
    }
    Ok(matched.len() as u64)
}

/// Block ranges R_n^(i,j) = |X(floor((i-1)n/j), floor(in/j))| for
/// i = 1..=j; consecutive blocks share their boundary time.
pub fn block_ranges(path: &PathSample, n: u64, j: u64) -> Result<Vec<u64>, RangeError> {
    if j == 0 {
        return Err(RangeError::BadBlockCount);
    }
    if n > path.n() {
        return Err(RangeError::HorizonExceeded { asked: n, horizon: path.n() });
    }
    (1..=j).map(|i| subrange(path, (i - 1) * n / j, i * n / j)).collect()
}

/// Adjacent-block self intersections I_n^(i,j) =
/// |X(floor((2i-2)n/j), floor((2i-1)n/j)) ∩ X(floor((2i-1)n/j), floor(2in/j))|
/// for i = 1..=floor(j/2).
pub fn block_self_intersections(path: &PathSample, n: u64, j: u64) -> Result<Vec<u64>, RangeError> {
    if j == 0 {
        return Err(RangeError::BadBlockCount);
    }
    if n > path.n() {
        return Err(RangeError::HorizonExceeded { asked: n, horizon: path.n() });
    }
    let packer = SitePacker::new(path.dim())?;
    (1..=j / 2)
        .map(|i| {
            let a = (2 * i - 2) * n / j;
            let b = (2 * i - 1) * n / j;
            let c = 2 * i * n / j;
            window_intersection(path, &packer, a, b, b, c)
        })
        .collect()
}

/// Cross intersections I_{n,m}^(i,j,k) between block i of the first n
/// steps and block j of the following m steps,
/// |X(floor((i-1)n/k), floor(in/k)) ∩ X(n + floor((j-1)m/k), n + floor(jm/k))|,
/// returned as a k x k matrix indexed [i-1][j-1].
pub fn block_cross_intersections(
    path: &PathSample,
    n: u64,
    m: u64,
    k: u64,
) -> Result<Vec<Vec<u64>>, RangeError> {
    if k == 0 {
        return Err(RangeError::BadBlockCount);
    }
    if n + m > path.n() {
        return Err(RangeError::HorizonExceeded { asked: n + m, horizon: path.n() });
    }
    let packer = SitePacker::new(path.dim())?;
    let mut out = Vec::with_capacity(k as usize);
    for i in 1..=k {
        let a1 = (i - 1) * n / k;
        let b1 = i * n / k;
        let mut row = Vec::with_capacity(k as usize);
        for j in 1..=k {
            let a2 = n + (j - 1) * m / k;
            let b2 = n + j * m / k;
            row.push(window_intersection(path, &packer, a1, b1, a2, b2)?);
        }
        out.push(row);
    }
    Ok(out)
}

/// Minimum ensemble size for mean-centering; below this the centering
/// noise dominates the fluctuation scale.
pub const MIN_CENTERING_REPLICAS: usize = 100;

/// Per-replica rescaled (and, outside SUB, ensemble-mean centered)
/// interpolated range paths on a uniform time grid: values
/// S(n) (R_{nt} - mean) with the regime normalisation S from the suite.
pub fn rescale_center(
    ensemble: &[RangeProcess],
    suite: &ScaleSuite,
    t_grid: &[f64],
) -> Result<Vec<HolderPath>, RangeError> {
    if ensemble.len() < MIN_CENTERING_REPLICAS {
        return Err(RangeError::TooFewReplicas {
            got: ensemble.len(),
            need: MIN_CENTERING_REPLICAS,
        });
    }
    let n = ensemble[0].n();
    if ensemble.iter().any(|rp| rp.n() != n) {
        return Err(RangeError::MixedEnsemble("replicas have different horizons"));
    }
    let rows: Result<Vec<Vec<f64>>, RangeError> = ensemble
        .iter()
        .map(|rp| t_grid.iter().map(|&t| rp.interpolate(t * n as f64)).collect())
        .collect();
    rescale_center_rows(&rows?, suite, n, t_grid)
}

/// As `rescale_center`, starting from already-evaluated interpolated range
/// values per replica (rows[r][k] = R_{n t_k}); the streaming runners use
/// this form so full range processes never have to be retained.
pub fn rescale_center_rows(
    rows: &[Vec<f64>],
    suite: &ScaleSuite,
    n: u64,
    t_grid: &[f64],
) -> Result<Vec<HolderPath>, RangeError> {
    if rows.len() < MIN_CENTERING_REPLICAS {
        return Err(RangeError::TooFewReplicas { got: rows.len(), need: MIN_CENTERING_REPLICAS });
    }
    validate_uniform_grid(t_grid)?;
    if rows.iter().any(|r| r.len() != t_grid.len()) {
        return Err(RangeError::MixedEnsemble("row length differs from the grid"));
    }
    let span = *t_grid.last().unwrap();
    let scale = suite.normalization(n);
    let center: Vec<f64> = if suite.regime() == Regime::Sub {
        vec![0.0; t_grid.len()]
    } else {
        let mut c = vec![0.0; t_grid.len()];
        for row in rows {
            for (s, v) in c.iter_mut().zip(row) {
                *s += v;
            }
        }
        for s in c.iter_mut() {
            *s /= rows.len() as f64;
        }
        c
    };
    // Declared exponent: the regime's critical exponent less a safety
    // margin, as the limit paths are chi-Hölder for every chi below it.
    let alpha = (suite.chi() - 0.02).clamp(0.05, 1.0);
    rows.iter()
        .map(|row| {
            let values: Vec<f64> = row
                .iter()
                .zip(&center)
                .map(|(v, c)| scale * (v - c))
                .collect();
            HolderPath::new(span, values, alpha).map_err(RangeError::from)
        })
        .collect()
}

fn validate_uniform_grid(t_grid: &[f64]) -> Result<(), RangeError> {
    if t_grid.len() < 2 {
        return Err(RangeError::BadGrid("need at least two grid times"));
    }
    if t_grid[0] != 0.0 {
        return Err(RangeError::BadGrid("grid must start at 0"));
    }
    let span = *t_grid.last().unwrap();
    if !(span > 0.0 && span.is_finite()) {
        return Err(RangeError::BadGrid("grid must end at a positive time"));
    }
    let dt = span / (t_grid.len() - 1) as f64;
    for (k, &t) in t_grid.iter().enumerate() {
        if (t - k as f64 * dt).abs() > 1e-9 * span {
            return Err(RangeError::BadGrid("grid must be uniform"));
        }
    }
    Ok(())
}

/// One replica line of an exported ensemble: the seed, range values at the
/// requested grid times, and any requested intersection counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub replica: u64,
    pub seed: u64,
    pub r: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intersections: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<u64>,
}

/// JSON-lines export, one replica per line.
pub fn write_rows<W: io::Write>(mut w: W, rows: &[EnsembleRow]) -> io::Result<()> {
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_rows<R: io::BufRead>(r: R) -> io::Result<Vec<EnsembleRow>> {
    let mut rows = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line)?);
    }
    Ok(rows)
}
