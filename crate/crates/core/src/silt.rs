//! Self-intersection accounting for a single walk: dyadic pair covers of
//! the time triangle, centered estimators of the renormalised
//! self-intersection local time, and statistical checks of its additivity
//! structure.
//!
//! All counts are over ordered index pairs (p, q) with p < q and
//! X_p = X_q. The dyadic cover at depth L tiles
//! {(p, q): 1 <= p < q <= n_t} exactly, except for pairs falling inside a
//! single finest-level window; every covered pair belongs to exactly one
//! block, so block counts can be centered and summed without overlap
//! corrections.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{site_counts_with_capacity, LatticeError, SiteCounts, SitePacker};
use crate::regvar::ScaleSuite;
use crate::stats::{ks_two_sample, mean, variance, KsReport, StatsError};
use crate::walks::{replica_seed, rng_for, sample_path, PathSample, WalkError, WalkSpec};
use rand::Rng;

#[derive(Debug, Error)]
pub enum SiltError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("time fraction {t} not in (0, 1]")]
    BadTime { t: f64 },
    #[error("depth {depth} not in 1..={max}")]
    BadDepth { depth: u32, max: u32 },
    #[error("index {asked} beyond the path horizon {horizon}")]
    HorizonExceeded { asked: u64, horizon: u64 },
    #[error("grid must be nondecreasing and within the horizon")]
    BadGrid,
    #[error("centering table does not match: {0}")]
    TableMismatch(&'static str),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
}

pub const MAX_DEPTH: u32 = 32;

/// One block of the dyadic cover: ordered pairs with the first index in
/// the half-open window (past.0, past.1] and the second in
/// (future.0, future.1]. The two windows share the boundary time
/// past.1 == future.0, which belongs to the past window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DyadicBlock {
    pub level: u32,
    pub index: u64,
    pub past: (u64, u64),
    pub future: (u64, u64),
}

impl DyadicBlock {
    pub fn is_empty(&self) -> bool {
        self.past.0 == self.past.1 || self.future.0 == self.future.1
    }

    /// Number of index pairs the block covers.
    pub fn pair_area(&self) -> u64 {
        (self.past.1 - self.past.0) * (self.future.1 - self.future.0)
    }
}

/// Dyadic cover of the pair triangle over walk times 1..=n_t.
#[derive(Clone, Debug)]
pub struct DyadicCover {
    pub n_t: u64,
    pub depth: u32,
    pub blocks: Vec<DyadicBlock>,
    /// Blocks whose integer windows collapsed to zero width; they stay in
    /// `blocks` so positions match centering tables.
    pub empty_blocks: usize,
}

impl DyadicCover {
    /// Boundary of window k (0..=2^level) at a level, in walk time.
    fn boundary(n_t: u64, level: u32, k: u64) -> u64 {
        ((k as u128 * n_t as u128) >> level) as u64
    }

    pub fn blocks_at(&self, level: u32) -> &[DyadicBlock] {
        let start = (1usize << (level - 1)) - 1;
        let count = 1usize << (level - 1);
        &self.blocks[start..start + count]
    }

    /// Total pairs the cover reaches.
    pub fn cross_area(&self) -> u64 {
        self.blocks.iter().map(|b| b.pair_area()).sum()
    }

    /// Pairs left inside single finest-level windows, the part the cover
    /// misses. cross_area + diagonal_area == n_t (n_t - 1) / 2 exactly.
    pub fn diagonal_area(&self) -> u64 {
        (0..1u64 << self.depth)
            .map(|k| {
                let a = Self::boundary(self.n_t, self.depth, k);
                let b = Self::boundary(self.n_t, self.depth, k + 1);
                let c = b - a;
                c * c.saturating_sub(1) / 2
            })
            .sum()
    }
}

/// The dyadic cover of {(p, q): 1 <= p < q <= floor(t n)} down to `depth`
/// levels. Level l splits the time span into 2^l integer-floored windows
/// and pairs each odd window with its right sibling.
pub fn dyadic_blocks(t: f64, depth: u32, n: u64) -> Result<DyadicCover, SiltError> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(SiltError::BadTime { t });
    }
    if depth == 0 || depth > MAX_DEPTH {
        return Err(SiltError::BadDepth { depth, max: MAX_DEPTH });
    }
    let n_t = (t * n as f64).floor() as u64;
    if n_t > n {
        return Err(SiltError::HorizonExceeded { asked: n_t, horizon: n });
    }
    let mut blocks = Vec::with_capacity((1usize << depth) - 1);
    let mut empty_blocks = 0;
    for level in 1..=depth {
        for index in 1..=(1u64 << (level - 1)) {
            let a = DyadicCover::boundary(n_t, level, 2 * index - 2);
            let b = DyadicCover::boundary(n_t, level, 2 * index - 1);
            let c = DyadicCover::boundary(n_t, level, 2 * index);
            let block = DyadicBlock { level, index, past: (a, b), future: (b, c) };
            if block.is_empty() {
                empty_blocks += 1;
            }
            blocks.push(block);
        }
    }
    Ok(DyadicCover { n_t, depth, blocks, empty_blocks })
}

fn occupation(
    path: &PathSample,
    packer: &SitePacker,
    from: u64,
    to: u64,
) -> Result<SiteCounts, SiltError> {
    let mut occ = site_counts_with_capacity(((to - from) as usize + 1).min(1 << 20));
    for k in from..=to {
        *occ.entry(packer.pack(path.position(k))?).or_insert(0) += 1;
    }
    Ok(occ)
}

/// Pairs (p, q) with p in the block's past window and q in its future
/// window landing on the same site.
pub fn block_pair_count(path: &PathSample, block: &DyadicBlock) -> Result<u64, SiltError> {
    if block.future.1 > path.n() {
        return Err(SiltError::HorizonExceeded { asked: block.future.1, horizon: path.n() });
    }
    if block.is_empty() {
        return Ok(0);
    }
    let packer = SitePacker::new(path.dim())?;
    let occ = occupation(path, &packer, block.past.0 + 1, block.past.1)?;
    let mut pairs = 0u64;
    for q in block.future.0 + 1..=block.future.1 {
        if let Some(&c) = occ.get(&packer.pack(path.position(q))?) {
            pairs += c as u64;
        }
    }
    Ok(pairs)
}

/// Pair counts summed per level, level_sums[l-1] for l = 1..=depth.
pub fn level_pair_counts(path: &PathSample, cover: &DyadicCover) -> Result<Vec<u64>, SiltError> {
    let mut sums = vec![0u64; cover.depth as usize];
    for block in &cover.blocks {
        sums[block.level as usize - 1] += block_pair_count(path, block)?;
    }
    Ok(sums)
}

/// #{(p, q): a <= p < q <= b, X_p = X_q} in one pass.
pub fn segment_pair_count(path: &PathSample, a: u64, b: u64) -> Result<u64, SiltError> {
    if b > path.n() {
        return Err(SiltError::HorizonExceeded { asked: b, horizon: path.n() });
    }
    if a >= b {
        return Ok(0);
    }
    let packer = SitePacker::new(path.dim())?;
    let mut occ = site_counts_with_capacity(((b - a) as usize + 1).min(1 << 20));
    let mut pairs = 0u64;
    for k in a..=b {
        let key = packer.pack(path.position(k))?;
        let c = occ.entry(key).or_insert(0);
        pairs += *c as u64;
        *c += 1;
    }
    Ok(pairs)
}

/// Product pair count between two closed time windows,
/// #{(p, q): a1 <= p <= b1, a2 <= q <= b2, X_p = X_q}. The windows are
/// taken as given; disjointness is the caller's concern.
pub fn box_pair_count(
    path: &PathSample,
    a1: u64,
    b1: u64,
    a2: u64,
    b2: u64,
) -> Result<u64, SiltError> {
    if b1.max(b2) > path.n() {
        return Err(SiltError::HorizonExceeded { asked: b1.max(b2), horizon: path.n() });
    }
    if a1 > b1 || a2 > b2 {
        return Ok(0);
    }
    let packer = SitePacker::new(path.dim())?;
    let occ = occupation_closed(path, &packer, a1, b1)?;
    let mut pairs = 0u64;
    for q in a2..=b2 {
        if let Some(&c) = occ.get(&packer.pack(path.position(q))?) {
            pairs += c as u64;
        }
    }
    Ok(pairs)
}

fn occupation_closed(
    path: &PathSample,
    packer: &SitePacker,
    a: u64,
    b: u64,
) -> Result<SiteCounts, SiltError> {
    let mut occ = site_counts_with_capacity(((b - a) as usize + 1).min(1 << 20));
    for k in a..=b {
        *occ.entry(packer.pack(path.position(k))?).or_insert(0) += 1;
    }
    Ok(occ)
}

/// Running pair count J_m = #{0 <= p < q <= m} evaluated at the requested
/// times in one pass over the path. The grid must be nondecreasing and
/// within the horizon.
pub fn pair_count_process(path: &PathSample, grid: &[u64]) -> Result<Vec<u64>, SiltError> {
    if grid.windows(2).any(|w| w[0] > w[1]) || grid.last().is_some_and(|&m| m > path.n()) {
        return Err(SiltError::BadGrid);
    }
    let packer = SitePacker::new(path.dim())?;
    let mut occ = site_counts_with_capacity((path.n() as usize + 1).min(1 << 20));
    let mut out = Vec::with_capacity(grid.len());
    let mut pairs = 0u64;
    let mut k = 0usize;
    let last = match grid.last() {
        Some(&m) => m,
        None => return Ok(out),
    };
    for q in 0..=last {
        let c = occ.entry(packer.pack(path.position(q))?).or_insert(0);
        pairs += *c as u64;
        *c += 1;
        while k < grid.len() && grid[k] == q {
            out.push(pairs);
            k += 1;
        }
    }
    Ok(out)
}

/// Pairs straddling the split at floor(t n): first index in
/// [0, floor(t n) - 1], second in [floor(t n) + 1, floor((t+s) n)]. With
/// these windows the split is exact:
/// J(0, m2) = J(0, m1) + J(m1, m2) + cross, with J the segment pair count.
pub fn cross_pair_count(path: &PathSample, t: f64, s: f64) -> Result<u64, SiltError> {
    if !(t > 0.0 && s >= 0.0 && t + s <= 1.0) {
        return Err(SiltError::BadTime { t: t + s });
    }
    let n = path.n();
    let m1 = (t * n as f64).floor() as u64;
    let m2 = ((t + s) * n as f64).floor() as u64;
    if m1 == 0 || m1 + 1 > m2 {
        return Ok(0);
    }
    box_pair_count(path, 0, m1 - 1, m1 + 1, m2)
}

pub const CENTERING_TABLE_VERSION: u32 = 1;
pub const MIN_PILOT_REPLICAS: u64 = 500;

/// Pilot-run expectations of the dyadic block counts for one walk law at
/// one (n, t, depth). Stored as a versioned JSON document so estimator
/// runs can pin exactly which centering they subtracted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenteringTable {
    pub version: u32,
    pub walk_fingerprint: u64,
    pub n: u64,
    pub t: f64,
    pub depth: u32,
    pub pilot_replicas: u64,
    /// block_means[l-1][i-1]: pilot mean pair count of block i at level l.
    pub block_means: Vec<Vec<f64>>,
    /// Pilot mean and standard deviation of each level's summed count.
    pub level_mean: Vec<f64>,
    pub level_sd: Vec<f64>,
}

impl CenteringTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("centering table serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SiltError> {
        let table: CenteringTable =
            serde_json::from_str(text).map_err(|_| SiltError::TableMismatch("unreadable table"))?;
        if table.version != CENTERING_TABLE_VERSION {
            return Err(SiltError::TableMismatch("unsupported table version"));
        }
        Ok(table)
    }

    fn check(&self, n: u64, t: f64, depth: u32) -> Result<(), SiltError> {
        if self.version != CENTERING_TABLE_VERSION {
            return Err(SiltError::TableMismatch("unsupported table version"));
        }
        if self.n != n {
            return Err(SiltError::TableMismatch("horizon differs"));
        }
        if self.depth != depth || self.level_mean.len() != depth as usize {
            return Err(SiltError::TableMismatch("depth differs"));
        }
        if (self.t - t).abs() > 1e-12 * t.abs().max(1.0) {
            return Err(SiltError::TableMismatch("time fraction differs"));
        }
        Ok(())
    }
}

/// Estimates the block-count means from fresh pilot replicas. Pilot seeds
/// are drawn from `base_seed`; keep that stream disjoint from the
/// evaluation replicas or the centering is biased toward them.
pub fn build_centering_table(
    walk: &WalkSpec,
    n: u64,
    t: f64,
    depth: u32,
    pilot_replicas: u64,
    base_seed: u64,
) -> Result<CenteringTable, SiltError> {
    if pilot_replicas < MIN_PILOT_REPLICAS {
        return Err(SiltError::TooFewSamples {
            got: pilot_replicas as usize,
            need: MIN_PILOT_REPLICAS as usize,
        });
    }
    let cover = dyadic_blocks(t, depth, n)?;
    let mut block_sums = vec![0f64; cover.blocks.len()];
    let mut level_rows: Vec<Vec<f64>> = vec![Vec::with_capacity(pilot_replicas as usize); depth as usize];
    for r in 0..pilot_replicas {
        let path = sample_path(walk, n, replica_seed(base_seed, r))?;
        let mut level_sums = vec![0f64; depth as usize];
        for (slot, block) in block_sums.iter_mut().zip(&cover.blocks) {
            let c = block_pair_count(&path, block)? as f64;
            *slot += c;
            level_sums[block.level as usize - 1] += c;
        }
        for (row, &s) in level_rows.iter_mut().zip(&level_sums) {
            row.push(s);
        }
    }
    let mut block_means = Vec::with_capacity(depth as usize);
    let mut it = block_sums.iter();
    for level in 1..=depth {
        block_means.push(
            (0..1u64 << (level - 1))
                .map(|_| it.next().unwrap() / pilot_replicas as f64)
                .collect(),
        );
    }
    let level_mean = level_rows.iter().map(|row| mean(row)).collect();
    let level_sd = level_rows.iter().map(|row| variance(row).sqrt()).collect();
    Ok(CenteringTable {
        version: CENTERING_TABLE_VERSION,
        walk_fingerprint: walk.fingerprint(),
        n,
        t,
        depth,
        pilot_replicas,
        block_means,
        level_mean,
        level_sd,
    })
}

/// One centered self-intersection estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiltSample {
    pub gamma_hat: f64,
    /// Centered, scaled contribution of each dyadic level.
    pub level_contributions: Vec<f64>,
    pub n: u64,
    pub t: f64,
    pub depth: u32,
    pub seed: u64,
}

/// The centered estimator b(n)^d / n^2 * sum_l (J_l - E J_l) over the
/// dyadic cover, against the pilot expectations in `table`.
pub fn silt_estimate(
    path: &PathSample,
    suite: &ScaleSuite,
    t: f64,
    depth: u32,
    table: &CenteringTable,
) -> Result<SiltSample, SiltError> {
    if suite.d() != path.dim() {
        return Err(SiltError::TableMismatch("suite dimension differs from the path"));
    }
    table.check(path.n(), t, depth)?;
    let cover = dyadic_blocks(t, depth, path.n())?;
    let counts = level_pair_counts(path, &cover)?;
    let n = path.n() as f64;
    let scale = suite.b(n).powi(suite.d() as i32) / (n * n);
    let level_contributions: Vec<f64> = counts
        .iter()
        .zip(&table.level_mean)
        .map(|(&c, &m)| (c as f64 - m) * scale)
        .collect();
    Ok(SiltSample {
        gamma_hat: level_contributions.iter().sum(),
        level_contributions,
        n: path.n(),
        t,
        depth,
        seed: path.seed(),
    })
}

/// Pilot expectation of the straddling pair count at one (n, t, s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCenteringTable {
    pub version: u32,
    pub walk_fingerprint: u64,
    pub n: u64,
    pub t: f64,
    pub s: f64,
    pub pilot_replicas: u64,
    pub mean: f64,
    pub sd: f64,
}

pub fn build_cross_centering_table(
    walk: &WalkSpec,
    n: u64,
    t: f64,
    s: f64,
    pilot_replicas: u64,
    base_seed: u64,
) -> Result<CrossCenteringTable, SiltError> {
    if pilot_replicas < MIN_PILOT_REPLICAS {
        return Err(SiltError::TooFewSamples {
            got: pilot_replicas as usize,
            need: MIN_PILOT_REPLICAS as usize,
        });
    }
    let counts: Result<Vec<f64>, SiltError> = (0..pilot_replicas)
        .map(|r| {
            let path = sample_path(walk, n, replica_seed(base_seed, r))?;
            Ok(cross_pair_count(&path, t, s)? as f64)
        })
        .collect();
    let counts = counts?;
    Ok(CrossCenteringTable {
        version: CENTERING_TABLE_VERSION,
        walk_fingerprint: walk.fingerprint(),
        n,
        t,
        s,
        pilot_replicas,
        mean: mean(&counts),
        sd: variance(&counts).sqrt(),
    })
}

/// Centered, scaled straddling term b(n)^d / n^2 (cross - E cross); the
/// limit counterpart of the off-diagonal rectangle [0,t] x [t,t+s].
pub fn cross_estimate(
    path: &PathSample,
    suite: &ScaleSuite,
    t: f64,
    s: f64,
    table: &CrossCenteringTable,
) -> Result<f64, SiltError> {
    if suite.d() != path.dim() {
        return Err(SiltError::TableMismatch("suite dimension differs from the path"));
    }
    if table.n != path.n()
        || (table.t - t).abs() > 1e-12 * t.abs().max(1.0)
        || (table.s - s).abs() > 1e-12 * s.abs().max(1.0)
    {
        return Err(SiltError::TableMismatch("cross table keyed to other parameters"));
    }
    let n = path.n() as f64;
    let scale = suite.b(n).powi(suite.d() as i32) / (n * n);
    Ok((cross_pair_count(path, t, s)? as f64 - table.mean) * scale)
}

/// Distributional check of an additive split: the `full` ensemble should
/// match sums of one draw from each part ensemble (drawn independently),
/// and should not match the control where the last part is doubled.
#[derive(Clone, Debug)]
pub struct DecompositionReport {
    pub ks: KsReport,
    /// Same resampling with the last summand doubled; a sound split
    /// rejects this.
    pub control: KsReport,
    pub resamples: usize,
}

pub fn decomposition_check(
    full: &[f64],
    parts: &[&[f64]],
    resamples: usize,
    seed: u64,
) -> Result<DecompositionReport, SiltError> {
    if parts.is_empty() {
        return Err(SiltError::TooFewSamples { got: 0, need: 1 });
    }
    if resamples < 64 {
        return Err(SiltError::TooFewSamples { got: resamples, need: 64 });
    }
    let mut rng = rng_for(seed);
    let mut sums = Vec::with_capacity(resamples);
    let mut control_sums = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut s = 0.0;
        let mut c = 0.0;
        for (k, part) in parts.iter().enumerate() {
            let draw = part[rng.gen_range(0..part.len())];
            s += draw;
            c += if k + 1 == parts.len() { 2.0 * draw } else { draw };
        }
        sums.push(s);
        control_sums.push(c);
    }
    Ok(DecompositionReport {
        ks: ks_two_sample(full, &sums)?,
        control: ks_two_sample(full, &control_sums)?,
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regvar::make_scale_suite;
    use crate::stats::{holder_exponent, pearson};
    use crate::walks::WalkSpec;
    use std::collections::HashSet;

    fn brute_pairs(path: &PathSample, win1: (u64, u64), win2: (u64, u64)) -> u64 {
        let mut c = 0;
        for p in win1.0..=win1.1 {
            for q in win2.0..=win2.1 {
                if path.position(p) == path.position(q) {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn cover_tiles_the_triangle_exactly() {
        for n_t in [10u64, 97, 100, 256] {
            for depth in [1u32, 3, 5, 6] {
                let cover = dyadic_blocks(1.0, depth, n_t).unwrap();
                assert_eq!(cover.blocks.len(), (1 << depth) - 1);
                let mut covered: HashSet<(u64, u64)> = HashSet::new();
                for b in &cover.blocks {
                    for p in b.past.0 + 1..=b.past.1 {
                        for q in b.future.0 + 1..=b.future.1 {
                            assert!(p < q, "pair order broken");
                            assert!(covered.insert((p, q)), "pair ({p},{q}) covered twice");
                        }
                    }
                }
                assert_eq!(covered.len() as u64, cover.cross_area());
                assert_eq!(
                    cover.cross_area() + cover.diagonal_area(),
                    n_t * (n_t - 1) / 2,
                    "n_t={n_t} depth={depth}"
                );
                // every uncovered pair with p >= 1 sits inside one finest window
                let bounds: Vec<u64> = (0..=1u64 << depth)
                    .map(|k| DyadicCover::boundary(n_t, depth, k))
                    .collect();
                let window_of = |p: u64| bounds.partition_point(|&b| b < p);
                for p in 1..=n_t {
                    for q in p + 1..=n_t {
                        if !covered.contains(&(p, q)) {
                            assert_eq!(
                                window_of(p),
                                window_of(q),
                                "stray uncovered pair ({p},{q})"
                            );
                        }
                    }
                }
            }
        }
        // degenerate windows are reported, not dropped
        let tiny = dyadic_blocks(1.0, 6, 10).unwrap();
        assert!(tiny.empty_blocks > 0);
        assert_eq!(tiny.blocks.len(), 63);
    }

    #[test]
    fn cover_area_fraction_tracks_depth() {
        let n_t = 1u64 << 16;
        let total = (n_t * (n_t - 1) / 2) as f64;
        for depth in 1..=8u32 {
            let cover = dyadic_blocks(1.0, depth, n_t).unwrap();
            let frac = cover.cross_area() as f64 / total;
            let want = 1.0 - 0.5f64.powi(depth as i32);
            assert!((frac - want).abs() < 0.01, "depth {depth}: {frac} vs {want}");
        }
    }

    #[test]
    fn cover_rejects_bad_arguments() {
        assert!(matches!(dyadic_blocks(0.0, 3, 100), Err(SiltError::BadTime { .. })));
        assert!(matches!(dyadic_blocks(1.5, 3, 100), Err(SiltError::BadTime { .. })));
        assert!(matches!(dyadic_blocks(1.0, 0, 100), Err(SiltError::BadDepth { .. })));
        assert!(matches!(dyadic_blocks(1.0, 40, 100), Err(SiltError::BadDepth { .. })));
    }

    #[test]
    fn pair_counts_match_bruteforce() {
        let spec = WalkSpec::srw(2).unwrap();
        let path = sample_path(&spec, 96, 4242).unwrap();
        let cover = dyadic_blocks(1.0, 3, 96).unwrap();
        for b in &cover.blocks {
            let got = block_pair_count(&path, b).unwrap();
            let want = brute_pairs(&path, (b.past.0 + 1, b.past.1), (b.future.0 + 1, b.future.1));
            assert_eq!(got, want);
        }
        let levels = level_pair_counts(&path, &cover).unwrap();
        for l in 1..=3u32 {
            let want: u64 = cover
                .blocks_at(l)
                .iter()
                .map(|b| block_pair_count(&path, b).unwrap())
                .sum();
            assert_eq!(levels[l as usize - 1], want);
        }

        // segment and box counts against double loops
        let mut brute_seg = 0u64;
        for p in 20..=60u64 {
            for q in p + 1..=60 {
                if path.position(p) == path.position(q) {
                    brute_seg += 1;
                }
            }
        }
        assert_eq!(segment_pair_count(&path, 20, 60).unwrap(), brute_seg);
        assert_eq!(
            box_pair_count(&path, 0, 40, 41, 96).unwrap(),
            brute_pairs(&path, (0, 40), (41, 96))
        );
        assert_eq!(box_pair_count(&path, 10, 5, 41, 96).unwrap(), 0);
    }

    #[test]
    fn prefix_process_and_split_identity() {
        let spec = WalkSpec::lazy_srw(2, 0.5).unwrap();
        for seed in [7u64, 8, 9] {
            let path = sample_path(&spec, 240, seed).unwrap();
            let grid: Vec<u64> = (0..=12).map(|k| k * 20).collect();
            let proc = pair_count_process(&path, &grid).unwrap();
            for (k, &m) in grid.iter().enumerate() {
                assert_eq!(proc[k], segment_pair_count(&path, 0, m).unwrap());
            }
            // exact three-way split of the full count at m1 = 120, m2 = 240
            let full = segment_pair_count(&path, 0, 240).unwrap();
            let first = segment_pair_count(&path, 0, 120).unwrap();
            let second = segment_pair_count(&path, 120, 240).unwrap();
            let cross = cross_pair_count(&path, 0.5, 0.5).unwrap();
            assert_eq!(full, first + second + cross);
        }
        let path = sample_path(&spec, 64, 1).unwrap();
        assert!(pair_count_process(&path, &[5, 3]).is_err());
        assert!(pair_count_process(&path, &[70]).is_err());
    }

    #[test]
    fn centering_table_build_and_roundtrip() {
        let spec = WalkSpec::lazy_srw(2, 0.5).unwrap();
        let table = build_centering_table(&spec, 1024, 1.0, 4, 500, 9001).unwrap();
        assert_eq!(table.block_means.len(), 4);
        for (l, row) in table.block_means.iter().enumerate() {
            assert_eq!(row.len(), 1 << l);
            let sum: f64 = row.iter().sum();
            assert!((sum - table.level_mean[l]).abs() < 1e-9 * sum.max(1.0));
        }
        assert!(table.level_sd.iter().all(|&s| s > 0.0));

        let back = CenteringTable::from_json(&table.to_json()).unwrap();
        assert_eq!(table, back);

        let mut stale = table.clone();
        stale.version = 0;
        assert!(CenteringTable::from_json(&stale.to_json()).is_err());
        assert!(matches!(
            build_centering_table(&spec, 1024, 1.0, 4, 100, 9001),
            Err(SiltError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn silt_estimate_arithmetic_and_guards() {
        let spec = WalkSpec::lazy_srw(2, 0.5).unwrap();
        let n = 1024u64;
        let suite = make_scale_suite(&spec, n).unwrap();
        let table = build_centering_table(&spec, n, 1.0, 4, 500, 77).unwrap();
        let path = sample_path(&spec, n, 31337).unwrap();
        let sample = silt_estimate(&path, &suite, 1.0, 4, &table).unwrap();
        assert_eq!(sample.level_contributions.len(), 4);
        let sum: f64 = sample.level_contributions.iter().sum();
        assert!((sample.gamma_hat - sum).abs() < 1e-12 * sum.abs().max(1.0));
        assert_eq!(sample.seed, 31337);

        // re-derive one level by hand
        let cover = dyadic_blocks(1.0, 4, n).unwrap();
        let counts = level_pair_counts(&path, &cover).unwrap();
        let scale = suite.b(n as f64).powi(2) / (n as f64 * n as f64);
        let want = (counts[0] as f64 - table.level_mean[0]) * scale;
        assert!((sample.level_contributions[0] - want).abs() < 1e-12 * want.abs().max(1.0));

        assert!(silt_estimate(&path, &suite, 0.5, 4, &table).is_err());
        assert!(silt_estimate(&path, &suite, 1.0, 5, &table).is_err());
        let short = sample_path(&spec, 512, 1).unwrap();
        assert!(silt_estimate(&short, &suite, 1.0, 4, &table).is_err());
    }

    /// Blocks at one level live on disjoint time windows, so their counts
    /// are independent; the sample correlation must be small.
    #[test]
    fn same_level_blocks_uncorrelated() {
        let spec = WalkSpec::lazy_srw(2, 0.5).unwrap();
        let n = 1u64 << 15;
        let cover = dyadic_blocks(1.0, 3, n).unwrap();
        let level3: Vec<DyadicBlock> = cover.blocks_at(3).to_vec();
        let reps = 400u64;
        let mut cols = vec![Vec::with_capacity(reps as usize); level3.len()];
        for r in 0..reps {
            let path = sample_path(&spec, n, replica_seed(555, r)).unwrap();
            for (col, b) in cols.iter_mut().zip(&level3) {
                col.push(block_pair_count(&path, b).unwrap() as f64);
            }
        }
        for i in 0..cols.len() {
            for j in i + 1..cols.len() {
                let rho = pearson(&cols[i], &cols[j]);
                assert!(rho.abs() < 0.15, "blocks {i},{j}: correlation {rho}");
            }
        }
    }

    /// Centered level sums must shrink with depth or the level series
    /// could not converge; check the fitted decay of their spread.
    #[test]
    fn level_spread_decays_with_depth() {
        let spec = WalkSpec::lazy_srw(2, 0.5).unwrap();
        let n = 1u64 << 15;
        let depth = 7u32;
        let cover = dyadic_blocks(1.0, depth, n).unwrap();
        let reps = 300u64;
        let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(reps as usize); depth as usize];
        for r in 0..reps {
            let path = sample_path(&spec, n, replica_seed(808, r)).unwrap();
            let sums = level_pair_counts(&path, &cover).unwrap();
            for (row, &s) in rows.iter_mut().zip(&sums) {
                row.push(s as f64);
            }
        }
        let xs: Vec<f64> = (1..=depth).map(|l| l as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|row| variance(row).sqrt().ln()).collect();
        let (slope, _) = crate::stats::ols(&xs, &ys);
        assert!(slope < -0.15, "level spread decays too slowly: slope {slope}");
    }

    /// Regularity of the estimator path t -> gamma_hat(t): kept to the
    /// broad window the limit object's self-similarity implies. Column
    /// self-centering across the ensemble only shifts each time slice by
    /// a constant, which leaves increments' scaling alone.
    #[test]
    fn gamma_path_regularity() {
        let spec = WalkSpec::lazy_srw(2, 0.5).unwrap();
        let n = 1u64 << 14;
        let suite = make_scale_suite(&spec, n).unwrap();
        let reps = 150usize;
        let grid: Vec<u64> = (0..=32).map(|k| k * n / 32).collect();
        let mut rows = Vec::with_capacity(reps);
        for r in 0..reps {
            let path = sample_path(&spec, n, replica_seed(2718, r as u64)).unwrap();
            let j = pair_count_process(&path, &grid).unwrap();
            let scale = suite.b(n as f64).powi(2) / (n as f64 * n as f64);
            rows.push(j.iter().map(|&v| v as f64 * scale).collect::<Vec<f64>>());
        }
        for k in 0..grid.len() {
            let m: f64 = rows.iter().map(|row| row[k]).sum::<f64>() / reps as f64;
            for row in rows.iter_mut() {
                row[k] -= m;
            }
        }
        let fit = holder_exponent(&rows, 1.0 / 32.0, &[1, 2, 4, 8], 200, 99).unwrap();
        assert!(
            fit.alpha > 0.5 && fit.alpha < 1.2,
            "estimator path roughness off: alpha {}",
            fit.alpha
        );
    }

    #[test]
    fn decomposition_check_separates_true_and_false_splits() {
        let mut rng = rng_for(4321);
        let mut normal = move || {
            loop {
                let u: f64 = rng.gen_range(-1.0..1.0);
                let v: f64 = rng.gen_range(-1.0..1.0);
                let s = u * u + v * v;
                if s > 0.0 && s < 1.0 {
                    return u * (-2.0 * s.ln() / s).sqrt();
                }
            }
        };
        let a: Vec<f64> = (0..500).map(|_| 1.0 + normal()).collect();
        let b: Vec<f64> = (0..500).map(|_| 0.5 + 0.7 * normal()).collect();
        let c: Vec<f64> = (0..500).map(|_| 2.0 + 1.3 * normal()).collect();
        let full: Vec<f64> = (0..500)
            .map(|_| 1.0 + normal() + 0.5 + 0.7 * normal() + 2.0 + 1.3 * normal())
            .collect();
        let report = decomposition_check(&full, &[&a, &b, &c], 1500, 11).unwrap();
        assert!(report.ks.p_value > 0.01, "true split rejected: p {}", report.ks.p_value);
        assert!(
            report.control.p_value < 0.01,
            "doubled control accepted: p {}",
            report.control.p_value
        );
        assert!(decomposition_check(&full, &[], 100, 1).is_err());
        assert!(decomposition_check(&full, &[&a], 10, 1).is_err());
    }

    #[test]
    fn cross_table_and_estimate_are_consistent() {
        let spec = WalkSpec::lazy_srw(2, 0.5).unwrap();
        let n = 1024u64;
        let suite = make_scale_suite(&spec, n).unwrap();
        let table = build_cross_centering_table(&spec, n, 0.5, 0.5, 500, 606).unwrap();
        assert!(table.mean > 0.0);
        assert!(table.sd > 0.0);
        let path = sample_path(&spec, n, 17).unwrap();
        let est = cross_estimate(&path, &suite, 0.5, 0.5, &table).unwrap();
        let scale = suite.b(n as f64).powi(2) / (n as f64 * n as f64);
        let want = (cross_pair_count(&path, 0.5, 0.5).unwrap() as f64 - table.mean) * scale;
        assert!((est - want).abs() < 1e-12 * want.abs().max(1.0));
        assert!(cross_estimate(&path, &suite, 0.4, 0.5, &table).is_err());
    }
}
