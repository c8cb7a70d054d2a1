//! Packed lattice coordinates and hash containers for distinct-site
//! accounting.
//!
//! A site of Z^d is packed into one u64 by biasing each coordinate into an
//! unsigned field. Packing keeps set and map operations allocation-light and
//! cache-friendly; a walk that leaves the representable box is a hard error
//! surfaced by the caller, never a silent wrap.

use std::collections::{HashMap, HashSet};
use std::hash::{BuildHasherDefault, Hasher};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("dimension must lie in 1..=8, got {0}")]
    BadDimension(usize),
    #[error("coordinate {coord} exceeds the packed box (|x| < 2^{bits_minus_one}) in dimension {dim}")]
    CoordinateOverflow {
        coord: i64,
        bits_minus_one: u32,
        dim: usize,
    },
}

/// Final mixing of a packed site key (SplitMix64 finalizer). Packed keys are
/// highly structured, so the map hasher must do real mixing.
#[inline]
fn mix_key(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hasher specialised to u64 site keys.
#[derive(Default)]
pub struct SiteHasher(u64);

impl Hasher for SiteHasher {
    #[inline]
    fn write_u64(&mut self, x: u64) {
        self.0 = mix_key(x);
    }

    fn write(&mut self, bytes: &[u8]) {
        // Fallback for non-u64 keys; not on the hot path.
        let mut acc = self.0;
        for &b in bytes {
            acc = mix_key(acc ^ u64::from(b));
        }
        self.0 = acc;
    }

    #[inline]
    fn finish(&self) -> u64 {
        self.0
    }
}

pub type SiteBuildHasher = BuildHasherDefault<SiteHasher>;
/// Set of visited sites keyed by packed coordinates.
pub type SiteSet = HashSet<u64, SiteBuildHasher>;
/// Occupation counts keyed by packed coordinates.
pub type SiteCounts = HashMap<u64, u32, SiteBuildHasher>;

pub fn site_set() -> SiteSet {
    SiteSet::default()
}

pub fn site_set_with_capacity(cap: usize) -> SiteSet {
    SiteSet::with_capacity_and_hasher(cap, SiteBuildHasher::default())
}

pub fn site_counts() -> SiteCounts {
    SiteCounts::default()
}

pub fn site_counts_with_capacity(cap: usize) -> SiteCounts {
    SiteCounts::with_capacity_and_hasher(cap, SiteBuildHasher::default())
}

/// Packs d signed coordinates into one u64.
///
/// Field widths: 64 bits for d = 1 (lossless), 32 for d = 2, 21 for d = 3
/// and floor(64/d) for d >= 4. Coordinates outside the box are rejected.
#[derive(Clone, Copy, Debug)]
pub struct SitePacker {
    dim: usize,
    bits: u32,
}

impl SitePacker {
    pub fn new(dim: usize) -> Result<Self, LatticeError> {
        if dim == 0 || dim > 8 {
            return Err(LatticeError::BadDimension(dim));
        }
        let bits = match dim {
            1 => 64,
            2 => 32,
            3 => 21,
            d => 64 / d as u32,
        };
        Ok(Self { dim, bits })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Per-axis field width in bits.
    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Largest representable coordinate magnitude.
    pub fn max_abs(&self) -> i64 {
        if self.bits >= 64 {
            i64::MAX
        } else {
            (1i64 << (self.bits - 1)) - 1
        }
    }

    #[inline]
    pub fn pack(&self, x: &[i64]) -> Result<u64, LatticeError> {
        debug_assert_eq!(x.len(), self.dim);
        if self.bits >= 64 {
            return Ok(x[0] as u64);
        }
        let half = 1i64 << (self.bits - 1);
        let mask = (1u64 << self.bits) - 1;
        let mut key = 0u64;
        for (axis, &c) in x.iter().enumerate() {
            if c < -half || c >= half {
                return Err(LatticeError::CoordinateOverflow {
                    coord: c,
                    bits_minus_one: self.bits - 1,
                    dim: axis,
                });
            }
            key = (key << self.bits) | ((c + half) as u64 & mask);
        }
        Ok(key)
    }

    /// Inverse of `pack`; `out` must have length `dim`.
    pub fn unpack(&self, key: u64, out: &mut [i64]) {
        debug_assert_eq!(out.len(), self.dim);
        if self.bits >= 64 {
            out[0] = key as i64;
            return;
        }
        let half = 1i64 << (self.bits - 1);
        let mask = (1u64 << self.bits) - 1;
        let mut k = key;
        for axis in (0..self.dim).rev() {
            out[axis] = (k & mask) as i64 - half;
            k >>= self.bits;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_is_injective_on_a_small_box() {
        let p = SitePacker::new(3).unwrap();
        let mut seen = site_set();
        for x in -7i64..=7 {
            for y in -7i64..=7 {
                for z in -7i64..=7 {
                    assert!(seen.insert(p.pack(&[x, y, z]).unwrap()));
                }
            }
        }
        assert_eq!(seen.len(), 15 * 15 * 15);
    }

    #[test]
    fn d1_pack_is_identity_cast() {
        let p = SitePacker::new(1).unwrap();
        assert_eq!(p.pack(&[-5]).unwrap(), (-5i64) as u64);
        assert_eq!(p.max_abs(), i64::MAX);
    }

    #[test]
    fn unpack_round_trips() {
        for dim in 1..=5 {
            let p = SitePacker::new(dim).unwrap();
            let m = p.max_abs().min(9);
            let probe: Vec<i64> = (0..dim as i64).map(|i| (i - 2).clamp(-m, m)).collect();
            let key = p.pack(&probe).unwrap();
            let mut back = vec![0i64; dim];
            p.unpack(key, &mut back);
            assert_eq!(back, probe);
        }
        let p1 = SitePacker::new(1).unwrap();
        let mut back = [0i64];
        p1.unpack(p1.pack(&[i64::MIN + 1]).unwrap(), &mut back);
        assert_eq!(back[0], i64::MIN + 1);
    }

    #[test]
    fn overflow_is_detected() {
        let p = SitePacker::new(3).unwrap();
        let m = p.max_abs();
        assert!(p.pack(&[m, 0, 0]).is_ok());
        let err = p.pack(&[m + 1, 0, 0]).unwrap_err();
        assert!(matches!(err, LatticeError::CoordinateOverflow { .. }));
    }

    #[test]
    fn field_widths_follow_dimension() {
        assert_eq!(SitePacker::new(2).unwrap().bits(), 32);
        assert_eq!(SitePacker::new(3).unwrap().bits(), 21);
        assert_eq!(SitePacker::new(4).unwrap().bits(), 16);
        assert!(SitePacker::new(0).is_err());
        assert!(SitePacker::new(9).is_err());
    }
}
