//! Occupation-number bases for hard-core particles on chains and rectangles.
//!
//! Every configuration is packed into a `u64`: site `i` of a chain (1-based)
//! is bit `i - 1`, and site `(x, y)` of an `lx x ly` rectangle is bit
//! `(y - 1) * lx + (x - 1)`. Bases are kept sorted by the numeric value of
//! the word, which is the only ordering used for hashing and I/O.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};

pub const MAX_SITES: usize = 64;

/// Largest basis we are willing to materialise in memory.
pub const MAX_BASIS_LEN: u128 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Chain { sites: usize },
    Rectangle { lx: usize, ly: usize },
}

impl Geometry {
    pub fn chain(sites: usize) -> Result<Self> {
        let g = Geometry::Chain { sites };
        g.validate()?;
        Ok(g)
    }

    pub fn rectangle(lx: usize, ly: usize) -> Result<Self> {
        let g = Geometry::Rectangle { lx, ly };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Geometry::Chain { sites: 0 } => {
                Err(KcmError::Domain("a chain needs at least one site".into()))
            }
            Geometry::Rectangle { lx, ly } if lx == 0 || ly == 0 => {
                Err(KcmError::Domain("rectangle dimensions must be positive".into()))
            }
            _ if self.site_count() > MAX_SITES => Err(KcmError::Capacity(format!(
                "{} sites exceed the {MAX_SITES}-site bit budget",
                self.site_count()
            ))),
            _ => Ok(()),
        }
    }

    pub fn site_count(&self) -> usize {
        match *self {
            Geometry::Chain { sites } => sites,
            Geometry::Rectangle { lx, ly } => lx * ly,
        }
    }

    pub fn is_chain(&self) -> bool {
        matches!(self, Geometry::Chain { .. })
    }

    pub fn full_mask(&self) -> u64 {
        mask_of_len(self.site_count())
    }

    pub fn contains(&self, bits: u64) -> bool {
        bits & !self.full_mask() == 0
    }

    /// Bit position of the 1-based site `(x, y)`; chains ignore `y` and
    /// require it to be 1.
    pub fn bit(&self, x: usize, y: usize) -> Option<usize> {
        match *self {
            Geometry::Chain { sites } => (y == 1 && x >= 1 && x <= sites).then(|| x - 1),
            Geometry::Rectangle { lx, ly } => {
                (x >= 1 && x <= lx && y >= 1 && y <= ly).then(|| (y - 1) * lx + (x - 1))
            }
        }
    }

    /// String form used in every CSV/JSON artifact: `1`/`0` from site 1
    /// upward, rectangle rows (y = 1 first) separated by `/`.
    pub fn format_state(&self, bits: u64) -> String {
        match *self {
            Geometry::Chain { sites } => bit_string(bits, sites),
            Geometry::Rectangle { lx, ly } => (0..ly)
                .map(|row| bit_string(bits >> (row * lx), lx))
                .collect::<Vec<_>>()
                .join("/"),
        }
    }

    pub fn parse_state(&self, s: &str) -> Result<u64> {
        let flat: String = match *self {
            Geometry::Chain { .. } => s.to_string(),
            Geometry::Rectangle { lx, ly } => {
                let rows: Vec<&str> = s.split('/').collect();
                if rows.len() != ly || rows.iter().any(|r| r.len() != lx) {
                    return Err(KcmError::Parse(format!(
                        "expected {ly} rows of {lx} sites, got {s:?}"
                    )));
                }
                rows.concat()
            }
        };
        if flat.len() != self.site_count() {
            return Err(KcmError::Parse(format!(
                "expected {} sites, got {:?}",
                self.site_count(),
                s
            )));
        }
        parse_bits(&flat)
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Geometry::Chain { sites } => write!(f, "chain({sites})"),
            Geometry::Rectangle { lx, ly } => write!(f, "rect({lx}x{ly})"),
        }
    }
}

pub(crate) fn mask_of_len(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

fn bit_string(bits: u64, len: usize) -> String {
    (0..len)
        .map(|i| if bits >> i & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn parse_bits(s: &str) -> Result<u64> {
    if s.len() > MAX_SITES {
        return Err(KcmError::Capacity(format!("{} sites", s.len())));
    }
    s.chars().enumerate().try_fold(0u64, |acc, (i, c)| match c {
        '1' => Ok(acc | 1 << i),
        '0' => Ok(acc),
        _ => Err(KcmError::Parse(format!("invalid occupation {c:?} in {s:?}"))),
    })
}

/// A product state on a 1D fragment of `len` sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockState {
    bits: u64,
    len: u8,
}

impl FockState {
    pub fn new(bits: u64, len: usize) -> Result<Self> {
        if len > MAX_SITES {
            return Err(KcmError::Capacity(format!("{len} sites")));
        }
        if bits & !mask_of_len(len) != 0 {
            return Err(KcmError::Domain(format!(
                "bits {bits:#x} set beyond site {len}"
            )));
        }
        Ok(FockState { bits, len: len as u8 })
    }

    pub fn empty(len: usize) -> Result<Self> {
        FockState::new(0, len)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn particle_count(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Occupation of the 1-based site `i`.
    pub fn occupied(&self, i: usize) -> bool {
        i >= 1 && i <= self.len() && self.bits >> (i - 1) & 1 == 1
    }

    /// `self` followed by `other`, site order preserved.
    pub fn append(&self, other: &FockState) -> Result<FockState> {
        let len = self.len() + other.len();
        if len > MAX_SITES {
            return Err(KcmError::Capacity(format!(
                "concatenation needs {len} sites"
            )));
        }
        let shifted = if self.len() >= 64 { 0 } else { other.bits << self.len() };
        FockState::new(self.bits | shifted, len)
    }

    pub fn repeat(&self, times: usize) -> Result<FockState> {
        (0..times).try_fold(FockState::empty(0)?, |acc, _| acc.append(self))
    }
}

/// Bitwise concatenation `left ⊗ pad ⊗ right`.
pub fn concat(left: &FockState, pad: &FockState, right: &FockState) -> Result<FockState> {
    left.append(pad)?.append(right)
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bit_string(self.bits, self.len()))
    }
}

impl FromStr for FockState {
    type Err = KcmError;

    fn from_str(s: &str) -> Result<Self> {
        let bits = parse_bits(s)?;
        FockState::new(bits, s.len())
    }
}

/// Product-state units repeated on either side of a state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddingSpec {
    pub left_unit: FockState,
    pub right_unit: FockState,
    pub left_repeats: usize,
    pub right_repeats: usize,
}

impl PaddingSpec {
    pub fn new(left_unit: FockState, right_unit: FockState) -> Result<Self> {
        if left_unit.is_empty() || right_unit.is_empty() {
            return Err(KcmError::Domain("padding units need at least one site".into()));
        }
        Ok(PaddingSpec { left_unit, right_unit, left_repeats: 0, right_repeats: 0 })
    }

    /// Single empty site on both sides.
    pub fn empty_sites() -> Self {
        let unit = FockState::empty(1).expect("one site fits");
        PaddingSpec { left_unit: unit, right_unit: unit, left_repeats: 0, right_repeats: 0 }
    }

    pub fn with_repeats(mut self, left: usize, right: usize) -> Self {
        self.left_repeats = left;
        self.right_repeats = right;
        self
    }

    pub fn is_all_empty(&self) -> bool {
        self.left_unit.bits() == 0 && self.right_unit.bits() == 0
    }
}

/// An ordered set of product states: one dynamical sector, a fixed-N space,
/// or the full space of a geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBasis {
    geometry: Geometry,
    particles: Option<usize>,
    states: Vec<u64>,
}

impl SectorBasis {
    /// Sorts and deduplicates `states`. The particle number is recorded
    /// when all states share it.
    pub fn from_states(geometry: Geometry, mut states: Vec<u64>) -> Result<Self> {
        geometry.validate()?;
        if let Some(&bad) = states.iter().find(|&&s| !geometry.contains(s)) {
            return Err(KcmError::GeometryMismatch(format!(
                "state {bad:#x} does not fit {geometry}"
            )));
        }
        states.sort_unstable();
        states.dedup();
        let particles = match states.first() {
            Some(first) => {
                let n = first.count_ones();
                states.iter().all(|s| s.count_ones() == n).then_some(n as usize)
            }
            None => None,
        };
        Ok(SectorBasis { geometry, particles, states })
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn particles(&self) -> Option<usize> {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn state(&self, i: usize) -> u64 {
        self.states[i]
    }

    /// Position of `bits` in the basis. The sorted list doubles as the
    /// reverse index.
    pub fn index_of(&self, bits: u64) -> Option<usize> {
        self.states.binary_search(&bits).ok()
    }

    pub fn contains(&self, bits: u64) -> bool {
        self.index_of(bits).is_some()
    }

    pub fn format_state(&self, i: usize) -> String {
        self.geometry.format_state(self.states[i])
    }

    pub fn subset(&self, indices: &[usize]) -> Result<SectorBasis> {
        SectorBasis::from_states(self.geometry, indices.iter().map(|&i| self.states[i]).collect())
    }
}

/// Exact binomial coefficient; zero outside `0 <= k <= n`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All product states of `geometry`, or only those with `particles`
/// particles, in ascending numeric order.
pub fn enumerate_basis(geometry: Geometry, particles: Option<usize>) -> Result<SectorBasis> {
    geometry.validate()?;
    let sites = geometry.site_count();
    let states = match particles {
        Some(n) => {
            if n > sites {
                return Err(KcmError::Domain(format!(
                    "{n} particles do not fit on {sites} sites"
                )));
            }
            let count = binomial(sites, n);
            if count > MAX_BASIS_LEN {
                return Err(KcmError::Capacity(format!("C({sites},{n}) = {count} states")));
            }
            fixed_popcount_words(sites, n)
        }
        None => {
            if sites >= 31 {
                return Err(KcmError::Capacity(format!("2^{sites} states")));
            }
            (0..1u64 << sites).collect()
        }
    };
    Ok(SectorBasis { geometry, particles, states })
}

/// Words with `n` set bits below bit `sites`, ascending (Gosper's hack).
fn fixed_popcount_words(sites: usize, n: usize) -> Vec<u64> {
    if n == 0 {
        return vec![0];
    }
    let limit = mask_of_len(sites);
    let mut out = Vec::with_capacity(binomial(sites, n) as usize);
    let mut w: u64 = mask_of_len(n);
    loop {
        out.push(w);
        let c = w & w.wrapping_neg();
        let (r, overflow) = w.overflowing_add(c);
        if overflow {
            break;
        }
        let next = (((r ^ w) >> 2) / c) | r;
        if next & !limit != 0 {
            break;
        }
        w = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_binomial_counts() {
        let g = Geometry::chain(4).unwrap();
        assert_eq!(enumerate_basis(g, Some(2)).unwrap().dim(), 6);
        let vac = enumerate_basis(g, Some(0)).unwrap();
        assert_eq!(vac.states(), &[0]);
        let g10 = Geometry::chain(10).unwrap();
        assert_eq!(enumerate_basis(g10, Some(4)).unwrap().dim(), 210);
        assert_eq!(enumerate_basis(g, None).unwrap().dim(), 16);
        assert_eq!(enumerate_basis(g, Some(4)).unwrap().states(), &[0b1111]);
    }

    #[test]
    fn full_width_words() {
        let g = Geometry::chain(64).unwrap();
        let b = enumerate_basis(g, Some(63)).unwrap();
        assert_eq!(b.dim(), 64);
        assert!(b.states().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(enumerate_basis(g, Some(64)).unwrap().states(), &[u64::MAX]);
    }

    #[test]
    fn capacity_and_domain_errors() {
        assert!(matches!(Geometry::chain(65), Err(KcmError::Capacity(_))));
        assert!(matches!(Geometry::rectangle(9, 8), Err(KcmError::Capacity(_))));
        let g = Geometry::chain(4).unwrap();
        assert!(matches!(enumerate_basis(g, Some(5)), Err(KcmError::Domain(_))));
        assert!(matches!(Geometry::chain(0), Err(KcmError::Domain(_))));
    }

    #[test]
    fn concatenation_examples() {
        let l: FockState = "11".parse().unwrap();
        let p: FockState = "000".parse().unwrap();
        let r: FockState = "10".parse().unwrap();
        assert_eq!(concat(&l, &p, &r).unwrap().to_string(), "1100010");

        let one: FockState = "1".parse().unwrap();
        let none = FockState::empty(0).unwrap();
        assert_eq!(concat(&one, &none, &one).unwrap().to_string(), "11");

        let b: FockState = "1001".parse().unwrap();
        let gap: FockState = "0".parse().unwrap();
        let joined = concat(&b, &gap, &b).unwrap();
        assert_eq!(joined.len(), 9);
        assert_eq!(joined.particle_count(), 4);

        let big = FockState::new(1, 40).unwrap();
        assert!(matches!(concat(&big, &gap, &big), Err(KcmError::Capacity(_))));
    }

    #[test]
    fn string_forms() {
        let g = Geometry::chain(4).unwrap();
        assert_eq!(g.format_state(0b1001), "1001");
        assert_eq!(g.format_state(0b0011), "1100");
        assert_eq!(g.parse_state("0110").unwrap(), 0b0110);
        let r = Geometry::rectangle(3, 2).unwrap();
        let bits = 1 << r.bit(1, 1).unwrap() | 1 << r.bit(3, 2).unwrap();
        assert_eq!(r.format_state(bits), "100/001");
        assert_eq!(r.parse_state("100/001").unwrap(), bits);
        assert!(r.parse_state("100001").is_err());
        assert!(g.parse_state("10x1").is_err());
    }

    #[test]
    fn index_is_inverse_of_list() {
        let g = Geometry::chain(8).unwrap();
        let b = enumerate_basis(g, Some(3)).unwrap();
        for (i, &s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
        }
        assert_eq!(b.index_of(0b1111), None);
    }
}
