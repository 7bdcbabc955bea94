//! Chiral colouring, mismatch bounds and zero-mode counting.

use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};
use crate::fock::{binomial, Geometry, SectorBasis};
use crate::fragmentation::FragmentationReport;
use crate::models::SparseOperator;
use crate::modp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sublattice {
    /// Even sites on chains, `x + y` even on rectangles.
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChiralOperator {
    /// Parity of the particle number on one sublattice.
    SublatticeParity { sublattice: Sublattice },
    /// `(-1)^{N(N-1)/2}`.
    PairFlipPhase,
}

impl Default for ChiralOperator {
    fn default() -> Self {
        ChiralOperator::SublatticeParity { sublattice: Sublattice::Even }
    }
}

impl ChiralOperator {
    pub fn for_family(family: crate::models::Family) -> Self {
        match family {
            crate::models::Family::PairFlip => ChiralOperator::PairFlipPhase,
            _ => ChiralOperator::default(),
        }
    }

    /// `true` for odd states.
    pub fn is_odd(&self, geometry: Geometry, bits: u64) -> bool {
        match *self {
            ChiralOperator::SublatticeParity { sublattice } => {
                (bits & sublattice_mask(geometry, sublattice)).count_ones() % 2 == 1
            }
            ChiralOperator::PairFlipPhase => {
                let n = bits.count_ones() as u64;
                (n * n.saturating_sub(1) / 2) % 2 == 1
            }
        }
    }
}

/// Bits of the chosen sublattice.
pub fn sublattice_mask(geometry: Geometry, sublattice: Sublattice) -> u64 {
    let want_even = sublattice == Sublattice::Even;
    match geometry {
        Geometry::Chain { sites } => (1..=sites)
            .filter(|i| (i % 2 == 0) == want_even)
            .fold(0, |m, i| m | 1 << (i - 1)),
        Geometry::Rectangle { lx, ly } => {
            let mut m = 0u64;
            for y in 1..=ly {
                for x in 1..=lx {
                    if ((x + y) % 2 == 0) == want_even {
                        m |= 1 << ((y - 1) * lx + x - 1);
                    }
                }
            }
            m
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiralColoring {
    pub odd: Vec<bool>,
    pub n_even: usize,
    pub n_odd: usize,
    pub operator: ChiralOperator,
}

impl ChiralColoring {
    pub fn mismatch(&self) -> usize {
        self.n_even.abs_diff(self.n_odd)
    }

    /// Diagonal of the chiral operator, `+1` even, `-1` odd.
    pub fn signs(&self) -> Vec<f64> {
        self.odd.iter().map(|&o| if o { -1.0 } else { 1.0 }).collect()
    }

    /// Basis indices, even states first.
    pub fn parity_order(&self) -> Vec<usize> {
        let d = self.odd.len();
        (0..d).filter(|&i| !self.odd[i]).chain((0..d).filter(|&i| self.odd[i])).collect()
    }
}

pub fn color(basis: &SectorBasis, operator: ChiralOperator) -> ChiralColoring {
    let g = basis.geometry();
    let odd: Vec<bool> = basis.states().iter().map(|&s| operator.is_odd(g, s)).collect();
    let n_odd = odd.iter().filter(|&&o| o).count();
    ChiralColoring { n_even: odd.len() - n_odd, n_odd, odd, operator }
}

/// `|sum_n (-1)^n C(L_A, n) C(L - L_A, N - n)|`.
pub fn mismatch_formula(sites: usize, particles: usize, la: usize) -> Result<u128> {
    if particles > sites || la > sites {
        return Err(KcmError::Domain(format!(
            "need 0 <= N, L_A <= L, got L={sites} N={particles} L_A={la}"
        )));
    }
    let lb = sites - la;
    let lo = particles.saturating_sub(lb);
    let hi = particles.min(la);
    let mut sum: i128 = 0;
    for n in lo..=hi {
        let term = (binomial(la, n) * binomial(lb, particles - n)) as i128;
        sum += if n % 2 == 0 { term } else { -term };
    }
    Ok(sum.unsigned_abs())
}

/// Closed form of the mismatch at `L = 3N - 2`.
pub fn mismatch_closed_form(particles: usize) -> Result<u128> {
    let n = particles;
    if n < 2 {
        return Err(KcmError::Domain(format!("closed form needs N >= 2, got {n}")));
    }
    Ok(if n.is_multiple_of(2) {
        2 * binomial(3 * n / 2 - 1, n)
    } else {
        3 * binomial((3 * n - 5) / 2, n - 1)
    })
}

/// Leading asymptotic growth of the even-`N` closed form.
pub fn mismatch_asymptote(particles: usize) -> f64 {
    let n = particles as f64;
    2f64.powf(1.0 - n) * 3f64.powf(1.5 * n) / (6.0 * std::f64::consts::PI * n).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MismatchReport {
    pub m: usize,
    pub m_frag: usize,
    pub per_sector: Vec<usize>,
    /// Sectors whose majority colour is opposite to the global majority.
    pub flipped: Vec<usize>,
}

pub fn fragmented_mismatch(
    coloring: &ChiralColoring,
    report: &FragmentationReport,
) -> Result<MismatchReport> {
    if coloring.odd.len() != report.sector_id.len() {
        return Err(KcmError::DimensionMismatch {
            expected: report.sector_id.len(),
            got: coloring.odd.len(),
        });
    }
    let k = report.sector_count();
    let mut even = vec![0i64; k];
    let mut odd = vec![0i64; k];
    for (i, &id) in report.sector_id.iter().enumerate() {
        if coloring.odd[i] {
            odd[id] += 1;
        } else {
            even[id] += 1;
        }
    }
    let global = coloring.n_even as i64 - coloring.n_odd as i64;
    let per_sector: Vec<usize> = (0..k).map(|i| (even[i] - odd[i]).unsigned_abs() as usize).collect();
    let flipped = (0..k)
        .filter(|&i| {
            let d = even[i] - odd[i];
            d != 0 && global != 0 && d.signum() != global.signum()
        })
        .collect();
    Ok(MismatchReport {
        m: coloring.mismatch(),
        m_frag: per_sector.iter().sum(),
        per_sector,
        flipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMethod {
    Exact,
    Numeric,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroModeCount {
    pub n_zm: usize,
    pub exact: Option<usize>,
    pub numeric: Option<usize>,
    /// `(prime, rank)` for every prime field used.
    pub prime_ranks: Vec<(u64, usize)>,
}

/// Default relative singular-value cut for the numeric kernel.
pub const KERNEL_TOLERANCE: f64 = 1e-10;

/// Largest dimension the numeric path will diagonalise densely.
pub const DENSE_BUDGET: usize = 6000;

/// `dim ker H`. The exact path uses multi-prime rank, the numeric path
/// counts `|E| < tol * max|E|`. With [`CountMethod::Both`] a disagreement
/// is a cross-check error.
pub fn zero_mode_count(h: &SparseOperator, method: CountMethod) -> Result<ZeroModeCount> {
    let d = h.dim();
    let mut out = ZeroModeCount { n_zm: 0, exact: None, numeric: None, prime_ranks: vec![] };
    if matches!(method, CountMethod::Exact | CountMethod::Both) {
        let r = modp::certified_rank(h)?;
        out.exact = Some(d - r.rank);
        out.prime_ranks = r.ranks;
    }
    if matches!(method, CountMethod::Numeric | CountMethod::Both) {
        if d > DENSE_BUDGET {
            return Err(KcmError::Budget(format!(
                "numeric kernel of dimension {d} exceeds {DENSE_BUDGET}"
            )));
        }
        out.numeric = Some(crate::linalg::numeric_kernel_dim(h, KERNEL_TOLERANCE)?);
    }
    if let (Some(e), Some(n)) = (out.exact, out.numeric) {
        if e != n {
            return Err(KcmError::CrossCheck(format!(
                "exact kernel dimension {e} but numeric {n}"
            )));
        }
    }
    out.n_zm = out.exact.or(out.numeric).unwrap_or(0);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::enumerate_basis;

    #[test]
    fn small_colorings() {
        let g = Geometry::chain(4).unwrap();
        let op = ChiralOperator::default();
        let odd = |s: &str| op.is_odd(g, g.parse_state(s).unwrap());
        assert!(odd("1100"));
        assert!(!odd("1010"));
        assert!(odd("1001"));
        assert!(!odd("0000"));
        let g3 = Geometry::chain(3).unwrap();
        assert!(ChiralOperator::PairFlipPhase.is_odd(g3, 0b111));
        assert!(!ChiralOperator::PairFlipPhase.is_odd(g3, 0b010));
    }

    #[test]
    fn mismatch_examples() {
        assert_eq!(mismatch_formula(10, 4, 5).unwrap(), 10);
        assert_eq!(mismatch_formula(4, 2, 2).unwrap(), 2);
        assert_eq!(mismatch_formula(7, 3, 3).unwrap(), 3);
        assert_eq!(mismatch_closed_form(4).unwrap(), 10);
        assert_eq!(mismatch_closed_form(2).unwrap(), 2);
        assert_eq!(2 * mismatch_closed_form(5).unwrap(), 3 * mismatch_closed_form(4).unwrap());
        assert!(mismatch_closed_form(1).is_err());
        assert!(mismatch_formula(3, 4, 1).is_err());
    }

    #[test]
    fn checkerboard_mask() {
        let g = Geometry::rectangle(2, 2).unwrap();
        // (1,1) and (2,2) have x+y even
        assert_eq!(sublattice_mask(g, Sublattice::Even), 0b1001);
        assert_eq!(sublattice_mask(g, Sublattice::Odd), 0b0110);
        let c = color(&enumerate_basis(g, Some(1)).unwrap(), ChiralOperator::default());
        assert_eq!((c.n_even, c.n_odd), (2, 2));
    }
}
