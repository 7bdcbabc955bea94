//! Hamiltonians of the constrained model families, compiled to local
//! flip rules and scanned over a basis.
//!
//! A rule fires on a configuration `s` when every bit of `occupied` is set
//! and every bit of `empty` is clear; it then connects `s` to `s ^ flip`.
//! A nearest-neighbour hop is two rules (one per direction), a pair flip
//! is two rules (pair filled / pair empty).

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KcmError, Result};
use crate::fock::{Geometry, SectorBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    East,
    EastWest,
    NorthEast,
    PairFlip,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::East => "east",
            Family::EastWest => "east_west",
            Family::NorthEast => "north_east",
            Family::PairFlip => "pair_flip",
        }
    }

    pub fn conserves_particles(&self) -> bool {
        !matches!(self, Family::PairFlip)
    }
}

impl std::str::FromStr for Family {
    type Err = KcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "east" => Ok(Family::East),
            "east_west" | "eastwest" => Ok(Family::EastWest),
            "north_east" | "northeast" => Ok(Family::NorthEast),
            "pair_flip" | "pairflip" => Ok(Family::PairFlip),
            other => Err(KcmError::Parse(format!("unknown model family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub range: usize,
    pub couplings: Vec<f64>,
    pub geometry: Geometry,
}

impl ModelSpec {
    /// Range-`r` East or East-West chain with unit couplings.
    pub fn chain(family: Family, range: usize, sites: usize) -> Result<Self> {
        let geometry = Geometry::chain(sites)?;
        let spec = match family {
            Family::East | Family::EastWest => {
                ModelSpec { family, range, couplings: vec![1.0; range], geometry }
            }
            Family::PairFlip => ModelSpec { family, range: 1, couplings: vec![1.0], geometry },
            Family::NorthEast => {
                return Err(KcmError::GeometryMismatch(
                    "north_east needs a rectangle".into(),
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn east(range: usize, sites: usize) -> Result<Self> {
        ModelSpec::chain(Family::East, range, sites)
    }

    pub fn east_west(range: usize, sites: usize) -> Result<Self> {
        ModelSpec::chain(Family::EastWest, range, sites)
    }

    pub fn pair_flip(sites: usize) -> Result<Self> {
        ModelSpec::chain(Family::PairFlip, 1, sites)
    }

    pub fn north_east(lx: usize, ly: usize) -> Result<Self> {
        let spec = ModelSpec {
            family: Family::NorthEast,
            range: 1,
            couplings: vec![1.0],
            geometry: Geometry::rectangle(lx, ly)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_couplings(mut self, couplings: Vec<f64>) -> Result<Self> {
        self.couplings = couplings;
        self.validate()?;
        Ok(self)
    }

    /// Same model on a different lattice.
    pub fn with_geometry(&self, geometry: Geometry) -> Result<Self> {
        let spec = ModelSpec { geometry, ..self.clone() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if self.range == 0 {
            return Err(KcmError::Domain("range must be at least 1".into()));
        }
        if self.couplings.iter().any(|t| !t.is_finite()) {
            return Err(KcmError::Domain("couplings must be finite".into()));
        }
        match self.family {
            Family::East | Family::EastWest => {
                if !self.geometry.is_chain() {
                    return Err(KcmError::GeometryMismatch(format!(
                        "{} is defined on chains",
                        self.family.name()
                    )));
                }
                if self.couplings.len() != self.range {
                    return Err(KcmError::Domain(format!(
                        "range {} needs {} couplings, got {}",
                        self.range,
                        self.range,
                        self.couplings.len()
                    )));
                }
            }
            Family::NorthEast => {
                if self.range != 1 {
                    return Err(KcmError::Unsupported(format!(
                        "north_east only exists at range 1, got {}",
                        self.range
                    )));
                }
                if self.geometry.is_chain() {
                    return Err(KcmError::GeometryMismatch(
                        "north_east needs a rectangle".into(),
                    ));
                }
            }
            Family::PairFlip => {
                if self.range != 1 {
                    return Err(KcmError::Unsupported("pair_flip has no range".into()));
                }
                if !self.geometry.is_chain() {
                    return Err(KcmError::GeometryMismatch(
                        "pair_flip is defined on chains".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.geometry.site_count()
    }

    /// Compiled local rules for this model.
    pub fn rules(&self) -> Vec<FlipRule> {
        match self.family {
            Family::East => east_rules(self.sites(), &self.couplings, false),
            Family::EastWest => {
                let mut rules = east_rules(self.sites(), &self.couplings, false);
                rules.extend(east_rules(self.sites(), &self.couplings, true));
                rules
            }
            Family::NorthEast => match self.geometry {
                Geometry::Rectangle { lx, ly } => north_east_rules(lx, ly, self.couplings[0]),
                Geometry::Chain { .. } => unreachable!("validated"),
            },
            Family::PairFlip => pair_flip_rules(self.sites(), self.couplings[0]),
        }
    }

    pub fn has_integer_couplings(&self) -> bool {
        self.couplings.iter().all(|t| t.fract() == 0.0)
    }
}

/// One local process. `bond` labels the hopping bond (0-based, the left
/// site of a chain hop) for disorder that scales whole bonds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipRule {
    pub flip: u64,
    pub occupied: u64,
    pub empty: u64,
    pub amplitude: f64,
    pub bond: usize,
}

impl FlipRule {
    #[inline]
    pub fn fires(&self, s: u64) -> bool {
        s & self.occupied == self.occupied && s & self.empty == 0
    }
}

fn hop_pair(a: usize, b: usize, occ: u64, empty: u64, amp: f64, bond: usize) -> [FlipRule; 2] {
    let (ba, bb) = (1u64 << a, 1u64 << b);
    [
        FlipRule { flip: ba | bb, occupied: occ | ba, empty: empty | bb, amplitude: amp, bond },
        FlipRule { flip: ba | bb, occupied: occ | bb, empty: empty | ba, amplitude: amp, bond },
    ]
}

/// East rules; `mirror` produces the spatially reflected (West) copy.
fn east_rules(sites: usize, couplings: &[f64], mirror: bool) -> Vec<FlipRule> {
    let refl = |bit: usize| if mirror { sites - 1 - bit } else { bit };
    let mut rules = Vec::new();
    for i in 0..sites.saturating_sub(1) {
        // East: hop on bits (i, i+1), enabled by the nearest particle left of
        // bit i at distance l, the l-1 bits between being empty.
        for (l0, &t) in couplings.iter().enumerate() {
            let l = l0 + 1;
            if t == 0.0 || l > i {
                continue;
            }
            let occ = 1u64 << refl(i - l);
            let empty = ((i - l + 1)..i).fold(0u64, |m, k| m | 1 << refl(k));
            let (a, b) = (refl(i), refl(i + 1));
            rules.extend(hop_pair(a, b, occ, empty, t, a.min(b)));
        }
    }
    rules
}

fn north_east_rules(lx: usize, ly: usize, t: f64) -> Vec<FlipRule> {
    let bit = |x: usize, y: usize| (y - 1) * lx + (x - 1);
    let mut rules = Vec::new();
    if t == 0.0 {
        return rules;
    }
    for y in 2..=ly {
        for x in 2..=lx {
            let occ = 1u64 << bit(x - 1, y) | 1u64 << bit(x, y - 1);
            if x < lx {
                rules.extend(hop_pair(bit(x, y), bit(x + 1, y), occ, 0, t, bit(x, y)));
            }
            if y < ly {
                rules.extend(hop_pair(bit(x, y), bit(x, y + 1), occ, 0, t, bit(x, y)));
            }
        }
    }
    rules
}

fn pair_flip_rules(sites: usize, t: f64) -> Vec<FlipRule> {
    let mut rules = Vec::new();
    if t == 0.0 {
        return rules;
    }
    for j in 0..sites.saturating_sub(2) {
        let pair = 1u64 << j | 1u64 << (j + 2);
        let center = 1u64 << (j + 1);
        rules.push(FlipRule { flip: pair, occupied: center | pair, empty: 0, amplitude: t, bond: j });
        rules.push(FlipRule { flip: pair, occupied: center, empty: pair, amplitude: t, bond: j });
    }
    rules
}

/// All configurations connected to `s` by one rule, amplitudes of rules with
/// the same target summed.
pub fn neighbors(rules: &[FlipRule], s: u64) -> Vec<(u64, f64)> {
    let mut out: Vec<(u64, f64)> = Vec::new();
    for rule in rules.iter().filter(|r| r.fires(s)) {
        let t = s ^ rule.flip;
        match out.iter_mut().find(|(u, _)| *u == t) {
            Some(entry) => entry.1 += rule.amplitude,
            None => out.push((t, rule.amplitude)),
        }
    }
    out.retain(|&(_, a)| a != 0.0);
    out
}

/// Applies the model to a sparse vector given as configuration/amplitude
/// pairs, without building a basis.
pub fn apply_sparse(rules: &[FlipRule], v: &[(u64, f64)]) -> HashMap<u64, f64> {
    let mut out: HashMap<u64, f64> = HashMap::new();
    for &(s, a) in v {
        for (t, h) in neighbors(rules, s) {
            *out.entry(t).or_insert(0.0) += h * a;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    UncorrelatedHopping,
    TunnelingDisorder,
    OnsiteDisorder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub strength: f64,
    pub seed: Option<u64>,
}

impl PerturbationSpec {
    pub fn uncorrelated_hopping(epsilon: f64) -> Self {
        PerturbationSpec { kind: PerturbationKind::UncorrelatedHopping, strength: epsilon, seed: None }
    }

    pub fn tunneling_disorder(g: f64, seed: u64) -> Self {
        PerturbationSpec { kind: PerturbationKind::TunnelingDisorder, strength: g, seed: Some(seed) }
    }

    pub fn onsite_disorder(g: f64, seed: u64) -> Self {
        PerturbationSpec { kind: PerturbationKind::OnsiteDisorder, strength: g, seed: Some(seed) }
    }
}

/// Uniform draws on [-0.5, 0.5], one per site or bond.
pub fn disorder_draws(seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen::<f64>() - 0.5).collect()
}

/// Provenance header for an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorHeader {
    pub family: Family,
    pub range: usize,
    pub couplings: Vec<f64>,
    pub geometry: Geometry,
    pub perturbation: Option<PerturbationSpec>,
}

/// Real symmetric sparse matrix in CSR form over a basis.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    basis: SectorBasis,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    header: OperatorHeader,
}

impl SparseOperator {
    fn from_rows(basis: SectorBasis, rows: Vec<Vec<(u32, f64)>>, header: OperatorHeader) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        SparseOperator { basis, row_ptr, cols, vals, header }
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn header(&self) -> &OperatorHeader {
        &self.header
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().map(|&c| c as usize).zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// Triples `(row, col, value)` in row-major order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Unordered off-diagonal pairs `(i < j, value)`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.triples().filter(|&(i, j, _)| i < j).collect()
    }

    pub fn has_diagonal(&self) -> bool {
        self.triples().any(|(i, j, _)| i == j)
    }

    pub fn is_symmetric(&self) -> bool {
        self.triples().all(|(i, j, v)| self.get(j, i) == v)
    }

    /// All stored values are integers, so exact modular arithmetic sees the
    /// matrix without rounding.
    pub fn is_integer_exact(&self) -> bool {
        self.vals.iter().all(|v| v.fract() == 0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(KcmError::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok((0..self.dim())
            .map(|i| self.row(i).map(|(j, h)| h * v[j]).sum())
            .collect())
    }

    /// `y = H x` for complex vectors stored as separate real/imaginary parts.
    pub fn apply_complex(&self, x: &[num_complex::Complex64], y: &mut [num_complex::Complex64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = num_complex::Complex64::new(0.0, 0.0);
            for (j, h) in self.row(i) {
                acc += x[j] * h;
            }
            *yi = acc;
        }
    }

    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut m = ndarray::Array2::zeros((self.dim(), self.dim()));
        for (i, j, v) in self.triples() {
            m[[i, j]] = v;
        }
        m
    }

    /// `a * self + b * other`, both on the same basis.
    pub fn add_scaled(&self, a: f64, other: &SparseOperator, b: f64) -> Result<SparseOperator> {
        if self.basis.states() != other.basis.states() {
            return Err(KcmError::GeometryMismatch("operators live on different bases".into()));
        }
        let rows = (0..self.dim())
            .map(|i| {
                let mut row: Vec<(u32, f64)> = Vec::new();
                let mut push = |j: usize, v: f64| match row.iter_mut().find(|e| e.0 == j as u32) {
                    Some(e) => e.1 += v,
                    None => row.push((j as u32, v)),
                };
                self.row(i).for_each(|(j, v)| push(j, a * v));
                other.row(i).for_each(|(j, v)| push(j, b * v));
                row.retain(|e| e.1 != 0.0);
                row
            })
            .collect();
        Ok(SparseOperator::from_rows(self.basis.clone(), rows, self.header.clone()))
    }

    /// Restriction to a subset of basis indices (rows and columns).
    pub fn restrict(&self, indices: &[usize]) -> Result<SparseOperator> {
        let sub = self.basis.subset(indices)?;
        let rows = sub
            .states()
            .iter()
            .map(|&s| {
                let i = self.basis.index_of(s).expect("subset of basis");
                self.row(i)
                    .filter_map(|(j, v)| sub.index_of(self.basis.state(j)).map(|k| (k as u32, v)))
                    .collect()
            })
            .collect();
        Ok(SparseOperator::from_rows(sub, rows, self.header.clone()))
    }

    /// CSV triple list with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for (i, j, v) in self.triples() {
            out.push_str(&format!("{i},{j},{}\n", crate::io::fmt_f64(v)));
        }
        out
    }
}

fn scan_rows(
    basis: &SectorBasis,
    rules: &[FlipRule],
    scale: impl Fn(&FlipRule) -> f64 + Sync,
) -> Result<Vec<Vec<(u32, f64)>>> {
    basis
        .states()
        .par_iter()
        .map(|&s| {
            let mut row: Vec<(u32, f64)> = Vec::new();
            for rule in rules.iter().filter(|r| r.fires(s)) {
                let t = s ^ rule.flip;
                let j = basis.index_of(t).ok_or_else(|| {
                    KcmError::Domain(format!(
                        "basis is not closed: {} connects to {}",
                        basis.geometry().format_state(s),
                        basis.geometry().format_state(t)
                    ))
                })?;
                let amp = rule.amplitude * scale(rule);
                match row.iter_mut().find(|e| e.0 == j as u32) {
                    Some(e) => e.1 += amp,
                    None => row.push((j as u32, amp)),
                }
            }
            row.retain(|e| e.1 != 0.0);
            Ok(row)
        })
        .collect()
}

fn check_geometry(spec: &ModelSpec, basis: &SectorBasis) -> Result<()> {
    spec.validate()?;
    if spec.geometry != basis.geometry() {
        return Err(KcmError::GeometryMismatch(format!(
            "model on {} but basis on {}",
            spec.geometry,
            basis.geometry()
        )));
    }
    Ok(())
}

pub fn build_hamiltonian(spec: &ModelSpec, basis: &SectorBasis) -> Result<SparseOperator> {
    check_geometry(spec, basis)?;
    let rows = scan_rows(basis, &spec.rules(), |_| 1.0)?;
    let header = OperatorHeader {
        family: spec.family,
        range: spec.range,
        couplings: spec.couplings.clone(),
        geometry: spec.geometry,
        perturbation: None,
    };
    Ok(SparseOperator::from_rows(basis.clone(), rows, header))
}

/// The perturbation operator alone (not added to the base model, except for
/// tunneling disorder, which by construction replaces it).
pub fn build_perturbation(
    p: &PerturbationSpec,
    base: &ModelSpec,
    basis: &SectorBasis,
) -> Result<SparseOperator> {
    check_geometry(base, basis)?;
    if !(p.strength >= 0.0 && p.strength.is_finite()) {
        return Err(KcmError::Domain(format!("strength must be >= 0, got {}", p.strength)));
    }
    let header = OperatorHeader {
        family: base.family,
        range: base.range,
        couplings: base.couplings.clone(),
        geometry: base.geometry,
        perturbation: Some(p.clone()),
    };
    let sites = base.sites();
    let rows = match p.kind {
        PerturbationKind::UncorrelatedHopping => {
            if !base.geometry.is_chain() {
                return Err(KcmError::Unsupported(
                    "uncorrelated hopping is defined on chains".into(),
                ));
            }
            let rules: Vec<FlipRule> = (0..sites.saturating_sub(1))
                .flat_map(|i| hop_pair(i, i + 1, 0, 0, p.strength, i))
                .collect();
            scan_rows(basis, &rules, |_| 1.0)?
        }
        PerturbationKind::TunnelingDisorder => {
            let seed = p.seed.ok_or_else(|| KcmError::Domain("disorder needs a seed".into()))?;
            let omega = disorder_draws(seed, sites);
            let g = p.strength;
            scan_rows(basis, &base.rules(), |r| 1.0 + g * omega[r.bond])?
        }
        PerturbationKind::OnsiteDisorder => {
            let seed = p.seed.ok_or_else(|| KcmError::Domain("disorder needs a seed".into()))?;
            let omega = disorder_draws(seed, sites);
            basis
                .states()
                .iter()
                .enumerate()
                .map(|(i, &s)| {
                    let d: f64 = (0..sites)
                        .filter(|&k| s >> k & 1 == 1)
                        .map(|k| p.strength * omega[k])
                        .sum();
                    if d == 0.0 {
                        vec![]
                    } else {
                        vec![(i as u32, d)]
                    }
                })
                .collect()
        }
    };
    Ok(SparseOperator::from_rows(basis.clone(), rows, header))
}

/// Bit reversal of a chain configuration.
pub fn reflect(bits: u64, sites: usize) -> u64 {
    bits.reverse_bits() >> (64 - sites)
}
