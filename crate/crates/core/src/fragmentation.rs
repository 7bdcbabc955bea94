//! Dynamically disconnected sectors: connected components of the
//! Hamiltonian graph, and BFS closures of seed states.

use std::collections::{HashSet, VecDeque};

use serde::Serialize;

use crate::error::{KcmError, Result};
use crate::fock::{enumerate_basis, SectorBasis};
use crate::models::{build_hamiltonian, neighbors, ModelSpec, SparseOperator};

#[derive(Debug, Clone)]
pub struct FragmentationReport {
    /// Sector label of every basis state; labels are ordered by the
    /// smallest (numeric) state they contain.
    pub sector_id: Vec<usize>,
    /// Size of each labelled sector.
    pub sector_sizes: Vec<usize>,
    pub frozen_count: usize,
    pub largest_sector: SectorBasis,
}

#[derive(Debug, Clone, Serialize)]
pub struct FragmentationSummary {
    pub sizes: Vec<usize>,
    pub frozen_count: usize,
    pub largest_seed: String,
}

impl FragmentationReport {
    pub fn sector_count(&self) -> usize {
        self.sector_sizes.len()
    }

    /// Sector sizes in descending order.
    pub fn sizes_descending(&self) -> Vec<usize> {
        let mut s = self.sector_sizes.clone();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    /// Basis indices of sector `id`.
    pub fn members(&self, id: usize) -> Vec<usize> {
        (0..self.sector_id.len()).filter(|&i| self.sector_id[i] == id).collect()
    }

    /// Lexicographically smallest member string, a stable sector name.
    pub fn sector_name(&self, basis: &SectorBasis, id: usize) -> String {
        self.members(id)
            .into_iter()
            .map(|i| basis.format_state(i))
            .min()
            .unwrap_or_default()
    }

    pub fn summary(&self) -> FragmentationSummary {
        FragmentationSummary {
            sizes: self.sizes_descending(),
            frozen_count: self.frozen_count,
            largest_seed: self
                .largest_sector
                .states()
                .first()
                .map(|&s| self.largest_sector.geometry().format_state(s))
                .unwrap_or_default(),
        }
    }

    pub fn to_csv(&self, basis: &SectorBasis) -> crate::io::CsvTable {
        let mut t = crate::io::CsvTable::new(["state", "sector_id"]);
        for (i, id) in self.sector_id.iter().enumerate() {
            t.push(vec![basis.format_state(i), id.to_string()]);
        }
        t
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index wins, keeping roots at the smallest member
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

pub fn connected_components(h: &SparseOperator) -> FragmentationReport {
    let d = h.dim();
    let mut uf = UnionFind::new(d);
    for (i, j, _) in h.triples() {
        if i != j {
            uf.union(i, j);
        }
    }
    let mut label = vec![usize::MAX; d];
    let mut sector_id = vec![0; d];
    let mut sizes: Vec<usize> = Vec::new();
    // basis is sorted, so the first visit of a root is its smallest state
    for i in 0..d {
        let root = uf.find(i);
        if label[root] == usize::MAX {
            label[root] = sizes.len();
            sizes.push(0);
        }
        sector_id[i] = label[root];
        sizes[label[root]] += 1;
    }
    let frozen_count = sizes.iter().filter(|&&s| s == 1).count();
    let largest_id = (0..sizes.len()).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)));
    let largest_sector = match largest_id {
        Some(id) => h
            .basis()
            .subset(&(0..d).filter(|&i| sector_id[i] == id).collect::<Vec<_>>())
            .expect("subset of a valid basis"),
        None => h.basis().clone(),
    };
    FragmentationReport { sector_id, sector_sizes: sizes, frozen_count, largest_sector }
}

/// BFS closure of `seed` under the model's moves.
pub fn sector_from_seed(spec: &ModelSpec, seed: u64) -> Result<SectorBasis> {
    spec.validate()?;
    if !spec.geometry.contains(seed) {
        return Err(KcmError::GeometryMismatch(format!(
            "seed {seed:#x} does not fit {}",
            spec.geometry
        )));
    }
    let rules = spec.rules();
    let mut seen: HashSet<u64> = HashSet::from([seed]);
    let mut queue = VecDeque::from([seed]);
    while let Some(s) = queue.pop_front() {
        for (t, _) in neighbors(&rules, s) {
            if seen.insert(t) {
                queue.push_back(t);
            }
        }
    }
    SectorBasis::from_states(spec.geometry, seen.into_iter().collect())
}

/// Sector generated by `seed`; `particles` guards against a seed from the
/// wrong particle-number sector.
pub fn largest_sector_from_seed(
    spec: &ModelSpec,
    seed: u64,
    particles: Option<usize>,
) -> Result<SectorBasis> {
    if let Some(n) = particles {
        if seed.count_ones() as usize != n {
            return Err(KcmError::Domain(format!(
                "seed has {} particles, sector declares {n}",
                seed.count_ones()
            )));
        }
    }
    sector_from_seed(spec, seed)
}

/// `N` particles packed on the first sites.
pub fn domain_wall(particles: usize) -> u64 {
    crate::fock::mask_of_len(particles)
}

/// Largest connected component of the full fixed-`N` space.
pub fn largest_component(spec: &ModelSpec, particles: usize) -> Result<SectorBasis> {
    let basis = enumerate_basis(spec.geometry, Some(particles))?;
    let h = build_hamiltonian(spec, &basis)?;
    Ok(connected_components(&h).largest_sector)
}
