//! Zero-mode subspaces, discriminator operators, bound-state search and
//! certification, and factorizable states.

use std::collections::HashMap;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chiral::{color, ChiralOperator, DENSE_BUDGET, KERNEL_TOLERANCE};
use crate::error::{KcmError, Result};
use crate::fock::{FockState, Geometry, PaddingSpec, SectorBasis};
use crate::linalg;
use crate::models::{Family, ModelSpec, SparseOperator};
use crate::modp::{self, certify, Field, Prefer};
use crate::state::StateVector;

/// Residual and orthonormality thresholds.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-12;

/// Relative cut on Θ eigenvalues, in units of `trace(Θ) / N_ZM`.
pub const THETA_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ZeroModeBasis {
    basis: SectorBasis,
    /// Orthonormal columns spanning `ker H`.
    pub vectors: Array2<f64>,
}

impl ZeroModeBasis {
    pub fn count(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn vector(&self, k: usize) -> Result<StateVector> {
        StateVector::from_dense(&self.basis, &self.vectors.column(k).to_vec())
    }

    /// Sub-basis spanned by `q` (columns expressed in this basis).
    fn rotated(&self, q: &Array2<f64>) -> ZeroModeBasis {
        let mut v = self.vectors.dot(q);
        linalg::fix_phases(&mut v);
        ZeroModeBasis { basis: self.basis.clone(), vectors: v }
    }
}

/// Dense kernel of `H`, checked against the exact multi-prime count.
pub fn zero_mode_basis(h: &SparseOperator) -> Result<ZeroModeBasis> {
    let d = h.dim();
    if d > DENSE_BUDGET {
        return Err(KcmError::Budget(format!(
            "dense zero-mode basis of dimension {d} exceeds {DENSE_BUDGET}; use the exact counts"
        )));
    }
    let mut z = linalg::null_space(&h.to_dense(), KERNEL_TOLERANCE)?;
    let exact = d - modp::certified_rank(h)?.rank;
    if exact != z.ncols() {
        return Err(KcmError::CrossCheck(format!(
            "numeric kernel has {} vectors, exact count is {exact}",
            z.ncols()
        )));
    }
    if z.ncols() > 0 {
        z = linalg::orthonormal_span(&z, 1e-14)?;
    }
    linalg::fix_phases(&mut z);
    Ok(ZeroModeBasis { basis: h.basis().clone(), vectors: z })
}

/// Diagonal observables built from occupation numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservableSpec {
    Identity,
    /// `n_L * sum_{j=1..r} n_{L-j}`.
    EastBoundary { range: usize },
    /// Mirror image, `n_1 * sum_{j=1..r} n_{1+j}`.
    WestBoundary { range: usize },
    /// Sum of both boundary terms.
    EastWestBoundary { range: usize },
    /// Mobile particles on the top row or right column of a rectangle.
    NorthEastBoundary,
    /// `sum_{t=0..r} n_{start+t}` (1-based `start`).
    Window { start: usize, range: usize },
    /// Weighted products of occupations; sites are 1-based flattened
    /// indices.
    Products { terms: Vec<(f64, Vec<usize>)> },
}

impl ObservableSpec {
    /// Boundary discriminator matching a model.
    pub fn boundary_for(spec: &ModelSpec) -> ObservableSpec {
        match spec.family {
            Family::East => ObservableSpec::EastBoundary { range: spec.range },
            Family::EastWest => ObservableSpec::EastWestBoundary { range: spec.range },
            Family::NorthEast => ObservableSpec::NorthEastBoundary,
            Family::PairFlip => ObservableSpec::Products {
                // right end of the form ∘• and left end •∘ under empty padding
                terms: match spec.geometry {
                    Geometry::Chain { sites } if sites >= 2 => vec![
                        (1.0, vec![sites]),
                        (-1.0, vec![sites - 1, sites]),
                        (1.0, vec![1]),
                        (-1.0, vec![1, 2]),
                    ],
                    _ => vec![],
                },
            },
        }
    }

    pub fn value(&self, geometry: Geometry, s: u64) -> f64 {
        let n = |site: usize| -> f64 {
            if site >= 1 && site <= geometry.site_count() && s >> (site - 1) & 1 == 1 {
                1.0
            } else {
                0.0
            }
        };
        let l = geometry.site_count();
        match self {
            ObservableSpec::Identity => 1.0,
            ObservableSpec::EastBoundary { range } => {
                n(l) * (1..=*range).filter(|&j| j < l).map(|j| n(l - j)).sum::<f64>()
            }
            ObservableSpec::WestBoundary { range } => {
                n(1) * (1..=*range).map(|j| n(1 + j)).sum::<f64>()
            }
            ObservableSpec::EastWestBoundary { range } => {
                ObservableSpec::EastBoundary { range: *range }.value(geometry, s)
                    + ObservableSpec::WestBoundary { range: *range }.value(geometry, s)
            }
            ObservableSpec::NorthEastBoundary => match geometry {
                Geometry::Rectangle { lx, ly } => {
                    let at = |x: usize, y: usize| n((y - 1) * lx + x);
                    let mut count = 0.0;
                    for y in 2..=ly {
                        if lx >= 2 {
                            count += at(lx, y) * at(lx - 1, y) * at(lx, y - 1);
                        }
                    }
                    for x in 2..=lx {
                        // the corner was counted above for the column
                        if ly >= 2 && x != lx {
                            count += at(x, ly) * at(x - 1, ly) * at(x, ly - 1);
                        }
                    }
                    count
                }
                Geometry::Chain { .. } => 0.0,
            },
            ObservableSpec::Window { start, range } => (0..=*range).map(|t| n(start + t)).sum(),
            ObservableSpec::Products { terms } => terms
                .iter()
                .map(|(w, sites)| w * sites.iter().map(|&i| n(i)).product::<f64>())
                .sum(),
        }
    }

    pub fn diagonal(&self, basis: &SectorBasis) -> Vec<f64> {
        basis.states().iter().map(|&s| self.value(basis.geometry(), s)).collect()
    }
}

/// `Θ_ij = <ψ_i| O |ψ_j>` for a diagonal observable.
pub fn theta_matrix(zm: &ZeroModeBasis, o: &ObservableSpec) -> Array2<f64> {
    theta_from_diagonal(zm, &o.diagonal(&zm.basis))
}

fn theta_from_diagonal(zm: &ZeroModeBasis, diag: &[f64]) -> Array2<f64> {
    let mut weighted = zm.vectors.clone();
    for (mut row, &w) in weighted.axis_iter_mut(Axis(0)).zip(diag) {
        row *= w;
    }
    zm.vectors.t().dot(&weighted)
}

/// Orthonormal basis of `ker Θ(O)` rotated back into the sector.
pub fn find_bound_states(zm: &ZeroModeBasis, o: &ObservableSpec) -> Result<ZeroModeBasis> {
    kernel_of_diagonal(zm, &o.diagonal(&zm.basis))
}

fn kernel_of_diagonal(zm: &ZeroModeBasis, diag: &[f64]) -> Result<ZeroModeBasis> {
    if zm.count() == 0 {
        return Ok(zm.clone());
    }
    if diag.iter().any(|&w| w < 0.0) {
        return Err(KcmError::Domain("discriminator must be positive semidefinite".into()));
    }
    let theta = theta_from_diagonal(zm, diag);
    let k = linalg::psd_kernel(&theta, THETA_TOLERANCE)?;
    Ok(zm.rotated(&k))
}

/// Outcome of a boundedness check under explicit padding.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaddingResidual {
    pub left: usize,
    pub right: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundStateCertificate {
    pub energy: f64,
    pub left_unit: String,
    pub right_unit: String,
    pub q_max: usize,
    pub residuals: Vec<PaddingResidual>,
    pub left_bound: bool,
    pub right_bound: bool,
    pub bound: bool,
    /// Left padding cannot change the graph (East family): the leftmost
    /// particle never moves.
    pub left_analytic: bool,
}

impl BoundStateCertificate {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0f64, |m, r| m.max(r.residual))
    }
}

pub const DEFAULT_Q_MAX: usize = 3;

/// Pads `v` by `k_L^{⊗n}` and `k_R^{⊗m}` for all `n + m <= q_max` and
/// checks the eigen-equation of the enlarged chain each time.
pub fn certify_bound(
    v: &StateVector,
    model: &ModelSpec,
    padding: &PaddingSpec,
    q_max: usize,
) -> Result<BoundStateCertificate> {
    if !model.geometry.is_chain() {
        return certify_bound_rectangle(v, model, q_max);
    }
    let energy = v.energy(model)?;
    let base = v.residual(model, energy)?;
    if base > RESIDUAL_TOLERANCE {
        return Err(KcmError::Domain(format!(
            "input is not an eigenvector (residual {base:.3e})"
        )));
    }
    let mut residuals = Vec::new();
    for n in 0..=q_max {
        for m in 0..=(q_max - n) {
            let padded = v.padded(&padding.left_unit, n, &padding.right_unit, m)?;
            let big = model.with_geometry(padded.geometry())?;
            residuals.push(PaddingResidual { left: n, right: m, residual: padded.residual(&big, energy)? });
        }
    }
    Ok(finish_certificate(energy, padding.left_unit.to_string(), padding.right_unit.to_string(), q_max, residuals, model.family == Family::East && padding.left_unit.bits() == 0))
}

fn finish_certificate(
    energy: f64,
    left_unit: String,
    right_unit: String,
    q_max: usize,
    residuals: Vec<PaddingResidual>,
    left_analytic: bool,
) -> BoundStateCertificate {
    let ok = |r: &&PaddingResidual| r.residual < RESIDUAL_TOLERANCE;
    let left_bound = residuals.iter().filter(|r| r.right == 0).all(|r| ok(&r));
    let right_bound = residuals.iter().filter(|r| r.left == 0).all(|r| ok(&r));
    let bound = left_bound && right_bound && residuals.iter().all(|r| ok(&r));
    BoundStateCertificate {
        energy,
        left_unit,
        right_unit,
        q_max,
        residuals,
        left_bound,
        right_bound,
        bound,
        left_analytic,
    }
}

/// Rectangles grow by empty columns on the right (`n`) and empty rows on
/// top (`m`); the frozen bottom row and left column need no padding.
fn certify_bound_rectangle(
    v: &StateVector,
    model: &ModelSpec,
    q_max: usize,
) -> Result<BoundStateCertificate> {
    let Geometry::Rectangle { lx, ly } = model.geometry else {
        unreachable!("chains handled by the caller")
    };
    let energy = v.energy(model)?;
    let base = v.residual(model, energy)?;
    if base > RESIDUAL_TOLERANCE {
        return Err(KcmError::Domain(format!(
            "input is not an eigenvector (residual {base:.3e})"
        )));
    }
    let mut residuals = Vec::new();
    for n in 0..=q_max {
        for m in 0..=(q_max - n) {
            let g = Geometry::rectangle(lx + n, ly + m)?;
            let amps = v.amplitudes().iter().map(|&(s, a)| {
                let mut t = 0u64;
                for y in 0..ly {
                    for x in 0..lx {
                        if s >> (y * lx + x) & 1 == 1 {
                            t |= 1 << (y * (lx + n) + x);
                        }
                    }
                }
                (t, a)
            });
            let padded = StateVector::new(g, amps)?;
            let big = model.with_geometry(g)?;
            residuals.push(PaddingResidual { left: n, right: m, residual: padded.residual(&big, energy)? });
        }
    }
    Ok(finish_certificate(energy, "column".into(), "row".into(), q_max, residuals, false))
}

/// Padding units for the pair-flip model chosen from the boundary rule:
/// a site is added empty unless the state ends in `∘•`, filled otherwise.
/// `None` on a side means both choices touch a mobile configuration.
pub fn pair_flip_padding(v: &StateVector) -> (Option<FockState>, Option<FockState>) {
    let l = v.sites();
    let ends = |mask_pos: &dyn Fn(u64) -> (bool, bool)| {
        let mut seen = (false, false);
        for &(s, _) in v.amplitudes() {
            let (a, b) = mask_pos(s);
            seen.0 |= a;
            seen.1 |= b;
        }
        seen
    };
    let bit = |s: u64, site: usize| l >= site && site >= 1 && s >> (site - 1) & 1 == 1;
    // (ends in ∘•, ends in ••) at the right; mirrored at the left
    let right = ends(&|s| {
        (l >= 2 && !bit(s, l - 1) && bit(s, l), l >= 2 && bit(s, l - 1) && bit(s, l))
    });
    let left = ends(&|s| (l >= 2 && !bit(s, 2) && bit(s, 1), l >= 2 && bit(s, 2) && bit(s, 1)));
    let pick = |(open_end, full_end): (bool, bool)| -> Option<FockState> {
        if !open_end {
            Some("0".parse().expect("valid"))
        } else if !full_end {
            Some("1".parse().expect("valid"))
        } else {
            None
        }
    };
    (pick(left), pick(right))
}

/// Which window positions count as factorisation cuts: an empty block
/// `j..=j+r` with at least one site on its left and at least one particle
/// on its right.
pub fn factorization_windows(basis: &SectorBasis, range: usize) -> Vec<(usize, Vec<usize>)> {
    let l = basis.geometry().site_count();
    let mut out = Vec::new();
    if l < range + 2 {
        return out;
    }
    for j in 2..=(l - range) {
        let window = ((j - 1)..(j + range)).fold(0u64, |m, b| m | 1 << b);
        let right = crate::fock::mask_of_len(l) & !crate::fock::mask_of_len(j + range);
        let idx: Vec<usize> = basis
            .states()
            .iter()
            .enumerate()
            .filter(|&(_, &s)| s & window == 0 && s & right != 0)
            .map(|(i, _)| i)
            .collect();
        if !idx.is_empty() {
            out.push((j, idx));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct FactorizableSet {
    /// Orthonormal span of all window kernels.
    pub vectors: Array2<f64>,
    pub per_window: Vec<(usize, usize)>,
    pub n_fs: usize,
    pub n_zm: usize,
}

impl FactorizableSet {
    pub fn ratio(&self) -> f64 {
        if self.n_zm == 0 {
            0.0
        } else {
            self.n_fs as f64 / self.n_zm as f64
        }
    }
}

/// Sweeps `Θ(W_j)` over the windows of [`factorization_windows`] inside the
/// span of `zm` and counts independent solutions.
pub fn find_factorizable(zm: &ZeroModeBasis, range: usize) -> Result<FactorizableSet> {
    let basis = zm.basis();
    let mut blocks: Vec<Array2<f64>> = Vec::new();
    let mut per_window = Vec::new();
    for (j, idx) in factorization_windows(basis, range) {
        let mut bad = vec![1.0; basis.dim()];
        for i in idx {
            bad[i] = 0.0;
        }
        let k = kernel_of_diagonal(zm, &bad)?;
        per_window.push((j, k.count()));
        if k.count() > 0 {
            blocks.push(k.vectors);
        }
    }
    let stacked = if blocks.is_empty() {
        Array2::zeros((basis.dim(), 0))
    } else {
        ndarray::concatenate(Axis(1), &blocks.iter().map(|b| b.view()).collect::<Vec<_>>())
            .expect("same row count")
    };
    let mut q = linalg::orthonormal_span(&stacked, 1e-12)?;
    linalg::fix_phases(&mut q);
    let n_fs = q.ncols();
    Ok(FactorizableSet { vectors: q, per_window, n_fs, n_zm: zm.count() })
}

/// Exact zero-mode structure of one sector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorCounts {
    pub dim: usize,
    pub mismatch: usize,
    pub n_zm: usize,
    pub n_bs: usize,
    pub n_fs: usize,
    pub primes: Vec<u64>,
    pub numeric_checked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountOptions {
    /// Discriminator whose kernel defines bound states.
    pub bound_observable: Option<ObservableSpec>,
    /// Count factorizable states among bound zero modes only.
    pub factorize_bound_only: bool,
    /// Numeric cross-check up to this dimension.
    pub cross_check_limit: usize,
}

impl CountOptions {
    pub fn for_model(spec: &ModelSpec) -> Self {
        CountOptions {
            bound_observable: Some(ObservableSpec::boundary_for(spec)),
            factorize_bound_only: spec.family == Family::EastWest,
            cross_check_limit: 4000,
        }
    }
}

/// `(N_ZM, N_BS, N_FS)` over one prime field.
pub fn sector_counts_mod(
    h: &SparseOperator,
    bound_cols: &[usize],
    window_sets: &[Vec<usize>],
    field: Field,
) -> Result<(usize, usize, usize)> {
    let (n_zm, n_fs) = modp::kernel_span_dim(h, window_sets, field)?;
    let n_bs = if bound_cols.len() == h.dim() {
        n_zm
    } else {
        modp::restricted_kernel_dim(h, bound_cols, field)?
    };
    Ok((n_zm, n_bs, n_fs))
}

/// Exact `(M, N_ZM, N_BS, N_FS)` of a sector, cross-checked numerically on
/// small sectors.
pub fn sector_counts(
    spec: &ModelSpec,
    h: &SparseOperator,
    opts: &CountOptions,
) -> Result<SectorCounts> {
    let basis = h.basis();
    let coloring = color(basis, ChiralOperator::for_family(spec.family));
    let allowed: Vec<bool> = match &opts.bound_observable {
        Some(o) => o.diagonal(basis).iter().map(|&w| w == 0.0).collect(),
        None => vec![true; basis.dim()],
    };
    let bound_cols: Vec<usize> = (0..basis.dim()).filter(|&i| allowed[i]).collect();
    let windows: Vec<Vec<usize>> = factorization_windows(basis, spec.range)
        .into_iter()
        .map(|(_, idx)| {
            if opts.factorize_bound_only {
                idx.into_iter().filter(|&i| allowed[i]).collect()
            } else {
                idx
            }
        })
        .filter(|v: &Vec<usize>| !v.is_empty())
        .collect();
    let ((n_zm, n_bs, n_fs), seen) =
        certify(Prefer::Quorum, |f| sector_counts_mod(h, &bound_cols, &windows, f))?;
    let mut out = SectorCounts {
        dim: basis.dim(),
        mismatch: coloring.mismatch(),
        n_zm,
        n_bs,
        n_fs,
        primes: seen.iter().map(|s| s.0).collect(),
        numeric_checked: false,
    };
    if basis.dim() <= opts.cross_check_limit {
        let zm = zero_mode_basis(h)?;
        let bs = match &opts.bound_observable {
            Some(o) => find_bound_states(&zm, o)?,
            None => zm.clone(),
        };
        let fs = find_factorizable(if opts.factorize_bound_only { &bs } else { &zm }, spec.range)?;
        if (zm.count(), bs.count(), fs.n_fs) != (n_zm, n_bs, n_fs) {
            return Err(KcmError::CrossCheck(format!(
                "exact (N_ZM, N_BS, N_FS) = ({n_zm}, {n_bs}, {n_fs}) but numeric ({}, {}, {})",
                zm.count(),
                bs.count(),
                fs.n_fs
            )));
        }
        out.numeric_checked = true;
    }
    Ok(out)
}

/// A part of a factorizable state: a state on its own chain.
#[derive(Debug, Clone)]
pub struct FactorPart {
    pub state: StateVector,
}

#[derive(Debug, Clone)]
pub struct FactorizableState {
    pub state: StateVector,
    pub energy: f64,
    pub part_energies: Vec<f64>,
    pub residual: f64,
}

/// `ψ_1 ⊗ ∘^{d_1} ⊗ ψ_2 ⊗ ...` verified as an eigenvector of the joined
/// chain with energy equal to the sum of part energies.
pub fn build_factorizable(
    model: &ModelSpec,
    parts: &[StateVector],
    paddings: &[usize],
) -> Result<FactorizableState> {
    if parts.is_empty() || paddings.len() + 1 != parts.len() {
        return Err(KcmError::Domain(format!(
            "{} parts need {} paddings, got {}",
            parts.len(),
            parts.len().saturating_sub(1),
            paddings.len()
        )));
    }
    let min_pad = match model.family {
        Family::East | Family::EastWest => model.range + 1,
        _ => {
            return Err(KcmError::Unsupported(format!(
                "factorizable construction is defined for chains of the East family, not {}",
                model.family.name()
            )))
        }
    };
    if let Some(&d) = paddings.iter().find(|&&d| d < min_pad) {
        return Err(KcmError::Domain(format!(
            "padding of {d} empty sites would couple parts (need {min_pad})"
        )));
    }
    let mut part_energies = Vec::with_capacity(parts.len());
    for p in parts {
        let m = model.with_geometry(p.geometry())?;
        part_energies.push(p.energy(&m)?);
    }
    let mut state = parts[0].clone();
    for (p, &d) in parts[1..].iter().zip(paddings) {
        state = state.tensor(&FockState::empty(d)?, p)?;
    }
    let energy: f64 = part_energies.iter().sum();
    let big = model.with_geometry(state.geometry())?;
    let residual = state.residual(&big, energy)?;
    if residual > RESIDUAL_TOLERANCE {
        return Err(KcmError::Domain(format!(
            "parts are not suitably bound: residual {residual:.3e}"
        )));
    }
    Ok(FactorizableState { state, energy, part_energies, residual })
}

/// `|| H J - J H ||_F` for `J = |ψ1><ψ2| ⊗ |∘^pad><∘^pad| ⊗ 1` on a chain
/// with `right_sites` extra sites holding `right_particles` particles.
pub fn dynamical_symmetry_check(
    psi1: &StateVector,
    psi2: &StateVector,
    pad: usize,
    right_sites: usize,
    right_particles: usize,
    model: &ModelSpec,
) -> Result<f64> {
    if psi1.geometry() != psi2.geometry() || psi1.particle_numbers() != psi2.particle_numbers() {
        return Err(KcmError::GeometryMismatch(
            "ψ1 and ψ2 must share sites and particle number".into(),
        ));
    }
    let rg = Geometry::chain(right_sites)?;
    let rights = crate::fock::enumerate_basis(rg, Some(right_particles))?;
    let gap = FockState::empty(pad)?;
    let mut us = Vec::new();
    let mut ws = Vec::new();
    for &b in rights.states() {
        let bv = StateVector::product(rg, b)?;
        us.push(psi1.tensor(&gap, &bv)?);
        ws.push(psi2.tensor(&gap, &bv)?);
    }
    let big = model.with_geometry(us[0].geometry())?;
    // J = sum_b |u_b><w_b|, so HJ - JH = sum_b (H u_b) w_b^T - u_b (H w_b)^T
    let mut entries: HashMap<(u64, u64), f64> = HashMap::new();
    for (u, w) in us.iter().zip(&ws) {
        let (hu, hw) = (u.apply(&big)?, w.apply(&big)?);
        for &(i, a) in hu.amplitudes() {
            for &(j, b) in w.amplitudes() {
                *entries.entry((i, j)).or_default() += a * b;
            }
        }
        for &(i, a) in u.amplitudes() {
            for &(j, b) in hw.amplitudes() {
                *entries.entry((i, j)).or_default() -= a * b;
            }
        }
    }
    Ok(entries.values().fold(0.0, |m, x| m + x * x).sqrt())
}

/// Dense eigenpairs of a sector Hamiltonian restricted to the vectors that
/// stay eigenvectors when the chain grows to the right.
pub fn right_bound_eigenpairs(
    h: &SparseOperator,
    v2: &[bool],
) -> Result<(Array1<f64>, Array2<f64>)> {
    let d = h.dim();
    let dense = h.to_dense();
    let keep: Vec<usize> = (0..d).filter(|&i| !v2[i]).collect();
    let mut q = Array2::<f64>::zeros((d, keep.len()));
    for (c, &i) in keep.iter().enumerate() {
        q[[i, c]] = 1.0;
    }
    // shrink to the largest H-invariant subspace with no weight on V2
    loop {
        if q.ncols() == 0 {
            return Ok((Array1::zeros(0), Array2::zeros((d, 0))));
        }
        let hq = dense.dot(&q);
        let leak = &hq - &q.dot(&q.t().dot(&hq));
        let k = linalg::right_kernel(&leak, 1e-9)?;
        if k.ncols() == q.ncols() {
            break;
        }
        q = q.dot(&k);
    }
    let hr = q.t().dot(&dense.dot(&q));
    let hr = (&hr + &hr.t()) * 0.5;
    let (w, v) = linalg::eigh(&hr)?;
    Ok((w, q.dot(&v)))
}

/// Certifies every vector of a zero-mode basis in parallel.
pub fn certify_all(
    zm: &ZeroModeBasis,
    model: &ModelSpec,
    padding: &PaddingSpec,
    q_max: usize,
) -> Result<Vec<BoundStateCertificate>> {
    (0..zm.count())
        .into_par_iter()
        .map(|k| certify_bound(&zm.vector(k)?, model, padding, q_max))
        .collect()
}
