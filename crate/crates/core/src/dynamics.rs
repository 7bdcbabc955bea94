//! Spectra, degeneracy structure, real-time evolution, perturbation scans
//! and bipartite entanglement.

use std::collections::{BTreeMap, HashMap, HashSet};

use ndarray::Array2;
use ndarray_linalg::{EigValshInplace, UPLO};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chiral::{color, mismatch_formula, ChiralColoring, ChiralOperator, KERNEL_TOLERANCE};
use crate::error::{KcmError, Result};
use crate::fock::{enumerate_basis, Geometry, SectorBasis};
use crate::fragmentation::sector_from_seed;
use crate::io::{fmt_f64, CsvTable};
use crate::linalg;
use crate::models::{build_hamiltonian, build_perturbation, Family, ModelSpec, PerturbationSpec, SparseOperator};
use crate::modp::{self, certify, Prefer};
use crate::state::StateVector;
use crate::zeromode::{right_bound_eigenpairs, ObservableSpec};

/// Largest dimension diagonalised as a full dense matrix.
pub const SPECTRUM_BUDGET: usize = 8000;

/// Dense budget of the lifting scan, large enough for the full N=6, L=16
/// space.
pub const LIFT_BUDGET: usize = 9000;
/// Largest chiral block diagonalised through `C C^T`.
pub const CHIRAL_BLOCK_BUDGET: usize = 22000;
/// Largest dimension used for the dense propagator cross-check.
pub const DENSE_EVOLVE_BUDGET: usize = 2000;

pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Diagonal observable sampled along a trajectory.
#[derive(Debug, Clone)]
pub struct DiagonalObservable {
    pub name: String,
    pub values: Vec<f64>,
}

impl DiagonalObservable {
    /// `n_site` with a 1-based flattened site index.
    pub fn density(basis: &SectorBasis, site: usize, name: &str) -> Result<Self> {
        let g = basis.geometry();
        if site == 0 || site > g.site_count() {
            return Err(KcmError::Domain(format!("site {site} outside {g}")));
        }
        let values = basis.states().iter().map(|&s| (s >> (site - 1) & 1) as f64).collect();
        Ok(DiagonalObservable { name: name.to_string(), values })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct QuenchTrace {
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub observables: Vec<(String, Vec<f64>)>,
    pub max_norm_drift: f64,
    pub max_energy_drift: f64,
}

impl QuenchTrace {
    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables.iter().find(|o| o.0 == name).map(|o| o.1.as_slice())
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut header = vec!["t".to_string(), "fidelity".to_string()];
        header.extend(self.observables.iter().map(|o| o.0.clone()));
        let mut t = CsvTable::new(header);
        for (k, &time) in self.times.iter().enumerate() {
            let mut row = vec![fmt_f64(time), fmt_f64(self.fidelity[k])];
            row.extend(self.observables.iter().map(|o| fmt_f64(o.1[k])));
            t.push(row);
        }
        t
    }
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// `0, dt, 2 dt, ..., t_max`.
pub fn time_grid(t_max: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && t_max >= 0.0) {
        return Err(KcmError::Domain(format!("bad time grid t_max={t_max} dt={dt}")));
    }
    let n = (t_max / dt + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| k as f64 * dt).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Bound on the a-posteriori error of each propagation step.
    pub tolerance: f64,
    pub max_dim: usize,
    /// Largest sector dimension accepted.
    pub budget: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions { tolerance: 1e-12, max_dim: 30, budget: 50_000_000 }
    }
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// One Lanczos propagation `v <- exp(-i H dt) v`; returns the error
/// estimate, or `None` when it exceeds the tolerance.
fn krylov_try(
    h: &SparseOperator,
    v: &[Complex64],
    dt: f64,
    opts: &KrylovOptions,
) -> Result<Option<(Vec<Complex64>, f64)>> {
    let d = v.len();
    let norm0 = cnorm(v);
    if norm0 == 0.0 {
        return Ok(Some((v.to_vec(), 0.0)));
    }
    let m_max = opts.max_dim.min(d).max(1);
    let mut basis: Vec<Vec<Complex64>> = vec![v.iter().map(|x| x / norm0).collect()];
    let mut alpha = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    let mut w = vec![Complex64::new(0.0, 0.0); d];
    let mut last_beta = 0.0;
    for j in 0..m_max {
        h.apply_complex(&basis[j], &mut w);
        let a = cdot(&basis[j], &w).re;
        alpha.push(a);
        // full reorthogonalisation, twice
        for _ in 0..2 {
            for q in &basis {
                let c = cdot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let b = cnorm(&w);
        last_beta = b;
        if b < 1e-13 * (1.0 + a.abs()) || j + 1 == m_max {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    let m = alpha.len();
    let mut t = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        t[[i, i]] = alpha[i];
        if i + 1 < m {
            t[[i, i + 1]] = beta[i];
            t[[i + 1, i]] = beta[i];
        }
    }
    let (theta, s) = linalg::eigh(&t)?;
    let y: Vec<Complex64> = (0..m)
        .map(|k| {
            (0..m)
                .map(|l| s[[k, l]] * s[[0, l]] * Complex64::from_polar(1.0, -theta[l] * dt))
                .sum()
        })
        .collect();
    let err = if m < d { last_beta * y[m - 1].norm() * dt.abs().max(1.0) } else { 0.0 };
    if err > opts.tolerance {
        return Ok(None);
    }
    let mut out = vec![Complex64::new(0.0, 0.0); d];
    for (q, &c) in basis.iter().zip(&y) {
        for (o, qi) in out.iter_mut().zip(q) {
            *o += c * qi * norm0;
        }
    }
    Ok(Some((out, err)))
}

/// `exp(-i H dt) v` with adaptive sub-stepping.
pub fn krylov_propagate(
    h: &SparseOperator,
    v: &[Complex64],
    dt: f64,
    opts: &KrylovOptions,
) -> Result<Vec<Complex64>> {
    let mut state = v.to_vec();
    let mut remaining = dt;
    let mut step = dt;
    let mut guard = 0;
    while remaining.abs() > 0.0 {
        let s = if step.abs() > remaining.abs() { remaining } else { step };
        match krylov_try(h, &state, s, opts)? {
            Some((next, _)) => {
                state = next;
                remaining -= s;
            }
            None => {
                step = s / 2.0;
                guard += 1;
                if guard > 60 {
                    return Err(KcmError::CrossCheck("Krylov step size underflow".into()));
                }
            }
        }
    }
    Ok(state)
}

fn check_initial(h: &SparseOperator, psi0: &[f64]) -> Result<()> {
    if psi0.len() != h.dim() {
        return Err(KcmError::DimensionMismatch { expected: h.dim(), got: psi0.len() });
    }
    let n = linalg::norm(psi0);
    if (n - 1.0).abs() > 1e-10 {
        return Err(KcmError::Domain(format!("initial state must be normalised, norm {n}")));
    }
    Ok(())
}

fn record(
    psi0: &[f64],
    psi: &[Complex64],
    obs: &[DiagonalObservable],
    fidelity: &mut Vec<f64>,
    series: &mut [Vec<f64>],
) {
    let overlap: Complex64 = psi0.iter().zip(psi).map(|(a, b)| b * a).sum();
    fidelity.push(overlap.norm_sqr());
    for (o, s) in obs.iter().zip(series.iter_mut()) {
        s.push(o.values.iter().zip(psi).map(|(w, x)| w * x.norm_sqr()).sum());
    }
}

/// Krylov evolution of a real initial state sampled on `times` (ascending).
pub fn evolve(
    h: &SparseOperator,
    psi0: &[f64],
    times: &[f64],
    obs: &[DiagonalObservable],
    opts: &KrylovOptions,
) -> Result<QuenchTrace> {
    check_initial(h, psi0)?;
    if h.dim() > opts.budget {
        return Err(KcmError::Budget(format!(
            "sector dimension {} exceeds the Krylov budget {}",
            h.dim(),
            opts.budget
        )));
    }
    let mut psi: Vec<Complex64> = psi0.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let energy0 = h.apply(psi0)?.iter().zip(psi0).map(|(a, b)| a * b).sum::<f64>();
    let mut fidelity = Vec::with_capacity(times.len());
    let mut series = vec![Vec::with_capacity(times.len()); obs.len()];
    let (mut norm_drift, mut energy_drift) = (0.0f64, 0.0f64);
    let mut hpsi = vec![Complex64::new(0.0, 0.0); h.dim()];
    let mut t_now = 0.0;
    for &t in times {
        if t < t_now {
            return Err(KcmError::Domain("times must be ascending".into()));
        }
        if t > t_now {
            psi = krylov_propagate(h, &psi, t - t_now, opts)?;
            t_now = t;
        }
        record(psi0, &psi, obs, &mut fidelity, &mut series);
        norm_drift = norm_drift.max((cnorm(&psi) - 1.0).abs());
        h.apply_complex(&psi, &mut hpsi);
        energy_drift = energy_drift.max((cdot(&psi, &hpsi).re - energy0).abs());
    }
    Ok(QuenchTrace {
        times: times.to_vec(),
        fidelity,
        observables: obs.iter().map(|o| o.name.clone()).zip(series).collect(),
        max_norm_drift: norm_drift,
        max_energy_drift: energy_drift,
    })
}

/// Reference propagator from the full eigendecomposition.
pub fn evolve_dense(
    h: &SparseOperator,
    psi0: &[f64],
    times: &[f64],
    obs: &[DiagonalObservable],
) -> Result<QuenchTrace> {
    check_initial(h, psi0)?;
    let d = h.dim();
    if d > DENSE_EVOLVE_BUDGET {
        return Err(KcmError::Budget(format!(
            "dense propagation of dimension {d} exceeds {DENSE_EVOLVE_BUDGET}"
        )));
    }
    let (w, v) = linalg::eigh(&h.to_dense())?;
    let c: Vec<f64> = (0..d).map(|k| (0..d).map(|i| v[[i, k]] * psi0[i]).sum()).collect();
    let energy0: f64 = (0..d).map(|k| w[k] * c[k] * c[k]).sum();
    let mut fidelity = Vec::new();
    let mut series = vec![Vec::new(); obs.len()];
    let mut norm_drift = 0.0f64;
    for &t in times {
        let phase: Vec<Complex64> =
            (0..d).map(|k| Complex64::from_polar(c[k], -w[k] * t)).collect();
        let psi: Vec<Complex64> =
            (0..d).map(|i| (0..d).map(|k| phase[k] * v[[i, k]]).sum()).collect();
        norm_drift = norm_drift.max((cnorm(&psi) - 1.0).abs());
        record(psi0, &psi, obs, &mut fidelity, &mut series);
    }
    Ok(QuenchTrace {
        times: times.to_vec(),
        fidelity,
        observables: obs.iter().map(|o| o.name.clone()).zip(series).collect(),
        max_norm_drift: norm_drift,
        max_energy_drift: energy0 * 0.0,
    })
}

/// Largest deviation between two traces over all series.
pub fn trace_difference(a: &QuenchTrace, b: &QuenchTrace) -> f64 {
    let mut d = 0.0f64;
    for (x, y) in a.fidelity.iter().zip(&b.fidelity) {
        d = d.max((x - y).abs());
    }
    for ((_, s), (_, t)) in a.observables.iter().zip(&b.observables) {
        for (x, y) in s.iter().zip(t) {
            d = d.max((x - y).abs());
        }
    }
    d
}

/// Krylov evolution, cross-checked against the dense propagator on small
/// sectors.
pub fn evolve_checked(
    h: &SparseOperator,
    psi0: &[f64],
    times: &[f64],
    obs: &[DiagonalObservable],
    opts: &KrylovOptions,
) -> Result<QuenchTrace> {
    let trace = evolve(h, psi0, times, obs, opts)?;
    if h.dim() <= DENSE_EVOLVE_BUDGET {
        let reference = evolve_dense(h, psi0, times, obs)?;
        let diff = trace_difference(&trace, &reference);
        if diff > 1e-8 {
            return Err(KcmError::CrossCheck(format!(
                "Krylov and dense propagators differ by {diff:.3e}"
            )));
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, Serialize)]
pub struct NorthEastQuench {
    pub sector_dim: usize,
    pub trace: QuenchTrace,
    pub random_mean: Vec<f64>,
    pub samples: usize,
    pub infinite_temperature: f64,
    pub fidelity_average: f64,
    pub density_average: f64,
    pub random_average: f64,
}

/// Quench of a product state in the sector it generates, plus the mean
/// `n_{x,y}` trajectory of random product states from the same sector.
pub fn quench_northeast(
    model: &ModelSpec,
    start: u64,
    site: (usize, usize),
    times: &[f64],
    samples: usize,
    rng_seed: u64,
    opts: &KrylovOptions,
) -> Result<NorthEastQuench> {
    let g = model.geometry;
    let bit = g
        .bit(site.0, site.1)
        .ok_or_else(|| KcmError::Domain(format!("site {site:?} outside {g}")))?;
    let basis = sector_from_seed(model, start)?;
    let h = build_hamiltonian(model, &basis)?;
    let name = format!("n_{}_{}", site.0, site.1);
    let obs = vec![DiagonalObservable::density(&basis, bit + 1, &name)?];
    let unit = |s: u64| -> Vec<f64> {
        let mut v = vec![0.0; basis.dim()];
        v[basis.index_of(s).expect("state from this sector")] = 1.0;
        v
    };
    let trace = evolve_checked(&h, &unit(start), times, &obs, opts)?;
    let infinite_temperature = mean(&obs[0].values);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let picks: Vec<u64> =
        (0..samples).map(|_| basis.state(rng.gen_range(0..basis.dim()))).collect();
    let runs: Vec<Vec<f64>> = picks
        .par_iter()
        .map(|&s| {
            evolve(&h, &unit(s), times, &obs, opts).map(|t| t.observables[0].1.clone())
        })
        .collect::<Result<_>>()?;
    let random_mean: Vec<f64> =
        (0..times.len()).map(|k| mean(&runs.iter().map(|r| r[k]).collect::<Vec<_>>())).collect();
    let fidelity_average = mean(&trace.fidelity);
    let density_average = mean(&trace.observables[0].1);
    // late-time half of the window
    let half = random_mean.len() / 2;
    let random_average = mean(&random_mean[half..]);
    Ok(NorthEastQuench {
        sector_dim: basis.dim(),
        trace,
        random_mean,
        samples,
        infinite_temperature,
        fidelity_average,
        density_average,
        random_average,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Cluster {
    pub energy: f64,
    pub start: usize,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub gaps: Vec<f64>,
    pub cluster_id: Vec<usize>,
    pub clusters: Vec<Cluster>,
    pub factorizable: Vec<bool>,
}

impl SpectrumReport {
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let n = eigenvalues.len();
        let width = if n > 0 { eigenvalues[n - 1] - eigenvalues[0] } else { 0.0 };
        let cut = DEGENERACY_TOLERANCE * width.max(f64::MIN_POSITIVE);
        let gaps: Vec<f64> = eigenvalues.windows(2).map(|w| w[1] - w[0]).collect();
        let mut cluster_id = Vec::with_capacity(n);
        let mut clusters: Vec<Cluster> = Vec::new();
        for i in 0..n {
            if i == 0 || gaps[i - 1] >= cut {
                clusters.push(Cluster { energy: eigenvalues[i], start: i, multiplicity: 0 });
            }
            let c = clusters.last_mut().expect("opened above");
            c.multiplicity += 1;
            cluster_id.push(clusters.len() - 1);
        }
        for c in &mut clusters {
            c.energy = mean(&eigenvalues[c.start..c.start + c.multiplicity]);
        }
        SpectrumReport { eigenvalues, gaps, cluster_id, clusters, factorizable: vec![false; n] }
    }

    pub fn width(&self) -> f64 {
        match (self.eigenvalues.first(), self.eigenvalues.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Clusters with multiplicity above one away from zero energy.
    pub fn nonzero_degenerate(&self, zero_tol: f64) -> Vec<&Cluster> {
        self.clusters
            .iter()
            .filter(|c| c.multiplicity > 1 && c.energy.abs() > zero_tol)
            .collect()
    }

    pub fn zero_cluster_size(&self, zero_tol: f64) -> usize {
        self.eigenvalues.iter().filter(|e| e.abs() <= zero_tol).count()
    }

    /// Largest `|E_k + E_{D+1-k}|`.
    pub fn chiral_asymmetry(&self) -> f64 {
        let n = self.eigenvalues.len();
        (0..n).map(|k| (self.eigenvalues[k] + self.eigenvalues[n - 1 - k]).abs()).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["i", "E_i", "gap_i", "cluster_id", "factorizable_flag"]);
        for (i, &e) in self.eigenvalues.iter().enumerate() {
            t.push(vec![
                i.to_string(),
                fmt_f64(e),
                self.gaps.get(i).map(|&g| fmt_f64(g)).unwrap_or_default(),
                self.cluster_id[i].to_string(),
                (self.factorizable[i] as u8).to_string(),
            ]);
        }
        t
    }
}

/// `true` when every matrix element connects opposite colours.
pub fn anticommutes(h: &SparseOperator, coloring: &ChiralColoring) -> bool {
    h.triples().all(|(i, j, _)| coloring.odd[i] != coloring.odd[j])
}

/// Eigenvalues of `C C^T` for the smaller chiral block, unsorted, with the
/// block size.
fn squared_block_levels(h: &SparseOperator, coloring: &ChiralColoring) -> Result<(Vec<f64>, usize)> {
    let d = h.dim();
    let small_odd = coloring.n_odd <= coloring.n_even;
    let rows: Vec<usize> = (0..d).filter(|&i| coloring.odd[i] == small_odd).collect();
    let n = rows.len();
    if n > CHIRAL_BLOCK_BUDGET {
        return Err(KcmError::Budget(format!(
            "chiral block of dimension {n} exceeds {CHIRAL_BLOCK_BUDGET}"
        )));
    }
    let mut pos = vec![usize::MAX; d];
    for (k, &i) in rows.iter().enumerate() {
        pos[i] = k;
    }
    // column j of C lists its entries in the small block
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d];
    for (i, j, v) in h.triples() {
        if pos[i] != usize::MAX {
            cols[j].push((pos[i], v));
        }
    }
    let mut cct = Array2::<f64>::zeros((n, n));
    for col in &cols {
        for &(a, x) in col {
            for &(b, y) in col {
                cct[[a, b]] += x * y;
            }
        }
    }
    drop(cols);
    let lambda = if n == 0 { Default::default() } else {
        cct.eigvalsh_inplace(UPLO::Lower)
            .map_err(|e| KcmError::CrossCheck(format!("LAPACK failure: {e}")))?
            .to_vec()
    };
    Ok((lambda, n))
}

/// Spectrum through the smaller chiral block: the nonzero eigenvalues are
/// `±sqrt(λ)` for the eigenvalues `λ` of `C C^T`; the zero eigenvalues come
/// from the exact rank.
pub fn chiral_eigenvalues(h: &SparseOperator, coloring: &ChiralColoring) -> Result<Vec<f64>> {
    if !anticommutes(h, coloring) {
        return Err(KcmError::Domain("operator is not off-diagonal in the colouring".into()));
    }
    let d = h.dim();
    let (lambda, n) = squared_block_levels(h, coloring)?;
    // squaring blurs the kernel; pin it with the exact rank
    let rank_c = modp::certified_rank(h)?.rank / 2;
    let mut lambda = lambda;
    lambda.sort_by(f64::total_cmp);
    for l in lambda.iter_mut().take(n.saturating_sub(rank_c)) {
        *l = 0.0;
    }
    let mut out = Vec::with_capacity(d);
    for &l in &lambda {
        let e = l.max(0.0).sqrt();
        out.push(e);
        out.push(-e);
    }
    out.resize(d, 0.0);
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Full spectrum: dense for small sectors, through the chiral block when
/// the operator anticommutes with `C`.
pub fn spectrum_with(h: &SparseOperator, coloring: Option<&ChiralColoring>) -> Result<SpectrumReport> {
    let d = h.dim();
    let eig = match coloring {
        Some(c) if anticommutes(h, c) && d > 600 => chiral_eigenvalues(h, c)?,
        _ => {
            if d > SPECTRUM_BUDGET {
                return Err(KcmError::Budget(format!(
                    "dense spectrum of dimension {d} exceeds {SPECTRUM_BUDGET}"
                )));
            }
            linalg::eigvalsh(&h.to_dense())?.to_vec()
        }
    };
    Ok(SpectrumReport::from_eigenvalues(eig))
}

pub fn spectrum(h: &SparseOperator) -> Result<SpectrumReport> {
    let c = color(h.basis(), ChiralOperator::for_family(h.header().family));
    spectrum_with(h, Some(&c))
}

/// Eigenvector of a large sector assembled from parts on either side of an
/// empty window.
#[derive(Debug, Clone)]
pub struct FactorizableEigenstate {
    pub window: usize,
    pub energy: f64,
    pub state: StateVector,
}

/// Connected components reached from `seeds`.
fn components(spec: &ModelSpec, seeds: &HashSet<u64>) -> Result<Vec<SectorBasis>> {
    let mut seen: HashSet<u64> = HashSet::new();
    let mut out = Vec::new();
    let mut sorted: Vec<u64> = seeds.iter().copied().collect();
    sorted.sort_unstable();
    for s in sorted {
        if !seen.contains(&s) {
            let c = sector_from_seed(spec, s)?;
            seen.extend(c.states().iter().copied());
            out.push(c);
        }
    }
    Ok(out)
}

fn component_eigenpairs(
    spec: &ModelSpec,
    basis: &SectorBasis,
    boundary: Option<&ObservableSpec>,
) -> Result<Vec<(f64, StateVector)>> {
    let h = build_hamiltonian(spec, basis)?;
    let v2: Vec<bool> = match boundary {
        Some(o) => o.diagonal(basis).iter().map(|&w| w != 0.0).collect(),
        None => vec![false; basis.dim()],
    };
    let (w, v) = right_bound_eigenpairs(&h, &v2)?;
    (0..w.len())
        .map(|k| Ok((w[k], StateVector::from_dense(basis, &v.column(k).to_vec())?)))
        .collect()
}

/// Factorizable eigenstates `ψ_L ⊗ ∘^{r+1} ⊗ ψ_R` of a chain sector. The
/// left part must be right-bound; for East-West the right part must also be
/// left-bound.
pub fn factorizable_eigenstates(
    spec: &ModelSpec,
    basis: &SectorBasis,
) -> Result<Vec<FactorizableEigenstate>> {
    let Geometry::Chain { sites } = spec.geometry else {
        return Err(KcmError::Unsupported("factorizable search needs a chain".into()));
    };
    if !matches!(spec.family, Family::East | Family::EastWest) {
        return Err(KcmError::Unsupported(format!(
            "factorizable search is defined for the East family, not {}",
            spec.family.name()
        )));
    }
    let r = spec.range;
    let mut out = Vec::new();
    if sites < r + 3 {
        return Ok(out);
    }
    for j in 2..=(sites - r - 1) {
        let (ll, rl) = (j - 1, sites - j - r);
        let window = ((j - 1)..(j + r)).fold(0u64, |m, b| m | 1 << b);
        let lmask = crate::fock::mask_of_len(ll);
        let shift = j - 1 + r + 1;
        let mut pairs: HashSet<(u64, u64)> = HashSet::new();
        for &s in basis.states() {
            if s & window == 0 && s >> shift != 0 && s & lmask != 0 {
                pairs.insert((s & lmask, s >> shift));
            }
        }
        if pairs.is_empty() {
            continue;
        }
        let lspec = spec.with_geometry(Geometry::chain(ll)?)?;
        let rspec = spec.with_geometry(Geometry::chain(rl)?)?;
        let lb = ObservableSpec::EastBoundary { range: r };
        let rb = ObservableSpec::WestBoundary { range: r };
        let rbound = if spec.family == Family::EastWest { Some(&rb) } else { None };
        let lefts = components(&lspec, &pairs.iter().map(|p| p.0).collect())?;
        let rights = components(&rspec, &pairs.iter().map(|p| p.1).collect())?;
        let pad = crate::fock::FockState::empty(r + 1)?;
        let mut cache: HashMap<usize, Vec<(f64, StateVector)>> = HashMap::new();
        for lc in &lefts {
            let mut lpairs: Option<Vec<(f64, StateVector)>> = None;
            for (ri, rc) in rights.iter().enumerate() {
                // whole components pair up once one representative does
                if !basis.contains(lc.state(0) | rc.state(0) << shift) {
                    continue;
                }
                if lpairs.is_none() {
                    lpairs = Some(component_eigenpairs(&lspec, lc, Some(&lb))?);
                }
                if let std::collections::hash_map::Entry::Vacant(e) = cache.entry(ri) {
                    e.insert(component_eigenpairs(&rspec, rc, rbound)?);
                }
                for (el, vl) in lpairs.as_ref().expect("set above") {
                    for (er, vr) in &cache[&ri] {
                        out.push(FactorizableEigenstate {
                            window: j,
                            energy: el + er,
                            state: vl.tensor(&pad, vr)?,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyShell {
    pub energy: f64,
    pub multiplicity: usize,
    pub factorizable_rank: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegeneracyAnalysis {
    pub dim: usize,
    pub zero_modes: usize,
    /// Nonzero-energy clusters with multiplicity above one.
    pub degenerate: Vec<EnergyShell>,
    /// Degenerate clusters not spanned by factorizable eigenstates.
    pub unexplained: Vec<EnergyShell>,
    /// Nondegenerate energies that still host a factorizable eigenstate.
    pub isolated_factorizable: Vec<EnergyShell>,
    pub factorizable_states: usize,
    pub max_residual: f64,
}

/// Compares every nonzero-energy cluster with the rank of the factorizable
/// eigenstates at that energy.
pub fn degeneracy_analysis(spec: &ModelSpec, h: &SparseOperator) -> Result<(SpectrumReport, DegeneracyAnalysis)> {
    let basis = h.basis();
    let mut report = spectrum(h)?;
    let zero_tol = KERNEL_TOLERANCE * report.width().max(1.0);
    let states = factorizable_eigenstates(spec, basis)?;
    let max_residual = states
        .par_iter()
        .map(|f| f.state.residual(&spec.with_geometry(f.state.geometry())?, f.energy))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    if max_residual > 1e-8 {
        return Err(KcmError::CrossCheck(format!(
            "factorizable product has residual {max_residual:.3e}"
        )));
    }
    // group by spectral cluster
    let mut by_cluster: BTreeMap<usize, Vec<&StateVector>> = BTreeMap::new();
    for f in &states {
        if f.energy.abs() <= 1e-8 {
            continue;
        }
        let k = report.eigenvalues.partition_point(|&e| e < f.energy);
        let candidates = [k.saturating_sub(1), k.min(report.eigenvalues.len() - 1)];
        let i = candidates
            .into_iter()
            .min_by(|&a, &b| {
                (report.eigenvalues[a] - f.energy).abs().total_cmp(&(report.eigenvalues[b] - f.energy).abs())
            })
            .expect("nonempty");
        if (report.eigenvalues[i] - f.energy).abs() > 1e-8 {
            return Err(KcmError::CrossCheck(format!(
                "factorizable energy {} missing from the spectrum",
                f.energy
            )));
        }
        by_cluster.entry(report.cluster_id[i]).or_default().push(&f.state);
    }
    let ranks: HashMap<usize, usize> = by_cluster
        .par_iter()
        .map(|(&c, vs)| {
            let n = vs.len();
            let mut g = Array2::<f64>::zeros((n, n));
            for a in 0..n {
                for b in 0..=a {
                    let x = vs[a].dot(vs[b]);
                    g[[a, b]] = x;
                    g[[b, a]] = x;
                }
            }
            let w = linalg::eigvalsh(&g)?;
            let top = w.iter().fold(0.0f64, |m, x| m.max(*x));
            Ok((c, w.iter().filter(|&&x| x > 1e-10 * top).count()))
        })
        .collect::<Result<_>>()?;
    let mut degenerate = Vec::new();
    let mut unexplained = Vec::new();
    let mut isolated = Vec::new();
    for (id, c) in report.clusters.iter().enumerate() {
        if c.energy.abs() <= zero_tol {
            continue;
        }
        let shell = EnergyShell {
            energy: c.energy,
            multiplicity: c.multiplicity,
            factorizable_rank: ranks.get(&id).copied().unwrap_or(0),
        };
        if shell.factorizable_rank > 0 {
            for i in c.start..c.start + c.multiplicity {
                report.factorizable[i] = true;
            }
        }
        if c.multiplicity > 1 {
            if shell.factorizable_rank < shell.multiplicity {
                unexplained.push(shell.clone());
            }
            degenerate.push(shell);
        } else if shell.factorizable_rank > 0 {
            isolated.push(shell);
        }
    }
    let analysis = DegeneracyAnalysis {
        dim: basis.dim(),
        zero_modes: report.zero_cluster_size(zero_tol),
        degenerate,
        unexplained,
        isolated_factorizable: isolated,
        factorizable_states: states.len(),
        max_residual,
    };
    Ok((report, analysis))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftScanConfig {
    pub epsilons: Vec<f64>,
    /// Window half-width; computed from the unperturbed spectrum if unset.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftRow {
    pub epsilon: f64,
    pub count: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftScan {
    pub delta: f64,
    pub n_zm: usize,
    pub mismatch: usize,
    pub rows: Vec<LiftRow>,
}

impl LiftScan {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(["epsilon", "count", "ratio"]);
        for r in &self.rows {
            t.push(vec![fmt_f64(r.epsilon), r.count.to_string(), fmt_f64(r.ratio)]);
        }
        t
    }
}

/// Mean spacing of the positive nonzero eigenvalues inside the central 10%
/// of the spectral range, or of the two lowest positive levels when that
/// window holds fewer than two.
pub fn level_spacing_delta(eigenvalues: &[f64]) -> Result<f64> {
    let lo = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    let zero = KERNEL_TOLERANCE * width.max(1.0);
    let center = 0.5 * (hi + lo);
    let mut near: Vec<f64> = eigenvalues
        .iter()
        .copied()
        .filter(|&e| e > zero && (e - center).abs() <= 0.05 * width)
        .collect();
    near.sort_by(f64::total_cmp);
    if near.len() < 2 {
        // sparse spectra: fall back to the two lowest positive levels
        near = eigenvalues.iter().copied().filter(|&e| e > zero).collect();
        near.sort_by(f64::total_cmp);
        near.truncate(2);
    }
    if near.len() < 2 {
        return Err(KcmError::Domain(
            "fewer than two nonzero levels near zero energy".into(),
        ));
    }
    Ok((near[near.len() - 1] - near[0]) / (near.len() - 1) as f64)
}

/// Counts eigenvalues of `H + ε δH` inside `[-Δ, Δ]` with δH the
/// unconstrained nearest-neighbour hop.
pub fn lifting_scan(spec: &ModelSpec, basis: &SectorBasis, cfg: &LiftScanConfig) -> Result<LiftScan> {
    let h = build_hamiltonian(spec, basis)?;
    if h.dim() > LIFT_BUDGET {
        return Err(KcmError::Budget(format!(
            "lifting scan of dimension {} exceeds {LIFT_BUDGET}",
            h.dim()
        )));
    }
    let coloring = color(basis, ChiralOperator::for_family(spec.family));
    let eig0 = chiral_eigenvalues(&h, &coloring)?;
    let delta = match cfg.delta {
        Some(d) if d > 0.0 => d,
        Some(d) => return Err(KcmError::Domain(format!("window must be positive, got {d}"))),
        None => level_spacing_delta(&eig0)?,
    };
    let n_zm = crate::chiral::zero_mode_count(&h, crate::chiral::CountMethod::Exact)?.n_zm;
    let unit = build_perturbation(&PerturbationSpec::uncorrelated_hopping(1.0), spec, basis)?;
    let rows = cfg
        .epsilons
        .iter()
        .map(|&eps| {
            let count = if eps == 0.0 {
                eig0.iter().filter(|e| e.abs() <= delta).count()
            } else {
                let m = h.add_scaled(1.0, &unit, eps)?;
                if anticommutes(&m, &coloring) {
                    let (lambda, n) = squared_block_levels(&m, &coloring)?;
                    2 * lambda.iter().filter(|&&l| l <= delta * delta).count() + (m.dim() - 2 * n)
                } else {
                    linalg::eigvalsh(&m.to_dense())?.iter().filter(|e| e.abs() <= delta).count()
                }
            };
            Ok(LiftRow {
                epsilon: eps,
                count,
                ratio: if n_zm == 0 { f64::NAN } else { count as f64 / n_zm as f64 },
            })
        })
        .collect::<Result<_>>()?;
    Ok(LiftScan { delta, n_zm, mismatch: coloring.mismatch(), rows })
}

/// Mismatch of the full fixed-`N` chain space with even sites as sublattice.
pub fn full_space_mismatch(sites: usize, particles: usize) -> Result<u128> {
    mismatch_formula(sites, particles, sites / 2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisorderRow {
    pub g: f64,
    pub seed: u64,
    pub n_zm: usize,
    pub n_bs: usize,
}

/// Exact `(N_ZM, N_BS)` under tunnelling disorder `t -> t (1 + g ω_bond)`.
pub fn disorder_scan(
    spec: &ModelSpec,
    basis: &SectorBasis,
    gs: &[f64],
    seeds: &[u64],
) -> Result<Vec<DisorderRow>> {
    let boundary = ObservableSpec::boundary_for(spec);
    let allowed: Vec<usize> = boundary
        .diagonal(basis)
        .iter()
        .enumerate()
        .filter(|e| *e.1 == 0.0)
        .map(|e| e.0)
        .collect();
    let mut jobs = Vec::new();
    for &g in gs {
        if g == 0.0 {
            jobs.push((g, 0u64));
        } else {
            jobs.extend(seeds.iter().map(|&s| (g, s)));
        }
    }
    jobs.into_iter()
        .map(|(g, seed)| {
            let h = if g == 0.0 {
                build_hamiltonian(spec, basis)?
            } else {
                build_perturbation(&PerturbationSpec::tunneling_disorder(g, seed), spec, basis)?
            };
            let (counts, _) = certify(Prefer::Quorum, |f| {
                let full = modp::rank_mod(&h, f)?;
                Ok((h.dim() - full, modp::restricted_kernel_dim(&h, &allowed, f)?))
            })?;
            Ok(DisorderRow { g, seed, n_zm: counts.0, n_bs: counts.1 })
        })
        .collect()
}

/// Full fixed-`N` chain space.
pub fn full_space(spec: &ModelSpec, particles: usize) -> Result<SectorBasis> {
    enumerate_basis(spec.geometry, Some(particles))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyResult {
    pub cut: usize,
    pub entropy: f64,
    pub schmidt: Vec<f64>,
}

/// Von Neumann entropy (nats) between sites `1..=cut` and the rest.
pub fn entanglement_entropy(v: &StateVector, cut: usize) -> Result<EntropyResult> {
    let l = v.sites();
    if !v.geometry().is_chain() {
        return Err(KcmError::Unsupported("entropy cuts are defined on chains".into()));
    }
    if cut == 0 || cut >= l {
        return Err(KcmError::Domain(format!("cut {cut} must lie in 1..{l}")));
    }
    let v = v.normalized()?;
    let mask = crate::fock::mask_of_len(cut);
    let mut left_idx: HashMap<u64, usize> = HashMap::new();
    let mut right_idx: HashMap<u64, usize> = HashMap::new();
    for &(s, _) in v.amplitudes() {
        let n = left_idx.len();
        left_idx.entry(s & mask).or_insert(n);
        let n = right_idx.len();
        right_idx.entry(s >> cut).or_insert(n);
    }
    let mut m = Array2::<f64>::zeros((left_idx.len(), right_idx.len()));
    for &(s, a) in v.amplitudes() {
        m[[left_idx[&(s & mask)], right_idx[&(s >> cut)]]] = a;
    }
    let rho = if m.nrows() <= m.ncols() { m.dot(&m.t()) } else { m.t().dot(&m) };
    let mut p: Vec<f64> = linalg::eigvalsh(&rho)?.iter().map(|&x| x.max(0.0)).collect();
    p.sort_by(|a, b| b.total_cmp(a));
    let entropy = p.iter().filter(|&&x| x > 1e-300).map(|&x| -x * x.ln()).sum::<f64>().max(0.0);
    Ok(EntropyResult { cut, entropy, schmidt: p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_spectrum() {
        let spec = ModelSpec::east(2, 4).unwrap();
        // 1100 -> 1010 -> 1001 is a path of three states
        let basis = sector_from_seed(&spec, 0b0011).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap();
        let rep = spectrum(&h).unwrap();
        let s2 = 2f64.sqrt();
        assert_eq!(rep.eigenvalues.len(), 3);
        assert!((rep.eigenvalues[0] + s2).abs() < 1e-12);
        assert!(rep.eigenvalues[1].abs() < 1e-12);
        assert_eq!(rep.clusters.len(), 3);
    }

    #[test]
    fn grid() {
        let t = time_grid(1.0, 0.25).unwrap();
        assert_eq!(t, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(time_grid(1.0, 0.0).is_err());
    }

    #[test]
    fn product_entropy_zero() {
        let g = Geometry::chain(4).unwrap();
        let v = StateVector::product(g, 0b0101).unwrap();
        assert_eq!(entanglement_entropy(&v, 2).unwrap().entropy, 0.0);
        let bell = StateVector::from_strings(g, &[("1000", 1.0), ("0001", 1.0)]).unwrap();
        let e = entanglement_entropy(&bell, 2).unwrap().entropy;
        assert!((e - 2f64.ln()).abs() < 1e-12);
        assert!(entanglement_entropy(&v, 4).is_err());
    }
}
