//! End-to-end checks of the zero-mode, bound-state and dynamics workflows
//! on small sectors.

use kcmlab_core::chiral::fragmented_mismatch;
use kcmlab_core::dynamics::{
    evolve, lifting_scan, disorder_scan, time_grid, DiagonalObservable, KrylovOptions,
};
use kcmlab_core::fragmentation::{domain_wall, largest_component};
use kcmlab_core::linalg::eigh;
use kcmlab_core::zeromode::{build_factorizable, dynamical_symmetry_check, sector_counts, CountOptions};
use kcmlab_core::{
    build_hamiltonian, certify_bound, color, connected_components, east_west_mpo_state,
    entanglement_entropy, enumerate_basis, find_bound_states, find_factorizable, presets,
    sector_from_seed, theta_matrix, zero_mode_basis, zero_mode_count, ChiralOperator, CountMethod,
    FockState, Geometry, LiftScanConfig, ModelSpec, MpoSpec, ObservableSpec, PaddingSpec,
    StateVector,
};

fn east_sector(r: usize, n: usize) -> (ModelSpec, kcmlab_core::SectorBasis) {
    let spec = ModelSpec::east(r, (r + 1) * n - r).unwrap();
    let basis = sector_from_seed(&spec, domain_wall(n)).unwrap();
    (spec, basis)
}

/// Eigenpairs of a sector as state vectors.
fn eigenstates(spec: &ModelSpec, basis: &kcmlab_core::SectorBasis) -> Vec<(f64, StateVector)> {
    let h = build_hamiltonian(spec, basis).unwrap();
    let (w, v) = eigh(&h.to_dense()).unwrap();
    (0..w.len()).map(|k| (w[k], StateVector::from_dense(basis, &v.column(k).to_vec()).unwrap())).collect()
}

#[test]
fn fragmented_mismatch_small_chain() {
    let spec = ModelSpec::east(2, 4).unwrap();
    let basis = enumerate_basis(spec.geometry, Some(2)).unwrap();
    let rep = connected_components(&build_hamiltonian(&spec, &basis).unwrap());
    let m = fragmented_mismatch(&color(&basis, ChiralOperator::default()), &rep).unwrap();
    assert_eq!(m.per_sector, vec![1, 0, 1]);
    assert_eq!((m.m, m.m_frag), (2, 2));
    let frozen = rep.members(2);
    assert_eq!(basis.format_state(frozen[0]), "0011");
}

#[test]
fn east_four_particles() {
    let (spec, basis) = east_sector(2, 4);
    let h = build_hamiltonian(&spec, &basis).unwrap();
    assert_eq!(color(&basis, ChiralOperator::default()).mismatch(), 3);
    let zm = zero_mode_basis(&h).unwrap();
    assert_eq!(zm.count(), 7);
    let o = ObservableSpec::EastBoundary { range: 2 };
    let bs = find_bound_states(&zm, &o).unwrap();
    assert_eq!(bs.count(), 7);
    assert_eq!(find_factorizable(&zm, 2).unwrap().n_fs, 2);
    // Θ of the identity is the identity
    let theta = theta_matrix(&zm, &ObservableSpec::Identity);
    for i in 0..7 {
        for j in 0..7 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((theta[[i, j]] - want).abs() < 1e-12);
        }
    }
}

#[test]
fn path_toy_kernel() {
    let spec = ModelSpec::east(2, 4).unwrap();
    let g = spec.geometry;
    let basis = sector_from_seed(&spec, g.parse_state("1100").unwrap()).unwrap();
    let zm = zero_mode_basis(&build_hamiltonian(&spec, &basis).unwrap()).unwrap();
    assert_eq!(zm.count(), 1);
    let v = zm.vector(0).unwrap();
    let h = 0.5f64.sqrt();
    assert!((v.amplitude(g.parse_state("1100").unwrap()) - h).abs() < 1e-12);
    assert!(v.amplitude(g.parse_state("1010").unwrap()).abs() < 1e-12);
    assert!((v.amplitude(g.parse_state("1001").unwrap()) + h).abs() < 1e-12);
    // the rightmost particle of 1001 is frozen, so every eigenstate survives padding
    for (_, v) in eigenstates(&spec, &basis) {
        assert!(certify_bound(&v, &spec, &PaddingSpec::empty_sites(), 2).unwrap().bound);
    }
    // 0101 can push its last particle into the padding
    let open = sector_from_seed(&spec, g.parse_state("0110").unwrap()).unwrap();
    assert_eq!(open.dim(), 2);
    for (e, v) in eigenstates(&spec, &open) {
        assert!((e.abs() - 1.0).abs() < 1e-12);
        assert!(!certify_bound(&v, &spec, &PaddingSpec::empty_sites(), 1).unwrap().right_bound);
    }
}

#[test]
fn kernel_sizes() {
    let (spec, basis) = east_sector(2, 3);
    assert_eq!(zero_mode_basis(&build_hamiltonian(&spec, &basis).unwrap()).unwrap().count(), 2);
    let ew = ModelSpec::east_west(2, 10).unwrap();
    let b = largest_component(&ew, 5).unwrap();
    assert_eq!(zero_mode_basis(&build_hamiltonian(&ew, &b).unwrap()).unwrap().count(), 0);
    let b = largest_component(&ModelSpec::east_west(2, 16).unwrap(), 4).unwrap();
    let h = build_hamiltonian(&ModelSpec::east_west(2, 16).unwrap(), &b).unwrap();
    assert_eq!(zero_mode_count(&h, CountMethod::Exact).unwrap().n_zm, 193);
}

#[test]
fn east_west_bound_state_is_the_mpo_state() {
    let spec = ModelSpec::east_west(2, 10).unwrap();
    let basis = largest_component(&spec, 4).unwrap();
    let zm = zero_mode_basis(&build_hamiltonian(&spec, &basis).unwrap()).unwrap();
    let bs = find_bound_states(&zm, &ObservableSpec::boundary_for(&spec)).unwrap();
    assert_eq!(bs.count(), 1);
    let mpo = east_west_mpo_state(MpoSpec::new(2, 4).unwrap()).unwrap();
    let overlap = bs.vector(0).unwrap().dot(&mpo);
    assert!((overlap.abs() - 1.0).abs() < 1e-12);
    let fs = find_factorizable(&bs, 2).unwrap();
    assert_eq!(fs.n_fs, 0);
}

#[test]
fn north_east_domain_wall_sector() {
    let spec = ModelSpec::north_east(4, 4).unwrap();
    let seed = spec.geometry.parse_state("1110/1110/1110/0000").unwrap();
    let basis = sector_from_seed(&spec, seed).unwrap();
    let h = build_hamiltonian(&spec, &basis).unwrap();
    let zm = zero_mode_basis(&h).unwrap();
    let bs = find_bound_states(&zm, &ObservableSpec::NorthEastBoundary).unwrap();
    assert_eq!((zm.count(), bs.count()), (24, 23));
    for k in 0..bs.count() {
        let cert = certify_bound(&bs.vector(k).unwrap(), &spec, &PaddingSpec::empty_sites(), 2).unwrap();
        assert!(cert.bound && cert.max_residual() < 1e-10);
    }
}

#[test]
fn named_states_are_bound() {
    let ew = ModelSpec::east_west(2, 4).unwrap();
    let diamond = StateVector::from_strings(ew.geometry, &[("1001", 1.0), ("0110", -1.0)]).unwrap().normalized().unwrap();
    let cert = certify_bound(&diamond, &ew, &PaddingSpec::empty_sites(), 4).unwrap();
    assert!(cert.bound && cert.max_residual() < 1e-12);
    let psi = presets::east_bound_state().unwrap();
    let east = ModelSpec::east(2, 8).unwrap();
    let cert = certify_bound(&psi, &east, &PaddingSpec::empty_sites(), 3).unwrap();
    assert!(cert.bound && cert.energy.abs() < 1e-14);
}

#[test]
fn factorizable_construction() {
    let east = ModelSpec::east(2, 16).unwrap();
    let psi = presets::east_bound_state().unwrap().normalized().unwrap();
    let block = ModelSpec::east(2, 5).unwrap();
    let full = enumerate_basis(block.geometry, Some(2)).unwrap();
    let zm = zero_mode_basis(&build_hamiltonian(&block, &full).unwrap()).unwrap();
    let f = build_factorizable(&east, &[psi.clone(), zm.vector(0).unwrap()], &[3]).unwrap();
    assert_eq!(f.state.sites(), 16);
    assert!(f.energy.abs() < 1e-12 && f.residual < 1e-12);

    let mobile = sector_from_seed(&block, block.geometry.parse_state("10100").unwrap()).unwrap();
    let (e, v) = eigenstates(&block, &mobile).into_iter().find(|p| p.0.abs() > 0.5).unwrap();
    let f = build_factorizable(&east, &[psi.clone(), v], &[3]).unwrap();
    assert!((f.energy - e).abs() < 1e-12 && f.residual < 1e-12);

    let one = StateVector::product(Geometry::chain(1).unwrap(), 1).unwrap();
    let f = build_factorizable(&east, &[one.clone(), one.clone()], &[6]).unwrap();
    assert_eq!(f.energy, 0.0);
    assert!(build_factorizable(&east, &[psi, one], &[2]).is_err());
}

#[test]
fn local_dynamical_symmetry() {
    let (east, full) = east_sector(2, 4);
    let h = build_hamiltonian(&east, &full).unwrap();
    let zm = zero_mode_basis(&h).unwrap();
    let bs = find_bound_states(&zm, &ObservableSpec::EastBoundary { range: 2 }).unwrap();
    assert!(bs.count() >= 2);
    let (a, b) = (bs.vector(0).unwrap(), bs.vector(1).unwrap());
    assert!(dynamical_symmetry_check(&a, &b, 3, 4, 2, &east).unwrap() < 1e-10);
    assert!(dynamical_symmetry_check(&a, &a, 3, 4, 2, &east).unwrap() < 1e-10);
    let excited = eigenstates(&east, &full).into_iter().find(|p| p.0 > 0.5).unwrap().1;
    assert!(dynamical_symmetry_check(&a, &excited, 3, 4, 2, &east).unwrap() > 1e-3);
}

/// Cyclic Jacobi sweeps for a small symmetric matrix.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

#[test]
fn entropy_against_reduced_density_matrix() {
    let psi = presets::east_bound_state().unwrap().normalized().unwrap();
    let cut = 4;
    let mut rho = vec![vec![0.0; 16]; 16];
    for &(s, a) in psi.amplitudes() {
        for &(t, b) in psi.amplitudes() {
            if s >> cut == t >> cut {
                rho[(s & 15) as usize][(t & 15) as usize] += a * b;
            }
        }
    }
    let oracle: f64 = jacobi_eigenvalues(rho).into_iter().filter(|&p| p > 1e-15).map(|p| -p * p.ln()).sum();
    let e = entanglement_entropy(&psi, cut).unwrap();
    assert!(e.entropy > 0.1);
    assert!((e.entropy - oracle).abs() < 1e-12, "{} vs {oracle}", e.entropy);
    // a cut inside the empty padding of a product of parts carries no entanglement
    let right = StateVector::from_strings(Geometry::chain(5).unwrap(), &[("10100", 1.0), ("10010", -1.0)]).unwrap();
    let f = psi.tensor(&FockState::empty(3).unwrap(), &right).unwrap();
    assert!(entanglement_entropy(&f, 9).unwrap().entropy.abs() < 1e-14);
}

#[test]
fn quench_of_padded_bound_state_short_window() {
    let spec = ModelSpec::east(2, 16).unwrap();
    let psi = presets::padded_quench_state().unwrap().normalized().unwrap();
    let basis = enumerate_basis(spec.geometry, Some(6)).unwrap();
    let h = build_hamiltonian(&spec, &basis).unwrap();
    let times = time_grid(4.0, 0.25).unwrap();
    let obs = vec![DiagonalObservable::density(&basis, 9, "n_9").unwrap()];
    let tr = evolve(&h, &psi.to_dense(&basis).unwrap(), &times, &obs, &KrylovOptions::default()).unwrap();
    for (t, f) in tr.times.iter().zip(&tr.fidelity) {
        assert!((f - (2f64.sqrt() * t).cos().powi(2)).abs() < 1e-8);
    }
    assert!(tr.observable("n_9").unwrap().iter().all(|&x| x < 1e-10));
}

#[test]
fn scans_on_small_spaces() {
    let spec = ModelSpec::east(2, 10).unwrap();
    let full = enumerate_basis(spec.geometry, Some(4)).unwrap();
    let scan = lifting_scan(&spec, &full, &LiftScanConfig { epsilons: vec![0.0, 5.0], delta: None }).unwrap();
    assert!(scan.rows[0].ratio >= 1.0);
    assert_eq!(scan.rows[1].count, 10);
    let (_, basis) = east_sector(2, 4);
    let rows = disorder_scan(&spec, &basis, &[0.0], &[1]).unwrap();
    let h = build_hamiltonian(&spec, &basis).unwrap();
    let c = sector_counts(&spec, &h, &CountOptions::for_model(&spec)).unwrap();
    assert_eq!((rows[0].n_zm, rows[0].n_bs), (c.n_zm, c.n_bs));
}
