//! Library results against independent brute-force oracles written from
//! the model definitions.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

mod common;
use common::sign_rule_state;

use kcmlab_core::models::reflect;
use kcmlab_core::{
    build_hamiltonian, build_perturbation, color, connected_components, east_west_mpo_state,
    enumerate_basis, mismatch_closed_form, mismatch_formula, zero_mode_count, ChiralOperator,
    CountMethod, Family, Geometry, ModelSpec, MpoSpec, PerturbationSpec, SectorBasis,
    SparseOperator, Sublattice,
};

type Matrix = BTreeMap<(u64, u64), f64>;

fn occupations(bits: u64, sites: usize) -> Vec<u8> {
    (0..sites).map(|k| (bits >> k & 1) as u8).collect()
}

fn bits_of(n: &[u8]) -> u64 {
    n.iter().enumerate().fold(0, |m, (k, &b)| m | (b as u64) << k)
}

fn entries(h: &SparseOperator) -> Matrix {
    let b = h.basis();
    h.triples().map(|(i, j, v)| ((b.state(i), b.state(j)), v)).collect()
}

/// Nearest-left facilitation, sites `1..=L`, `n_{<1} = 0`.
fn east_oracle(basis: &SectorBasis, t: &[f64]) -> Matrix {
    let l = basis.geometry().site_count();
    let mut m = Matrix::new();
    for &s in basis.states() {
        let n = occupations(s, l);
        let occ = |i: isize| if i < 1 { 0.0 } else { n[i as usize - 1] as f64 };
        for i in 1..l {
            let mut k = 0.0;
            for (l0, &tl) in t.iter().enumerate() {
                let ell = l0 as isize + 1;
                let ii = i as isize;
                let gap: f64 = ((ii - ell + 1)..ii).map(|j| 1.0 - occ(j)).product();
                k += tl * occ(ii - ell) * gap;
            }
            if k != 0.0 && n[i - 1] != n[i] {
                let mut m2 = n.clone();
                m2.swap(i - 1, i);
                *m.entry((bits_of(&m2), s)).or_insert(0.0) += k;
            }
        }
    }
    m.retain(|_, v| *v != 0.0);
    m
}

fn west_oracle(basis: &SectorBasis, t: &[f64]) -> Matrix {
    let l = basis.geometry().site_count();
    let mirrored: Vec<u64> = basis.states().iter().map(|&s| reflect(s, l)).collect();
    let mb = SectorBasis::from_states(basis.geometry(), mirrored).unwrap();
    east_oracle(&mb, t).into_iter().map(|((a, b), v)| ((reflect(a, l), reflect(b, l)), v)).collect()
}

fn add(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = a.clone();
    for (k, v) in b {
        *out.entry(*k).or_insert(0.0) += v;
    }
    out.retain(|_, v| *v != 0.0);
    out
}

fn assert_same(a: &Matrix, b: &Matrix, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: entry count");
    for (k, v) in a {
        let w = b.get(k).unwrap_or_else(|| panic!("{what}: missing {k:?}"));
        assert!((v - w).abs() < 1e-14, "{what}: {k:?} {v} vs {w}");
    }
}

#[test]
fn east_and_east_west_match_definition() {
    let couplings = [[1.0, 0.0, 0.0], [0.7, -1.3, 0.0], [1.0, 2.0, 0.5]];
    for r in 1..=3 {
        let t = &couplings[r - 1][..r];
        for l in 2..=9 {
            for n in 0..=l {
                let g = Geometry::chain(l).unwrap();
                let basis = enumerate_basis(g, Some(n)).unwrap();
                let east = ModelSpec::east(r, l).unwrap().with_couplings(t.to_vec()).unwrap();
                let ew = ModelSpec::east_west(r, l).unwrap().with_couplings(t.to_vec()).unwrap();
                let he = entries(&build_hamiltonian(&east, &basis).unwrap());
                let hew = entries(&build_hamiltonian(&ew, &basis).unwrap());
                let oe = east_oracle(&basis, t);
                assert_same(&he, &oe, &format!("east r={r} L={l} N={n}"));
                assert_same(&hew, &add(&oe, &west_oracle(&basis, t)), &format!("ew r={r} L={l} N={n}"));
            }
        }
    }
}

#[test]
fn north_east_matches_definition() {
    for (lx, ly) in [(3, 3), (4, 3), (3, 4)] {
        let g = Geometry::rectangle(lx, ly).unwrap();
        let spec = ModelSpec::north_east(lx, ly).unwrap();
        for n in 0..=lx * ly {
            let basis = enumerate_basis(g, Some(n)).unwrap();
            let mut m = Matrix::new();
            let site = |x: usize, y: usize| (y - 1) * lx + (x - 1);
            for &s in basis.states() {
                let occ = |x: usize, y: usize| x >= 1 && y >= 1 && x <= lx && y <= ly && s >> site(x, y) & 1 == 1;
                for y in 1..=ly {
                    for x in 1..=lx {
                        if !(occ(x - 1, y) && occ(x, y - 1)) {
                            continue;
                        }
                        for (u, v) in [(x + 1, y), (x, y + 1)] {
                            if u > lx || v > ly || occ(x, y) == occ(u, v) {
                                continue;
                            }
                            let t = s ^ (1 << site(x, y)) ^ (1 << site(u, v));
                            *m.entry((t, s)).or_insert(0.0) += 1.0;
                        }
                    }
                }
            }
            let h = entries(&build_hamiltonian(&spec, &basis).unwrap());
            assert_same(&h, &m, &format!("north-east {lx}x{ly} N={n}"));
        }
    }
}

#[test]
fn pair_flip_matches_definition() {
    for l in 3..=8 {
        let g = Geometry::chain(l).unwrap();
        let basis = enumerate_basis(g, None).unwrap();
        let mut m = Matrix::new();
        for &s in basis.states() {
            let n = occupations(s, l);
            for j in 0..l - 2 {
                if n[j + 1] == 1 && n[j] == n[j + 2] {
                    let t = s ^ (1 << j) ^ (1 << (j + 2));
                    *m.entry((t, s)).or_insert(0.0) += 1.0;
                }
            }
        }
        let h = entries(&build_hamiltonian(&ModelSpec::pair_flip(l).unwrap(), &basis).unwrap());
        assert_same(&h, &m, &format!("pair-flip L={l}"));
    }
    let g = Geometry::chain(3).unwrap();
    let h = build_hamiltonian(&ModelSpec::pair_flip(3).unwrap(), &enumerate_basis(g, None).unwrap()).unwrap();
    let edges = h.edges();
    assert_eq!(edges.len(), 1);
    let b = h.basis();
    let pair: HashSet<String> = [b.format_state(edges[0].0), b.format_state(edges[0].1)].into();
    assert_eq!(pair, HashSet::from(["010".to_string(), "111".to_string()]));
}

#[test]
fn uncorrelated_hopping_counts_free_moves() {
    for l in 2..=8 {
        for n in 0..=l {
            let g = Geometry::chain(l).unwrap();
            let basis = enumerate_basis(g, Some(n)).unwrap();
            let spec = ModelSpec::east(1, l).unwrap();
            let p = build_perturbation(&PerturbationSpec::uncorrelated_hopping(0.3), &spec, &basis).unwrap();
            // one unordered edge per (state, bond) with a particle/hole pair, counted twice
            let moves: usize = basis
                .states()
                .iter()
                .map(|&s| (0..l - 1).filter(|&i| (s >> i & 1) != (s >> (i + 1) & 1)).count())
                .sum();
            assert_eq!(p.edges().len() * 2, moves, "L={l} N={n}");
            assert!(p.edges().iter().all(|e| (e.2 - 0.3).abs() < 1e-15));
        }
    }
}

#[test]
fn components_match_breadth_first_search() {
    let cases = [(Family::East, 2, 10, 4), (Family::EastWest, 2, 11, 4), (Family::East, 1, 9, 4), (Family::East, 3, 11, 3)];
    for (family, r, l, n) in cases {
        let spec = ModelSpec::chain(family, r, l).unwrap();
        let basis = enumerate_basis(spec.geometry, Some(n)).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap();
        let mut adj: HashMap<u64, Vec<u64>> = HashMap::new();
        for ((a, b), _) in east_oracle(&basis, &vec![1.0; r]) {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        if family == Family::EastWest {
            for ((a, b), _) in west_oracle(&basis, &vec![1.0; r]) {
                adj.entry(a).or_default().push(b);
                adj.entry(b).or_default().push(a);
            }
        }
        let mut seen = HashSet::new();
        let mut sizes = Vec::new();
        for &s in basis.states() {
            if !seen.insert(s) {
                continue;
            }
            let mut q = VecDeque::from([s]);
            let mut size = 0;
            while let Some(u) = q.pop_front() {
                size += 1;
                for &v in adj.get(&u).map(|v| v.as_slice()).unwrap_or(&[]) {
                    if seen.insert(v) {
                        q.push_back(v);
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let rep = connected_components(&h);
        assert_eq!(rep.sizes_descending(), sizes);
        assert_eq!(rep.frozen_count, sizes.iter().filter(|&&x| x == 1).count());
    }
}

/// Fraction-free elimination over the integers.
fn bareiss_rank(mut a: Vec<Vec<i128>>) -> usize {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut rank = 0;
    let mut prev = 1i128;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&i| a[i][c] != 0) else { continue };
        a.swap(rank, p);
        for i in rank + 1..rows {
            for j in c + 1..cols {
                let x = a[i][j].checked_mul(a[rank][c]).expect("overflow");
                let y = a[i][c].checked_mul(a[rank][j]).expect("overflow");
                a[i][j] = (x - y) / prev;
            }
            a[i][c] = 0;
        }
        prev = a[rank][c];
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}

#[test]
fn exact_kernel_matches_integer_elimination() {
    // small enough that every minor fits in i128
    let mut cases = Vec::new();
    for family in [Family::East, Family::EastWest] {
        for r in 1..=3 {
            for l in 2..=8 {
                for n in 1..l {
                    if kcmlab_core::fock::binomial(l, n) <= 40 {
                        cases.push((family, r, l, n));
                    }
                }
            }
        }
    }
    for (family, r, l, n) in cases {
        let spec = ModelSpec::chain(family, r, l).unwrap();
        let basis = enumerate_basis(spec.geometry, Some(n)).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap();
        let d = basis.dim();
        let mut a = vec![vec![0i128; d]; d];
        for (i, j, v) in h.triples() {
            a[i][j] = v.round() as i128;
        }
        let rank = bareiss_rank(a);
        let count = zero_mode_count(&h, CountMethod::Both).unwrap();
        assert_eq!(count.n_zm, d - rank, "{family:?} r={r} L={l} N={n}");
    }
}

#[test]
fn mismatch_formula_matches_parity_counting() {
    for l in 1..=14 {
        let g = Geometry::chain(l).unwrap();
        for n in 0..=l {
            let basis = enumerate_basis(g, Some(n)).unwrap();
            for sub in [Sublattice::Even, Sublattice::Odd] {
                let c = color(&basis, ChiralOperator::SublatticeParity { sublattice: sub });
                // L_A counts sites of the colouring sublattice
                let la = (1..=l).filter(|i| (i % 2 == 0) == (sub == Sublattice::Even)).count();
                let brute = basis
                    .states()
                    .iter()
                    .map(|&s| {
                        let k = (1..=l).filter(|&i| s >> (i - 1) & 1 == 1 && (i % 2 == 0) == (sub == Sublattice::Even)).count();
                        if k % 2 == 0 { 1i64 } else { -1 }
                    })
                    .sum::<i64>()
                    .unsigned_abs() as usize;
                assert_eq!(c.mismatch(), brute);
                assert_eq!(mismatch_formula(l, n, la).unwrap() as usize, brute, "L={l} N={n} {sub:?}");
            }
        }
    }
    for n in 2..=12 {
        assert_eq!(mismatch_closed_form(n).unwrap(), mismatch_formula(3 * n - 2, n, (3 * n - 2) / 2).unwrap());
    }
}

#[test]
fn mpo_matches_sign_rule() {
    for r in [2, 4] {
        for n in 2..=5 {
            let spec = MpoSpec::new(r, n).unwrap();
            let v = east_west_mpo_state(spec).unwrap();
            let oracle = sign_rule_state(r, n);
            let scale = (oracle.len() as f64).sqrt();
            assert_eq!(v.support_len(), oracle.len(), "r={r} N={n}");
            for (&s, &sign) in &oracle {
                assert!((v.amplitude(s) * scale - sign as f64).abs() < 1e-13, "r={r} N={n} {s:b}");
            }
            assert!(kcmlab_core::mpo::mpo_residual(spec, &v).unwrap() < 1e-12);
        }
    }
}

#[test]
fn mpo_four_particles_listed_states() {
    let v = east_west_mpo_state(MpoSpec::new(2, 4).unwrap()).unwrap();
    let g = v.geometry();
    let listed = [
        ("1001001001", 1.0),
        ("1000110001", -1.0),
        ("0110001001", -1.0),
        ("1001000110", -1.0),
        ("0110000110", 1.0),
    ];
    assert_eq!(v.support_len(), listed.len());
    for (s, sign) in listed {
        let a = v.amplitude(g.parse_state(s).unwrap());
        assert!((a - sign / 5f64.sqrt()).abs() < 1e-15, "{s}: {a}");
    }
}
