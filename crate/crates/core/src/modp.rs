//! Exact linear algebra over word-size prime fields.
//!
//! Ranks and kernels of sparse operators are computed by sparse Gaussian
//! elimination (minimum column count, then shortest row) modulo several
//! primes. Rank modulo a prime never exceeds the rational rank, so the
//! largest observed rank is taken and must be seen for at least three
//! primes.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{KcmError, Result};
use crate::models::SparseOperator;

pub const PRIMES: [u64; 5] = [2147483647, 2147483629, 2147483587, 2147483579, 2147483563];

/// Number of primes that must agree.
pub const QUORUM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Field {
    p: u64,
}

impl Field {
    pub fn new(p: u64) -> Self {
        assert!(p > 2 && p < 1 << 32, "prime must fit in 32 bits");
        Field { p }
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + b as u64) % self.p) as u32
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        ((a as u64 + self.p - b as u64) % self.p) as u32
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        (a as u64 * b as u64 % self.p) as u32
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            (self.p - a as u64) as u32
        }
    }

    pub fn pow(&self, mut base: u32, mut e: u64) -> u32 {
        let mut acc = 1u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u32) -> u32 {
        debug_assert!(a != 0);
        self.pow(a, self.p - 2)
    }

    pub fn from_i64(&self, v: i64) -> u32 {
        v.rem_euclid(self.p as i64) as u32
    }

    /// Exact image of a finite double: every such value is `m * 2^e`.
    pub fn from_f64(&self, v: f64) -> Result<u32> {
        if !v.is_finite() {
            return Err(KcmError::Domain(format!("cannot map {v} to a prime field")));
        }
        if v == 0.0 {
            return Ok(0);
        }
        let bits = v.to_bits();
        let negative = bits >> 63 == 1;
        let exp_bits = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if exp_bits == 0 {
            (frac, -1074)
        } else {
            (frac | 1 << 52, exp_bits - 1075)
        };
        let m = (mant % self.p) as u32;
        let scale = if exp >= 0 {
            self.pow(2, exp as u64)
        } else {
            self.pow(self.inv(2), (-exp) as u64)
        };
        let x = self.mul(m, scale);
        Ok(if negative { self.neg(x) } else { x })
    }
}

/// Row-major sparse matrix over a prime field; rows sorted by column.
#[derive(Debug, Clone)]
pub struct SparseModMatrix {
    pub ncols: usize,
    pub rows: Vec<Vec<(u32, u32)>>,
}

impl SparseModMatrix {
    /// `H[:, cols]` (all columns when `cols` is `None`). Uses the symmetry
    /// of `H` to read columns as rows. Empty rows are dropped.
    pub fn from_operator_columns(
        h: &SparseOperator,
        cols: Option<&[usize]>,
        field: Field,
    ) -> Result<Self> {
        let all: Vec<usize>;
        let cols = match cols {
            Some(c) => c,
            None => {
                all = (0..h.dim()).collect();
                &all
            }
        };
        let mut rows: Vec<Vec<(u32, u32)>> = vec![Vec::new(); h.dim()];
        for (c, &j) in cols.iter().enumerate() {
            for (i, v) in h.row(j) {
                let x = field.from_f64(v)?;
                if x != 0 {
                    rows[i].push((c as u32, x));
                }
            }
        }
        rows.retain(|r| !r.is_empty());
        Ok(SparseModMatrix { ncols: cols.len(), rows })
    }
}

#[derive(Debug, Clone)]
struct Pivot {
    col: u32,
    row: Vec<(u32, u32)>,
}

/// Outcome of a sparse elimination: pivot rows in elimination order and the
/// free (non-pivot) columns.
#[derive(Debug, Clone)]
pub struct Elimination {
    field: Field,
    ncols: usize,
    pivots: Vec<Pivot>,
    free: Vec<u32>,
    kernel_ready: bool,
}

impl Elimination {
    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn kernel_dim(&self) -> usize {
        self.ncols - self.pivots.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Free columns, sorted. A kernel vector is determined by its values
    /// on these coordinates.
    pub fn free_columns(&self) -> Vec<u32> {
        let mut f = self.free.clone();
        f.sort_unstable();
        f
    }

    /// Kernel basis by back-substitution, one vector per free column
    /// (`1` on its own free coordinate, `0` on the others). Returned
    /// coordinate-major: entry `t` of coordinate `c` sits at `c * k + t`.
    fn kernel_block(&self) -> (Vec<u32>, usize) {
        assert!(self.kernel_ready, "kernel requested from a rank-only elimination");
        let f = self.field;
        let free = self.free_columns();
        let k = free.len();
        let mut x = vec![0u32; self.ncols * k];
        for (t, &c) in free.iter().enumerate() {
            x[c as usize * k + t] = 1;
        }
        let p = f.prime();
        let mut acc = vec![0u64; k];
        for piv in self.pivots.iter().rev() {
            acc.iter_mut().for_each(|a| *a = 0);
            let mut a_piv = 0u32;
            for &(c, v) in &piv.row {
                if c == piv.col {
                    a_piv = v;
                    continue;
                }
                let xc = &x[c as usize * k..(c as usize + 1) * k];
                for (a, &xv) in acc.iter_mut().zip(xc) {
                    *a = (*a + v as u64 * xv as u64) % p;
                }
            }
            let scale = f.neg(f.inv(a_piv));
            let base = piv.col as usize * k;
            for t in 0..k {
                x[base + t] = f.mul(acc[t] as u32, scale);
            }
        }
        (x, k)
    }

    /// Dense kernel basis vectors.
    pub fn kernel_basis(&self) -> Vec<Vec<u32>> {
        let (x, k) = self.kernel_block();
        (0..k).map(|t| (0..self.ncols).map(|c| x[c * k + t]).collect()).collect()
    }

    /// Kernel basis vectors restricted to the listed coordinates.
    pub fn kernel_gather(&self, coords: &[u32]) -> Vec<Vec<u32>> {
        let (x, k) = self.kernel_block();
        (0..k).map(|t| coords.iter().map(|&c| x[c as usize * k + t]).collect()).collect()
    }
}

/// Sparse Gaussian elimination.
pub fn eliminate(m: SparseModMatrix, field: Field) -> Elimination {
    eliminate_with(m, field, true)
}

fn eliminate_with(m: SparseModMatrix, field: Field, keep_rows: bool) -> Elimination {
    let f = field;
    let ncols = m.ncols;
    let mut rows = m.rows;
    let nrows = rows.len();
    let mut col_rows: Vec<Vec<u32>> = vec![Vec::new(); ncols];
    let mut col_count = vec![0u32; ncols];
    for (i, row) in rows.iter().enumerate() {
        for &(c, _) in row {
            col_rows[c as usize].push(i as u32);
            col_count[c as usize] += 1;
        }
    }
    let mut active = vec![true; nrows];
    let mut done = vec![false; ncols];
    let mut heap: BinaryHeap<Reverse<(u32, u32)>> =
        (0..ncols).map(|c| Reverse((col_count[c], c as u32))).collect();
    let mut stamp = vec![0u32; nrows];
    let mut epoch = 0u32;
    let mut pivots = Vec::new();
    let mut free = Vec::new();
    let mut touched: Vec<u32> = Vec::new();
    let mut merged: Vec<(u32, u32)> = Vec::new();

    while let Some(Reverse((cnt, c))) = heap.pop() {
        let cu = c as usize;
        if done[cu] || cnt != col_count[cu] {
            continue;
        }
        done[cu] = true;
        if cnt == 0 {
            free.push(c);
            col_rows[cu] = Vec::new();
            continue;
        }
        epoch += 1;
        let mut holders: Vec<u32> = Vec::with_capacity(cnt as usize);
        for &i in &col_rows[cu] {
            let iu = i as usize;
            if active[iu]
                && stamp[iu] != epoch
                && rows[iu].binary_search_by_key(&c, |e| e.0).is_ok()
            {
                stamp[iu] = epoch;
                holders.push(i);
            }
        }
        col_rows[cu] = Vec::new();
        debug_assert_eq!(holders.len(), cnt as usize);
        let r = *holders
            .iter()
            .min_by_key(|&&i| (rows[i as usize].len(), i))
            .expect("column has a holder");
        let prow = std::mem::take(&mut rows[r as usize]);
        active[r as usize] = false;
        touched.clear();
        for &(cc, _) in &prow {
            col_count[cc as usize] -= 1;
            touched.push(cc);
        }
        let a = prow[prow.binary_search_by_key(&c, |e| e.0).unwrap()].1;
        let ainv = f.inv(a);
        for &i in holders.iter().filter(|&&i| i != r) {
            let iu = i as usize;
            let old = std::mem::take(&mut rows[iu]);
            let b = old[old.binary_search_by_key(&c, |e| e.0).unwrap()].1;
            let factor = f.mul(b, ainv);
            merged.clear();
            let (mut p, mut q) = (0, 0);
            while p < old.len() || q < prow.len() {
                let take_old = q >= prow.len() || (p < old.len() && old[p].0 < prow[q].0);
                let take_new = p >= old.len() || (q < prow.len() && prow[q].0 < old[p].0);
                if take_old {
                    merged.push(old[p]);
                    p += 1;
                } else if take_new {
                    let (cc, v) = prow[q];
                    merged.push((cc, f.neg(f.mul(factor, v))));
                    col_count[cc as usize] += 1;
                    col_rows[cc as usize].push(i);
                    touched.push(cc);
                    q += 1;
                } else {
                    let (cc, v) = old[p];
                    let nv = f.sub(v, f.mul(factor, prow[q].1));
                    if nv == 0 {
                        col_count[cc as usize] -= 1;
                        touched.push(cc);
                    } else {
                        merged.push((cc, nv));
                    }
                    p += 1;
                    q += 1;
                }
            }
            if merged.is_empty() {
                active[iu] = false;
                rows[iu] = Vec::new();
            } else {
                rows[iu] = merged.clone();
            }
        }
        touched.sort_unstable();
        touched.dedup();
        for &cc in &touched {
            if !done[cc as usize] {
                heap.push(Reverse((col_count[cc as usize], cc)));
            }
        }
        pivots.push(Pivot { col: c, row: if keep_rows { prow } else { Vec::new() } });
    }
    Elimination { field, ncols, pivots, free, kernel_ready: keep_rows }
}

/// Which extreme of the per-prime values is trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prefer {
    /// Ranks: reduction mod p can only lose rank.
    Max,
    /// Kernel dimensions: reduction mod p can only gain.
    Min,
    /// No ordering argument; a quorum of equal values is required.
    Quorum,
}

/// Evaluates `f` over prime fields until [`QUORUM`] primes agree on the
/// trusted value, or fails after all [`PRIMES`].
pub fn certify<T, F>(prefer: Prefer, f: F) -> Result<(T, Vec<(u64, T)>)>
where
    T: Clone + Ord + std::fmt::Debug + Send,
    F: Fn(Field) -> Result<T> + Sync,
{
    let mut seen: Vec<(u64, T)> = PRIMES[..QUORUM]
        .par_iter()
        .map(|&p| f(Field::new(p)).map(|v| (p, v)))
        .collect::<Result<_>>()?;
    let mut next = QUORUM;
    loop {
        let votes = |v: &T| seen.iter().filter(|s| &s.1 == v).count();
        let candidate = match prefer {
            Prefer::Max => seen.iter().map(|s| s.1.clone()).max(),
            Prefer::Min => seen.iter().map(|s| s.1.clone()).min(),
            Prefer::Quorum => seen.iter().map(|s| s.1.clone()).max_by_key(|v| votes(v)),
        }
        .expect("at least one prime");
        if votes(&candidate) >= QUORUM {
            return Ok((candidate, seen));
        }
        if next == PRIMES.len() {
            return Err(KcmError::PrimeDisagreement(
                seen.into_iter().map(|(p, v)| (p, format!("{v:?}"))).collect(),
            ));
        }
        let p = PRIMES[next];
        seen.push((p, f(Field::new(p))?));
        next += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedRank {
    pub rank: usize,
    pub ranks: Vec<(u64, usize)>,
}

/// Partition of the positions in `cols` into groups whose columns share no
/// row of `h`. `H[:, cols]` is block diagonal over the groups, so each one
/// is eliminated on its own and the fill of one never coexists with another.
pub fn column_blocks(h: &SparseOperator, cols: &[usize]) -> Vec<Vec<usize>> {
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut parent: Vec<usize> = (0..cols.len()).collect();
    let mut owner = vec![usize::MAX; h.dim()];
    for (k, &j) in cols.iter().enumerate() {
        for (i, _) in h.row(j) {
            if owner[i] == usize::MAX {
                owner[i] = k;
            } else {
                let (a, b) = (find(&mut parent, k), find(&mut parent, owner[i]));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut slot = vec![usize::MAX; cols.len()];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for k in 0..cols.len() {
        let root = find(&mut parent, k);
        if slot[root] == usize::MAX {
            slot[root] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[root]].push(k);
    }
    blocks
}

/// Eliminates `H[:, cols]` block by block. `visit` receives the positions
/// (into `cols`) of each block and its elimination.
fn for_each_block(
    h: &SparseOperator,
    cols: &[usize],
    field: Field,
    keep_rows: bool,
    mut visit: impl FnMut(&[usize], Elimination),
) -> Result<()> {
    for block in column_blocks(h, cols) {
        let global: Vec<usize> = block.iter().map(|&k| cols[k]).collect();
        let m = SparseModMatrix::from_operator_columns(h, Some(&global), field)?;
        visit(&block, eliminate_with(m, field, keep_rows));
    }
    Ok(())
}

pub fn rank_mod(h: &SparseOperator, field: Field) -> Result<usize> {
    let all: Vec<usize> = (0..h.dim()).collect();
    let mut rank = 0;
    for_each_block(h, &all, field, false, |_, e| rank += e.rank())?;
    Ok(rank)
}

pub fn certified_rank(h: &SparseOperator) -> Result<CertifiedRank> {
    let (rank, ranks) = certify(Prefer::Max, |f| rank_mod(h, f))?;
    Ok(CertifiedRank { rank, ranks })
}

/// `dim { v in ker H : v_i = 0 for every i outside `cols` }`.
pub fn restricted_kernel_dim(h: &SparseOperator, cols: &[usize], field: Field) -> Result<usize> {
    let mut dim = 0;
    for_each_block(h, cols, field, false, |_, e| dim += e.kernel_dim())?;
    Ok(dim)
}

/// Dimension of the sum over `column_sets` of the restricted kernels
/// `{ v in ker H : supp v within set }`. Returns `(dim ker H, dim of sum)`.
pub fn kernel_span_dim(
    h: &SparseOperator,
    column_sets: &[Vec<usize>],
    field: Field,
) -> Result<(usize, usize)> {
    // a kernel vector is fixed by its values on the free columns
    let all: Vec<usize> = (0..h.dim()).collect();
    let mut free: Vec<usize> = Vec::new();
    for_each_block(h, &all, field, false, |pos, e| {
        free.extend(e.free_columns().iter().map(|&c| pos[c as usize]))
    })?;
    free.sort_unstable();
    let k = free.len();
    let mut free_pos = vec![u32::MAX; h.dim()];
    for (t, &c) in free.iter().enumerate() {
        free_pos[c] = t as u32;
    }
    let mut echelon = Echelon::new(k, field);
    for cols in column_sets {
        if echelon.rank() == k {
            break;
        }
        for_each_block(h, cols, field, true, |pos, elim| {
            if elim.kernel_dim() == 0 {
                return;
            }
            let global = |c: u32| cols[pos[c as usize]];
            let local: Vec<u32> =
                (0..pos.len() as u32).filter(|&c| free_pos[global(c)] != u32::MAX).collect();
            for v in elim.kernel_gather(&local) {
                let mut w = vec![0u32; k];
                for (&c, &x) in local.iter().zip(&v) {
                    w[free_pos[global(c)] as usize] = x;
                }
                echelon.insert(w);
            }
        })?;
    }
    Ok((k, echelon.rank()))
}

/// Incrementally maintained reduced row echelon basis over a prime field.
#[derive(Debug, Clone)]
pub struct Echelon {
    field: Field,
    dim: usize,
    rows: Vec<(usize, Vec<u32>)>,
}

impl Echelon {
    pub fn new(dim: usize, field: Field) -> Self {
        Echelon { field, dim, rows: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Adds `v`; returns whether the rank grew.
    pub fn insert(&mut self, mut v: Vec<u32>) -> bool {
        debug_assert_eq!(v.len(), self.dim);
        let f = self.field;
        for (piv, row) in &self.rows {
            let a = v[*piv];
            if a != 0 {
                for (x, &r) in v.iter_mut().zip(row) {
                    if r != 0 {
                        *x = f.sub(*x, f.mul(a, r));
                    }
                }
            }
        }
        let Some(piv) = v.iter().position(|&x| x != 0) else {
            return false;
        };
        let inv = f.inv(v[piv]);
        v.iter_mut().for_each(|x| *x = f.mul(*x, inv));
        for (_, row) in self.rows.iter_mut() {
            let a = row[piv];
            if a != 0 {
                for (x, &r) in row.iter_mut().zip(&v) {
                    if r != 0 {
                        *x = f.sub(*x, f.mul(a, r));
                    }
                }
            }
        }
        self.rows.push((piv, v));
        true
    }
}

/// Rank of a small dense matrix given as rows.
pub fn dense_rank(rows: &[Vec<u32>], field: Field) -> usize {
    let Some(first) = rows.first() else { return 0 };
    let mut e = Echelon::new(first.len(), field);
    for r in rows {
        e.insert(r.clone());
    }
    e.rank()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(ncols: usize, dense: &[&[i64]], f: Field) -> SparseModMatrix {
        SparseModMatrix {
            ncols,
            rows: dense
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(_, &v)| v != 0)
                        .map(|(c, &v)| (c as u32, f.from_i64(v)))
                        .collect()
                })
                .collect(),
        }
    }

    #[test]
    fn field_arithmetic() {
        let f = Field::new(PRIMES[0]);
        assert_eq!(f.mul(f.inv(3), 3), 1);
        assert_eq!(f.from_f64(0.5).unwrap(), f.inv(2));
        assert_eq!(f.from_f64(-3.0).unwrap(), f.from_i64(-3));
        assert_eq!(f.from_f64(0.75).unwrap(), f.mul(3, f.inv(4)));
        let tiny = f64::MIN_POSITIVE / 4.0;
        assert_eq!(f.mul(f.from_f64(tiny).unwrap(), f.pow(2, 1024)), 1);
    }

    #[test]
    fn path_graph_kernel() {
        let f = Field::new(PRIMES[1]);
        let m = mat(3, &[&[0, 1, 0], &[1, 0, 1], &[0, 1, 0]], f);
        let e = eliminate(m, f);
        assert_eq!(e.rank(), 2);
        let k = e.kernel_basis();
        assert_eq!(k.len(), 1);
        let v = &k[0];
        assert_eq!(v[1], 0);
        assert_eq!(f.add(v[0], v[2]), 0);
    }

    #[test]
    fn dependent_rows_and_fill() {
        let f = Field::new(PRIMES[2]);
        let m = mat(
            4,
            &[&[1, 2, 0, 1], &[2, 4, 0, 2], &[0, 1, 1, 0], &[1, 3, 1, 1]],
            f,
        );
        assert_eq!(eliminate(m, f).rank(), 2);
    }

    #[test]
    fn echelon_ranks() {
        let f = Field::new(PRIMES[0]);
        let rows = vec![vec![1, 2, 3], vec![2, 4, 6], vec![0, 1, 1]];
        assert_eq!(dense_rank(&rows, f), 2);
    }

    #[test]
    fn quorum_rule() {
        let (v, seen) = certify(Prefer::Max, |_| Ok(4)).unwrap();
        assert_eq!((v, seen.len()), (4, 3));
        let err = certify(Prefer::Max, |f| Ok(PRIMES.iter().position(|&p| p == f.prime()).unwrap()));
        assert!(matches!(err, Err(KcmError::PrimeDisagreement(v)) if v.len() == 5));
    }

    #[test]
    fn chiral_blocks_split_elimination() {
        use crate::models::{build_hamiltonian, ModelSpec};
        let spec = ModelSpec::east(2, 4).unwrap();
        let g = spec.geometry;
        let basis = crate::fragmentation::sector_from_seed(&spec, g.parse_state("1100").unwrap()).unwrap();
        let h = build_hamiltonian(&spec, &basis).unwrap();
        let all: Vec<usize> = (0..3).collect();
        let mut blocks = column_blocks(&h, &all);
        blocks.sort();
        let mid = basis.index_of(g.parse_state("1010").unwrap()).unwrap();
        assert_eq!(blocks.len(), 2);
        assert!(blocks.iter().any(|b| b == &vec![mid]));
        let f = Field::new(PRIMES[1]);
        assert_eq!(rank_mod(&h, f).unwrap(), 2);
        assert_eq!(kernel_span_dim(&h, std::slice::from_ref(&all), f).unwrap(), (1, 1));
    }
}
