//! Dense numeric helpers on top of LAPACK.

use ndarray::{s, Array1, Array2, Axis};
use ndarray_linalg::{Eigh, EigValsh, SVD, UPLO};

use crate::error::{KcmError, Result};
use crate::models::SparseOperator;

fn lapack<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| KcmError::CrossCheck(format!("LAPACK failure: {e}")))
}

/// Ascending eigenvalues and column eigenvectors of a symmetric matrix.
pub fn eigh(m: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    if m.nrows() == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    lapack(m.eigh(UPLO::Lower))
}

pub fn eigvalsh(m: &Array2<f64>) -> Result<Array1<f64>> {
    if m.nrows() == 0 {
        return Ok(Array1::zeros(0));
    }
    lapack(m.eigvalsh(UPLO::Lower))
}

/// Number of eigenvalues with `|E| <= rel * max|E|`.
pub fn numeric_kernel_dim(h: &SparseOperator, rel: f64) -> Result<usize> {
    let w = eigvalsh(&h.to_dense())?;
    let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Ok(w.iter().filter(|x| x.abs() <= rel * scale).count())
}

/// Orthonormal basis (columns) of the numerical kernel of a symmetric
/// matrix, cut at `rel * max|E|`.
pub fn null_space(m: &Array2<f64>, rel: f64) -> Result<Array2<f64>> {
    let (w, v) = eigh(m)?;
    let scale = w.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i].abs() <= rel * scale).collect();
    Ok(v.select(Axis(1), &keep))
}

/// Orthonormal basis (columns) of `{x : A x = 0}` for a rectangular `A`,
/// from singular values below `abs_tol`.
pub fn right_kernel(a: &Array2<f64>, abs_tol: f64) -> Result<Array2<f64>> {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return Ok(Array2::eye(n));
    }
    let (_, sv, vt) = lapack(a.svd(false, true))?;
    let vt = vt.expect("requested");
    let keep: Vec<usize> = (0..n).filter(|&i| i >= sv.len() || sv[i] <= abs_tol).collect();
    Ok(vt.select(Axis(0), &keep).t().to_owned())
}

/// Kernel of a positive semidefinite matrix: eigenvectors below
/// `rel * max(trace / n, 1)`. The floor keeps a vanishing Θ from turning
/// roundoff into a cut.
pub fn psd_kernel(theta: &Array2<f64>, rel: f64) -> Result<Array2<f64>> {
    let n = theta.nrows();
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let (w, v) = eigh(theta)?;
    let trace: f64 = theta.diag().sum();
    let cut = rel * (trace / n as f64).max(1.0);
    let keep: Vec<usize> = (0..n).filter(|&i| w[i] <= cut).collect();
    Ok(v.select(Axis(1), &keep))
}

/// Orthonormal basis of the span of the columns of `a`, dropping directions
/// whose Gram eigenvalue is below `rel` times the largest.
pub fn orthonormal_span(a: &Array2<f64>, rel: f64) -> Result<Array2<f64>> {
    if a.ncols() == 0 {
        return Ok(Array2::zeros((a.nrows(), 0)));
    }
    let gram = a.t().dot(a);
    let (w, v) = eigh(&gram)?;
    let top = w.iter().fold(0.0f64, |m, x| m.max(*x));
    let keep: Vec<usize> = (0..w.len()).filter(|&i| w[i] > rel * top && w[i] > 0.0).collect();
    let mut q = a.dot(&v.select(Axis(1), &keep));
    for (mut col, &i) in q.axis_iter_mut(Axis(1)).zip(&keep) {
        col /= w[i].sqrt();
    }
    Ok(q)
}

/// Numerical rank of the column span.
pub fn column_rank(a: &Array2<f64>, rel: f64) -> Result<usize> {
    Ok(orthonormal_span(a, rel)?.ncols())
}

/// Flips each column so its largest-magnitude entry is positive.
pub fn fix_phases(q: &mut Array2<f64>) {
    for mut col in q.axis_iter_mut(Axis(1)) {
        let mut best = 0.0f64;
        for &x in col.iter() {
            if x.abs() > best.abs() + 1e-12 {
                best = x;
            }
        }
        if best < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
}

/// Largest absolute deviation from the identity of `q^T q`.
pub fn orthonormality_error(q: &Array2<f64>) -> f64 {
    let g = q.t().dot(q);
    let n = g.nrows();
    let mut err = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let want = if i == j { 1.0 } else { 0.0 };
            err = err.max((g[[i, j]] - want).abs());
        }
    }
    err
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// First `k` columns.
pub fn leading_columns(a: &Array2<f64>, k: usize) -> Array2<f64> {
    a.slice(s![.., ..k]).to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn path_kernel() {
        let m = array![[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let (w, _) = eigh(&m).unwrap();
        let s2 = 2f64.sqrt();
        assert!((w[0] + s2).abs() < 1e-12 && w[1].abs() < 1e-12 && (w[2] - s2).abs() < 1e-12);
        let mut k = null_space(&m, 1e-10).unwrap();
        fix_phases(&mut k);
        assert_eq!(k.ncols(), 1);
        assert!((k[[0, 0]].abs() - 1.0 / s2).abs() < 1e-12);
        assert!((k[[0, 0]] + k[[2, 0]]).abs() < 1e-12);
    }

    #[test]
    fn span_rank() {
        let a = array![[1.0, 2.0, 0.0], [0.0, 0.0, 1.0], [1.0, 2.0, 0.0]];
        assert_eq!(column_rank(&a, 1e-12).unwrap(), 2);
        let q = orthonormal_span(&a, 1e-12).unwrap();
        assert!(orthonormality_error(&q) < 1e-12);
    }
}
