//! Small dense linear-algebra helpers (f64 via nalgebra, plus generic
//! Gaussian elimination usable in double-double).

use crate::real::Real;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 {
        return DVector::zeros(0);
    }
    SymmetricEigen::new(symmetrize(m)).eigenvalues
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    singular_values(m).iter().cloned().fold(0.0, f64::max)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().cloned().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    if s.len() < m.ncols().min(m.nrows()) || s.is_empty() {
        return 0.0;
    }
    *s.last().unwrap()
}

/// Orthonormal basis of the column space (rank decided relative to σ_max).
pub fn orth(m: &DMatrix<f64>, tol_rel: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if c == 0 || r == 0 {
        return DMatrix::zeros(r, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.unwrap();
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol_rel * smax.max(f64::MIN_POSITIVE))
        .collect();
    let mut out = DMatrix::zeros(r, idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &u.column(i));
    }
    out
}

/// Orthonormal basis of the null space; singular values ≤ tol_rel·σ_max count as zero.
pub fn null_space(m: &DMatrix<f64>, tol_rel: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if r == 0 {
        return DMatrix::identity(c, c);
    }
    // pad to square so V is complete
    let mut sq = DMatrix::zeros(r.max(c), c);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.unwrap();
    let s = &svd.singular_values;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let idx: Vec<usize> = (0..c).filter(|&i| s[i] <= tol_rel * smax || smax == 0.0).collect();
    let mut out = DMatrix::zeros(c, idx.len());
    for (j, &i) in idx.iter().enumerate() {
        out.set_column(j, &vt.row(i).transpose());
    }
    out
}

pub fn rank(m: &DMatrix<f64>, tol_rel: f64) -> usize {
    let s = singular_values(m);
    if s.is_empty() {
        return 0;
    }
    let smax = s[0];
    s.iter().filter(|&&x| x > tol_rel * smax && x > 0.0).count()
}

/// Symmetric positive-definite square root and its inverse.
pub fn spd_sqrt(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(symmetrize(m));
    let n = m.nrows();
    let mut d = DMatrix::zeros(n, n);
    let mut di = DMatrix::zeros(n, n);
    for i in 0..n {
        let l = e.eigenvalues[i].max(0.0).sqrt();
        d[(i, i)] = l;
        di[(i, i)] = if l > 0.0 { 1.0 / l } else { 0.0 };
    }
    let q = &e.eigenvectors;
    (q * d * q.transpose(), q * di * q.transpose())
}

/// Determinant by partial-pivot Gaussian elimination in any precision.
pub fn det_generic<T: Real>(m: &DMatrix<T>) -> T {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    if n == 0 {
        return T::one();
    }
    let mut a = m.clone();
    let mut det = T::one();
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if a[(i, k)].abs() > a[(p, k)].abs() {
                p = i;
            }
        }
        if a[(p, k)] == T::zero() {
            return T::zero();
        }
        if p != k {
            a.swap_rows(p, k);
            det = -det;
        }
        let piv = a[(k, k)];
        det = det * piv;
        for i in k + 1..n {
            let f = a[(i, k)] / piv;
            if f != T::zero() {
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] = a[(i, j)] - f * v;
                }
            }
        }
    }
    det
}

/// Solve A X = B (A square) in any precision; None if singular.
pub fn solve_generic<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = a.nrows();
    let m = b.ncols();
    let mut a = a.clone();
    let mut x = b.clone();
    for k in 0..n {
        let mut p = k;
        for i in k + 1..n {
            if a[(i, k)].abs() > a[(p, k)].abs() {
                p = i;
            }
        }
        if a[(p, k)] == T::zero() {
            return None;
        }
        a.swap_rows(p, k);
        x.swap_rows(p, k);
        let piv = a[(k, k)];
        for i in k + 1..n {
            let f = a[(i, k)] / piv;
            if f != T::zero() {
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] = a[(i, j)] - f * v;
                }
                for j in 0..m {
                    let v = x[(k, j)];
                    x[(i, j)] = x[(i, j)] - f * v;
                }
            }
        }
    }
    for k in (0..n).rev() {
        for j in 0..m {
            let mut s = x[(k, j)];
            for i in k + 1..n {
                s = s - a[(k, i)] * x[(i, j)];
            }
            x[(k, j)] = s / a[(k, k)];
        }
    }
    Some(x)
}

/// Matrix product in any precision (nalgebra's product needs traits that
/// double-double does not provide).
pub fn matmul<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (r, k) = a.shape();
    let c = b.ncols();
    assert_eq!(k, b.nrows());
    let mut out = DMatrix::from_element(r, c, T::zero());
    for i in 0..r {
        for l in 0..k {
            let ail = a[(i, l)];
            if ail == T::zero() {
                continue;
            }
            for j in 0..c {
                out[(i, j)] = out[(i, j)] + ail * b[(l, j)];
            }
        }
    }
    out
}

/// acc += A·B
pub fn gemm_acc<T: Real>(acc: &mut DMatrix<T>, a: &DMatrix<T>, b: &DMatrix<T>) {
    let (r, k) = a.shape();
    let c = b.ncols();
    for i in 0..r {
        for l in 0..k {
            let ail = a[(i, l)];
            if ail == T::zero() {
                continue;
            }
            for j in 0..c {
                acc[(i, j)] = acc[(i, j)] + ail * b[(l, j)];
            }
        }
    }
}

/// acc += m
pub fn add_into<T: Real>(acc: &mut DMatrix<T>, m: &DMatrix<T>) {
    for (a, b) in acc.iter_mut().zip(m.iter()) {
        *a = *a + *b;
    }
}

pub fn max_abs_generic<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, &x| if x.abs() > acc { x.abs() } else { acc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::DD;

    #[test]
    fn det_and_solve_agree_with_nalgebra() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.5, -1.0, 3.0, 0.0, 0.25, 0.0, 1.0]);
        let d = det_generic(&a);
        assert!((d - a.determinant()).abs() < 1e-12);
        let b = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let x = solve_generic(&a, &b).unwrap();
        assert!(((&a * &x) - &b).abs().max() < 1e-12);
        let add: DMatrix<DD> = a.map(DD::of);
        assert!((det_generic(&add).to_f() - d).abs() < 1e-12);
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let k = null_space(&a, 1e-10);
        assert_eq!(k.ncols(), 1);
        assert!((&a * &k).abs().max() < 1e-12);
        assert_eq!(rank(&a, 1e-10), 1);
    }
}
