//! Small dense kernels on `R x R` systems.

use crate::{Error, FactorMatrix, Result, Scalar};

/// Relative cutoff for eigenvalues and Cholesky pivots, scaled by the largest one.
pub const PINV_RTOL: f64 = 1e-12;

/// `A^T A`.
pub fn gram<T: Scalar>(a: &FactorMatrix<T>) -> FactorMatrix<T> {
    let r = a.cols();
    let mut g = FactorMatrix::zeros(r, r);
    for i in 0..a.rows() {
        let row = a.row(i);
        for p in 0..r {
            let ap = row[p];
            for q in p..r {
                let v = g.get(p, q) + ap * row[q];
                g.set(p, q, v);
            }
        }
    }
    for p in 0..r {
        for q in 0..p {
            let v = g.get(q, p);
            g.set(p, q, v);
        }
    }
    g
}

/// Elementwise product of `rank x rank` matrices; all-ones when empty.
pub fn hadamard_chain<'a, T: Scalar>(
    rank: usize,
    mats: impl IntoIterator<Item = &'a FactorMatrix<T>>,
) -> FactorMatrix<T> {
    let mut v = FactorMatrix::filled(rank, rank, T::one());
    for m in mats {
        for (x, &y) in v.as_mut_slice().iter_mut().zip(m.as_slice()) {
            *x *= y;
        }
    }
    v
}

/// Lower Cholesky factor of a symmetric positive-definite matrix, or `None`
/// when a pivot is not positive relative to the largest diagonal entry.
pub fn cholesky<T: Scalar>(v: &FactorMatrix<T>) -> Option<FactorMatrix<T>> {
    let n = v.rows();
    let max_diag = (0..n).map(|i| v.get(i, i)).fold(T::zero(), T::max);
    let floor = max_diag * T::from_f64_lossy(PINV_RTOL);
    let mut l = FactorMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = v.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > floor) {
            return None;
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in j + 1..n {
            let mut s = v.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Some(l)
}

/// Eigenvalues and column eigenvectors of a symmetric matrix (cyclic Jacobi).
pub fn symmetric_eigen<T: Scalar>(v: &FactorMatrix<T>) -> (Vec<T>, FactorMatrix<T>) {
    let n = v.rows();
    let mut a = v.clone();
    let mut q = FactorMatrix::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() });
    let two = T::one() + T::one();
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j) * a.get(i, j))
            .sum();
        let scale: T = (0..n).map(|i| a.get(i, i) * a.get(i, i)).sum::<T>() + off;
        if off <= scale * T::epsilon() * T::epsilon() || off == T::zero() {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                let apr = a.get(p, r);
                if apr == T::zero() {
                    continue;
                }
                let theta = (a.get(r, r) - a.get(p, p)) / (two * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akr = a.get(k, r);
                    a.set(k, p, c * akp - s * akr);
                    a.set(k, r, s * akp + c * akr);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let ark = a.get(r, k);
                    a.set(p, k, c * apk - s * ark);
                    a.set(r, k, s * apk + c * ark);
                }
                for k in 0..n {
                    let qkp = q.get(k, p);
                    let qkr = q.get(k, r);
                    q.set(k, p, c * qkp - s * qkr);
                    q.set(k, r, s * qkp + c * qkr);
                }
            }
        }
    }
    ((0..n).map(|i| a.get(i, i)).collect(), q)
}

/// Moore-Penrose pseudoinverse of a symmetric positive-semidefinite matrix.
pub fn pinv_symmetric<T: Scalar>(v: &FactorMatrix<T>) -> FactorMatrix<T> {
    let n = v.rows();
    let (vals, q) = symmetric_eigen(v);
    let top = vals.iter().copied().fold(T::zero(), T::max);
    let cutoff = top * T::from_f64_lossy(PINV_RTOL);
    let inv: Vec<T> = vals.iter().map(|&e| if e > cutoff { T::one() / e } else { T::zero() }).collect();
    FactorMatrix::from_fn(n, n, |i, j| (0..n).map(|k| q.get(i, k) * inv[k] * q.get(j, k)).sum())
}

/// `M V^+` for symmetric positive-semidefinite `V`: a Cholesky solve when `V`
/// is numerically definite, an eigendecomposition pseudoinverse otherwise.
pub fn solve_pseudo<T: Scalar>(m: &FactorMatrix<T>, v: &FactorMatrix<T>) -> Result<FactorMatrix<T>> {
    let r = v.rows();
    if v.cols() != r || m.cols() != r {
        return Err(Error::mismatch(format!(
            "cannot solve a {}x{} system against a {}x{} matrix",
            v.rows(),
            v.cols(),
            m.rows(),
            m.cols()
        )));
    }
    if !m.is_finite() || !v.is_finite() {
        return Err(Error::Numerical("non-finite input to the normal equations".into()));
    }
    let mut out = m.clone();
    if let Some(l) = cholesky(v) {
        for i in 0..out.rows() {
            let x = out.row_mut(i);
            for j in 0..r {
                let mut s = x[j];
                for k in 0..j {
                    s -= l.get(j, k) * x[k];
                }
                x[j] = s / l.get(j, j);
            }
            for j in (0..r).rev() {
                let mut s = x[j];
                for k in j + 1..r {
                    s -= l.get(k, j) * x[k];
                }
                x[j] = s / l.get(j, j);
            }
        }
    } else {
        let p = pinv_symmetric(v);
        for i in 0..out.rows() {
            let src = m.row(i);
            let dst = out.row_mut(i);
            for (j, d) in dst.iter_mut().enumerate() {
                *d = (0..r).map(|k| src[k] * p.get(k, j)).sum();
            }
        }
    }
    Ok(out)
}
