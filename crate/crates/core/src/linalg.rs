//! Dense linear algebra: a generic pivoted LU for reference solves, and thin
//! `f64` wrappers over LAPACK for eigen- and singular-value problems.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eig, EigVals, EigValsh, Eigh, Inverse, SVD, UPLO};

use crate::error::{QcError, Result};
use crate::operators::write_matrix_csv;
use crate::scalar::Real;

/// `P A = L U` with partial (row) pivoting.
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    lu: Array2<T>,
    perm: Vec<usize>,
}

impl<T: Real> LuFactors<T> {
    pub fn new(a: &Array2<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(QcError::InvalidArgument(format!("matrix is {}x{}, not square", n, a.ncols())));
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
        for col in 0..n {
            let (p, pv) = (col..n).map(|r| (r, lu[[r, col]].abs())).fold((col, T::zero()), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            });
            if pv <= tiny {
                return Err(QcError::Singular(format!("zero pivot {} in column {col}", pv.as_f64())));
            }
            if p != col {
                for c in 0..n {
                    lu.swap([p, c], [col, c]);
                }
                perm.swap(p, col);
            }
            let d = lu[[col, col]];
            for r in col + 1..n {
                let m = lu[[r, col]] / d;
                lu[[r, col]] = m;
                if m != T::zero() {
                    for c in col + 1..n {
                        let u = lu[[col, c]];
                        lu[[r, c]] -= m * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &Array1<T>) -> Array1<T> {
        let n = self.lu.nrows();
        assert_eq!(b.len(), n);
        let mut x: Array1<T> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut s = x[r];
            for c in 0..r {
                s -= self.lu[[r, c]] * x[c];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for c in r + 1..n {
                s -= self.lu[[r, c]] * x[c];
            }
            x[r] = s / self.lu[[r, r]];
        }
        x
    }

    pub fn solve_columns(&self, b: &Array2<T>) -> Array2<T> {
        let mut out = Array2::zeros(b.raw_dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve(&col.to_owned()));
        }
        out
    }
}

/// Solves `A x = b` by pivoted LU.
pub fn dense_solve<T: Real>(a: &Array2<T>, b: &Array1<T>) -> Result<Array1<T>> {
    if b.len() != a.nrows() {
        return Err(QcError::LengthMismatch { expected: a.nrows(), got: b.len() });
    }
    Ok(LuFactors::new(a)?.solve(b))
}

fn check_finite_square(a: &Array2<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(QcError::InvalidArgument(format!("matrix is {}x{}, not square", a.nrows(), a.ncols())));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(QcError::InvalidArgument("matrix has non-finite entries".into()));
    }
    Ok(())
}

fn eigen_failure(a: &Array2<f64>, reason: impl ToString) -> QcError {
    let mut buf = Vec::new();
    let _ = write_matrix_csv(a, &mut buf);
    QcError::Eigensolver { reason: reason.to_string(), matrix_csv: String::from_utf8_lossy(&buf).into_owned() }
}

/// Right eigenpairs of a general real matrix (unsorted, as LAPACK returns them).
/// Dense inverse through LAPACK (`getrf`/`getri`).
pub fn inverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    a.inv().map_err(|e| QcError::Singular(format!("inverse failed: {e}")))
}

pub fn eig(a: &Array2<f64>) -> Result<(Array1<c64>, Array2<c64>)> {
    check_finite_square(a)?;
    a.eig().map_err(|e| eigen_failure(a, e))
}

pub fn eigvals(a: &Array2<f64>) -> Result<Array1<c64>> {
    check_finite_square(a)?;
    a.eigvals().map_err(|e| eigen_failure(a, e))
}

/// Eigenpairs of a symmetric matrix (lower triangle referenced), ascending.
pub fn eigh(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    check_finite_square(a)?;
    a.eigh(UPLO::Lower).map_err(|e| eigen_failure(a, e))
}

pub fn eigvalsh(a: &Array2<f64>) -> Result<Array1<f64>> {
    check_finite_square(a)?;
    a.eigvalsh(UPLO::Lower).map_err(|e| eigen_failure(a, e))
}

/// Singular values in descending order.
pub fn singular_values(a: &Array2<f64>) -> Result<Array1<f64>> {
    let (_, s, _) = a.svd(false, false).map_err(|e| QcError::Backend(e.to_string()))?;
    Ok(s)
}

pub fn singular_values_complex(a: &Array2<c64>) -> Result<Array1<f64>> {
    let (_, s, _) = a.svd(false, false).map_err(|e| QcError::Backend(e.to_string()))?;
    Ok(s)
}

fn ratio(s: &Array1<f64>) -> f64 {
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// 2-norm condition number `s_max / s_min`; infinite for a singular matrix.
pub fn condition_number(a: &Array2<f64>) -> Result<f64> {
    Ok(ratio(&singular_values(a)?))
}

pub fn condition_number_complex(a: &Array2<c64>) -> Result<f64> {
    Ok(ratio(&singular_values_complex(a)?))
}
