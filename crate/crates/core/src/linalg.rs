//! Dense symmetric kernels: Cholesky solve and cyclic Jacobi eigenvalues.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Lower-triangular Cholesky factor. A pivot `<= rel_tol * max|diag|` is rejected.
pub fn cholesky(a: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "cholesky needs a square matrix");
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let floor = rel_tol * scale;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > floor) {
            return Err(Error::NotPositiveDefinite { row: j, pivot: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor `L`.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = l.nrows();
    let mut z = b.clone();
    for i in 0..n {
        let mut s = z[i];
        for k in 0..i {
            s -= l[(i, k)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[(k, i)] * z[k];
        }
        z[i] = s / l[(i, i)];
    }
    z
}

/// Solves `A x = b` for symmetric positive-definite `A`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let l = cholesky(a, 0.0)?;
    Ok(cholesky_solve(&l, b))
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..i {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    let rel = if scale > 0.0 { worst / scale } else { 0.0 };
    if rel > 1e-10 {
        return Err(Error::Asymmetric(rel));
    }
    Ok(())
}

/// All eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm falls below
/// `1e-12` times the Frobenius norm of the matrix.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidData(
            "eigenvalues need a square matrix".into(),
        ));
    }
    check_symmetric(a)?;
    let mut m = (a + a.transpose()) * 0.5;
    let total = m.norm();
    let target = JACOBI_TOL * total;

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += m[(i, j)] * m[(i, j)];
                    }
                }
            }
            s.sqrt()
        };
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    if k != p && k != q {
                        let akp = m[(k, p)];
                        let akq = m[(k, q)];
                        let new_kp = c * akp - s * akq;
                        let new_kq = s * akp + c * akq;
                        m[(k, p)] = new_kp;
                        m[(p, k)] = new_kp;
                        m[(k, q)] = new_kq;
                        m[(q, k)] = new_kq;
                    }
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Largest and smallest eigenvalues of a symmetric positive semi-definite matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenExtremes {
    pub lambda_max: f64,
    pub lambda_min: f64,
}

impl EigenExtremes {
    /// Condition number `λ_max / λ_min`, infinite when λ_min is numerically zero.
    pub fn condition_number(&self) -> f64 {
        if self.lambda_max == 0.0 {
            return 1.0;
        }
        if self.lambda_min <= 1e-14 * self.lambda_max {
            return f64::INFINITY;
        }
        self.lambda_max / self.lambda_min
    }
}

/// Extreme eigenvalues of a Gram matrix. Round-off negatives are clamped to zero.
pub fn eigen_extremes(gram: &DMatrix<f64>) -> Result<EigenExtremes> {
    let eig = symmetric_eigenvalues(gram)?;
    let (Some(&lo), Some(&hi)) = (eig.first(), eig.last()) else {
        return Err(Error::InvalidData("empty matrix".into()));
    };
    Ok(EigenExtremes {
        lambda_max: hi.max(0.0),
        lambda_min: lo.max(0.0),
    })
}
