//! Closed-form least squares and ridge estimation of FIR parameters.
//!
//! The ridge weight is not tuned by cross-validation. It is the smallest ρ that
//! caps the condition number of `ΦᵀΦ + ρI` at a user bound `C_lim`, which has
//! a closed form in the extreme eigenvalues of the Gram matrix.

use nalgebra::{DMatrix, DVector};

use crate::dataset::RegressionMatrices;
use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
pub use crate::linalg::{eigen_extremes, solve_spd, EigenExtremes};

/// Default condition-number cap.
pub const DEFAULT_C_LIM: f64 = 1e6;

/// Relative pivot floor below which the unregularized normal equations are refused.
const MLE_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeSolution {
    pub theta: DVector<f64>,
    pub sigma2: f64,
    pub rho: f64,
    pub kappa_before: f64,
    pub kappa_after: f64,
    pub c_lim: f64,
    /// Degrees of freedom N − n_I(n+1) behind `sigma2`.
    pub dof: usize,
}

fn gram(m: &RegressionMatrices) -> (DMatrix<f64>, DVector<f64>) {
    let phi_t = m.phi.transpose();
    (&phi_t * &m.phi, phi_t * &m.y)
}

/// Unregularized least-squares estimate `(ΦᵀΦ)⁻¹ΦᵀY`.
pub fn mle_fit(m: &RegressionMatrices) -> Result<DVector<f64>> {
    let (g, rhs) = gram(m);
    let l = cholesky(&g, MLE_PIVOT_TOL).map_err(|_| Error::IllConditioned)?;
    Ok(cholesky_solve(&l, &rhs))
}

/// Smallest ρ ≥ 0 with `(λ_max + ρ)/(λ_min + ρ) ≤ c_lim`.
pub fn select_rho(ext: EigenExtremes, c_lim: f64) -> Result<f64> {
    if !(c_lim > 1.0) {
        return Err(Error::config(
            "c_lim",
            format!("must exceed 1, got {c_lim}"),
        ));
    }
    if ext.condition_number() <= c_lim {
        return Ok(0.0);
    }
    Ok((ext.lambda_max - ext.lambda_min * c_lim) / (c_lim - 1.0))
}

/// `‖Y − Φθ‖² / (N − n_I(n+1))`.
pub fn estimate_variance(m: &RegressionMatrices, theta: &DVector<f64>) -> Result<f64> {
    let (rows, params) = (m.rows(), m.params());
    if rows <= params {
        return Err(Error::InsufficientDof { rows, params });
    }
    let residual = &m.y - &m.phi * theta;
    Ok(residual.norm_squared() / (rows - params) as f64)
}

/// Ridge estimate with a fixed, caller-chosen ρ.
pub fn ridge_with_rho(m: &RegressionMatrices, rho: f64) -> Result<DVector<f64>> {
    let (mut g, rhs) = gram(m);
    for i in 0..g.nrows() {
        g[(i, i)] += rho;
    }
    solve_spd(&g, &rhs)
}

/// Ridge estimate `(ΦᵀΦ + ρI)⁻¹ΦᵀY` with ρ from the condition-number cap.
pub fn ridge_fit(m: &RegressionMatrices, c_lim: f64) -> Result<RidgeSolution> {
    let (mut g, rhs) = gram(m);
    let ext = eigen_extremes(&g)?;
    let rho = select_rho(ext, c_lim)?;
    let kappa_before = ext.condition_number();
    let theta = if ext.lambda_max == 0.0 {
        // Φ ≡ 0: every θ fits equally, the minimum-norm one is zero
        DVector::zeros(m.params())
    } else {
        for i in 0..g.nrows() {
            g[(i, i)] += rho;
        }
        solve_spd(&g, &rhs)?
    };
    let kappa_after = if ext.lambda_max == 0.0 {
        1.0
    } else {
        (ext.lambda_max + rho) / (ext.lambda_min + rho)
    };
    let sigma2 = estimate_variance(m, &theta)?;
    Ok(RidgeSolution {
        theta,
        sigma2,
        rho,
        kappa_before,
        kappa_after,
        c_lim,
        dof: m.rows() - m.params(),
    })
}
