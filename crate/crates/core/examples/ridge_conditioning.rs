//! How the condition-number cap picks the ridge weight on nearly collinear inputs.
//!
//! Run with `cargo run --example ridge_conditioning`.

use pams::dataset::build_regressor;
use pams::regression::{eigen_extremes, mle_fit, ridge_fit, select_rho};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pams::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let len = 300;
    let a: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    // second sensor almost a copy of the first
    let b: Vec<f64> = a
        .iter()
        .map(|x| x + 1e-5 * rng.random_range(-1.0..1.0))
        .collect();
    let y: Vec<f64> = a
        .iter()
        .map(|x| 2.0 * x + 0.01 * rng.random_range(-1.0..1.0))
        .collect();
    let m = build_regressor(&[&a, &b], &y, 2)?;

    let gram = m.phi.transpose() * &m.phi;
    let ext = eigen_extremes(&gram)?;
    println!(
        "lambda_max {:.3e}, lambda_min {:.3e}, kappa {:.3e}",
        ext.lambda_max,
        ext.lambda_min,
        ext.condition_number()
    );

    match mle_fit(&m) {
        Ok(theta) => println!("unregularized |theta| = {:.3e}", theta.norm()),
        Err(e) => println!("unregularized fit refused: {e}"),
    }
    for c_lim in [1e2, 1e4, 1e6, 1e8] {
        let r = ridge_fit(&m, c_lim)?;
        println!(
            "C_lim {c_lim:>7.0e}: rho {:>10.3e} (closed form {:.3e}), kappa after {:.3e}, |theta| {:.3}",
            r.rho,
            select_rho(ext, c_lim)?,
            r.kappa_after,
            r.theta.norm()
        );
    }
    Ok(())
}
