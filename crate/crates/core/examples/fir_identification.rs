//! Recover a two-input FIR transmissibility from simulated signals.
//!
//! Run with `cargo run --example fir_identification`.

use pams::dataset::{Channel, ChannelRole, TimeSeriesSet};
use pams::transmissibility::{fit_fir, predict_record};
use pams::{fit_metric, DEFAULT_C_LIM};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> pams::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let len = 500;
    let a: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    // y(t) = 0.8 a(t) − 0.3 a(t−1) + 0.5 b(t−2) + small noise
    let y: Vec<f64> = (0..len)
        .map(|t| {
            let lag = |s: &[f64], k: usize| if t >= k { s[t - k] } else { 0.0 };
            0.8 * a[t] - 0.3 * lag(&a, 1) + 0.5 * lag(&b, 2) + 0.01 * rng.random_range(-1.0..1.0)
        })
        .collect();
    let record = TimeSeriesSet::new(
        100.0,
        vec![
            Channel::new("a", ChannelRole::PseudoInput, a),
            Channel::new("b", ChannelRole::PseudoInput, b),
            Channel::new("y", ChannelRole::TargetOutput, y),
        ],
    )?;

    let model = fit_fir(&record, &["a".into(), "b".into()], "y", 3, DEFAULT_C_LIM)?;
    println!("lag   theta_a    theta_b");
    for lag in 0..=model.order {
        println!(
            "{lag:>3} {:>9.4} {:>9.4}",
            model.coefficient(lag, 0),
            model.coefficient(lag, 1)
        );
    }
    println!(
        "sigma2 = {:.3e}, rho = {}, kappa = {:.2}",
        model.sigma2, model.rho, model.kappa_after
    );

    let estimate = predict_record(&model, &record)?;
    let fit = fit_metric(&record.require("y")?[model.order..], &estimate)?;
    println!("FIT on training data: {:.2}%", fit.value());
    Ok(())
}
