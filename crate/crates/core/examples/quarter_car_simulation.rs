//! Discretize the two reference quarter-car conditions and simulate a switch.
//!
//! Run with `cargo run --example quarter_car_simulation [OUT.csv]`.

use nalgebra::DVector;
use pams::simulator::{
    add_noise, discretize, gen_excitation, simulate, NoiseSpec, QuarterCarParams, Snr,
    SwitchSchedule, DEFAULT_SAMPLE_TIME,
};

fn main() -> pams::Result<()> {
    let systems = vec![
        (
            "1".to_string(),
            discretize(&QuarterCarParams::C1, DEFAULT_SAMPLE_TIME)?,
        ),
        (
            "2".to_string(),
            discretize(&QuarterCarParams::C2, DEFAULT_SAMPLE_TIME)?,
        ),
    ];
    for (label, sys) in &systems {
        let radius = sys
            .a
            .complex_eigenvalues()
            .iter()
            .map(|l| l.norm())
            .fold(0.0, f64::max);
        println!("condition {label}: spectral radius of A = {radius:.4}");
    }

    let schedule = SwitchSchedule::new(vec![("1".into(), 80), ("2".into(), 80)])?;
    let z_r = gen_excitation(schedule.total(), 0.01, 42)?;
    let clean = simulate(&systems, &schedule, &z_r, &DVector::zeros(4))?;
    let noisy = add_noise(
        &clean,
        &NoiseSpec {
            snr: Snr::Linear(50.0),
            seed: 43,
        },
    )?;
    for c in noisy.channels() {
        let rms = (c.data.iter().map(|x| x * x).sum::<f64>() / c.data.len() as f64).sqrt();
        println!("{:<8} rms {rms:.4e}", c.name);
    }
    if let Some(path) = std::env::args().nth(1) {
        noisy.write_csv(path.as_ref())?;
        println!("wrote {path}");
    }
    Ok(())
}
