//! Train on two conditions, then classify a switching record window by window.
//!
//! Run with `cargo run --example switching_schedule [SEED]`.

use pams::evaluation::fit_metric;
use pams::scenario::{run_switching, SwitchingConfig};

fn main() -> pams::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let out = run_switching(&SwitchingConfig {
        seed,
        ..SwitchingConfig::default()
    })?;
    let trace = &out.trace;
    println!("window  samples   chosen  posterior  ambiguous");
    for w in &trace.windows {
        println!(
            "{:>6}  {:>3}-{:<4}  {:>6}  {:>9.6}  {}",
            w.window_id, w.start, w.end, trace.labels[w.chosen], w.posterior[w.chosen], w.ambiguous
        );
    }
    if let Some((measured, estimated)) = trace.scored_pairs() {
        println!(
            "scheduled FIT {:.2}%",
            fit_metric(&measured, &estimated)?.value()
        );
    }
    Ok(())
}
