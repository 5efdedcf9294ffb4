//! Scheduled estimator against single-condition and averaged models on
//! fifteen online quarter-car records.
//!
//! Run with `cargo run --release --example comparative_study`.

use pams::cli::summary_table;
use pams::scenario::{run_study, StudyConfig};

fn main() -> pams::Result<()> {
    let out = run_study(&StudyConfig::default())?;
    let report = &out.report;
    println!(
        "{:<10} {:>9} {:>9} {:>9} {:>7}",
        "record", "avg", "sched", "ideal", "chosen"
    );
    for row in &report.rows {
        println!(
            "{:<10} {:>9.2} {:>9.2} {:>9.2} {:>7}",
            row.condition,
            row.fit_average.unwrap_or(f64::NAN),
            row.fit_scheduled,
            row.fit_ideal,
            report.labels[row.chosen]
        );
    }
    println!();
    print!("{}", summary_table(report));
    Ok(())
}
