//! The four command-line steps driven from library code in a scratch directory.
//!
//! Run with `cargo run --example cli_pipeline [OUT_DIR]`.

use std::path::PathBuf;

use pams::cli::{cmd_estimate, cmd_evaluate, cmd_simulate, cmd_train, summary_table, RunConfig};

fn main() -> pams::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("pams-pipeline"));
    let cfg = RunConfig {
        seed: 7,
        ..RunConfig::default()
    };

    let sim = root.join("sim");
    cmd_simulate(&cfg, false, &sim)?;
    let records =
        ["1", "2"].map(|l| format!("{l}={}", sim.join(format!("train_{l}.csv")).display()));
    print!("{}", cmd_train(&cfg, &records, &root.join("model"))?);

    let store = root.join("model/store.json");
    let validation = sim.join("validation.csv");
    print!(
        "\n{}",
        cmd_estimate(&cfg, &store, &validation, &root.join("estimate"))?
    );
    let online = vec![format!("switching={}", validation.display())];
    let report = cmd_evaluate(&cfg, &store, &online, false, &root.join("evaluate"))?;
    print!("\n{}", summary_table(&report));
    println!("\noutputs under {}", root.display());
    Ok(())
}
