use std::path::{Path, PathBuf};
use std::process::Command;

use pams::cli::{cmd_estimate, cmd_evaluate, cmd_simulate, cmd_train, CommonArgs, RunConfig};
use pams::evaluation::{compare_report, fit_metric, OnlineRun};
use pams::scenario::{
    run_switching, simulate_switching, study_conditions, Condition, SwitchingConfig,
    QUARTER_CAR_DECOMPOSITION,
};
use pams::scheduler::{schedule_estimate, Prior};
use pams::simulator::{QuarterCarParams, Snr, SwitchSchedule};
use pams::transmissibility::{predict_record, train_families, ModelStore};
use pams::Error;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pams"))
}

fn simulate_default(dir: &Path, seed: u64) -> PathBuf {
    let cfg = RunConfig {
        seed,
        ..RunConfig::default()
    };
    let sim = dir.join("sim");
    cmd_simulate(&cfg, false, &sim).unwrap();
    sim
}

fn train_default(dir: &Path, sim: &Path) -> PathBuf {
    let records =
        ["1", "2"].map(|l| format!("{l}={}", sim.join(format!("train_{l}.csv")).display()));
    let model = dir.join("model");
    cmd_train(&RunConfig::default(), &records, &model).unwrap();
    model.join("store.json")
}

fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn simulate_writes_reference_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_default(dir.path(), 1);
    // header plus samples
    assert_eq!(line_count(&sim.join("train_1.csv")), 1001);
    assert_eq!(line_count(&sim.join("train_2.csv")), 1001);
    assert_eq!(line_count(&sim.join("validation.csv")), 161);
    let header = std::fs::read_to_string(sim.join("validation.csv")).unwrap();
    assert!(header.starts_with("y_I1_a,y_I2,y_O,y_I1_a_clean,y_I2_clean,y_O_clean,true_label\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sim.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["version"], "1.0");
}

#[test]
fn clean_flag_gives_identical_noisy_and_clean_columns() {
    let dir = tempfile::tempdir().unwrap();
    cmd_simulate(&RunConfig::default(), true, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("validation.csv")).unwrap();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0..3], cells[3..6]);
    }
}

#[test]
fn schedule_not_matching_length_is_a_config_error() {
    let cfg = SwitchingConfig {
        schedule: SwitchSchedule {
            segments: vec![("1".into(), 80), ("3".into(), 80)],
        },
        ..SwitchingConfig::default()
    };
    assert!(matches!(
        simulate_switching(&cfg),
        Err(Error::Config { .. })
    ));
}

#[test]
fn train_builds_two_and_five_member_stores() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_default(dir.path(), 2);
    let store = ModelStore::load(&train_default(dir.path(), &sim)).unwrap();
    assert_eq!(store.conditions.len(), 2);
    assert!(store.average.is_some());

    let mut cfg = RunConfig::default();
    cfg.simulate.conditions = study_conditions();
    cfg.simulate.schedule = vec![pams::cli::ScheduleEntry {
        label: "3".into(),
        samples: 40,
    }];
    let five = dir.path().join("five");
    cmd_simulate(&cfg, false, &five).unwrap();
    let records: Vec<String> = (1..=5)
        .map(|q| format!("{q}={}", five.join(format!("train_{q}.csv")).display()))
        .collect();
    cmd_train(&cfg, &records, &dir.path().join("m5")).unwrap();
    let store = ModelStore::load(&dir.path().join("m5/store.json")).unwrap();
    let labels: Vec<&str> = store.conditions.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, ["1", "2", "3", "4", "5"]);
}

#[test]
fn train_rejects_mismatched_channels() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_default(dir.path(), 3);
    let renamed = dir.path().join("renamed.csv");
    let text = std::fs::read_to_string(sim.join("train_2.csv")).unwrap();
    std::fs::write(&renamed, text.replacen("y_I2,", "y_I3,", 1)).unwrap();
    let records = vec![
        format!("1={}", sim.join("train_1.csv").display()),
        format!("2={}", renamed.display()),
    ];
    let out = dir.path().join("model");
    assert!(cmd_train(&RunConfig::default(), &records, &out).is_err());
    assert!(!out.exists());
}

#[test]
fn estimate_tracks_the_switch_and_supports_pooled() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_default(dir.path(), 4);
    let store = train_default(dir.path(), &sim);
    for pooled in [false, true] {
        let cfg = RunConfig {
            pooled,
            ..RunConfig::default()
        };
        let out = dir.path().join(format!("est_{pooled}"));
        cmd_estimate(&cfg, &store, &sim.join("validation.csv"), &out).unwrap();
        let windows = std::fs::read_to_string(out.join("windows.csv")).unwrap();
        let chosen: Vec<&str> = windows
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(3).unwrap())
            .collect();
        assert_eq!(
            chosen,
            ["1", "1", "1", "1", "2", "2", "2", "2"],
            "pooled = {pooled}"
        );
        assert_eq!(line_count(&out.join("samples.csv")), 161);
    }
}

#[test]
fn short_window_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_default(dir.path(), 5);
    let store = train_default(dir.path(), &sim);
    let args = CommonArgs {
        window: Some(10),
        ..CommonArgs::default()
    };
    let err = RunConfig::resolve(&args).unwrap_err();
    assert_eq!(err.exit_code(), 2);

    let out = dir.path().join("est");
    let status = bin()
        .args(["estimate", "--window", "10", "--store"])
        .arg(&store)
        .arg(sim.join("validation.csv"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn evaluate_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_default(dir.path(), 6);
    let store = train_default(dir.path(), &sim);
    let online = vec![
        format!("switching={}", sim.join("validation.csv").display()),
        format!("c1={}", sim.join("train_1.csv").display()),
    ];
    let out = dir.path().join("eval");
    let report = cmd_evaluate(&RunConfig::default(), &store, &online, false, &out).unwrap();
    assert_eq!(report.rows.len(), 2);
    let sw = &report.rows[0];
    for f in &sw.fit_members {
        assert!(sw.fit_scheduled >= f - 0.5);
    }

    let text = std::fs::read_to_string(out.join("report.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "condition,FIT_G1,FIT_G2,FIT_avg,FIT_scheduled,FIT_ideal,chosen_q,indicator,chosen_q_pooled,indicator_pooled"
    );
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let g: Vec<f64> = cells[1..3].iter().map(|c| c.parse().unwrap()).collect();
        let ideal: f64 = cells[5].parse().unwrap();
        assert_eq!(ideal, g[0].max(g[1]));
    }
    assert!(out.join("summary.csv").exists());
}

#[test]
fn scheduled_matches_member_on_clean_matching_record() {
    let cfg = SwitchingConfig {
        snr: Snr::Clean,
        seed: 9,
        schedule: SwitchSchedule::constant("2", 200).unwrap(),
        ..SwitchingConfig::default()
    };
    let out = run_switching(&cfg).unwrap();
    let record = &out.data.validation;
    let runs = [OnlineRun {
        name: "2".into(),
        record,
        trace: out.trace.clone(),
        pooled_trace: None,
    }];
    let report = compare_report(&out.primary, None, &runs, false).unwrap();
    let row = &report.rows[0];
    assert!((row.fit_scheduled - row.fit_members[1]).abs() <= 0.1);
    assert!(row.fit_scheduled <= row.fit_ideal + 1e-12);
}

#[test]
fn condition_two_record_picks_two_everywhere() {
    let cfg = SwitchingConfig {
        seed: 10,
        schedule: SwitchSchedule::constant("2", 160).unwrap(),
        ..SwitchingConfig::default()
    };
    let out = run_switching(&cfg).unwrap();
    assert!(out.trace.windows.iter().all(|w| w.chosen == 1));
    let (measured, estimated) = out.trace.scored_pairs().unwrap();
    let scheduled = fit_metric(&measured, &estimated).unwrap().value();
    let g1 = predict_record(out.primary.model(0), &out.data.validation).unwrap();
    let g1_fit = fit_metric(&measured, &g1).unwrap().value();
    assert!(scheduled >= g1_fit);
}

#[test]
fn trace_and_store_survive_reload() {
    let cfg = SwitchingConfig {
        seed: 12,
        ..SwitchingConfig::default()
    };
    let data = simulate_switching(&cfg).unwrap();
    let (g, h) = train_families(&data.training, QUARTER_CAR_DECOMPOSITION, 10, 1e6).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.json");
    ModelStore::from_families(&g, &h, None, 1e6)
        .unwrap()
        .save(&path)
        .unwrap();
    let (g2, h2) = ModelStore::load(&path).unwrap().families().unwrap();
    let prior = Prior::uniform(2);
    let a = schedule_estimate(&g, &h, &data.validation, &prior, 20, false).unwrap();
    let b = schedule_estimate(&g2, &h2, &data.validation, &prior, 20, false).unwrap();
    assert_eq!(a.windows_csv(), b.windows_csv());
    assert_eq!(a.samples_csv(), b.samples_csv());
}

#[test]
fn store_with_unknown_major_version_exits_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate_default(dir.path(), 13);
    let store = train_default(dir.path(), &sim);
    let text = std::fs::read_to_string(&store).unwrap();
    let bumped = dir.path().join("v2.json");
    std::fs::write(
        &bumped,
        text.replacen("\"version\": \"1.0\"", "\"version\": \"2.0\"", 1),
    )
    .unwrap();
    let status = bin()
        .args(["estimate", "--store"])
        .arg(&bumped)
        .arg(sim.join("validation.csv"))
        .arg("--out")
        .arg(dir.path().join("est"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        r#"
seed = 5
order = 8
window = 25

[simulate]
snr = 20.0
train_samples = 500

[[simulate.conditions]]
label = "soft"
m_s = 300.0
m_u = 40.0
k_s = 20000.0
k_r = 180000.0
c_s = 1500.0

[[simulate.schedule]]
label = "soft"
samples = 100
"#,
    )
    .unwrap();
    let args = CommonArgs {
        config: Some(path.clone()),
        seed: Some(6),
        snr_db: true,
        ..CommonArgs::default()
    };
    let cfg = RunConfig::resolve(&args).unwrap();
    assert_eq!(cfg.seed, 6);
    assert_eq!(cfg.order, 8);
    assert_eq!(cfg.window, 25);
    assert_eq!(cfg.snr(), Snr::Decibel(20.0));
    assert_eq!(
        cfg.simulate.conditions,
        vec![Condition::new("soft", QuarterCarParams::C1)]
    );
    let sw = cfg.switching().unwrap();
    assert_eq!(sw.train_samples, 500);

    std::fs::write(&path, "seed = 1\nwindw = 3\n").unwrap();
    let err = RunConfig::load(&path).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("windw"), "{err}");
}

#[test]
fn binary_runs_full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |args: &[&str]| {
        let out = bin().current_dir(d).args(args).output().unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    };
    ok(&["simulate", "--seed", "21", "--out", "sim"]);
    let train = ok(&[
        "train",
        "--out",
        "model",
        "1=sim/train_1.csv",
        "2=sim/train_2.csv",
    ]);
    assert!(train.starts_with("label,family,sigma2,rho,kappa"));
    ok(&[
        "estimate",
        "--store",
        "model/store.json",
        "sim/validation.csv",
        "--out",
        "est",
    ]);
    let summary = ok(&[
        "evaluate",
        "--store",
        "model/store.json",
        "sim/validation.csv",
        "--out",
        "eval",
    ]);
    assert!(summary.contains("scheduled"));
    let missing = bin()
        .current_dir(d)
        .args(["train", "1=absent.csv"])
        .status()
        .unwrap();
    assert_eq!(missing.code(), Some(3));
}
