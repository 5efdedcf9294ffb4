//! Command-line front end: config file, flag overrides and the four commands.
//!
//! Each command loads and validates everything it needs before it creates the
//! output directory, so a failed validation leaves no partial files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::dataset::{load_csv, ChannelRole, ChannelSpec, Decomposition, TimeSeriesSet};
use crate::error::{Error, Result};
use crate::evaluation::{run_comparison, ComparisonReport};
use crate::regression::DEFAULT_C_LIM;
use crate::scenario::{side_by_side, simulate_switching, Condition, SwitchingConfig, CLEAN_SUFFIX};
use crate::scheduler::{schedule_estimate, Prior, DEFAULT_WINDOW};
use crate::simulator::{
    QuarterCarParams, Snr, SwitchSchedule, DEFAULT_SAMPLE_TIME, RELATIVE_DISPLACEMENT,
    SPRUNG_ACCEL, UNSPRUNG_ACCEL,
};
use crate::transmissibility::{channel_powers, fit_average, train_families, ModelStore};

pub const MANIFEST_VERSION: &str = "1.0";

#[derive(Debug, Parser)]
#[command(
    name = "pams",
    version,
    about = "Primary-auxiliary transmissibility model scheduling"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// FIR order n.
    #[arg(long, global = true)]
    pub order: Option<usize>,
    /// Condition-number cap for the ridge weight.
    #[arg(long, global = true)]
    pub clim: Option<f64>,
    /// Classification window, samples.
    #[arg(long, global = true)]
    pub window: Option<usize>,
    /// Use the pooled variance in the Bayes classifier.
    #[arg(long, global = true)]
    pub pooled: bool,
    #[arg(long, global = true)]
    pub snr: Option<f64>,
    /// Read the SNR as decibels instead of a power ratio.
    #[arg(long, global = true)]
    pub snr_db: bool,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate quarter-car training records and a switching validation record.
    Simulate {
        /// Write noise-free channels only.
        #[arg(long)]
        clean: bool,
    },
    /// Fit primary and auxiliary families from labelled records.
    Train {
        /// Training records as LABEL=PATH.
        #[arg(required = true)]
        records: Vec<String>,
    },
    /// Schedule estimates for one online record.
    Estimate {
        #[arg(long)]
        store: PathBuf,
        online: PathBuf,
    },
    /// Compare scheduled, individual and average estimators on online records.
    Evaluate {
        #[arg(long)]
        store: PathBuf,
        /// Online records with ground truth, as LABEL=PATH or PATH.
        #[arg(required = true)]
        online: Vec<String>,
        /// Classify each record as a whole instead of windowing.
        #[arg(long)]
        whole: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    pub pseudo_inputs: Vec<String>,
    pub target: String,
    pub aux_output: String,
    pub label: String,
    /// Columns that may appear in a file and are skipped.
    pub ignore: Vec<String>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        let names = [UNSPRUNG_ACCEL, SPRUNG_ACCEL, RELATIVE_DISPLACEMENT];
        Self {
            pseudo_inputs: vec![UNSPRUNG_ACCEL.into(), SPRUNG_ACCEL.into()],
            target: RELATIVE_DISPLACEMENT.into(),
            aux_output: SPRUNG_ACCEL.into(),
            label: "true_label".into(),
            ignore: names.iter().map(|n| format!("{n}{CLEAN_SUFFIX}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub label: String,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub sample_time: f64,
    pub excitation_variance: f64,
    pub train_samples: usize,
    pub snr: f64,
    pub snr_db: bool,
    pub clean: bool,
    pub conditions: Vec<Condition>,
    pub schedule: Vec<ScheduleEntry>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            sample_time: DEFAULT_SAMPLE_TIME,
            excitation_variance: 0.01,
            train_samples: 1000,
            snr: 50.0,
            snr_db: false,
            clean: false,
            conditions: vec![
                Condition::new("1", QuarterCarParams::C1),
                Condition::new("2", QuarterCarParams::C2),
            ],
            schedule: vec![
                ScheduleEntry {
                    label: "1".into(),
                    samples: 80,
                },
                ScheduleEntry {
                    label: "2".into(),
                    samples: 80,
                },
            ],
        }
    }
}

/// Everything a run needs apart from file paths given on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub order: usize,
    pub c_lim: f64,
    pub window: usize,
    pub pooled: bool,
    /// Prior weight per condition in store order; uniform when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub priors: Option<Vec<f64>>,
    /// Sample rate assumed for CSV input, Hz.
    pub sample_rate: f64,
    pub channels: ChannelConfig,
    pub simulate: SimulateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            order: 10,
            c_lim: DEFAULT_C_LIM,
            window: DEFAULT_WINDOW,
            pooled: false,
            priors: None,
            sample_rate: 1.0 / DEFAULT_SAMPLE_TIME,
            channels: ChannelConfig::default(),
            simulate: SimulateConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = e
                .span()
                .and_then(|s| text.get(s))
                .map_or_else(|| "config".to_string(), |s| s.trim().to_string());
            Error::config(field, message)
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Config file (or defaults) with command-line flags applied on top.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(n) = args.order {
            cfg.order = n;
        }
        if let Some(c) = args.clim {
            cfg.c_lim = c;
        }
        if let Some(w) = args.window {
            cfg.window = w;
        }
        if args.pooled {
            cfg.pooled = true;
        }
        if let Some(s) = args.snr {
            cfg.simulate.snr = s;
        }
        if args.snr_db {
            cfg.simulate.snr_db = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::config("order", "must be at least 1"));
        }
        if !(self.c_lim > 1.0) || !self.c_lim.is_finite() {
            return Err(Error::config(
                "c_lim",
                format!("must be a finite value above 1, got {}", self.c_lim),
            ));
        }
        if self.window <= self.order {
            return Err(Error::config(
                "window",
                format!(
                    "window of {} samples must exceed the FIR order {}",
                    self.window, self.order
                ),
            ));
        }
        if let Some(p) = &self.priors {
            Prior::new(p.clone())?;
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(Error::config("sample_rate", "must be positive"));
        }
        let ch = &self.channels;
        if !ch.pseudo_inputs.contains(&ch.aux_output) {
            return Err(Error::config(
                "channels.aux_output",
                format!("`{}` is not one of the pseudo-inputs", ch.aux_output),
            ));
        }
        if ch.pseudo_inputs.len() < 2 {
            return Err(Error::config(
                "channels.pseudo_inputs",
                "at least two are needed",
            ));
        }
        let mut names: Vec<&String> = ch
            .pseudo_inputs
            .iter()
            .chain([&ch.target, &ch.label])
            .collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("channels", "channel names must be distinct"));
        }
        let s = &self.simulate;
        if !(s.snr > 0.0) || !s.snr.is_finite() {
            return Err(Error::config(
                "simulate.snr",
                format!("must be positive, got {}", s.snr),
            ));
        }
        Ok(())
    }

    pub fn snr(&self) -> Snr {
        match (self.simulate.clean, self.simulate.snr_db) {
            (true, _) => Snr::Clean,
            (false, true) => Snr::Decibel(self.simulate.snr),
            (false, false) => Snr::Linear(self.simulate.snr),
        }
    }

    pub fn switching(&self) -> Result<SwitchingConfig> {
        let cfg = SwitchingConfig {
            conditions: self.simulate.conditions.clone(),
            sample_time: self.simulate.sample_time,
            excitation_variance: self.simulate.excitation_variance,
            train_samples: self.simulate.train_samples,
            schedule: SwitchSchedule {
                segments: self
                    .simulate
                    .schedule
                    .iter()
                    .map(|e| (e.label.clone(), e.samples))
                    .collect(),
            },
            snr: self.snr(),
            seed: self.seed,
            order: self.order,
            c_lim: self.c_lim,
            window: self.window,
            pooled: self.pooled,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn decomposition(&self) -> Decomposition {
        let index = self
            .channels
            .pseudo_inputs
            .iter()
            .position(|n| *n == self.channels.aux_output)
            .expect("validated");
        Decomposition::new(index)
    }

    /// Reads one record, keeping configured columns the file actually has.
    pub fn read_record(&self, path: &Path, need_target: bool) -> Result<TimeSeriesSet> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)?;
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let has = |n: &String| header.contains(n);
        let ch = &self.channels;
        let mut schema: Vec<ChannelSpec> = ch
            .pseudo_inputs
            .iter()
            .map(|n| ChannelSpec::new(n.clone(), ChannelRole::PseudoInput))
            .collect();
        if need_target || has(&ch.target) {
            schema.push(ChannelSpec::new(
                ch.target.clone(),
                ChannelRole::TargetOutput,
            ));
        }
        if has(&ch.label) {
            schema.push(ChannelSpec::new(ch.label.clone(), ChannelRole::Label));
        }
        schema.extend(
            ch.ignore
                .iter()
                .filter(|n| has(n))
                .map(|n| ChannelSpec::new(n.clone(), ChannelRole::Ignore)),
        );
        load_csv(path, &schema, self.sample_rate)
    }
}

/// `LABEL=PATH`, or a bare path labelled by its file stem.
pub fn parse_labelled(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((label, path)) if !label.is_empty() => (label.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let stem = path
                .file_stem()
                .map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
            (stem, path)
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: &'a str,
    command: &'a str,
    seed: u64,
    config: &'a RunConfig,
    outputs: Vec<String>,
}

/// Writes every file only after all of them have been rendered.
fn write_outputs(dir: &Path, files: &[(String, String)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, content) in files {
        let path = dir.join(name);
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn manifest(
    command: &str,
    cfg: &RunConfig,
    files: &[(String, String)],
) -> Result<(String, String)> {
    let m = Manifest {
        version: MANIFEST_VERSION,
        command,
        seed: cfg.seed,
        config: cfg,
        outputs: files.iter().map(|(n, _)| n.clone()).collect(),
    };
    Ok((
        "manifest.json".into(),
        serde_json::to_string_pretty(&m)? + "\n",
    ))
}

fn out_dir(args: &CommonArgs) -> PathBuf {
    args.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

/// Writes `train_<label>.csv` per condition, `validation.csv` and `manifest.json`.
pub fn cmd_simulate(cfg: &RunConfig, clean: bool, out: &Path) -> Result<Vec<PathBuf>> {
    let mut cfg = cfg.clone();
    cfg.simulate.clean |= clean;
    let scenario = cfg.switching()?;
    let data = simulate_switching(&scenario)?;
    let mut files = Vec::new();
    for (noisy, clean) in data.training.iter().zip(&data.training_clean) {
        let label = noisy.condition().unwrap_or("unlabelled");
        files.push((
            format!("train_{label}.csv"),
            side_by_side(noisy, clean)?.to_csv_string(),
        ));
    }
    files.push((
        "validation.csv".into(),
        side_by_side(&data.validation, &data.validation_clean)?.to_csv_string(),
    ));
    files.push(manifest("simulate", &cfg, &files)?);
    write_outputs(out, &files)?;
    Ok(files.iter().map(|(n, _)| out.join(n)).collect())
}

/// Fits both families plus the all-conditions average and writes `store.json`.
pub fn cmd_train(cfg: &RunConfig, records: &[String], out: &Path) -> Result<String> {
    let mut sets = Vec::with_capacity(records.len());
    for arg in records {
        let (label, path) = parse_labelled(arg);
        sets.push(cfg.read_record(&path, true)?.with_condition(label));
    }
    let (g, h) = train_families(&sets, cfg.decomposition(), cfg.order, cfg.c_lim)?;
    let avg = fit_average(
        &sets,
        g.input_channels(),
        g.output_channel(),
        cfg.order,
        cfg.c_lim,
    )?;
    let store = ModelStore::from_families(&g, &h, Some(&avg), cfg.c_lim)?;

    let mut summary = String::from("label,family,sigma2,rho,kappa\n");
    for (family, name) in [(&g, "G"), (&h, "H")] {
        for (label, m) in family.members() {
            writeln!(
                summary,
                "{label},{name},{:e},{:e},{:e}",
                m.sigma2, m.rho, m.kappa_after
            )
            .unwrap();
        }
    }
    writeln!(
        summary,
        "average,G,{:e},{:e},{:e}",
        avg.sigma2, avg.rho, avg.kappa_after
    )
    .unwrap();
    summary.push_str("\nlabel,channel,power\n");
    for (label, powers) in channel_powers(&sets) {
        for (ch, p) in powers {
            writeln!(summary, "{label},{ch},{p:e}").unwrap();
        }
    }
    let mut files = vec![("store.json".to_string(), store.to_json()? + "\n")];
    files.push(manifest("train", cfg, &files)?);
    write_outputs(out, &files)?;
    Ok(summary)
}

fn prior_for(cfg: &RunConfig, q: usize) -> Result<Prior> {
    match &cfg.priors {
        None => Ok(Prior::uniform(q)),
        Some(w) if w.len() == q => Prior::new(w.clone()),
        Some(w) => Err(Error::config(
            "priors",
            format!("{} weights for {q} stored conditions", w.len()),
        )),
    }
}

/// Writes `windows.csv` and `samples.csv` for one online record.
pub fn cmd_estimate(cfg: &RunConfig, store: &Path, online: &Path, out: &Path) -> Result<String> {
    let store = ModelStore::load(store)?;
    let (g, h) = store.families()?;
    let prior = prior_for(cfg, g.len())?;
    let record = cfg.read_record(online, false)?;
    let trace = schedule_estimate(&g, &h, &record, &prior, cfg.window, cfg.pooled)?;
    let mut files = vec![
        ("windows.csv".to_string(), trace.windows_csv()),
        ("samples.csv".to_string(), trace.samples_csv()),
    ];
    files.push(manifest("estimate", cfg, &files)?);
    write_outputs(out, &files)?;
    let mut summary = String::from("window,start,end,chosen,posterior\n");
    for w in &trace.windows {
        writeln!(
            summary,
            "{},{},{},{},{:.6}",
            w.window_id, w.start, w.end, trace.labels[w.chosen], w.posterior[w.chosen]
        )
        .unwrap();
    }
    Ok(summary)
}

/// Writes `report.csv` and `summary.csv` comparing all estimators.
pub fn cmd_evaluate(
    cfg: &RunConfig,
    store: &Path,
    online: &[String],
    whole: bool,
    out: &Path,
) -> Result<ComparisonReport> {
    let store = ModelStore::load(store)?;
    let (g, h) = store.families()?;
    let average = store.average_model();
    let prior = prior_for(cfg, g.len())?;
    let mut records = Vec::with_capacity(online.len());
    let mut seen = BTreeMap::new();
    for arg in online {
        let (label, path) = parse_labelled(arg);
        if seen.insert(label.clone(), ()).is_some() {
            return Err(Error::config(
                "online",
                format!("duplicate record name `{label}`"),
            ));
        }
        records.push(cfg.read_record(&path, true)?.with_condition(label));
    }
    let window = (!whole).then_some(cfg.window);
    let report = run_comparison(
        &g,
        &h,
        average.as_ref(),
        &records,
        &prior,
        window,
        cfg.pooled,
    )?;
    let mut files = vec![
        ("report.csv".to_string(), report.rows_csv()),
        ("summary.csv".to_string(), report.summary_csv()),
    ];
    files.push(manifest("evaluate", cfg, &files)?);
    write_outputs(out, &files)?;
    Ok(report)
}

/// Formats the report summary as an aligned text table.
pub fn summary_table(report: &ComparisonReport) -> String {
    let mut out = format!("{:<12} {:>10} {:>10}\n", "estimator", "mean FIT", "std");
    for (name, m, s) in report.summary() {
        writeln!(out, "{name:<12} {m:>10.3} {s:>10.3}").unwrap();
    }
    writeln!(out, "accuracy, full variance   {:.3}", report.accuracy).unwrap();
    if let Some(p) = report.accuracy_pooled {
        writeln!(out, "accuracy, pooled variance {p:.3}").unwrap();
    }
    if report.scheduled_with_pooled {
        writeln!(
            out,
            "scheduled estimate follows the pooled-variance classifier"
        )
        .unwrap();
    }
    out
}

/// Runs one parsed command line, printing summaries to standard output.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::resolve(&cli.common)?;
    let out = out_dir(&cli.common);
    match cli.command {
        Command::Simulate { clean } => {
            for p in cmd_simulate(&cfg, clean, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Train { records } => print!("{}", cmd_train(&cfg, &records, &out)?),
        Command::Estimate { store, online } => {
            print!("{}", cmd_estimate(&cfg, &store, &online, &out)?)
        }
        Command::Evaluate {
            store,
            online,
            whole,
        } => print!(
            "{}",
            summary_table(&cmd_evaluate(&cfg, &store, &online, whole, &out)?)
        ),
    }
    Ok(())
}
