//! End-to-end quarter-car experiments: the two-condition switching run and a
//! multi-condition comparative study.
//!
//! Every random stream is drawn from one master seed, so a scenario is fully
//! determined by its config.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Channel, Decomposition, TimeSeriesSet};
use crate::error::{Error, Result};
use crate::evaluation::{run_comparison, ComparisonReport};
use crate::regression::DEFAULT_C_LIM;
use crate::scheduler::{schedule_estimate, Prior, ScheduleTrace, DEFAULT_WINDOW};
use crate::simulator::{
    add_noise, discretize, gen_excitation, simulate, DiscreteStateSpace, NoiseSpec,
    QuarterCarParams, Snr, SwitchSchedule, DEFAULT_SAMPLE_TIME,
};
use crate::transmissibility::{fit_average, train_families, FirModel, TransmissibilityFamily};

/// Suffix of the noise-free copy of a channel in written datasets.
pub const CLEAN_SUFFIX: &str = "_clean";

/// Position of the sprung acceleration among the simulator's pseudo-inputs.
pub const QUARTER_CAR_DECOMPOSITION: Decomposition = Decomposition {
    aux_output_index: 1,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub label: String,
    #[serde(flatten)]
    pub params: QuarterCarParams,
}

impl Condition {
    pub fn new(label: impl Into<String>, params: QuarterCarParams) -> Self {
        Self {
            label: label.into(),
            params,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingConfig {
    pub conditions: Vec<Condition>,
    pub sample_time: f64,
    pub excitation_variance: f64,
    pub train_samples: usize,
    pub schedule: SwitchSchedule,
    pub snr: Snr,
    pub seed: u64,
    pub order: usize,
    pub c_lim: f64,
    pub window: usize,
    pub pooled: bool,
}

impl Default for SwitchingConfig {
    fn default() -> Self {
        Self {
            conditions: vec![
                Condition::new("1", QuarterCarParams::C1),
                Condition::new("2", QuarterCarParams::C2),
            ],
            sample_time: DEFAULT_SAMPLE_TIME,
            excitation_variance: 0.01,
            train_samples: 1000,
            schedule: SwitchSchedule {
                segments: vec![("1".into(), 80), ("2".into(), 80)],
            },
            snr: Snr::Linear(50.0),
            seed: 0,
            order: 10,
            c_lim: DEFAULT_C_LIM,
            window: DEFAULT_WINDOW,
            pooled: false,
        }
    }
}

impl SwitchingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conditions.is_empty() {
            return Err(Error::config(
                "conditions",
                "at least one condition is required",
            ));
        }
        for (i, c) in self.conditions.iter().enumerate() {
            c.params.validate()?;
            if self.conditions[..i].iter().any(|o| o.label == c.label) {
                return Err(Error::config(
                    "conditions",
                    format!("duplicate label `{}`", c.label),
                ));
            }
        }
        if !(self.sample_time > 0.0) || !self.sample_time.is_finite() {
            return Err(Error::config("sample_time", "must be positive"));
        }
        if !(self.excitation_variance > 0.0) || !self.excitation_variance.is_finite() {
            return Err(Error::config("excitation_variance", "must be positive"));
        }
        SwitchSchedule::new(self.schedule.segments.clone())?;
        for (label, _) in &self.schedule.segments {
            if !self.conditions.iter().any(|c| &c.label == label) {
                return Err(Error::config(
                    "schedule",
                    format!("unknown condition `{label}`"),
                ));
            }
        }
        if !(self.snr.linear() > 0.0) {
            return Err(Error::config("snr", "must be positive"));
        }
        if !(self.c_lim > 1.0) {
            return Err(Error::config(
                "c_lim",
                format!("must exceed 1, got {}", self.c_lim),
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
        // the variance estimate needs more rows than the primary model has parameters
        let params = 2 * (self.order + 1);
        if self.train_samples <= self.order + params {
            return Err(Error::config(
                "train_samples",
                format!(
                    "{} samples are too few for order {}",
                    self.train_samples, self.order
                ),
            ));
        }
        Ok(())
    }

    fn systems(&self) -> Result<Vec<(String, DiscreteStateSpace)>> {
        self.conditions
            .iter()
            .map(|c| Ok((c.label.clone(), discretize(&c.params, self.sample_time)?)))
            .collect()
    }
}

/// Simulated records, noisy and noise-free.
#[derive(Debug, Clone)]
pub struct SwitchingData {
    pub training: Vec<TimeSeriesSet>,
    pub training_clean: Vec<TimeSeriesSet>,
    pub validation: TimeSeriesSet,
    pub validation_clean: TimeSeriesSet,
}

fn record(
    systems: &[(String, DiscreteStateSpace)],
    schedule: &SwitchSchedule,
    variance: f64,
    snr: Snr,
    rng: &mut ChaCha8Rng,
) -> Result<(TimeSeriesSet, TimeSeriesSet)> {
    let z_r = gen_excitation(schedule.total(), variance, rng.random())?;
    let clean = simulate(systems, schedule, &z_r, &DVector::zeros(4))?;
    let noisy = add_noise(
        &clean,
        &NoiseSpec {
            snr,
            seed: rng.random(),
        },
    )?;
    Ok((noisy, clean))
}

/// Simulates one training record per condition and the switching validation record.
pub fn simulate_switching(cfg: &SwitchingConfig) -> Result<SwitchingData> {
    cfg.validate()?;
    let systems = cfg.systems()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut training = Vec::new();
    let mut training_clean = Vec::new();
    for c in &cfg.conditions {
        let schedule = SwitchSchedule::constant(c.label.clone(), cfg.train_samples)?;
        let (noisy, clean) = record(
            &systems,
            &schedule,
            cfg.excitation_variance,
            cfg.snr,
            &mut rng,
        )?;
        training.push(noisy.with_condition(c.label.clone()));
        training_clean.push(clean.with_condition(c.label.clone()));
    }
    let (validation, validation_clean) = record(
        &systems,
        &cfg.schedule,
        cfg.excitation_variance,
        cfg.snr,
        &mut rng,
    )?;
    Ok(SwitchingData {
        training,
        training_clean,
        validation,
        validation_clean,
    })
}

/// Noisy channels under their own names followed by the clean copies, suffixed.
pub fn side_by_side(noisy: &TimeSeriesSet, clean: &TimeSeriesSet) -> Result<TimeSeriesSet> {
    let mut channels: Vec<Channel> = noisy.channels().to_vec();
    channels.extend(
        clean
            .channels()
            .iter()
            .map(|c| Channel::new(format!("{}{CLEAN_SUFFIX}", c.name), c.role, c.data.clone())),
    );
    let mut out = TimeSeriesSet::new(noisy.sample_rate(), channels)?;
    if let Some(labels) = noisy.labels() {
        out = out.with_labels(labels.to_vec())?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SwitchingOutcome {
    pub data: SwitchingData,
    pub primary: TransmissibilityFamily,
    pub auxiliary: TransmissibilityFamily,
    pub trace: ScheduleTrace,
}

/// Simulate, train both families, then schedule the validation record.
pub fn run_switching(cfg: &SwitchingConfig) -> Result<SwitchingOutcome> {
    let data = simulate_switching(cfg)?;
    let (primary, auxiliary) = train_families(
        &data.training,
        QUARTER_CAR_DECOMPOSITION,
        cfg.order,
        cfg.c_lim,
    )?;
    let prior = Prior::uniform(primary.len());
    let trace = schedule_estimate(
        &primary,
        &auxiliary,
        &data.validation,
        &prior,
        cfg.window,
        cfg.pooled,
    )?;
    Ok(SwitchingOutcome {
        data,
        primary,
        auxiliary,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub offline: Vec<Condition>,
    /// Online records that reuse an offline parameter set unchanged.
    pub identical_online: usize,
    /// Online records whose parameters are perturbed copies of an offline set.
    pub perturbed_online: usize,
    /// Relative half-width of the uniform perturbation of every parameter.
    pub perturbation: f64,
    pub samples: usize,
    pub sample_time: f64,
    pub excitation_variance: f64,
    pub snr: Snr,
    pub seed: u64,
    pub order: usize,
    pub c_lim: f64,
    /// `None` classifies each online record as a whole.
    pub window: Option<usize>,
}

/// Five working conditions spread around the two reference parameter sets.
pub fn study_conditions() -> Vec<Condition> {
    let c1 = QuarterCarParams::C1;
    let c2 = QuarterCarParams::C2;
    vec![
        Condition::new("1", c1),
        Condition::new("2", c2),
        Condition::new("3", c1.scaled([1.2, 1.0, 1.5, 1.0, 0.7])),
        Condition::new("4", c2.scaled([0.8, 1.1, 0.8, 1.0, 1.4])),
        Condition::new("5", c1.scaled([1.0, 0.9, 2.5, 1.1, 2.0])),
    ]
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            offline: study_conditions(),
            identical_online: 5,
            perturbed_online: 10,
            perturbation: 0.1,
            samples: 1000,
            sample_time: DEFAULT_SAMPLE_TIME,
            excitation_variance: 0.01,
            snr: Snr::Linear(50.0),
            seed: 2024,
            order: 10,
            c_lim: DEFAULT_C_LIM,
            window: None,
        }
    }
}

/// Online parameter sets: identical copies first, then perturbed ones, with
/// parents taken round-robin from the offline list.
pub fn online_conditions(cfg: &StudyConfig, rng: &mut ChaCha8Rng) -> Vec<(Condition, bool)> {
    let q = cfg.offline.len();
    let mut out = Vec::new();
    for i in 0..cfg.identical_online {
        let parent = &cfg.offline[i % q];
        out.push((
            Condition::new(format!("same_{}", parent.label), parent.params),
            true,
        ));
    }
    for i in 0..cfg.perturbed_online {
        let parent = &cfg.offline[i % q];
        let mut f = [0.0; 5];
        for v in &mut f {
            *v = 1.0 + cfg.perturbation * rng.random_range(-1.0..=1.0);
        }
        out.push((
            Condition::new(
                format!("pert{}_{}", i + 1, parent.label),
                parent.params.scaled(f),
            ),
            false,
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub report: ComparisonReport,
    pub primary: TransmissibilityFamily,
    pub auxiliary: TransmissibilityFamily,
    pub average: FirModel,
    /// Whether each report row comes from an offline parameter set.
    pub identical: Vec<bool>,
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    if cfg.offline.is_empty() {
        return Err(Error::config(
            "offline",
            "at least one condition is required",
        ));
    }
    if !(0.0..1.0).contains(&cfg.perturbation) {
        return Err(Error::config("perturbation", "must lie in [0, 1)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let run_one = |c: &Condition, rng: &mut ChaCha8Rng| -> Result<TimeSeriesSet> {
        let systems = vec![(c.label.clone(), discretize(&c.params, cfg.sample_time)?)];
        let schedule = SwitchSchedule::constant(c.label.clone(), cfg.samples)?;
        let (noisy, _) = record(&systems, &schedule, cfg.excitation_variance, cfg.snr, rng)?;
        Ok(noisy.with_condition(c.label.clone()))
    };

    let training = cfg
        .offline
        .iter()
        .map(|c| run_one(c, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let (primary, auxiliary) =
        train_families(&training, QUARTER_CAR_DECOMPOSITION, cfg.order, cfg.c_lim)?;
    let average = fit_average(
        &training,
        primary.input_channels(),
        primary.output_channel(),
        cfg.order,
        cfg.c_lim,
    )?;

    let online_params = online_conditions(cfg, &mut rng);
    let online = online_params
        .iter()
        .map(|(c, _)| run_one(c, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let prior = Prior::uniform(primary.len());
    let report = run_comparison(
        &primary,
        &auxiliary,
        Some(&average),
        &online,
        &prior,
        cfg.window,
        false,
    )?;
    Ok(StudyOutcome {
        report,
        primary,
        auxiliary,
        average,
        identical: online_params.iter().map(|(_, same)| *same).collect(),
    })
}
