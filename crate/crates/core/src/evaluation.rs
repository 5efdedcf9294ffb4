//! FIT scores and estimator comparison reports.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::TimeSeriesSet;
use crate::error::{Error, Result};
use crate::scheduler::{schedule_estimate, Prior, ScheduleTrace};
use crate::transmissibility::{predict_record, FirModel, TransmissibilityFamily};

/// Normalized fit in percent; 100 is a perfect reconstruction, 0 the mean predictor.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FitScore(pub f64);

impl FitScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `100 · (1 − ‖Y − Ŷ‖ / ‖Y − mean(Y)‖)`.
pub fn fit_metric(measured: &[f64], estimated: &[f64]) -> Result<FitScore> {
    if measured.len() != estimated.len() {
        return Err(Error::InvalidData(format!(
            "measured has {} samples, estimate has {}",
            measured.len(),
            estimated.len()
        )));
    }
    if measured.len() < 2 {
        return Err(Error::InvalidData("FIT needs at least two samples".into()));
    }
    let mean = measured.iter().sum::<f64>() / measured.len() as f64;
    let err: f64 = measured
        .iter()
        .zip(estimated)
        .map(|(y, e)| (y - e) * (y - e))
        .sum::<f64>()
        .sqrt();
    let spread: f64 = measured
        .iter()
        .map(|y| (y - mean) * (y - mean))
        .sum::<f64>()
        .sqrt();
    if spread == 0.0 {
        return Err(Error::InvalidData("measured signal is constant".into()));
    }
    Ok(FitScore(100.0 * (1.0 - err / spread)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdealFit {
    pub value: FitScore,
    /// Every estimator attaining the maximum.
    pub argmax: Vec<usize>,
}

/// Best FIT over the individual estimators.
pub fn ideal_fit(fits: &[f64]) -> Result<IdealFit> {
    let best = fits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if fits.is_empty() {
        return Err(Error::InvalidData("no estimators to compare".into()));
    }
    Ok(IdealFit {
        value: FitScore(best),
        argmax: (0..fits.len()).filter(|&i| fits[i] == best).collect(),
    })
}

/// 1 if `chosen` attains the best FIT (ties count for every tied index).
pub fn indicator(chosen: usize, fits: &[f64]) -> u8 {
    match ideal_fit(fits) {
        Ok(ideal) => u8::from(ideal.argmax.contains(&chosen)),
        Err(_) => 0,
    }
}

pub fn accuracy(indicators: &[u8]) -> Result<f64> {
    if indicators.is_empty() {
        return Err(Error::InvalidData("no indicators".into()));
    }
    Ok(indicators.iter().map(|&i| f64::from(i)).sum::<f64>() / indicators.len() as f64)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One online record scored by every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub condition: String,
    /// FIT of each primary member, in family order.
    pub fit_members: Vec<f64>,
    pub fit_average: Option<f64>,
    pub fit_scheduled: f64,
    pub fit_ideal: f64,
    pub chosen: usize,
    pub indicator: u8,
    /// Choice of the pooled-variance classifier, when it was run.
    pub chosen_pooled: Option<usize>,
    pub indicator_pooled: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub labels: Vec<String>,
    pub rows: Vec<ReportRow>,
    /// Accuracy of the full-variance classifier.
    pub accuracy: f64,
    pub accuracy_pooled: Option<f64>,
    /// Whether the scheduled estimate followed the pooled-variance classifier.
    pub scheduled_with_pooled: bool,
}

/// Scheduler output for one online record.
#[derive(Debug, Clone)]
pub struct OnlineRun<'a> {
    pub name: String,
    pub record: &'a TimeSeriesSet,
    /// Full-variance classification.
    pub trace: ScheduleTrace,
    pub pooled_trace: Option<ScheduleTrace>,
}

/// Scores every primary member, the average model and the scheduled
/// estimator on each online record.
///
/// All estimators are scored over the same samples: those after the FIR burn-in.
/// With `pooled`, the scheduled column follows each run's pooled trace.
pub fn compare_report(
    g: &TransmissibilityFamily,
    average: Option<&FirModel>,
    runs: &[OnlineRun<'_>],
    pooled: bool,
) -> Result<ComparisonReport> {
    if runs.is_empty() {
        return Err(Error::InvalidData("no online records".into()));
    }
    let order = g.order();
    let mut rows = Vec::with_capacity(runs.len());
    for run in runs {
        let measured = run.record.require(g.output_channel()).map_err(|_| {
            Error::InvalidData(format!(
                "online record `{}` has no ground-truth `{}` channel",
                run.name,
                g.output_channel()
            ))
        })?;
        let truth = &measured[order..];
        let fit_members = g
            .members()
            .iter()
            .map(|(_, m)| Ok(fit_metric(truth, &predict_record(m, run.record)?)?.value()))
            .collect::<Result<Vec<f64>>>()?;
        let fit_average = average
            .map(|m| Ok::<_, Error>(fit_metric(truth, &predict_record(m, run.record)?)?.value()))
            .transpose()?;
        let scheduled = if pooled {
            run.pooled_trace.as_ref().ok_or_else(|| {
                Error::InvalidData(format!("run `{}` has no pooled trace", run.name))
            })?
        } else {
            &run.trace
        };
        let (m, e) = scheduled
            .scored_pairs()
            .ok_or_else(|| Error::InvalidData("trace has no measured target".into()))?;
        let fit_scheduled = fit_metric(&m, &e)?.value();
        let ideal = ideal_fit(&fit_members)?;
        let chosen = run.trace.dominant_condition();
        let chosen_pooled = run
            .pooled_trace
            .as_ref()
            .map(ScheduleTrace::dominant_condition);
        rows.push(ReportRow {
            condition: run.name.clone(),
            indicator: indicator(chosen, &fit_members),
            indicator_pooled: chosen_pooled.map(|c| indicator(c, &fit_members)),
            fit_members,
            fit_average,
            fit_scheduled,
            fit_ideal: ideal.value.value(),
            chosen,
            chosen_pooled,
        });
    }
    let accuracy = accuracy(&rows.iter().map(|r| r.indicator).collect::<Vec<_>>())?;
    let pooled_indicators: Option<Vec<u8>> = rows.iter().map(|r| r.indicator_pooled).collect();
    let accuracy_pooled = pooled_indicators.map(|p| self::accuracy(&p)).transpose()?;
    Ok(ComparisonReport {
        labels: g.labels().iter().map(|s| s.to_string()).collect(),
        rows,
        accuracy,
        accuracy_pooled,
        scheduled_with_pooled: pooled,
    })
}

/// Runs the scheduler (full and pooled variance) on each online record and
/// builds the comparison report. `window = None` classifies each record as a whole.
pub fn run_comparison(
    g: &TransmissibilityFamily,
    h: &TransmissibilityFamily,
    average: Option<&FirModel>,
    online: &[TimeSeriesSet],
    prior: &Prior,
    window: Option<usize>,
    pooled: bool,
) -> Result<ComparisonReport> {
    let runs = online
        .iter()
        .enumerate()
        .map(|(i, record)| {
            let w = window.unwrap_or(record.len());
            Ok(OnlineRun {
                name: record
                    .condition()
                    .map_or_else(|| format!("online_{}", i + 1), str::to_string),
                record,
                trace: schedule_estimate(g, h, record, prior, w, false)?,
                pooled_trace: Some(schedule_estimate(g, h, record, prior, w, true)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    compare_report(g, average, &runs, pooled)
}

impl ComparisonReport {
    fn columns(&self) -> Vec<String> {
        let mut cols = vec!["condition".to_string()];
        cols.extend(self.labels.iter().map(|l| format!("FIT_G{l}")));
        cols.extend(
            [
                "FIT_avg",
                "FIT_scheduled",
                "FIT_ideal",
                "chosen_q",
                "indicator",
                "chosen_q_pooled",
                "indicator_pooled",
            ]
            .map(String::from),
        );
        cols
    }

    pub fn rows_csv(&self) -> String {
        let mut out = self.columns().join(",");
        out.push('\n');
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            write!(out, "{}", r.condition).unwrap();
            for f in &r.fit_members {
                write!(out, ",{f}").unwrap();
            }
            writeln!(
                out,
                ",{},{},{},{},{},{},{}",
                opt(r.fit_average.map(|v| v.to_string())),
                r.fit_scheduled,
                r.fit_ideal,
                self.labels[r.chosen],
                r.indicator,
                opt(r.chosen_pooled.map(|c| self.labels[c].clone())),
                opt(r.indicator_pooled.map(|i| i.to_string())),
            )
            .unwrap();
        }
        out
    }

    /// Per-estimator mean and standard deviation (n − 1) of FIT across rows.
    pub fn summary(&self) -> Vec<(String, f64, f64)> {
        let mut cols: Vec<(String, Vec<f64>)> = self
            .labels
            .iter()
            .enumerate()
            .map(|(q, l)| {
                (
                    format!("G{l}"),
                    self.rows.iter().map(|r| r.fit_members[q]).collect(),
                )
            })
            .collect();
        let avg: Option<Vec<f64>> = self.rows.iter().map(|r| r.fit_average).collect();
        if let Some(avg) = avg {
            cols.push(("average".into(), avg));
        }
        cols.push((
            "scheduled".into(),
            self.rows.iter().map(|r| r.fit_scheduled).collect(),
        ));
        cols.push((
            "ideal".into(),
            self.rows.iter().map(|r| r.fit_ideal).collect(),
        ));
        cols.into_iter()
            .map(|(name, v)| {
                let (m, s) = mean_std(&v);
                (name, m, s)
            })
            .collect()
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("estimator,mean,std\n");
        for (name, m, s) in self.summary() {
            writeln!(out, "{name},{m},{s}").unwrap();
        }
        writeln!(out, "accuracy_full,{},", self.accuracy).unwrap();
        if let Some(p) = self.accuracy_pooled {
            writeln!(out, "accuracy_pooled,{p},").unwrap();
        }
        out
    }

    pub fn write_csv(&self, rows: &Path, summary: &Path) -> Result<()> {
        std::fs::write(rows, self.rows_csv()).map_err(|e| Error::io(rows, e))?;
        std::fs::write(summary, self.summary_csv()).map_err(|e| Error::io(summary, e))
    }

    /// Mean FIT per estimator, keyed as in [`ComparisonReport::summary`].
    pub fn mean_of(&self, estimator: &str) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|(n, _, _)| n == estimator)
            .map(|(_, m, _)| m)
    }
}
