//! Online stage: windowed Bayes classification over the auxiliary family and
//! scheduled prediction with the matching primary model.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::dataset::{regressor_matrix, segment, TimeSeriesSet};
use crate::error::{Error, Result};
use crate::transmissibility::{FirModel, TransmissibilityFamily};

/// Default window length in samples.
pub const DEFAULT_WINDOW: usize = 20;

/// Windows whose two best log-evidences are closer than this (nats) are flagged.
pub const AMBIGUITY_NATS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    weights: Vec<f64>,
}

impl Prior {
    pub fn uniform(q: usize) -> Self {
        Self {
            weights: vec![1.0 / q as f64; q],
        }
    }

    /// Normalizes non-negative weights to sum to one. A zero weight excludes its member.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::config(
                "priors",
                "weights must be finite and non-negative",
            ));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::config("priors", "weights must not all be zero"));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gaussian log-evidence of the auxiliary output under one auxiliary model,
/// `log p − N log σ − ‖Y − Φθ‖² / (2σ²)`, up to the member-independent constant.
pub fn log_evidence(h: &FirModel, y_i1: &[&[f64]], y_i2: &[f64], prior_q: f64) -> Result<f64> {
    log_evidence_with_variance(h, h.sigma2, y_i1, y_i2, prior_q)
}

fn log_evidence_with_variance(
    h: &FirModel,
    sigma2: f64,
    y_i1: &[&[f64]],
    y_i2: &[f64],
    prior_q: f64,
) -> Result<f64> {
    let len = y_i2.len();
    if len <= h.order {
        return Err(Error::InsufficientSamples {
            order: h.order,
            samples: len,
        });
    }
    let (rss, rows) = h.residual_sum_squares(y_i1, y_i2)?;
    if prior_q == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if sigma2 == 0.0 {
        if rss > 0.0 {
            log::warn!(
                "auxiliary model for `{}` has zero variance but residual {rss:e}; excluded",
                h.output_channel
            );
            return Ok(f64::NEG_INFINITY);
        }
        return Ok(f64::INFINITY);
    }
    Ok(prior_q.ln() - 0.5 * rows as f64 * sigma2.ln() - rss / (2.0 * sigma2))
}

/// Degrees-of-freedom weighted mean of the member variances.
pub fn pooled_variance(family: &TransmissibilityFamily) -> f64 {
    let (num, den) = family.members().iter().fold((0.0, 0.0), |(n, d), (_, m)| {
        (n + m.dof as f64 * m.sigma2, d + m.dof as f64)
    });
    if den > 0.0 {
        num / den
    } else {
        family.members().iter().map(|(_, m)| m.sigma2).sum::<f64>() / family.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult {
    pub window_id: usize,
    /// First sample of the window (0-based).
    pub start: usize,
    /// One past the last sample of the window.
    pub end: usize,
    pub log_evidence: Vec<f64>,
    pub posterior: Vec<f64>,
    pub chosen: usize,
    pub ambiguous: bool,
}

/// Index of the largest value; ties go to the lowest index.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Normalized posteriors from log-evidences, shifting by the maximum before exponentiating.
pub fn posteriors_from_log_evidence(log_evidence: &[f64]) -> Result<Vec<f64>> {
    let max = log_evidence
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::NoAdmissibleModel);
    }
    let weights: Vec<f64> = if max == f64::INFINITY {
        log_evidence
            .iter()
            .map(|l| if *l == f64::INFINITY { 1.0 } else { 0.0 })
            .collect()
    } else {
        log_evidence.iter().map(|l| (l - max).exp()).collect()
    };
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Posterior over auxiliary members for one window of online data.
///
/// With `pooled`, every member's variance is replaced by [`pooled_variance`].
pub fn classify(
    h: &TransmissibilityFamily,
    window: &TimeSeriesSet,
    prior: &Prior,
    pooled: bool,
) -> Result<PosteriorResult> {
    if prior.len() != h.len() {
        return Err(Error::config(
            "priors",
            format!("{} weights for {} conditions", prior.len(), h.len()),
        ));
    }
    let y_i1 = window.select(h.input_channels())?;
    let y_i2 = window.require(h.output_channel())?;
    let shared = pooled.then(|| pooled_variance(h));

    let log_evidence = h
        .members()
        .iter()
        .zip(prior.weights())
        .map(|((_, m), &p)| {
            log_evidence_with_variance(m, shared.unwrap_or(m.sigma2), &y_i1, y_i2, p)
        })
        .collect::<Result<Vec<f64>>>()?;
    let posterior = posteriors_from_log_evidence(&log_evidence)?;
    let chosen = argmax(&log_evidence);

    let mut sorted: Vec<f64> = log_evidence.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let ambiguous = sorted.len() > 1 && sorted[0] - sorted[1] < AMBIGUITY_NATS;

    Ok(PosteriorResult {
        window_id: 0,
        start: 0,
        end: window.len(),
        log_evidence,
        posterior,
        chosen,
        ambiguous,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleTrace {
    pub labels: Vec<String>,
    pub order: usize,
    pub windows: Vec<PosteriorResult>,
    /// Condition index in force at every sample.
    pub chosen: Vec<usize>,
    /// Scheduled estimate of the target; `None` for the first `order` samples.
    pub estimate: Vec<Option<f64>>,
    /// Measured target, when the online record carried it.
    pub measured: Option<Vec<f64>>,
}

impl ScheduleTrace {
    /// (measured, estimated) pairs over the samples that have an estimate.
    pub fn scored_pairs(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let measured = self.measured.as_ref()?;
        let (m, e) = measured
            .iter()
            .zip(&self.estimate)
            .filter_map(|(m, e)| e.map(|e| (*m, e)))
            .unzip();
        Some((m, e))
    }

    /// Most frequent chosen condition over the classified windows (ties → lowest index).
    pub fn dominant_condition(&self) -> usize {
        let mut counts = vec![0usize; self.labels.len()];
        for w in &self.windows {
            counts[w.chosen] += w.end - w.start;
        }
        let mut best = 0;
        for (i, c) in counts.iter().enumerate() {
            if *c > counts[best] {
                best = i;
            }
        }
        best
    }

    pub fn windows_csv(&self) -> String {
        let mut out = String::from("window_id,start_sample,end_sample,chosen_label");
        for l in &self.labels {
            write!(out, ",L_{l}").unwrap();
        }
        for l in &self.labels {
            write!(out, ",posterior_{l}").unwrap();
        }
        out.push_str(",ambiguous\n");
        for w in &self.windows {
            write!(
                out,
                "{},{},{},{}",
                w.window_id, w.start, w.end, self.labels[w.chosen]
            )
            .unwrap();
            for v in w.log_evidence.iter().chain(&w.posterior) {
                write!(out, ",{v}").unwrap();
            }
            writeln!(out, ",{}", u8::from(w.ambiguous)).unwrap();
        }
        out
    }

    pub fn samples_csv(&self) -> String {
        let mut out = String::from("sample_index");
        if self.measured.is_some() {
            out.push_str(",y_O_measured");
        }
        out.push_str(",y_O_estimated,chosen_label\n");
        for (t, est) in self.estimate.iter().enumerate() {
            write!(out, "{t}").unwrap();
            if let Some(m) = &self.measured {
                write!(out, ",{}", m[t]).unwrap();
            }
            match est {
                Some(v) => write!(out, ",{v}").unwrap(),
                None => out.push(','),
            }
            writeln!(out, ",{}", self.labels[self.chosen[t]]).unwrap();
        }
        out
    }

    pub fn write_csv(&self, windows: &Path, samples: &Path) -> Result<()> {
        std::fs::write(windows, self.windows_csv()).map_err(|e| Error::io(windows, e))?;
        std::fs::write(samples, self.samples_csv()).map_err(|e| Error::io(samples, e))
    }
}

/// Classifies each window with the auxiliary family, then predicts the target
/// with the primary member chosen for that window.
///
/// Classification only uses regressor rows inside the window. Prediction uses
/// lags that reach back into the previous window, so every sample after the
/// first `order` gets an estimate. A trailing window too short to classify
/// keeps the previous window's choice.
pub fn schedule_estimate(
    g: &TransmissibilityFamily,
    h: &TransmissibilityFamily,
    online: &TimeSeriesSet,
    prior: &Prior,
    window: usize,
    pooled: bool,
) -> Result<ScheduleTrace> {
    if g.labels() != h.labels() {
        return Err(Error::InvalidData(
            "primary and auxiliary families are not label-aligned".into(),
        ));
    }
    let order = h.order();
    if window <= order {
        return Err(Error::config(
            "window",
            format!("window of {window} samples must exceed the FIR order {order}"),
        ));
    }
    let inputs = online.select(g.input_channels())?;
    let len = online.len();
    if len <= order {
        return Err(Error::InsufficientSamples {
            order,
            samples: len,
        });
    }

    let mut windows = Vec::new();
    let mut chosen = vec![0usize; len];
    for (id, seg) in segment(online, window)?.into_iter().enumerate() {
        let pick = if seg.data.len() > order {
            let mut result = classify(h, &seg.data, prior, pooled)?;
            result.window_id = id;
            result.start = seg.start;
            result.end = seg.end();
            let pick = result.chosen;
            windows.push(result);
            pick
        } else {
            // only reachable for a short tail after at least one full window
            windows
                .last()
                .map(|w: &PosteriorResult| w.chosen)
                .unwrap_or(0)
        };
        chosen[seg.start..seg.end()].fill(pick);
    }

    let phi = regressor_matrix(&inputs, g.order())?;
    let thetas: Vec<DVector<f64>> = g
        .members()
        .iter()
        .map(|(_, m)| DVector::from_column_slice(&m.theta))
        .collect();
    let gorder = g.order();
    let mut estimate = vec![None; len];
    for (row, est) in estimate.iter_mut().enumerate().skip(gorder) {
        let theta = &thetas[chosen[row]];
        *est = Some(phi.row(row - gorder).transpose().dot(theta));
    }

    let measured = online.require(g.output_channel()).ok().map(<[f64]>::to_vec);
    Ok(ScheduleTrace {
        labels: g.labels().iter().map(|s| s.to_string()).collect(),
        order: gorder,
        windows,
        chosen,
        estimate,
        measured,
    })
}
