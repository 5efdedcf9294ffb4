//! Multichannel time-series records, CSV interchange and regressor construction.
//!
//! A [`TimeSeriesSet`] holds equally long, uniformly sampled channels, each
//! tagged with the role it plays in identification. Pseudo-inputs are measured
//! outputs used as regressors; the target output is the signal to be estimated.

use std::fs::File;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header names that are accepted without a schema entry and never used for math.
const TIME_COLUMNS: [&str; 2] = ["time", "t"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelRole {
    PseudoInput,
    TargetOutput,
    /// Per-sample condition label (ground truth from a simulator); kept as text.
    Label,
    /// Present in the file but dropped on load.
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub name: String,
    pub role: ChannelRole,
}

impl ChannelSpec {
    pub fn new(name: impl Into<String>, role: ChannelRole) -> Self {
        Self {
            name: name.into(),
            role,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub role: ChannelRole,
    pub data: Vec<f64>,
}

impl Channel {
    pub fn new(name: impl Into<String>, role: ChannelRole, data: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            role,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSet {
    sample_rate: f64,
    channels: Vec<Channel>,
    labels: Option<Vec<String>>,
    condition: Option<String>,
}

impl TimeSeriesSet {
    /// Builds a record, checking that every channel has the same non-zero length.
    ///
    /// Only numeric roles belong in `channels`; per-sample labels go through
    /// [`TimeSeriesSet::with_labels`].
    pub fn new(sample_rate: f64, channels: Vec<Channel>) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::InvalidData(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let len = channels
            .first()
            .map(|c| c.data.len())
            .ok_or(Error::NoSamples)?;
        if len == 0 {
            return Err(Error::NoSamples);
        }
        for c in &channels {
            if c.data.len() != len {
                return Err(Error::InvalidData(format!(
                    "channel `{}` has {} samples, expected {len}",
                    c.name,
                    c.data.len()
                )));
            }
            if matches!(c.role, ChannelRole::Label | ChannelRole::Ignore) {
                return Err(Error::InvalidData(format!(
                    "channel `{}` is not numeric",
                    c.name
                )));
            }
        }
        for (i, c) in channels.iter().enumerate() {
            if channels[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidData(format!(
                    "duplicate channel `{}`",
                    c.name
                )));
            }
        }
        Ok(Self {
            sample_rate,
            channels,
            labels: None,
            condition: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::InvalidData(format!(
                "{} labels for {} samples",
                labels.len(),
                self.len()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_condition(mut self, condition: impl Into<String>) -> Self {
        self.condition = Some(condition.into());
        self
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    /// Number of samples M.
    pub fn len(&self) -> usize {
        self.channels[0].data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn condition(&self) -> Option<&str> {
        self.condition.as_deref()
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.channel(name)
            .map(|c| c.data.as_slice())
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn pseudo_inputs(&self) -> impl Iterator<Item = &Channel> {
        self.channels
            .iter()
            .filter(|c| c.role == ChannelRole::PseudoInput)
    }

    pub fn pseudo_input_names(&self) -> Vec<String> {
        self.pseudo_inputs().map(|c| c.name.clone()).collect()
    }

    /// The single channel tagged as target output.
    pub fn target(&self) -> Result<&Channel> {
        let mut targets = self
            .channels
            .iter()
            .filter(|c| c.role == ChannelRole::TargetOutput);
        match (targets.next(), targets.next()) {
            (Some(t), None) => Ok(t),
            (None, _) => Err(Error::InvalidData("no target_output channel".into())),
            (Some(_), Some(_)) => Err(Error::InvalidData(
                "more than one target_output channel".into(),
            )),
        }
    }

    /// Looks up several channels by name, in the order given.
    pub fn select(&self, names: &[String]) -> Result<Vec<&[f64]>> {
        names.iter().map(|n| self.require(n)).collect()
    }

    /// Copy of samples `range` (0-based, half-open).
    pub fn slice(&self, range: Range<usize>) -> TimeSeriesSet {
        TimeSeriesSet {
            sample_rate: self.sample_rate,
            channels: self
                .channels
                .iter()
                .map(|c| Channel::new(c.name.clone(), c.role, c.data[range.clone()].to_vec()))
                .collect(),
            labels: self.labels.as_ref().map(|l| l[range.clone()].to_vec()),
            condition: self.condition.clone(),
        }
    }

    /// Renders the record as CSV: numeric channels in order, then `true_label` if present.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let mut header: Vec<&str> = self.channels.iter().map(|c| c.name.as_str()).collect();
        if self.labels.is_some() {
            header.push("true_label");
        }
        out.push_str(&header.join(","));
        out.push('\n');
        for t in 0..self.len() {
            let mut row: Vec<String> = self
                .channels
                .iter()
                .map(|c| c.data[t].to_string())
                .collect();
            if let Some(labels) = &self.labels {
                row.push(labels[t].clone());
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let out = self.to_csv_string();
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Reads a CSV record whose header names every column in `schema`.
///
/// Columns are returned in schema order. A leading `time`/`t` column may be
/// present without a schema entry and is dropped.
pub fn load_csv(path: &Path, schema: &[ChannelSpec], sample_rate: f64) -> Result<TimeSeriesSet> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    for name in &header {
        if !schema.iter().any(|s| &s.name == name) && !TIME_COLUMNS.contains(&name.as_str()) {
            return Err(Error::UnknownChannel(name.clone()));
        }
    }
    let mut columns = Vec::with_capacity(schema.len());
    for spec in schema {
        let idx = header
            .iter()
            .position(|h| h == &spec.name)
            .ok_or_else(|| Error::UnknownChannel(spec.name.clone()))?;
        columns.push(idx);
    }

    let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); schema.len()];
    let mut labels: Vec<String> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (k, (spec, &idx)) in schema.iter().zip(&columns).enumerate() {
            let cell = &record[idx];
            match spec.role {
                ChannelRole::Ignore => {}
                ChannelRole::Label => labels.push(cell.to_string()),
                ChannelRole::PseudoInput | ChannelRole::TargetOutput => {
                    let value: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                        line,
                        column: spec.name.clone(),
                        value: cell.to_string(),
                    })?;
                    numeric[k].push(value);
                }
            }
        }
    }

    let channels: Vec<Channel> = schema
        .iter()
        .zip(numeric)
        .filter(|(s, _)| matches!(s.role, ChannelRole::PseudoInput | ChannelRole::TargetOutput))
        .map(|(s, data)| Channel::new(s.name.clone(), s.role, data))
        .collect();
    if channels.is_empty() || channels[0].data.is_empty() {
        return Err(Error::NoSamples);
    }
    let set = TimeSeriesSet::new(sample_rate, channels)?;
    if schema.iter().any(|s| s.role == ChannelRole::Label) {
        set.with_labels(labels)
    } else {
        Ok(set)
    }
}

/// Removes the sample mean from every numeric channel.
pub fn detrend_mean(ts: &TimeSeriesSet) -> TimeSeriesSet {
    let mut out = ts.clone();
    for c in &mut out.channels {
        let mean = c.data.iter().sum::<f64>() / c.data.len() as f64;
        c.data.iter_mut().for_each(|x| *x -= mean);
    }
    out
}

/// Stacked FIR regression problem `Y = Φ θ + E`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionMatrices {
    pub phi: DMatrix<f64>,
    pub y: DVector<f64>,
    pub order: usize,
    pub input_dim: usize,
}

impl RegressionMatrices {
    /// Number of regressor rows N.
    pub fn rows(&self) -> usize {
        self.phi.nrows()
    }

    /// Number of parameters n_I (n + 1).
    pub fn params(&self) -> usize {
        self.phi.ncols()
    }

    /// Row-stacks several problems with the same structure.
    pub fn stack(parts: &[RegressionMatrices]) -> Result<RegressionMatrices> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidData("nothing to stack".into()))?;
        if parts
            .iter()
            .any(|p| p.order != first.order || p.input_dim != first.input_dim)
        {
            return Err(Error::InvalidData(
                "cannot stack regressors of different structure".into(),
            ));
        }
        let rows: usize = parts.iter().map(|p| p.rows()).sum();
        let mut phi = DMatrix::zeros(rows, first.params());
        let mut y = DVector::zeros(rows);
        let mut at = 0;
        for p in parts {
            phi.rows_mut(at, p.rows()).copy_from(&p.phi);
            y.rows_mut(at, p.rows()).copy_from(&p.y);
            at += p.rows();
        }
        Ok(RegressionMatrices {
            phi,
            y,
            order: first.order,
            input_dim: first.input_dim,
        })
    }
}

/// Regressor matrix alone; row `r` holds lags 0..=n of every input at time `r + n`.
///
/// Column `lag * n_I + channel` carries `inputs[channel][t - lag]`.
pub fn regressor_matrix(inputs: &[&[f64]], order: usize) -> Result<DMatrix<f64>> {
    let input_dim = inputs.len();
    if input_dim == 0 {
        return Err(Error::InvalidData("no input channels".into()));
    }
    let samples = inputs[0].len();
    if inputs.iter().any(|c| c.len() != samples) {
        return Err(Error::InvalidData("input channels differ in length".into()));
    }
    if samples <= order {
        return Err(Error::InsufficientSamples { order, samples });
    }
    let rows = samples - order;
    Ok(DMatrix::from_fn(rows, input_dim * (order + 1), |r, col| {
        let lag = col / input_dim;
        let ch = col % input_dim;
        inputs[ch][r + order - lag]
    }))
}

/// FIR regression problem for `target(t)` on lags 0..=order of `inputs`.
pub fn build_regressor(
    inputs: &[&[f64]],
    target: &[f64],
    order: usize,
) -> Result<RegressionMatrices> {
    let phi = regressor_matrix(inputs, order)?;
    if target.len() != inputs[0].len() {
        return Err(Error::InvalidData(format!(
            "target has {} samples, inputs have {}",
            target.len(),
            inputs[0].len()
        )));
    }
    Ok(RegressionMatrices {
        phi,
        y: DVector::from_column_slice(&target[order..]),
        order,
        input_dim: inputs.len(),
    })
}

/// Index (into the pseudo-input channels) of the auxiliary output y_I2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub aux_output_index: usize,
}

impl Decomposition {
    pub fn new(aux_output_index: usize) -> Self {
        Self { aux_output_index }
    }

    /// Resolves the auxiliary channel by name among the record's pseudo-inputs.
    pub fn by_name(ts: &TimeSeriesSet, name: &str) -> Result<Self> {
        ts.pseudo_inputs()
            .position(|c| c.name == name)
            .map(Self::new)
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    /// Splits pseudo-input names into (y_I1 names, y_I2 name).
    pub fn split_names(&self, names: &[String]) -> Result<(Vec<String>, String)> {
        if names.len() < 2 {
            return Err(Error::InvalidData(format!(
                "decomposition needs at least two pseudo-inputs, found {}",
                names.len()
            )));
        }
        if self.aux_output_index >= names.len() {
            return Err(Error::InvalidData(format!(
                "auxiliary index {} out of range for {} pseudo-inputs",
                self.aux_output_index,
                names.len()
            )));
        }
        let rest = names
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != self.aux_output_index)
            .map(|(_, n)| n.clone())
            .collect();
        Ok((rest, names[self.aux_output_index].clone()))
    }
}

/// Splits the pseudo-inputs into (y_I1 channels, y_I2).
pub fn decompose(ts: &TimeSeriesSet, d: Decomposition) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (rest, aux) = d.split_names(&ts.pseudo_input_names())?;
    let y_i1 = rest
        .iter()
        .map(|n| ts.require(n).map(<[f64]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    Ok((y_i1, ts.require(&aux)?.to_vec()))
}

/// One window produced by [`segment`].
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub data: TimeSeriesSet,
    /// Set on a trailing window shorter than the requested length.
    pub short: bool,
}

impl Segment {
    pub fn end(&self) -> usize {
        self.start + self.data.len()
    }
}

/// Consecutive non-overlapping windows of `window` samples; a shorter tail is kept and flagged.
pub fn segment(ts: &TimeSeriesSet, window: usize) -> Result<Vec<Segment>> {
    if window == 0 {
        return Err(Error::InvalidData(
            "window must be at least one sample".into(),
        ));
    }
    let len = ts.len();
    Ok((0..len)
        .step_by(window)
        .map(|start| {
            let end = (start + window).min(len);
            Segment {
                start,
                data: ts.slice(start..end),
                short: end - start < window,
            }
        })
        .collect())
}
