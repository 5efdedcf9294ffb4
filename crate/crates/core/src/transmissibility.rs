//! FIR transmissibility models and the per-condition model families.
//!
//! The primary family maps all pseudo-inputs to the target output; the
//! auxiliary family maps `y_I1` to the single held-out pseudo-input `y_I2`
//! and is only used to recognise which condition the system is in.

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    build_regressor, regressor_matrix, Decomposition, RegressionMatrices, TimeSeriesSet,
};
use crate::error::{Error, Result};
use crate::regression::{ridge_fit, RidgeSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirModel {
    pub order: usize,
    pub input_dim: usize,
    /// `[b_0 … b_n]`, each `b_i` holding one coefficient per input channel.
    pub theta: Vec<f64>,
    pub sigma2: f64,
    pub rho: f64,
    pub kappa_after: f64,
    pub dof: usize,
    pub input_channels: Vec<String>,
    pub output_channel: String,
}

impl FirModel {
    pub fn from_solution(
        solution: RidgeSolution,
        order: usize,
        input_channels: Vec<String>,
        output_channel: String,
    ) -> Self {
        Self {
            order,
            input_dim: input_channels.len(),
            theta: solution.theta.as_slice().to_vec(),
            sigma2: solution.sigma2,
            rho: solution.rho,
            kappa_after: solution.kappa_after,
            dof: solution.dof,
            input_channels,
            output_channel,
        }
    }

    /// Coefficient of `channel` at `lag`.
    pub fn coefficient(&self, lag: usize, channel: usize) -> f64 {
        self.theta[lag * self.input_dim + channel]
    }

    fn validate(&self) -> Result<()> {
        if self.theta.len() != self.input_dim * (self.order + 1) {
            return Err(Error::Store(format!(
                "model for `{}` has {} coefficients, expected {}",
                self.output_channel,
                self.theta.len(),
                self.input_dim * (self.order + 1)
            )));
        }
        if self.input_channels.len() != self.input_dim {
            return Err(Error::Store("input channel count mismatch".into()));
        }
        if !(self.sigma2 >= 0.0) {
            return Err(Error::Store(format!("negative variance {}", self.sigma2)));
        }
        Ok(())
    }

    /// Residual sum of squares `‖target − Φθ‖²` over rows `t = n..M`, and the row count.
    pub fn residual_sum_squares(&self, inputs: &[&[f64]], target: &[f64]) -> Result<(f64, usize)> {
        let yhat = predict(self, inputs)?;
        if target.len() != inputs[0].len() {
            return Err(Error::InvalidData(
                "target length differs from inputs".into(),
            ));
        }
        let rss = yhat
            .iter()
            .zip(&target[self.order..])
            .map(|(a, b)| (b - a) * (b - a))
            .sum();
        Ok((rss, yhat.len()))
    }
}

/// Identifies an FIR model from `inputs` to `output` on one record.
pub fn fit_fir(
    ts: &TimeSeriesSet,
    inputs: &[String],
    output: &str,
    order: usize,
    c_lim: f64,
) -> Result<FirModel> {
    let m = regression_for(ts, inputs, output, order)?;
    let solution = ridge_fit(&m, c_lim)?;
    Ok(FirModel::from_solution(
        solution,
        order,
        inputs.to_vec(),
        output.to_string(),
    ))
}

fn regression_for(
    ts: &TimeSeriesSet,
    inputs: &[String],
    output: &str,
    order: usize,
) -> Result<RegressionMatrices> {
    let channels = ts.select(inputs)?;
    let target = ts.require(output)?;
    build_regressor(&channels, target, order)
}

/// `ŷ(t) = φ(t)ᵀθ` for `t = n..M` (0-based); the result has `M − n` samples.
pub fn predict(model: &FirModel, inputs: &[&[f64]]) -> Result<Vec<f64>> {
    if inputs.len() != model.input_dim {
        return Err(Error::InvalidData(format!(
            "model expects {} input channels, got {}",
            model.input_dim,
            inputs.len()
        )));
    }
    let phi = regressor_matrix(inputs, model.order)?;
    let theta = DVector::from_column_slice(&model.theta);
    Ok((phi * theta).as_slice().to_vec())
}

/// Like [`predict`], reading the model's input channels from a record.
pub fn predict_record(model: &FirModel, ts: &TimeSeriesSet) -> Result<Vec<f64>> {
    predict(model, &ts.select(&model.input_channels)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Primary,
    Auxiliary,
}

/// Condition-indexed models sharing order and channel layout.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissibilityFamily {
    kind: FamilyKind,
    members: Vec<(String, FirModel)>,
    decomposition: Option<Decomposition>,
}

impl TransmissibilityFamily {
    pub fn new(
        kind: FamilyKind,
        members: Vec<(String, FirModel)>,
        decomposition: Option<Decomposition>,
    ) -> Result<Self> {
        let Some((_, first)) = members.first() else {
            return Err(Error::InvalidData(
                "a family needs at least one member".into(),
            ));
        };
        for (i, (label, model)) in members.iter().enumerate() {
            if members[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::InvalidData(format!(
                    "duplicate condition label `{label}`"
                )));
            }
            model.validate()?;
            if model.order != first.order
                || model.input_channels != first.input_channels
                || model.output_channel != first.output_channel
            {
                return Err(Error::InvalidData(format!(
                    "member `{label}` differs in order or channels from the rest of the family"
                )));
            }
        }
        if (kind == FamilyKind::Auxiliary) != decomposition.is_some() {
            return Err(Error::InvalidData(
                "only auxiliary families carry a decomposition".into(),
            ));
        }
        Ok(Self {
            kind,
            members,
            decomposition,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn decomposition(&self) -> Option<Decomposition> {
        self.decomposition
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.members.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn members(&self) -> &[(String, FirModel)] {
        &self.members
    }

    pub fn model(&self, index: usize) -> &FirModel {
        &self.members[index].1
    }

    pub fn order(&self) -> usize {
        self.members[0].1.order
    }

    pub fn input_channels(&self) -> &[String] {
        &self.members[0].1.input_channels
    }

    pub fn output_channel(&self) -> &str {
        &self.members[0].1.output_channel
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.members.iter().position(|(l, _)| l == label)
    }
}

fn record_label(ts: &TimeSeriesSet) -> Result<&str> {
    ts.condition()
        .ok_or_else(|| Error::InvalidData("training record has no condition label".into()))
}

fn check_schema(records: &[TimeSeriesSet]) -> Result<(Vec<String>, String)> {
    let first = records
        .first()
        .ok_or_else(|| Error::InvalidData("no training records".into()))?;
    let inputs = first.pseudo_input_names();
    let target = first.target()?.name.clone();
    for r in records {
        if r.pseudo_input_names() != inputs || r.target()?.name != target {
            return Err(Error::InvalidData(format!(
                "record `{}` does not share the channel schema of `{}`",
                r.condition().unwrap_or("?"),
                first.condition().unwrap_or("?")
            )));
        }
    }
    Ok((inputs, target))
}

/// Fits the primary family (all pseudo-inputs → target) and the auxiliary
/// family (`y_I1` → `y_I2`) with one member per labelled record.
pub fn train_families(
    records: &[TimeSeriesSet],
    decomposition: Decomposition,
    order: usize,
    c_lim: f64,
) -> Result<(TransmissibilityFamily, TransmissibilityFamily)> {
    let (inputs, target) = check_schema(records)?;
    let (aux_inputs, aux_output) = decomposition.split_names(&inputs)?;

    let mut primary = Vec::with_capacity(records.len());
    let mut auxiliary = Vec::with_capacity(records.len());
    for r in records {
        let label = record_label(r)?.to_string();
        if primary
            .iter()
            .any(|(l, _): &(String, FirModel)| *l == label)
        {
            return Err(Error::InvalidData(format!(
                "duplicate condition label `{label}`"
            )));
        }
        primary.push((label.clone(), fit_fir(r, &inputs, &target, order, c_lim)?));
        auxiliary.push((label, fit_fir(r, &aux_inputs, &aux_output, order, c_lim)?));
    }
    Ok((
        TransmissibilityFamily::new(FamilyKind::Primary, primary, None)?,
        TransmissibilityFamily::new(FamilyKind::Auxiliary, auxiliary, Some(decomposition))?,
    ))
}

/// One model fitted to all records at once by stacking their regression rows.
pub fn fit_average(
    records: &[TimeSeriesSet],
    inputs: &[String],
    output: &str,
    order: usize,
    c_lim: f64,
) -> Result<FirModel> {
    let parts = records
        .iter()
        .map(|r| regression_for(r, inputs, output, order))
        .collect::<Result<Vec<_>>>()?;
    let stacked = RegressionMatrices::stack(&parts)?;
    let solution = ridge_fit(&stacked, c_lim)?;
    Ok(FirModel::from_solution(
        solution,
        order,
        inputs.to_vec(),
        output.to_string(),
    ))
}

/// Mean-square power of every pseudo-input per record, to help choose `y_I2`.
pub fn channel_powers(records: &[TimeSeriesSet]) -> Vec<(String, Vec<(String, f64)>)> {
    records
        .iter()
        .map(|r| {
            let powers = r
                .pseudo_inputs()
                .map(|c| {
                    let p = c.data.iter().map(|x| x * x).sum::<f64>() / c.data.len() as f64;
                    (c.name.clone(), p)
                })
                .collect();
            (r.condition().unwrap_or("").to_string(), powers)
        })
        .collect()
}

pub const STORE_VERSION: &str = "1.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredFit {
    pub theta: Vec<f64>,
    pub sigma2: f64,
    pub rho: f64,
    pub kappa_after: f64,
    pub dof: usize,
}

impl From<&FirModel> for StoredFit {
    fn from(m: &FirModel) -> Self {
        Self {
            theta: m.theta.clone(),
            sigma2: m.sigma2,
            rho: m.rho,
            kappa_after: m.kappa_after,
            dof: m.dof,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredCondition {
    pub label: String,
    #[serde(rename = "G")]
    pub primary: StoredFit,
    #[serde(rename = "H")]
    pub auxiliary: StoredFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredChannels {
    pub inputs: Vec<String>,
    pub aux_inputs: Vec<String>,
    pub aux_output: String,
    pub target: String,
}

/// JSON document holding both families, so estimation needs no retraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStore {
    pub version: String,
    pub order: usize,
    pub c_lim: f64,
    pub decomposition: Decomposition,
    pub channel_names: StoredChannels,
    pub conditions: Vec<StoredCondition>,
    /// Single model fitted on all conditions together, for comparison studies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average: Option<StoredFit>,
}

impl ModelStore {
    pub fn from_families(
        primary: &TransmissibilityFamily,
        auxiliary: &TransmissibilityFamily,
        average: Option<&FirModel>,
        c_lim: f64,
    ) -> Result<Self> {
        if primary.labels() != auxiliary.labels() {
            return Err(Error::InvalidData("families are not label-aligned".into()));
        }
        let decomposition = auxiliary
            .decomposition()
            .ok_or_else(|| Error::InvalidData("auxiliary family lacks a decomposition".into()))?;
        Ok(Self {
            version: STORE_VERSION.to_string(),
            order: primary.order(),
            c_lim,
            decomposition,
            channel_names: StoredChannels {
                inputs: primary.input_channels().to_vec(),
                aux_inputs: auxiliary.input_channels().to_vec(),
                aux_output: auxiliary.output_channel().to_string(),
                target: primary.output_channel().to_string(),
            },
            conditions: primary
                .members()
                .iter()
                .zip(auxiliary.members())
                .map(|((label, g), (_, h))| StoredCondition {
                    label: label.clone(),
                    primary: g.into(),
                    auxiliary: h.into(),
                })
                .collect(),
            average: average.map(StoredFit::from),
        })
    }

    fn model(&self, fit: &StoredFit, inputs: &[String], output: &str) -> FirModel {
        FirModel {
            order: self.order,
            input_dim: inputs.len(),
            theta: fit.theta.clone(),
            sigma2: fit.sigma2,
            rho: fit.rho,
            kappa_after: fit.kappa_after,
            dof: fit.dof,
            input_channels: inputs.to_vec(),
            output_channel: output.to_string(),
        }
    }

    /// Rebuilds (primary, auxiliary) families.
    pub fn families(&self) -> Result<(TransmissibilityFamily, TransmissibilityFamily)> {
        let ch = &self.channel_names;
        let primary = self
            .conditions
            .iter()
            .map(|c| {
                (
                    c.label.clone(),
                    self.model(&c.primary, &ch.inputs, &ch.target),
                )
            })
            .collect();
        let auxiliary = self
            .conditions
            .iter()
            .map(|c| {
                (
                    c.label.clone(),
                    self.model(&c.auxiliary, &ch.aux_inputs, &ch.aux_output),
                )
            })
            .collect();
        Ok((
            TransmissibilityFamily::new(FamilyKind::Primary, primary, None)?,
            TransmissibilityFamily::new(
                FamilyKind::Auxiliary,
                auxiliary,
                Some(self.decomposition),
            )?,
        ))
    }

    pub fn average_model(&self) -> Option<FirModel> {
        let ch = &self.channel_names;
        self.average
            .as_ref()
            .map(|fit| self.model(fit, &ch.inputs, &ch.target))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("version")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::Store("missing version".into()))?;
        check_major_version(version, STORE_VERSION)?;
        let store: ModelStore = serde_json::from_value(value)?;
        store.families()?;
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Rejects a document whose major version differs from `supported`.
pub fn check_major_version(found: &str, supported: &str) -> Result<()> {
    let major = |v: &str| v.split('.').next().map(str::to_string);
    if major(found) != major(supported) {
        return Err(Error::Store(format!(
            "unsupported version {found} (this build reads {supported})"
        )));
    }
    Ok(())
}
