use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which features a model uses. Coefficients of unused features are pinned to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureSet {
    /// `y ~ rank`
    RankOnly,
    /// `y ~ rank + charmatch`
    RankCharmatch,
    /// `y ~ rank + charmatch + log(1 + freq)`
    RankCharmatchFreq,
}

impl FeatureSet {
    /// Feature sets are numbered 1, 2, 3 by how many features they use.
    pub fn from_size(n: u8) -> Option<Self> {
        match n {
            1 => Some(FeatureSet::RankOnly),
            2 => Some(FeatureSet::RankCharmatch),
            3 => Some(FeatureSet::RankCharmatchFreq),
            _ => None,
        }
    }

    pub fn size(&self) -> u8 {
        match self {
            FeatureSet::RankOnly => 1,
            FeatureSet::RankCharmatch => 2,
            FeatureSet::RankCharmatchFreq => 3,
        }
    }

    /// Mask over `(intercept, rank, charmatch, log1p_freq)`.
    pub fn active(&self) -> [bool; 4] {
        match self {
            FeatureSet::RankOnly => [true, true, false, false],
            FeatureSet::RankCharmatch => [true, true, true, false],
            FeatureSet::RankCharmatchFreq => [true, true, true, true],
        }
    }

    pub fn uses_freq(&self) -> bool {
        matches!(self, FeatureSet::RankCharmatchFreq)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::RankOnly => "rank",
            FeatureSet::RankCharmatch => "rank + charmatch",
            FeatureSet::RankCharmatchFreq => "rank + charmatch + log(1+freq)",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelSource {
    Preset(u8),
    Trained,
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("preset model id {0} out of range (expected 1..=12)")]
    UnknownPreset(u32),
    #[error("coefficient beta{index} = {value} must be 0 for feature set {feature_set:?}")]
    InactiveCoefficient {
        index: usize,
        value: f64,
        feature_set: FeatureSet,
    },
    #[error("coefficient beta{index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
}

/// Coefficients of `z = beta0 + beta1 rank + beta2 charmatch + beta3 ln(1 + freq)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct ModelCoefficients {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    pub feature_set: FeatureSet,
    pub source: ModelSource,
}

#[derive(Deserialize)]
struct RawModel {
    beta0: f64,
    beta1: f64,
    beta2: f64,
    beta3: f64,
    feature_set: FeatureSet,
    source: ModelSource,
}

impl TryFrom<RawModel> for ModelCoefficients {
    type Error = ModelError;

    fn try_from(r: RawModel) -> Result<Self, Self::Error> {
        ModelCoefficients::new(
            [r.beta0, r.beta1, r.beta2, r.beta3],
            r.feature_set,
            r.source,
        )
    }
}

impl ModelCoefficients {
    pub fn new(
        betas: [f64; 4],
        feature_set: FeatureSet,
        source: ModelSource,
    ) -> Result<Self, ModelError> {
        for (index, (&value, active)) in betas.iter().zip(feature_set.active()).enumerate() {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { index, value });
            }
            if !active && value != 0.0 {
                return Err(ModelError::InactiveCoefficient {
                    index,
                    value,
                    feature_set,
                });
            }
        }
        let [beta0, beta1, beta2, beta3] = betas;
        Ok(ModelCoefficients {
            beta0,
            beta1,
            beta2,
            beta3,
            feature_set,
            source,
        })
    }

    pub fn betas(&self) -> [f64; 4] {
        [self.beta0, self.beta1, self.beta2, self.beta3]
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ModelError> {
        ModelCoefficients::new(
            self.betas().map(|b| b * factor),
            self.feature_set,
            self.source,
        )
    }
}

/// Fitted coefficients for the twelve reranking models, one row per model.
/// Models 1-4 use rank only, 5-8 add charmatch, 9-12 add frequency; within
/// each group the gold sets are Ab3P, BIOADI, MEDSTRACT and SH in that order.
const PRESETS: [[f64; 4]; 12] = [
    [1.6, -3.3, 0.0, 0.0],
    [0.7, -1.6, 0.0, 0.0],
    [1.9, -3.9, 0.0, 0.0],
    [1.4, -3.3, 0.0, 0.0],
    [-1.2, -3.2, 3.5, 0.0],
    [-2.5, -1.5, 3.8, 0.0],
    [-1.0, -4.0, 3.9, 0.0],
    [-1.9, -3.2, 4.1, 0.0],
    [-2.7, -2.9, 3.7, 0.3],
    [-5.2, -1.5, 5.2, 0.5],
    [-3.2, -3.8, 4.7, 0.4],
    [-3.1, -2.9, 4.3, 0.3],
];

/// Benchmark whose gold labels each preset was fitted on.
pub const PRESET_BENCHMARKS: [&str; 4] = ["Ab3P", "BIOADI", "MEDSTRACT", "SH"];

pub fn preset(model_id: u32) -> Result<ModelCoefficients, ModelError> {
    let idx = model_id
        .checked_sub(1)
        .filter(|&i| (i as usize) < PRESETS.len())
        .ok_or(ModelError::UnknownPreset(model_id))? as usize;
    let feature_set = match idx / 4 {
        0 => FeatureSet::RankOnly,
        1 => FeatureSet::RankCharmatch,
        _ => FeatureSet::RankCharmatchFreq,
    };
    ModelCoefficients::new(
        PRESETS[idx],
        feature_set,
        ModelSource::Preset(model_id as u8),
    )
}

pub fn all_presets() -> Vec<ModelCoefficients> {
    (1..=12)
        .map(|id| preset(id).expect("preset ids 1..=12 are valid"))
        .collect()
}

/// Benchmark name for a preset id.
pub fn preset_benchmark(model_id: u32) -> Option<&'static str> {
    (1..=12)
        .contains(&model_id)
        .then(|| PRESET_BENCHMARKS[((model_id - 1) % 4) as usize])
}
