//! Conversation-level statistics of an utterance score sequence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::sentiment::{Dimension, SentimentScores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum FeatureSpec {
    /// Mean valence and satisfaction.
    #[default]
    #[serde(rename = "2d")]
    Mean2d,
    /// Mean valence, activation and satisfaction.
    #[serde(rename = "3d")]
    Mean3d,
    /// Mean, population std and interquartile range of valence, activation
    /// and satisfaction (nine values).
    #[serde(rename = "extended")]
    Extended,
}

impl FeatureSpec {
    /// Dimensions read, in feature order.
    pub fn dimensions(self) -> &'static [Dimension] {
        match self {
            FeatureSpec::Mean2d => &[Dimension::Valence, Dimension::Satisfaction],
            FeatureSpec::Mean3d | FeatureSpec::Extended => {
                &[Dimension::Valence, Dimension::Activation, Dimension::Satisfaction]
            }
        }
    }

    pub fn len(self) -> usize {
        match self {
            FeatureSpec::Extended => 3 * self.dimensions().len(),
            _ => self.dimensions().len(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSpec::Mean2d => "2d",
            FeatureSpec::Mean3d => "3d",
            FeatureSpec::Extended => "extended",
        }
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2d" => Ok(FeatureSpec::Mean2d),
            "3d" => Ok(FeatureSpec::Mean3d),
            "extended" => Ok(FeatureSpec::Extended),
            other => Err(Error::InvalidArgument(format!(
                "unknown feature set `{other}` (expected 2d, 3d or extended)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConversationFeatures {
    pub spec: FeatureSpec,
    pub values: Vec<f64>,
}

/// Quantile with linear interpolation between order statistics
/// (position `q * (n - 1)` in the sorted sample).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn aggregate_features(scores: &[SentimentScores], spec: FeatureSpec) -> Result<ConversationFeatures> {
    if scores.is_empty() {
        return Err(Error::Empty("cannot aggregate an empty score sequence".into()));
    }
    let n = scores.len() as f64;
    let mut values = Vec::with_capacity(spec.len());
    for &dim in spec.dimensions() {
        let xs: Vec<f64> = scores.iter().map(|s| s.get(dim)).collect();
        let mean = xs.iter().sum::<f64>() / n;
        values.push(mean);
        if spec == FeatureSpec::Extended {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let mut sorted = xs;
            sorted.sort_by(f64::total_cmp);
            values.push(var.sqrt());
            values.push(quantile(&sorted, 0.75) - quantile(&sorted, 0.25));
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite sentiment score".into()));
    }
    Ok(ConversationFeatures { spec, values })
}

/// Per-utterance input rows for the sequence model: `T x dims`, columns in
/// `spec.dimensions()` order.
pub fn score_sequence(scores: &[SentimentScores], spec: FeatureSpec) -> Result<Matrix> {
    if scores.is_empty() {
        return Err(Error::Empty("empty score sequence".into()));
    }
    let dims = spec.dimensions();
    let data = scores
        .iter()
        .flat_map(|s| dims.iter().map(move |&d| s.get(d)))
        .collect();
    Matrix::from_vec(scores.len(), dims.len(), data)
}
