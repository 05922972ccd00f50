//! Conversation-level CSAT regression from utterance sentiment scores: a
//! static ν-SVR over aggregated statistics and a BLSTM over the raw score
//! sequence.

pub mod blstm;
pub mod features;
pub mod kernel;
pub mod svr;

pub use blstm::{
    length_sorted_batches, train_blstm, train_blstm_csat, BlstmConfig, BlstmRegressor, BlstmTrainConfig,
    BlstmTrainReport, PaddedBatch, Readout,
};
pub use features::{aggregate_features, score_sequence, ConversationFeatures, FeatureSpec};
pub use kernel::{kernel_eval, Kernel, KernelKind, KernelSpec};
pub use svr::{fit_nu_svr, solve_nu_svr, train_nu_svr, DualSolution, SvrModel, SvrParams};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Matrix};
use crate::sentiment::SentimentScores;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Svr,
    Blstm,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svr" => Ok(ModelKind::Svr),
            "blstm" => Ok(ModelKind::Blstm),
            other => Err(Error::InvalidArgument(format!("unknown model `{other}` (expected svr or blstm)"))),
        }
    }
}

/// Everything needed to train either regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsatModelConfig {
    pub model: ModelKind,
    pub features: FeatureSpec,
    pub kernel: KernelSpec,
    pub svr: SvrParams,
    pub hidden_dim: usize,
    pub readout: Readout,
    pub train: BlstmTrainConfig,
}

impl Default for CsatModelConfig {
    fn default() -> Self {
        CsatModelConfig {
            model: ModelKind::Svr,
            features: FeatureSpec::Mean2d,
            kernel: KernelSpec::default(),
            svr: SvrParams::default(),
            hidden_dim: 20,
            readout: Readout::Final,
            train: BlstmTrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsatModel {
    Svr { features: FeatureSpec, model: SvrModel },
    Blstm { features: FeatureSpec, model: BlstmRegressor },
}

impl CsatModelConfig {
    /// Trains on `(score sequence, csat)` pairs.
    pub fn train(&self, data: &[(&[SentimentScores], f64)]) -> Result<CsatModel> {
        if data.is_empty() {
            return Err(Error::Empty("no conversations to train on".into()));
        }
        let labels: Vec<f64> = data.iter().map(|d| d.1).collect();
        match self.model {
            ModelKind::Svr => {
                let rows = data
                    .iter()
                    .map(|(s, _)| aggregate_features(s, self.features).map(|f| f.values))
                    .collect::<Result<Vec<_>>>()?;
                let x = Matrix::from_rows(&rows)?;
                let kernel = self.kernel.resolve(self.features.len())?;
                let model = train_nu_svr(&x, &labels, kernel, &self.svr)?;
                Ok(CsatModel::Svr {
                    features: self.features,
                    model,
                })
            }
            ModelKind::Blstm => {
                if self.features == FeatureSpec::Extended {
                    return Err(Error::InvalidArgument(
                        "the blstm reads raw score sequences; use 2d or 3d features".into(),
                    ));
                }
                let seqs = data
                    .iter()
                    .map(|(s, _)| score_sequence(s, self.features))
                    .collect::<Result<Vec<_>>>()?;
                let config = BlstmConfig {
                    input_dim: self.features.len(),
                    hidden_dim: self.hidden_dim,
                    readout: self.readout,
                };
                let (model, _) = train_blstm_csat(&seqs, &labels, &config, &self.train)?;
                Ok(CsatModel::Blstm {
                    features: self.features,
                    model,
                })
            }
        }
    }
}

impl CsatModel {
    pub fn features(&self) -> FeatureSpec {
        match self {
            CsatModel::Svr { features, .. } | CsatModel::Blstm { features, .. } => *features,
        }
    }

    /// Clamped CSAT estimate for one conversation's scores.
    pub fn predict(&self, scores: &[SentimentScores]) -> Result<f64> {
        match self {
            CsatModel::Svr { features, model } => model.predict(&aggregate_features(scores, *features)?.values),
            CsatModel::Blstm { features, model } => model.predict(&score_sequence(scores, *features)?),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = match self {
            CsatModel::Svr { model, .. } => model.to_checkpoint(),
            CsatModel::Blstm { model, .. } => model.to_checkpoint(),
        };
        ck.config = serde_json::json!({
            "features": self.features(),
            "model": ck.config,
        });
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let bad = |m: &str| Error::InvalidArgument(format!("csat checkpoint: {m}"));
        let features: FeatureSpec = ck
            .config
            .get("features")
            .cloned()
            .ok_or_else(|| bad("missing feature set"))
            .and_then(|v| serde_json::from_value(v).map_err(|e| bad(&e.to_string())))?;
        let mut inner = ck.clone();
        inner.config = ck.config.get("model").cloned().ok_or_else(|| bad("missing model config"))?;
        match ck.kind.as_str() {
            svr::CHECKPOINT_KIND => Ok(CsatModel::Svr {
                features,
                model: SvrModel::from_checkpoint(&inner)?,
            }),
            blstm::CHECKPOINT_KIND => Ok(CsatModel::Blstm {
                features,
                model: BlstmRegressor::from_checkpoint(&inner)?,
            }),
            other => Err(bad(&format!("unsupported kind `{other}`"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        CsatModel::from_checkpoint(&Checkpoint::load(path)?)
    }
}
