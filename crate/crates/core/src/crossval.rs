//! k-fold cross-validated Spearman evaluation.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::FoldAssignment;
use crate::csat::{CsatModel, CsatModelConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::{spearman, SubsetRule};
use crate::sentiment::SentimentScores;

/// A conversation reduced to what the CSAT models consume.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredConversation {
    pub id: String,
    pub scores: Vec<SentimentScores>,
    pub csat: f64,
}

/// Trains a model on one split and predicts for another.
pub trait Trainer: Sync {
    type Model: Send + Sync;

    fn fit(&self, train: &[&ScoredConversation]) -> Result<Self::Model>;
    fn predict(&self, model: &Self::Model, conv: &ScoredConversation) -> Result<f64>;
}

impl Trainer for CsatModelConfig {
    type Model = CsatModel;

    fn fit(&self, train: &[&ScoredConversation]) -> Result<CsatModel> {
        let view: Vec<(&[SentimentScores], f64)> = train.iter().map(|c| (&c.scores[..], c.csat)).collect();
        self.train(&view)
    }

    fn predict(&self, model: &CsatModel, conv: &ScoredConversation) -> Result<f64> {
        model.predict(&conv.scores)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub conv_id: String,
    pub csat_true: f64,
    pub csat_pred: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
    /// Why the fold has no ρ.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValReport {
    pub folds: Vec<FoldResult>,
    /// Unweighted mean over folds with a defined ρ.
    pub mean_rho: f64,
    pub valid_folds: usize,
    /// Held-out predictions of every fold, sorted by conversation id.
    pub predictions: Vec<Prediction>,
    /// Fold index of each entry of `predictions`.
    pub prediction_folds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub subset: SubsetRule,
    pub n: usize,
    pub per_fold: Vec<Option<f64>>,
    /// Mean over folds where the subset ρ is defined.
    pub mean_rho: Option<f64>,
}

fn fold_rho(pairs: &[(f64, f64)]) -> std::result::Result<(f64, Option<f64>), String> {
    if pairs.len() < 2 {
        return Err(format!("only {} held-out conversations", pairs.len()));
    }
    let (t, p): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    match spearman(&t, &p) {
        Ok(c) => Ok((c.rho, c.p_value)),
        Err(e @ Error::Degenerate(_)) => Err(e.to_string()),
        Err(e) => Err(e.to_string()),
    }
}

impl CrossValReport {
    /// Per-fold Spearman on the held-out pairs admitted by `rule`.
    pub fn subset(&self, rule: SubsetRule) -> SubsetResult {
        let k = self.folds.len();
        let mut per_fold_pairs: Vec<Vec<(f64, f64)>> = vec![Vec::new(); k];
        for (p, &f) in self.predictions.iter().zip(&self.prediction_folds) {
            if rule.admits(p.csat_true) {
                per_fold_pairs[f].push((p.csat_true, p.csat_pred));
            }
        }
        let per_fold: Vec<Option<f64>> = per_fold_pairs.iter().map(|p| fold_rho(p).ok().map(|r| r.0)).collect();
        let valid: Vec<f64> = per_fold.iter().flatten().copied().collect();
        SubsetResult {
            subset: rule,
            n: per_fold_pairs.iter().map(Vec::len).sum(),
            mean_rho: (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64),
            per_fold,
        }
    }
}

/// Trains on `k - 1` folds and scores Spearman's ρ on the held-out fold, for
/// every fold. Folds run through `execution`; results are reduced in fold
/// order. Folds whose ρ is undefined are skipped with a warning; if none is
/// left the result is a degenerate-input error.
pub fn crossval_spearman<T: Trainer>(
    trainer: &T,
    data: &[ScoredConversation],
    folds: &FoldAssignment,
    execution: Execution,
) -> Result<CrossValReport> {
    if data.is_empty() {
        return Err(Error::Empty("no conversations to cross-validate".into()));
    }
    let assignment = data
        .iter()
        .map(|c| {
            folds
                .fold_of(&c.id)
                .ok_or_else(|| Error::Data(format!("conversation `{}` has no fold", c.id)))
        })
        .collect::<Result<Vec<usize>>>()?;

    let outcomes = execution.map_range(folds.k, |fold| -> Result<(FoldResult, Vec<(usize, f64)>)> {
        let train: Vec<&ScoredConversation> = data.iter().zip(&assignment).filter(|(_, &f)| f != fold).map(|(c, _)| c).collect();
        let test: Vec<usize> = (0..data.len()).filter(|&i| assignment[i] == fold).collect();
        let mut result = FoldResult {
            fold,
            n_train: train.len(),
            n_test: test.len(),
            rho: None,
            p_value: None,
            skipped: None,
        };
        if test.is_empty() || train.is_empty() {
            result.skipped = Some("empty split".into());
            return Ok((result, Vec::new()));
        }
        let model = trainer.fit(&train)?;
        let preds = test
            .iter()
            .map(|&i| trainer.predict(&model, &data[i]).map(|p| (i, p)))
            .collect::<Result<Vec<_>>>()?;
        let pairs: Vec<(f64, f64)> = preds.iter().map(|&(i, p)| (data[i].csat, p)).collect();
        match fold_rho(&pairs) {
            Ok((rho, p)) => {
                result.rho = Some(rho);
                result.p_value = p;
            }
            Err(reason) => result.skipped = Some(reason),
        }
        Ok((result, preds))
    });

    let mut fold_results = Vec::with_capacity(folds.k);
    let mut predictions: Vec<(usize, usize, f64)> = Vec::with_capacity(data.len());
    for outcome in outcomes {
        let (result, preds) = outcome?;
        if let Some(reason) = &result.skipped {
            warn!("fold {} skipped: {reason}", result.fold);
        }
        predictions.extend(preds.into_iter().map(|(i, p)| (i, result.fold, p)));
        fold_results.push(result);
    }
    let valid: Vec<f64> = fold_results.iter().filter_map(|f| f.rho).collect();
    if valid.is_empty() {
        return Err(Error::Degenerate("no fold produced a defined Spearman correlation".into()));
    }
    predictions.sort_by(|a, b| data[a.0].id.cmp(&data[b.0].id));
    Ok(CrossValReport {
        mean_rho: valid.iter().sum::<f64>() / valid.len() as f64,
        valid_folds: valid.len(),
        prediction_folds: predictions.iter().map(|p| p.1).collect(),
        predictions: predictions
            .into_iter()
            .map(|(i, _, p)| Prediction {
                conv_id: data[i].id.clone(),
                csat_true: data[i].csat,
                csat_pred: p,
            })
            .collect(),
        folds: fold_results,
    })
}
