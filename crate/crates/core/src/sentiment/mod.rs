//! Utterance-level sentiment model.
//!
//! A stack of LSTM layers reads the stacked acoustic frames and a single LSTM
//! reads the word vectors. Their final hidden states are concatenated and fed
//! to one dense head per sentiment dimension (activation, valence,
//! satisfaction).

mod scores;

pub use scores::{Dimension, SentimentScores, SCORE_MAX, SCORE_MIN};

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::ccc;
use crate::nn::{
    clip_gradients, AdamConfig, AdamState, Checkpoint, Dense, Lstm, LstmTrace, Matrix, Parameters,
    Tensor,
};

pub const CHECKPOINT_KIND: &str = "sentiment";

/// Inputs for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceFeatures {
    /// Stacked acoustic frames, `T x acoustic_dim`.
    pub acoustic: Matrix,
    /// Word vectors, `L x lexical_dim`, at least one row.
    pub lexical: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SentimentConfig {
    pub acoustic_layers: usize,
    pub acoustic_hidden: usize,
    pub lexical_hidden: usize,
    pub acoustic_dim: usize,
    pub lexical_dim: usize,
}

impl Default for SentimentConfig {
    fn default() -> Self {
        SentimentConfig {
            acoustic_layers: 5,
            acoustic_hidden: 64,
            lexical_hidden: 64,
            acoustic_dim: 120,
            lexical_dim: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLoss {
    /// Squared error summed over the three heads, averaged over the batch.
    #[default]
    Mse,
    /// Sum over heads of `1 - CCC` computed across the batch.
    Ccc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SentimentTrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub clip_threshold: f64,
    pub loss: SentimentLoss,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for SentimentTrainConfig {
    fn default() -> Self {
        SentimentTrainConfig {
            learning_rate: 1e-3,
            batch_size: 10,
            epochs: 30,
            clip_threshold: 1.0,
            loss: SentimentLoss::Mse,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentModel {
    pub config: SentimentConfig,
    pub acoustic: Vec<Lstm>,
    pub lexical: Lstm,
    /// One single-output head per [`Dimension`], in [`Dimension::ALL`] order.
    pub heads: Vec<Dense>,
}

/// Forward-pass record for backpropagation.
#[derive(Debug, Clone)]
pub struct SentimentTrace {
    acoustic: Vec<LstmTrace>,
    lexical: LstmTrace,
    fused: Vec<f64>,
    /// Unclamped head outputs.
    pub outputs: [f64; 3],
}

impl SentimentTrace {
    /// Concatenated `[acoustic final | lexical final]` hidden state.
    pub fn fused(&self) -> &[f64] {
        &self.fused
    }
}

impl SentimentModel {
    fn build(config: &SentimentConfig, mut make_lstm: impl FnMut(&str, usize, usize) -> Lstm, mut make_dense: impl FnMut(&str, usize) -> Dense) -> Result<Self> {
        if config.acoustic_layers == 0 {
            return Err(Error::InvalidArgument("need at least one acoustic layer".into()));
        }
        let acoustic = (0..config.acoustic_layers)
            .map(|l| {
                let input = if l == 0 { config.acoustic_dim } else { config.acoustic_hidden };
                make_lstm(&format!("acoustic.{l}"), input, config.acoustic_hidden)
            })
            .collect();
        let lexical = make_lstm("lexical", config.lexical_dim, config.lexical_hidden);
        let fused = config.acoustic_hidden + config.lexical_hidden;
        let heads = Dimension::ALL
            .iter()
            .map(|d| make_dense(&format!("head.{}", d.short_name()), fused))
            .collect();
        Ok(SentimentModel {
            config: config.clone(),
            acoustic,
            lexical,
            heads,
        })
    }

    pub fn zeros(config: &SentimentConfig) -> Result<Self> {
        Self::build(config, Lstm::zeros, |p, i| Dense::zeros(p, i, 1))
    }

    pub fn init(config: &SentimentConfig, seed: u64) -> Result<Self> {
        let mut lstm_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut head_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        Self::build(
            config,
            |p, i, h| Lstm::init(p, i, h, &mut lstm_rng),
            |p, i| Dense::init(p, i, 1, &mut head_rng),
        )
    }

    fn check_features(&self, feats: &UtteranceFeatures) -> Result<()> {
        Error::check_dim("acoustic feature width", self.config.acoustic_dim, feats.acoustic.cols())?;
        Error::check_dim("lexical feature width", self.config.lexical_dim, feats.lexical.cols())?;
        Ok(())
    }

    /// Unclamped head outputs.
    pub fn forward(&self, feats: &UtteranceFeatures) -> Result<[f64; 3]> {
        self.check_features(feats)?;
        let mut seq = std::borrow::Cow::Borrowed(&feats.acoustic);
        for layer in &self.acoustic {
            let (hidden, _) = layer.forward(&seq)?;
            seq = std::borrow::Cow::Owned(hidden);
        }
        let (_, lex_state) = self.lexical.forward(&feats.lexical)?;
        let mut fused = seq.row(seq.rows() - 1).to_vec();
        fused.extend_from_slice(&lex_state.hidden);
        self.heads_forward(&fused)
    }

    fn heads_forward(&self, fused: &[f64]) -> Result<[f64; 3]> {
        let mut out = [0.0; 3];
        for (o, head) in out.iter_mut().zip(&self.heads) {
            *o = head.forward(fused)?[0];
        }
        Ok(out)
    }

    pub fn forward_trace(&self, feats: &UtteranceFeatures) -> Result<SentimentTrace> {
        self.check_features(feats)?;
        let mut traces: Vec<LstmTrace> = Vec::with_capacity(self.acoustic.len());
        for (l, layer) in self.acoustic.iter().enumerate() {
            let input = if l == 0 { &feats.acoustic } else { traces[l - 1].hidden() };
            let tr = layer.forward_trace(input)?;
            traces.push(tr);
        }
        let lexical = self.lexical.forward_trace(&feats.lexical)?;
        let mut fused = traces.last().unwrap().final_hidden().to_vec();
        fused.extend_from_slice(lexical.final_hidden());
        let outputs = self.heads_forward(&fused)?;
        Ok(SentimentTrace {
            acoustic: traces,
            lexical,
            fused,
            outputs,
        })
    }

    /// Parameter gradients given `dL/d(outputs)` (one entry per head).
    pub fn backward(&self, trace: &SentimentTrace, d_outputs: &[f64]) -> Result<SentimentModel> {
        Error::check_dim("loss gradient (one per head)", 3, d_outputs.len())?;
        let mut grads = self.zeros_like();
        let mut d_fused = vec![0.0; trace.fused.len()];
        for (k, head) in self.heads.iter().enumerate() {
            let dx = head.backward(&trace.fused, &[d_outputs[k]], &mut grads.heads[k]);
            d_fused.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
        }
        let ha = self.config.acoustic_hidden;

        // lexical branch: gradient only at the final step
        let lex_steps = trace.lexical.hidden().rows();
        let mut d_lex = Matrix::zeros(lex_steps, self.config.lexical_hidden);
        d_lex.row_mut(lex_steps - 1).copy_from_slice(&d_fused[ha..]);
        let (g, _) = self.lexical.backward(&trace.lexical, &d_lex)?;
        grads.lexical = g;

        let steps = trace.acoustic[0].hidden().rows();
        let mut d_hidden = Matrix::zeros(steps, ha);
        d_hidden.row_mut(steps - 1).copy_from_slice(&d_fused[..ha]);
        for l in (0..self.acoustic.len()).rev() {
            let (g, d_input) = self.acoustic[l].backward(&trace.acoustic[l], &d_hidden)?;
            grads.acoustic[l] = g;
            d_hidden = d_input;
        }
        Ok(grads)
    }

    pub fn zeros_like(&self) -> SentimentModel {
        SentimentModel {
            config: self.config.clone(),
            acoustic: self.acoustic.iter().map(Lstm::zeros_like).collect(),
            lexical: self.lexical.zeros_like(),
            heads: self.heads.iter().map(Dense::zeros_like).collect(),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            config: serde_json::to_value(&self.config).expect("config serializes"),
            tensors: self.tensors().into_iter().cloned().collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != CHECKPOINT_KIND {
            return Err(Error::InvalidArgument(format!(
                "checkpoint kind `{}` is not a sentiment model",
                ck.kind
            )));
        }
        let config: SentimentConfig = serde_json::from_value(ck.config.clone())
            .map_err(|e| Error::InvalidArgument(format!("sentiment config: {e}")))?;
        let mut model = SentimentModel::zeros(&config)?;
        model.load_tensors(&ck.tensors)?;
        Ok(model)
    }
}

impl Parameters for SentimentModel {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut v: Vec<&Tensor> = self.acoustic.iter().flat_map(|l| l.tensors()).collect();
        v.extend(self.lexical.tensors());
        v.extend(self.heads.iter().flat_map(|h| h.tensors()));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = self.acoustic.iter_mut().flat_map(|l| l.tensors_mut()).collect();
        v.extend(self.lexical.tensors_mut());
        v.extend(self.heads.iter_mut().flat_map(|h| h.tensors_mut()));
        v
    }
}

/// Deterministic per-utterance scores, clamped to [-3, 3].
pub fn predict_sentiment(model: &SentimentModel, feats: &UtteranceFeatures) -> Result<SentimentScores> {
    Ok(SentimentScores::from_array(model.forward(feats)?).clamped())
}

/// CCC of predictions against annotations for each dimension, in
/// [`Dimension::ALL`] order.
pub fn evaluate_agreement(predictions: &[SentimentScores], annotations: &[SentimentScores]) -> Result<[f64; 3]> {
    Error::check_dim("prediction/annotation count", annotations.len(), predictions.len())?;
    if predictions.is_empty() {
        return Err(Error::Empty("no predictions to evaluate".into()));
    }
    let mut out = [0.0; 3];
    for d in Dimension::ALL {
        let p: Vec<f64> = predictions.iter().map(|s| s.get(d)).collect();
        let a: Vec<f64> = annotations.iter().map(|s| s.get(d)).collect();
        out[d.index()] = ccc(&p, &a)?;
    }
    Ok(out)
}

/// `1 - CCC(pred, target)` and its gradient with respect to `pred`.
pub fn ccc_loss(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let mt = target.iter().sum::<f64>() / n;
    let vp = pred.iter().map(|p| (p - mp).powi(2)).sum::<f64>() / n;
    let vt = target.iter().map(|t| (t - mt).powi(2)).sum::<f64>() / n;
    let cov = pred.iter().zip(target).map(|(p, t)| (p - mp) * (t - mt)).sum::<f64>() / n;
    let denom = vp + vt + (mp - mt).powi(2);
    if denom == 0.0 {
        return (0.0, vec![0.0; pred.len()]);
    }
    let num = 2.0 * cov;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d_num = 2.0 * (t - mt) / n;
            let d_den = 2.0 * (p - mp) / n + 2.0 * (mp - mt) / n;
            -(d_num * denom - num * d_den) / (denom * denom)
        })
        .collect();
    (1.0 - num / denom, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentTrainReport {
    /// Mean batch loss per epoch.
    pub loss_curve: Vec<f64>,
    /// Training-set CCC per dimension after each epoch.
    pub ccc_curve: Vec<[f64; 3]>,
}

/// Loss over one batch and `dL/d(outputs)` per example.
fn batch_loss(outputs: &[[f64; 3]], targets: &[[f64; 3]], loss: SentimentLoss) -> (f64, Vec<[f64; 3]>) {
    let b = outputs.len() as f64;
    match loss {
        SentimentLoss::Mse => {
            let mut total = 0.0;
            let grads = outputs
                .iter()
                .zip(targets)
                .map(|(o, t)| {
                    let mut g = [0.0; 3];
                    for k in 0..3 {
                        let e = o[k] - t[k];
                        total += e * e;
                        g[k] = 2.0 * e / b;
                    }
                    g
                })
                .collect();
            (total / b, grads)
        }
        SentimentLoss::Ccc => {
            let mut total = 0.0;
            let mut grads = vec![[0.0; 3]; outputs.len()];
            for k in 0..3 {
                let p: Vec<f64> = outputs.iter().map(|o| o[k]).collect();
                let t: Vec<f64> = targets.iter().map(|o| o[k]).collect();
                let (l, g) = ccc_loss(&p, &t);
                total += l;
                for (dst, gv) in grads.iter_mut().zip(g) {
                    dst[k] = gv;
                }
            }
            (total, grads)
        }
    }
}

/// Mini-batch training with Adam and global-norm clipping. Example order is
/// reshuffled every epoch from `config.seed`.
pub fn train_sentiment(
    model: &mut SentimentModel,
    examples: &[(UtteranceFeatures, SentimentScores)],
    config: &SentimentTrainConfig,
) -> Result<SentimentTrainReport> {
    if examples.is_empty() {
        return Err(Error::Empty("no annotated utterances to train on".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    if config.loss == SentimentLoss::Ccc && config.batch_size < 2 {
        return Err(Error::InvalidArgument("CCC loss needs batches of at least 2".into()));
    }
    for (feats, _) in examples {
        model.check_features(feats)?;
    }
    let mut adam = AdamState::new(model, AdamConfig::with_learning_rate(config.learning_rate));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut report = SentimentTrainReport {
        loss_curve: Vec::with_capacity(config.epochs),
        ccc_curve: Vec::with_capacity(config.epochs),
    };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(config.batch_size) {
            let current: &SentimentModel = model;
            let traces = config
                .execution
                .try_map(batch, |&i| current.forward_trace(&examples[i].0))?;
            let outputs: Vec<[f64; 3]> = traces.iter().map(|t| t.outputs).collect();
            let targets: Vec<[f64; 3]> = batch.iter().map(|&i| examples[i].1.to_array()).collect();
            let (loss, d_out) = batch_loss(&outputs, &targets, config.loss);
            epoch_loss += loss;
            batches += 1;

            let work: Vec<(&SentimentTrace, &[f64; 3])> = traces.iter().zip(&d_out).collect();
            let per_example = config
                .execution
                .try_map(&work, |(tr, d)| current.backward(tr, &d[..]))?;
            let mut grads = model.zeros_like();
            for g in &per_example {
                grads.accumulate(g);
            }
            clip_gradients(&mut grads, config.clip_threshold)?;
            adam.update(model, &grads)?;
        }
        let current: &SentimentModel = model;
        let preds = config
            .execution
            .try_map(examples, |(f, _)| current.forward(f).map(SentimentScores::from_array))?;
        let annotations: Vec<SentimentScores> = examples.iter().map(|e| e.1).collect();
        let agreement = if examples.len() >= 2 {
            evaluate_agreement(&preds, &annotations)?
        } else {
            [f64::NAN; 3]
        };
        let mean_loss = epoch_loss / batches as f64;
        info!(
            "sentiment epoch {}: loss {:.5}, ccc act {:.3} val {:.3} sat {:.3}",
            epoch + 1,
            mean_loss,
            agreement[0],
            agreement[1],
            agreement[2]
        );
        report.loss_curve.push(mean_loss);
        report.ccc_curve.push(agreement);
    }
    Ok(report)
}
