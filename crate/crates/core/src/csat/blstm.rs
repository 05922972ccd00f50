//! Bidirectional LSTM over the per-utterance score sequence, with a single
//! linear output.
//!
//! Training follows the usual recipe for variable-length sequences: sort by
//! length, cut into mini-batches, zero-pad each batch to its longest member.
//! Padded steps are masked out: each direction only runs over the true
//! length, so a prediction never depends on what it was batched with.

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CSAT_MAX, CSAT_MIN};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nn::{clip_gradients, AdamConfig, AdamState, Checkpoint, Dense, Lstm, LstmTrace, Matrix, Parameters, Tensor};

pub const CHECKPOINT_KIND: &str = "blstm";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    /// `[forward state at the last true step | backward state at step 0]`.
    #[default]
    Final,
    /// Mean of the bidirectional outputs over the true steps.
    MeanPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlstmConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub readout: Readout,
}

impl Default for BlstmConfig {
    fn default() -> Self {
        BlstmConfig {
            input_dim: 3,
            hidden_dim: 20,
            readout: Readout::Final,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlstmTrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub clip_threshold: f64,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for BlstmTrainConfig {
    fn default() -> Self {
        BlstmTrainConfig {
            learning_rate: 1e-3,
            batch_size: 10,
            epochs: 30,
            clip_threshold: 1.0,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlstmRegressor {
    pub config: BlstmConfig,
    pub forward: Lstm,
    pub backward: Lstm,
    pub head: Dense,
}

pub struct BlstmTrace {
    forward: LstmTrace,
    /// Trace over the reversed sequence.
    backward: LstmTrace,
    readout: Vec<f64>,
    pub output: f64,
}

impl BlstmRegressor {
    pub fn zeros(config: &BlstmConfig) -> Result<Self> {
        if config.input_dim == 0 || config.hidden_dim == 0 {
            return Err(Error::InvalidArgument("blstm input and hidden sizes must be positive".into()));
        }
        let h = config.hidden_dim;
        Ok(BlstmRegressor {
            config: *config,
            forward: Lstm::zeros("blstm.forward", config.input_dim, h),
            backward: Lstm::zeros("blstm.backward", config.input_dim, h),
            head: Dense::zeros("blstm.head", 2 * h, 1),
        })
    }

    /// Random weights; the output bias starts at `output_bias` (typically the
    /// mean training label).
    pub fn init(config: &BlstmConfig, seed: u64, output_bias: f64) -> Result<Self> {
        let mut m = BlstmRegressor::zeros(config)?;
        let mut lstm_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut head_rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
        let h = config.hidden_dim;
        m.forward = Lstm::init("blstm.forward", config.input_dim, h, &mut lstm_rng);
        m.backward = Lstm::init("blstm.backward", config.input_dim, h, &mut lstm_rng);
        m.head = Dense::init("blstm.head", 2 * h, 1, &mut head_rng);
        m.head.bias.data[0] = output_bias;
        Ok(m)
    }

    fn check(&self, seq: &Matrix) -> Result<()> {
        Error::check_dim("blstm input width", self.config.input_dim, seq.cols())?;
        if seq.rows() == 0 {
            return Err(Error::Empty("empty score sequence".into()));
        }
        Ok(())
    }

    fn readout(&self, fwd: &Matrix, bwd_rev: &Matrix) -> Vec<f64> {
        let h = self.config.hidden_dim;
        let steps = fwd.rows();
        let mut z = Vec::with_capacity(2 * h);
        match self.config.readout {
            Readout::Final => {
                z.extend_from_slice(fwd.row(steps - 1));
                z.extend_from_slice(bwd_rev.row(steps - 1));
            }
            Readout::MeanPool => {
                for m in [fwd, bwd_rev] {
                    let mut acc = vec![0.0; h];
                    for row in m.iter_rows() {
                        acc.iter_mut().zip(row).for_each(|(a, v)| *a += v);
                    }
                    z.extend(acc.into_iter().map(|v| v / steps as f64));
                }
            }
        }
        z
    }

    /// Unclamped output for one unpadded sequence.
    pub fn raw_output(&self, seq: &Matrix) -> Result<f64> {
        self.check(seq)?;
        let (hf, _) = self.forward.forward(seq)?;
        let (hb, _) = self.backward.forward(&seq.reversed())?;
        Ok(self.head.forward(&self.readout(&hf, &hb))?[0])
    }

    /// CSAT estimate clamped to the rating scale.
    pub fn predict(&self, seq: &Matrix) -> Result<f64> {
        Ok(self.raw_output(seq)?.clamp(CSAT_MIN, CSAT_MAX))
    }

    /// Predictions for every member of a padded batch, in batch order.
    pub fn predict_batch(&self, batch: &PaddedBatch) -> Result<Vec<f64>> {
        (0..batch.len()).map(|i| self.predict(&batch.unpadded(i))).collect()
    }

    pub fn trace(&self, seq: &Matrix) -> Result<BlstmTrace> {
        self.check(seq)?;
        let forward = self.forward.forward_trace(seq)?;
        let backward = self.backward.forward_trace(&seq.reversed())?;
        let readout = self.readout(forward.hidden(), backward.hidden());
        let output = self.head.forward(&readout)?[0];
        Ok(BlstmTrace {
            forward,
            backward,
            readout,
            output,
        })
    }

    /// Parameter gradients given `dL/d(output)`.
    pub fn gradients(&self, trace: &BlstmTrace, d_output: f64) -> Result<BlstmRegressor> {
        let h = self.config.hidden_dim;
        let mut grads = self.zeros_like();
        let dz = self.head.backward(&trace.readout, &[d_output], &mut grads.head);
        let steps = trace.forward.hidden().rows();
        let mut d_fwd = Matrix::zeros(steps, h);
        let mut d_bwd = Matrix::zeros(steps, h);
        match self.config.readout {
            Readout::Final => {
                d_fwd.row_mut(steps - 1).copy_from_slice(&dz[..h]);
                d_bwd.row_mut(steps - 1).copy_from_slice(&dz[h..]);
            }
            Readout::MeanPool => {
                let inv = 1.0 / steps as f64;
                for t in 0..steps {
                    d_fwd.row_mut(t).iter_mut().zip(&dz[..h]).for_each(|(d, g)| *d = g * inv);
                    d_bwd.row_mut(t).iter_mut().zip(&dz[h..]).for_each(|(d, g)| *d = g * inv);
                }
            }
        }
        grads.forward = self.forward.backward(&trace.forward, &d_fwd)?.0;
        grads.backward = self.backward.backward(&trace.backward, &d_bwd)?.0;
        Ok(grads)
    }

    pub fn zeros_like(&self) -> BlstmRegressor {
        BlstmRegressor {
            config: self.config,
            forward: self.forward.zeros_like(),
            backward: self.backward.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            config: serde_json::to_value(self.config).expect("blstm config serializes"),
            tensors: self.tensors().into_iter().cloned().collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        if ck.kind != CHECKPOINT_KIND {
            return Err(Error::InvalidArgument(format!("checkpoint kind `{}` is not a blstm model", ck.kind)));
        }
        let config: BlstmConfig = serde_json::from_value(ck.config.clone())
            .map_err(|e| Error::InvalidArgument(format!("blstm config: {e}")))?;
        let mut m = BlstmRegressor::zeros(&config)?;
        m.load_tensors(&ck.tensors)?;
        Ok(m)
    }
}

impl Parameters for BlstmRegressor {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut v = self.forward.tensors();
        v.extend(self.backward.tensors());
        v.extend(self.head.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = self.forward.tensors_mut();
        v.extend(self.backward.tensors_mut());
        v.extend(self.head.tensors_mut());
        v
    }
}

/// Indices grouped into batches of at most `batch_size`, in ascending length
/// order (ties keep input order).
pub fn length_sorted_batches(lengths: &[usize], batch_size: usize) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by_key(|&i| lengths[i]);
    Ok(order.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

/// Sequences zero-padded to a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedBatch {
    /// Each `max_len x dim`.
    pub inputs: Vec<Matrix>,
    pub lengths: Vec<usize>,
}

impl PaddedBatch {
    pub fn new(seqs: &[&Matrix]) -> Result<Self> {
        let first = seqs.first().ok_or_else(|| Error::Empty("empty batch".into()))?;
        let dim = first.cols();
        let max_len = seqs.iter().map(|s| s.rows()).max().unwrap_or(0);
        let mut inputs = Vec::with_capacity(seqs.len());
        for s in seqs {
            Error::check_dim("batch member width", dim, s.cols())?;
            if s.rows() == 0 {
                return Err(Error::Empty("empty sequence in batch".into()));
            }
            let mut m = Matrix::zeros(max_len, dim);
            for t in 0..s.rows() {
                m.row_mut(t).copy_from_slice(s.row(t));
            }
            inputs.push(m);
        }
        Ok(PaddedBatch {
            inputs,
            lengths: seqs.iter().map(|s| s.rows()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }

    /// Member `i` restricted to its true length.
    pub fn unpadded(&self, i: usize) -> Matrix {
        self.inputs[i].head(self.lengths[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlstmTrainReport {
    /// Mean batch MSE per epoch.
    pub loss_curve: Vec<f64>,
}

/// Mini-batch MSE training with Adam and global-norm clipping. Batches are
/// formed once from the length-sorted data; their order is reshuffled every
/// epoch from `config.seed`.
pub fn train_blstm(
    model: &mut BlstmRegressor,
    sequences: &[Matrix],
    labels: &[f64],
    config: &BlstmTrainConfig,
) -> Result<BlstmTrainReport> {
    Error::check_dim("blstm labels", sequences.len(), labels.len())?;
    if sequences.is_empty() {
        return Err(Error::Empty("no conversations to train on".into()));
    }
    for s in sequences {
        model.check(s)?;
    }
    let lengths: Vec<usize> = sequences.iter().map(Matrix::rows).collect();
    let mut batches = Vec::new();
    for idx in length_sorted_batches(&lengths, config.batch_size)? {
        let members: Vec<&Matrix> = idx.iter().map(|&i| &sequences[i]).collect();
        batches.push((PaddedBatch::new(&members)?, idx));
    }
    let mut adam = AdamState::new(model, AdamConfig::with_learning_rate(config.learning_rate));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..batches.len()).collect();
    let mut report = BlstmTrainReport {
        loss_curve: Vec::with_capacity(config.epochs),
    };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &b in &order {
            let (batch, idx) = &batches[b];
            let current: &BlstmRegressor = model;
            let members: Vec<usize> = (0..batch.len()).collect();
            let n = batch.len() as f64;
            let per_example = config.execution.try_map(&members, |&i| {
                let tr = current.trace(&batch.unpadded(i))?;
                let err = tr.output - labels[idx[i]];
                Ok::<_, Error>((err * err, current.gradients(&tr, 2.0 * err / n)?))
            })?;
            let mut grads = model.zeros_like();
            let mut loss = 0.0;
            for (l, g) in &per_example {
                loss += l;
                grads.accumulate(g);
            }
            total += loss / n;
            clip_gradients(&mut grads, config.clip_threshold)?;
            adam.update(model, &grads)?;
        }
        let mean = total / batches.len() as f64;
        info!("blstm epoch {}: loss {mean:.5}", epoch + 1);
        report.loss_curve.push(mean);
    }
    Ok(report)
}

/// Fresh model (output bias at the mean label) trained on `sequences`.
pub fn train_blstm_csat(
    sequences: &[Matrix],
    labels: &[f64],
    model_config: &BlstmConfig,
    train_config: &BlstmTrainConfig,
) -> Result<(BlstmRegressor, BlstmTrainReport)> {
    if labels.is_empty() {
        return Err(Error::Empty("no conversations to train on".into()));
    }
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let mut model = BlstmRegressor::init(model_config, train_config.seed, mean)?;
    let report = train_blstm(&mut model, sequences, labels, train_config)?;
    Ok((model, report))
}
