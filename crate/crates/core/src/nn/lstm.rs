//! LSTM layer with sigmoid gates and tanh candidate/output, zero initial
//! state, and exact backpropagation through time.
//!
//! Gate blocks are laid out `[input, forget, candidate, output]` along the
//! first axis of every weight tensor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::{matvec_acc, matvec_t_acc, outer_acc, Matrix, Parameters, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// `4H x D`
    pub w_input: Tensor,
    /// `4H x H`
    pub w_hidden: Tensor,
    /// `4H`
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    inputs: Matrix,
    /// Activated gates per step, `T x 4H`.
    gates: Vec<f64>,
    /// Cell states per step, `T x H`.
    cells: Vec<f64>,
    hidden: Matrix,
}

impl LstmTrace {
    pub fn hidden(&self) -> &Matrix {
        &self.hidden
    }

    pub fn final_hidden(&self) -> &[f64] {
        self.hidden.row(self.hidden.rows() - 1)
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Lstm {
    /// All-zero parameters.
    pub fn zeros(prefix: &str, input_dim: usize, hidden_dim: usize) -> Self {
        let g = 4 * hidden_dim;
        Lstm {
            input_dim,
            hidden_dim,
            w_input: Tensor::zeros(format!("{prefix}.w_input"), &[g, input_dim]),
            w_hidden: Tensor::zeros(format!("{prefix}.w_hidden"), &[g, hidden_dim]),
            bias: Tensor::zeros(format!("{prefix}.bias"), &[g]),
        }
    }

    /// Uniform(-1/sqrt(H), 1/sqrt(H)) weights, forget-gate bias 1, other biases 0.
    pub fn init<R: Rng>(prefix: &str, input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let mut lstm = Lstm::zeros(prefix, input_dim, hidden_dim);
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        for w in lstm
            .w_input
            .data
            .iter_mut()
            .chain(lstm.w_hidden.data.iter_mut())
        {
            *w = rng.random_range(-bound..bound);
        }
        lstm.bias.data[hidden_dim..2 * hidden_dim].fill(1.0);
        lstm
    }

    fn check_input(&self, seq: &Matrix) -> Result<()> {
        Error::check_dim("lstm input width", self.input_dim, seq.cols())?;
        if seq.rows() == 0 {
            return Err(Error::Empty("lstm input sequence has no steps".into()));
        }
        Ok(())
    }

    /// One cell update. `gates` receives the activated gate values.
    #[inline]
    fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64], gates: &mut [f64], c: &mut [f64], h: &mut [f64]) {
        let hd = self.hidden_dim;
        gates.copy_from_slice(&self.bias.data);
        matvec_acc(&self.w_input.data, x, gates);
        matvec_acc(&self.w_hidden.data, h_prev, gates);
        for k in 0..hd {
            let i = sigmoid(gates[k]);
            let f = sigmoid(gates[hd + k]);
            let g = gates[2 * hd + k].tanh();
            let o = sigmoid(gates[3 * hd + k]);
            gates[k] = i;
            gates[hd + k] = f;
            gates[2 * hd + k] = g;
            gates[3 * hd + k] = o;
            c[k] = f * c_prev[k] + i * g;
            h[k] = o * c[k].tanh();
        }
    }

    /// Hidden sequence (`T x H`) and final state.
    pub fn forward(&self, seq: &Matrix) -> Result<(Matrix, LstmState)> {
        self.check_input(seq)?;
        let hd = self.hidden_dim;
        let mut hidden = Matrix::zeros(seq.rows(), hd);
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut h_next = vec![0.0; hd];
        let mut c_next = vec![0.0; hd];
        let mut gates = vec![0.0; 4 * hd];
        for t in 0..seq.rows() {
            self.step(seq.row(t), &h, &c, &mut gates, &mut c_next, &mut h_next);
            std::mem::swap(&mut h, &mut h_next);
            std::mem::swap(&mut c, &mut c_next);
            hidden.row_mut(t).copy_from_slice(&h);
        }
        Ok((hidden, LstmState { hidden: h, cell: c }))
    }

    pub fn forward_trace(&self, seq: &Matrix) -> Result<LstmTrace> {
        self.check_input(seq)?;
        let hd = self.hidden_dim;
        let steps = seq.rows();
        let mut gates = vec![0.0; steps * 4 * hd];
        let mut cells = vec![0.0; steps * hd];
        let mut hidden = Matrix::zeros(steps, hd);
        let zero = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        for t in 0..steps {
            let (c_prev, c_cur) = if t == 0 {
                (&zero[..], &mut cells[..hd])
            } else {
                let (before, after) = cells.split_at_mut(t * hd);
                (&before[(t - 1) * hd..], &mut after[..hd])
            };
            let g = &mut gates[t * 4 * hd..(t + 1) * 4 * hd];
            let h_prev = if t == 0 { zero.clone() } else { hidden.row(t - 1).to_vec() };
            self.step(seq.row(t), &h_prev, c_prev, g, c_cur, &mut h);
            hidden.row_mut(t).copy_from_slice(&h);
        }
        Ok(LstmTrace {
            inputs: seq.clone(),
            gates,
            cells,
            hidden,
        })
    }

    /// Gradients of a scalar loss given `d_hidden[t] = dL/dh_t` for every
    /// step. Returns parameter gradients (same layout as `self`) and
    /// `dL/dx_t` per step.
    pub fn backward(&self, trace: &LstmTrace, d_hidden: &Matrix) -> Result<(Lstm, Matrix)> {
        let hd = self.hidden_dim;
        let steps = trace.hidden.rows();
        Error::check_dim("lstm output-gradient steps", steps, d_hidden.rows())?;
        Error::check_dim("lstm output-gradient width", hd, d_hidden.cols())?;

        let mut grads = self.zeros_like();
        let mut d_input = Matrix::zeros(steps, self.input_dim);
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut dz = vec![0.0; 4 * hd];
        let zero = vec![0.0; hd];

        for t in (0..steps).rev() {
            let g = &trace.gates[t * 4 * hd..(t + 1) * 4 * hd];
            let c = &trace.cells[t * hd..(t + 1) * hd];
            let c_prev = if t == 0 { &zero[..] } else { &trace.cells[(t - 1) * hd..t * hd] };
            let h_prev = if t == 0 { &zero[..] } else { trace.hidden.row(t - 1) };
            let dh_out = d_hidden.row(t);
            for k in 0..hd {
                let (i, f, cand, o) = (g[k], g[hd + k], g[2 * hd + k], g[3 * hd + k]);
                let dh = dh_out[k] + dh_next[k];
                let tc = c[k].tanh();
                let d_o = dh * tc;
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                dz[k] = dc * cand * i * (1.0 - i);
                dz[hd + k] = dc * c_prev[k] * f * (1.0 - f);
                dz[2 * hd + k] = dc * i * (1.0 - cand * cand);
                dz[3 * hd + k] = d_o * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            outer_acc(&mut grads.w_input.data, &dz, trace.inputs.row(t));
            outer_acc(&mut grads.w_hidden.data, &dz, h_prev);
            grads.bias.data.iter_mut().zip(&dz).for_each(|(b, d)| *b += d);
            matvec_t_acc(&self.w_input.data, &dz, d_input.row_mut(t));
            dh_next.fill(0.0);
            matvec_t_acc(&self.w_hidden.data, &dz, &mut dh_next);
        }
        Ok((grads, d_input))
    }

    pub fn zeros_like(&self) -> Lstm {
        Lstm {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            w_input: self.w_input.zeros_like(),
            w_hidden: self.w_hidden.zeros_like(),
            bias: self.bias.zeros_like(),
        }
    }
}

impl Parameters for Lstm {
    fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.w_input, &self.w_hidden, &self.bias]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }
}

/// Bidirectional pass: row `t` is `[h_fwd(t) | h_bwd(t)]`, where the backward
/// layer reads the sequence in reverse. Returns the final states of both
/// directions (the backward one corresponds to step 0).
pub fn blstm_forward(fwd: &Lstm, bwd: &Lstm, seq: &Matrix) -> Result<(Matrix, LstmState, LstmState)> {
    let (hf, sf) = fwd.forward(seq)?;
    let (hb_rev, sb) = bwd.forward(&seq.reversed())?;
    let steps = seq.rows();
    let (df, db) = (fwd.hidden_dim, bwd.hidden_dim);
    let mut out = Matrix::zeros(steps, df + db);
    for t in 0..steps {
        let row = out.row_mut(t);
        row[..df].copy_from_slice(hf.row(t));
        row[df..].copy_from_slice(hb_rev.row(steps - 1 - t));
    }
    Ok((out, sf, sb))
}
