//! Self-contained numerics for the recurrent models: LSTM and dense layers
//! with hand-derived backward passes, global-norm clipping, Adam, and the
//! checkpoint container.

pub mod checkpoint;
pub mod dense;
pub mod lstm;
pub mod optim;
pub mod tensor;

pub use checkpoint::Checkpoint;
pub use dense::Dense;
pub use lstm::{blstm_forward, Lstm, LstmState, LstmTrace};
pub use optim::{clip_gradients, AdamConfig, AdamState};
pub use tensor::{Matrix, Parameters, Tensor};
