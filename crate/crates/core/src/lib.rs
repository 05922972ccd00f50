//! Conversation-level customer satisfaction (CSAT) estimation.
//!
//! Utterances are scored for activation, valence and satisfaction by a
//! recurrent sentiment model over log mel-filterbank and word-vector
//! features; a ν-SVR over aggregated scores or a BLSTM over the score
//! sequence then predicts the conversation's 1 to 5 rating.

pub mod audio;
pub mod corpus;
pub mod crossval;
pub mod csat;
pub mod error;
pub mod exec;
pub mod lexical;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod sentiment;
pub mod synthetic;

pub use error::{Error, Result};
pub use exec::Execution;
