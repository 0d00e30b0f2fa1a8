//! Minimal reverse-mode differentiation in double precision: a tape
//! [`Graph`] of tensor ops, LSTM building blocks, Adam, a finite-difference
//! checker and named parameter sets with JSON checkpoints.

mod adam;
mod gradcheck;
mod graph;
mod lstm;
mod params;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{grad_check, FULL_CHECK_LIMIT, SAMPLED_COORDS};
pub use graph::{argmax, softmax, Graph, Var};
pub use lstm::{bilstm_sequence, init_lstm, lstm_cell, lstm_sequence, LstmVars};
pub use params::{Bound, ParamSet, CHECKPOINT_FORMAT};
pub use tensor::Tensor;
