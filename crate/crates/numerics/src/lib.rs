//! Numerical substrate for the interaction models: dense `f64` tensors, a
//! tape-based reverse-mode differentiator, the LSTM cell, Adam, and a
//! finite-difference gradient checker.
//!
//! Everything is single-threaded and deterministic for fixed inputs.

pub mod adam;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod lstm;
pub mod params;
pub mod tensor;

pub use adam::AdamState;
pub use error::{NumericsError, Result};
pub use gradcheck::{gradient_check, BlockReport, GradCheckReport};
pub use graph::{sigmoid, softmax_rows, Graph, NodeId};
pub use lstm::{lstm_cell, LstmParams};
pub use params::{Gradients, ParamId, ParamStore};
pub use tensor::{matmul, Tensor};
