//! Attention encoder-decoder over the interaction series of a radial
//! cluster: symbolic heads predict dictionary indices, the metric head
//! predicts coordinates.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod network;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::ModelConfig;
pub use error::{ModelError, Result};
pub use network::{Attention, Model, Prediction};
pub use train::{fit, fit_samples, fit_with, mean_loss, EpochStats, History};
