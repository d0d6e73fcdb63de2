//! The temporal autoencoder: encoder (residual blocks + average pooling),
//! decoder (upsampling + residual blocks + 1x1 projection), training and
//! serialization.

mod config;
pub mod io;
mod tae;
mod train;

pub use config::TaeConfig;
pub use io::{load, save};
pub use tae::{Calibration, ForwardCache, TaeModel, TaeParams, FORMAT_VERSION};
pub use train::{build_loss, evaluate_loss, train, TrainReport};
