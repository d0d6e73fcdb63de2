//! Electric-vehicle detection behind household smart meters.
//!
//! A temporal convolutional autoencoder is trained on weekly windows of
//! non-EV consumption only. Consumers whose windows reconstruct poorly,
//! measured by the summed squared window errors, are flagged as EV owners.
//!
//! Modules, bottom-up: [`nn`] (layers, Adam, gradient checking),
//! [`losses`], [`model`], [`pipeline`], [`synth`], [`detect`] and [`eval`].

mod batch;
pub mod detect;
pub mod diagnostics;
mod error;
pub mod eval;
pub mod losses;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod synth;

pub use batch::{SequenceBatch, WindowOrigin};
pub use error::{Error, ErrorClass, Result};
