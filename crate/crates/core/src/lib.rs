//! Multi-channel spatial-temporal transformer for traffic flow forecasting.
//!
//! The crate is layered bottom-up:
//!
//! - [`tensor`] and [`autograd`]: dense `f64` arrays and a tape-based
//!   reverse-mode differentiation engine.
//! - [`graph`], [`spatial`], [`temporal`]: the adjacency matrices, the mixed
//!   adaptive/fixed graph convolution, and the positional-encoded temporal
//!   attention block.
//! - [`model`]: channel pipelines, gated fusion, prediction head,
//!   parameter storage and checkpoints.
//! - [`data`], [`train`], [`synth`]: ingestion and windowing, the training
//!   and evaluation loop, and a synthetic dataset generator.

pub mod autograd;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod model;
pub mod spatial;
pub mod synth;
pub mod temporal;
pub mod train;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
