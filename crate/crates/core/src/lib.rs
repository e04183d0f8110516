//! Object-centric video prediction laboratory.
//!
//! The pipeline: [`synthdata`] renders bouncing-object clips with panoptic
//! masks, [`decompose`] splits frames into per-slot masked instances,
//! [`oaae`] encodes each instance with a class-specific quantized encoder and
//! reconstructs the frame with a joint decoder, [`predictor`] models token
//! dynamics with factored spatial/temporal attention (optionally crossing
//! slots), and [`metrics`] scores predictions.

pub mod checkpoint;
pub mod decompose;
pub mod error;
pub mod exec;
pub mod kv;
pub mod metrics;
pub mod nn;
pub mod oaae;
pub mod predictor;
pub mod synthdata;

pub use error::{Error, Result};
pub use exec::Execution;

/// Tensor element type, re-exported so callers need not depend on the tensor crate.
pub use candle_core::DType;
