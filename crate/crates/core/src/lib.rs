//! Deterministic pipeline-parallel inference simulator with adaptive
//! activation quantization.
//!
//! The crate is organized around five subsystems:
//!
//! - [`quant`]: uniform quantization kernels, analytic clipping, and the
//!   directed-search scale refinement.
//! - [`wire`]: the bit-exact frame format carrying quantized activations.
//! - [`netsim`]: virtual-time token-bucket channels with scripted bandwidth.
//! - [`controller`]: windowed monitoring and the adaptive bitwidth update.
//! - [`pipeline`]: the staged toy model, the event-driven simulation driver,
//!   and trace collection.

pub mod controller;
pub mod error;
pub mod netsim;
pub mod pipeline;
pub mod quant;
pub mod wire;

pub use error::{Error, Result};
pub use quant::Bitwidth;
