//! The distributed pipeline: toy model, balanced partitioning, stage
//! workers over the simulated network, and trace collection.

pub mod config;
pub mod data;
pub mod model;
pub mod partition;
pub mod rng;
pub mod sim;
pub mod trace;

pub use config::{
    AdaptConfig, ChannelConfig, ClipMethod, ModelConfig, QuantConfig, QuantMode, RunConfig,
    TrafficConfig,
};
pub use data::{generate_dataset, DatasetConfig, Microbatch};
pub use model::{build_model, gate, Block, ModelDims, ToyModel};
pub use partition::{partition_even, Shard};
pub use rng::SplitRng;
pub use sim::{argmax_rows, forward_microbatch, quantize_activation, run_pipeline};
pub use trace::{AgreementRecord, MicrobatchRecord, NetEvent, RunTrace, WindowRecord};

use crate::error::{Error, Result};

/// Fraction of per-image predictions on which two runs agree.
pub fn top1_agreement(a: &[Vec<u32>], b: &[Vec<u32>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let mut total = 0usize;
    let mut same = 0usize;
    for (ma, mb) in a.iter().zip(b) {
        if ma.len() != mb.len() {
            return Err(Error::LengthMismatch(ma.len(), mb.len()));
        }
        total += ma.len();
        same += ma.iter().zip(mb).filter(|(x, y)| x == y).count();
    }
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(same as f64 / total as f64)
}
