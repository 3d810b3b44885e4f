//! The four compared systems and their building blocks.

pub mod baseline;
pub mod blocks;
pub mod cl;
pub mod config;
pub mod input;
pub mod joint;
pub mod system;
pub mod ti_avc;
pub mod tl;

#[cfg(test)]
pub(crate) mod testing;

pub use baseline::BaselineModel;
pub use blocks::{AudioEncoder, Fusion, VisualEncoder};
pub use cl::{ClBatch, ClExample, ClModel, GroupLayout, InputGroup};
pub use config::{FusionWidths, ModelConfig};
pub use input::{one_hot, Batch, Example};
pub use joint::JointModel;
pub use system::{Sidecar, System, SystemKind};
pub use ti_avc::{extract_features, TiAvc};
pub use tl::{TlModel, TlOutput};
