//! Theme-informed audio-visual correspondence learning.
//!
//! The crate contains a small neural-network kernel with hand-written
//! backward passes ([`nn`]), the Adam optimizer and training driver
//! ([`optim`]), the four correspondence systems ([`models`]), dataset I/O
//! with a theme-conditional synthetic generator ([`data`]) and evaluation:
//! ROC-AUC, per-theme reports and first-layer contribution analysis
//! ([`eval`]). [`experiment`] ties them into reproducible run directories.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod models;
pub mod nn;
pub mod optim;

pub use error::{Error, Result};
