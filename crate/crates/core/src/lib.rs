//! Visually aligned word embeddings.
//!
//! Class-name embeddings are mapped by a small normalized MLP so that their
//! nearest-neighbor structure follows the neighborhoods of the classes'
//! mean visual features. Training triplets come from disagreements between
//! the two neighborhood graphs. The zero-shot evaluators in [`zsl`] measure
//! what the re-alignment buys.

pub mod alignnet;
pub mod cli;
pub mod dataio;
pub mod error;
pub mod miner;
pub mod neighborhood;
pub mod numerics;
pub mod zsl;

pub use error::{Result, VaweError};
