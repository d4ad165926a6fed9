//! Remaining-useful-life estimation for C-MAPSS turbofan engines.
//!
//! The pipeline parses the FD001 text files ([`dataset`]), smooths, trims,
//! scales and windows the sensor channels ([`preprocess`]), trains a
//! from-scratch MLP or LSTM regressor with Adam ([`models`], [`optim`],
//! [`train`]) and scores the last cycle of each test engine.
//!
//! All randomness comes from [`numerics::SeededRng`] (ChaCha8 with separate
//! streams for the split, initialisation and shuffling), so a seed and a
//! config fully determine every artifact. Batch gradients and per-engine
//! preprocessing run on rayon when the `parallel` feature is on; reductions
//! are sequential in sample order, so results are the same either way.

pub mod artifacts;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod gradcheck;
pub mod invariants;
pub mod models;
pub mod numerics;
pub mod optim;
pub mod pipeline;
pub mod preprocess;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
pub use exec::Execution;
