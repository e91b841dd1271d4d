//! Debiased implicit-feedback recommendation with multi-cause substitute
//! confounders.
//!
//! The crate covers the whole experimental pipeline: rating ingestion and
//! the biased/unbiased split protocol ([`dataio`]), a synthetic generator
//! with known confounders ([`synth`]), the numerical substrate
//! ([`numkit`]), the confounder-aware recommender ([`mcdcf`]), the MF and
//! IPS baselines ([`baselines`]) and top-K evaluation ([`eval`]).

pub mod baselines;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod mcdcf;
pub mod numkit;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
