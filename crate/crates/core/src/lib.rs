//! Simulator and estimator for biased-basis BB84 with randomly varied
//! detector efficiency, a countermeasure against detector blinding.
//!
//! Bob picks one of two efficiency levels per round. A blinding attack whose
//! response does not depend on that level shifts the two conditional
//! detection rates away from the ratio an honest lossy channel produces.
//! The estimator `gamma` measures that shift and feeds a phase-error bound
//! and the secret key fraction.
//!
//! Module map:
//! - [`protocol`]: bases, polarizations, outcomes, public parameters
//! - [`rng`]: per-(round, consumer) random substreams
//! - [`parties`]: Alice's source, Bob's settings and detector
//! - [`adversary`]: Eve's blind / quantum / block mixture
//! - [`engine`]: round loop, transcript records, tallies, record logs
//! - [`analysis`]: gamma, phase-error bound, key fraction, abort decision
//! - [`config`], [`cli`]: run configuration and command-line front end

pub mod adversary;
pub mod analysis;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod parties;
pub mod protocol;
pub mod rng;

pub use error::{Error, Result};
