//! Simulation and security engine for relativistic quantum bit commitment.
//!
//! Six parties (Alice with agents `A0`/`A1`, Bob with agents `B0`/`B1`) run a
//! BB84-style commitment over a planar layout. The crate covers:
//!
//! * [`geometry`]: light-cone bounds on the latest commitment time.
//! * [`photonic`]: weak-coherent-pulse source and threshold detectors.
//! * [`security`]: binding bound, finite-statistics estimation and Bob's verdict.
//! * [`protocol`]: deterministic discrete-event execution of honest runs.
//! * [`adversary`]: explicit cheating strategies for both parties.
//! * [`config`] and [`report`]: configuration files and reports used by the CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod config;
pub mod error;
pub mod geometry;
mod numeric;
pub mod photonic;
pub mod protocol;
pub mod report;
pub mod rng;
pub mod security;
pub mod units;

pub use error::{Error, Result};
