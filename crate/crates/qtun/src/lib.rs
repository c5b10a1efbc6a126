//! Quantum-tunneling kinetics toolkit.
//!
//! Generates thermal rate data from exactly-solvable 1D barrier models,
//! augments rate curves with three-parameter Arrhenius fits, trains
//! from-scratch regression ensembles on the (KIE, T, k_Tun, eta) -> kappa
//! mapping, evaluates them under k-fold and leave-one-system-out protocols,
//! attributes predictions with exact Shapley values, and emits the tunneling
//! phase diagram.

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod explain;
pub mod kinetics;
pub mod models;
pub mod numeric;
pub mod phase;
pub mod physics;
pub mod pipeline;

pub use error::{Error, Result};
