//! Synthetic experiments, cross-validation, deterministic data generation,
//! CSV IO, and verification oracles around `ctxopt-core`.

pub mod config;
pub mod cv;
pub mod error;
pub mod experiments;
pub mod gen;
pub mod io;
pub mod oracle;
pub mod rng;
