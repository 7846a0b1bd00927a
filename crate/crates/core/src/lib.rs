//! Data-driven stochastic optimization with side information.
//!
//! Conditional expectations of a loss given observed covariates are
//! estimated by Nadaraya-Watson kernel weighting, optionally after a
//! PCA-based reduction of the covariates. On top of the weighted estimates
//! the crate provides a conditional-standard-deviation regularizer, its
//! worst-case (modified chi-square ambiguity) counterpart with an exact
//! inner solver and dual certificates, finite-sample deviation calculators,
//! and projected-subgradient outer solvers for the portfolio, newsvendor,
//! and energy-commitment problems.

pub mod dro;
pub mod estimator;
pub mod kernel;
pub mod solvers;
pub mod subspace;
