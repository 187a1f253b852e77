//! Implied-prior analysis for Bayesian latent-variable models.
//!
//! Declared priors on individual parameters are rarely the priors a model
//! actually uses. Positive-definiteness constraints on correlation matrices,
//! sign indeterminacy of factor loadings and ordering constraints on
//! thresholds all reshape them. This crate samples, estimates and corrects
//! for those implied priors.

pub mod cfa;
pub mod chol;
pub mod density;
pub mod error;
pub mod linalg;
pub mod pattern;
pub mod prior;
pub mod reproduce;
pub mod rng;
pub mod savage_dickey;
pub mod sbc;
pub mod stats;
pub mod svg;
pub mod table;
pub mod threshold;

pub use error::{Error, Result};
