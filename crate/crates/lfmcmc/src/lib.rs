//! Likelihood-free (approximate Bayesian computation) MCMC toolkit.
//!
//! Bayesian samplers for models whose likelihood cannot be evaluated but can
//! be simulated: parameter proposals are weighted by how closely summary
//! statistics of simulated datasets match the observed ones. The crate
//! provides
//!
//! - the generative-model and proposal contracts ([`model`]),
//! - summary-space distances with pilot covariance estimation ([`distance`]),
//! - kernel weighting functions evaluated on a scalar distance ([`kernel`]),
//! - tolerance schedules including a self-scaling burn-in rule ([`schedule`]),
//! - rejection, LF-MCMC, S-replicate, tolerance-augmented and
//!   error-distribution-augmented samplers ([`sampler`]),
//! - accuracy and mixing diagnostics ([`diagnostics`]), and
//! - three built-in reference models with analytic posteriors ([`models`]).
//!
//! All randomness flows through [`rng::RandomStream`], a seeded counter-based
//! stream: identical seeds and stream ids replay runs bit-exactly.

pub mod diagnostics;
pub mod distance;
pub mod kernel;
pub mod model;
pub mod models;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod special;

mod error;

pub use error::{Error, Result};
