//! The built-in reference models and their analytic posteriors.

mod exponential;
mod gamma;
mod normal_toy;

pub use exponential::{
    exponential_sd_limit_reference, exponential_true_posterior, ExponentialModel, SummarySelector,
};
pub use gamma::GammaModel;
pub use normal_toy::{toy_lf_posterior_density, NormalToy, ToyPosterior};
