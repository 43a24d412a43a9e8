//! Gamma(k, psi) model: n = 20 observations with shape k and scale psi
//! (mean k psi, variance k psi^2), summarized by the sample mean and
//! standard deviation, flat improper prior on (0, inf)^2.
//!
//! Nests the Exponential model at k = 1, psi = 1/lambda.

use std::sync::Arc;

use rand_distr::{Distribution, Gamma};

use crate::model::{GenerativeModel, ParamVector, SummaryVector};
use crate::rng::RandomStream;
use crate::{Error, Result};

use super::exponential::mean_sd;

#[derive(Clone, Debug)]
pub struct GammaModel {
    n: usize,
    names: Arc<[String]>,
}

impl GammaModel {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(
                "gamma model needs at least 2 observations for the sd".into(),
            ));
        }
        Ok(Self {
            n,
            names: vec!["k".to_string(), "psi".to_string()].into(),
        })
    }

    pub fn n_observations(&self) -> usize {
        self.n
    }
}

impl Default for GammaModel {
    fn default() -> Self {
        Self::new(20).expect("default configuration is valid")
    }
}

impl GenerativeModel for GammaModel {
    fn param_dim(&self) -> usize {
        2
    }

    fn summary_dim(&self) -> usize {
        2
    }

    fn param_names(&self) -> Arc<[String]> {
        self.names.clone()
    }

    fn prior_log_density(&self, theta: &ParamVector) -> f64 {
        let v = theta.values();
        if v[0] > 0.0 && v[1] > 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn simulate_summary(&self, theta: &ParamVector, rng: &mut RandomStream) -> SummaryVector {
        let (k, psi) = (theta.values()[0], theta.values()[1]);
        assert!(
            k > 0.0 && psi > 0.0,
            "gamma shape and scale must be positive, got ({k}, {psi})"
        );
        let gamma = Gamma::new(k, psi).expect("positive shape and scale");
        let (mean, sd) = mean_sd((0..self.n).map(|_| gamma.sample(rng)));
        SummaryVector::new(vec![mean, sd]).expect("finite summaries")
    }
}
