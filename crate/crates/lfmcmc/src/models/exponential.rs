//! Exponential(lambda) model: n = 20 observations summarized by the sample
//! mean and standard deviation, flat improper prior on (0, inf).
//!
//! With observed summaries (4, 1) the true posterior is Gamma(21, 80); the
//! sd-only statistic instead drags the posterior towards Gamma(21, 20), so
//! the two statistics pull the fit in conflicting directions and the model
//! doubles as a worked example of summary-statistic pathologies.

use std::sync::Arc;

use rand::Rng;

use crate::diagnostics::ReferenceDistribution;
use crate::model::{GenerativeModel, ParamVector, SummaryVector};
use crate::rng::RandomStream;
use crate::{Error, Result};

/// Which summaries of the simulated dataset are exposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SummarySelector {
    Mean,
    Sd,
    Both,
}

impl SummarySelector {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "mean" => Ok(Self::Mean),
            "sd" => Ok(Self::Sd),
            "both" => Ok(Self::Both),
            _ => Err(Error::UnknownName {
                what: "summary selector",
                name: name.to_string(),
                expected: "mean, sd, both",
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mean => "mean",
            Self::Sd => "sd",
            Self::Both => "both",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Mean | Self::Sd => 1,
            Self::Both => 2,
        }
    }

    /// Projects a full (mean, sd) pair onto the selected components.
    pub fn select(&self, mean: f64, sd: f64) -> Vec<f64> {
        match self {
            Self::Mean => vec![mean],
            Self::Sd => vec![sd],
            Self::Both => vec![mean, sd],
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExponentialModel {
    n: usize,
    selector: SummarySelector,
    names: Arc<[String]>,
}

impl ExponentialModel {
    pub fn new(n: usize, selector: SummarySelector) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(
                "exponential model needs at least 2 observations for the sd".into(),
            ));
        }
        Ok(Self {
            n,
            selector,
            names: vec!["lambda".to_string()].into(),
        })
    }

    pub fn selector(&self) -> SummarySelector {
        self.selector
    }

    pub fn n_observations(&self) -> usize {
        self.n
    }
}

impl Default for ExponentialModel {
    fn default() -> Self {
        Self::new(20, SummarySelector::Both).expect("default configuration is valid")
    }
}

impl GenerativeModel for ExponentialModel {
    fn param_dim(&self) -> usize {
        1
    }

    fn summary_dim(&self) -> usize {
        self.selector.dim()
    }

    fn param_names(&self) -> Arc<[String]> {
        self.names.clone()
    }

    fn prior_log_density(&self, theta: &ParamVector) -> f64 {
        if theta.values()[0] > 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn simulate_summary(&self, theta: &ParamVector, rng: &mut RandomStream) -> SummaryVector {
        let lambda = theta.values()[0];
        assert!(
            lambda > 0.0,
            "exponential rate must be positive, got {lambda}"
        );
        let (mean, sd) = mean_sd((0..self.n).map(|_| {
            // Inverse CDF: -ln(1 - u) / lambda.
            let u: f64 = rng.random();
            -(1.0 - u).ln() / lambda
        }));
        SummaryVector::new(self.selector.select(mean, sd)).expect("finite summaries")
    }
}

/// Sample mean and standard deviation (denominator n - 1).
pub(crate) fn mean_sd(draws: impl Iterator<Item = f64>) -> (f64, f64) {
    let xs: Vec<f64> = draws.collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// True posterior under the flat prior with T(y) = (4, 1) and n = 20:
/// Gamma(21, 80), mean 21/80.
pub fn exponential_true_posterior() -> ReferenceDistribution {
    ReferenceDistribution::gamma(21.0, 80.0).expect("valid shape and rate")
}

/// Approximate limiting posterior when only the sample standard deviation
/// s_y = 1 is matched: Gamma(21, 20), an Exponential fit at lambda = 1.
pub fn exponential_sd_limit_reference() -> ReferenceDistribution {
    ReferenceDistribution::gamma(21.0, 20.0).expect("valid shape and rate")
}
