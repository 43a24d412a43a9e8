//! Kernel weighting functions evaluated on a scalar distance.
//!
//! The weight plays the role of the likelihood in the augmented posterior:
//! with `u = rho / epsilon`, each kernel maps the distance between simulated
//! and observed summaries to a log weight, up to an additive constant that
//! is fixed for a given spec. Constants cancel in Metropolis-Hastings ratios
//! at fixed epsilon; the tolerance-augmented sampler re-introduces the
//! epsilon-dependent normalization via [`WeightSpec::log_weight_normalized_at`].

use crate::distance::DistanceMetric;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Uniform,
    Gaussian,
    Epanechnikov,
    Triangle,
    Biweight,
}

impl Kernel {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "uniform" => Ok(Self::Uniform),
            "gaussian" => Ok(Self::Gaussian),
            "epanechnikov" => Ok(Self::Epanechnikov),
            "triangle" => Ok(Self::Triangle),
            "biweight" => Ok(Self::Biweight),
            _ => Err(Error::UnknownName {
                what: "kernel",
                name: name.to_string(),
                expected: "uniform, gaussian, epanechnikov, triangle, biweight",
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Gaussian => "gaussian",
            Self::Epanechnikov => "epanechnikov",
            Self::Triangle => "triangle",
            Self::Biweight => "biweight",
        }
    }

    /// log K(u) up to an additive constant, for u = rho/epsilon >= 0.
    pub fn log_shape(&self, u: f64) -> f64 {
        debug_assert!(u >= 0.0);
        match self {
            Self::Uniform => {
                if u <= 1.0 {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::Gaussian => -0.5 * u * u,
            Self::Epanechnikov => {
                if u < 1.0 {
                    (1.0 - u * u).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::Triangle => {
                if u < 1.0 {
                    (1.0 - u).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Self::Biweight => {
                if u < 1.0 {
                    2.0 * (1.0 - u * u).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Whether the epsilon-dependent normalization `epsilon^-R` is available
    /// (needed when epsilon itself is a sampled coordinate).
    pub fn supports_epsilon_normalization(&self) -> bool {
        matches!(self, Self::Uniform | Self::Gaussian)
    }

    /// Whether the kernel weight is non-zero at u = 1, so a self-scaling
    /// schedule that snaps the tolerance onto the proposed distance can ever
    /// accept. True for the uniform kernel (closed support) and the Gaussian
    /// (unbounded support).
    pub fn supports_self_scaling(&self) -> bool {
        matches!(self, Self::Uniform | Self::Gaussian)
    }
}

/// Kernel family, distance metric and tolerance defining the data-matching
/// weight pi_eps(y | x, theta).
#[derive(Clone, Debug)]
pub struct WeightSpec {
    kernel: Kernel,
    metric: DistanceMetric,
    epsilon: f64,
}

impl WeightSpec {
    pub fn new(kernel: Kernel, metric: DistanceMetric, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(format!(
                "tolerance epsilon must be positive and finite, got {epsilon}"
            )));
        }
        Ok(Self {
            kernel,
            metric,
            epsilon,
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn metric(&self) -> &DistanceMetric {
        &self.metric
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.kernel, self.metric.clone(), epsilon)
    }

    /// Log weight of a distance `rho` at the configured tolerance, up to a
    /// rho-independent additive constant. Negative `rho` is a contract
    /// violation.
    pub fn log_weight(&self, rho: f64) -> f64 {
        self.log_weight_at(self.epsilon, rho)
    }

    /// As [`log_weight`](Self::log_weight) with an explicit tolerance, for
    /// samplers whose tolerance changes step to step.
    pub fn log_weight_at(&self, epsilon: f64, rho: f64) -> f64 {
        assert!(
            rho >= 0.0,
            "negative distance {rho} is a contract violation"
        );
        assert!(epsilon > 0.0, "tolerance must stay positive, got {epsilon}");
        self.kernel.log_shape(rho / epsilon)
    }

    /// Log weight including the `epsilon^-R` normalization, with R the
    /// summary dimension. Only kernels reporting
    /// [`supports_epsilon_normalization`](Kernel::supports_epsilon_normalization)
    /// may be used; callers must validate at configuration time.
    pub fn log_weight_normalized_at(&self, epsilon: f64, rho: f64) -> f64 {
        assert!(
            self.kernel.supports_epsilon_normalization(),
            "kernel {} has no epsilon normalization",
            self.kernel.name()
        );
        let r = self.metric.dim() as f64;
        self.log_weight_at(epsilon, rho) - r * epsilon.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::DistanceMetric;
    use proptest::prelude::*;

    fn spec(kernel: Kernel, epsilon: f64) -> WeightSpec {
        WeightSpec::new(kernel, DistanceMetric::euclidean(1).unwrap(), epsilon).unwrap()
    }

    #[test]
    fn uniform_support() {
        let s = spec(Kernel::Uniform, 1.0);
        assert_eq!(s.log_weight(0.5), 0.0);
        assert_eq!(s.log_weight(1.0), 0.0);
        assert_eq!(s.log_weight(1.5), f64::NEG_INFINITY);
    }

    #[test]
    fn gaussian_value() {
        // u = 2 / (2/sqrt(3)) = sqrt(3), so log weight = -3/2.
        let s = spec(Kernel::Gaussian, 2.0 / 3.0f64.sqrt());
        assert!((s.log_weight(2.0) + 1.5).abs() < 1e-12);
    }

    #[test]
    fn biweight_mode_at_zero() {
        let s = spec(Kernel::Biweight, 1.0);
        assert_eq!(s.log_weight(0.0), 0.0);
        assert!(s.log_weight(0.5) < 0.0);
        assert_eq!(s.log_weight(1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn epsilon_must_be_positive() {
        let metric = DistanceMetric::euclidean(1).unwrap();
        assert!(WeightSpec::new(Kernel::Uniform, metric.clone(), 0.0).is_err());
        assert!(WeightSpec::new(Kernel::Uniform, metric, -1.0).is_err());
    }

    #[test]
    fn negative_rho_panics() {
        let s = spec(Kernel::Gaussian, 1.0);
        assert!(std::panic::catch_unwind(|| s.log_weight(-0.1)).is_err());
    }

    #[test]
    fn normalized_weight_includes_dimension() {
        let metric = DistanceMetric::euclidean(2).unwrap();
        let s = WeightSpec::new(Kernel::Uniform, metric, 1.0).unwrap();
        let a = s.log_weight_normalized_at(2.0, 1.0);
        let b = s.log_weight_normalized_at(1.0, 1.0);
        // Halving epsilon adds R ln 2 = 2 ln 2 to the log normalization.
        assert!((a - (b - 2.0 * 2.0f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn kernel_names_round_trip() {
        for k in [
            Kernel::Uniform,
            Kernel::Gaussian,
            Kernel::Epanechnikov,
            Kernel::Triangle,
            Kernel::Biweight,
        ] {
            assert_eq!(Kernel::parse(k.name()).unwrap(), k);
        }
        assert!(Kernel::parse("box").is_err());
    }

    const ALL: [Kernel; 5] = [
        Kernel::Uniform,
        Kernel::Gaussian,
        Kernel::Epanechnikov,
        Kernel::Triangle,
        Kernel::Biweight,
    ];

    proptest! {
        #[test]
        fn log_weight_non_increasing_in_rho(
            r1 in 0.0f64..5.0,
            r2 in 0.0f64..5.0,
            eps in 0.1f64..4.0,
        ) {
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            for k in ALL {
                let s = spec(k, eps);
                prop_assert!(s.log_weight(lo) >= s.log_weight(hi));
            }
        }

        #[test]
        fn scale_consistency(rho in 0.0f64..3.0, eps in 0.2f64..2.0) {
            // log_weight(eps, rho) and log_weight(2 eps, 2 rho) differ by a
            // rho-independent constant; for these shapes the constant is 0.
            for k in ALL {
                let s = spec(k, eps);
                let a = s.log_weight_at(eps, rho);
                let b = s.log_weight_at(2.0 * eps, 2.0 * rho);
                if a.is_finite() || b.is_finite() {
                    prop_assert!((a - b).abs() <= 1e-12, "{k:?}: {a} vs {b}");
                } else {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn gaussian_and_uniform_spreads_match() {
        // The density exp(log_weight) of the Gaussian kernel at tolerance eps
        // has the same standard deviation as the uniform kernel at
        // eps*sqrt(3); quadrature on [0, inf).
        let eps = 0.8;
        let gaussian = spec(Kernel::Gaussian, eps);
        let uniform = spec(Kernel::Uniform, eps * 3.0f64.sqrt());

        let sd = |s: &WeightSpec, upper: f64| {
            let n = 200_000;
            let h = upper / n as f64;
            let (mut mass, mut second) = (0.0, 0.0);
            for i in 0..=n {
                let rho = i as f64 * h;
                let w = s.log_weight(rho).exp();
                let trapz = if i == 0 || i == n { 0.5 } else { 1.0 };
                mass += trapz * w;
                second += trapz * rho * rho * w;
            }
            (second / mass).sqrt()
        };

        let sd_g = sd(&gaussian, 12.0 * eps);
        let sd_u = sd(&uniform, eps * 3.0f64.sqrt());
        assert!((sd_g - sd_u).abs() < 1e-6, "{sd_g} vs {sd_u}");
        assert!((sd_g - eps).abs() < 1e-6, "{sd_g} vs {eps}");
    }
}
