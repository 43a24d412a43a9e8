//! Analytic toy model: posterior N(0,1) realized likelihood-free.
//!
//! The simulator draws the sufficient statistic directly, `xbar ~ N(theta, 1)`,
//! with observed data y = 0, so the likelihood-free posterior has closed
//! forms for both the uniform and Gaussian weighting kernels and the
//! deviation from N(0,1) can be measured exactly. An optional relative
//! efficiency e <= 1 models a less informative statistic with variance 1/e.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::diagnostics::ReferenceDistribution;
use crate::kernel::Kernel;
use crate::model::{GenerativeModel, ParamVector, SummaryVector};
use crate::rng::RandomStream;
use crate::special::{normal_cdf, normal_pdf};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct NormalToy {
    prior_lo: f64,
    prior_hi: f64,
    efficiency: f64,
    names: Arc<[String]>,
}

impl NormalToy {
    /// Flat prior on (-10, 10), fully efficient statistic.
    pub fn new() -> Self {
        Self {
            prior_lo: -10.0,
            prior_hi: 10.0,
            efficiency: 1.0,
            names: vec!["theta".to_string()].into(),
        }
    }

    pub fn with_efficiency(mut self, efficiency: f64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::Config(format!(
                "relative efficiency must lie in (0, 1], got {efficiency}"
            )));
        }
        self.efficiency = efficiency;
        Ok(self)
    }

    pub fn with_prior_interval(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "prior interval must be finite with lo < hi, got ({lo}, {hi})"
            )));
        }
        self.prior_lo = lo;
        self.prior_hi = hi;
        Ok(self)
    }

    /// The observed summary is pinned at y = 0.
    pub fn observed_summary(&self) -> SummaryVector {
        SummaryVector::new(vec![0.0]).expect("zero is finite")
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }
}

impl Default for NormalToy {
    fn default() -> Self {
        Self::new()
    }
}

impl GenerativeModel for NormalToy {
    fn param_dim(&self) -> usize {
        1
    }

    fn summary_dim(&self) -> usize {
        1
    }

    fn param_names(&self) -> Arc<[String]> {
        self.names.clone()
    }

    fn prior_log_density(&self, theta: &ParamVector) -> f64 {
        let t = theta.values()[0];
        if t > self.prior_lo && t < self.prior_hi {
            -(self.prior_hi - self.prior_lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    fn has_proper_prior(&self) -> bool {
        true
    }

    fn sample_prior(&self, rng: &mut RandomStream) -> Option<ParamVector> {
        let u: f64 = rng.random();
        let t = self.prior_lo + u * (self.prior_hi - self.prior_lo);
        Some(ParamVector::new(self.names.clone(), vec![t]).expect("finite draw"))
    }

    fn simulate_summary(&self, theta: &ParamVector, rng: &mut RandomStream) -> SummaryVector {
        let z: f64 = rng.sample(StandardNormal);
        let x = theta.values()[0] + z / self.efficiency.sqrt();
        SummaryVector::new(vec![x]).expect("finite summary")
    }
}

/// Closed-form likelihood-free posterior of the toy model.
///
/// Gaussian kernel: exactly N(0, 1/e + eps^2/3). Uniform kernel: the form
/// `[Phi(eps - theta) - Phi(-eps - theta)] / (2 eps)`, normalized numerically
/// on a grid (the efficiency parameter applies to the Gaussian form only).
///
/// `epsilon` here is the uniform-equivalent width: both forms share the
/// same standard deviation eps/sqrt(3). A sampler running the gaussian
/// kernel weighting at tolerance t (kernel sd t) targets the closed form
/// with `epsilon = t * sqrt(3)`; the uniform kernel's tolerance matches
/// `epsilon` directly.
#[derive(Clone, Debug)]
pub struct ToyPosterior {
    kernel: Kernel,
    epsilon: f64,
    sd: f64,
    grid_lo: f64,
    grid_step: f64,
    cdf_table: Vec<f64>,
    norm: f64,
}

impl ToyPosterior {
    pub fn new(kernel: Kernel, epsilon: f64, efficiency: f64) -> Result<Self> {
        // Default grid: generously past the support of either form.
        let sd = (1.0 / efficiency + epsilon * epsilon / 3.0).sqrt();
        Self::with_grid(kernel, epsilon, efficiency, 8.0 * sd + epsilon, 16_001)
    }

    pub fn with_grid(
        kernel: Kernel,
        epsilon: f64,
        efficiency: f64,
        half_width: f64,
        points: usize,
    ) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(format!(
                "toy posterior needs positive epsilon, got {epsilon}"
            )));
        }
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(Error::Config(format!(
                "relative efficiency must lie in (0, 1], got {efficiency}"
            )));
        }
        if points < 3 || half_width.is_nan() || half_width <= 0.0 {
            return Err(Error::Config("toy posterior grid is degenerate".into()));
        }
        let sd = (1.0 / efficiency + epsilon * epsilon / 3.0).sqrt();
        let mut this = Self {
            kernel,
            epsilon,
            sd,
            grid_lo: -half_width,
            grid_step: 2.0 * half_width / (points - 1) as f64,
            cdf_table: Vec::new(),
            norm: 1.0,
        };
        match kernel {
            Kernel::Gaussian => {}
            Kernel::Uniform => {
                // Trapezoid cumulative of the raw closed form.
                let mut cdf = Vec::with_capacity(points);
                let mut acc = 0.0;
                let mut prev = this.raw_uniform(this.grid_lo);
                cdf.push(0.0);
                for i in 1..points {
                    let x = this.grid_lo + i as f64 * this.grid_step;
                    let cur = this.raw_uniform(x);
                    acc += 0.5 * (prev + cur) * this.grid_step;
                    cdf.push(acc);
                    prev = cur;
                }
                this.norm = acc;
                if this.norm.is_nan() || this.norm <= 0.0 {
                    return Err(Error::Config(
                        "toy posterior grid misses the support".into(),
                    ));
                }
                this.cdf_table = cdf;
            }
            other => {
                return Err(Error::Config(format!(
                    "toy posterior is defined for the uniform and gaussian kernels, not {}",
                    other.name()
                )))
            }
        }
        Ok(this)
    }

    fn raw_uniform(&self, theta: f64) -> f64 {
        let e = self.epsilon;
        (normal_cdf(e - theta, 0.0, 1.0) - normal_cdf(-e - theta, 0.0, 1.0)) / (2.0 * e)
    }

    pub fn density(&self, theta: f64) -> f64 {
        match self.kernel {
            Kernel::Gaussian => normal_pdf(theta, 0.0, self.sd),
            Kernel::Uniform => self.raw_uniform(theta) / self.norm,
            _ => unreachable!("checked at construction"),
        }
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        match self.kernel {
            Kernel::Gaussian => normal_cdf(theta, 0.0, self.sd),
            Kernel::Uniform => {
                let pos = (theta - self.grid_lo) / self.grid_step;
                if pos <= 0.0 {
                    return 0.0;
                }
                let n = self.cdf_table.len();
                if pos >= (n - 1) as f64 {
                    return 1.0;
                }
                let i = pos.floor() as usize;
                let frac = pos - i as f64;
                let v = self.cdf_table[i] * (1.0 - frac) + self.cdf_table[i + 1] * frac;
                (v / self.norm).clamp(0.0, 1.0)
            }
            _ => unreachable!("checked at construction"),
        }
    }

    pub fn reference(&self) -> ReferenceDistribution {
        let this = self.clone();
        let label = format!("toy-{}-eps{}", this.kernel.name(), this.epsilon);
        ReferenceDistribution::new(label, move |x| this.cdf(x))
    }
}

/// Pointwise closed-form density (see [`ToyPosterior`]).
pub fn toy_lf_posterior_density(
    theta: f64,
    epsilon: f64,
    kernel: Kernel,
    efficiency: f64,
) -> Result<f64> {
    Ok(ToyPosterior::new(kernel, epsilon, efficiency)?.density(theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_form_matches_closed_form() {
        // eps = sqrt(3), e = 1: N(0, 2) at 0 is 1/sqrt(4 pi).
        let d = toy_lf_posterior_density(0.0, 3.0f64.sqrt(), Kernel::Gaussian, 1.0).unwrap();
        assert!((d - 0.28209479177387814).abs() < 1e-12);
    }

    #[test]
    fn gaussian_form_with_efficiency() {
        // e = 0.5, eps = 1: variance 1/e + 1/3 = 7/3.
        let d = toy_lf_posterior_density(0.0, 1.0, Kernel::Gaussian, 0.5).unwrap();
        assert!((d - 0.261169028265409).abs() < 1e-12);
    }

    #[test]
    fn uniform_form_small_epsilon_approaches_standard_normal() {
        let d = toy_lf_posterior_density(1.0, 1e-4, Kernel::Uniform, 1.0).unwrap();
        assert!((d - 0.24197072451914337).abs() < 1e-6, "got {d}");
    }

    #[test]
    fn uniform_form_at_unit_epsilon() {
        // Raw value [Phi(1) - Phi(-1)]/2; the numeric normalization is ~1.
        let d = toy_lf_posterior_density(0.0, 1.0, Kernel::Uniform, 1.0).unwrap();
        assert!((d - 0.3413447460685429).abs() < 1e-7, "got {d}");
    }

    #[test]
    fn uniform_cdf_matches_analytic_antiderivative() {
        // Independent closed form: F(t) = [g(t+e) - g(t-e)] / (2e) with
        // g(u) = u Phi(u) + phi(u).
        let eps = 0.9;
        let toy = ToyPosterior::new(Kernel::Uniform, eps, 1.0).unwrap();
        let g = |u: f64| u * normal_cdf(u, 0.0, 1.0) + normal_pdf(u, 0.0, 1.0);
        for t in [-2.4, -1.0, -0.1, 0.0, 0.7, 1.9, 3.3] {
            let exact = (g(t + eps) - g(t - eps)) / (2.0 * eps);
            let got = toy.cdf(t);
            assert!((got - exact).abs() < 1e-6, "t = {t}: {got} vs {exact}");
        }
        assert_eq!(toy.cdf(-1e9), 0.0);
        assert_eq!(toy.cdf(1e9), 1.0);
    }

    #[test]
    fn strict_kernels_rejected() {
        assert!(toy_lf_posterior_density(0.0, 1.0, Kernel::Triangle, 1.0).is_err());
    }

    #[test]
    fn toy_simulator_is_centered() {
        let model = NormalToy::new();
        let theta = ParamVector::unnamed(vec![1.5]).unwrap();
        let mut rng = RandomStream::new(3, 0);
        let n = 40_000;
        let mean: f64 = (0..n)
            .map(|_| model.simulate_summary(&theta, &mut rng).values()[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn efficiency_widens_the_statistic() {
        let model = NormalToy::new().with_efficiency(0.25).unwrap();
        let theta = ParamVector::unnamed(vec![0.0]).unwrap();
        let mut rng = RandomStream::new(4, 0);
        let n = 40_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| model.simulate_summary(&theta, &mut rng).values()[0])
            .collect();
        let var = draws.iter().map(|x| x * x).sum::<f64>() / (n as f64 - 1.0);
        // Var = 1/e = 4.
        assert!((var - 4.0).abs() < 0.15, "var {var}");
    }

    #[test]
    fn prior_support() {
        let model = NormalToy::new();
        let inside = ParamVector::unnamed(vec![9.5]).unwrap();
        let outside = ParamVector::unnamed(vec![10.5]).unwrap();
        assert!(model.prior_log_density(&inside).is_finite());
        assert_eq!(model.prior_log_density(&outside), f64::NEG_INFINITY);
    }
}
