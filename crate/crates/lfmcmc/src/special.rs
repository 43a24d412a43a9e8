//! Special functions backing the analytic reference distributions.
//!
//! Standard series / continued-fraction evaluation of the regularized lower
//! incomplete gamma function, plus the Gaussian CDF derived from it. Both
//! are validated against slow quadrature oracles in the test suites.

/// Lanczos coefficients (g = 7, n = 9), Godfrey/Boost values.
const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEFFS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma needs x > 0, got {x}");
    if x < 0.5 {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut sum = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS[1..].iter().enumerate() {
        sum += c / (z + i as f64 + 1.0);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + sum.ln()
}

const MAX_ITER: usize = 500;
const EPS: f64 = 1e-16;

/// Regularized lower incomplete gamma P(a, x) for a > 0, x >= 0.
pub fn lower_regularized_gamma(a: f64, x: f64) -> f64 {
    assert!(a > 0.0, "shape must be positive, got {a}");
    assert!(x >= 0.0, "argument must be nonnegative, got {x}");
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Series expansion of P(a, x), accurate for x < a + 1.
fn gamma_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    (sum.ln() + log_prefactor).exp()
}

/// Continued fraction (modified Lentz) for Q(a, x), accurate for x >= a + 1.
fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    (h.ln() + log_prefactor).exp()
}

/// Gamma(shape, rate) CDF; zero for x <= 0. Absolute error below 1e-10.
pub fn gamma_cdf(x: f64, shape: f64, rate: f64) -> f64 {
    assert!(shape > 0.0 && rate > 0.0, "shape and rate must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    lower_regularized_gamma(shape, rate * x)
}

/// Complementary error function via the incomplete gamma identities
/// erf(t) = P(1/2, t^2), erfc(t) = Q(1/2, t^2) for t >= 0.
pub fn erfc(t: f64) -> f64 {
    if t < 0.0 {
        return 2.0 - erfc(-t);
    }
    if t == 0.0 {
        return 1.0;
    }
    let x = t * t;
    if x < 1.5 {
        1.0 - gamma_series(0.5, x)
    } else {
        gamma_continued_fraction(0.5, x)
    }
}

pub fn erf(t: f64) -> f64 {
    1.0 - erfc(t)
}

/// Normal(mean, sd) CDF. Absolute error below 1e-10.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    assert!(sd > 0.0, "standard deviation must be positive, got {sd}");
    let z = (x - mean) / sd;
    let t = z / std::f64::consts::SQRT_2;
    if z < 0.0 {
        0.5 * erfc(-t)
    } else {
        1.0 - 0.5 * erfc(t)
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    assert!(sd > 0.0);
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        // Gamma(5) = 24, Gamma(1) = Gamma(2) = 1, Gamma(1/2) = sqrt(pi).
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-12);
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert!(ln_gamma(2.0).abs() < 1e-13);
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-12);
        // Reflection branch: Gamma(0.25) = 3.6256099082219083.
        assert!((ln_gamma(0.25) - 3.625609908221908f64.ln()).abs() < 1e-11);
    }

    #[test]
    fn gamma_cdf_exponential_special_case() {
        // Gamma(1, rate) is Exponential(rate): CDF(1) at rate 2 is 1 - e^-2.
        let expect = 1.0 - (-2.0f64).exp();
        assert!((gamma_cdf(1.0, 1.0, 2.0) - expect).abs() < 1e-12);
    }

    #[test]
    fn gamma_cdf_near_median_for_shape_21() {
        // Mean ~ median for shape 21; the CDF at the mean sits near 1/2.
        let p = gamma_cdf(21.0 / 80.0, 21.0, 80.0);
        assert!(p > 0.45 && p < 0.55, "got {p}");
    }

    #[test]
    fn gamma_cdf_limits_and_monotonicity() {
        assert_eq!(gamma_cdf(0.0, 3.0, 1.0), 0.0);
        assert_eq!(gamma_cdf(-1.0, 3.0, 1.0), 0.0);
        assert!(gamma_cdf(1e6, 3.0, 1.0) > 1.0 - 1e-12);
        let mut prev = 0.0;
        for i in 1..200 {
            let p = gamma_cdf(i as f64 * 0.05, 21.0, 80.0);
            assert!(p >= prev);
            prev = p;
        }
    }

    #[test]
    fn normal_cdf_symmetry() {
        assert_eq!(normal_cdf(0.0, 0.0, 1.0), 0.5);
        for z in [-3.5, -1.2, -0.3, 0.7, 2.9] {
            let s = normal_cdf(z, 0.0, 1.0) + normal_cdf(-z, 0.0, 1.0);
            assert!((s - 1.0).abs() < 1e-14, "z = {z}: {s}");
        }
    }

    #[test]
    fn normal_cdf_known_values() {
        // Phi(1) = 0.8413447460685429, Phi(1.96) = 0.9750021048517795.
        assert!((normal_cdf(1.0, 0.0, 1.0) - 0.8413447460685429).abs() < 1e-12);
        assert!((normal_cdf(1.96, 0.0, 1.0) - 0.9750021048517795).abs() < 1e-12);
        assert!((erf(1.0) - 0.8427007929497149).abs() < 1e-12);
    }

    #[test]
    fn location_scale() {
        let p = normal_cdf(3.0, 1.0, 2.0);
        assert!((p - normal_cdf(1.0, 0.0, 1.0)).abs() < 1e-14);
    }
}
