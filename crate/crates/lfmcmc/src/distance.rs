//! Distance measures between summary vectors.
//!
//! All three metrics are quadratic forms `sqrt((a-b)^T W (a-b))`: the
//! identity (Euclidean), the inverse diagonal of a covariance matrix
//! (scaled Euclidean) and a full inverse covariance (Mahalanobis). The
//! Mahalanobis factorization is computed once at construction; evaluation
//! never re-inverts.

use nalgebra::{DMatrix, DVector};

use crate::model::{GenerativeModel, ParamVector, SummaryVector};
use crate::rng::RandomStream;
use crate::{Error, Result};

/// Condition-number limit above which an estimated covariance is treated as
/// numerically singular.
pub const CONDITION_LIMIT: f64 = 1e12;

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Euclidean,
    ScaledEuclidean,
    Mahalanobis,
}

impl MetricKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "euclidean" => Ok(Self::Euclidean),
            "scaled_euclidean" => Ok(Self::ScaledEuclidean),
            "mahalanobis" => Ok(Self::Mahalanobis),
            _ => Err(Error::UnknownName {
                what: "distance metric",
                name: name.to_string(),
                expected: "euclidean, scaled_euclidean, mahalanobis",
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Euclidean => "euclidean",
            Self::ScaledEuclidean => "scaled_euclidean",
            Self::Mahalanobis => "mahalanobis",
        }
    }
}

/// A distance on summary space, fixed at configuration time.
#[derive(Clone, Debug)]
pub struct DistanceMetric {
    kind: MetricKind,
    dim: usize,
    /// Inverse lower Cholesky factor of the covariance (Mahalanobis only).
    inv_chol: Option<DMatrix<f64>>,
    /// 1/sqrt of the covariance diagonal (scaled Euclidean only).
    inv_scale: Option<Vec<f64>>,
    covariance: Option<DMatrix<f64>>,
}

impl DistanceMetric {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("metric dimension must be positive".into()));
        }
        Ok(Self {
            kind: MetricKind::Euclidean,
            dim,
            inv_chol: None,
            inv_scale: None,
            covariance: None,
        })
    }

    /// Mahalanobis with the diagonal of `covariance` only.
    pub fn scaled_euclidean(covariance: DMatrix<f64>) -> Result<Self> {
        let cov = checked_square(covariance)?;
        let mut inv_scale = Vec::with_capacity(cov.nrows());
        for r in 0..cov.nrows() {
            let v = cov[(r, r)];
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "scaled_euclidean needs strictly positive covariance diagonal, entry {r} is {v}"
                )));
            }
            inv_scale.push(1.0 / v.sqrt());
        }
        Ok(Self {
            kind: MetricKind::ScaledEuclidean,
            dim: cov.nrows(),
            inv_chol: None,
            inv_scale: Some(inv_scale),
            covariance: Some(cov),
        })
    }

    pub fn mahalanobis(covariance: DMatrix<f64>) -> Result<Self> {
        let cov = checked_square(covariance)?;
        let dim = cov.nrows();
        let chol = cov.clone().cholesky().ok_or_else(|| {
            Error::Config(
                "covariance is not positive definite; cannot build mahalanobis metric".into(),
            )
        })?;
        let inv_chol = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(dim, dim))
            .ok_or_else(|| Error::Config("covariance factor is singular".into()))?;
        Ok(Self {
            kind: MetricKind::Mahalanobis,
            dim,
            inv_chol: Some(inv_chol),
            inv_scale: None,
            covariance: Some(cov),
        })
    }

    /// Builds a metric of the given kind; `covariance` is required for the
    /// scaled Euclidean and Mahalanobis kinds and ignored otherwise.
    pub fn from_kind(
        kind: MetricKind,
        dim: usize,
        covariance: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        match kind {
            MetricKind::Euclidean => Self::euclidean(dim),
            MetricKind::ScaledEuclidean => {
                let cov = covariance.ok_or_else(|| {
                    Error::Config("scaled_euclidean metric requires a covariance matrix".into())
                })?;
                Self::scaled_euclidean(cov)
            }
            MetricKind::Mahalanobis => {
                let cov = covariance.ok_or_else(|| {
                    Error::Config("mahalanobis metric requires a covariance matrix".into())
                })?;
                Self::mahalanobis(cov)
            }
        }
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.covariance.as_ref()
    }

    /// rho(a, b); nonnegative, zero iff a = b.
    pub fn distance(&self, a: &SummaryVector, b: &SummaryVector) -> f64 {
        let a = a.values();
        let b = b.values();
        assert_eq!(a.len(), self.dim, "summary dimension mismatch");
        assert_eq!(b.len(), self.dim, "summary dimension mismatch");
        match self.kind {
            MetricKind::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            MetricKind::ScaledEuclidean => {
                let s = self.inv_scale.as_ref().expect("scaled metric has scales");
                a.iter()
                    .zip(b)
                    .zip(s)
                    .map(|((x, y), w)| {
                        let d = (x - y) * w;
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            }
            MetricKind::Mahalanobis => {
                let l = self.inv_chol.as_ref().expect("mahalanobis has factor");
                let mut acc = 0.0;
                for i in 0..self.dim {
                    let mut w = 0.0;
                    for j in 0..=i {
                        w += l[(i, j)] * (a[j] - b[j]);
                    }
                    acc += w * w;
                }
                acc.sqrt()
            }
        }
    }
}

/// Free-function form of [`DistanceMetric::distance`].
pub fn distance(metric: &DistanceMetric, a: &SummaryVector, b: &SummaryVector) -> f64 {
    metric.distance(a, b)
}

fn checked_square(cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if cov.nrows() == 0 || cov.nrows() != cov.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "covariance must be square and non-empty, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !scale.is_finite() {
        return Err(Error::NonFinite("covariance entry".into()));
    }
    let tol = SYMMETRY_TOL * (1.0 + scale);
    for i in 0..cov.nrows() {
        for j in (i + 1)..cov.ncols() {
            if (cov[(i, j)] - cov[(j, i)]).abs() > tol {
                return Err(Error::Config(format!(
                    "covariance is not symmetric at ({i},{j}): {} vs {}",
                    cov[(i, j)],
                    cov[(j, i)]
                )));
            }
        }
    }
    // Symmetrize exactly before factorization.
    let sym = (&cov + cov.transpose()) * 0.5;
    Ok(sym)
}

/// Sample covariance (denominator n-1) of `n_sims` simulated summaries at a
/// pilot parameter value.
///
/// Errors when the estimate is numerically singular (condition number above
/// [`CONDITION_LIMIT`]); the error carries the estimate so callers can still
/// fall back to the scaled Euclidean metric where the diagonal permits.
pub fn estimate_covariance(
    model: &dyn GenerativeModel,
    pilot_theta: &ParamVector,
    n_sims: usize,
    rng: &mut RandomStream,
) -> Result<DMatrix<f64>> {
    let r = model.summary_dim();
    if n_sims < r + 1 {
        return Err(Error::Config(format!(
            "covariance estimation needs at least summary_dim + 1 = {} simulations, got {n_sims}",
            r + 1
        )));
    }
    let mut draws = DMatrix::zeros(n_sims, r);
    for i in 0..n_sims {
        let s = model.simulate_summary(pilot_theta, rng);
        assert_eq!(s.len(), r, "simulator returned wrong summary length");
        for j in 0..r {
            draws[(i, j)] = s.values()[j];
        }
    }
    let mean = DVector::from_fn(r, |j, _| draws.column(j).sum() / n_sims as f64);
    let mut cov = DMatrix::zeros(r, r);
    for i in 0..n_sims {
        for a in 0..r {
            let da = draws[(i, a)] - mean[a];
            for b in a..r {
                cov[(a, b)] += da * (draws[(i, b)] - mean[b]);
            }
        }
    }
    cov /= n_sims as f64 - 1.0;
    for a in 0..r {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }

    let eigen = cov.clone().symmetric_eigen();
    let max = eigen.eigenvalues.iter().fold(f64::MIN, |m, v| m.max(*v));
    let min = eigen.eigenvalues.iter().fold(f64::MAX, |m, v| m.min(*v));
    let condition = if min <= 0.0 { f64::INFINITY } else { max / min };
    if condition.is_nan() || condition > CONDITION_LIMIT {
        return Err(Error::SingularCovariance {
            condition,
            limit: CONDITION_LIMIT,
            covariance: Box::new(cov),
        });
    }
    Ok(cov)
}
