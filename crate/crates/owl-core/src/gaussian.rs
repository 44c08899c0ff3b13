//! Gaussian component fitting and stable mixture log-densities.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Covariance parameterization for fitted components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CovarianceKind {
    #[default]
    Full,
    Diagonal,
}

/// Covariance storage: full row-major `d x d` or the diagonal only.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Full(Vec<f64>),
    Diagonal(Vec<f64>),
}

/// One Gaussian mixture component with its cached normalization constant
/// and Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    pub covariance: Covariance,
    pub weight: f64,
    /// `-(d ln 2 pi + ln det) / 2`, cached at fit time.
    pub log_norm_const: f64,
    /// Lower-triangular Cholesky factor for full covariances (row-major).
    chol: Option<Vec<f64>>,
}

/// A per-class mixture: one Gaussian per cluster of the class's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassModel {
    pub label: String,
    pub components: Vec<GaussianComponent>,
}

/// Lower-triangular Cholesky factorization of a symmetric matrix, row-major.
///
/// Fails on non-positive pivots; callers regularize first.
pub fn cholesky(matrix: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut sum = matrix[i * d + j];
            for k in 0..j {
                sum -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::BadArgument(alloc::format!(
                        "matrix is not positive definite (pivot {i} = {sum})"
                    )));
                }
                l[i * d + i] = libm::sqrt(sum);
            } else {
                l[i * d + j] = sum / l[j * d + j];
            }
        }
    }
    Ok(l)
}

impl GaussianComponent {
    /// Fit mean and unbiased sample covariance (divisor `n - 1`), adding
    /// `reg_epsilon` to the diagonal. A single point yields covariance
    /// `reg_epsilon * I`. The weight is set by the caller; it defaults to 1.
    pub fn fit(points: &[&[f64]], reg_epsilon: f64, kind: CovarianceKind) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("fit_gaussian"));
        }
        let d = points[0].len();
        let n = points.len();
        for p in points {
            if p.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("fit_gaussian input"));
            }
        }
        if !reg_epsilon.is_finite() || reg_epsilon < 0.0 {
            return Err(Error::BadArgument("reg_epsilon must be >= 0".into()));
        }

        let mut mean = vec![0.0; d];
        for p in points {
            for (m, v) in mean.iter_mut().zip(p.iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }

        let covariance = match kind {
            CovarianceKind::Full => {
                let mut cov = vec![0.0; d * d];
                if n > 1 {
                    for p in points {
                        for i in 0..d {
                            let di = p[i] - mean[i];
                            for j in 0..=i {
                                cov[i * d + j] += di * (p[j] - mean[j]);
                            }
                        }
                    }
                    let denom = (n - 1) as f64;
                    for i in 0..d {
                        for j in 0..=i {
                            cov[i * d + j] /= denom;
                            cov[j * d + i] = cov[i * d + j];
                        }
                    }
                }
                for i in 0..d {
                    cov[i * d + i] += reg_epsilon;
                }
                Covariance::Full(cov)
            }
            CovarianceKind::Diagonal => {
                let mut var = vec![0.0; d];
                if n > 1 {
                    for p in points {
                        for i in 0..d {
                            let di = p[i] - mean[i];
                            var[i] += di * di;
                        }
                    }
                    for v in &mut var {
                        *v /= (n - 1) as f64;
                    }
                }
                for v in &mut var {
                    *v += reg_epsilon;
                }
                Covariance::Diagonal(var)
            }
        };

        Self::from_parts(mean, covariance, 1.0)
    }

    /// Assemble a component from explicit parameters, caching the Cholesky
    /// factor and normalization constant.
    pub fn from_parts(mean: Vec<f64>, covariance: Covariance, weight: f64) -> Result<Self> {
        let d = mean.len();
        let (log_det, chol) = match &covariance {
            Covariance::Full(cov) => {
                if cov.len() != d * d {
                    return Err(Error::DimensionMismatch {
                        expected: d * d,
                        actual: cov.len(),
                    });
                }
                let l = cholesky(cov, d)?;
                let mut log_det = 0.0;
                for i in 0..d {
                    log_det += 2.0 * libm::log(l[i * d + i]);
                }
                (log_det, Some(l))
            }
            Covariance::Diagonal(var) => {
                if var.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        actual: var.len(),
                    });
                }
                if var.iter().any(|&v| v <= 0.0) {
                    return Err(Error::BadArgument(
                        "diagonal covariance requires positive variances".into(),
                    ));
                }
                let log_det = var.iter().map(|&v| libm::log(v)).sum();
                (log_det, None)
            }
        };
        let log_norm_const =
            -0.5 * (d as f64 * libm::log(2.0 * core::f64::consts::PI) + log_det);
        Ok(GaussianComponent {
            mean,
            covariance,
            weight,
            log_norm_const,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Log density of `x` under this component (weight not applied).
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: x.len(),
            });
        }
        let quad = match &self.covariance {
            Covariance::Full(_) => {
                let l = self.chol.as_ref().expect("full covariance caches its factor");
                // Forward substitution: y = L^-1 (x - mean); quad = |y|^2.
                let mut y = vec![0.0; d];
                for i in 0..d {
                    let mut sum = x[i] - self.mean[i];
                    for k in 0..i {
                        sum -= l[i * d + k] * y[k];
                    }
                    y[i] = sum / l[i * d + i];
                }
                y.iter().map(|v| v * v).sum::<f64>()
            }
            Covariance::Diagonal(var) => x
                .iter()
                .zip(&self.mean)
                .zip(var)
                .map(|((xi, mi), vi)| (xi - mi) * (xi - mi) / vi)
                .sum(),
        };
        Ok(self.log_norm_const - 0.5 * quad)
    }
}

impl ClassModel {
    pub fn new(label: impl Into<String>, components: Vec<GaussianComponent>) -> Self {
        ClassModel {
            label: label.into(),
            components,
        }
    }

    /// Stable mixture log density: log-sum-exp of
    /// `log w_k + component log density`.
    pub fn log_prob(&self, x: &[f64]) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.components.len());
        for comp in &self.components {
            terms.push(libm::log(comp.weight) + comp.log_density(x)?);
        }
        Ok(log_sum_exp(&terms))
    }
}

/// `log(sum(exp(terms)))` without overflow.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = terms.iter().map(|&t| libm::exp(t - max)).sum();
    max + libm::log(sum)
}
