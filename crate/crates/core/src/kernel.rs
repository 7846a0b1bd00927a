//! Kernel evaluation and Nadaraya-Watson weight construction.
//!
//! The conditional expectation of a loss given a covariate vector is
//! estimated by a weighted average of the observed losses, with weights
//! proportional to a kernel applied to the scaled covariate distances.
//! Weights are computed in log space with the maximum log-kernel
//! subtracted before exponentiation, so small bandwidths do not underflow.

use ndarray::{ArrayView1, ArrayView2};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("invalid kernel parameter: {0}")]
    InvalidSpec(String),
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("operation not implemented for kernel family {0:?}")]
    NotImplemented(KernelFamily),
    #[error("degenerate weights: all kernel values vanished (max distance {max_distance:e})")]
    DegenerateWeights { max_distance: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
}

/// Kernel shape. `Exponential` is exp(-||t||), `Gaussian` is exp(-||t||^2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Exponential,
    Gaussian,
}

/// A kernel family together with a bandwidth and a covariate dimension.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: KernelFamily,
    bandwidth: f64,
    dim: usize,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64, dim: usize) -> Result<Self, KernelError> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(KernelError::InvalidSpec(format!(
                "bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        if dim == 0 {
            return Err(KernelError::InvalidSpec("dimension must be >= 1".into()));
        }
        Ok(Self {
            family,
            bandwidth,
            dim,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Paired covariate and outcome observations.
#[derive(Debug, Clone)]
pub struct Dataset {
    covariates: ndarray::Array2<f64>,
    outcomes: ndarray::Array2<f64>,
}

impl Dataset {
    pub fn new(
        covariates: ndarray::Array2<f64>,
        outcomes: ndarray::Array2<f64>,
    ) -> Result<Self, KernelError> {
        if covariates.nrows() != outcomes.nrows() {
            return Err(KernelError::DimensionMismatch {
                expected: covariates.nrows(),
                actual: outcomes.nrows(),
            });
        }
        if covariates.nrows() == 0 {
            return Err(KernelError::InvalidSpec("dataset must be nonempty".into()));
        }
        if covariates.iter().any(|v| !v.is_finite()) || outcomes.iter().any(|v| !v.is_finite()) {
            return Err(KernelError::NonFiniteInput("dataset entries".into()));
        }
        Ok(Self {
            covariates,
            outcomes,
        })
    }

    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn outcome_dim(&self) -> usize {
        self.outcomes.ncols()
    }

    pub fn covariates(&self) -> ArrayView2<'_, f64> {
        self.covariates.view()
    }

    pub fn outcomes(&self) -> ArrayView2<'_, f64> {
        self.outcomes.view()
    }
}

/// A point on the probability simplex: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validates nonnegativity and that the sum is 1 within 1e-12.
    pub fn new(weights: Vec<f64>) -> Result<Self, KernelError> {
        if weights.is_empty() {
            return Err(KernelError::InvalidSpec("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(KernelError::NonFiniteInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(KernelError::InvalidSpec(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Unnormalized kernel shape at `theta`. Normalization by Z is applied only
/// where densities are needed; NW weights cancel it.
pub fn eval_kernel(spec: &KernelSpec, theta: ArrayView1<'_, f64>) -> Result<f64, KernelError> {
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(KernelError::NonFiniteInput("theta".into()));
    }
    let norm = theta.dot(&theta).sqrt();
    Ok(match spec.family {
        KernelFamily::Exponential => (-norm).exp(),
        KernelFamily::Gaussian => (-norm * norm).exp(),
    })
}

/// Normalization constant Z = integral of exp(-||t||) over R^p,
/// i.e. the surface area of the unit (p-1)-sphere times Gamma(p).
pub fn kernel_normalizer(spec: &KernelSpec) -> Result<f64, KernelError> {
    match spec.family {
        KernelFamily::Exponential => {
            let p = spec.dim as f64;
            // ln Z = ln 2 + (p/2) ln pi + ln Gamma(p) - ln Gamma(p/2)
            let ln_z = std::f64::consts::LN_2
                + 0.5 * p * std::f64::consts::PI.ln()
                + ln_gamma(p)
                - ln_gamma(0.5 * p);
            Ok(ln_z.exp())
        }
        other => Err(KernelError::NotImplemented(other)),
    }
}

/// Integral of the squared normalized kernel over R^p. For the exponential
/// kernel this is 1 / (2^p Z), independent of the bandwidth.
pub fn kernel_l2_integral(spec: &KernelSpec) -> Result<f64, KernelError> {
    match spec.family {
        KernelFamily::Exponential => {
            let z = kernel_normalizer(spec)?;
            Ok(1.0 / (2f64.powi(spec.dim as i32) * z))
        }
        other => Err(KernelError::NotImplemented(other)),
    }
}

/// Nadaraya-Watson weights of the query `gamma` over the rows of `covariates`.
pub fn nw_weights(
    spec: &KernelSpec,
    covariates: ArrayView2<'_, f64>,
    gamma: ArrayView1<'_, f64>,
) -> Result<WeightVector, KernelError> {
    if covariates.ncols() != gamma.len() {
        return Err(KernelError::DimensionMismatch {
            expected: covariates.ncols(),
            actual: gamma.len(),
        });
    }
    if covariates.nrows() == 0 {
        return Err(KernelError::InvalidSpec("no covariate rows".into()));
    }
    let h = spec.bandwidth;
    let mut max_distance = 0.0f64;
    let log_kernels: Vec<f64> = covariates
        .rows()
        .into_iter()
        .map(|row| {
            let mut sq = 0.0;
            for (a, b) in row.iter().zip(gamma.iter()) {
                let d = a - b;
                sq += d * d;
            }
            let dist = sq.sqrt();
            if dist > max_distance || !dist.is_finite() {
                max_distance = dist;
            }
            let scaled = dist / h;
            match spec.family {
                KernelFamily::Exponential => -scaled,
                KernelFamily::Gaussian => -scaled * scaled,
            }
        })
        .collect();
    weights_from_log_kernels(&log_kernels).ok_or(KernelError::DegenerateWeights { max_distance })
}

/// Normalizes exp(log_kernels) onto the simplex, stabilized by subtracting
/// the maximum. Returns None when every term vanishes.
pub(crate) fn weights_from_log_kernels(log_kernels: &[f64]) -> Option<WeightVector> {
    let max = log_kernels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut raw: Vec<f64> = log_kernels.iter().map(|lk| (lk - max).exp()).collect();
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return None;
    }
    for w in &mut raw {
        *w /= sum;
    }
    Some(WeightVector(raw))
}
