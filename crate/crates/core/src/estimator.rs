//! Weighted conditional moments, the variance-regularized objective, and
//! finite-sample deviation calculators.
//!
//! The calculators implement the displayed deviation and suboptimality
//! formulas with every (1+o(1)) factor set to one and every unnamed absolute
//! constant exposed as an explicit field defaulting to one. They are meant
//! for shape, monotonicity, and coverage experiments rather than certified
//! constants.

use ndarray::{Array1, ArrayView1};
use thiserror::Error;

use crate::kernel::WeightVector;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("missing bound input: {0}")]
    MissingInput(&'static str),
}

type LossFn = dyn Fn(ArrayView1<'_, f64>, ArrayView1<'_, f64>) -> f64 + Send + Sync;
type SubgradFn = dyn Fn(ArrayView1<'_, f64>, ArrayView1<'_, f64>) -> Array1<f64> + Send + Sync;

/// A loss with its subgradient in the decision and the affine calibration
/// that maps the raw range onto [0, 1].
pub struct LossModel {
    raw: Box<LossFn>,
    raw_subgradient: Box<SubgradFn>,
    lipschitz: f64,
    scale: f64,
    offset: f64,
}

impl LossModel {
    /// `raw_range` is the declared (min, max) of the raw loss over the
    /// supports; evaluation is calibrated as (raw - min) / (max - min).
    pub fn new(
        raw: Box<LossFn>,
        raw_subgradient: Box<SubgradFn>,
        raw_lipschitz: f64,
        raw_range: (f64, f64),
    ) -> Result<Self, EstimatorError> {
        let (lo, hi) = raw_range;
        if !(hi > lo) {
            return Err(EstimatorError::InvalidInput(format!(
                "raw loss range must be nondegenerate, got [{lo}, {hi}]"
            )));
        }
        let scale = 1.0 / (hi - lo);
        Ok(Self {
            raw,
            raw_subgradient,
            lipschitz: raw_lipschitz * scale,
            scale,
            offset: -lo * scale,
        })
    }

    /// Calibrated loss in [0, 1] on the declared supports.
    pub fn evaluate(&self, x: ArrayView1<'_, f64>, xi: ArrayView1<'_, f64>) -> f64 {
        (self.raw)(x, xi) * self.scale + self.offset
    }

    /// Subgradient of the calibrated loss.
    pub fn subgradient(&self, x: ArrayView1<'_, f64>, xi: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut g = (self.raw_subgradient)(x, xi);
        g.mapv_inplace(|v| v * self.scale);
        g
    }

    pub fn evaluate_raw(&self, x: ArrayView1<'_, f64>, xi: ArrayView1<'_, f64>) -> f64 {
        (self.raw)(x, xi)
    }

    /// Lipschitz constant of the calibrated loss.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Maps a calibrated deviation (difference of calibrated losses) back to
    /// raw units for display.
    pub fn deviation_to_raw(&self, calibrated: f64) -> f64 {
        calibrated / self.scale
    }

    /// Maximum absolute error between the subgradient and central finite
    /// differences of the calibrated loss at `x`. Meaningful away from kinks.
    pub fn subgradient_gap(
        &self,
        x: ArrayView1<'_, f64>,
        xi: ArrayView1<'_, f64>,
        step: f64,
    ) -> f64 {
        let g = self.subgradient(x, xi);
        let mut worst = 0.0f64;
        let mut xp = x.to_owned();
        for k in 0..x.len() {
            let orig = xp[k];
            xp[k] = orig + step;
            let up = self.evaluate(xp.view(), xi);
            xp[k] = orig - step;
            let down = self.evaluate(xp.view(), xi);
            xp[k] = orig;
            let fd = (up - down) / (2.0 * step);
            worst = worst.max((fd - g[k]).abs());
        }
        worst
    }
}

/// Kernel-weighted loss mean.
pub fn conditional_expectation(weights: &WeightVector, losses: &[f64]) -> f64 {
    assert_eq!(weights.len(), losses.len(), "length mismatch");
    weights
        .iter()
        .zip(losses.iter())
        .map(|(w, l)| w * l)
        .sum()
}

/// Kernel-weighted loss variance, E[l^2] - E[l]^2 clamped at zero.
pub fn conditional_variance(weights: &WeightVector, losses: &[f64]) -> f64 {
    assert_eq!(weights.len(), losses.len(), "length mismatch");
    let mean = conditional_expectation(weights, losses);
    let second: f64 = weights
        .iter()
        .zip(losses.iter())
        .map(|(w, l)| w * l * l)
        .sum();
    (second - mean * mean).max(0.0)
}

/// Mean plus lambda times the standard deviation.
pub fn rnw_objective(weights: &WeightVector, losses: &[f64], lambda: f64) -> f64 {
    conditional_expectation(weights, losses)
        + lambda * conditional_variance(weights, losses).sqrt()
}

/// Shared inputs of the deviation calculators. Optional fields are only
/// required by the calculators that use them; `constant` stands in for the
/// unnamed absolute constants and defaults to one.
#[derive(Debug, Clone)]
pub struct BoundInputs {
    pub n: usize,
    pub bandwidth: f64,
    pub dim: usize,
    pub delta: f64,
    /// Scaled marginal density g(gamma) = f(gamma) / (2 * integral of K^2).
    pub g_gamma: f64,
    /// Conditional variance of the calibrated loss.
    pub variance: f64,
    pub cardinality: Option<f64>,
    pub diameter: Option<f64>,
    pub decision_dim: Option<usize>,
    pub resolution: Option<f64>,
    pub lipschitz: Option<f64>,
    pub tau: Option<f64>,
    pub sigma: Option<f64>,
    pub spectral_gap: Option<f64>,
    pub gamma_max: Option<f64>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub intrinsic_dim: Option<usize>,
    pub c_lambda: Option<f64>,
    pub constant: f64,
}

impl BoundInputs {
    pub fn new(n: usize, bandwidth: f64, dim: usize, delta: f64, g_gamma: f64, variance: f64) -> Self {
        Self {
            n,
            bandwidth,
            dim,
            delta,
            g_gamma,
            variance,
            cardinality: None,
            diameter: None,
            decision_dim: None,
            resolution: None,
            lipschitz: None,
            tau: None,
            sigma: None,
            spectral_gap: None,
            gamma_max: None,
            n1: None,
            n2: None,
            intrinsic_dim: None,
            c_lambda: None,
            constant: 1.0,
        }
    }

    fn check_common(&self) -> Result<(), EstimatorError> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(EstimatorError::InvalidInput(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if self.denominator() <= 0.0 {
            return Err(EstimatorError::InvalidInput(
                "n * h^p * g must be positive".into(),
            ));
        }
        if self.variance < 0.0 {
            return Err(EstimatorError::InvalidInput("variance must be >= 0".into()));
        }
        Ok(())
    }

    /// The effective sample mass n * h^p * g(gamma).
    pub fn denominator(&self) -> f64 {
        self.n as f64 * self.bandwidth.powi(self.dim as i32) * self.g_gamma
    }

    fn require<T: Copy>(opt: Option<T>, name: &'static str) -> Result<T, EstimatorError> {
        opt.ok_or(EstimatorError::MissingInput(name))
    }
}

/// Single-decision deviation: sqrt(V log(1/delta) / (n h^p g)).
pub fn generalization_bound(inputs: &BoundInputs) -> Result<f64, EstimatorError> {
    inputs.check_common()?;
    Ok((inputs.variance * (1.0 / inputs.delta).ln() / inputs.denominator()).sqrt())
}

/// Uniform deviation over a finite decision set via the union bound:
/// sqrt(V log(|X|/delta) / (n h^p g)).
pub fn finite_set_bound(inputs: &BoundInputs) -> Result<f64, EstimatorError> {
    inputs.check_common()?;
    let card = BoundInputs::require(inputs.cardinality, "cardinality")?;
    if card < 1.0 {
        return Err(EstimatorError::InvalidInput(
            "cardinality must be >= 1".into(),
        ));
    }
    Ok((inputs.variance * (card / inputs.delta).ln() / inputs.denominator()).sqrt())
}

/// Standard ball-covering count ceil((1 + 2 D / eta)^d).
pub fn covering_number(diameter: f64, dim: usize, resolution: f64) -> Result<u64, EstimatorError> {
    if !(diameter > 0.0) || !(resolution > 0.0) || dim == 0 {
        return Err(EstimatorError::InvalidInput(
            "covering number needs positive diameter, resolution and dimension".into(),
        ));
    }
    let count = (1.0 + 2.0 * diameter / resolution).powi(dim as i32).ceil();
    if !count.is_finite() || count > u64::MAX as f64 {
        return Err(EstimatorError::InvalidInput(
            "covering number overflows u64".into(),
        ));
    }
    Ok(count as u64)
}

/// log of the covering count; exact (post-ceiling) when representable and
/// the smooth d*log(1 + 2D/eta) otherwise.
fn ln_covering(diameter: f64, dim: usize, resolution: f64) -> Result<f64, EstimatorError> {
    match covering_number(diameter, dim, resolution) {
        Ok(count) => Ok((count as f64).ln()),
        Err(_) => Ok(dim as f64 * (1.0 + 2.0 * diameter / resolution).ln()),
    }
}

/// Uniform deviation over a bounded continuous set: the finite-set bound over
/// an eta-cover plus the Lipschitz discretization term
/// M eta (1 + sqrt(log(|X_eta|/delta) / (n h^p g))).
pub fn continuous_set_bound(inputs: &BoundInputs) -> Result<f64, EstimatorError> {
    inputs.check_common()?;
    let diameter = BoundInputs::require(inputs.diameter, "diameter")?;
    let dim = BoundInputs::require(inputs.decision_dim, "decision_dim")?;
    let eta = BoundInputs::require(inputs.resolution, "resolution")?;
    let lipschitz = BoundInputs::require(inputs.lipschitz, "lipschitz")?;
    let log_term = ln_covering(diameter, dim, eta)? + (1.0 / inputs.delta).ln();
    let denom = inputs.denominator();
    let cover_term = (inputs.variance * log_term / denom).sqrt();
    let discretization = lipschitz * eta * (1.0 + (log_term / denom).sqrt());
    Ok(cover_term + discretization)
}

/// Deviation between the true and empirical conditional standard deviation:
/// tau + sqrt(log((1 + 2/tau)/delta) / (n h^p g)).
pub fn stddev_deviation_bound(inputs: &BoundInputs) -> Result<f64, EstimatorError> {
    inputs.check_common()?;
    let tau = BoundInputs::require(inputs.tau, "tau")?;
    if !(tau > 0.0) {
        return Err(EstimatorError::InvalidInput("tau must be positive".into()));
    }
    Ok(tau + (((1.0 + 2.0 / tau) / inputs.delta).ln() / inputs.denominator()).sqrt())
}

/// Suboptimality of the regularized minimizer against the best decision over
/// a finite set, at the stated scaling of the regularization parameter.
pub fn suboptimality_bound(inputs: &BoundInputs) -> Result<f64, EstimatorError> {
    inputs.check_common()?;
    let card = BoundInputs::require(inputs.cardinality, "cardinality")?;
    let tau = BoundInputs::require(inputs.tau, "tau")?;
    if !(tau > 0.0) || card < 1.0 {
        return Err(EstimatorError::InvalidInput(
            "need tau > 0 and cardinality >= 1".into(),
        ));
    }
    let denom = inputs.denominator();
    let first = (inputs.variance.sqrt() + tau)
        * (4.0 * (6.0 * card / inputs.delta).ln() / denom).sqrt();
    let second = 2.0 * (6.0 * card * (1.0 + 2.0 / tau) / inputs.delta).ln() / denom;
    Ok(first + second)
}

/// Which displayed form of the dimension-reduced bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HighDimVariant {
    SubGaussian,
    BoundedCovariate,
}

/// Deviation of the dimension-reduced estimator: the kernel-regression term
/// at (n1, h^{p'}) plus the (8/h) * C / gap subspace-estimation term. The
/// sub-gaussian form carries the 4 sigma (sqrt(p) + sqrt(log/2)) tail factor,
/// the bounded form a user-supplied gamma_max.
pub fn highdim_bound(
    inputs: &BoundInputs,
    variant: HighDimVariant,
) -> Result<f64, EstimatorError> {
    if !(inputs.delta > 0.0 && inputs.delta < 1.0) {
        return Err(EstimatorError::InvalidInput(format!(
            "delta must lie in (0,1), got {}",
            inputs.delta
        )));
    }
    let n1 = BoundInputs::require(inputs.n1, "n1")? as f64;
    let n2 = BoundInputs::require(inputs.n2, "n2")? as f64;
    let p_prime = BoundInputs::require(inputs.intrinsic_dim, "intrinsic_dim")?;
    let gap = BoundInputs::require(inputs.spectral_gap, "spectral_gap")?;
    let card = BoundInputs::require(inputs.cardinality, "cardinality")?;
    if gap <= 0.0 {
        return Err(EstimatorError::InvalidInput(
            "spectral gap must be positive".into(),
        ));
    }
    let h = inputs.bandwidth;
    let denom = n1 * h.powi(p_prime as i32) * inputs.g_gamma;
    if denom <= 0.0 {
        return Err(EstimatorError::InvalidInput(
            "n1 * h^p' * g must be positive".into(),
        ));
    }
    match variant {
        HighDimVariant::SubGaussian => {
            let sigma = BoundInputs::require(inputs.sigma, "sigma")?;
            let log5 = (5.0 * n1 * card / inputs.delta).ln();
            let log10 = (10.0 * n1 * card / inputs.delta).ln();
            let regression = (inputs.variance * log5 / denom).sqrt();
            let tail = (inputs.dim as f64).sqrt() + (0.5 * log5).sqrt();
            let projection = (8.0 / h) * (4.0 * sigma * inputs.constant / gap)
                * (p_prime as f64 / n2 * log10).sqrt()
                * tail;
            Ok(regression + projection)
        }
        HighDimVariant::BoundedCovariate => {
            let gamma_max = BoundInputs::require(inputs.gamma_max, "gamma_max")?;
            let log2 = (2.0 * card / inputs.delta).ln();
            let log4 = (4.0 * card / inputs.delta).ln();
            let regression = (inputs.variance * log2 / denom).sqrt();
            let projection = (8.0 / h) * (inputs.constant / gap)
                * (p_prime as f64 / n2 * log4).sqrt()
                * gamma_max;
            Ok(regression + projection)
        }
    }
}

/// High-probability bound on the norm of a sub-gaussian vector:
/// 4 sigma sqrt(d) + 2 sigma sqrt(2 log(1/delta)).
pub fn subgaussian_norm_bound(sigma: f64, dim: usize, delta: f64) -> Result<f64, EstimatorError> {
    if !(sigma > 0.0) || dim == 0 || !(delta > 0.0 && delta <= 1.0) {
        return Err(EstimatorError::InvalidInput(
            "need sigma > 0, dim >= 1, delta in (0,1]".into(),
        ));
    }
    Ok(4.0 * sigma * (dim as f64).sqrt() + 2.0 * sigma * (2.0 * (1.0 / delta).ln()).sqrt())
}

/// Right-hand side of the equivalence condition between the regularized and
/// the worst-case formulation: when the empirical conditional standard
/// deviation exceeds this value at every tested decision, the two coincide
/// with probability at least 1 - delta.
pub fn dro_equivalence_rhs(inputs: &BoundInputs) -> Result<f64, EstimatorError> {
    inputs.check_common()?;
    let c_lambda = BoundInputs::require(inputs.c_lambda, "c_lambda")?;
    let tau = BoundInputs::require(inputs.tau, "tau")?;
    let eta = BoundInputs::require(inputs.resolution, "resolution")?;
    let lipschitz = BoundInputs::require(inputs.lipschitz, "lipschitz")?;
    let diameter = BoundInputs::require(inputs.diameter, "diameter")?;
    let dim = BoundInputs::require(inputs.decision_dim, "decision_dim")?;
    if !(tau > 0.0) {
        return Err(EstimatorError::InvalidInput("tau must be positive".into()));
    }
    let denom = inputs.denominator();
    let log_term = ln_covering(diameter, dim, eta)? - inputs.delta.ln() + (1.0 + 2.0 / tau).ln();
    Ok(c_lambda / denom.sqrt() + tau + (log_term / denom).sqrt() + 2.0 * lipschitz * eta)
}
