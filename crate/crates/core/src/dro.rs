//! Worst-case weighted expectation over a modified chi-square ball around
//! the kernel weights.
//!
//! The ball is `{ w in simplex : sum_i (w_i - wbar_i)^2 / (2 wbar_i) <= rho }`
//! with `rho = lambda^2 / 2`. When the weighted variance of the losses is
//! large enough the maximizer has a closed form and the value equals
//! mean + lambda * stddev; otherwise an active-set KKT solve clamps
//! low-loss atoms to zero one at a time. Every solve also returns a dual
//! certificate for the second-order-cone dual of the inner problem.

use ndarray::{Array1, ArrayView1, ArrayView2};
use thiserror::Error;

use crate::estimator::LossModel;
use crate::kernel::WeightVector;

#[derive(Debug, Error)]
pub enum DroError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("active-set solve did not converge (KKT residual {kkt_residual:e})")]
    NonConvergence { kkt_residual: f64 },
    #[error("dual point infeasible at index {index}: {message}")]
    ConstraintViolation { index: usize, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Radius and center of the ambiguity ball. Center weights must be strictly
/// positive since they divide the constraint.
#[derive(Debug, Clone)]
pub struct AmbiguitySpec {
    radius: f64,
    center: WeightVector,
}

impl AmbiguitySpec {
    pub fn new(radius: f64, center: WeightVector) -> Result<Self, DroError> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(DroError::InvalidInput(format!(
                "radius must be nonnegative and finite, got {radius}"
            )));
        }
        if let Some(i) = center.iter().position(|w| *w <= 0.0) {
            return Err(DroError::InvalidInput(format!(
                "center weight {i} is zero; the ambiguity constraint divides by it"
            )));
        }
        Ok(Self { radius, center })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// rho = lambda^2 / 2.
    pub fn rho(&self) -> f64 {
        0.5 * self.radius * self.radius
    }

    pub fn center(&self) -> &WeightVector {
        &self.center
    }
}

/// Multipliers certifying the solve through the conic dual.
#[derive(Debug, Clone)]
pub struct DualCertificate {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub nu: f64,
}

#[derive(Debug, Clone)]
pub struct WorstCaseResult {
    pub value: f64,
    pub worst_weights: WeightVector,
    /// Whether the closed-form path produced the result.
    pub tight: bool,
    pub dual: DualCertificate,
}

const COMPLEMENTARITY_TOL: f64 = 1e-10;

fn weighted_mean(weights: &[f64], z: &[f64]) -> f64 {
    weights.iter().zip(z.iter()).map(|(w, v)| w * v).sum()
}

fn check_inputs(z: &[f64], spec: &AmbiguitySpec) -> Result<(), DroError> {
    if z.len() != spec.center.len() {
        return Err(DroError::InvalidInput(format!(
            "loss length {} does not match center length {}",
            z.len(),
            spec.center.len()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(DroError::InvalidInput("losses must be finite".into()));
    }
    Ok(())
}

/// Exact maximizer of the worst-case weighted expectation. Takes the
/// closed-form path when the shifted weights stay nonnegative and falls back
/// to [`worst_case_active_set`] otherwise.
pub fn worst_case_expectation(
    z: &[f64],
    spec: &AmbiguitySpec,
) -> Result<WorstCaseResult, DroError> {
    check_inputs(z, spec)?;
    let wbar = spec.center.as_slice();
    let lambda = spec.radius;
    let rho = spec.rho();
    let mean = weighted_mean(wbar, z);
    let s: f64 = wbar
        .iter()
        .zip(z.iter())
        .map(|(w, v)| w * (v - mean) * (v - mean))
        .sum();

    if lambda == 0.0 || s <= 0.0 {
        // Degenerate ball or constant losses: the center attains the optimum
        // and the ball multiplier plays no role in the certificate.
        let dual = certificate_from_multipliers(z, wbar, wbar, mean, 0.0, lambda);
        return Ok(WorstCaseResult {
            value: mean,
            worst_weights: spec.center.clone(),
            tight: true,
            dual,
        });
    }

    // Closed form w_i = wbar_i (1 + sqrt(2 rho / s) (z_i - mean)), feasible
    // exactly when the most negative shift stays above -1.
    let step = (2.0 * rho / s).sqrt();
    let z_min = z.iter().cloned().fold(f64::INFINITY, f64::min);
    if step * (mean - z_min) <= 1.0 {
        let mut weights: Vec<f64> = wbar
            .iter()
            .zip(z.iter())
            .map(|(w, v)| w * (1.0 + step * (v - mean)))
            .collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let value = mean + lambda * s.sqrt();
        let nu_p = 1.0 / step;
        let dual = certificate_from_multipliers(z, wbar, &weights, mean, nu_p, lambda);
        return Ok(WorstCaseResult {
            value,
            worst_weights: WeightVector::new(weights)
                .map_err(|e| DroError::Numerical(e.to_string()))?,
            tight: true,
            dual,
        });
    }

    worst_case_active_set(z, spec)
}

struct FaceSolution {
    weights: Vec<f64>,
    alpha: f64,
    nu: f64,
    value: f64,
}

/// Maximizer restricted to the face with the `active` coordinates clamped to
/// zero, with the ball constraint treated as tight (or inactive when the
/// losses are constant on the face). Returns None when the face lies outside
/// the ball. `loss_scale` sets the threshold below which the face variance
/// counts as rounding noise from constant losses.
fn solve_face(
    z: &[f64],
    wbar: &[f64],
    rho: f64,
    active: &[bool],
    loss_scale: f64,
) -> Option<FaceSolution> {
    let n = z.len();
    let s_b: f64 = (0..n).filter(|&i| !active[i]).map(|i| wbar[i]).sum();
    if s_b <= 0.0 {
        return None;
    }
    // Squared ball slack on this face: 2 rho - (1 - S_B)/S_B.
    let rad_sq = 2.0 * rho - (1.0 - s_b) / s_b;
    if rad_sq < -1e-15 {
        return None;
    }
    let kappa = (1.0 - s_b) / s_b;
    let m_b: f64 = (0..n)
        .filter(|&i| !active[i])
        .map(|i| wbar[i] * z[i])
        .sum::<f64>()
        / s_b;
    let v_b: f64 = (0..n)
        .filter(|&i| !active[i])
        .map(|i| wbar[i] * (z[i] - m_b) * (z[i] - m_b))
        .sum::<f64>()
        / s_b;

    let degenerate_variance = (1e-12 * loss_scale) * (1e-12 * loss_scale);
    if v_b <= degenerate_variance || rad_sq <= 0.0 {
        // Constant losses on the face or no slack left: nearest face point.
        let mut weights = vec![0.0; n];
        for i in 0..n {
            if !active[i] {
                weights[i] = wbar[i] * (1.0 + kappa);
            }
        }
        return Some(FaceSolution {
            weights,
            alpha: m_b,
            nu: 0.0,
            value: m_b,
        });
    }

    let nu = (s_b * v_b / rad_sq).sqrt();
    let mut weights = vec![0.0; n];
    for i in 0..n {
        if !active[i] {
            weights[i] = wbar[i] * (1.0 + (z[i] - m_b) / nu + kappa);
        }
    }
    let alpha = m_b - nu * kappa;
    let value = m_b + (s_b * v_b * rad_sq).sqrt();
    Some(FaceSolution {
        weights,
        alpha,
        nu,
        value,
    })
}

/// Active-set KKT solve of the worst-case problem. At the optimum the
/// clamped indices are exactly those with losses below the dual threshold
/// alpha - nu, so the cascade grows the clamped set through the losses in
/// ascending order (ties by smallest index) until the face solution is
/// primal feasible and every clamp carries a nonnegative multiplier. The
/// cascade visits at most n faces, within the 2n iteration cap.
pub fn worst_case_active_set(
    z: &[f64],
    spec: &AmbiguitySpec,
) -> Result<WorstCaseResult, DroError> {
    check_inputs(z, spec)?;
    let wbar = spec.center.as_slice();
    let n = z.len();
    let rho = spec.rho();
    // Complementarity on the multipliers lives on the loss scale.
    let z_min = z.iter().cloned().fold(f64::INFINITY, f64::min);
    let z_max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let loss_scale = (z_max - z_min) + 1e-9 * z_max.abs().max(z_min.abs()).max(1.0);
    let release_tol = COMPLEMENTARITY_TOL * (1.0 + z_max - z_min);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| z[i].partial_cmp(&z[j]).unwrap().then(i.cmp(&j)));

    let mut active = vec![false; n];
    let mut last_residual = f64::INFINITY;
    for k in 0..n {
        if k > 0 {
            active[order[k - 1]] = true;
        }
        let sol = match solve_face(z, wbar, rho, &active, loss_scale) {
            Some(sol) => sol,
            None => continue,
        };
        let primal_violation = (0..n)
            .filter(|&i| !active[i])
            .map(|i| -sol.weights[i])
            .fold(0.0f64, f64::max);
        let dual_violation = (0..n)
            .filter(|&i| active[i])
            .map(|i| z[i] - (sol.alpha - sol.nu))
            .fold(0.0f64, f64::max);
        if primal_violation > COMPLEMENTARITY_TOL || dual_violation > release_tol {
            last_residual = primal_violation.max(dual_violation);
            continue;
        }

        let mut weights = sol.weights;
        for w in &mut weights {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let dual = certificate_from_multipliers(z, wbar, &weights, sol.alpha, sol.nu, spec.radius);
        return Ok(WorstCaseResult {
            value: sol.value,
            worst_weights: WeightVector::new(weights)
                .map_err(|e| DroError::Numerical(e.to_string()))?,
            tight: false,
            dual,
        });
    }
    Err(DroError::NonConvergence {
        kkt_residual: last_residual,
    })
}

/// Builds the conic dual point from the primal solution and its multipliers.
/// For a positive ball multiplier, beta_i = -nu_p (w_i - wbar_i) /
/// sqrt(wbar_i) and nu = ||beta||; for an inactive ball the cone pair is
/// zero; for a zero radius the nu term vanishes from the objective and every
/// constraint is tightened directly. alpha is lifted just enough to cover
/// every constraint.
fn certificate_from_multipliers(
    z: &[f64],
    wbar: &[f64],
    weights: &[f64],
    alpha_p: f64,
    nu_p: f64,
    lambda: f64,
) -> DualCertificate {
    let n = z.len();
    let mut beta = vec![0.0; n];
    if lambda == 0.0 {
        let z_max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..n {
            beta[i] = wbar[i].sqrt() * (z_max - z[i]);
        }
        let nu = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
        return DualCertificate {
            alpha: z_max,
            beta,
            nu,
        };
    }
    if nu_p > 0.0 {
        for i in 0..n {
            beta[i] = -nu_p * (weights[i] - wbar[i]) / wbar[i].sqrt();
        }
    }
    let mut alpha = alpha_p;
    for i in 0..n {
        alpha = alpha.max(z[i] + beta[i] / wbar[i].sqrt());
    }
    let nu = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    DualCertificate { alpha, beta, nu }
}

#[derive(Debug, Clone, Copy)]
pub struct Sandwich {
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
}

/// Evaluates mean + (lambda stddev - lambda^2)_+, the exact worst case, and
/// mean + lambda stddev, and checks their ordering.
pub fn sandwich_check(
    z: &[f64],
    center: &WeightVector,
    lambda: f64,
) -> Result<Sandwich, DroError> {
    let spec = AmbiguitySpec::new(lambda, center.clone())?;
    let mean = weighted_mean(center.as_slice(), z);
    let s: f64 = center
        .as_slice()
        .iter()
        .zip(z.iter())
        .map(|(w, v)| w * (v - mean) * (v - mean))
        .sum();
    let stddev = s.max(0.0).sqrt();
    let lower = mean + (lambda * stddev - lambda * lambda).max(0.0);
    let upper = mean + lambda * stddev;
    let value = worst_case_expectation(z, &spec)?.value;
    if lower > value + 1e-9 || value > upper + 1e-9 {
        return Err(DroError::Numerical(format!(
            "sandwich violated: {lower} <= {value} <= {upper} fails"
        )));
    }
    Ok(Sandwich {
        lower,
        value,
        upper,
    })
}

/// Objective of a feasible point of the conic dual,
/// alpha - sum_i sqrt(wbar_i) beta_i + lambda nu. Validates the cone and the
/// per-sample constraints first.
pub fn dual_objective(
    z: &[f64],
    center: &WeightVector,
    lambda: f64,
    alpha: f64,
    beta: &[f64],
    nu: f64,
) -> Result<f64, DroError> {
    if beta.len() != z.len() || z.len() != center.len() {
        return Err(DroError::InvalidInput("length mismatch".into()));
    }
    let beta_norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    if beta_norm > nu + 1e-9 {
        return Err(DroError::ConstraintViolation {
            index: 0,
            message: format!("(beta, nu) outside the cone: ||beta|| = {beta_norm} > nu = {nu}"),
        });
    }
    for i in 0..z.len() {
        let rhs = z[i] + beta[i] / center[i].sqrt();
        if alpha < rhs - 1e-9 {
            return Err(DroError::ConstraintViolation {
                index: i,
                message: format!("alpha = {alpha} < loss + beta/sqrt(w) = {rhs}"),
            });
        }
    }
    let dot: f64 = center
        .iter()
        .zip(beta.iter())
        .map(|(w, b)| w.sqrt() * b)
        .sum();
    Ok(alpha - dot + lambda * nu)
}

/// Danskin subgradient of the worst-case objective at `x`: the loss
/// subgradients averaged under the worst-case weights.
pub fn worst_case_subgradient(
    model: &LossModel,
    x: ArrayView1<'_, f64>,
    outcomes: ArrayView2<'_, f64>,
    center: &WeightVector,
    lambda: f64,
) -> Result<Array1<f64>, DroError> {
    if outcomes.nrows() != center.len() {
        return Err(DroError::InvalidInput(format!(
            "outcome rows {} do not match weights {}",
            outcomes.nrows(),
            center.len()
        )));
    }
    let losses: Vec<f64> = outcomes
        .rows()
        .into_iter()
        .map(|xi| model.evaluate(x, xi))
        .collect();
    let spec = AmbiguitySpec::new(lambda, center.clone())?;
    let result = worst_case_expectation(&losses, &spec)?;
    let mut grad = Array1::zeros(x.len());
    for (i, xi) in outcomes.rows().into_iter().enumerate() {
        let w = result.worst_weights[i];
        if w > 0.0 {
            grad = grad + model.subgradient(x, xi) * w;
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn spec(lambda: f64, center: Vec<f64>) -> AmbiguitySpec {
        AmbiguitySpec::new(lambda, WeightVector::new(center).unwrap()).unwrap()
    }

    fn ball_distance(weights: &WeightVector, center: &[f64]) -> f64 {
        weights
            .iter()
            .zip(center.iter())
            .map(|(w, c)| (w - c) * (w - c) / (2.0 * c))
            .sum()
    }

    /// Analytic oracle for n = 2: the feasible set is an interval in the
    /// first weight, so the linear objective peaks at an endpoint.
    fn oracle_n2(z: [f64; 2], center: [f64; 2], lambda: f64) -> f64 {
        let rho = 0.5 * lambda * lambda;
        let a = 1.0 / (2.0 * center[0]) + 1.0 / (2.0 * center[1]);
        let half_width = (rho / a).sqrt();
        let lo = (center[0] - half_width).max(0.0);
        let hi = (center[0] + half_width).min(1.0);
        let val = |t: f64| t * z[0] + (1.0 - t) * z[1];
        val(lo).max(val(hi))
    }

    #[test]
    fn zero_radius_returns_center() {
        let s = spec(0.0, vec![0.3, 0.7]);
        let r = worst_case_expectation(&[0.2, 0.9], &s).unwrap();
        assert!((r.value - (0.3 * 0.2 + 0.7 * 0.9)).abs() < 1e-15);
        assert_eq!(r.worst_weights.as_slice(), &[0.3, 0.7]);
        assert!(r.tight);
    }

    #[test]
    fn boundary_closed_form_example() {
        // s = 0.25 = 2 rho at lambda = 0.5: the closed form sits exactly on
        // the nonnegativity boundary.
        let s = spec(0.5, vec![0.5, 0.5]);
        let r = worst_case_expectation(&[0.0, 1.0], &s).unwrap();
        assert!((r.value - 0.75).abs() < 1e-12);
        assert!((r.worst_weights[0] - 0.25).abs() < 1e-12);
        assert!((r.worst_weights[1] - 0.75).abs() < 1e-12);
        assert!(r.tight);
        assert!((r.value - oracle_n2([0.0, 1.0], [0.5, 0.5], 0.5)).abs() < 1e-12);
    }

    #[test]
    fn large_radius_point_mass() {
        let s = spec(2.0, vec![0.5, 0.5]);
        let r = worst_case_expectation(&[0.0, 1.0], &s).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.worst_weights[0].abs() < 1e-12);
        assert!((r.worst_weights[1] - 1.0).abs() < 1e-12);
        assert!(ball_distance(&r.worst_weights, &[0.5, 0.5]) <= s.rho() + 1e-9);
        assert!((r.value - oracle_n2([0.0, 1.0], [0.5, 0.5], 2.0)).abs() < 1e-12);
    }

    #[test]
    fn intermediate_radius_matches_n2_oracle() {
        for lambda in [0.1, 0.3, 0.8, 1.2, 1.7] {
            for z in [[0.1, 0.9], [0.6, 0.2], [0.0, 1.0]] {
                for c in [[0.5, 0.5], [0.2, 0.8], [0.9, 0.1]] {
                    let s = spec(lambda, c.to_vec());
                    let r = worst_case_expectation(&z, &s).unwrap();
                    let oracle = oracle_n2(z, c, lambda);
                    assert!(
                        (r.value - oracle).abs() < 1e-10,
                        "lambda={lambda} z={z:?} c={c:?}: {} vs {oracle}",
                        r.value
                    );
                    assert!(ball_distance(&r.worst_weights, &c) <= s.rho() + 1e-9);
                }
            }
        }
    }

    #[test]
    fn rejects_zero_center_weight() {
        let err = AmbiguitySpec::new(1.0, WeightVector::new(vec![1.0, 0.0]).unwrap());
        assert!(matches!(err, Err(DroError::InvalidInput(_))));
    }

    #[test]
    fn sandwich_tight_when_variance_large() {
        let center = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let s = sandwich_check(&[0.0, 1.0], &center, 0.5).unwrap();
        assert!((s.value - s.upper).abs() < 1e-12);
        assert!((s.value - 0.75).abs() < 1e-12);
    }

    #[test]
    fn sandwich_zero_lambda_collapses() {
        let center = WeightVector::new(vec![0.3, 0.7]).unwrap();
        let s = sandwich_check(&[0.1, 0.6], &center, 0.0).unwrap();
        assert!((s.lower - s.value).abs() < 1e-15);
        assert!((s.value - s.upper).abs() < 1e-15);
    }

    #[test]
    fn dual_objective_max_z_point() {
        let center = WeightVector::new(vec![0.25, 0.75]).unwrap();
        let z = [0.4, 0.9];
        let v = dual_objective(&z, &center, 0.7, 0.9, &[0.0, 0.0], 0.0).unwrap();
        assert!((v - 0.9).abs() < 1e-15);
    }

    #[test]
    fn dual_objective_rejects_infeasible() {
        let center = WeightVector::new(vec![0.5, 0.5]).unwrap();
        let err = dual_objective(&[0.0, 1.0], &center, 0.5, 0.0, &[0.0, 0.0], 0.0);
        match err {
            Err(DroError::ConstraintViolation { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected constraint violation, got {other:?}"),
        }
        let cone = dual_objective(&[0.0, 1.0], &center, 0.5, 2.0, &[1.0, 1.0], 0.5);
        assert!(matches!(cone, Err(DroError::ConstraintViolation { .. })));
    }

    #[test]
    fn kkt_certificate_matches_primal() {
        let s = spec(0.5, vec![0.5, 0.5]);
        let r = worst_case_expectation(&[0.0, 1.0], &s).unwrap();
        let dual_value = dual_objective(
            &[0.0, 1.0],
            s.center(),
            0.5,
            r.dual.alpha,
            &r.dual.beta,
            r.dual.nu,
        )
        .unwrap();
        assert!(
            (dual_value - r.value).abs() < 1e-7,
            "dual {dual_value} vs primal {}",
            r.value
        );
    }

    #[test]
    fn subgradient_zero_lambda_is_center_average() {
        // Linear loss x * xi on [0,1]^2 supports.
        let model = LossModel::new(
            Box::new(|x, xi| x[0] * xi[0]),
            Box::new(|_x, xi| array![xi[0]]),
            1.0,
            (0.0, 1.0),
        )
        .unwrap();
        let outcomes = Array2::from_shape_vec((2, 1), vec![0.2, 0.8]).unwrap();
        let center = WeightVector::new(vec![0.4, 0.6]).unwrap();
        let g = worst_case_subgradient(
            &model,
            array![0.5].view(),
            outcomes.view(),
            &center,
            0.0,
        )
        .unwrap();
        assert!((g[0] - (0.4 * 0.2 + 0.6 * 0.8)).abs() < 1e-12);
    }

    #[test]
    fn subgradient_constant_loss_is_zero() {
        let model = LossModel::new(
            Box::new(|_x, _xi| 0.5),
            Box::new(|x, _xi| Array1::zeros(x.len())),
            0.0,
            (0.0, 1.0),
        )
        .unwrap();
        let outcomes = Array2::from_shape_vec((3, 1), vec![0.1, 0.2, 0.3]).unwrap();
        let center = WeightVector::uniform(3);
        let g = worst_case_subgradient(
            &model,
            array![0.4, 0.6].view(),
            outcomes.view(),
            &center,
            0.8,
        )
        .unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn subgradient_matches_finite_differences() {
        // Smooth quadratic loss keeps the worst-case objective differentiable
        // away from weight-path kinks.
        let model = LossModel::new(
            Box::new(|x, xi| {
                (x[0] - xi[0]) * (x[0] - xi[0]) + 0.5 * (x[1] - xi[1]) * (x[1] - xi[1])
            }),
            Box::new(|x, xi| array![2.0 * (x[0] - xi[0]), x[1] - xi[1]]),
            4.0,
            (0.0, 8.0),
        )
        .unwrap();
        let outcomes =
            Array2::from_shape_vec((3, 2), vec![0.1, 0.9, 0.7, 0.3, 0.5, 0.5]).unwrap();
        let center = WeightVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        let lambda = 0.4;
        let spec = AmbiguitySpec::new(lambda, center.clone()).unwrap();
        let objective = |x: ArrayView1<'_, f64>| {
            let losses: Vec<f64> = outcomes
                .rows()
                .into_iter()
                .map(|xi| model.evaluate(x, xi))
                .collect();
            worst_case_expectation(&losses, &spec).unwrap().value
        };
        for point in [[0.3, 0.4], [0.8, 0.2], [0.45, 0.7]] {
            let x = array![point[0], point[1]];
            let g = worst_case_subgradient(&model, x.view(), outcomes.view(), &center, lambda)
                .unwrap();
            let eps = 1e-6;
            for k in 0..2 {
                let mut up = x.clone();
                up[k] += eps;
                let mut down = x.clone();
                down[k] -= eps;
                let fd = (objective(up.view()) - objective(down.view())) / (2.0 * eps);
                assert!(
                    (fd - g[k]).abs() < 1e-4,
                    "coordinate {k} at {point:?}: fd {fd} vs {g}"
                );
            }
        }
    }

    #[test]
    fn fast_path_agrees_with_active_set_when_variance_large() {
        let mut rng_state = 88172645463325252u64;
        let mut next = move || {
            // xorshift, plenty for test fixtures
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut checked = 0;
        for _ in 0..400 {
            let n = 2 + (next() * 3.0) as usize;
            let raw: Vec<f64> = (0..n).map(|_| 0.05 + next()).collect();
            let total: f64 = raw.iter().sum();
            let center: Vec<f64> = raw.iter().map(|r| r / total).collect();
            let z: Vec<f64> = (0..n).map(|_| next()).collect();
            let mean = weighted_mean(&center, &z);
            let s: f64 = center
                .iter()
                .zip(z.iter())
                .map(|(w, v)| w * (v - mean) * (v - mean))
                .sum();
            let lambda = 0.9 * s.sqrt();
            if lambda <= 0.0 {
                continue;
            }
            let sp = spec(lambda, center);
            let fast = worst_case_expectation(&z, &sp).unwrap();
            if !fast.tight {
                continue;
            }
            let exact = worst_case_active_set(&z, &sp).unwrap();
            assert!(
                (fast.value - exact.value).abs() < 1e-9,
                "fast {} vs exact {}",
                fast.value,
                exact.value
            );
            checked += 1;
        }
        assert!(checked > 100, "only {checked} tight instances checked");
    }

    proptest! {
        #[test]
        fn value_monotone_in_radius(
            z in proptest::collection::vec(0.0f64..1.0, 2..6),
            raw in proptest::collection::vec(0.05f64..1.0, 6),
        ) {
            let n = z.len();
            let total: f64 = raw[..n].iter().sum();
            let center: Vec<f64> = raw[..n].iter().map(|r| r / total).collect();
            let mut prev = f64::NEG_INFINITY;
            for lambda in [0.0, 0.1, 0.5, 2.0, 50.0] {
                let s = spec(lambda, center.clone());
                let r = worst_case_expectation(&z, &s).unwrap();
                prop_assert!(r.value >= prev - 1e-10);
                prev = r.value;
            }
            let z_max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((prev - z_max).abs() < 1e-9);
        }

        #[test]
        fn shift_and_scale_equivariance(
            z in proptest::collection::vec(0.0f64..1.0, 2..6),
            raw in proptest::collection::vec(0.05f64..1.0, 6),
            shift in -5.0f64..5.0,
            scale in 0.0f64..4.0,
            lambda in 0.0f64..2.0,
        ) {
            let n = z.len();
            let total: f64 = raw[..n].iter().sum();
            let center: Vec<f64> = raw[..n].iter().map(|r| r / total).collect();
            let s = spec(lambda, center.clone());
            let base = worst_case_expectation(&z, &s).unwrap().value;

            let shifted: Vec<f64> = z.iter().map(|v| v + shift).collect();
            let shifted_val = worst_case_expectation(&shifted, &s).unwrap().value;
            prop_assert!((shifted_val - (base + shift)).abs() < 1e-9);

            let scaled: Vec<f64> = z.iter().map(|v| v * scale).collect();
            let scaled_val = worst_case_expectation(&scaled, &s).unwrap().value;
            let mean = weighted_mean(&center, &z);
            prop_assert!((scaled_val - scale * mean - scale * (base - mean)).abs() < 1e-8);
        }

        #[test]
        fn weights_feasible_and_dual_weakly_dominates(
            z in proptest::collection::vec(0.0f64..1.0, 2..5),
            raw in proptest::collection::vec(0.05f64..1.0, 5),
            lambda in 0.0f64..2.0,
        ) {
            let n = z.len();
            let total: f64 = raw[..n].iter().sum();
            let center: Vec<f64> = raw[..n].iter().map(|r| r / total).collect();
            let s = spec(lambda, center.clone());
            let r = worst_case_expectation(&z, &s).unwrap();
            prop_assert!(ball_distance(&r.worst_weights, &center) <= s.rho() + 1e-9);
            let dual_value = dual_objective(
                &z, s.center(), lambda, r.dual.alpha, &r.dual.beta, r.dual.nu,
            ).unwrap();
            prop_assert!(dual_value >= r.value - 1e-7);
            prop_assert!(dual_value <= r.value + 1e-7);

            let sandwich = sandwich_check(&z, s.center(), lambda).unwrap();
            prop_assert!(sandwich.lower <= sandwich.value + 1e-9);
            prop_assert!(sandwich.value <= sandwich.upper + 1e-9);
        }
    }
}
