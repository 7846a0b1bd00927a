//! Outer minimization over structured feasible sets: projected subgradient
//! descent, scalar golden-section search, and the problem-specific drivers
//! for the portfolio, newsvendor, wind-commitment, and linear-decision-rule
//! programs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

use crate::dro::{worst_case_expectation, AmbiguitySpec, DroError};
use crate::kernel::WeightVector;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("objective became non-finite at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },
    #[error(transparent)]
    Dro(#[from] DroError),
}

/// Feasible sets with cheap Euclidean projections.
#[derive(Debug, Clone)]
pub enum FeasibleSet {
    Simplex {
        dim: usize,
    },
    Box {
        lower: Array1<f64>,
        upper: Array1<f64>,
    },
    HalfspacePolytope {
        a: Array2<f64>,
        b: Array1<f64>,
        diameter: f64,
    },
}

impl FeasibleSet {
    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Simplex { dim } => *dim,
            FeasibleSet::Box { lower, .. } => lower.len(),
            FeasibleSet::HalfspacePolytope { a, .. } => a.ncols(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleSet::Simplex { .. } => std::f64::consts::SQRT_2,
            FeasibleSet::Box { lower, upper } => {
                (upper - lower).iter().map(|d| d * d).sum::<f64>().sqrt()
            }
            FeasibleSet::HalfspacePolytope { diameter, .. } => *diameter,
        }
    }

    pub fn project(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        match self {
            FeasibleSet::Simplex { .. } => project_simplex(v),
            FeasibleSet::Box { lower, upper } => {
                let mut out = v.to_owned();
                for i in 0..out.len() {
                    out[i] = out[i].clamp(lower[i], upper[i]);
                }
                out
            }
            FeasibleSet::HalfspacePolytope { a, b, .. } => {
                project_polytope(v, a.view(), b.view(), 2000)
            }
        }
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: ArrayView1<'_, f64>) -> Array1<f64> {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.mapv(|x| (x - theta).max(0.0))
}

/// Dykstra's alternating projections onto the halfspaces `a_i^T x <= b_i`.
/// Converges to the Euclidean projection onto their intersection.
pub fn project_polytope(
    v: ArrayView1<'_, f64>,
    a: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
    max_sweeps: usize,
) -> Array1<f64> {
    let m = a.nrows();
    let mut x = v.to_owned();
    let mut corrections = vec![Array1::<f64>::zeros(v.len()); m];
    for _ in 0..max_sweeps {
        let mut change = 0.0f64;
        for i in 0..m {
            let y = &x + &corrections[i];
            let row = a.row(i);
            let norm_sq = row.dot(&row);
            let violation = (row.dot(&y) - b[i]).max(0.0);
            let projected = if norm_sq > 0.0 && violation > 0.0 {
                &y - &(&row * (violation / norm_sq))
            } else {
                y.clone()
            };
            corrections[i] = &y - &projected;
            change += (&projected - &x).iter().map(|d| d * d).sum::<f64>();
            x = projected;
        }
        if change.sqrt() < 1e-14 {
            break;
        }
    }
    x
}

/// Step schedule and iteration budget for the projected subgradient method.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub max_iters: usize,
    /// Step numerator c in c / sqrt(t); default is diameter over the first
    /// subgradient norm.
    pub step_scale: Option<f64>,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            step_scale: None,
        }
    }
}

impl Schedule {
    pub fn with_iters(max_iters: usize) -> Self {
        Self {
            max_iters,
            step_scale: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub decision: Array1<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub final_step: f64,
    pub converged: bool,
    /// Best objective seen after each iteration; nonincreasing.
    pub trace: Vec<f64>,
}

const CONVERGENCE_WINDOW: usize = 100;
const CONVERGENCE_TOL: f64 = 1e-8;

/// Projected subgradient descent with step c / sqrt(t), returning the best
/// iterate. The caller guarantees convexity of the objective on the set.
pub fn minimize_subgradient<F>(
    mut oracle: F,
    set: &FeasibleSet,
    x0: ArrayView1<'_, f64>,
    schedule: &Schedule,
) -> Result<SolveReport, SolverError>
where
    F: FnMut(ArrayView1<'_, f64>) -> (f64, Array1<f64>),
{
    if x0.len() != set.dim() {
        return Err(SolverError::InvalidInput(format!(
            "start point dimension {} does not match set dimension {}",
            x0.len(),
            set.dim()
        )));
    }
    let mut x = set.project(x0);
    let mut best_x = x.clone();
    let mut best_value = f64::INFINITY;
    let mut trace = Vec::with_capacity(schedule.max_iters.min(10_000));
    let mut step_scale = schedule.step_scale;
    let mut step = 0.0;
    let mut last_window_best = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=schedule.max_iters {
        iterations = t;
        let (value, grad) = oracle(x.view());
        if !value.is_finite() {
            return Err(SolverError::NonFiniteObjective { iteration: t });
        }
        if value < best_value {
            best_value = value;
            best_x = x.clone();
        }
        trace.push(best_value);

        let grad_norm = grad.dot(&grad).sqrt();
        if step_scale.is_none() {
            if grad_norm == 0.0 {
                converged = true;
                break;
            }
            step_scale = Some(set.diameter() / grad_norm);
        }
        step = step_scale.unwrap() / (t as f64).sqrt();
        x = set.project((&x - &(&grad * step)).view());

        if t % CONVERGENCE_WINDOW == 0 {
            if last_window_best - best_value < CONVERGENCE_TOL {
                converged = true;
                break;
            }
            last_window_best = best_value;
        }
    }

    Ok(SolveReport {
        decision: best_x,
        objective: best_value,
        iterations,
        final_step: step,
        converged,
        trace,
    })
}

/// Golden-section search for a unimodal objective on [lo, hi].
pub fn minimize_scalar_convex<F>(
    mut objective: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64), SolverError>
where
    F: FnMut(f64) -> f64,
{
    if !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(SolverError::InvalidInput(format!(
            "invalid interval [{lo}, {hi}]"
        )));
    }
    if hi - lo <= tol {
        let mid = 0.5 * (lo + hi);
        return Ok((mid, objective(mid)));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    let q = 0.5 * (a + b);
    let value = objective(q);
    Ok((q, value))
}

/// Mean-plus-lambda-stddev objective for the linear return loss -xi^T x,
/// with its subgradient. Shared by the portfolio solver and its tests.
pub fn rnw_linear_objective(
    returns: ArrayView2<'_, f64>,
    weights: &WeightVector,
    lambda: f64,
    x: ArrayView1<'_, f64>,
) -> (f64, Array1<f64>) {
    let n = returns.nrows();
    let mut losses = Vec::with_capacity(n);
    let mut mean = 0.0;
    for (i, row) in returns.rows().into_iter().enumerate() {
        let z = -row.dot(&x);
        mean += weights[i] * z;
        losses.push(z);
    }
    let mut variance = 0.0;
    for (i, z) in losses.iter().enumerate() {
        variance += weights[i] * (z - mean) * (z - mean);
    }
    let stddev = variance.max(0.0).sqrt();
    let mut grad = Array1::zeros(x.len());
    for (i, row) in returns.rows().into_iter().enumerate() {
        let mut coeff = weights[i];
        if stddev > 1e-12 {
            coeff += lambda * weights[i] * (losses[i] - mean) / stddev;
        }
        grad = grad - &(&row * coeff);
    }
    (mean + lambda * stddev, grad)
}

/// Minimizes the regularized objective for the linear portfolio loss over
/// the given set.
pub fn solve_rnw_linear(
    returns: ArrayView2<'_, f64>,
    weights: &WeightVector,
    lambda: f64,
    set: &FeasibleSet,
    schedule: &Schedule,
) -> Result<SolveReport, SolverError> {
    if returns.nrows() != weights.len() {
        return Err(SolverError::InvalidInput(format!(
            "{} return rows vs {} weights",
            returns.nrows(),
            weights.len()
        )));
    }
    let x0 = set.project(Array1::zeros(set.dim()).view());
    minimize_subgradient(
        |x| rnw_linear_objective(returns, weights, lambda, x),
        set,
        x0.view(),
        schedule,
    )
}

/// Newsvendor cost h (q - xi)_+ + b (xi - q)_+.
pub fn newsvendor_loss(q: f64, xi: f64, stockout_b: f64, holding_h: f64) -> f64 {
    holding_h * (q - xi).max(0.0) + stockout_b * (xi - q).max(0.0)
}

/// Scalar order quantity minimizing the worst-case newsvendor cost over the
/// ambiguity ball. The search interval defaults to the sample hull.
pub fn solve_newsvendor_dro(
    demands: &[f64],
    weights: &WeightVector,
    stockout_b: f64,
    holding_h: f64,
    lambda: f64,
    q_range: Option<(f64, f64)>,
) -> Result<SolveReport, SolverError> {
    if demands.is_empty() || demands.len() != weights.len() {
        return Err(SolverError::InvalidInput(
            "demands empty or mismatched with weights".into(),
        ));
    }
    let spec = AmbiguitySpec::new(lambda, weights.clone())?;
    let (lo, hi) = q_range.unwrap_or_else(|| {
        let lo = demands.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = demands.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    });
    let mut evals = 0usize;
    let mut objective = |q: f64| {
        evals += 1;
        let losses: Vec<f64> = demands
            .iter()
            .map(|xi| newsvendor_loss(q, *xi, stockout_b, holding_h))
            .collect();
        worst_case_expectation(&losses, &spec)
            .map(|r| r.value)
            .unwrap_or(f64::INFINITY)
    };
    let tol = (1e-6 * (hi - lo)).max(1e-9);
    let (q, value) = minimize_scalar_convex(&mut objective, lo, hi, tol)?;
    Ok(SolveReport {
        decision: Array1::from_elem(1, q),
        objective: value,
        iterations: evals,
        final_step: tol,
        converged: true,
        trace: vec![value],
    })
}

/// Commitment loss -x^T pi + 2 sum_j pi_j (x_j - xi_j)_+ for one day.
pub fn wind_loss(
    x: ArrayView1<'_, f64>,
    prices: ArrayView1<'_, f64>,
    production: ArrayView1<'_, f64>,
) -> f64 {
    let mut loss = -x.dot(&prices);
    for j in 0..x.len() {
        loss += 2.0 * prices[j] * (x[j] - production[j]).max(0.0);
    }
    loss
}

/// Hourly commitment levels minimizing the worst-case penalized revenue loss
/// over the ambiguity ball, solved by projected subgradient on the box
/// [0, columnwise max production].
pub fn solve_wind_dro(
    prices: ArrayView2<'_, f64>,
    production: ArrayView2<'_, f64>,
    weights: &WeightVector,
    lambda: f64,
    schedule: &Schedule,
) -> Result<SolveReport, SolverError> {
    let n = prices.nrows();
    let hours = prices.ncols();
    if n != production.nrows() || hours != production.ncols() || n != weights.len() {
        return Err(SolverError::InvalidInput(
            "price/production/weight shapes disagree".into(),
        ));
    }
    let spec = AmbiguitySpec::new(lambda, weights.clone())?;
    let mut upper = Array1::zeros(hours);
    for j in 0..hours {
        let col_max = production.column(j).iter().cloned().fold(0.0f64, f64::max);
        upper[j] = col_max;
    }
    let set = FeasibleSet::Box {
        lower: Array1::zeros(hours),
        upper,
    };
    // Warm start at the weighted mean production.
    let mut x0 = Array1::zeros(hours);
    for (i, row) in production.rows().into_iter().enumerate() {
        x0 = x0 + &(&row * weights[i]);
    }
    let inner_error = std::cell::RefCell::new(None);
    let oracle = |x: ArrayView1<'_, f64>| {
        let losses: Vec<f64> = (0..n)
            .map(|i| wind_loss(x, prices.row(i), production.row(i)))
            .collect();
        match worst_case_expectation(&losses, &spec) {
            Ok(result) => {
                let mut grad = Array1::zeros(hours);
                for i in 0..n {
                    let w = result.worst_weights[i];
                    if w == 0.0 {
                        continue;
                    }
                    let pi = prices.row(i);
                    let xi = production.row(i);
                    for j in 0..hours {
                        // Right derivative at the kink.
                        let slope = if x[j] >= xi[j] { pi[j] } else { -pi[j] };
                        grad[j] += w * slope;
                    }
                }
                (result.value, grad)
            }
            Err(e) => {
                *inner_error.borrow_mut() = Some(e);
                (f64::NAN, Array1::zeros(hours))
            }
        }
    };
    let report = minimize_subgradient(oracle, &set, x0.view(), schedule);
    if let Some(e) = inner_error.into_inner() {
        return Err(e.into());
    }
    report
}

/// Linear-decision-rule portfolio fit: affine allocations x_i + gamma y for
/// the two risky assets, ridge penalty on the coefficients, per-sample
/// no-short-selling and budget halfspaces.
#[derive(Debug, Clone)]
pub struct LdrSolution {
    pub x1: f64,
    pub x2: f64,
    pub y: f64,
    /// Empirical regularized return of the fitted rule.
    pub objective: f64,
}

pub fn solve_ldr_portfolio(
    gammas: &[f64],
    risky_returns: ArrayView2<'_, f64>,
    lambda_reg: f64,
    schedule: &Schedule,
) -> Result<LdrSolution, SolverError> {
    let n = gammas.len();
    if n == 0 || risky_returns.nrows() != n || risky_returns.ncols() != 2 {
        return Err(SolverError::InvalidInput(
            "need n x 2 risky returns matching gammas".into(),
        ));
    }
    // Each per-sample constraint is affine in gamma, so over the sample set
    // only the extreme gammas bind; the polytope reduces to six halfspaces.
    let g_min = gammas.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = gammas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut a = Array2::zeros((6, 3));
    let mut b = Array1::zeros(6);
    for (k, &g) in [g_min, g_max].iter().enumerate() {
        // -x1 - g y <= 0
        a[[3 * k, 0]] = -1.0;
        a[[3 * k, 2]] = -g;
        // -x2 - g y <= 0
        a[[3 * k + 1, 1]] = -1.0;
        a[[3 * k + 1, 2]] = -g;
        // x1 + x2 + 2 g y <= 1
        a[[3 * k + 2, 0]] = 1.0;
        a[[3 * k + 2, 1]] = 1.0;
        a[[3 * k + 2, 2]] = 2.0 * g;
        b[3 * k + 2] = 1.0;
    }
    let set = FeasibleSet::HalfspacePolytope { a, b, diameter: 2.5 };
    let mean_r1: f64 = risky_returns.column(0).sum() / n as f64;
    let mean_r2: f64 = risky_returns.column(1).sum() / n as f64;
    let mean_cross: f64 = gammas
        .iter()
        .enumerate()
        .map(|(i, g)| g * (risky_returns[[i, 0]] + risky_returns[[i, 1]]))
        .sum::<f64>()
        / n as f64;
    // Minimize the negated concave objective.
    let oracle = |v: ArrayView1<'_, f64>| {
        let (x1, x2, y) = (v[0], v[1], v[2]);
        let value = mean_r1 * x1 + mean_r2 * x2 + mean_cross * y
            - lambda_reg * (x1 * x1 + x2 * x2 + y * y);
        let grad = ndarray::array![
            -(mean_r1 - 2.0 * lambda_reg * x1),
            -(mean_r2 - 2.0 * lambda_reg * x2),
            -(mean_cross - 2.0 * lambda_reg * y),
        ];
        (-value, grad)
    };
    let x0 = ndarray::array![0.4, 0.4, 0.0];
    let report = minimize_subgradient(oracle, &set, x0.view(), schedule)?;
    Ok(LdrSolution {
        x1: report.decision[0],
        x2: report.decision[1],
        y: report.decision[2],
        objective: -report.objective,
    })
}
