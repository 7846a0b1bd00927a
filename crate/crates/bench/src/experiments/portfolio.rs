//! Three-asset portfolio study: regularized kernel weighting against the
//! sample-average baseline and the linear-decision-rule competitor, scored
//! by the exact conditional expected return at fresh probe covariates.

use ctxopt_core::kernel::{nw_weights, KernelSpec, WeightVector};
use ctxopt_core::solvers::{
    solve_ldr_portfolio, solve_rnw_linear, FeasibleSet, LdrSolution, Schedule, SolveReport,
};
use ndarray::{array, ArrayView2};
use rayon::prelude::*;

use crate::config::{bandwidth, ExperimentConfig};
use crate::error::BenchError;
use crate::gen::gen_portfolio;
use crate::io::{format_float, save_result_rows, save_table, ResultRow};
use crate::rng::{sample_uniform, stream_rng};

use super::{percentile, positive_weights, weights_or_uniform};

const LDR_REG_GRID: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];
const PROBE_SOLVE_ITERS: usize = 800;
const ALLOC_SOLVE_ITERS: usize = 4000;

#[derive(Debug, Clone)]
pub struct PortfolioOutcome {
    pub rows: Vec<ResultRow>,
    /// Mean conditional expected return per method over all probes/trials.
    pub method_means: Vec<(String, f64)>,
    pub rnw_mean_return: f64,
    pub ldr_mean_return: f64,
    pub ldr_standard_error: f64,
    /// Risky-asset allocations of the regularized solve at gamma = 0, one
    /// pair per trial.
    pub gamma0_allocations: Vec<(f64, f64)>,
}

struct TrialResult {
    rows: Vec<ResultRow>,
    gamma0_allocation: (f64, f64),
}

/// Exact conditional expected return of a simplex allocation at `gamma`.
fn expected_return(gamma: f64, risky_total: f64) -> f64 {
    (0.5 - gamma * gamma) * risky_total
}

fn solve_probe(
    returns: ArrayView2<'_, f64>,
    weights: &WeightVector,
    lambda: f64,
    iters: usize,
) -> Result<SolveReport, BenchError> {
    let set = FeasibleSet::Simplex { dim: 3 };
    Ok(solve_rnw_linear(
        returns,
        weights,
        lambda,
        &set,
        &Schedule::with_iters(iters),
    )?)
}

/// Fits the linear decision rule, choosing the ridge penalty by the
/// two-thirds/one-third validation split on empirical returns.
fn fit_ldr(gammas: &[f64], risky: ArrayView2<'_, f64>) -> Result<LdrSolution, BenchError> {
    let n = gammas.len();
    let split = (2 * n) / 3;
    let empirical_return = |sol: &LdrSolution, idx: std::ops::Range<usize>| -> f64 {
        let mut total = 0.0;
        for i in idx.clone() {
            total += risky[[i, 0]] * (sol.x1 + gammas[i] * sol.y)
                + risky[[i, 1]] * (sol.x2 + gammas[i] * sol.y);
        }
        total / idx.len() as f64
    };
    let mut best: Option<(f64, f64)> = None;
    for reg in LDR_REG_GRID {
        let sub = solve_ldr_portfolio(
            &gammas[..split],
            risky.slice(ndarray::s![..split, ..]),
            reg,
            &Schedule::with_iters(1500),
        )?;
        let score = empirical_return(&sub, split..n);
        if best.map_or(true, |(s, _)| score > s) {
            best = Some((score, reg));
        }
    }
    let (_, reg) = best.unwrap();
    Ok(solve_ldr_portfolio(
        gammas,
        risky,
        reg,
        &Schedule::with_iters(2500),
    )?)
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialResult, BenchError> {
    let n = cfg.n;
    let data = gen_portfolio(n, cfg.seed, trial as u64 * 8)?;
    let h = bandwidth(cfg.kernel.c_h_grid[0], n, 1);
    let spec = KernelSpec::new(cfg.kernel_family(), h, 1)?;
    let lambda = cfg.lambda_grid[0];
    let probe_count = cfg.probe_count.unwrap_or(300);

    let mut probe_rng = stream_rng(cfg.seed, trial as u64 * 8 + 1);
    let probes: Vec<f64> = (0..probe_count)
        .map(|_| sample_uniform(&mut probe_rng, -1.0, 1.0))
        .collect();

    // The sample-average baseline ignores the covariate, so one solve covers
    // every probe.
    let saa = solve_probe(data.outcomes(), &WeightVector::uniform(n), 0.0, PROBE_SOLVE_ITERS)?;
    let saa_risky = saa.decision[0] + saa.decision[1];

    let gammas: Vec<f64> = data.covariates().column(0).to_vec();
    let risky = data.outcomes().slice(ndarray::s![.., ..2]).to_owned();
    let ldr = fit_ldr(&gammas, risky.view())?;

    let mut rows = Vec::with_capacity(3 * probe_count);
    for (j, &gamma) in probes.iter().enumerate() {
        let weights = weights_or_uniform(
            nw_weights(&spec, data.covariates(), array![gamma].view()),
            n,
        )?;
        let (keep, weights) = positive_weights(&weights);
        let outcomes = data.outcomes().select(ndarray::Axis(0), &keep);
        let rnw = solve_probe(outcomes.view(), &weights, lambda, PROBE_SOLVE_ITERS)?;
        let rnw_risky = rnw.decision[0] + rnw.decision[1];

        rows.push(ResultRow {
            method: "rnw".into(),
            trial,
            index: j,
            value: expected_return(gamma, rnw_risky),
        });
        rows.push(ResultRow {
            method: "saa".into(),
            trial,
            index: j,
            value: expected_return(gamma, saa_risky),
        });
        rows.push(ResultRow {
            method: "ldr".into(),
            trial,
            index: j,
            value: expected_return(gamma, ldr.x1 + ldr.x2 + 2.0 * gamma * ldr.y),
        });
    }

    // Allocation at the zero covariate, solved with a larger budget.
    let weights = weights_or_uniform(nw_weights(&spec, data.covariates(), array![0.0].view()), n)?;
    let (keep, weights) = positive_weights(&weights);
    let outcomes = data.outcomes().select(ndarray::Axis(0), &keep);
    let at_zero = solve_probe(outcomes.view(), &weights, lambda, ALLOC_SOLVE_ITERS)?;

    Ok(TrialResult {
        rows,
        gamma0_allocation: (at_zero.decision[0], at_zero.decision[1]),
    })
}

pub fn run_portfolio(cfg: &ExperimentConfig) -> Result<PortfolioOutcome, BenchError> {
    let trials: Vec<TrialResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut gamma0_allocations = Vec::new();
    for trial in trials {
        rows.extend(trial.rows);
        gamma0_allocations.push(trial.gamma0_allocation);
    }

    let mut method_means = Vec::new();
    for method in ["saa", "rnw", "ldr"] {
        let values: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| r.value)
            .collect();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        method_means.push((method.to_string(), mean));
    }
    let mean_of = |name: &str| {
        method_means
            .iter()
            .find(|(m, _)| m == name)
            .map(|(_, v)| *v)
            .unwrap()
    };
    let ldr_values: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == "ldr")
        .map(|r| r.value)
        .collect();
    let ldr_mean = mean_of("ldr");
    let ldr_var = ldr_values
        .iter()
        .map(|v| (v - ldr_mean) * (v - ldr_mean))
        .sum::<f64>()
        / (ldr_values.len() - 1) as f64;
    let ldr_standard_error = (ldr_var / ldr_values.len() as f64).sqrt();

    Ok(PortfolioOutcome {
        rnw_mean_return: mean_of("rnw"),
        ldr_mean_return: ldr_mean,
        ldr_standard_error,
        method_means,
        gamma0_allocations,
        rows,
    })
}

impl PortfolioOutcome {
    pub fn write_csv(&self, cfg: &ExperimentConfig) -> Result<(), BenchError> {
        save_result_rows(&self.rows, &cfg.out.join("portfolio_results.csv"))?;
        let mut summary = Vec::new();
        for (method, mean) in &self.method_means {
            let values: Vec<f64> = self
                .rows
                .iter()
                .filter(|r| &r.method == method)
                .map(|r| r.value)
                .collect();
            summary.push(vec![
                method.clone(),
                format_float(*mean),
                format_float(percentile(&values, 10.0)),
                format_float(percentile(&values, 90.0)),
            ]);
        }
        save_table(
            &["method", "mean_return", "p10", "p90"],
            &summary,
            &cfg.out.join("portfolio_summary.csv"),
        )?;
        let alloc_rows: Vec<Vec<String>> = self
            .gamma0_allocations
            .iter()
            .enumerate()
            .map(|(t, (a1, a2))| vec![t.to_string(), format_float(*a1), format_float(*a2)])
            .collect();
        save_table(
            &["trial", "asset1", "asset2"],
            &alloc_rows,
            &cfg.out.join("portfolio_gamma0_allocations.csv"),
        )?;
        Ok(())
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for (method, mean) in &self.method_means {
            out.push_str(&format!("portfolio {method}: mean return {mean:.4}\n"));
        }
        out.push_str(&format!(
            "ldr standard error {:.5}\n",
            self.ldr_standard_error
        ));
        out
    }
}
