//! Wind commitment study on synthetic data: rolling-window robust
//! commitments with PCA-reduced covariates, cross-validated bandwidth and
//! radius, benchmarked against uniform-weight and unregularized variants.

use ctxopt_core::kernel::{KernelSpec, WeightVector};
use ctxopt_core::solvers::{solve_wind_dro, wind_loss, Schedule};
use ctxopt_core::subspace::{fit_subspace, reduced_nw_weights, split_sample, SubspaceError};
use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::config::{bandwidth, ExperimentConfig};
use crate::cv::cross_validate;
use crate::error::BenchError;
use crate::gen::{gen_wind_synthetic, WindDay, WindParams, WIND_HOURS};
use crate::io::{format_float, save_result_rows, save_table, ResultRow};

use super::{improvement, percentile, positive_weights, weights_or_uniform};

const WIND_SOLVE_ITERS: usize = 1200;

#[derive(Debug, Clone)]
pub struct WindOutcome {
    pub rows: Vec<ResultRow>,
    /// Per-method improvements over the sample-average baseline, one per
    /// trial.
    pub improvements: Vec<(String, Vec<f64>)>,
}

struct Window<'a> {
    days: &'a [WindDay],
    /// Sample i pairs covariate = production of day start+i with the prices
    /// and production of day start+i+1.
    start: usize,
    n: usize,
}

impl<'a> Window<'a> {
    fn covariates(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, WIND_HOURS));
        for i in 0..self.n {
            for j in 0..WIND_HOURS {
                out[[i, j]] = self.days[self.start + i].production[j];
            }
        }
        out
    }

    fn outcome_prices(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, WIND_HOURS));
        for i in 0..self.n {
            for j in 0..WIND_HOURS {
                out[[i, j]] = self.days[self.start + i + 1].prices[j];
            }
        }
        out
    }

    fn outcome_production(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, WIND_HOURS));
        for i in 0..self.n {
            for j in 0..WIND_HOURS {
                out[[i, j]] = self.days[self.start + i + 1].production[j];
            }
        }
        out
    }

    /// Covariate of the decision day: production of the last observed day.
    fn query(&self) -> Array1<f64> {
        Array1::from_vec(self.days[self.start + self.n].production.clone())
    }
}

/// Kernel weights over the window samples, after PCA reduction when enabled.
/// Returns the window-sample indices the weights refer to: all of them, or
/// the weighting part when the subspace is estimated on a disjoint split.
fn window_weights(
    cfg: &ExperimentConfig,
    window: &Window<'_>,
    c_h: f64,
) -> Result<(Vec<usize>, WeightVector), BenchError> {
    let covariates = window.covariates();
    let query = window.query();
    if cfg.pca.enabled {
        let p_prime = cfg.pca.intrinsic_dim;
        let (sample_indices, fit_rows, weight_rows) = if cfg.pca.split {
            let split = split_sample(window.n, cfg.pca.split_fraction, cfg.seed)?;
            let fit = covariates.select(ndarray::Axis(0), &split.fit_indices);
            let weight = covariates.select(ndarray::Axis(0), &split.weight_indices);
            (split.weight_indices, fit, weight)
        } else {
            let all: Vec<usize> = (0..window.n).collect();
            (all, covariates.clone(), covariates.clone())
        };
        let model = fit_subspace(fit_rows.view(), p_prime)?;
        let h = bandwidth(c_h, sample_indices.len(), p_prime);
        let spec = KernelSpec::new(cfg.kernel_family(), h, p_prime)?;
        let weights = weights_or_uniform(
            reduced_nw_weights(&spec, &model, weight_rows.view(), query.view())
                .map_err(into_kernel_error),
            sample_indices.len(),
        )?;
        Ok((sample_indices, weights))
    } else {
        let h = bandwidth(c_h, window.n, WIND_HOURS);
        let spec = KernelSpec::new(cfg.kernel_family(), h, WIND_HOURS)?;
        let weights = weights_or_uniform(
            ctxopt_core::kernel::nw_weights(&spec, covariates.view(), query.view()),
            window.n,
        )?;
        Ok(((0..window.n).collect(), weights))
    }
}

/// Unwraps the kernel error from the subspace layer so the degenerate-weight
/// fallback can recognize it.
fn into_kernel_error(e: SubspaceError) -> ctxopt_core::kernel::KernelError {
    match e {
        SubspaceError::Kernel(k) => k,
        other => ctxopt_core::kernel::KernelError::InvalidSpec(other.to_string()),
    }
}

/// Solves one commitment and returns the realized profit on the decision
/// day. `uniform` bypasses the kernel weights for the SAA baseline.
fn realized_profit(
    cfg: &ExperimentConfig,
    window: &Window<'_>,
    c_h: f64,
    lambda: f64,
    uniform: bool,
) -> Result<f64, BenchError> {
    let (keep, weights) = if uniform {
        ((0..window.n).collect(), WeightVector::uniform(window.n))
    } else {
        let (sample_indices, weights) = window_weights(cfg, window, c_h)?;
        let (kept_local, weights) = positive_weights(&weights);
        let keep: Vec<usize> = kept_local.iter().map(|&k| sample_indices[k]).collect();
        (keep, weights)
    };
    let prices = window.outcome_prices().select(ndarray::Axis(0), &keep);
    let production = window.outcome_production().select(ndarray::Axis(0), &keep);
    let report = solve_wind_dro(
        prices.view(),
        production.view(),
        &weights,
        lambda,
        &Schedule::with_iters(WIND_SOLVE_ITERS),
    )?;
    let decision_day = &window.days[window.start + window.n + 1];
    let prices = Array1::from_vec(decision_day.prices.clone());
    let production = Array1::from_vec(decision_day.production.clone());
    Ok(-wind_loss(
        report.decision.view(),
        prices.view(),
        production.view(),
    ))
}

struct TrialResult {
    rows: Vec<ResultRow>,
    totals: Vec<(String, f64)>,
}

/// Cross-validates the bandwidth constant and radius on one trial's first
/// training window: the first two thirds of its samples train, the rest
/// validate, scored by total realized profit.
pub fn select_parameters(cfg: &ExperimentConfig, trial: usize) -> Result<(f64, f64), BenchError> {
    let n = cfg.n;
    let decisions = cfg.decision_days.unwrap_or(25);
    let params = WindParams::for_season(trial % 4);
    let days = gen_wind_synthetic(n + 1 + decisions, &params, cfg.seed, trial as u64);
    let sub_n = (2 * n) / 3;
    cross_validate(&cfg.kernel.c_h_grid, &cfg.lambda_grid, |c_h, lambda| {
        let mut total = 0.0;
        for v in sub_n..n {
            // Validation sample v plays the decision day: its covariate is
            // the production of day v, its outcome is day v + 1.
            let window = Window {
                days: &days[..=v + 1],
                start: v - sub_n,
                n: sub_n,
            };
            total += realized_profit(cfg, &window, c_h, lambda, false)?;
        }
        Ok(total)
    })
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialResult, BenchError> {
    let n = cfg.n;
    let decisions = cfg.decision_days.unwrap_or(25);
    let params = WindParams::for_season(trial % 4);
    let days = gen_wind_synthetic(n + 1 + decisions, &params, cfg.seed, trial as u64);
    let (c_h, lambda) = select_parameters(cfg, trial)?;

    let methods: [(&str, f64, bool); 3] = [
        ("saa", 0.0, true),
        ("nw", 0.0, false),
        ("rnw", lambda, false),
    ];
    let mut rows = Vec::new();
    let mut totals: Vec<(String, f64)> = methods
        .iter()
        .map(|(name, _, _)| (name.to_string(), 0.0))
        .collect();
    for k in 0..decisions {
        let window = Window {
            days: &days,
            start: k,
            n,
        };
        for (m, (name, method_lambda, uniform)) in methods.iter().enumerate() {
            let profit = realized_profit(cfg, &window, c_h, *method_lambda, *uniform)?;
            totals[m].1 += profit;
            rows.push(ResultRow {
                method: name.to_string(),
                trial,
                index: k,
                value: profit,
            });
        }
    }
    Ok(TrialResult { rows, totals })
}

pub fn run_wind(cfg: &ExperimentConfig) -> Result<WindOutcome, BenchError> {
    let trials: Vec<TrialResult> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut improvements: Vec<(String, Vec<f64>)> = vec![
        ("nw".to_string(), Vec::new()),
        ("rnw".to_string(), Vec::new()),
    ];
    for trial in trials {
        let saa_total = trial
            .totals
            .iter()
            .find(|(m, _)| m == "saa")
            .map(|(_, v)| *v)
            .unwrap();
        for (method, series) in improvements.iter_mut() {
            let total = trial
                .totals
                .iter()
                .find(|(m, _)| m == method.as_str())
                .map(|(_, v)| *v)
                .unwrap();
            series.push(improvement(total, saa_total));
        }
        rows.extend(trial.rows);
    }
    Ok(WindOutcome { rows, improvements })
}

impl WindOutcome {
    pub fn improvement_stats(&self, method: &str) -> (f64, f64, f64) {
        let series = &self
            .improvements
            .iter()
            .find(|(m, _)| m == method)
            .unwrap()
            .1;
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        (mean, percentile(series, 20.0), percentile(series, 80.0))
    }

    pub fn write_csv(&self, cfg: &ExperimentConfig) -> Result<(), BenchError> {
        save_result_rows(&self.rows, &cfg.out.join("wind_results.csv"))?;
        let mut summary = Vec::new();
        for (method, _) in &self.improvements {
            let (mean, p20, p80) = self.improvement_stats(method);
            summary.push(vec![
                method.clone(),
                format_float(mean),
                format_float(p20),
                format_float(p80),
            ]);
        }
        save_table(
            &["method", "mean_improvement", "p20", "p80"],
            &summary,
            &cfg.out.join("wind_summary.csv"),
        )?;
        Ok(())
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for (method, _) in &self.improvements {
            let (mean, p20, p80) = self.improvement_stats(method);
            out.push_str(&format!(
                "wind {method}: improvement over saa mean {mean:.3} p20 {p20:.3} p80 {p80:.3}\n"
            ));
        }
        out
    }
}

/// Deployment diagnostic: total profit of the kernel-weighted method at each
/// given radius over one trial's rolling windows, plus the uniform-weight
/// baseline total. Used by examples and tuning, not by the protocol itself.
pub fn deployment_totals(
    cfg: &ExperimentConfig,
    trial: usize,
    c_h: f64,
    lambdas: &[f64],
) -> Result<(f64, Vec<f64>), BenchError> {
    let n = cfg.n;
    let decisions = cfg.decision_days.unwrap_or(25);
    let params = WindParams::for_season(trial % 4);
    let days = gen_wind_synthetic(n + 1 + decisions, &params, cfg.seed, trial as u64);
    let mut saa_total = 0.0;
    let mut totals = vec![0.0; lambdas.len()];
    for k in 0..decisions {
        let window = Window {
            days: &days,
            start: k,
            n,
        };
        saa_total += realized_profit(cfg, &window, c_h, 0.0, true)?;
        for (j, &lambda) in lambdas.iter().enumerate() {
            totals[j] += realized_profit(cfg, &window, c_h, lambda, false)?;
        }
    }
    Ok((saa_total, totals))
}
