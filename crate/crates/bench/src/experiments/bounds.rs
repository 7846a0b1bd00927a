//! Monte-Carlo coverage study of the single-decision deviation bound on
//! newsvendor data, where the true conditional law (and hence the exact
//! conditional mean and variance of the loss) is available in closed form.

use ctxopt_core::estimator::{generalization_bound, BoundInputs};
use ctxopt_core::kernel::{kernel_l2_integral, nw_weights, KernelSpec};
use ctxopt_core::solvers::newsvendor_loss;
use ndarray::Array1;
use rayon::prelude::*;

use crate::config::{bandwidth, ExperimentConfig};
use crate::error::BenchError;
use crate::gen::{gen_newsvendor, newsvendor_density, newsvendor_psi};
use crate::io::{format_float, save_table};

use super::newsvendor::{HOLDING_COST, STOCKOUT_COST};
use super::weights_or_uniform;

#[derive(Debug, Clone)]
pub struct BoundsTrialRow {
    pub trial: usize,
    pub empirical: f64,
    pub truth: f64,
    pub bound: f64,
    pub covered: bool,
}

#[derive(Debug, Clone)]
pub struct BoundsOutcome {
    pub rows: Vec<BoundsTrialRow>,
    pub coverage: f64,
    pub delta: f64,
}

/// Exact conditional mean and variance of the newsvendor loss at order
/// quantity `q` when demand is uniform on [psi - 10, psi + 10].
pub fn true_loss_moments(q: f64, psi: f64) -> (f64, f64) {
    let a = psi - 10.0;
    let b = psi + 10.0;
    let width = b - a;
    let q = q.clamp(a, b);
    let mean =
        (HOLDING_COST * (q - a).powi(2) + STOCKOUT_COST * (b - q).powi(2)) / (2.0 * width);
    let second =
        (HOLDING_COST.powi(2) * (q - a).powi(3) + STOCKOUT_COST.powi(2) * (b - q).powi(3))
            / (3.0 * width);
    (mean, (second - mean * mean).max(0.0))
}

fn run_trial(
    cfg: &ExperimentConfig,
    probe: &[f64],
    trial: usize,
) -> Result<BoundsTrialRow, BenchError> {
    let data = gen_newsvendor(cfg.n, cfg.seed, trial as u64)?;
    let h = bandwidth(cfg.kernel.c_h_grid[0], cfg.n, 2);
    let spec = KernelSpec::new(cfg.kernel_family(), h, 2)?;
    let delta = cfg.delta.unwrap_or(0.2);

    let psi = newsvendor_psi(probe[0], probe[1]);
    let q = psi + 2.5;
    let (truth, variance) = true_loss_moments(q, psi);

    let query = Array1::from_vec(probe.to_vec());
    let weights = weights_or_uniform(nw_weights(&spec, data.covariates(), query.view()), cfg.n)?;
    let empirical: f64 = (0..cfg.n)
        .map(|i| {
            weights[i] * newsvendor_loss(q, data.outcomes()[[i, 0]], STOCKOUT_COST, HOLDING_COST)
        })
        .sum();

    // Scaled marginal density from the known covariate law and the kernel.
    let l2 = kernel_l2_integral(&spec)?;
    let g_gamma = newsvendor_density(probe[0], probe[1]) / (2.0 * l2);

    // The deviation event is scale equivariant, so raw loss units with the
    // raw-unit variance are equivalent to calibrated units.
    let inputs = BoundInputs::new(cfg.n, h, 2, delta, g_gamma, variance);
    let bound = generalization_bound(&inputs)?;
    Ok(BoundsTrialRow {
        trial,
        empirical,
        truth,
        bound,
        covered: (truth - empirical).abs() <= bound,
    })
}

pub fn run_bounds(cfg: &ExperimentConfig) -> Result<BoundsOutcome, BenchError> {
    let probe = cfg
        .probes
        .as_ref()
        .and_then(|p| p.first().cloned())
        .unwrap_or_else(|| vec![crate::config::bounds_probe_t(), 5.0]);
    let rows: Vec<BoundsTrialRow> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &probe, t))
        .collect::<Result<_, _>>()?;
    let coverage = rows.iter().filter(|r| r.covered).count() as f64 / rows.len() as f64;
    Ok(BoundsOutcome {
        rows,
        coverage,
        delta: cfg.delta.unwrap_or(0.2),
    })
}

impl BoundsOutcome {
    pub fn write_csv(&self, cfg: &ExperimentConfig) -> Result<(), BenchError> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.trial.to_string(),
                    format_float(r.empirical),
                    format_float(r.truth),
                    format_float(r.bound),
                    (r.covered as u8).to_string(),
                ]
            })
            .collect();
        save_table(
            &["trial", "empirical", "truth", "bound", "covered"],
            &rows,
            &cfg.out.join("bounds_results.csv"),
        )?;
        save_table(
            &["coverage", "delta", "trials"],
            &[vec![
                format_float(self.coverage),
                format_float(self.delta),
                self.rows.len().to_string(),
            ]],
            &cfg.out.join("bounds_summary.csv"),
        )?;
        Ok(())
    }

    pub fn summary_text(&self) -> String {
        format!(
            "bounds coverage: {:.3} over {} trials (target >= {:.3})\n",
            self.coverage,
            self.rows.len(),
            1.0 - self.delta
        )
    }
}
