//! Newsvendor study: kernel-weighted robust order quantities at six probe
//! covariates, scored against 500 fresh demand draws from the true
//! conditional law at each probe.

use ctxopt_core::kernel::{nw_weights, KernelSpec, WeightVector};
use ctxopt_core::solvers::{newsvendor_loss, solve_newsvendor_dro};
use ndarray::Array1;
use rayon::prelude::*;

use crate::config::{bandwidth, default_newsvendor_probes, ExperimentConfig};
use crate::error::BenchError;
use crate::gen::{gen_newsvendor, newsvendor_psi};
use crate::io::{format_float, save_table};
use crate::rng::{sample_uniform, stream_rng};

use super::{positive_weights, weights_or_uniform};

pub const STOCKOUT_COST: f64 = 10.0;
pub const HOLDING_COST: f64 = 6.0;
pub const EVAL_SAMPLES: usize = 500;

#[derive(Debug, Clone)]
pub struct NewsvendorRow {
    pub method: String,
    pub trial: usize,
    pub probe: usize,
    pub lambda: f64,
    pub quantity: f64,
    pub out_of_sample_loss: f64,
}

#[derive(Debug, Clone)]
pub struct NewsvendorOutcome {
    pub rows: Vec<NewsvendorRow>,
    pub probes: Vec<Vec<f64>>,
}

/// Fresh demand draws from the true conditional law at the probe.
fn eval_demands(cfg: &ExperimentConfig, trial: usize, probe_idx: usize, probe: &[f64]) -> Vec<f64> {
    let psi = newsvendor_psi(probe[0], probe[1]);
    let mut rng = stream_rng(cfg.seed, trial as u64 * 4 + 1 + ((probe_idx as u64) << 16));
    (0..EVAL_SAMPLES)
        .map(|_| sample_uniform(&mut rng, psi - 10.0, psi + 10.0))
        .collect()
}

fn mean_loss(q: f64, demands: &[f64]) -> f64 {
    demands
        .iter()
        .map(|xi| newsvendor_loss(q, *xi, STOCKOUT_COST, HOLDING_COST))
        .sum::<f64>()
        / demands.len() as f64
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<Vec<NewsvendorRow>, BenchError> {
    let data = gen_newsvendor(cfg.n, cfg.seed, trial as u64 * 4)?;
    let h = bandwidth(cfg.kernel.c_h_grid[0], cfg.n, 2);
    let spec = KernelSpec::new(cfg.kernel_family(), h, 2)?;
    let probes = cfg
        .probes
        .clone()
        .unwrap_or_else(default_newsvendor_probes);
    let demands_all: Vec<f64> = data.outcomes().column(0).to_vec();

    let mut rows = Vec::new();
    for (j, probe) in probes.iter().enumerate() {
        let eval = eval_demands(cfg, trial, j, probe);
        let query = Array1::from_vec(probe.clone());
        let weights =
            weights_or_uniform(nw_weights(&spec, data.covariates(), query.view()), cfg.n)?;
        let (keep, weights) = positive_weights(&weights);
        let kept_demands: Vec<f64> = keep.iter().map(|&i| demands_all[i]).collect();

        for &lambda in &cfg.lambda_grid {
            let report = solve_newsvendor_dro(
                &kept_demands,
                &weights,
                STOCKOUT_COST,
                HOLDING_COST,
                lambda,
                None,
            )?;
            let q = report.decision[0];
            rows.push(NewsvendorRow {
                method: "rnw_dro".into(),
                trial,
                probe: j,
                lambda,
                quantity: q,
                out_of_sample_loss: mean_loss(q, &eval),
            });
        }

        // Sample-average baseline: uniform weights over all training demands.
        let saa = solve_newsvendor_dro(
            &demands_all,
            &WeightVector::uniform(cfg.n),
            STOCKOUT_COST,
            HOLDING_COST,
            0.0,
            None,
        )?;
        rows.push(NewsvendorRow {
            method: "saa".into(),
            trial,
            probe: j,
            lambda: 0.0,
            quantity: saa.decision[0],
            out_of_sample_loss: mean_loss(saa.decision[0], &eval),
        });

        // The 500-sample solve at the probe, the out-of-sample reference.
        let probe_opt = solve_newsvendor_dro(
            &eval,
            &WeightVector::uniform(eval.len()),
            STOCKOUT_COST,
            HOLDING_COST,
            0.0,
            None,
        )?;
        rows.push(NewsvendorRow {
            method: "probe_saa_opt".into(),
            trial,
            probe: j,
            lambda: 0.0,
            quantity: probe_opt.decision[0],
            out_of_sample_loss: mean_loss(probe_opt.decision[0], &eval),
        });
    }
    Ok(rows)
}

pub fn run_newsvendor(cfg: &ExperimentConfig) -> Result<NewsvendorOutcome, BenchError> {
    let per_trial: Vec<Vec<NewsvendorRow>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect::<Result<_, _>>()?;
    Ok(NewsvendorOutcome {
        rows: per_trial.into_iter().flatten().collect(),
        probes: cfg
            .probes
            .clone()
            .unwrap_or_else(default_newsvendor_probes),
    })
}

impl NewsvendorOutcome {
    /// Mean out-of-sample loss of the robust method at one probe and radius.
    pub fn mean_loss_at(&self, probe: usize, lambda: f64) -> f64 {
        let values: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| {
                r.method == "rnw_dro" && r.probe == probe && (r.lambda - lambda).abs() < 1e-12
            })
            .map(|r| r.out_of_sample_loss)
            .collect();
        values.iter().sum::<f64>() / values.len() as f64
    }

    pub fn write_csv(&self, cfg: &ExperimentConfig) -> Result<(), BenchError> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.method.clone(),
                    r.trial.to_string(),
                    r.probe.to_string(),
                    format_float(r.lambda),
                    format_float(r.quantity),
                    format_float(r.out_of_sample_loss),
                ]
            })
            .collect();
        save_table(
            &["method", "trial", "probe", "lambda", "quantity", "loss"],
            &rows,
            &cfg.out.join("newsvendor_results.csv"),
        )?;

        let mut summary = Vec::new();
        for (j, probe) in self.probes.iter().enumerate() {
            for &lambda in &cfg.lambda_grid {
                summary.push(vec![
                    j.to_string(),
                    format_float(probe[0]),
                    format_float(probe[1]),
                    format_float(lambda),
                    format_float(self.mean_loss_at(j, lambda)),
                ]);
            }
        }
        save_table(
            &["probe", "t", "p", "lambda", "mean_loss"],
            &summary,
            &cfg.out.join("newsvendor_summary.csv"),
        )?;
        Ok(())
    }

    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for (j, probe) in self.probes.iter().enumerate() {
            let lambdas: Vec<f64> = {
                let mut set: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.method == "rnw_dro" && r.probe == j)
                    .map(|r| r.lambda)
                    .collect();
                set.sort_by(|a, b| a.partial_cmp(b).unwrap());
                set.dedup();
                set
            };
            let best = lambdas
                .iter()
                .map(|&l| (l, self.mean_loss_at(j, l)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            out.push_str(&format!(
                "newsvendor probe ({:.1},{:.1}): best lambda {:.3} mean loss {:.3}\n",
                probe[0], probe[1], best.0, best.1
            ));
        }
        out
    }
}
