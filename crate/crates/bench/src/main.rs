//! `ctxopt` command line: run experiments, generate datasets, cross-validate
//! parameters, and evaluate the deviation-bound calculators.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use ctxopt_bench::config::{ExperimentConfig, ExperimentKind};
use ctxopt_bench::error::BenchError;
use ctxopt_bench::experiments;
use ctxopt_bench::gen;
use ctxopt_bench::io::save_dataset;
use ctxopt_core::estimator::{
    continuous_set_bound, dro_equivalence_rhs, finite_set_bound, generalization_bound,
    highdim_bound, stddev_deviation_bound, subgaussian_norm_bound, suboptimality_bound,
    BoundInputs, HighDimVariant,
};

#[derive(Parser)]
#[command(name = "ctxopt", about = "Stochastic optimization with side information")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic dataset and write it as CSV.
    Gen {
        #[arg(long)]
        experiment: String,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate the bandwidth constant and ambiguity radius for the
    /// configured experiment and print the winners.
    Cv {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate the deviation-bound calculators on inputs from a JSON file
    /// and print a table.
    Bound {
        #[arg(long)]
        inputs: PathBuf,
    },
}

/// JSON mirror of the calculator inputs; optional fields gate which
/// calculators run.
#[derive(Debug, Deserialize)]
struct BoundInputsFile {
    n: usize,
    bandwidth: f64,
    dim: usize,
    delta: f64,
    g_gamma: f64,
    variance: f64,
    #[serde(default)]
    cardinality: Option<f64>,
    #[serde(default)]
    diameter: Option<f64>,
    #[serde(default)]
    decision_dim: Option<usize>,
    #[serde(default)]
    resolution: Option<f64>,
    #[serde(default)]
    lipschitz: Option<f64>,
    #[serde(default)]
    tau: Option<f64>,
    #[serde(default)]
    sigma: Option<f64>,
    #[serde(default)]
    spectral_gap: Option<f64>,
    #[serde(default)]
    gamma_max: Option<f64>,
    #[serde(default)]
    n1: Option<usize>,
    #[serde(default)]
    n2: Option<usize>,
    #[serde(default)]
    intrinsic_dim: Option<usize>,
    #[serde(default)]
    c_lambda: Option<f64>,
    #[serde(default)]
    constant: Option<f64>,
}

impl BoundInputsFile {
    fn into_inputs(self) -> BoundInputs {
        let mut inputs = BoundInputs::new(
            self.n,
            self.bandwidth,
            self.dim,
            self.delta,
            self.g_gamma,
            self.variance,
        );
        inputs.cardinality = self.cardinality;
        inputs.diameter = self.diameter;
        inputs.decision_dim = self.decision_dim;
        inputs.resolution = self.resolution;
        inputs.lipschitz = self.lipschitz;
        inputs.tau = self.tau;
        inputs.sigma = self.sigma;
        inputs.spectral_gap = self.spectral_gap;
        inputs.gamma_max = self.gamma_max;
        inputs.n1 = self.n1;
        inputs.n2 = self.n2;
        inputs.intrinsic_dim = self.intrinsic_dim;
        inputs.c_lambda = self.c_lambda;
        if let Some(c) = self.constant {
            inputs.constant = c;
        }
        inputs
    }
}

fn generate(experiment: &str, n: usize, seed: u64, out: &PathBuf) -> Result<(), BenchError> {
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| BenchError::Config(format!("{}: {e}", parent.display())))?;
        }
    }
    match experiment {
        "portfolio" => save_dataset(&gen::gen_portfolio(n, seed, 0)?, out),
        "newsvendor" => save_dataset(&gen::gen_newsvendor(n, seed, 0)?, out),
        "wind" => {
            let params = gen::WindParams::for_season(0);
            let days = gen::gen_wind_synthetic(n, &params, seed, 0);
            let mut header: Vec<String> = (1..=gen::WIND_HOURS).map(|j| format!("p{j}")).collect();
            header.extend((1..=gen::WIND_HOURS).map(|j| format!("x{j}")));
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            let rows: Vec<Vec<String>> = days
                .iter()
                .map(|d| {
                    d.prices
                        .iter()
                        .chain(d.production.iter())
                        .map(|v| ctxopt_bench::io::format_float(*v))
                        .collect()
                })
                .collect();
            ctxopt_bench::io::save_table(&header_refs, &rows, out)
        }
        other => Err(BenchError::Config(format!(
            "unknown experiment {other:?} (expected portfolio, newsvendor, or wind)"
        ))),
    }
}

fn cross_validate_cmd(cfg: &ExperimentConfig) -> Result<(), BenchError> {
    match cfg.experiment {
        ExperimentKind::Wind => {
            // Report the trial-0 cross-validation winners.
            let (c_h, lambda) = ctxopt_bench::experiments::wind::select_parameters(cfg, 0)?;
            println!("{{\"c_h\": {c_h}, \"lambda\": {lambda}}}");
            Ok(())
        }
        ExperimentKind::Newsvendor | ExperimentKind::Portfolio | ExperimentKind::Bounds => {
            Err(BenchError::Config(format!(
                "cross-validation is defined for the wind experiment, not {}",
                cfg.experiment
            )))
        }
    }
}

fn bound_table(path: &PathBuf) -> Result<(), BenchError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
    let file: BoundInputsFile = serde_json::from_str(&text)
        .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
    let inputs = file.into_inputs();
    println!("{:<24} {}", "calculator", "value");
    let print = |name: &str, result: Result<f64, ctxopt_core::estimator::EstimatorError>| {
        match result {
            Ok(v) => println!("{name:<24} {v:.6e}"),
            Err(e) => println!("{name:<24} skipped ({e})"),
        }
    };
    print("generalization", generalization_bound(&inputs));
    print("finite_set", finite_set_bound(&inputs));
    print("continuous_set", continuous_set_bound(&inputs));
    print("stddev_deviation", stddev_deviation_bound(&inputs));
    print("suboptimality", suboptimality_bound(&inputs));
    print(
        "highdim_subgaussian",
        highdim_bound(&inputs, HighDimVariant::SubGaussian),
    );
    print(
        "highdim_bounded",
        highdim_bound(&inputs, HighDimVariant::BoundedCovariate),
    );
    if let (Some(sigma), Some(dim)) = (inputs.sigma, inputs.decision_dim) {
        print(
            "subgaussian_norm",
            subgaussian_norm_bound(sigma, dim, inputs.delta),
        );
    }
    print("dro_equivalence_rhs", dro_equivalence_rhs(&inputs));
    Ok(())
}

fn run() -> Result<(), BenchError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_json_file(&config)?;
            experiments::run_experiment(&cfg)
        }
        Command::Gen {
            experiment,
            n,
            seed,
            out,
        } => generate(&experiment, n, seed, &out),
        Command::Cv { config } => {
            let cfg = ExperimentConfig::from_json_file(&config)?;
            cross_validate_cmd(&cfg)
        }
        Command::Bound { inputs } => bound_table(&inputs),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
