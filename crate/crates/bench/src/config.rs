//! Experiment configuration: a JSON document consumed by the CLI.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Portfolio,
    Newsvendor,
    Wind,
    Bounds,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ExperimentKind::Portfolio => "portfolio",
            ExperimentKind::Newsvendor => "newsvendor",
            ExperimentKind::Wind => "wind",
            ExperimentKind::Bounds => "bounds",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelConfig {
    /// "exponential" or "gaussian".
    pub family: String,
    /// Bandwidth constants; the bandwidth is c_h * n^(-1/(p+4)).
    pub c_h_grid: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaConfig {
    pub enabled: bool,
    pub intrinsic_dim: usize,
    /// Fraction of rows assigned to the weighting part when splitting.
    pub split_fraction: f64,
    /// Whether to sample-split (bounds experiments) or fit on the full
    /// window (wind commitment).
    pub split: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub kernel: KernelConfig,
    pub lambda_grid: Vec<f64>,
    pub pca: PcaConfig,
    /// Probe covariates for the newsvendor runs.
    #[serde(default)]
    pub probes: Option<Vec<Vec<f64>>>,
    /// Number of probe covariates for the portfolio runs.
    #[serde(default)]
    pub probe_count: Option<usize>,
    /// Failure probability for the bounds experiment.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Rolling decision days per wind trial.
    #[serde(default)]
    pub decision_days: Option<usize>,
    pub out: PathBuf,
}

/// Coverage-study probe time where the demand surface is flat in t
/// (the sine peaks): t = 5 pi^2 / 6.
pub fn bounds_probe_t() -> f64 {
    5.0 * std::f64::consts::PI * std::f64::consts::PI / 6.0
}

/// The six probe covariates of the newsvendor study.
pub fn default_newsvendor_probes() -> Vec<Vec<f64>> {
    vec![
        vec![1.5, 2.5],
        vec![3.0, 2.5],
        vec![4.5, 2.5],
        vec![4.5, 5.0],
        vec![1.5, 5.0],
        vec![3.0, 5.0],
    ]
}

/// Log-spaced grid with `points` entries from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (ll, lh) = (lo.ln(), hi.ln());
    (0..points)
        .map(|k| (ll + (lh - ll) * k as f64 / (points - 1) as f64).exp())
        .collect()
}

impl ExperimentConfig {
    pub fn default_for(kind: ExperimentKind, out: PathBuf) -> Self {
        match kind {
            ExperimentKind::Portfolio => Self {
                experiment: kind,
                n: 1000,
                trials: 5,
                seed: 1,
                kernel: KernelConfig {
                    family: "exponential".into(),
                    c_h_grid: vec![0.25],
                },
                lambda_grid: vec![0.5],
                pca: PcaConfig {
                    enabled: false,
                    intrinsic_dim: 1,
                    split_fraction: 0.5,
                    split: false,
                },
                probes: None,
                probe_count: Some(300),
                delta: None,
                decision_days: None,
                out,
            },
            ExperimentKind::Newsvendor => Self {
                experiment: kind,
                n: 100,
                trials: 10,
                seed: 1,
                kernel: KernelConfig {
                    family: "exponential".into(),
                    c_h_grid: vec![1.0],
                },
                lambda_grid: vec![0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0],
                pca: PcaConfig {
                    enabled: false,
                    intrinsic_dim: 2,
                    split_fraction: 0.5,
                    split: false,
                },
                probes: Some(default_newsvendor_probes()),
                probe_count: None,
                delta: None,
                decision_days: None,
                out,
            },
            ExperimentKind::Wind => Self {
                experiment: kind,
                n: 14,
                trials: 40,
                seed: 1,
                kernel: KernelConfig {
                    family: "exponential".into(),
                    c_h_grid: log_grid(5e2, 5e4, 9),
                },
                lambda_grid: log_grid(1e-2, 1e2, 17),
                pca: PcaConfig {
                    enabled: true,
                    intrinsic_dim: 3,
                    split_fraction: 0.5,
                    split: false,
                },
                probes: None,
                probe_count: None,
                delta: None,
                decision_days: Some(25),
                out,
            },
            ExperimentKind::Bounds => Self {
                experiment: kind,
                n: 500,
                trials: 200,
                seed: 1,
                kernel: KernelConfig {
                    family: "exponential".into(),
                    c_h_grid: vec![0.4],
                },
                lambda_grid: vec![0.0],
                pca: PcaConfig {
                    enabled: false,
                    intrinsic_dim: 2,
                    split_fraction: 0.5,
                    split: true,
                },
                probes: Some(vec![vec![bounds_probe_t(), 5.0]]),
                probe_count: None,
                delta: Some(0.2),
                decision_days: None,
                out,
            },
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n < 2 {
            return Err(BenchError::Config(format!(
                "n must be at least 2, got {}",
                self.n
            )));
        }
        if self.trials == 0 {
            return Err(BenchError::Config("trials must be positive".into()));
        }
        if self.kernel.c_h_grid.is_empty() {
            return Err(BenchError::Config("bandwidth grid is empty".into()));
        }
        if self.lambda_grid.is_empty() {
            return Err(BenchError::Config("lambda grid is empty".into()));
        }
        if !matches!(self.kernel.family.as_str(), "exponential" | "gaussian") {
            return Err(BenchError::Config(format!(
                "unknown kernel family {:?}",
                self.kernel.family
            )));
        }
        if self
            .kernel
            .c_h_grid
            .iter()
            .chain(self.lambda_grid.iter())
            .any(|v| !v.is_finite() || *v < 0.0)
        {
            return Err(BenchError::Config(
                "grids must contain finite nonnegative values".into(),
            ));
        }
        if self.pca.enabled && self.pca.intrinsic_dim == 0 {
            return Err(BenchError::Config("intrinsic dimension must be >= 1".into()));
        }
        Ok(())
    }

    /// Creates the output directory and verifies it is writable before any
    /// compute starts.
    pub fn ensure_writable(&self) -> Result<(), BenchError> {
        std::fs::create_dir_all(&self.out)
            .map_err(|e| BenchError::Config(format!("{}: {e}", self.out.display())))?;
        let probe = self.out.join(".write_probe");
        std::fs::write(&probe, b"ok")
            .map_err(|e| BenchError::Config(format!("{}: {e}", self.out.display())))?;
        std::fs::remove_file(&probe).ok();
        Ok(())
    }

    pub fn kernel_family(&self) -> ctxopt_core::kernel::KernelFamily {
        match self.kernel.family.as_str() {
            "gaussian" => ctxopt_core::kernel::KernelFamily::Gaussian,
            _ => ctxopt_core::kernel::KernelFamily::Exponential,
        }
    }
}

/// Bandwidth from the constant and sample size: c_h * n^(-1/(p+4)).
pub fn bandwidth(c_h: f64, n: usize, dim: usize) -> f64 {
    c_h * (n as f64).powf(-1.0 / (dim as f64 + 4.0))
}
