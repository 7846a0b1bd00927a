//! Experiment runners reproducing the portfolio, newsvendor, and wind
//! commitment studies at desk scale, plus the bound-coverage study.

pub mod bounds;
pub mod newsvendor;
pub mod portfolio;
pub mod wind;

pub use bounds::{run_bounds, BoundsOutcome};
pub use newsvendor::{run_newsvendor, NewsvendorOutcome};
pub use portfolio::{run_portfolio, PortfolioOutcome};
pub use wind::{run_wind, WindOutcome};

use ctxopt_core::kernel::{KernelError, WeightVector};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::BenchError;

/// The experiment layer's explicit fallback for degenerate kernels: when
/// every kernel value vanishes numerically the sample carries no local
/// information and uniform weights are used instead. Any other failure
/// propagates.
pub fn weights_or_uniform(
    weights: Result<WeightVector, KernelError>,
    n: usize,
) -> Result<WeightVector, BenchError> {
    match weights {
        Ok(w) => Ok(w),
        Err(KernelError::DegenerateWeights { .. }) => Ok(WeightVector::uniform(n)),
        Err(other) => Err(other.into()),
    }
}

/// Drops samples whose kernel weight is numerically zero and renormalizes,
/// so downstream ambiguity sets never divide by a vanishing center weight.
/// Returns the kept sample indices with the renormalized weights.
pub fn positive_weights(weights: &WeightVector) -> (Vec<usize>, WeightVector) {
    const MIN_WEIGHT: f64 = 1e-12;
    let keep: Vec<usize> = (0..weights.len())
        .filter(|&i| weights[i] > MIN_WEIGHT)
        .collect();
    if keep.len() == weights.len() {
        return (keep, weights.clone());
    }
    let total: f64 = keep.iter().map(|&i| weights[i]).sum();
    let renormalized: Vec<f64> = keep.iter().map(|&i| weights[i] / total).collect();
    let weights = WeightVector::new(renormalized)
        .unwrap_or_else(|_| WeightVector::uniform(keep.len().max(1)));
    (keep, weights)
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], pct: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = rank - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}

/// Relative improvement d(x, y) = 2 (x - y) / (|x| + |y|), zero when both
/// vanish.
pub fn improvement(x: f64, y: f64) -> f64 {
    let denom = x.abs() + y.abs();
    if denom == 0.0 {
        0.0
    } else {
        2.0 * (x - y) / denom
    }
}

/// Dispatches on the configured experiment, writes its CSV outputs, and
/// prints a short summary (including wall time) to stdout.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(), BenchError> {
    cfg.validate()?;
    cfg.ensure_writable()?;
    let started = std::time::Instant::now();
    match cfg.experiment {
        ExperimentKind::Portfolio => {
            let outcome = run_portfolio(cfg)?;
            outcome.write_csv(cfg)?;
            print!("{}", outcome.summary_text());
        }
        ExperimentKind::Newsvendor => {
            let outcome = run_newsvendor(cfg)?;
            outcome.write_csv(cfg)?;
            print!("{}", outcome.summary_text());
        }
        ExperimentKind::Wind => {
            let outcome = run_wind(cfg)?;
            outcome.write_csv(cfg)?;
            print!("{}", outcome.summary_text());
        }
        ExperimentKind::Bounds => {
            let outcome = run_bounds(cfg)?;
            outcome.write_csv(cfg)?;
            print!("{}", outcome.summary_text());
        }
    }
    println!("wall time: {:.2}s", started.elapsed().as_secs_f64());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let values = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&values, 0.0), 1.0);
        assert_eq!(percentile(&values, 100.0), 4.0);
        assert!((percentile(&values, 50.0) - 2.5).abs() < 1e-12);
        assert!((percentile(&values, 20.0) - 1.6).abs() < 1e-12);
    }

    #[test]
    fn improvement_of_equal_values_is_zero() {
        assert_eq!(improvement(5.0, 5.0), 0.0);
        assert_eq!(improvement(0.0, 0.0), 0.0);
        assert!((improvement(3.0, 1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn positive_weights_filters_and_renormalizes() {
        let w = WeightVector::new(vec![0.5, 0.5 - 1e-13, 1e-13]).unwrap();
        let (keep, filtered) = positive_weights(&w);
        assert_eq!(keep, vec![0, 1]);
        let sum: f64 = filtered.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_weights_fall_back_to_uniform() {
        let result = weights_or_uniform(
            Err(KernelError::DegenerateWeights { max_distance: 1e30 }),
            4,
        )
        .unwrap();
        assert_eq!(result.as_slice(), WeightVector::uniform(4).as_slice());

        let other = weights_or_uniform(
            Err(KernelError::InvalidSpec("bad".into())),
            4,
        );
        assert!(other.is_err());
    }
}
