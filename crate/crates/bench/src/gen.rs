//! Synthetic data generators for the three experiment families.

use ctxopt_core::kernel::Dataset;
use ndarray::Array2;

use crate::error::BenchError;
use crate::rng::{sample_normal, sample_uniform, stream_rng};

/// Three-asset portfolio data. The covariate is uniform on [-1, 1]; the two
/// risky returns share the level 0.5 - gamma^2 and carry perfectly
/// negatively correlated noise, the third asset returns zero.
pub fn gen_portfolio(n: usize, seed: u64, stream: u64) -> Result<Dataset, BenchError> {
    let mut rng = stream_rng(seed, stream);
    let mut covariates = Array2::zeros((n, 1));
    let mut outcomes = Array2::zeros((n, 3));
    for i in 0..n {
        let gamma = sample_uniform(&mut rng, -1.0, 1.0);
        let eps = sample_normal(&mut rng);
        let level = 0.5 - gamma * gamma;
        covariates[[i, 0]] = gamma;
        outcomes[[i, 0]] = level + 0.1 * eps;
        outcomes[[i, 1]] = level - 0.1 * eps;
        outcomes[[i, 2]] = 0.0;
    }
    Ok(Dataset::new(covariates, outcomes)?)
}

/// Mean demand surface of the newsvendor problem.
pub fn newsvendor_psi(t: f64, popularity: f64) -> f64 {
    50.0 + 20.0 * (t / (std::f64::consts::PI / 3.0)).sin() + 5.0 * popularity
}

pub const NEWSVENDOR_MU: [f64; 2] = [7.5, 5.0];
pub const NEWSVENDOR_SIGMA_DIAG: [f64; 2] = [2.0, 1.0];

/// Newsvendor data: covariates (time, popularity) from the bivariate normal
/// with mean (7.5, 5) and diagonal covariance (2, 1); demand uniform on
/// [psi - 10, psi + 10].
pub fn gen_newsvendor(n: usize, seed: u64, stream: u64) -> Result<Dataset, BenchError> {
    let mut rng = stream_rng(seed, stream);
    let mut covariates = Array2::zeros((n, 2));
    let mut outcomes = Array2::zeros((n, 1));
    for i in 0..n {
        let t = NEWSVENDOR_MU[0] + NEWSVENDOR_SIGMA_DIAG[0].sqrt() * sample_normal(&mut rng);
        let p = NEWSVENDOR_MU[1] + NEWSVENDOR_SIGMA_DIAG[1].sqrt() * sample_normal(&mut rng);
        let psi = newsvendor_psi(t, p);
        covariates[[i, 0]] = t;
        covariates[[i, 1]] = p;
        outcomes[[i, 0]] = sample_uniform(&mut rng, psi - 10.0, psi + 10.0);
    }
    Ok(Dataset::new(covariates, outcomes)?)
}

/// Density of the newsvendor covariate distribution at a probe point.
pub fn newsvendor_density(t: f64, p: f64) -> f64 {
    let (s1, s2) = (NEWSVENDOR_SIGMA_DIAG[0], NEWSVENDOR_SIGMA_DIAG[1]);
    let d1 = t - NEWSVENDOR_MU[0];
    let d2 = p - NEWSVENDOR_MU[1];
    (-0.5 * (d1 * d1 / s1 + d2 * d2 / s2)).exp()
        / (2.0 * std::f64::consts::PI * (s1 * s2).sqrt())
}

/// One day of the synthetic wind market: hourly day-ahead prices and hourly
/// energy production.
#[derive(Debug, Clone)]
pub struct WindDay {
    pub prices: Vec<f64>,
    pub production: Vec<f64>,
}

pub const WIND_HOURS: usize = 24;

/// Parameters of the synthetic wind process. Production follows a seasonal
/// hourly base plus an AR(1) daily deviation with a shared day factor, so
/// consecutive days stay informative about each other. On top, calm spells
/// arrive as a two-state Markov chain and scale whole days down by the
/// slump factor; spells persist for a few days, so yesterday's output
/// predicts them, while a two-week window regularly contains none at all.
/// Prices follow a fixed daily shape with multiplicative noise.
#[derive(Debug, Clone)]
pub struct WindParams {
    pub season_level: f64,
    pub ar_coefficient: f64,
    pub day_factor_sd: f64,
    pub hour_noise_sd: f64,
    /// Probability that a normal day is followed by a slump day.
    pub slump_enter: f64,
    /// Probability that a slump day is followed by another slump day.
    pub slump_persist: f64,
    pub slump_factor: f64,
    /// Day-ahead prices scale up on calm days (scarcity pricing).
    pub slump_price_spike: f64,
    pub price_base: f64,
    pub price_noise: f64,
}

impl WindParams {
    /// Seasonal defaults indexed by season (0 = winter .. 3 = autumn).
    pub fn for_season(season: usize) -> Self {
        let season_level = [340.0, 220.0, 180.0, 280.0][season % 4];
        Self {
            season_level,
            ar_coefficient: 0.7,
            day_factor_sd: 60.0,
            hour_noise_sd: 30.0,
            slump_enter: 0.12,
            slump_persist: 0.65,
            slump_factor: 0.2,
            slump_price_spike: 1.6,
            price_base: 45.0,
            price_noise: 0.15,
        }
    }
}

fn hourly_base(params: &WindParams, hour: usize) -> f64 {
    let phase = 2.0 * std::f64::consts::PI * (hour as f64 - 14.0) / WIND_HOURS as f64;
    params.season_level * (1.0 + 0.45 * phase.cos())
}

fn hourly_price_base(params: &WindParams, hour: usize) -> f64 {
    let phase = 2.0 * std::f64::consts::PI * (hour as f64 - 18.0) / WIND_HOURS as f64;
    params.price_base * (1.0 + 0.35 * phase.cos())
}

/// Generates `days` consecutive days for one season trial.
pub fn gen_wind_synthetic(
    days: usize,
    params: &WindParams,
    seed: u64,
    stream: u64,
) -> Vec<WindDay> {
    let mut rng = stream_rng(seed, stream);
    let mut deviations = vec![0.0f64; WIND_HOURS];
    let mut in_slump = false;
    let mut out = Vec::with_capacity(days);
    for _ in 0..days {
        let day_factor = sample_normal(&mut rng);
        let enter = if in_slump {
            params.slump_persist
        } else {
            params.slump_enter
        };
        in_slump = sample_uniform(&mut rng, 0.0, 1.0) < enter;
        let slump = if in_slump { params.slump_factor } else { 1.0 };
        let price_scale = if in_slump {
            params.slump_price_spike
        } else {
            1.0
        };
        let mut production = Vec::with_capacity(WIND_HOURS);
        let mut prices = Vec::with_capacity(WIND_HOURS);
        for (hour, dev) in deviations.iter_mut().enumerate() {
            *dev = params.ar_coefficient * *dev
                + params.day_factor_sd * day_factor
                + params.hour_noise_sd * sample_normal(&mut rng);
            production.push((slump * (hourly_base(params, hour) + *dev)).max(0.0));
            let noise = 1.0 + params.price_noise * sample_normal(&mut rng);
            prices.push((price_scale * hourly_price_base(params, hour) * noise).max(1.0));
        }
        out.push(WindDay { prices, production });
    }
    out
}
