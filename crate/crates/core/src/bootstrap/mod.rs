//! Sieve and wild bootstraps for averaging weights and confidence bands.
//!
//! Draws are independent given their derived seeds and run in parallel;
//! results are always aggregated in draw-index order.

mod risk;
mod sieve;
mod wild;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{RiskComponents, WeightMethod, WeightSchedule, DEFAULT_GUARD};
use crate::error::{Error, Result};
use crate::panel::TimeSeriesPanel;
use crate::rng::SeedPath;
use crate::wiring::{estimate_pair, estimate_pair_quiet, EstimatorWiring, PairEstimate};

pub use risk::{
    bootstrap_risk, estimate_omega, estimate_omega_around, plugin_variance, BootstrapDraws, DrawFailure, OmegaHat,
};
pub use sieve::{default_max_lag, sieve_draw, sieve_fit, sieve_pseudo_truth, sieve_resample, SieveConfig, SieveModel};
pub use wild::{
    fit_averaged, nested_band, wild_band, wild_draw, AveragedFit, Band, BandConfig, BandSet, InnerWeights,
};

/// Default ceiling on the share of failed draws.
pub const DEFAULT_MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub draws: usize,
    pub seed: u64,
    #[serde(default)]
    pub sieve: SieveConfig,
    #[serde(default = "guard")]
    pub guard: f64,
    #[serde(default = "max_failure_rate")]
    pub max_failure_rate: f64,
}

fn guard() -> f64 {
    DEFAULT_GUARD
}

fn max_failure_rate() -> f64 {
    DEFAULT_MAX_FAILURE_RATE
}

impl BootstrapConfig {
    pub fn new(draws: usize, seed: u64) -> Self {
        Self {
            draws,
            seed,
            sieve: SieveConfig::default(),
            guard: DEFAULT_GUARD,
            max_failure_rate: DEFAULT_MAX_FAILURE_RATE,
        }
    }
}

/// Output of the sieve-bootstrap plug-in weight.
#[derive(Debug, Clone, PartialEq)]
pub struct PluginResult {
    pub schedule: WeightSchedule,
    pub risk: Vec<RiskComponents>,
    pub draws: BootstrapDraws,
    pub sieve_order: usize,
    /// Estimates on the original panel.
    pub point: PairEstimate,
}

/// Runs `f(i)` for `i in 0..count` in parallel and returns the results in
/// index order.
pub(crate) fn run_indexed<T, F>(count: usize, f: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

pub(crate) fn check_failures(failed: usize, total: usize, limit: f64) -> Result<()> {
    if failed as f64 > limit * total as f64 {
        return Err(Error::TooManyFailures {
            failed,
            total,
            limit_pct: limit * 100.0,
        });
    }
    Ok(())
}

/// Sieve-bootstrap plug-in weights: fit the sieve, compute its implied
/// IRF, re-estimate LP and VAR (lag orders frozen at their original-sample
/// values) on every pseudo-panel, and apply the oracle formula to the
/// bootstrap risk at each horizon.
pub fn plugin_weight(panel: &TimeSeriesPanel, wiring: &EstimatorWiring, cfg: &BootstrapConfig) -> Result<PluginResult> {
    let point = estimate_pair(panel, wiring)?;
    plugin_weight_from(panel, wiring, point, cfg)
}

pub(crate) fn plugin_weight_from(
    panel: &TimeSeriesPanel,
    wiring: &EstimatorWiring,
    point: PairEstimate,
    cfg: &BootstrapConfig,
) -> Result<PluginResult> {
    if cfg.draws < 2 {
        return Err(Error::InvalidSpec("at least 2 bootstrap draws are required".into()));
    }
    let frozen = point.frozen(wiring);
    let sieve = sieve_fit(panel, &cfg.sieve)?;
    let pseudo_truth = sieve_pseudo_truth(&sieve, panel, &frozen)?;
    let t = panel.len();
    let results = run_indexed(cfg.draws, |b| {
        let seed = SeedPath::new(cfg.seed).index(b as u64);
        let pseudo = sieve_draw(&sieve, panel, t, cfg.sieve.burn_in, seed);
        estimate_pair_quiet(&pseudo, &frozen)
    });
    let draws = collect_draws(results, pseudo_truth, cfg.max_failure_rate, |b| {
        SeedPath::new(cfg.seed).index(b as u64).seed()
    })?;
    let risk = bootstrap_risk(&draws)?;
    let schedule = WeightSchedule::from_risk(WeightMethod::Plugin, &risk, cfg.guard);
    Ok(PluginResult {
        schedule,
        risk,
        draws,
        sieve_order: sieve.order(),
        point,
    })
}

fn collect_draws(
    results: Vec<Result<PairEstimate>>,
    pseudo_truth: Vec<f64>,
    limit: f64,
    seed_of: impl Fn(usize) -> u64,
) -> Result<BootstrapDraws> {
    let total = results.len();
    let mut draws = BootstrapDraws {
        lp: Vec::with_capacity(total),
        var: Vec::with_capacity(total),
        pseudo_truth,
        seeds: Vec::with_capacity(total),
        failed: Vec::new(),
    };
    for (b, r) in results.into_iter().enumerate() {
        match r {
            Ok(pair) if pair.lp.values.iter().chain(&pair.var.values).all(|v| v.is_finite()) => {
                draws.lp.push(pair.lp.values);
                draws.var.push(pair.var.values);
                draws.seeds.push(seed_of(b));
            }
            Ok(_) => draws.failed.push(DrawFailure {
                index: b,
                seed: seed_of(b),
                message: "non-finite estimate".into(),
            }),
            Err(e) => draws.failed.push(DrawFailure {
                index: b,
                seed: seed_of(b),
                message: e.to_string(),
            }),
        }
    }
    check_failures(draws.failed.len(), total, limit)?;
    Ok(draws)
}
