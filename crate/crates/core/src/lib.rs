//! Impulse responses by local projection and VAR, and MSE-minimizing
//! averages of the two.
//!
//! The usual entry point is [`plugin_weight`]: estimate both IRFs on a
//! [`TimeSeriesPanel`], bootstrap their risk with an autoregressive sieve,
//! and combine them horizon by horizon.
//!
//! ```
//! use irfavg_core::{
//!     combine, plugin_weight, BootstrapConfig, DgpSpec, EstimatorWiring, Identification, VarOrder,
//! };
//!
//! let panel = DgpSpec::arma(0.5, 0.5)?.simulate(200, 7)?;
//! let wiring = EstimatorWiring::new(Identification::recursive_single(0), 5, VarOrder::Fixed(1));
//! let fit = plugin_weight(&panel, &wiring, &BootstrapConfig::new(50, 1))?;
//! let avg = combine(&fit.point.lp, &fit.point.var, &fit.schedule)?;
//! assert_eq!(avg.values.len(), 6);
//! # Ok::<(), irfavg_core::Error>(())
//! ```

pub mod averaging;
pub mod bootstrap;
pub mod dgp;
pub mod error;
pub mod irf;
pub mod linalg;
pub mod lp;
pub mod mc;
pub mod panel;
pub mod regression;
pub mod rng;
pub mod var;
pub mod wiring;

pub use averaging::{
    calibrate_flexible, combine, combined_mse, direct_weight, flexible_weight, model_avg_weight, oracle_weight,
    oracle_weight_k, RiskComponents, WeightGrids, WeightMethod, WeightSchedule,
};
pub use bootstrap::{
    bootstrap_risk, estimate_omega, fit_averaged, nested_band, plugin_variance, plugin_weight, sieve_fit,
    wild_band, AveragedFit, BandConfig, BandSet, BootstrapConfig, BootstrapDraws, InnerWeights, OmegaHat,
    PluginResult, SieveConfig,
};
pub use dgp::{builtin, DgpSpec, TrueIrf};
pub use error::{Error, Result};
pub use irf::IrfEstimate;
pub use lp::{lp_irf, LpConfig};
pub use mc::{run_experiment, ExperimentSpec, RmseTable};
pub use panel::{Instrument, TimeSeriesPanel};
pub use regression::Criterion;
pub use var::{fit_var, var_irf, VarModel, VarOrder};
pub use wiring::{estimate_pair, EstimatorWiring, Identification, LpLags, PairEstimate};
