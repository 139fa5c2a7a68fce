//! `estimate` configuration file.

use std::path::Path;

use irfavg_core::averaging::DEFAULT_GUARD;
use irfavg_core::bootstrap::DEFAULT_MAX_FAILURE_RATE;
use irfavg_core::{
    BootstrapConfig, Criterion, EstimatorWiring, Identification, LpLags, SieveConfig, TimeSeriesPanel, VarOrder,
    WeightGrids,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "horizons")]
    pub horizons: usize,
    /// Index of the response variable.
    #[serde(default)]
    pub response: usize,
    /// Detected from the panel when absent.
    #[serde(default)]
    pub identification: Option<Identification>,
    #[serde(default = "var_order")]
    pub var_order: VarOrder,
    /// Defaults to the VAR order.
    #[serde(default)]
    pub lp_lags: Option<LpLags>,
    #[serde(default = "yes")]
    pub include_constant: bool,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
    #[serde(default)]
    pub sieve: SieveConfig,
    #[serde(default)]
    pub bands: BandSection,
    #[serde(default)]
    pub grids: WeightGrids,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    #[serde(default = "draws")]
    pub draws: usize,
    #[serde(default = "guard")]
    pub guard: f64,
    #[serde(default = "failure_rate")]
    pub max_failure_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandSection {
    #[serde(default = "band_draws")]
    pub draws: usize,
    #[serde(default = "coverage")]
    pub coverage: f64,
    /// When set, each outer draw reruns the plug-in bootstrap with this
    /// many inner draws.
    #[serde(default)]
    pub inner_draws: Option<usize>,
    #[serde(default = "failure_rate")]
    pub max_failure_rate: f64,
}

fn horizons() -> usize {
    10
}

fn var_order() -> VarOrder {
    VarOrder::Auto {
        criterion: Criterion::Aic,
        max_lag: 8,
    }
}

fn yes() -> bool {
    true
}

fn draws() -> usize {
    500
}

fn band_draws() -> usize {
    200
}

fn coverage() -> f64 {
    0.68
}

fn guard() -> f64 {
    DEFAULT_GUARD
}

fn failure_rate() -> f64 {
    DEFAULT_MAX_FAILURE_RATE
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self {
            draws: draws(),
            guard: guard(),
            max_failure_rate: failure_rate(),
        }
    }
}

impl Default for BandSection {
    fn default() -> Self {
        Self {
            draws: band_draws(),
            coverage: coverage(),
            inner_draws: None,
            max_failure_rate: failure_rate(),
        }
    }
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            seed: None,
            horizons: horizons(),
            response: 0,
            identification: None,
            var_order: var_order(),
            lp_lags: None,
            include_constant: true,
            bootstrap: BootstrapSection::default(),
            sieve: SieveConfig::default(),
            bands: BandSection::default(),
            grids: WeightGrids::default(),
        }
    }
}

impl EstimateConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Fills in the identification from the panel: an observed shock column
    /// first, then an instrument for the first variable.
    pub fn detect_identification(&mut self, panel: &TimeSeriesPanel) -> CliResult<()> {
        if self.identification.is_some() {
            return Ok(());
        }
        self.identification = if panel.shocks().is_some() {
            Some(Identification::ObservedShock { shock: 0 })
        } else if panel.instrument().is_some() {
            Some(Identification::Proxy { impulse: 0, scale: 1.0 })
        } else {
            return Err(irfavg_core::Error::IdentificationMissing(
                "panel has no `__shock__` or `__instrument__` column and the config sets no identification".into(),
            )
            .into());
        };
        Ok(())
    }

    pub fn wiring(&self) -> CliResult<EstimatorWiring> {
        let ident = self
            .identification
            .clone()
            .ok_or_else(|| irfavg_core::Error::IdentificationMissing("no identification".into()))?;
        let mut w = EstimatorWiring::new(ident, self.horizons, self.var_order)
            .with_response(self.response)
            .with_lp_lags(self.lp_lags.unwrap_or(LpLags::MatchVar));
        w.include_constant = self.include_constant;
        Ok(w)
    }

    pub fn bootstrap_config(&self, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            draws: self.bootstrap.draws,
            seed,
            sieve: self.sieve,
            guard: self.bootstrap.guard,
            max_failure_rate: self.bootstrap.max_failure_rate,
        }
    }
}
