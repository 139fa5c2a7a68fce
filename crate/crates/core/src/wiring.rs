//! Joint LP/VAR estimation under one identification scheme.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irf::IrfEstimate;
use crate::lp::{lp_irf, LpConfig};
use crate::panel::TimeSeriesPanel;
use crate::var::{fit_var, identify, var_irf, VarOrder};

/// How the structural shock of interest is identified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Identification {
    /// Shock column `shock` of the panel's observed shocks is the impulse.
    ObservedShock { shock: usize },
    /// Recursive scheme: the impulse is the innovation in variable
    /// `impulse`; variables ordered before it enter LP contemporaneously.
    Recursive { impulse: usize, order: Vec<usize> },
    /// External instrument for variable `impulse`, normalized so that the
    /// impulse variable moves by `scale` on impact.
    Proxy {
        impulse: usize,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl Identification {
    /// Recursive scheme for a univariate panel (or a variable ordered first).
    pub fn recursive_single(impulse: usize) -> Self {
        Identification::Recursive {
            impulse,
            order: vec![impulse],
        }
    }

    pub(crate) fn validate(&self, panel: &TimeSeriesPanel) -> Result<()> {
        let n = panel.n_vars();
        match self {
            Identification::ObservedShock { shock } => {
                if panel.shock(*shock).is_none() {
                    return Err(Error::IdentificationMissing(format!(
                        "panel has no observed shock column {shock}"
                    )));
                }
            }
            Identification::Recursive { impulse, order } => {
                if *impulse >= n || !order.contains(impulse) || order.iter().any(|&v| v >= n) {
                    return Err(Error::InvalidSpec(format!(
                        "recursive impulse {impulse} / order {order:?} invalid for {n} variables"
                    )));
                }
            }
            Identification::Proxy { impulse, .. } => {
                if *impulse >= n {
                    return Err(Error::InvalidSpec(format!("impulse index {impulse} out of range")));
                }
                if panel.instrument().is_none() {
                    return Err(Error::IdentificationMissing("panel has no instrument".into()));
                }
            }
        }
        Ok(())
    }
}

/// LP control lag order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpLags {
    Fixed(usize),
    /// Same order as the (possibly auto-selected) VAR.
    MatchVar,
}

/// Everything needed to turn a panel into an (LP, VAR) pair of IRFs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorWiring {
    #[serde(default)]
    pub response: usize,
    pub identification: Identification,
    pub horizons: usize,
    pub var_order: VarOrder,
    #[serde(default = "match_var")]
    pub lp_lags: LpLags,
    #[serde(default = "yes")]
    pub include_constant: bool,
    /// First-stage F floor: weak-instrument warning for IV-LP, hard
    /// relevance error for proxy identification.
    #[serde(default = "f_floor")]
    pub first_stage_f_floor: f64,
}

fn match_var() -> LpLags {
    LpLags::MatchVar
}

fn yes() -> bool {
    true
}

fn f_floor() -> f64 {
    10.0
}

impl EstimatorWiring {
    pub fn new(identification: Identification, horizons: usize, var_order: VarOrder) -> Self {
        Self {
            response: 0,
            identification,
            horizons,
            var_order,
            lp_lags: LpLags::MatchVar,
            include_constant: true,
            first_stage_f_floor: f_floor(),
        }
    }

    pub fn with_response(mut self, response: usize) -> Self {
        self.response = response;
        self
    }

    pub fn with_lp_lags(mut self, lags: LpLags) -> Self {
        self.lp_lags = lags;
        self
    }
}

/// LP and VAR estimates of the same structural response.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEstimate {
    pub lp: IrfEstimate,
    pub var: IrfEstimate,
    pub r2_lp: Vec<f64>,
    /// R^2 of the VAR equation of the response variable.
    pub r2_var: f64,
    pub var_order: usize,
    pub lp_lags: usize,
    pub warnings: Vec<String>,
}

impl PairEstimate {
    /// The wiring with lag orders pinned to the ones used here, so that
    /// re-estimation on pseudo-samples uses the same configuration.
    pub fn frozen(&self, wiring: &EstimatorWiring) -> EstimatorWiring {
        EstimatorWiring {
            var_order: VarOrder::Fixed(self.var_order),
            lp_lags: LpLags::Fixed(self.lp_lags),
            ..wiring.clone()
        }
    }
}

pub fn estimate_pair(panel: &TimeSeriesPanel, wiring: &EstimatorWiring) -> Result<PairEstimate> {
    estimate_pair_inner(panel, wiring, true)
}

/// Same as [`estimate_pair`] without the stability diagnostic, for use on
/// bootstrap pseudo-samples.
pub(crate) fn estimate_pair_quiet(panel: &TimeSeriesPanel, wiring: &EstimatorWiring) -> Result<PairEstimate> {
    estimate_pair_inner(panel, wiring, false)
}

fn estimate_pair_inner(panel: &TimeSeriesPanel, wiring: &EstimatorWiring, diagnose: bool) -> Result<PairEstimate> {
    if wiring.response >= panel.n_vars() {
        return Err(Error::InvalidSpec(format!(
            "response index {} out of range",
            wiring.response
        )));
    }
    let model = fit_var(panel, wiring.var_order)?;
    let id = identify(&model, panel, &wiring.identification, wiring.first_stage_f_floor)?;
    let var = var_irf(&model, &id, wiring.horizons, wiring.response);
    let lags = match wiring.lp_lags {
        LpLags::Fixed(p) => p,
        LpLags::MatchVar => model.p,
    };
    let lp = lp_irf(
        panel,
        &LpConfig {
            horizons: wiring.horizons,
            lags,
            response: wiring.response,
            identification: wiring.identification.clone(),
            include_constant: wiring.include_constant,
            weak_f_floor: wiring.first_stage_f_floor,
        },
    )?;
    let mut warnings = lp.warnings;
    if diagnose {
        if let Some(w) = model.stability_warning() {
            warnings.push(w);
        }
    }
    Ok(PairEstimate {
        lp: lp.irf,
        var,
        r2_lp: lp.r_squared,
        r2_var: model.r_squared[wiring.response],
        var_order: model.p,
        lp_lags: lags,
        warnings,
    })
}
