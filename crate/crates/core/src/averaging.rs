//! Combining LP and VAR impulse responses.
//!
//! The averaged estimator at horizon `h` is `w_h * lp_h + (1 - w_h) * var_h`.
//! Its MSE is the quadratic `w^2 a + (1-w)^2 d + 2 w (1-w) f` with
//! `a = V_L + b_L^2`, `d = V_V + b_V^2` and `f = C + b_L b_V`, minimized at
//! `w* = (d - f) / (a + d - 2 f)`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapDraws;
use crate::error::Result;
use crate::irf::IrfEstimate;
use crate::panel::{csv_err, format_num};

/// Default relative threshold for the oracle-weight denominator.
pub const DEFAULT_GUARD: f64 = 1e-12;
/// Weight returned when the denominator guard fires.
pub const FALLBACK_WEIGHT: f64 = 0.5;
/// Cap on the squared LP/VAR discrepancy ratio of the flexible weight.
pub const DISCREPANCY_CAP: f64 = 1e6;

/// Bias, variance and covariance of the LP and VAR estimators at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskComponents {
    pub v_lp: f64,
    pub v_var: f64,
    pub cov: f64,
    pub bias_lp: f64,
    pub bias_var: f64,
}

impl RiskComponents {
    /// MSE of LP: `V_L + b_L^2`.
    pub fn a(&self) -> f64 {
        self.v_lp + self.bias_lp * self.bias_lp
    }

    /// MSE of VAR: `V_V + b_V^2`.
    pub fn d(&self) -> f64 {
        self.v_var + self.bias_var * self.bias_var
    }

    /// Cross term `C + b_L b_V`.
    pub fn f(&self) -> f64 {
        self.cov + self.bias_lp * self.bias_var
    }

    pub fn is_psd(&self) -> bool {
        self.v_lp >= 0.0 && self.v_var >= 0.0 && self.cov * self.cov <= self.v_lp * self.v_var + 1e-12
    }
}

pub fn combined_mse(w: f64, risk: &RiskComponents) -> f64 {
    let (a, d, f) = (risk.a(), risk.d(), risk.f());
    (w * w * a + (1.0 - w) * (1.0 - w) * d + 2.0 * w * (1.0 - w) * f).max(0.0)
}

/// MSE-minimizing LP weight clipped to `[0, 1]`. Returns the fallback
/// weight with the flag set when `a + d - 2f < guard * max(a, d, |f|, 1)`.
pub fn oracle_weight(risk: &RiskComponents, guard: f64) -> (f64, bool) {
    let (a, d, f) = (risk.a(), risk.d(), risk.f());
    let denom = a + d - 2.0 * f;
    let scale = a.max(d).max(f.abs()).max(1.0);
    if denom.is_nan() || denom < guard * scale {
        return (FALLBACK_WEIGHT, true);
    }
    (((d - f) / denom).clamp(0.0, 1.0), false)
}

/// Weight vector `G^{-1} 1 / (1' G^{-1} 1)` for `K` estimators with
/// second-moment matrix `G = Sigma + b b'`. Weights sum to one and are not
/// clipped. Falls back to equal weights (flag set) when `G` is singular.
pub fn oracle_weight_k(g: &DMatrix<f64>) -> (DVector<f64>, bool) {
    let k = g.nrows();
    let equal = DVector::from_element(k, 1.0 / k as f64);
    if k == 0 || g.ncols() != k {
        return (equal, true);
    }
    let ones = DVector::from_element(k, 1.0);
    let scale = g.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let solved = g.clone().lu().solve(&ones);
    match solved {
        Some(x) if x.iter().all(|v| v.is_finite()) => {
            let s = x.sum();
            if s.abs() * scale < 1e-12 || !s.is_finite() {
                (equal, true)
            } else {
                let w = x / s;
                if w.iter().all(|v| v.is_finite()) {
                    (w, false)
                } else {
                    (equal, true)
                }
            }
        }
        _ => (equal, true),
    }
}

/// Which rule produced a weight schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMethod {
    Oracle,
    Plugin,
    Flexible,
    Direct,
    ModelAvg,
}

impl WeightMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            WeightMethod::Oracle => "oracle",
            WeightMethod::Plugin => "plugin",
            WeightMethod::Flexible => "flexible",
            WeightMethod::Direct => "direct",
            WeightMethod::ModelAvg => "model_avg",
        }
    }
}

/// Per-horizon LP weights in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    pub method: WeightMethod,
    pub weights: Vec<f64>,
    /// True where the weight came from a fallback rather than the formula.
    pub safeguard: Vec<bool>,
}

impl WeightSchedule {
    pub fn constant(method: WeightMethod, w: f64, horizons: usize) -> Self {
        Self {
            method,
            weights: vec![w.clamp(0.0, 1.0); horizons + 1],
            safeguard: vec![false; horizons + 1],
        }
    }

    /// Oracle rule applied at every horizon.
    pub fn from_risk(method: WeightMethod, risk: &[RiskComponents], guard: f64) -> Self {
        let (weights, safeguard) = risk.iter().map(|r| oracle_weight(r, guard)).unzip();
        Self {
            method,
            weights,
            safeguard,
        }
    }
}

/// `(θ_LP - θ_VAR)^2 / (θ_LP + θ_VAR)^2`, capped.
fn discrepancy(lp: f64, var: f64) -> f64 {
    let diff = lp - var;
    if diff == 0.0 {
        return 0.0;
    }
    let sum = lp + var;
    if sum.abs() < 1e-12 {
        return DISCREPANCY_CAP;
    }
    ((diff / sum).powi(2)).min(DISCREPANCY_CAP)
}

fn flexible_scalar(lp: f64, var: f64, a: f64, b: f64) -> f64 {
    (a / (1.0 + b * discrepancy(lp, var))).clamp(0.0, 1.0)
}

/// Discrepancy-dependent weight `a / (1 + b r_h^2)` with
/// `r_h = (lp_h - var_h) / (lp_h + var_h)`.
pub fn flexible_weight(lp: &IrfEstimate, var: &IrfEstimate, a: f64, b: f64) -> Result<WeightSchedule> {
    lp.check_aligned(var)?;
    let weights = lp
        .values
        .iter()
        .zip(&var.values)
        .map(|(l, v)| flexible_scalar(*l, *v, a, b))
        .collect::<Vec<_>>();
    let n = weights.len();
    Ok(WeightSchedule {
        method: WeightMethod::Flexible,
        weights,
        safeguard: vec![false; n],
    })
}

/// Search grids for the weight rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGrids {
    pub w: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl Default for WeightGrids {
    fn default() -> Self {
        Self {
            w: (0..=100).map(|i| i as f64 / 100.0).collect(),
            a: (0..=20).map(|i| i as f64 / 20.0).collect(),
            b: vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
        }
    }
}

fn improves(candidate: f64, best: f64) -> bool {
    if best.is_infinite() {
        return candidate.is_finite();
    }
    candidate < best - 1e-12 * best.abs().max(f64::MIN_POSITIVE)
}

/// Grid pair `(a, b)` minimizing the bootstrap MSE of the flexible
/// combination summed over draws and horizons. Ties keep the
/// lexicographically smallest pair.
pub fn calibrate_flexible(draws: &BootstrapDraws, a_grid: &[f64], b_grid: &[f64]) -> (f64, f64) {
    let mut best = (f64::INFINITY, a_grid.first().copied().unwrap_or(0.0), b_grid.first().copied().unwrap_or(0.0));
    let mut a_sorted = a_grid.to_vec();
    a_sorted.sort_by(f64::total_cmp);
    let mut b_sorted = b_grid.to_vec();
    b_sorted.sort_by(f64::total_cmp);
    // discrepancies do not depend on (a, b)
    let ratios: Vec<Vec<f64>> = draws
        .lp
        .iter()
        .zip(&draws.var)
        .map(|(l, v)| l.iter().zip(v).map(|(x, y)| discrepancy(*x, *y)).collect())
        .collect();
    for &a in &a_sorted {
        for &b in &b_sorted {
            let mut total = 0.0;
            for ((l, v), r) in draws.lp.iter().zip(&draws.var).zip(&ratios) {
                for h in 0..l.len() {
                    let w = (a / (1.0 + b * r[h])).clamp(0.0, 1.0);
                    let e = w * l[h] + (1.0 - w) * v[h] - draws.pseudo_truth[h];
                    total += e * e;
                }
            }
            if improves(total, best.0) {
                best = (total, a, b);
            }
        }
    }
    (best.1, best.2)
}

/// Per-horizon grid minimizer of the bootstrap MSE of
/// `w lp* + (1 - w) var*` around the pseudo-truth; ties keep the smaller `w`.
pub fn direct_weight(draws: &BootstrapDraws, grid: &[f64]) -> WeightSchedule {
    let horizons = draws.pseudo_truth.len();
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let weights = (0..horizons)
        .map(|h| {
            let mut best = (f64::INFINITY, grid.first().copied().unwrap_or(0.0));
            for &w in &grid {
                let mse: f64 = draws
                    .lp
                    .iter()
                    .zip(&draws.var)
                    .map(|(l, v)| {
                        let e = w * l[h] + (1.0 - w) * v[h] - draws.pseudo_truth[h];
                        e * e
                    })
                    .sum();
                if improves(mse, best.0) {
                    best = (mse, w);
                }
            }
            best.1
        })
        .collect();
    WeightSchedule {
        method: WeightMethod::Direct,
        weights,
        safeguard: vec![false; horizons],
    }
}

/// `R2_LP,h / (R2_LP,h + R2_VAR)`; 0.5 (flagged) when both are zero.
pub fn model_avg_weight(r2_lp: &[f64], r2_var: f64) -> WeightSchedule {
    let (weights, safeguard) = r2_lp
        .iter()
        .map(|&r| {
            let s = r + r2_var;
            if s > 0.0 {
                ((r / s).clamp(0.0, 1.0), false)
            } else {
                (FALLBACK_WEIGHT, true)
            }
        })
        .unzip();
    WeightSchedule {
        method: WeightMethod::ModelAvg,
        weights,
        safeguard,
    }
}

/// Pointwise combination `w_h lp_h + (1 - w_h) var_h`.
pub fn combine(lp: &IrfEstimate, var: &IrfEstimate, w: &WeightSchedule) -> Result<IrfEstimate> {
    lp.check_aligned(var)?;
    if w.weights.len() != lp.values.len() {
        return Err(crate::error::Error::DimensionMismatch(format!(
            "{} weights for {} horizons",
            w.weights.len(),
            lp.values.len()
        )));
    }
    let values = lp
        .values
        .iter()
        .zip(&var.values)
        .zip(&w.weights)
        .map(|((l, v), w)| w * l + (1.0 - w) * v)
        .collect();
    Ok(IrfEstimate::new(format!("avg_{}", w.method.as_str()), values))
}

/// CSV `horizon,weight,safeguard` for one schedule.
pub fn write_schedule_csv<W: Write>(schedule: &WeightSchedule, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["horizon", "weight", "safeguard"]).map_err(csv_err)?;
    for (h, (wt, sg)) in schedule.weights.iter().zip(&schedule.safeguard).enumerate() {
        w.write_record([h.to_string(), format_num(*wt), sg.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV `horizon,v_lp,v_var,cov,bias_lp,bias_var,a,d,f`.
pub fn write_risk_csv<W: Write>(risk: &[RiskComponents], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    w.write_record(["horizon", "v_lp", "v_var", "cov", "bias_lp", "bias_var", "a", "d", "f"])
        .map_err(csv_err)?;
    for (h, r) in risk.iter().enumerate() {
        let mut rec = vec![h.to_string()];
        rec.extend(
            [r.v_lp, r.v_var, r.cov, r.bias_lp, r.bias_var, r.a(), r.d(), r.f()]
                .iter()
                .map(|v| format_num(*v)),
        );
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
