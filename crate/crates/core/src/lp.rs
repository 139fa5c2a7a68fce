//! Horizon-by-horizon local projections.
//!
//! At horizon `h` the response `y_{i,t+h}` is regressed on a constant, the
//! impulse variable `x_t`, optional contemporaneous controls and `p` lags of
//! every panel variable. Each horizon uses its own maximal sample
//! `t = p .. T-1-h`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::irf::IrfEstimate;
use crate::panel::TimeSeriesPanel;
use crate::regression::{ols, tsls};
use crate::wiring::Identification;

#[derive(Debug, Clone, PartialEq)]
pub struct LpConfig {
    pub horizons: usize,
    pub lags: usize,
    pub response: usize,
    pub identification: Identification,
    pub include_constant: bool,
    /// First-stage F below which an IV fit is flagged as weak.
    pub weak_f_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutput {
    pub irf: IrfEstimate,
    /// In-sample R^2 of the horizon-h regression, for each h.
    pub r_squared: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn lp_irf(panel: &TimeSeriesPanel, cfg: &LpConfig) -> Result<LpOutput> {
    let t_len = panel.len();
    let n = panel.n_vars();
    let p = cfg.lags;
    if cfg.response >= n {
        return Err(Error::InvalidSpec(format!("response index {} out of range", cfg.response)));
    }
    cfg.identification.validate(panel)?;
    if t_len <= p {
        return Err(Error::InsufficientData(format!(
            "{t_len} observations cannot support {p} lags"
        )));
    }

    let (impulse, contemporaneous): (Vec<f64>, Vec<usize>) = match &cfg.identification {
        Identification::ObservedShock { shock } => (
            panel.shock(*shock).expect("validated"),
            Vec::new(),
        ),
        Identification::Recursive { impulse, order } => (
            panel.data().column(*impulse).iter().copied().collect(),
            order
                .iter()
                .take_while(|&&v| v != *impulse)
                .copied()
                .collect(),
        ),
        Identification::Proxy { impulse, .. } => {
            (panel.data().column(*impulse).iter().copied().collect(), Vec::new())
        }
    };

    let c = usize::from(cfg.include_constant);
    let x_col = c;
    let width = c + 1 + contemporaneous.len() + n * p;
    let base_rows = t_len - p;
    let data = panel.data();
    let base = DMatrix::from_fn(base_rows, width, |r, col| {
        let t = p + r;
        if col < c {
            1.0
        } else if col == x_col {
            impulse[t]
        } else if col < x_col + 1 + contemporaneous.len() {
            data[(t, contemporaneous[col - x_col - 1])]
        } else {
            let k = col - x_col - 1 - contemporaneous.len();
            data[(t - (k / n + 1), k % n)]
        }
    });
    let instrument = match &cfg.identification {
        Identification::Proxy { .. } => Some(panel.instrument().expect("validated").gather(
            &(p..t_len).collect::<Vec<_>>(),
        )),
        _ => None,
    };
    let scale = match &cfg.identification {
        Identification::Proxy { scale, .. } => *scale,
        _ => 1.0,
    };

    let mut values = Vec::with_capacity(cfg.horizons + 1);
    let mut r_squared = Vec::with_capacity(cfg.horizons + 1);
    let mut warnings = Vec::new();
    for h in 0..=cfg.horizons {
        if base_rows < h + width {
            return Err(Error::InsufficientData(format!(
                "horizon {h}: {} usable observations for {width} regressors",
                base_rows.saturating_sub(h)
            )));
        }
        let rows = base_rows - h;
        let design = base.rows(0, rows).into_owned();
        let target = DVector::from_fn(rows, |r, _| data[(p + r + h, cfg.response)]);
        let wrap = |e: Error| match e {
            Error::InsufficientData(m) => Error::InsufficientData(format!("horizon {h}: {m}")),
            other => other,
        };
        match &instrument {
            None => {
                let fit = ols(&design, &target).map_err(wrap)?;
                values.push(fit.coefficients[x_col]);
                r_squared.push(fit.r_squared);
            }
            Some(inst) => {
                let inst = inst.gather(&(0..rows).collect::<Vec<_>>());
                let iv = tsls(&design, x_col, &inst, &target).map_err(wrap)?;
                if iv.is_weak(cfg.weak_f_floor) {
                    warnings.push(format!(
                        "horizon {h}: weak instrument (first-stage F = {:.2})",
                        iv.first_stage_f
                    ));
                }
                values.push(iv.fit.coefficients[x_col] * scale);
                r_squared.push(iv.fit.r_squared);
            }
        }
    }
    Ok(LpOutput {
        irf: IrfEstimate::new("lp", values),
        r_squared,
        warnings,
    })
}
