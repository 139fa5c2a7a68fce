//! Reduced-form VAR estimation and structural impulse responses.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irf::IrfEstimate;
use crate::linalg::{lstsq, spectral_radius};
use crate::panel::{Instrument, TimeSeriesPanel};
use crate::regression::{build_lag_matrix, information_criterion, ols, Criterion};
use crate::wiring::Identification;

/// Lag order: fixed, or chosen by an information criterion over `0..=max_lag`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarOrder {
    Fixed(usize),
    Auto { criterion: Criterion, max_lag: usize },
}

/// Fitted `Y_t = c + A_1 Y_{t-1} + ... + A_p Y_{t-p} + v_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarModel {
    pub p: usize,
    #[serde(serialize_with = "ser_vector")]
    pub intercept: DVector<f64>,
    #[serde(serialize_with = "ser_matrices")]
    pub coefficients: Vec<DMatrix<f64>>,
    /// `(T - p) x n`; row `r` belongs to period `first_period + r`.
    #[serde(skip)]
    pub residuals: DMatrix<f64>,
    /// ML residual covariance (divisor `T - p`).
    #[serde(serialize_with = "ser_matrix")]
    pub sigma: DMatrix<f64>,
    pub first_period: usize,
    /// In-sample R^2 of each equation.
    pub r_squared: Vec<f64>,
}

fn ser_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

fn ser_matrices<S: serde::Serializer>(ms: &[DMatrix<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    let all: Vec<Vec<Vec<f64>>> = ms
        .iter()
        .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
        .collect();
    all.serialize(s)
}

fn ser_vector<S: serde::Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    v.as_slice().serialize(s)
}

impl VarModel {
    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.coefficients)
    }

    /// Warning text for explosive fitted dynamics.
    pub fn stability_warning(&self) -> Option<String> {
        let r = self.spectral_radius();
        (r >= 1.0).then(|| format!("fitted VAR is explosive (spectral radius {r:.4})"))
    }

    /// Residual periods, aligned with residual rows.
    pub fn residual_periods(&self) -> std::ops::Range<usize> {
        self.first_period..self.first_period + self.residuals.nrows()
    }
}

pub fn fit_var(panel: &TimeSeriesPanel, order: VarOrder) -> Result<VarModel> {
    match order {
        VarOrder::Fixed(p) => fit_fixed(panel, p),
        VarOrder::Auto { criterion, max_lag } => {
            let p = select_order(panel, criterion, max_lag)?;
            fit_fixed(panel, p)
        }
    }
}

/// Criterion-minimizing order over `0..=max_lag` on the common sample
/// `t = max_lag .. T-1`; ties go to the smaller order.
pub fn select_order(panel: &TimeSeriesPanel, criterion: Criterion, max_lag: usize) -> Result<usize> {
    let n = panel.n_vars();
    let t_len = panel.len();
    if t_len <= n * max_lag + 1 {
        return Err(Error::InsufficientData(format!(
            "{t_len} observations too few for {n} variables with up to {max_lag} lags"
        )));
    }
    let full = build_lag_matrix(panel, max_lag, true)?;
    let t_eff = full.design.nrows();
    let mut best = (f64::INFINITY, 0);
    for p in 0..=max_lag {
        let x = full.design.columns(0, 1 + n * p).into_owned();
        let b = lstsq(&x, &full.targets)?;
        let u = &full.targets - &x * &b;
        let sigma = (u.transpose() * &u) / t_eff as f64;
        let ic = information_criterion(&sigma, t_eff, (1 + n * p) * n, criterion)?;
        if ic < best.0 {
            best = (ic, p);
        }
    }
    Ok(best.1)
}

fn fit_fixed(panel: &TimeSeriesPanel, p: usize) -> Result<VarModel> {
    let n = panel.n_vars();
    let lag = build_lag_matrix(panel, p, true)?;
    let t_eff = lag.design.nrows();
    if t_eff <= n * p + 1 {
        return Err(Error::InsufficientData(format!(
            "{t_eff} effective observations for {} regressors",
            n * p + 1
        )));
    }
    let b = lstsq(&lag.design, &lag.targets)?;
    let residuals = &lag.targets - &lag.design * &b;
    let sigma = (residuals.transpose() * &residuals) / t_eff as f64;
    let intercept = b.row(0).transpose();
    let coefficients = (0..p)
        .map(|j| DMatrix::from_fn(n, n, |i, k| b[(1 + j * n + k, i)]))
        .collect();
    let r_squared = (0..n)
        .map(|i| {
            let y = lag.targets.column(i);
            let mean = y.mean();
            let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            let rss = residuals.column(i).norm_squared();
            if tss > 0.0 {
                (1.0 - rss / tss).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(VarModel {
        p,
        intercept,
        coefficients,
        residuals,
        sigma,
        first_period: p,
        r_squared,
    })
}

/// How the impact column was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum IdMode {
    ObservedShock,
    Cholesky { order: Vec<usize>, impulse: usize },
    Proxy { policy: usize, scale: f64 },
}

/// Identified column of the structural impact matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralId {
    pub mode: IdMode,
    pub impact: DVector<f64>,
}

/// Identifies the impact column for the given scheme.
pub fn identify(
    model: &VarModel,
    panel: &TimeSeriesPanel,
    ident: &Identification,
    min_first_stage_f: f64,
) -> Result<StructuralId> {
    ident.validate(panel)?;
    match ident {
        Identification::ObservedShock { shock } => {
            identify_observed_joint(model, panel.shocks().expect("validated"), *shock)
        }
        Identification::Recursive { impulse, order } => identify_cholesky(model, order, *impulse),
        Identification::Proxy { impulse, scale } => identify_proxy(
            model,
            panel.instrument().expect("validated"),
            *impulse,
            *scale,
            min_first_stage_f,
        ),
    }
}

/// Impact column from regressing each reduced-form residual on the
/// observed shock (with a constant). `shock` is indexed by period.
pub fn identify_observed(model: &VarModel, shock: &[f64]) -> Result<StructuralId> {
    let periods = model.residual_periods();
    if shock.len() < periods.end {
        return Err(Error::DimensionMismatch("shock shorter than the VAR sample".into()));
    }
    let m = periods.len();
    let x = DMatrix::from_fn(m, 2, |r, c| if c == 0 { 1.0 } else { shock[model.first_period + r] });
    let b = lstsq(&x, &model.residuals)?;
    Ok(StructuralId {
        mode: IdMode::ObservedShock,
        impact: b.row(1).transpose(),
    })
}

/// Impact column for shock `column` from regressing each residual on all
/// observed shocks jointly (with a constant). With a single recorded shock
/// this is [`identify_observed`].
pub fn identify_observed_joint(model: &VarModel, shocks: &DMatrix<f64>, column: usize) -> Result<StructuralId> {
    let periods = model.residual_periods();
    if shocks.nrows() < periods.end {
        return Err(Error::DimensionMismatch("shock shorter than the VAR sample".into()));
    }
    if column >= shocks.ncols() {
        return Err(Error::InvalidSpec(format!("no observed shock column {column}")));
    }
    let k = shocks.ncols();
    let x = DMatrix::from_fn(periods.len(), k + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            shocks[(model.first_period + r, c - 1)]
        }
    });
    let b = lstsq(&x, &model.residuals)?;
    Ok(StructuralId {
        mode: IdMode::ObservedShock,
        impact: b.row(column + 1).transpose(),
    })
}

/// Recursive identification with unit-effect normalization: the impact
/// column of the Cholesky factor of `sigma` (variables permuted by `order`)
/// for `impulse`, divided by its own diagonal entry.
pub fn identify_cholesky(model: &VarModel, order: &[usize], impulse: usize) -> Result<StructuralId> {
    let n = model.n();
    let mut seen = vec![false; n];
    if order.len() != n || order.iter().any(|&v| v >= n || std::mem::replace(&mut seen[v], true)) {
        return Err(Error::InvalidSpec(format!(
            "recursive order must be a permutation of 0..{n}"
        )));
    }
    let pos = order
        .iter()
        .position(|&v| v == impulse)
        .ok_or_else(|| Error::InvalidSpec(format!("impulse {impulse} not in order")))?;
    let permuted = DMatrix::from_fn(n, n, |i, j| model.sigma[(order[i], order[j])]);
    let chol = permuted.cholesky().ok_or_else(|| {
        Error::DegenerateCovariance("residual covariance is not positive definite".into())
    })?;
    let l = chol.l();
    let diag = l[(pos, pos)];
    let mut impact = DVector::zeros(n);
    for i in 0..n {
        impact[order[i]] = l[(i, pos)] / diag;
    }
    Ok(StructuralId {
        mode: IdMode::Cholesky {
            order: order.to_vec(),
            impulse,
        },
        impact,
    })
}

/// External-instrument identification: impact column proportional to
/// `Cov(v_t, z_t)` over periods with an observed instrument, normalized so
/// the policy variable moves by `scale` on impact.
pub fn identify_proxy(
    model: &VarModel,
    instrument: &Instrument,
    policy: usize,
    scale: f64,
    min_first_stage_f: f64,
) -> Result<StructuralId> {
    let n = model.n();
    if policy >= n {
        return Err(Error::InvalidSpec(format!("policy index {policy} out of range")));
    }
    let rows: Vec<usize> = (0..model.residuals.nrows())
        .filter(|&r| instrument.is_observed(model.first_period + r))
        .collect();
    if rows.len() < n + 1 {
        return Err(Error::InsufficientData(format!(
            "{} periods with both residuals and instrument; need {}",
            rows.len(),
            n + 1
        )));
    }
    let m = rows.len() as f64;
    let z: Vec<f64> = rows
        .iter()
        .map(|&r| instrument.get(model.first_period + r).unwrap_or(0.0))
        .collect();
    let z_mean = z.iter().sum::<f64>() / m;
    let cov: Vec<f64> = (0..n)
        .map(|i| {
            let u: Vec<f64> = rows.iter().map(|&r| model.residuals[(r, i)]).collect();
            let u_mean = u.iter().sum::<f64>() / m;
            u.iter()
                .zip(&z)
                .map(|(a, b)| (a - u_mean) * (b - z_mean))
                .sum::<f64>()
                / m
        })
        .collect();
    let policy_u = DVector::from_iterator(rows.len(), rows.iter().map(|&r| model.residuals[(r, policy)]));
    let x = DMatrix::from_fn(rows.len(), 2, |r, c| if c == 0 { 1.0 } else { z[r] });
    let f = match ols(&x, &policy_u) {
        Ok(fit) => {
            let restricted: f64 = {
                let mean = policy_u.mean();
                policy_u.iter().map(|v| (v - mean).powi(2)).sum()
            };
            if fit.rss > 0.0 {
                (restricted - fit.rss).max(0.0) / (fit.rss / (rows.len() - 2) as f64)
            } else {
                f64::INFINITY
            }
        }
        Err(Error::SingularDesign { .. }) => 0.0,
        Err(e) => return Err(e),
    };
    if cov[policy] == 0.0 || f < min_first_stage_f {
        return Err(Error::IrrelevantInstrument(format!(
            "first-stage F = {f:.3} below {min_first_stage_f}"
        )));
    }
    let impact = DVector::from_iterator(n, cov.iter().map(|c| c / cov[policy] * scale));
    Ok(StructuralId {
        mode: IdMode::Proxy { policy, scale },
        impact,
    })
}

/// Structural responses of `response` for horizons `0..=horizons` via the
/// VMA recursion `Phi_h = sum_j A_j Phi_{h-j}` applied to the impact column.
pub fn var_irf(model: &VarModel, id: &StructuralId, horizons: usize, response: usize) -> IrfEstimate {
    let n = model.n();
    let p = model.p;
    let mut psi: Vec<DVector<f64>> = Vec::with_capacity(horizons + 1);
    psi.push(id.impact.clone());
    for h in 1..=horizons {
        let mut next = DVector::zeros(n);
        for j in 1..=h.min(p) {
            next += &model.coefficients[j - 1] * &psi[h - j];
        }
        psi.push(next);
    }
    IrfEstimate::new("var", psi.iter().map(|v| v[response]).collect())
}
