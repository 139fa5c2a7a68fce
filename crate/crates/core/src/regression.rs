//! Lag-matrix construction, OLS, 2SLS and information criteria.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::lstsq_vec;
use crate::panel::{Instrument, TimeSeriesPanel};

/// Result of a single least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    pub rss: f64,
    /// Total sum of squares around the target mean.
    pub tss: f64,
    pub r_squared: f64,
    pub dof: usize,
}

impl RegressionFit {
    fn from_residuals(coefficients: DVector<f64>, residuals: DVector<f64>, target: &DVector<f64>, k: usize) -> Self {
        let rss = residuals.norm_squared();
        let mean = target.mean();
        let tss: f64 = target.iter().map(|y| (y - mean).powi(2)).sum();
        let r_squared = if tss > 0.0 {
            (1.0 - rss / tss).clamp(0.0, 1.0)
        } else {
            0.0
        };
        Self {
            coefficients,
            residuals,
            rss,
            tss,
            r_squared,
            dof: target.len().saturating_sub(k),
        }
    }
}

/// Design matrix of lagged observations with the aligned targets.
///
/// Row `r` corresponds to period `t = first_period + r`; its columns are
/// `[1, Y'_{t-1}, ..., Y'_{t-p}]` (the constant only when requested).
#[derive(Debug, Clone, PartialEq)]
pub struct LagDesign {
    pub design: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    pub first_period: usize,
}

pub fn build_lag_matrix(panel: &TimeSeriesPanel, p: usize, include_constant: bool) -> Result<LagDesign> {
    let t = panel.len();
    if t <= p {
        return Err(Error::InsufficientData(format!(
            "{t} observations cannot support {p} lags"
        )));
    }
    let n = panel.n_vars();
    let rows = t - p;
    let c = usize::from(include_constant);
    let data = panel.data();
    let design = DMatrix::from_fn(rows, c + n * p, |r, col| {
        if col < c {
            1.0
        } else {
            let lag = (col - c) / n + 1;
            let var = (col - c) % n;
            data[(p + r - lag, var)]
        }
    });
    let targets = data.rows(p, rows).into_owned();
    Ok(LagDesign {
        design,
        targets,
        first_period: p,
    })
}

/// Ordinary least squares of `target` on `design`.
pub fn ols(design: &DMatrix<f64>, target: &DVector<f64>) -> Result<RegressionFit> {
    let coefficients = lstsq_vec(design, target)?;
    let residuals = target - design * &coefficients;
    Ok(RegressionFit::from_residuals(
        coefficients,
        residuals,
        target,
        design.ncols(),
    ))
}

/// Two-stage least squares fit together with first-stage diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IvFit {
    pub fit: RegressionFit,
    /// F statistic of the excluded instrument in the first stage.
    pub first_stage_f: f64,
    /// Rows with an observed instrument that entered both stages.
    pub rows_used: usize,
}

impl IvFit {
    pub fn is_weak(&self, f_floor: f64) -> bool {
        self.first_stage_f < f_floor
    }
}

/// Two-stage least squares where column `endogenous` of `design` is
/// instrumented by `instrument`. Rows with a missing instrument are dropped
/// from both stages.
pub fn tsls(
    design: &DMatrix<f64>,
    endogenous: usize,
    instrument: &Instrument,
    target: &DVector<f64>,
) -> Result<IvFit> {
    let (m, k) = design.shape();
    if endogenous >= k {
        return Err(Error::DimensionMismatch(format!(
            "endogenous column {endogenous} out of range for {k} columns"
        )));
    }
    if instrument.len() != m || target.len() != m {
        return Err(Error::DimensionMismatch(
            "instrument and target must match the design rows".into(),
        ));
    }
    let rows: Vec<usize> = (0..m).filter(|&t| instrument.is_observed(t)).collect();
    if rows.len() < k + 1 {
        return Err(Error::InsufficientData(format!(
            "{} observed instrument rows for {k} regressors",
            rows.len()
        )));
    }
    let used = rows.len();
    let x = design.select_rows(&rows);
    let y = DVector::from_iterator(used, rows.iter().map(|&t| target[t]));
    let z = DVector::from_iterator(used, rows.iter().map(|&t| instrument.get(t).unwrap_or(0.0)));
    let endog = x.column(endogenous).into_owned();

    let mut first = x.clone();
    first.set_column(endogenous, &z);
    let first_fit = ols(&first, &endog)?;
    let exog_cols: Vec<usize> = (0..k).filter(|&c| c != endogenous).collect();
    let restricted_rss = if exog_cols.is_empty() {
        endog.norm_squared()
    } else {
        ols(&x.select_columns(&exog_cols), &endog)?.rss
    };
    let dof = (used - k) as f64;
    let first_stage_f = if first_fit.rss > 0.0 {
        (restricted_rss - first_fit.rss).max(0.0) / (first_fit.rss / dof)
    } else {
        f64::INFINITY
    };

    let fitted = &endog - &first_fit.residuals;
    let mut second = x.clone();
    second.set_column(endogenous, &fitted);
    let coefficients = lstsq_vec(&second, &y)?;
    let residuals = &y - &x * &coefficients;
    Ok(IvFit {
        fit: RegressionFit::from_residuals(coefficients, residuals, &y, k),
        first_stage_f,
        rows_used: used,
    })
}

/// Lag-order selection criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Aic,
    Bic,
}

/// `log det(sigma) + penalty(k, T)`; `sigma` is the ML residual covariance
/// (a 1x1 matrix in the univariate case) and `k` the total number of freely
/// estimated coefficients across equations.
pub fn information_criterion(sigma: &DMatrix<f64>, t: usize, k: usize, kind: Criterion) -> Result<f64> {
    if t == 0 {
        return Err(Error::InsufficientData("sample size must be positive".into()));
    }
    let det = if sigma.nrows() == 1 {
        sigma[(0, 0)]
    } else {
        sigma.determinant()
    };
    let log_det = det.ln();
    if !log_det.is_finite() {
        return Err(Error::DegenerateCovariance(format!(
            "log determinant of residual covariance is {log_det}"
        )));
    }
    let tf = t as f64;
    let penalty = match kind {
        Criterion::Aic => 2.0 * k as f64 / tf,
        Criterion::Bic => k as f64 * tf.ln() / tf,
    };
    Ok(log_det + penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn col(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn lag_matrix_univariate_with_constant() {
        let p = TimeSeriesPanel::from_series(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = build_lag_matrix(&p, 1, true).unwrap();
        assert_eq!(
            d.design,
            DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 3.0])
        );
        assert_eq!(d.targets.column(0).as_slice(), &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn lag_matrix_p0_is_constant_only() {
        let p = TimeSeriesPanel::from_series(&[5.0, 6.0, 7.0]).unwrap();
        let d = build_lag_matrix(&p, 0, true).unwrap();
        assert_eq!(d.design, DMatrix::from_element(3, 1, 1.0));
        assert_eq!(d.targets.column(0).as_slice(), &[5.0, 6.0, 7.0]);
    }

    #[test]
    fn lag_matrix_width_for_two_variables() {
        let data = DMatrix::from_fn(6, 2, |i, j| (i * 2 + j) as f64);
        let p = TimeSeriesPanel::new(data, vec!["a".into(), "b".into()]).unwrap();
        let d = build_lag_matrix(&p, 2, true).unwrap();
        assert_eq!(d.design.ncols(), 5);
        assert_eq!(d.design.nrows(), 4);
        // row 0 is period 2: lag1 = period 1 = (2,3), lag2 = period 0 = (0,1)
        assert_eq!(d.design.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0, 0.0, 1.0]);
    }

    #[test]
    fn lag_matrix_rejects_short_sample() {
        let p = TimeSeriesPanel::from_series(&[1.0, 2.0]).unwrap();
        assert!(matches!(
            build_lag_matrix(&p, 2, true),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn ols_constant_only() {
        let fit = ols(&DMatrix::from_element(3, 1, 1.0), &col(&[2.0, 2.0, 2.0])).unwrap();
        assert_relative_eq!(fit.coefficients[0], 2.0, epsilon = 1e-14);
        assert!(fit.rss < 1e-24);
    }

    #[test]
    fn ols_exact_slope() {
        let x = col(&[1.0, -2.0, 0.5, 3.0]);
        let y = &x * 3.0;
        let fit = ols(&DMatrix::from_column_slice(4, 1, x.as_slice()), &y).unwrap();
        assert_relative_eq!(fit.coefficients[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tsls_all_masked_is_insufficient() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.1, 1.0, 0.4, 1.0, -0.3, 1.0, 0.9]);
        let inst = Instrument::from_options(&[None, None, None, None]);
        let y = col(&[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            tsls(&x, 1, &inst, &y),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn ic_zero_for_unit_variance_no_params() {
        let s = DMatrix::from_element(1, 1, 1.0);
        assert_eq!(information_criterion(&s, 100, 0, Criterion::Aic).unwrap(), 0.0);
        assert_eq!(information_criterion(&s, 100, 0, Criterion::Bic).unwrap(), 0.0);
    }

    #[test]
    fn ic_prefers_fewer_parameters_at_equal_fit() {
        let s = DMatrix::from_row_slice(2, 2, &[1.3, 0.2, 0.2, 0.8]);
        for kind in [Criterion::Aic, Criterion::Bic] {
            let small = information_criterion(&s, 200, 4, kind).unwrap();
            let large = information_criterion(&s, 200, 10, kind).unwrap();
            assert!(small < large);
        }
    }

    #[test]
    fn ic_degenerate_covariance() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            information_criterion(&s, 50, 2, Criterion::Aic),
            Err(Error::DegenerateCovariance(_))
        ));
    }
}
