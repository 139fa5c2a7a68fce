//! Autoregressive sieve: fit, pseudo-truth and residual resampling.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dgp::DEFAULT_BURN_IN;
use crate::error::{Error, Result};
use crate::panel::TimeSeriesPanel;
use crate::regression::Criterion;
use crate::rng::SeedPath;
use crate::var::{fit_var, identify, var_irf, VarModel, VarOrder};
use crate::wiring::EstimatorWiring;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SieveConfig {
    #[serde(default = "bic")]
    pub criterion: Criterion,
    /// Largest candidate order; `None` uses `floor(12 (T/100)^(1/4))`,
    /// reduced until the largest model is estimable.
    #[serde(default)]
    pub max_lag: Option<usize>,
    #[serde(default = "burn_in")]
    pub burn_in: usize,
}

fn bic() -> Criterion {
    Criterion::Bic
}

fn burn_in() -> usize {
    DEFAULT_BURN_IN
}

impl Default for SieveConfig {
    fn default() -> Self {
        Self {
            criterion: Criterion::Bic,
            max_lag: None,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

/// Default largest sieve order for a sample of `t` periods and `n` variables.
pub fn default_max_lag(t: usize, n: usize) -> usize {
    let mut p = (12.0 * (t as f64 / 100.0).powf(0.25)).floor() as usize;
    // keep at least twice as many rows as regressors in the largest model
    while p > 0 && t.saturating_sub(p) < 2 * (1 + n * p) {
        p -= 1;
    }
    p
}

/// Fitted sieve with its centered residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct SieveModel {
    pub model: VarModel,
    /// `(T - p) x n`, column means removed; row `r` is period `model.first_period + r`.
    pub residuals: DMatrix<f64>,
}

impl SieveModel {
    pub fn order(&self) -> usize {
        self.model.p
    }
}

pub fn sieve_fit(panel: &TimeSeriesPanel, cfg: &SieveConfig) -> Result<SieveModel> {
    let t = panel.len();
    let max_lag = cfg.max_lag.unwrap_or_else(|| default_max_lag(t, panel.n_vars()));
    if t <= max_lag + 1 {
        return Err(Error::InsufficientData(format!(
            "{t} observations for a sieve with up to {max_lag} lags"
        )));
    }
    let model = fit_var(
        panel,
        VarOrder::Auto {
            criterion: cfg.criterion,
            max_lag,
        },
    )?;
    let radius = model.spectral_radius();
    if radius >= 1.0 {
        return Err(Error::NonStationary { radius });
    }
    let mut residuals = model.residuals.clone();
    for mut col in residuals.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    Ok(SieveModel { model, residuals })
}

/// IRF implied by the fitted sieve under the wiring's identification, used
/// as the centering target of bootstrap bias estimates.
pub fn sieve_pseudo_truth(
    sieve: &SieveModel,
    panel: &TimeSeriesPanel,
    wiring: &EstimatorWiring,
) -> Result<Vec<f64>> {
    let id = identify(&sieve.model, panel, &wiring.identification, wiring.first_stage_f_floor)?;
    Ok(var_irf(&sieve.model, &id, wiring.horizons, wiring.response).values)
}

/// One pseudo-panel of length `t`.
///
/// Residual rows are drawn i.i.d. with replacement and fed through the
/// sieve recursion from zero initial values; the first `burn_in` periods
/// are discarded. Observed shocks and instrument values travel with their
/// residual row, so identification works on the pseudo-panel exactly as on
/// the original.
pub fn sieve_draw(sieve: &SieveModel, panel: &TimeSeriesPanel, t: usize, burn_in: usize, seed: SeedPath) -> TimeSeriesPanel {
    let n = sieve.model.n();
    let p = sieve.model.p;
    let m = sieve.residuals.nrows();
    let total = burn_in + t;
    let mut rng = seed.rng();
    let picks: Vec<usize> = (0..total).map(|_| rng.random_range(0..m)).collect();
    let ar: Vec<Vec<f64>> = sieve
        .model
        .coefficients
        .iter()
        .map(|a| a.transpose().as_slice().to_vec())
        .collect();
    let mut y = vec![0.0; total * n];
    for s in 0..total {
        for i in 0..n {
            let mut v = sieve.residuals[(picks[s], i)];
            for (j, a) in ar.iter().enumerate().take(p.min(s)) {
                let lag = (s - j - 1) * n;
                for k in 0..n {
                    v += a[i * n + k] * y[lag + k];
                }
            }
            y[s * n + i] = v;
        }
    }
    let data = DMatrix::from_row_slice(t, n, &y[burn_in * n..]);
    let periods: Vec<usize> = picks[burn_in..]
        .iter()
        .map(|r| sieve.model.first_period + r)
        .collect();
    let mut out = panel.with_data(data);
    out.set_shocks_unchecked(
        panel
            .shocks()
            .map(|s| DMatrix::from_fn(t, s.ncols(), |r, c| s[(periods[r], c)])),
    );
    out.set_instrument_unchecked(panel.instrument().map(|z| z.gather(&periods)));
    out
}

/// `b` pseudo-panels with draw `i` seeded by `SeedPath::new(seed).index(i)`.
pub fn sieve_resample(
    sieve: &SieveModel,
    panel: &TimeSeriesPanel,
    t: usize,
    b: usize,
    seed: u64,
    burn_in: usize,
) -> Vec<TimeSeriesPanel> {
    (0..b)
        .map(|i| sieve_draw(sieve, panel, t, burn_in, SeedPath::new(seed).index(i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::DgpSpec;
    use crate::var::VarOrder;
    use crate::wiring::Identification;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    #[test]
    fn residuals_are_centered() {
        let panel = DgpSpec::svar4().simulate(300, 3).unwrap();
        let s = sieve_fit(&panel, &SieveConfig::default()).unwrap();
        for c in s.residuals.column_iter() {
            assert!(c.mean().abs() < 1e-14);
        }
    }

    #[test]
    fn white_noise_selects_zero() {
        let spec = DgpSpec::new(vec![], vec![], DMatrix::identity(1, 1), 0).unwrap();
        let hits = (0..200)
            .filter(|&s| {
                let panel = spec.simulate(5_000, s).unwrap();
                sieve_fit(&panel, &SieveConfig::default()).unwrap().order() == 0
            })
            .count();
        assert!(hits >= 190, "{hits}");
    }

    #[test]
    fn persistent_ar_selects_positive_order() {
        let spec = DgpSpec::arma(0.9, 0.0).unwrap();
        let hits = (0..200)
            .filter(|&s| {
                let panel = spec.simulate(2_000, s).unwrap();
                sieve_fit(&panel, &SieveConfig::default()).unwrap().order() >= 1
            })
            .count();
        assert!(hits >= 198, "{hits}");
    }

    fn manual_sieve(coefs: Vec<DMatrix<f64>>, sigma: DMatrix<f64>, residuals: DMatrix<f64>) -> SieveModel {
        let n = sigma.nrows();
        let p = coefs.len();
        SieveModel {
            model: VarModel {
                p,
                intercept: DVector::zeros(n),
                coefficients: coefs,
                residuals: residuals.clone(),
                sigma,
                first_period: p,
                r_squared: vec![0.0; n],
            },
            residuals,
        }
    }

    #[test]
    fn pseudo_truth_ar1_is_geometric() {
        let sieve = manual_sieve(
            vec![DMatrix::from_element(1, 1, 0.8)],
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_column_slice(4, 1, &[1.0, -1.0, 0.5, -0.5]),
        );
        let panel = TimeSeriesPanel::from_series(&[0.0; 5]).unwrap();
        let wiring = EstimatorWiring::new(Identification::recursive_single(0), 6, VarOrder::Fixed(1));
        let truth = sieve_pseudo_truth(&sieve, &panel, &wiring).unwrap();
        for (h, v) in truth.iter().enumerate() {
            assert_relative_eq!(*v, 0.8_f64.powi(h as i32), epsilon = 1e-14);
        }
    }

    #[test]
    fn pseudo_truth_zero_order() {
        let sieve = manual_sieve(
            vec![],
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_column_slice(2, 1, &[1.0, -1.0]),
        );
        let panel = TimeSeriesPanel::from_series(&[0.0; 2]).unwrap();
        let wiring = EstimatorWiring::new(Identification::recursive_single(0), 3, VarOrder::Fixed(0));
        assert_eq!(sieve_pseudo_truth(&sieve, &panel, &wiring).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn pseudo_truth_var2_matches_companion_powers() {
        let a1 = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.2, 0.3]);
        let a2 = DMatrix::from_row_slice(2, 2, &[-0.2, 0.05, 0.1, 0.1]);
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let sieve = manual_sieve(vec![a1.clone(), a2.clone()], sigma.clone(), DMatrix::zeros(3, 2));
        let panel = TimeSeriesPanel::new(DMatrix::zeros(5, 2), vec!["a".into(), "b".into()]).unwrap();
        let wiring = EstimatorWiring::new(
            Identification::Recursive {
                impulse: 0,
                order: vec![0, 1],
            },
            8,
            VarOrder::Fixed(2),
        )
        .with_response(1);
        let truth = sieve_pseudo_truth(&sieve, &panel, &wiring).unwrap();
        let l = sigma.cholesky().unwrap().l();
        let impact = l.column(0) / l[(0, 0)];
        let comp = crate::linalg::companion(&[a1, a2]);
        let mut power = DMatrix::<f64>::identity(4, 4);
        for v in truth.iter() {
            let resp = power.view((0, 0), (2, 2)) * &impact;
            assert_relative_eq!(*v, resp[1], epsilon = 1e-10);
            power = &comp * power;
        }
    }

    #[test]
    fn draws_are_deterministic() {
        let panel = DgpSpec::arma(0.5, 0.5).unwrap().simulate(200, 1).unwrap();
        let s = sieve_fit(&panel, &SieveConfig::default()).unwrap();
        let a = sieve_resample(&s, &panel, 200, 3, 42, 200);
        let b = sieve_resample(&s, &panel, 200, 3, 42, 200);
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }

    #[test]
    fn zero_order_draws_are_centered_resamples() {
        let spec = DgpSpec::new(vec![], vec![], DMatrix::identity(1, 1), 0).unwrap();
        let panel = spec.simulate(500, 8).unwrap();
        let s = sieve_fit(&panel, &SieveConfig { max_lag: Some(0), ..Default::default() }).unwrap();
        let draws = sieve_resample(&s, &panel, 500, 50, 1, 0);
        let mut total = 0.0;
        for d in &draws {
            for v in d.data().iter() {
                assert!(s.residuals.iter().any(|r| r == v));
                total += v;
            }
        }
        assert!((total / (500.0 * 50.0)).abs() < 0.02);
    }

    #[test]
    fn ar1_draws_match_autocorrelation() {
        let sieve = manual_sieve(
            vec![DMatrix::from_element(1, 1, 0.5)],
            DMatrix::from_element(1, 1, 1.0),
            {
                let spec = DgpSpec::new(vec![], vec![], DMatrix::identity(1, 1), 0).unwrap();
                let e = spec.simulate(2_000, 4).unwrap();
                let mut r = e.data().clone();
                let mean = r.mean();
                r.add_scalar_mut(-mean);
                r
            },
        );
        let panel = TimeSeriesPanel::from_series(&vec![0.0; 2_001]).unwrap();
        let mut acf = 0.0;
        let b = 500;
        for d in sieve_resample(&sieve, &panel, 2_000, b, 11, 200) {
            let y = d.data().column(0);
            let mean = y.mean();
            let c0: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            let c1: f64 = (1..y.len()).map(|t| (y[t] - mean) * (y[t - 1] - mean)).sum();
            acf += c1 / c0;
        }
        assert!((acf / b as f64 - 0.5).abs() < 0.03);
    }

    #[test]
    fn shocks_follow_their_residual_rows() {
        let panel = DgpSpec::arma(0.5, 0.0).unwrap().simulate(300, 2).unwrap();
        let s = sieve_fit(&panel, &SieveConfig { max_lag: Some(0), ..Default::default() }).unwrap();
        let d = sieve_draw(&s, &panel, 300, 0, SeedPath::new(5));
        let mean = panel.data().column(0).mean();
        let shock = panel.shock(0).unwrap();
        for t in 0..300 {
            let y = d.value(t, 0);
            let src = (0..300).find(|&r| (panel.value(r, 0) - mean - y).abs() < 1e-15).unwrap();
            assert_eq!(d.shock(0).unwrap()[t], shock[src]);
        }
    }
}
