//! Simulation checks of estimator and bootstrap behavior against known
//! population values.

use irfavg_core::lp::{lp_irf, LpConfig};
use irfavg_core::{
    fit_var, plugin_weight, BootstrapConfig, DgpSpec, EstimatorWiring, Identification, VarOrder,
};
use nalgebra::DMatrix;

fn arma_designs() -> Vec<(f64, f64)> {
    vec![(0.5, 0.5), (0.5, 0.9), (0.9, 0.5), (0.9, 0.9)]
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

#[test]
fn arma_response_closed_form_on_grid() {
    let grid: Vec<f64> = (0..=10).map(|i| -0.95 + 0.19 * i as f64).collect();
    for &rho in &grid {
        for &alpha in &grid {
            let Ok(spec) = DgpSpec::arma(rho, alpha) else { continue };
            let irf = spec.true_irf(12).scalar();
            assert_eq!(irf[0], 1.0);
            for (h, value) in irf.iter().enumerate().skip(1) {
                let expected = rho.powi(h as i32) + alpha * rho.powi(h as i32 - 1);
                assert!((value - expected).abs() <= 1e-12, "rho {rho} alpha {alpha} h {h}");
            }
        }
    }
}

#[test]
fn long_sample_means_are_near_zero() {
    let t = 100_000;
    // Long-run standard deviation of the sample mean from the sum of the
    // MA weights.
    for (i, spec) in [DgpSpec::arma(0.9, 0.5).unwrap(), DgpSpec::svar4(), DgpSpec::svarma41()]
        .iter()
        .enumerate()
    {
        let panel = spec.simulate(t, 500 + i as u64).unwrap();
        let n = spec.n();
        let mut sum_ar = DMatrix::<f64>::identity(n, n);
        for a in spec.ar() {
            sum_ar -= a;
        }
        let mut sum_ma = spec.impact().clone();
        for m in spec.ma() {
            sum_ma += m * spec.impact();
        }
        let psi = sum_ar.try_inverse().unwrap() * sum_ma;
        let lrv = &psi * psi.transpose();
        for j in 0..n {
            let mean = panel.data().column(j).mean();
            let se = (lrv[(j, j)] / t as f64).sqrt();
            assert!(mean.abs() < 5.0 * se, "variable {j}: mean {mean}, se {se}");
        }
    }
}

fn lp_paths(spec: &DgpSpec, cfg: &LpConfig, reps: u64) -> Vec<Vec<f64>> {
    (0..reps)
        .map(|r| {
            let panel = spec.simulate(240, 10_000 + r).unwrap();
            lp_irf(&panel, cfg).unwrap().irf.values
        })
        .collect()
}

fn observed_shock_lp(lags: usize, include_constant: bool) -> LpConfig {
    LpConfig {
        horizons: 5,
        lags,
        response: 0,
        identification: Identification::ObservedShock { shock: 0 },
        include_constant,
        weak_f_floor: 10.0,
    }
}

#[test]
fn lp_with_observed_shock_is_unbiased() {
    // Without intercept or lag controls the estimator is exactly unbiased
    // (flip the sign of the shock at t).
    let cfg = observed_shock_lp(0, false);
    for (rho, alpha) in arma_designs() {
        let spec = DgpSpec::arma(rho, alpha).unwrap();
        let truth = spec.true_irf(5).scalar();
        let paths = lp_paths(&spec, &cfg, 1000);
        for h in 0..=5 {
            let xs: Vec<f64> = paths.iter().map(|p| p[h]).collect();
            let (m, se) = mean_and_se(&xs);
            assert!((m - truth[h]).abs() <= 3.0 * se, "({rho}, {alpha}) h {h}: mean {m}, truth {}, se {se}", truth[h]);
        }
    }
}

#[test]
fn lp_with_controls_has_small_bias() {
    // Intercept and lag controls add an O(1/T) bias.
    let cfg = observed_shock_lp(4, true);
    for (rho, alpha) in arma_designs() {
        let spec = DgpSpec::arma(rho, alpha).unwrap();
        let truth = spec.true_irf(5).scalar();
        let paths = lp_paths(&spec, &cfg, 1000);
        for h in 0..=5 {
            let xs: Vec<f64> = paths.iter().map(|p| p[h]).collect();
            let (m, _) = mean_and_se(&xs);
            assert!((m - truth[h]).abs() <= 0.02 + 0.05 * truth[h].abs(), "({rho}, {alpha}) h {h}: mean {m}, truth {}", truth[h]);
        }
    }
}

#[test]
fn ar1_fit_to_arma_is_biased_down_at_horizon_one() {
    for (rho, alpha) in arma_designs() {
        let spec = DgpSpec::arma(rho, alpha).unwrap();
        let truth = spec.true_irf(1).scalar()[1];
        let est: Vec<f64> = (0..1000)
            .map(|r| {
                let panel = spec.simulate(240, 20_000 + r).unwrap();
                fit_var(&panel, VarOrder::Fixed(1)).unwrap().coefficients[0][(0, 0)]
            })
            .collect();
        let (m, _) = mean_and_se(&est);
        assert!(m < truth, "({rho}, {alpha}): mean {m} vs truth {truth}");
    }
}

#[test]
fn scaled_bootstrap_risk_is_stable_in_sample_size() {
    let spec = DgpSpec::arma(0.5, 0.5).unwrap();
    let wiring = EstimatorWiring::new(Identification::recursive_single(0), 3, VarOrder::Fixed(1));
    let avg_scaled = |t: usize| -> [f64; 3] {
        let mut acc = [0.0; 3];
        let reps = 100;
        for r in 0..reps {
            let panel = spec.simulate(t, 30_000 + r).unwrap();
            let fit = plugin_weight(&panel, &wiring, &BootstrapConfig::new(100, 40_000 + r)).unwrap();
            let risk = fit.risk[1];
            acc[0] += t as f64 * risk.v_lp;
            acc[1] += t as f64 * risk.v_var;
            acc[2] += t as f64 * risk.cov;
        }
        acc.map(|v| v / reps as f64)
    };
    let (a, b) = (avg_scaled(400), avg_scaled(800));
    for k in 0..3 {
        assert!((b[k] - a[k]).abs() <= 0.5 * a[k].abs(), "component {k}: {} vs {}", a[k], b[k]);
    }
}

#[test]
fn failure_ceiling_is_irrelevant_without_failures() {
    let panel = DgpSpec::arma(0.5, 0.5).unwrap().simulate(240, 77).unwrap();
    let wiring = EstimatorWiring::new(Identification::recursive_single(0), 6, VarOrder::Fixed(1));
    let strict = BootstrapConfig {
        max_failure_rate: 0.0,
        ..BootstrapConfig::new(80, 5)
    };
    let loose = BootstrapConfig {
        max_failure_rate: 0.5,
        ..strict
    };
    let a = plugin_weight(&panel, &wiring, &strict).unwrap();
    let b = plugin_weight(&panel, &wiring, &loose).unwrap();
    assert!(a.draws.failed.is_empty());
    assert_eq!(a, b);
}
