use irfavg_core::averaging::{combine, combined_mse, oracle_weight, oracle_weight_k, RiskComponents, WeightMethod};
use irfavg_core::bootstrap::{bootstrap_risk, estimate_omega, plugin_variance, BootstrapDraws};
use irfavg_core::{IrfEstimate, WeightSchedule};
use nalgebra::{DMatrix, DVector, Matrix2};
use proptest::prelude::*;

fn risk() -> impl Strategy<Value = RiskComponents> {
    (0.001..4.0f64, 0.001..4.0f64, -0.99..0.99f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(s_l, s_v, rho, b_l, b_v)| {
        RiskComponents {
            v_lp: s_l * s_l,
            v_var: s_v * s_v,
            cov: rho * s_l * s_v,
            bias_lp: b_l,
            bias_var: b_v,
        }
    })
}

fn psd(k: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, k * (k + 2)).prop_map(move |v| {
        let x = DMatrix::from_column_slice(k + 2, k, &v);
        x.transpose() * x + DMatrix::identity(k, k) * 1e-3
    })
}

fn draws() -> impl Strategy<Value = BootstrapDraws> {
    (2usize..40).prop_flat_map(|b| {
        (prop::collection::vec(-3.0..3.0f64, b), prop::collection::vec(-3.0..3.0f64, b), -1.0..1.0f64).prop_map(
            |(lp, var, truth)| BootstrapDraws {
                seeds: vec![0; lp.len()],
                lp: lp.into_iter().map(|v| vec![v]).collect(),
                var: var.into_iter().map(|v| vec![v]).collect(),
                pseudo_truth: vec![truth],
                failed: vec![],
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn oracle_beats_grid(r in risk()) {
        let (w, flagged) = oracle_weight(&r, 1e-12);
        prop_assume!(!flagged);
        let best = combined_mse(w, &r);
        for i in 0..=1000 {
            let g = i as f64 / 1000.0;
            prop_assert!(best <= combined_mse(g, &r) + 1e-10);
        }
    }

    #[test]
    fn oracle_no_worse_than_endpoints(r in risk()) {
        let (w, _) = oracle_weight(&r, 1e-12);
        prop_assert!(combined_mse(w, &r) <= r.a().min(r.d()) + 1e-12);
    }

    #[test]
    fn two_estimator_case_matches_closed_form(r in risk()) {
        let (a, d, f) = (r.a(), r.d(), r.f());
        let denom = a + d - 2.0 * f;
        prop_assume!(denom > 1e-6);
        let g = DMatrix::from_row_slice(2, 2, &[a, f, f, d]);
        let (wk, flagged) = oracle_weight_k(&g);
        prop_assert!(!flagged);
        let unclipped = (d - f) / denom;
        prop_assert!((wk[0] - unclipped).abs() <= 1e-10 * unclipped.abs().max(1.0));
        prop_assert!((wk[0] + wk[1] - 1.0).abs() <= 1e-12);
        if (0.0..=1.0).contains(&unclipped) {
            prop_assert!((oracle_weight(&r, 1e-12).0 - unclipped).abs() <= 1e-10);
        }
    }

    #[test]
    fn k_weights_beat_simplex_grid(g in psd(4)) {
        let (w, flagged) = oracle_weight_k(&g);
        prop_assume!(!flagged);
        let q = |v: &DVector<f64>| (v.transpose() * &g * v)[(0, 0)];
        let best = q(&w);
        let steps = 50;
        for i in 0..=steps {
            for j in 0..=steps - i {
                for k in 0..=steps - i - j {
                    let l = steps - i - j - k;
                    let v = DVector::from_vec(vec![i as f64, j as f64, k as f64, l as f64]) / steps as f64;
                    prop_assert!(best <= q(&v) + 1e-10);
                }
            }
        }
    }

    #[test]
    fn combine_is_affine(
        lp in prop::collection::vec(-5.0..5.0f64, 1..12),
        shift in -3.0..3.0f64,
        c in -4.0..4.0f64,
        seed in 0u64..1000,
    ) {
        let h = lp.len();
        let var: Vec<f64> = lp.iter().map(|v| v + shift).collect();
        let weights: Vec<f64> = (0..h).map(|i| ((seed + i as u64) % 11) as f64 / 10.0).collect();
        let schedule = WeightSchedule { method: WeightMethod::Plugin, weights, safeguard: vec![false; h] };
        let base = combine(&IrfEstimate::new("lp", lp.clone()), &IrfEstimate::new("var", var.clone()), &schedule).unwrap();
        let scaled = combine(
            &IrfEstimate::new("lp", lp.iter().map(|v| c * v).collect()),
            &IrfEstimate::new("var", var.iter().map(|v| c * v).collect()),
            &schedule,
        )
        .unwrap();
        for (s, b) in scaled.values.iter().zip(&base.values) {
            prop_assert!((s - c * b).abs() <= 1e-12 * (1.0 + b.abs() * c.abs()));
        }
        for (i, v) in base.values.iter().enumerate() {
            let (lo, hi) = (lp[i].min(var[i]), lp[i].max(var[i]));
            prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
    }

    #[test]
    fn bootstrap_covariance_is_psd(d in draws()) {
        let r = bootstrap_risk(&d).unwrap()[0];
        prop_assert!(r.v_lp >= 0.0 && r.v_var >= 0.0);
        prop_assert!(r.cov * r.cov <= r.v_lp * r.v_var * (1.0 + 1e-9) + 1e-15);
    }

    #[test]
    fn variance_minimizer_beats_endpoints(d in draws(), t in 10usize..1000) {
        let o = estimate_omega(&d, t).unwrap().matrices[0];
        let denom = o[(0, 0)] + o[(1, 1)] - 2.0 * o[(0, 1)];
        prop_assume!(denom > 1e-9);
        let w = (o[(1, 1)] - o[(0, 1)]) / denom;
        let v = plugin_variance(w, &o).unwrap();
        prop_assert!(v <= o[(0, 0)].min(o[(1, 1)]) + 1e-10 * (1.0 + o[(0, 0)].max(o[(1, 1)])));
    }

    #[test]
    fn variance_endpoints_are_exact(a in 0.0..5.0f64, b in 0.0..5.0f64, rho in -1.0..1.0f64) {
        let c = rho * (a * b).sqrt();
        let o = Matrix2::new(a, c, c, b);
        prop_assert_eq!(plugin_variance(1.0, &o).unwrap(), a);
        prop_assert_eq!(plugin_variance(0.0, &o).unwrap(), b);
    }
}
