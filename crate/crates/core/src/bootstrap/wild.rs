//! Wild Rademacher bootstrap bands and the nested double bootstrap.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::risk::DrawFailure;
use super::sieve::{sieve_fit, SieveConfig, SieveModel};
use super::{check_failures, plugin_weight, plugin_weight_from, run_indexed, BootstrapConfig, PluginResult};
use crate::averaging::{
    calibrate_flexible, combine, flexible_weight, model_avg_weight, WeightGrids, WeightSchedule,
};
use crate::error::{Error, Result};
use crate::irf::IrfEstimate;
use crate::panel::{csv_err, format_num, TimeSeriesPanel};
use crate::rng::{rademacher, SeedPath};
use crate::wiring::{estimate_pair_quiet, EstimatorWiring, PairEstimate};

/// Point estimates of every estimator together with the weights behind the
/// averaged ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedFit {
    /// Wiring with lag orders frozen at their original-sample values.
    pub wiring: EstimatorWiring,
    pub plugin: PluginResult,
    /// Calibrated `(a, b)` of the flexible weight.
    pub flexible_params: (f64, f64),
    pub flexible: WeightSchedule,
    pub model_avg: WeightSchedule,
    /// `lp, var, avg_plugin, avg_flexible, avg_model_avg`.
    pub estimates: Vec<IrfEstimate>,
    pub grids: WeightGrids,
}

impl AveragedFit {
    pub fn estimate(&self, method: &str) -> Option<&IrfEstimate> {
        self.estimates.iter().find(|e| e.method == method)
    }
}

pub fn fit_averaged(
    panel: &TimeSeriesPanel,
    wiring: &EstimatorWiring,
    boot: &BootstrapConfig,
    grids: &WeightGrids,
) -> Result<AveragedFit> {
    let plugin = plugin_weight(panel, wiring, boot)?;
    let frozen = plugin.point.frozen(wiring);
    assemble(plugin, frozen, grids)
}

fn assemble(plugin: PluginResult, wiring: EstimatorWiring, grids: &WeightGrids) -> Result<AveragedFit> {
    let (a, b) = calibrate_flexible(&plugin.draws, &grids.a, &grids.b);
    let pair = &plugin.point;
    let flexible = flexible_weight(&pair.lp, &pair.var, a, b)?;
    let model_avg = model_avg_weight(&pair.r2_lp, pair.r2_var);
    let estimates = vec![
        pair.lp.clone(),
        pair.var.clone(),
        combine(&pair.lp, &pair.var, &plugin.schedule)?,
        combine(&pair.lp, &pair.var, &flexible)?,
        combine(&pair.lp, &pair.var, &model_avg)?,
    ];
    Ok(AveragedFit {
        wiring,
        plugin,
        flexible_params: (a, b),
        flexible,
        model_avg,
        estimates,
        grids: grids.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandConfig {
    /// Outer draws.
    pub draws: usize,
    /// Nominal coverage in `[0, 1]`.
    pub coverage: f64,
    pub seed: u64,
    #[serde(default)]
    pub sieve: SieveConfig,
    #[serde(default = "super::max_failure_rate")]
    pub max_failure_rate: f64,
}

/// How averaging weights are formed inside each outer draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InnerWeights {
    /// Keep the original-sample plug-in weights and flexible `(a, b)`.
    Reuse,
    /// Rerun the sieve plug-in bootstrap on the outer pseudo-panel.
    Recompute(BootstrapConfig),
}

/// Centered band `estimate_h +/- half_width_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub method: String,
    pub estimate: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl Band {
    pub fn lower(&self) -> Vec<f64> {
        self.estimate.iter().zip(&self.half_width).map(|(e, d)| e - d).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.estimate.iter().zip(&self.half_width).map(|(e, d)| e + d).collect()
    }

    pub fn contains(&self, h: usize, value: f64) -> bool {
        (value - self.estimate[h]).abs() <= self.half_width[h]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSet {
    pub coverage: f64,
    pub bands: Vec<Band>,
    pub draws_used: usize,
    pub failed: Vec<DrawFailure>,
}

impl BandSet {
    pub fn band(&self, method: &str) -> Option<&Band> {
        self.bands.iter().find(|b| b.method == method)
    }

    /// CSV `method,horizon,estimate,lower,upper`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["method", "horizon", "estimate", "lower", "upper"])
            .map_err(csv_err)?;
        for band in &self.bands {
            let (lo, hi) = (band.lower(), band.upper());
            for h in 0..band.estimate.len() {
                w.write_record([
                    band.method.clone(),
                    h.to_string(),
                    format_num(band.estimate[h]),
                    format_num(lo[h]),
                    format_num(hi[h]),
                ])
                .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Pseudo-panel `y*_t = c + sum_j A_j y*_{t-j} + eta_t u_t` started from the
/// observed initial values. The same multiplier scales the observed shocks
/// and the instrument at period `t`; missing instrument entries stay missing.
pub fn wild_draw(sieve: &SieveModel, panel: &TimeSeriesPanel, eta: &[f64]) -> TimeSeriesPanel {
    let model = &sieve.model;
    let n = model.n();
    let p = model.p;
    let t_len = panel.len();
    let mut y = DMatrix::zeros(t_len, n);
    for t in 0..p.min(t_len) {
        for i in 0..n {
            y[(t, i)] = panel.value(t, i);
        }
    }
    for t in p..t_len {
        for i in 0..n {
            let mut v = model.intercept[i] + eta[t] * model.residuals[(t - model.first_period, i)];
            for (j, a) in model.coefficients.iter().enumerate() {
                for k in 0..n {
                    v += a[(i, k)] * y[(t - j - 1, k)];
                }
            }
            y[(t, i)] = v;
        }
    }
    let mut out = panel.with_data(y);
    out.set_shocks_unchecked(panel.shocks().map(|s| {
        DMatrix::from_fn(t_len, s.ncols(), |r, c| eta[r] * s[(r, c)])
    }));
    out.set_instrument_unchecked(panel.instrument().map(|z| z.scaled_by(eta)));
    out
}

fn rademacher_path(seed: SeedPath, t: usize) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..t).map(|_| rademacher(&mut rng)).collect()
}

/// Empirical `coverage` quantile of the (sorted, nonnegative) deviations
/// using the order statistic `ceil(coverage B) - 1`.
fn quantile(sorted: &[f64], coverage: f64) -> f64 {
    if coverage <= 0.0 || sorted.is_empty() {
        return 0.0;
    }
    let k = ((coverage * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

/// Wild-bootstrap bands around every estimator of `fit`, with the
/// averaging weights held at their original-sample values.
pub fn wild_band(panel: &TimeSeriesPanel, fit: &AveragedFit, cfg: &BandConfig) -> Result<BandSet> {
    if cfg.draws < 50 {
        return Err(Error::InvalidSpec("wild bands need at least 50 draws".into()));
    }
    band_engine(panel, fit, cfg, &InnerWeights::Reuse)
}

/// Double bootstrap: each outer wild draw reruns the plug-in weight
/// bootstrap before forming the averaged estimates. Bands are centered at
/// the original-sample point estimates. With [`InnerWeights::Reuse`] this
/// is exactly [`wild_band`].
pub fn nested_band(
    panel: &TimeSeriesPanel,
    fit: &AveragedFit,
    cfg: &BandConfig,
    inner: &InnerWeights,
) -> Result<BandSet> {
    if cfg.draws < 10 {
        return Err(Error::InvalidSpec("nested bands need at least 10 outer draws".into()));
    }
    if let InnerWeights::Recompute(b) = inner {
        if b.draws < 10 {
            return Err(Error::InvalidSpec("nested bands need at least 10 inner draws".into()));
        }
    }
    band_engine(panel, fit, cfg, inner)
}

fn band_engine(panel: &TimeSeriesPanel, fit: &AveragedFit, cfg: &BandConfig, inner: &InnerWeights) -> Result<BandSet> {
    if !(0.0..=1.0).contains(&cfg.coverage) {
        return Err(Error::InvalidSpec(format!("coverage {} outside [0, 1]", cfg.coverage)));
    }
    let sieve = sieve_fit(panel, &cfg.sieve)?;
    let t = panel.len();
    let outer = SeedPath::new(cfg.seed).label("outer");
    let inner_root = SeedPath::new(cfg.seed).label("inner");
    let results = run_indexed(cfg.draws, |b| {
        let eta = rademacher_path(outer.index(b as u64), t);
        let pseudo = wild_draw(&sieve, panel, &eta);
        let pair = estimate_pair_quiet(&pseudo, &fit.wiring)?;
        redo_estimates(&pseudo, fit, pair, inner, inner_root.index(b as u64).seed())
    });

    let mut kept: Vec<Vec<IrfEstimate>> = Vec::with_capacity(cfg.draws);
    let mut failed = Vec::new();
    for (b, r) in results.into_iter().enumerate() {
        match r {
            Ok(est) => kept.push(est),
            Err(e) => failed.push(DrawFailure {
                index: b,
                seed: outer.index(b as u64).seed(),
                message: e.to_string(),
            }),
        }
    }
    check_failures(failed.len(), cfg.draws, cfg.max_failure_rate)?;
    if kept.is_empty() {
        return Err(Error::InsufficientData("no successful bootstrap draws".into()));
    }
    let bands = fit
        .estimates
        .iter()
        .enumerate()
        .map(|(m, point)| {
            let half_width = (0..point.values.len())
                .map(|h| {
                    let mut dev: Vec<f64> = kept
                        .iter()
                        .map(|d| (d[m].values[h] - point.values[h]).abs())
                        .collect();
                    dev.sort_by(f64::total_cmp);
                    quantile(&dev, cfg.coverage)
                })
                .collect();
            Band {
                method: point.method.clone(),
                estimate: point.values.clone(),
                half_width,
            }
        })
        .collect();
    Ok(BandSet {
        coverage: cfg.coverage,
        bands,
        draws_used: kept.len(),
        failed,
    })
}

fn redo_estimates(
    pseudo: &TimeSeriesPanel,
    fit: &AveragedFit,
    pair: PairEstimate,
    inner: &InnerWeights,
    inner_seed: u64,
) -> Result<Vec<IrfEstimate>> {
    let plugin = match inner {
        InnerWeights::Reuse => {
            let (a, b) = fit.flexible_params;
            let flexible = flexible_weight(&pair.lp, &pair.var, a, b)?;
            let model_avg = model_avg_weight(&pair.r2_lp, pair.r2_var);
            let avg = vec![
                combine(&pair.lp, &pair.var, &fit.plugin.schedule)?,
                combine(&pair.lp, &pair.var, &flexible)?,
                combine(&pair.lp, &pair.var, &model_avg)?,
            ];
            let mut out = vec![pair.lp, pair.var];
            out.extend(avg);
            return Ok(out);
        }
        InnerWeights::Recompute(cfg) => {
            let cfg = BootstrapConfig {
                seed: inner_seed,
                ..*cfg
            };
            plugin_weight_from(pseudo, &fit.wiring, pair, &cfg)?
        }
    };
    Ok(assemble(plugin, fit.wiring.clone(), &fit.grids)?.estimates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::DgpSpec;
    use crate::var::VarOrder;
    use crate::wiring::Identification;

    fn setup(seed: u64) -> (TimeSeriesPanel, AveragedFit) {
        let panel = DgpSpec::arma(0.5, 0.0).unwrap().simulate(240, seed).unwrap();
        let wiring = EstimatorWiring::new(Identification::recursive_single(0), 4, VarOrder::Fixed(1));
        let fit = fit_averaged(&panel, &wiring, &BootstrapConfig::new(50, seed), &WeightGrids::default()).unwrap();
        (panel, fit)
    }

    fn cfg(draws: usize, coverage: f64) -> BandConfig {
        BandConfig {
            draws,
            coverage,
            seed: 77,
            sieve: SieveConfig::default(),
            max_failure_rate: 0.05,
        }
    }

    #[test]
    fn quantile_rule() {
        let v = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(quantile(&v, 0.0), 0.0);
        assert_eq!(quantile(&v, 0.5), 0.2);
        assert_eq!(quantile(&v, 0.51), 0.3);
        assert_eq!(quantile(&v, 1.0), 0.4);
    }

    #[test]
    fn zero_coverage_has_zero_width() {
        let (panel, fit) = setup(1);
        let set = wild_band(&panel, &fit, &cfg(50, 0.0)).unwrap();
        for b in &set.bands {
            assert!(b.half_width.iter().all(|d| *d == 0.0));
        }
    }

    #[test]
    fn width_increases_with_coverage() {
        let (panel, fit) = setup(2);
        let narrow = wild_band(&panel, &fit, &cfg(60, 0.68)).unwrap();
        let wide = wild_band(&panel, &fit, &cfg(60, 0.9)).unwrap();
        for (a, b) in narrow.bands.iter().zip(&wide.bands) {
            for (x, y) in a.half_width.iter().zip(&b.half_width) {
                assert!(x <= y);
            }
        }
    }

    #[test]
    fn reuse_mode_reduces_to_wild_band() {
        let (panel, fit) = setup(3);
        let c = cfg(50, 0.68);
        assert_eq!(
            wild_band(&panel, &fit, &c).unwrap(),
            nested_band(&panel, &fit, &c, &InnerWeights::Reuse).unwrap()
        );
    }

    #[test]
    fn wild_draw_shares_multipliers() {
        let panel = DgpSpec::arma(0.5, 0.0).unwrap().simulate(100, 5).unwrap();
        let z: Vec<Option<f64>> = (0..100).map(|t| if t % 7 == 0 { None } else { Some(t as f64) }).collect();
        let panel = panel
            .with_instrument(crate::panel::Instrument::from_options(&z))
            .unwrap();
        let sieve = sieve_fit(&panel, &SieveConfig::default()).unwrap();
        let eta = rademacher_path(SeedPath::new(1), 100);
        let d = wild_draw(&sieve, &panel, &eta);
        let shock = panel.shock(0).unwrap();
        for t in 0..100 {
            assert_eq!(d.shock(0).unwrap()[t], eta[t] * shock[t]);
            match z[t] {
                None => assert!(!d.instrument().unwrap().is_observed(t)),
                Some(v) => assert_eq!(d.instrument().unwrap().get(t), Some(eta[t] * v)),
            }
        }
        // all-ones multipliers reproduce the data
        let same = wild_draw(&sieve, &panel, &vec![1.0; 100]);
        for t in 0..100 {
            assert!((same.value(t, 0) - panel.value(t, 0)).abs() < 1e-10);
        }
    }

    #[test]
    fn nested_bands_contain_point_estimates() {
        let (panel, fit) = setup(4);
        let set = nested_band(&panel, &fit, &cfg(10, 0.68), &InnerWeights::Recompute(BootstrapConfig::new(10, 0))).unwrap();
        for b in &set.bands {
            for h in 0..b.estimate.len() {
                assert!(b.contains(h, b.estimate[h]));
            }
        }
    }
}
