//! Monte Carlo experiments: simulate from a known process, estimate every
//! requested estimator per replication, and tabulate RMSE against the true
//! impulse response.

mod tables;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::averaging::{
    calibrate_flexible, combine, direct_weight, flexible_weight, model_avg_weight, oracle_weight, RiskComponents,
    WeightGrids, WeightSchedule, DEFAULT_GUARD,
};
use crate::bootstrap::{plugin_weight_from, run_indexed, check_failures, BootstrapConfig, SieveConfig};
use crate::dgp::{builtin, DgpSpec};
use crate::error::{Error, Result};
use crate::regression::Criterion;
use crate::rng::SeedPath;
use crate::var::VarOrder;
use crate::wiring::{estimate_pair, EstimatorWiring, Identification, LpLags};

pub use tables::{emit_figure_data, parse_table_csv, FigureBundle, FigureSeries, RmseTable, TableRow};

/// Estimators a Monte Carlo experiment can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Lp,
    Var,
    Oracle,
    Plugin,
    Flexible,
    Direct,
    ModelAvg,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::Lp,
        EstimatorKind::Var,
        EstimatorKind::Oracle,
        EstimatorKind::Plugin,
        EstimatorKind::Flexible,
        EstimatorKind::Direct,
        EstimatorKind::ModelAvg,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Lp => "lp",
            EstimatorKind::Var => "var",
            EstimatorKind::Oracle => "oracle",
            EstimatorKind::Plugin => "plugin",
            EstimatorKind::Flexible => "flexible",
            EstimatorKind::Direct => "direct",
            EstimatorKind::ModelAvg => "model_avg",
        }
    }

    /// Estimators whose weights are compared with the oracle weights.
    fn has_weight(&self) -> bool {
        matches!(
            self,
            EstimatorKind::Plugin | EstimatorKind::Flexible | EstimatorKind::Direct | EstimatorKind::ModelAvg
        )
    }

    fn needs_bootstrap(&self) -> bool {
        matches!(self, EstimatorKind::Plugin | EstimatorKind::Flexible | EstimatorKind::Direct)
    }
}

/// Estimator wiring for an experiment; unset fields take design defaults
/// (univariate: recursive impulse, AR(1) VAR; multivariate: first observed
/// shock, AIC-selected VAR order up to 8). LP lags follow the VAR order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WiringSpec {
    #[serde(default)]
    pub response: usize,
    #[serde(default)]
    pub identification: Option<Identification>,
    #[serde(default)]
    pub var_order: Option<VarOrder>,
    #[serde(default)]
    pub lp_lags: Option<LpLags>,
    #[serde(default)]
    pub include_constant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Built-in process name; ignored when `dgp_spec` is given.
    #[serde(default)]
    pub dgp: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub dgp_spec: Option<DgpSpec>,
    pub sample_size: usize,
    pub horizons: usize,
    pub replications: usize,
    pub bootstrap: usize,
    pub master_seed: u64,
    #[serde(default = "all_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "oracle_replications")]
    pub oracle_replications: usize,
    #[serde(default)]
    pub wiring: WiringSpec,
    #[serde(default)]
    pub sieve: SieveConfig,
    #[serde(default)]
    pub grids: WeightGrids,
    #[serde(default = "guard")]
    pub guard: f64,
    /// Largest tolerated share of failed replications.
    #[serde(default = "max_failure_rate")]
    pub max_failure_rate: f64,
}

fn all_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::ALL.to_vec()
}

fn oracle_replications() -> usize {
    2_000
}

fn guard() -> f64 {
    DEFAULT_GUARD
}

fn max_failure_rate() -> f64 {
    0.01
}

impl ExperimentSpec {
    /// Spec with default estimators and wiring.
    pub fn new(name: &str, dgp: &str, params: &[f64], sample_size: usize, horizons: usize) -> Self {
        Self {
            name: name.into(),
            dgp: dgp.into(),
            params: params.to_vec(),
            dgp_spec: None,
            sample_size,
            horizons,
            replications: 200,
            bootstrap: 200,
            master_seed: 1,
            estimators: all_estimators(),
            oracle_replications: oracle_replications(),
            wiring: WiringSpec::default(),
            sieve: SieveConfig::default(),
            grids: WeightGrids::default(),
            guard: DEFAULT_GUARD,
            max_failure_rate: max_failure_rate(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn resolve_dgp(&self) -> Result<DgpSpec> {
        match &self.dgp_spec {
            Some(spec) => Ok(spec.clone()),
            None => builtin(&self.dgp, &self.params),
        }
    }

    pub fn resolve_wiring(&self, n: usize) -> EstimatorWiring {
        let w = &self.wiring;
        let identification = w.identification.clone().unwrap_or(if n == 1 {
            Identification::recursive_single(0)
        } else {
            Identification::ObservedShock { shock: 0 }
        });
        let var_order = w.var_order.unwrap_or(if n == 1 {
            VarOrder::Fixed(1)
        } else {
            VarOrder::Auto {
                criterion: Criterion::Aic,
                max_lag: 8,
            }
        });
        let mut wiring = EstimatorWiring::new(identification, self.horizons, var_order)
            .with_response(w.response)
            .with_lp_lags(w.lp_lags.unwrap_or(LpLags::MatchVar));
        if let Some(c) = w.include_constant {
            wiring.include_constant = c;
        }
        wiring
    }

    fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidSpec("replications must be at least 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidSpec("estimator list is empty".into()));
        }
        if self.estimators.iter().any(EstimatorKind::needs_bootstrap) && self.bootstrap < 2 {
            return Err(Error::InvalidSpec("bootstrap draws must be at least 2".into()));
        }
        Ok(())
    }

    fn bootstrap_config(&self, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            draws: self.bootstrap,
            seed,
            sieve: self.sieve,
            guard: self.guard,
            max_failure_rate: crate::bootstrap::DEFAULT_MAX_FAILURE_RATE,
        }
    }

    fn needs(&self, kind: EstimatorKind) -> bool {
        self.estimators.contains(&kind)
    }
}

/// Population response targeted by the wiring.
pub fn true_target(dgp: &DgpSpec, wiring: &EstimatorWiring) -> Result<Vec<f64>> {
    let irf = dgp.true_irf(wiring.horizons);
    if wiring.response >= dgp.n() {
        return Err(Error::InvalidSpec(format!("response {} out of range", wiring.response)));
    }
    match &wiring.identification {
        Identification::ObservedShock { shock } => {
            if *shock >= dgp.n() {
                return Err(Error::InvalidSpec(format!("shock {shock} out of range")));
            }
            Ok(irf.response(wiring.response, *shock))
        }
        Identification::Recursive { impulse, order } => {
            // reduced-form impulse vector of the recursive scheme, mapped
            // back to structural shocks
            let b = dgp.impact();
            let n = dgp.n();
            let sigma = b * b.transpose();
            let permuted = DMatrix::from_fn(order.len(), order.len(), |i, j| sigma[(order[i], order[j])]);
            if order.len() != n {
                return Err(Error::InvalidSpec("recursive order must list every variable".into()));
            }
            let l = permuted
                .cholesky()
                .ok_or_else(|| Error::DegenerateCovariance("population covariance".into()))?
                .l();
            let pos = order.iter().position(|v| v == impulse).expect("validated order");
            let mut c = nalgebra::DVector::zeros(n);
            for i in 0..n {
                c[order[i]] = l[(i, pos)] / l[(pos, pos)];
            }
            let e = b
                .clone()
                .lu()
                .solve(&c)
                .ok_or_else(|| Error::DegenerateCovariance("impact matrix".into()))?;
            Ok(irf.values.iter().map(|th| (th * &e)[wiring.response]).collect())
        }
        Identification::Proxy { .. } => Err(Error::InvalidSpec(
            "simulated processes carry no instrument; use observed-shock or recursive identification".into(),
        )),
    }
}

/// Oracle weights from true-DGP simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReference {
    pub weights: Vec<f64>,
    pub safeguard: Vec<bool>,
    pub risk: Vec<RiskComponents>,
    pub failed: usize,
}

impl OracleReference {
    pub fn schedule(&self) -> WeightSchedule {
        WeightSchedule {
            method: crate::averaging::WeightMethod::Oracle,
            weights: self.weights.clone(),
            safeguard: self.safeguard.clone(),
        }
    }
}

/// Risk of LP and VAR against the true response, estimated from
/// `replications` fresh samples of the true process, and the resulting
/// MSE-minimizing weights.
pub fn oracle_reference(spec: &ExperimentSpec, replications: usize) -> Result<OracleReference> {
    let dgp = spec.resolve_dgp()?;
    let wiring = spec.resolve_wiring(dgp.n());
    let truth = true_target(&dgp, &wiring)?;
    let root = SeedPath::new(spec.master_seed).label(&spec.name).label("oracle");
    let results = run_indexed(replications, |r| {
        let panel = dgp.simulate(spec.sample_size, root.index(r as u64).seed())?;
        estimate_pair(&panel, &wiring)
    });
    let mut lp = Vec::with_capacity(replications);
    let mut var = Vec::with_capacity(replications);
    let mut failed = 0;
    for r in results {
        match r {
            Ok(p) => {
                lp.push(p.lp.values);
                var.push(p.var.values);
            }
            Err(_) => failed += 1,
        }
    }
    check_failures(failed, replications, spec.max_failure_rate)?;
    if lp.len() < 2 {
        return Err(Error::InsufficientData("oracle reference needs at least 2 samples".into()));
    }
    let draws = crate::bootstrap::BootstrapDraws {
        lp,
        var,
        pseudo_truth: truth,
        seeds: Vec::new(),
        failed: Vec::new(),
    };
    let risk = crate::bootstrap::bootstrap_risk(&draws)?;
    let (weights, safeguard) = risk.iter().map(|r| oracle_weight(r, spec.guard)).unzip();
    Ok(OracleReference {
        weights,
        safeguard,
        risk,
        failed,
    })
}

/// Everything recorded for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationRecord {
    pub index: usize,
    pub seed: u64,
    /// One path per requested estimator, in spec order.
    pub estimates: Vec<(EstimatorKind, Vec<f64>)>,
    /// Weights of the averaging estimators, in spec order.
    pub weights: Vec<(EstimatorKind, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub table: RmseTable,
    pub truth: Vec<f64>,
    pub oracle: Option<OracleReference>,
    pub records: Vec<ReplicationRecord>,
    pub failed: Vec<(usize, String)>,
}

impl ExperimentResult {
    /// Mean estimate per horizon for one estimator.
    pub fn mean_estimate(&self, kind: EstimatorKind) -> Option<Vec<f64>> {
        mean_of(&self.records, |r| r.estimates.iter().find(|(k, _)| *k == kind).map(|(_, v)| v))
    }

    /// Mean weight per horizon for one averaging estimator.
    pub fn mean_weight(&self, kind: EstimatorKind) -> Option<Vec<f64>> {
        mean_of(&self.records, |r| r.weights.iter().find(|(k, _)| *k == kind).map(|(_, v)| v))
    }

    /// Figure data: true response and mean estimates, RMSE profiles and
    /// weight profiles, over horizons `1..=H`.
    pub fn figure_bundles(&self, spec: &ExperimentSpec) -> Vec<(String, FigureBundle)> {
        let horizons: Vec<usize> = (1..=spec.horizons).collect();
        let pick = |v: &[f64]| horizons.iter().map(|&h| (h, v[h])).collect::<Vec<_>>();
        let mut irf = vec![FigureSeries::new("true_irf", pick(&self.truth))];
        let mut rmse = Vec::new();
        let mut weights = Vec::new();
        if let Some(o) = &self.oracle {
            weights.push(FigureSeries::new("oracle", pick(&o.weights)));
        }
        for kind in &spec.estimators {
            if let Some(m) = self.mean_estimate(*kind) {
                irf.push(FigureSeries::new(kind.as_str(), pick(&m)));
            }
            let r: Vec<(usize, f64)> = horizons
                .iter()
                .filter_map(|&h| self.table.get("irf", kind.as_str(), h).map(|row| (h, row.rmse)))
                .collect();
            rmse.push(FigureSeries::new(kind.as_str(), r));
            if let Some(m) = self.mean_weight(*kind) {
                weights.push(FigureSeries::new(kind.as_str(), pick(&m)));
            }
        }
        vec![
            ("figure_irf".into(), FigureBundle::new(horizons.clone(), irf)),
            ("figure_rmse".into(), FigureBundle::new(horizons.clone(), rmse)),
            ("figure_weights".into(), FigureBundle::new(horizons, weights)),
        ]
    }

    /// Per-replication store: `replication,seed,horizon` followed by one
    /// column per estimator and one `w_<name>` column per averaging weight.
    pub fn write_replications_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let Some(first) = self.records.first() else {
            w.write_record(["replication", "seed", "horizon"]).map_err(crate::panel::csv_err)?;
            w.flush()?;
            return Ok(());
        };
        let mut header = vec!["replication".to_string(), "seed".into(), "horizon".into()];
        header.extend(first.estimates.iter().map(|(k, _)| k.as_str().to_string()));
        header.extend(first.weights.iter().map(|(k, _)| format!("w_{}", k.as_str())));
        w.write_record(&header).map_err(crate::panel::csv_err)?;
        for r in &self.records {
            for h in 0..self.truth.len() {
                let mut row = vec![r.index.to_string(), r.seed.to_string(), h.to_string()];
                row.extend(r.estimates.iter().map(|(_, v)| crate::panel::format_num(v[h])));
                row.extend(r.weights.iter().map(|(_, v)| crate::panel::format_num(v[h])));
                w.write_record(&row).map_err(crate::panel::csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn mean_of<'a>(records: &'a [ReplicationRecord], get: impl Fn(&'a ReplicationRecord) -> Option<&'a Vec<f64>>) -> Option<Vec<f64>> {
    let first = get(records.first()?)?;
    let mut acc = vec![0.0; first.len()];
    for r in records {
        for (a, v) in acc.iter_mut().zip(get(r)?) {
            *a += v;
        }
    }
    let n = records.len() as f64;
    Some(acc.into_iter().map(|a| a / n).collect())
}

/// Seed of the simulated sample of replication `r`.
pub fn replication_seed(spec: &ExperimentSpec, r: usize) -> u64 {
    SeedPath::new(spec.master_seed).label(&spec.name).label("rep").index(r as u64).seed()
}

fn bootstrap_seed(spec: &ExperimentSpec, r: usize) -> u64 {
    SeedPath::new(spec.master_seed).label(&spec.name).label("boot").index(r as u64).seed()
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let dgp = spec.resolve_dgp()?;
    let wiring = spec.resolve_wiring(dgp.n());
    let truth = true_target(&dgp, &wiring)?;
    let oracle = if spec.needs(EstimatorKind::Oracle) || spec.estimators.iter().any(EstimatorKind::has_weight) {
        Some(oracle_reference(spec, spec.oracle_replications)?)
    } else {
        None
    };
    let oracle_schedule = oracle.as_ref().map(OracleReference::schedule);
    let bootstrap = spec.estimators.iter().any(EstimatorKind::needs_bootstrap);

    let results = run_indexed(spec.replications, |r| {
        let seed = replication_seed(spec, r);
        let panel = dgp.simulate(spec.sample_size, seed)?;
        let point = estimate_pair(&panel, &wiring)?;
        let plugin = if bootstrap {
            Some(plugin_weight_from(&panel, &wiring, point.clone(), &spec.bootstrap_config(bootstrap_seed(spec, r)))?)
        } else {
            None
        };
        let mut estimates = Vec::new();
        let mut weights = Vec::new();
        for kind in &spec.estimators {
            let schedule = match kind {
                EstimatorKind::Lp => {
                    estimates.push((*kind, point.lp.values.clone()));
                    continue;
                }
                EstimatorKind::Var => {
                    estimates.push((*kind, point.var.values.clone()));
                    continue;
                }
                EstimatorKind::Oracle => oracle_schedule.clone().expect("oracle computed"),
                EstimatorKind::Plugin => plugin.as_ref().expect("bootstrap ran").schedule.clone(),
                EstimatorKind::Flexible => {
                    let draws = &plugin.as_ref().expect("bootstrap ran").draws;
                    let (a, b) = calibrate_flexible(draws, &spec.grids.a, &spec.grids.b);
                    flexible_weight(&point.lp, &point.var, a, b)?
                }
                EstimatorKind::Direct => direct_weight(&plugin.as_ref().expect("bootstrap ran").draws, &spec.grids.w),
                EstimatorKind::ModelAvg => model_avg_weight(&point.r2_lp, point.r2_var),
            };
            estimates.push((*kind, combine(&point.lp, &point.var, &schedule)?.values));
            if kind.has_weight() {
                weights.push((*kind, schedule.weights));
            }
        }
        Ok(ReplicationRecord {
            index: r,
            seed,
            estimates,
            weights,
        })
    });

    let mut records = Vec::with_capacity(spec.replications);
    let mut failed = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rec) => records.push(rec),
            Err(e) => failed.push((r, e.to_string())),
        }
    }
    check_failures(failed.len(), spec.replications, spec.max_failure_rate)?;
    if records.is_empty() {
        return Err(Error::InsufficientData("every replication failed".into()));
    }
    let table = RmseTable::from_records(&spec.estimators, &records, &truth, oracle.as_ref().map(|o| &o.weights[..]));
    Ok(ExperimentResult {
        table,
        truth,
        oracle,
        records,
        failed,
    })
}
