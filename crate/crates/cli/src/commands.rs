use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use irfavg_core::averaging::write_risk_csv;
use irfavg_core::bootstrap::{nested_band, wild_band, BandConfig, BandSet, InnerWeights};
use irfavg_core::mc::{emit_figure_data, ExperimentSpec};
use irfavg_core::rng::SeedPath;
use irfavg_core::{builtin, fit_averaged, run_experiment, AveragedFit, TimeSeriesPanel};
use serde::Serialize;
use serde_json::json;

use crate::args::{Cli, Command};
use crate::config::EstimateConfig;
use crate::error::{CliError, CliResult};

const DEFAULT_OUT: &str = "irfavg-out";

/// Everything needed to rerun a command. Thread count and timings are
/// deliberately absent so that outputs do not depend on them.
#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    config: serde_json::Value,
    outputs: Vec<String>,
    details: serde_json::Value,
}

struct Timer {
    enabled: bool,
    start: Instant,
}

impl Timer {
    fn new(enabled: bool) -> Self {
        Self {
            enabled,
            start: Instant::now(),
        }
    }

    fn lap(&mut self, stage: &str) {
        if self.enabled {
            eprintln!("timing {stage}: {:.3}s", self.start.elapsed().as_secs_f64());
        }
        self.start = Instant::now();
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Threads(e.to_string()))?
            .install(|| dispatch(cli)),
        None => dispatch(cli),
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate {
            dgp,
            params,
            sample_size,
            shock,
            no_shock,
        } => simulate(cli, dgp, params, *sample_size, (!no_shock).then_some(*shock)),
        Command::Estimate { input, config } => estimate(cli, input, config.as_deref()),
        Command::Montecarlo { config, replications } => montecarlo(cli, config, *replications),
    }
}

fn out_dir(cli: &Cli) -> CliResult<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    Ok(dir)
}

fn write_file(
    dir: &Path,
    name: &str,
    outputs: &mut Vec<String>,
    f: impl FnOnce(&mut BufWriter<File>) -> irfavg_core::Result<()>,
) -> CliResult<()> {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| CliError::io(&path, e))?;
    outputs.push(name.to_string());
    Ok(())
}

fn write_manifest(dir: &Path, mut manifest: Manifest) -> CliResult<()> {
    manifest.outputs.push("manifest.json".into());
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

fn simulate(cli: &Cli, name: &str, params: &[f64], t: usize, shock: Option<usize>) -> CliResult<()> {
    let seed = cli
        .seed
        .ok_or_else(|| CliError::Usage("simulate needs --seed".into()))?;
    let dgp = builtin(name, params)?;
    if let Some(j) = shock {
        if j >= dgp.n() {
            return Err(CliError::Usage(format!("--shock {j} out of range for {} shocks", dgp.n())));
        }
    }
    let panel = dgp.simulate(t, seed)?;
    let Some(dir) = &cli.out else {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        panel.write_csv(&mut lock, shock)?;
        return Ok(());
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut outputs = Vec::new();
    write_file(dir, "panel.csv", &mut outputs, |w| panel.write_csv(w, shock))?;
    write_manifest(
        dir,
        Manifest {
            tool: "irfavg",
            version: env!("CARGO_PKG_VERSION"),
            command: "simulate",
            seed,
            input: None,
            config: json!({ "dgp": name, "params": params, "sample_size": t, "shock": shock }),
            outputs,
            details: to_value(&dgp),
        },
    )
}

fn estimate(cli: &Cli, input: &Path, config: Option<&Path>) -> CliResult<()> {
    let mut timer = Timer::new(cli.timing);
    let mut cfg = match config {
        Some(p) => EstimateConfig::load(p)?,
        None => EstimateConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = Some(s);
    }
    if let Some(b) = cli.bootstrap {
        cfg.bootstrap.draws = b;
    }
    if let Some(h) = cli.horizons {
        cfg.horizons = h;
    }
    let seed = cfg
        .seed
        .ok_or_else(|| CliError::Usage("estimate needs a seed (--seed or `seed` in the config)".into()))?;

    let file = File::open(input).map_err(|e| CliError::io(input, e))?;
    let panel = TimeSeriesPanel::read_csv(std::io::BufReader::new(file)).map_err(|source| CliError::Input {
        path: input.to_path_buf(),
        source,
    })?;
    cfg.detect_identification(&panel)?;
    let wiring = cfg.wiring()?;
    let dir = out_dir(cli)?;
    timer.lap("load");

    let root = SeedPath::new(seed);
    let boot = cfg.bootstrap_config(root.label("plugin").seed());
    let fit = fit_averaged(&panel, &wiring, &boot, &cfg.grids)?;
    timer.lap("weights");

    let band_cfg = BandConfig {
        draws: cfg.bands.draws,
        coverage: cfg.bands.coverage,
        seed: root.label("bands").seed(),
        sieve: cfg.sieve,
        max_failure_rate: cfg.bands.max_failure_rate,
    };
    let bands = match cfg.bands.inner_draws {
        Some(inner) => {
            let inner_cfg = irfavg_core::BootstrapConfig { draws: inner, ..boot };
            nested_band(&panel, &fit, &band_cfg, &InnerWeights::Recompute(inner_cfg))?
        }
        None => wild_band(&panel, &fit, &band_cfg)?,
    };
    timer.lap("bands");

    let mut outputs = Vec::new();
    write_file(&dir, "irf.csv", &mut outputs, |w| write_irf_csv(&fit, w))?;
    write_file(&dir, "weights.csv", &mut outputs, |w| write_weights_csv(&fit, w))?;
    write_file(&dir, "bands.csv", &mut outputs, |w| bands.write_csv(w))?;
    write_file(&dir, "risk.csv", &mut outputs, |w| write_risk_csv(&fit.plugin.risk, w))?;
    write_manifest(
        &dir,
        Manifest {
            tool: "irfavg",
            version: env!("CARGO_PKG_VERSION"),
            command: "estimate",
            seed,
            input: Some(input.display().to_string()),
            config: to_value(&cfg),
            outputs,
            details: estimate_details(&panel, &fit, &bands),
        },
    )?;
    timer.lap("write");
    Ok(())
}

fn estimate_details(panel: &TimeSeriesPanel, fit: &AveragedFit, bands: &BandSet) -> serde_json::Value {
    let point = &fit.plugin.point;
    json!({
        "observations": panel.len(),
        "variables": panel.names(),
        "var_order": point.var_order,
        "lp_lags": point.lp_lags,
        "sieve_order": fit.plugin.sieve_order,
        "flexible_a": fit.flexible_params.0,
        "flexible_b": fit.flexible_params.1,
        "r2_var": point.r2_var,
        "bootstrap_draws_used": fit.plugin.draws.len(),
        "bootstrap_draws_failed": fit.plugin.draws.failed.len(),
        "band_draws_used": bands.draws_used,
        "band_draws_failed": bands.failed.len(),
        "warnings": point.warnings,
    })
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(e: csv::Error) -> irfavg_core::Error {
    irfavg_core::Error::Io(e.to_string())
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// `horizon,lp,var,avg_plugin,avg_flexible,avg_modelavg`.
fn write_irf_csv<W: Write>(fit: &AveragedFit, w: W) -> irfavg_core::Result<()> {
    let mut w = csv_writer(w);
    w.write_record(["horizon", "lp", "var", "avg_plugin", "avg_flexible", "avg_modelavg"])
        .map_err(csv_err)?;
    for h in 0..fit.estimates[0].values.len() {
        let mut row = vec![h.to_string()];
        row.extend(fit.estimates.iter().map(|e| num(e.values[h])));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `horizon,plugin,flexible,model_avg,plugin_safeguard`.
fn write_weights_csv<W: Write>(fit: &AveragedFit, w: W) -> irfavg_core::Result<()> {
    let mut w = csv_writer(w);
    w.write_record(["horizon", "plugin", "flexible", "model_avg", "plugin_safeguard"])
        .map_err(csv_err)?;
    let p = &fit.plugin.schedule;
    for h in 0..p.weights.len() {
        w.write_record([
            h.to_string(),
            num(p.weights[h]),
            num(fit.flexible.weights[h]),
            num(fit.model_avg.weights[h]),
            u8::from(p.safeguard[h]).to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn montecarlo(cli: &Cli, config: &Path, replications: Option<usize>) -> CliResult<()> {
    let mut timer = Timer::new(cli.timing);
    let text = std::fs::read_to_string(config).map_err(|e| CliError::io(config, e))?;
    let mut spec = ExperimentSpec::from_toml(&text).map_err(|e| CliError::Config {
        path: config.to_path_buf(),
        message: e.to_string(),
    })?;
    if let Some(s) = cli.seed {
        spec.master_seed = s;
    }
    if let Some(b) = cli.bootstrap {
        spec.bootstrap = b;
    }
    if let Some(h) = cli.horizons {
        spec.horizons = h;
    }
    if let Some(r) = replications {
        spec.replications = r;
    }
    let dir = out_dir(cli)?;
    timer.lap("load");

    let result = run_experiment(&spec)?;
    timer.lap("simulate");

    let mut outputs = Vec::new();
    write_file(&dir, "table.csv", &mut outputs, |w| result.table.write_csv(w))?;
    write_file(&dir, "table.txt", &mut outputs, |w| result.table.write_text(w))?;
    for (name, bundle) in result.figure_bundles(&spec) {
        write_file(&dir, &format!("{name}.csv"), &mut outputs, |w| emit_figure_data(&bundle, w))?;
    }
    write_file(&dir, "replications.csv", &mut outputs, |w| result.write_replications_csv(w))?;
    let details = json!({
        "truth": result.truth,
        "oracle_weights": result.oracle.as_ref().map(|o| &o.weights),
        "oracle_failed": result.oracle.as_ref().map(|o| o.failed),
        "failed_replications": result.failed.iter().map(|(r, m)| json!({ "replication": r, "message": m })).collect::<Vec<_>>(),
    });
    write_manifest(
        &dir,
        Manifest {
            tool: "irfavg",
            version: env!("CARGO_PKG_VERSION"),
            command: "montecarlo",
            seed: spec.master_seed,
            input: Some(config.display().to_string()),
            config: to_value(&spec),
            outputs,
            details,
        },
    )?;
    let mut text = Vec::new();
    result.table.write_text(&mut text)?;
    print!("{}", String::from_utf8_lossy(&text));
    timer.lap("write");
    Ok(())
}
