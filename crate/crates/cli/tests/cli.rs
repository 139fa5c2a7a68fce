use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use tempfile::TempDir;

fn irfavg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irfavg")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn simulate_to(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["--seed", "11", "--out", path_str(dir), "simulate", "arma", "0.5", "0.5", "--T", "240"];
    args.extend_from_slice(extra);
    let o = irfavg(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join("panel.csv")
}

fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn simulate_arma_writes_panel_with_shock() {
    let o = irfavg(&["--seed", "1", "simulate", "arma", "0.5", "0.5", "--T", "240"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("y,__shock__"));
    assert_eq!(lines.count(), 240);
}

#[test]
fn simulate_svarma_has_three_variables() {
    let o = irfavg(&["--seed", "1", "simulate", "svarma41", "--T", "200"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let header = text.lines().next().unwrap();
    let vars: Vec<&str> = header.split(',').filter(|c| !c.starts_with("__")).collect();
    assert_eq!(vars.len(), 3, "{header}");
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn unknown_dgp_lists_alternatives() {
    let o = irfavg(&["--seed", "1", "simulate", "garch", "--T", "100"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error[invalid-spec]"), "{err}");
    for name in ["arma", "svar4", "svarma41"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn estimate_writes_outputs_and_averages_lie_between() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate_to(&tmp.path().join("sim"), &[]);
    let out = tmp.path().join("est");
    let o = irfavg(&["--seed", "5", "--bootstrap", "60", "--horizons", "6", "--out", path_str(&out), "estimate", path_str(&panel)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["irf.csv", "weights.csv", "bands.csv", "risk.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let (header, rows) = read_rows(&out.join("irf.csv"));
    assert_eq!(header, ["horizon", "lp", "var", "avg_plugin", "avg_flexible", "avg_modelavg"]);
    assert_eq!(rows.len(), 7);
    for row in &rows {
        let (lo, hi) = (row[1].min(row[2]), row[1].max(row[2]));
        for v in &row[3..] {
            assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12, "{row:?}");
        }
    }
    let (_, weights) = read_rows(&out.join("weights.csv"));
    for row in &weights {
        assert!(row[1..4].iter().all(|w| (0.0..=1.0).contains(w)), "{row:?}");
    }
}

#[test]
fn missing_identification_is_reported() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate_to(&tmp.path().join("sim"), &["--no-shock"]);
    let o = irfavg(&["--seed", "5", "--out", path_str(&tmp.path().join("est")), "estimate", path_str(&panel)]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[identification-missing]"), "{}", stderr(&o));
}

#[test]
fn estimate_requires_seed() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate_to(&tmp.path().join("sim"), &[]);
    let o = irfavg(&["--out", path_str(&tmp.path().join("est")), "estimate", path_str(&panel)]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[usage]"), "{}", stderr(&o));
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate_to(&tmp.path().join("sim"), &[]);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = irfavg(&["--seed", "9", "--bootstrap", "40", "--out", path_str(&out), "estimate", path_str(&panel)]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["irf.csv", "weights.csv", "bands.csv", "risk.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn malformed_csv_names_file_and_line() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "y,__shock__\n1.0,0.5\n2.0,oops\n3.0,0.1\n").unwrap();
    let o = irfavg(&["--seed", "1", "--out", path_str(&tmp.path().join("est")), "estimate", path_str(&bad)]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.starts_with("error[parse]"), "{err}");
    assert!(err.contains(path_str(&bad)) && err.contains("line 3"), "{err}");
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate_to(&tmp.path().join("sim"), &[]);
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "seed = 1\nhorizon = 4\n").unwrap();
    let o = irfavg(&["--out", path_str(&tmp.path().join("est")), "estimate", path_str(&panel), "--config", path_str(&cfg)]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[config]"), "{}", stderr(&o));
}

#[test]
fn flags_override_config_values() {
    let tmp = TempDir::new().unwrap();
    let panel = simulate_to(&tmp.path().join("sim"), &[]);
    let cfg = tmp.path().join("c.toml");
    std::fs::write(&cfg, "seed = 1\nhorizons = 3\n[bootstrap]\ndraws = 30\n[bands]\ndraws = 50\n").unwrap();
    let out = tmp.path().join("est");
    let o = irfavg(&["--seed", "2", "--horizons", "5", "--out", path_str(&out), "estimate", path_str(&panel), "--config", path_str(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 2);
    assert_eq!(manifest["config"]["horizons"], 5);
    assert_eq!(manifest["config"]["bootstrap"]["draws"], 30);
    assert_eq!(manifest["config"]["bands"]["draws"], 50);
    assert_eq!(read_rows(&out.join("irf.csv")).1.len(), 6);
}

#[test]
fn smoke_montecarlo_is_quick() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("mc");
    let start = Instant::now();
    let o = irfavg(&["--out", path_str(&out), "montecarlo", path_str(&configs().join("smoke.toml"))]);
    let elapsed = start.elapsed().as_secs_f64();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(elapsed < 10.0, "{elapsed:.1}s");
    assert!(stdout(&o).contains("RMSE"));
    for f in ["table.csv", "table.txt", "replications.csv", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
}

#[test]
fn zero_threads_is_a_usage_error() {
    let o = irfavg(&["--threads", "0", "--seed", "1", "simulate", "arma", "0.5", "0.5", "--T", "50"]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error[usage]"), "{}", stderr(&o));
}
