use std::io::{Read, Write};

use super::{EstimatorKind, ReplicationRecord};
use crate::error::{Error, Result};
use crate::panel::{csv_err, format_num};

/// One cell of an RMSE table. `section` is `irf` (estimates against the
/// true response) or `weight` (weights against the oracle weights).
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub section: String,
    pub name: String,
    pub horizon: usize,
    pub rmse: f64,
    /// Delta-method Monte Carlo standard error of the RMSE.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RmseTable {
    pub rows: Vec<TableRow>,
}

/// RMSE and its Monte Carlo standard error `sd(e^2) / (2 RMSE sqrt(R))`.
fn rmse_with_se(errors: &[f64]) -> (f64, f64) {
    let r = errors.len() as f64;
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let mse = sq.iter().sum::<f64>() / r;
    let rmse = mse.sqrt();
    if errors.len() < 2 || rmse == 0.0 {
        return (rmse, 0.0);
    }
    let var = sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / (r - 1.0);
    (rmse, var.sqrt() / (2.0 * rmse * r.sqrt()))
}

impl RmseTable {
    pub(crate) fn from_records(
        estimators: &[EstimatorKind],
        records: &[ReplicationRecord],
        truth: &[f64],
        oracle: Option<&[f64]>,
    ) -> Self {
        let mut rows = Vec::new();
        let section = |rows: &mut Vec<TableRow>, name: &str, target: &[f64], pick: &dyn Fn(&ReplicationRecord) -> Option<Vec<f64>>| {
            let paths: Vec<Vec<f64>> = records.iter().filter_map(pick).collect();
            if paths.is_empty() {
                return;
            }
            for (h, t) in target.iter().enumerate() {
                let errors: Vec<f64> = paths.iter().map(|p| p[h] - t).collect();
                let (rmse, mc_se) = rmse_with_se(&errors);
                rows.push(TableRow {
                    section: String::new(),
                    name: name.to_string(),
                    horizon: h,
                    rmse,
                    mc_se,
                });
            }
        };
        for kind in estimators {
            let start = rows.len();
            section(&mut rows, kind.as_str(), truth, &|r: &ReplicationRecord| {
                r.estimates.iter().find(|(k, _)| k == kind).map(|(_, v)| v.clone())
            });
            rows[start..].iter_mut().for_each(|row| row.section = "irf".into());
        }
        if let Some(oracle) = oracle {
            for kind in estimators.iter().filter(|k| k.has_weight()) {
                let start = rows.len();
                section(&mut rows, kind.as_str(), oracle, &|r: &ReplicationRecord| {
                    r.weights.iter().find(|(k, _)| k == kind).map(|(_, v)| v.clone())
                });
                rows[start..].iter_mut().for_each(|row| row.section = "weight".into());
            }
        }
        Self { rows }
    }

    pub fn get(&self, section: &str, name: &str, horizon: usize) -> Option<&TableRow> {
        self.rows
            .iter()
            .find(|r| r.section == section && r.name == name && r.horizon == horizon)
    }

    /// CSV `section,name,horizon,rmse,mc_se` with four decimals.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["section", "name", "horizon", "rmse", "mc_se"]).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.section.clone(),
                r.name.clone(),
                r.horizon.to_string(),
                format!("{:.4}", r.rmse),
                format!("{:.4}", r.mc_se),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aligned text: one block per section, horizons down, names across.
    pub fn write_text<W: Write>(&self, mut writer: W) -> Result<()> {
        let mut sections: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !sections.contains(&r.section.as_str()) {
                sections.push(&r.section);
            }
        }
        for (i, section) in sections.iter().enumerate() {
            if i > 0 {
                writeln!(writer)?;
            }
            let rows: Vec<&TableRow> = self.rows.iter().filter(|r| r.section == *section).collect();
            let mut names: Vec<&str> = Vec::new();
            let mut horizons: Vec<usize> = Vec::new();
            for r in &rows {
                if !names.contains(&r.name.as_str()) {
                    names.push(&r.name);
                }
                if !horizons.contains(&r.horizon) {
                    horizons.push(r.horizon);
                }
            }
            let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(8) + 2;
            writeln!(writer, "[{section}] RMSE")?;
            write!(writer, "{:>7}", "horizon")?;
            for n in &names {
                write!(writer, "{n:>width$}")?;
            }
            writeln!(writer)?;
            for h in horizons {
                write!(writer, "{h:>7}")?;
                for n in &names {
                    match rows.iter().find(|r| r.name == *n && r.horizon == h) {
                        Some(r) => write!(writer, "{:>width$.4}", r.rmse)?,
                        None => write!(writer, "{:>width$}", "")?,
                    }
                }
                writeln!(writer)?;
            }
        }
        Ok(())
    }
}

/// Reads a table written by [`RmseTable::write_csv`].
pub fn parse_table_csv<R: Read>(reader: R) -> Result<RmseTable> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if rec.len() != 5 {
            return Err(Error::Parse {
                line,
                message: format!("expected 5 fields, found {}", rec.len()),
            });
        }
        let num = |j: usize| {
            rec[j].parse::<f64>().map_err(|e| Error::Parse {
                line,
                message: format!("`{}`: {e}", &rec[j]),
            })
        };
        rows.push(TableRow {
            section: rec[0].to_string(),
            name: rec[1].to_string(),
            horizon: rec[2].parse().map_err(|e| Error::Parse {
                line,
                message: format!("horizon `{}`: {e}", &rec[2]),
            })?,
            rmse: num(3)?,
            mc_se: num(4)?,
        });
    }
    Ok(RmseTable { rows })
}

/// Named series of `(horizon, value)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureSeries {
    pub name: String,
    pub values: Vec<(usize, f64)>,
}

impl FigureSeries {
    pub fn new(name: &str, values: Vec<(usize, f64)>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

/// Series sharing a horizon axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureBundle {
    pub horizons: Vec<usize>,
    pub series: Vec<FigureSeries>,
}

impl FigureBundle {
    pub fn new(horizons: Vec<usize>, series: Vec<FigureSeries>) -> Self {
        Self { horizons, series }
    }
}

/// CSV `horizon,<series...>`, one row per horizon.
pub fn emit_figure_data<W: Write>(bundle: &FigureBundle, writer: W) -> Result<()> {
    let mut table = Vec::with_capacity(bundle.horizons.len());
    for &h in &bundle.horizons {
        let mut row = vec![h.to_string()];
        for s in &bundle.series {
            let v = s
                .values
                .iter()
                .find(|(x, _)| *x == h)
                .ok_or_else(|| Error::MissingHorizon {
                    series: s.name.clone(),
                    horizon: h,
                })?;
            row.push(format_num(v.1));
        }
        table.push(row);
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec!["horizon".to_string()];
    header.extend(bundle.series.iter().map(|s| s.name.clone()));
    w.write_record(&header).map_err(csv_err)?;
    for row in table {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> RmseTable {
        let row = |section: &str, name: &str, horizon, rmse, mc_se| TableRow {
            section: section.into(),
            name: name.into(),
            horizon,
            rmse,
            mc_se,
        };
        RmseTable {
            rows: vec![
                row("irf", "lp", 1, 0.0958, 0.0021),
                row("irf", "var", 1, 0.2972, 0.0040),
                row("weight", "plugin", 1, 0.0656, 0.0030),
            ],
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = table();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(parse_table_csv(&buf[..]).unwrap(), t);
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    #[test]
    fn empty_table_is_header_only() {
        let mut buf = Vec::new();
        RmseTable::default().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "section,name,horizon,rmse,mc_se\n");
    }

    #[test]
    fn text_layout() {
        let mut buf = Vec::new();
        table().write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("[irf] RMSE"));
        assert!(text.contains("0.2972"));
    }

    #[test]
    fn figure_shape() {
        let h: Vec<usize> = (1..=10).collect();
        let s = |n: &str| FigureSeries::new(n, h.iter().map(|&x| (x, x as f64)).collect());
        let mut buf = Vec::new();
        emit_figure_data(&FigureBundle::new(h.clone(), vec![s("a"), s("b")]), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 11);
        assert!(lines.iter().all(|l| l.split(',').count() == 3));
    }

    #[test]
    fn figure_missing_horizon() {
        let full = FigureSeries::new("full", vec![(1, 0.1), (2, 0.2)]);
        let short = FigureSeries::new("short", vec![(1, 0.1)]);
        let err = emit_figure_data(&FigureBundle::new(vec![1, 2], vec![full, short]), Vec::new()).unwrap_err();
        assert_eq!(
            err,
            Error::MissingHorizon {
                series: "short".into(),
                horizon: 2
            }
        );
    }

    #[test]
    fn se_of_constant_errors_is_zero() {
        assert_eq!(rmse_with_se(&[0.5, -0.5, 0.5]), (0.5, 0.0));
    }
}
