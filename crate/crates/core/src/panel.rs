//! Observation panels and their CSV representation.
//!
//! A CSV panel has one header row and one column per variable. Two header
//! names are reserved: `__shock__` holds an observed structural shock and
//! `__instrument__` an external instrument, whose empty cells mark missing
//! observations. Empty cells anywhere else are rejected.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const SHOCK_HEADER: &str = "__shock__";
pub const INSTRUMENT_HEADER: &str = "__instrument__";

/// External instrument with a per-period observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    values: Vec<f64>,
    observed: Vec<bool>,
}

impl Instrument {
    /// Fully observed instrument.
    pub fn new(values: Vec<f64>) -> Self {
        let observed = vec![true; values.len()];
        Self { values, observed }
    }

    /// Instrument from optional cells; `None` marks a missing period.
    pub fn from_options(cells: &[Option<f64>]) -> Self {
        let values = cells.iter().map(|c| c.unwrap_or(0.0)).collect();
        let observed = cells.iter().map(Option::is_some).collect();
        Self { values, observed }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, t: usize) -> Option<f64> {
        if self.observed[t] {
            Some(self.values[t])
        } else {
            None
        }
    }

    pub fn is_observed(&self, t: usize) -> bool {
        self.observed[t]
    }

    pub fn observed_count(&self) -> usize {
        self.observed.iter().filter(|o| **o).count()
    }

    /// Multiplies every observed entry by the matching multiplier; missing
    /// entries stay missing.
    pub fn scaled_by(&self, multipliers: &[f64]) -> Self {
        let values = self
            .values
            .iter()
            .zip(multipliers)
            .zip(&self.observed)
            .map(|((v, m), o)| if *o { v * m } else { 0.0 })
            .collect();
        Self {
            values,
            observed: self.observed.clone(),
        }
    }

    /// Values gathered at the given periods, in order.
    pub fn gather(&self, periods: &[usize]) -> Self {
        Self {
            values: periods.iter().map(|&t| self.values[t]).collect(),
            observed: periods.iter().map(|&t| self.observed[t]).collect(),
        }
    }
}

/// `T x n` observation matrix with optional observed shocks and instrument.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    data: DMatrix<f64>,
    names: Vec<String>,
    shocks: Option<DMatrix<f64>>,
    instrument: Option<Instrument>,
}

impl TimeSeriesPanel {
    pub fn new(data: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let (t, n) = data.shape();
        if t == 0 || n == 0 {
            return Err(Error::InsufficientData(
                "panel needs at least one row and one column".into(),
            ));
        }
        if names.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {n} columns",
                names.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "non-finite observation at row {}, column {}",
                pos % t,
                pos / t
            )));
        }
        Ok(Self {
            data,
            names,
            shocks: None,
            instrument: None,
        })
    }

    /// Univariate panel with default name `y`.
    pub fn from_series(values: &[f64]) -> Result<Self> {
        Self::new(
            DMatrix::from_column_slice(values.len(), 1, values),
            vec!["y".to_string()],
        )
    }

    /// Attaches a single observed shock series.
    pub fn with_shock(self, shock: Vec<f64>) -> Result<Self> {
        let t = shock.len();
        self.with_shocks(DMatrix::from_vec(t, 1, shock))
    }

    /// Attaches a `T x m` matrix of observed structural shocks.
    pub fn with_shocks(mut self, shocks: DMatrix<f64>) -> Result<Self> {
        if shocks.nrows() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "shock length {} differs from panel length {}",
                shocks.nrows(),
                self.len()
            )));
        }
        if shocks.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite shock value".into()));
        }
        self.shocks = Some(shocks);
        Ok(self)
    }

    pub fn with_instrument(mut self, instrument: Instrument) -> Result<Self> {
        if instrument.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "instrument length {} differs from panel length {}",
                instrument.len(),
                self.len()
            )));
        }
        if (0..instrument.len()).any(|t| instrument.get(t).is_some_and(|v| !v.is_finite())) {
            return Err(Error::InvalidSpec("non-finite instrument value".into()));
        }
        self.instrument = Some(instrument);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn n_vars(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn value(&self, t: usize, var: usize) -> f64 {
        self.data[(t, var)]
    }

    pub fn shocks(&self) -> Option<&DMatrix<f64>> {
        self.shocks.as_ref()
    }

    /// Column `j` of the observed shock matrix.
    pub fn shock(&self, j: usize) -> Option<Vec<f64>> {
        self.shocks
            .as_ref()
            .filter(|s| j < s.ncols())
            .map(|s| s.column(j).iter().copied().collect())
    }

    pub fn instrument(&self) -> Option<&Instrument> {
        self.instrument.as_ref()
    }

    /// Reads a panel from CSV text.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .iter()
            .map(str::to_string)
            .collect();
        let shock_col = headers.iter().position(|h| h == SHOCK_HEADER);
        let inst_col = headers.iter().position(|h| h == INSTRUMENT_HEADER);
        let var_cols: Vec<usize> = (0..headers.len())
            .filter(|&i| Some(i) != shock_col && Some(i) != inst_col)
            .collect();
        if var_cols.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "no variable columns".into(),
            });
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut shock = Vec::new();
        let mut inst = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let line = idx + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if rec.len() != headers.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", headers.len(), rec.len()),
                });
            }
            let parse = |col: usize| -> Result<f64> {
                let cell = &rec[col];
                if cell.is_empty() {
                    return Err(Error::Parse {
                        line,
                        message: format!("empty cell in column `{}`", headers[col]),
                    });
                }
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line,
                        message: format!("invalid number `{cell}` in column `{}`", headers[col]),
                    })
            };
            rows.push(var_cols.iter().map(|&c| parse(c)).collect::<Result<_>>()?);
            if let Some(c) = shock_col {
                shock.push(parse(c)?);
            }
            if let Some(c) = inst_col {
                if rec[c].is_empty() {
                    inst.push(None);
                } else {
                    inst.push(Some(parse(c)?));
                }
            }
        }
        if rows.is_empty() {
            return Err(Error::InsufficientData("CSV has no data rows".into()));
        }
        let t = rows.len();
        let n = var_cols.len();
        let data = DMatrix::from_fn(t, n, |i, j| rows[i][j]);
        let names = var_cols.iter().map(|&c| headers[c].clone()).collect();
        let mut panel = Self::new(data, names)?;
        if shock_col.is_some() {
            panel = panel.with_shock(shock)?;
        }
        if inst_col.is_some() {
            panel = panel.with_instrument(Instrument::from_options(&inst))?;
        }
        Ok(panel)
    }

    /// Writes the panel as CSV; `shock_column` selects which observed shock
    /// (if any) is emitted under the reserved `__shock__` header.
    pub fn write_csv<W: Write>(&self, writer: W, shock_column: Option<usize>) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let shock = match shock_column {
            Some(j) => Some(self.shock(j).ok_or_else(|| {
                Error::InvalidSpec(format!("panel has no observed shock column {j}"))
            })?),
            None => None,
        };
        let mut header: Vec<String> = self.names.clone();
        if shock.is_some() {
            header.push(SHOCK_HEADER.into());
        }
        if self.instrument.is_some() {
            header.push(INSTRUMENT_HEADER.into());
        }
        w.write_record(&header).map_err(csv_err)?;
        for t in 0..self.len() {
            let mut rec: Vec<String> = (0..self.n_vars())
                .map(|j| format_num(self.data[(t, j)]))
                .collect();
            if let Some(s) = &shock {
                rec.push(format_num(s[t]));
            }
            if let Some(inst) = &self.instrument {
                rec.push(inst.get(t).map(format_num).unwrap_or_default());
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Replaces the observations (same shape), keeping names.
    pub(crate) fn with_data(&self, data: DMatrix<f64>) -> Self {
        Self {
            data,
            names: self.names.clone(),
            shocks: None,
            instrument: None,
        }
    }

    pub(crate) fn set_shocks_unchecked(&mut self, shocks: Option<DMatrix<f64>>) {
        self.shocks = shocks;
    }

    pub(crate) fn set_instrument_unchecked(&mut self, instrument: Option<Instrument>) {
        self.instrument = instrument;
    }
}

/// Shortest round-trip representation of a float.
pub(crate) fn format_num(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
