use std::io::Write;

use crate::error::{Error, Result};
use crate::panel::{csv_err, format_num};

/// Scalar impulse-response path for horizons `0..=H` from one estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfEstimate {
    pub method: String,
    pub values: Vec<f64>,
}

impl IrfEstimate {
    pub fn new(method: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            method: method.into(),
            values,
        }
    }

    /// Largest horizon `H`.
    pub fn max_horizon(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn at(&self, h: usize) -> f64 {
        self.values[h]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.method.clone(), self.values.iter().map(|v| v * c).collect())
    }

    pub(crate) fn check_aligned(&self, other: &IrfEstimate) -> Result<()> {
        if self.values.len() != other.values.len() {
            return Err(Error::DimensionMismatch(format!(
                "`{}` has {} horizons but `{}` has {}",
                self.method,
                self.values.len(),
                other.method,
                other.values.len()
            )));
        }
        Ok(())
    }

    /// CSV with columns `horizon,estimate`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["horizon", "estimate"]).map_err(csv_err)?;
        for (h, v) in self.values.iter().enumerate() {
            w.write_record([h.to_string(), format_num(*v)]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}
