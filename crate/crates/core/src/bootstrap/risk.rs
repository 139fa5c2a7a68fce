//! Bootstrap moments: risk components, Omega-hat and the plug-in variance.

use std::io::Write;

use nalgebra::Matrix2;

use crate::averaging::RiskComponents;
use crate::error::{Error, Result};
use crate::panel::{csv_err, format_num};

/// Per-draw LP and VAR estimates on bootstrap pseudo-panels.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    /// `lp[b][h]`.
    pub lp: Vec<Vec<f64>>,
    /// `var[b][h]`.
    pub var: Vec<Vec<f64>>,
    /// Centering target for bias estimates.
    pub pseudo_truth: Vec<f64>,
    /// Seed of every successful draw, aligned with `lp` and `var`.
    pub seeds: Vec<u64>,
    pub failed: Vec<DrawFailure>,
}

/// A discarded draw.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawFailure {
    pub index: usize,
    pub seed: u64,
    pub message: String,
}

impl BootstrapDraws {
    pub fn len(&self) -> usize {
        self.lp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lp.is_empty()
    }

    pub fn horizons(&self) -> usize {
        self.pseudo_truth.len().saturating_sub(1)
    }

    /// CSV `draw,horizon,theta_lp,theta_var`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(["draw", "horizon", "theta_lp", "theta_var"]).map_err(csv_err)?;
        for (b, (l, v)) in self.lp.iter().zip(&self.var).enumerate() {
            for h in 0..l.len() {
                w.write_record([b.to_string(), h.to_string(), format_num(l[h]), format_num(v[h])])
                    .map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    fn check(&self) -> Result<usize> {
        let b = self.len();
        if b < 2 {
            return Err(Error::InsufficientData(format!("{b} bootstrap draws; need at least 2")));
        }
        let h = self.pseudo_truth.len();
        if self.var.len() != b || self.lp.iter().chain(&self.var).any(|d| d.len() != h) {
            return Err(Error::DimensionMismatch("bootstrap draws are ragged".into()));
        }
        Ok(b)
    }

    /// Bootstrap means, accumulated relative to the first draw so that
    /// identical draws give their common value exactly.
    fn means(&self, h: usize) -> (f64, f64) {
        let b = self.len() as f64;
        let (s_lp, s_var) = (self.lp[0][h], self.var[0][h]);
        (
            s_lp + self.lp.iter().map(|d| d[h] - s_lp).sum::<f64>() / b,
            s_var + self.var.iter().map(|d| d[h] - s_var).sum::<f64>() / b,
        )
    }

    /// Second moments `(S_LL, S_VV, S_LV) / B` around the given centers.
    fn moments(&self, h: usize, c_lp: f64, c_var: f64) -> (f64, f64, f64) {
        let b = self.len() as f64;
        let (mut ll, mut vv, mut lv) = (0.0, 0.0, 0.0);
        for (l, v) in self.lp.iter().zip(&self.var) {
            let (x, y) = (l[h] - c_lp, v[h] - c_var);
            ll += x * x;
            vv += y * y;
            lv += x * y;
        }
        (ll / b, vv / b, lv / b)
    }
}

/// Variances, covariance (divisor `B`) and biases against the pseudo-truth.
pub fn bootstrap_risk(draws: &BootstrapDraws) -> Result<Vec<RiskComponents>> {
    draws.check()?;
    Ok((0..draws.pseudo_truth.len())
        .map(|h| {
            let (m_lp, m_var) = draws.means(h);
            let (v_lp, v_var, cov) = draws.moments(h, m_lp, m_var);
            RiskComponents {
                v_lp,
                v_var,
                cov,
                bias_lp: m_lp - draws.pseudo_truth[h],
                bias_var: m_var - draws.pseudo_truth[h],
            }
        })
        .collect())
}

/// Bootstrap estimate of the asymptotic covariance of the scaled
/// `(LP, VAR)` pair, one 2x2 matrix per horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaHat {
    pub t: usize,
    pub matrices: Vec<Matrix2<f64>>,
}

/// `T` times the bootstrap covariance of the pair (recentered at the
/// bootstrap mean).
pub fn estimate_omega(draws: &BootstrapDraws, t: usize) -> Result<OmegaHat> {
    draws.check()?;
    let matrices = (0..draws.pseudo_truth.len())
        .map(|h| {
            let (m_lp, m_var) = draws.means(h);
            scaled(draws.moments(h, m_lp, m_var), t)
        })
        .collect();
    Ok(OmegaHat { t, matrices })
}

/// Uncentered variant: second moments of `sqrt(T) (draw - point estimate)`.
pub fn estimate_omega_around(draws: &BootstrapDraws, t: usize, lp: &[f64], var: &[f64]) -> Result<OmegaHat> {
    draws.check()?;
    let h_len = draws.pseudo_truth.len();
    if lp.len() != h_len || var.len() != h_len {
        return Err(Error::DimensionMismatch("point estimates do not match draws".into()));
    }
    let matrices = (0..h_len)
        .map(|h| scaled(draws.moments(h, lp[h], var[h]), t))
        .collect();
    Ok(OmegaHat { t, matrices })
}

fn scaled((ll, vv, lv): (f64, f64, f64), t: usize) -> Matrix2<f64> {
    let tf = t as f64;
    Matrix2::new(ll * tf, lv * tf, lv * tf, vv * tf)
}

/// `w^2 O11 + (1-w)^2 O22 + 2 w (1-w) O12`.
pub fn plugin_variance(w: f64, omega: &Matrix2<f64>) -> Result<f64> {
    let v = w * w * omega[(0, 0)] + (1.0 - w) * (1.0 - w) * omega[(1, 1)] + 2.0 * w * (1.0 - w) * omega[(0, 1)];
    if v < -1e-12 {
        return Err(Error::NotPositiveSemidefinite(format!(
            "plug-in variance {v} is negative"
        )));
    }
    Ok(v.max(0.0))
}
