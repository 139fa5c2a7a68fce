//! Simulable SVARMA(p, q) processes and their population impulse responses.
//!
//! ```text
//! y_t = A_1 y_{t-1} + ... + A_p y_{t-p} + M_0 e_t + M_1 e_{t-1} + ... + M_q e_{t-q},
//! e_t ~ N(0, I_n)
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spectral_radius;
use crate::panel::TimeSeriesPanel;
use crate::rng::{standard_normal, SeedPath};

pub const DEFAULT_BURN_IN: usize = 200;

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 3] = ["arma", "svar4", "svarma41"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct DgpSpec {
    n: usize,
    ar: Vec<DMatrix<f64>>,
    ma: Vec<DMatrix<f64>>,
    impact: DMatrix<f64>,
    burn_in: usize,
}

/// On-disk layout: matrices are row-major lists of lists.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSpec {
    n: usize,
    p: usize,
    q: usize,
    ar: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    ma: Vec<Vec<Vec<f64>>>,
    impact: Vec<Vec<f64>>,
    #[serde(default = "default_burn_in")]
    burn_in: usize,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn to_matrix(rows: &[Vec<f64>], n: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidSpec(format!("{what} must be {n}x{n}")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl TryFrom<RawSpec> for DgpSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        if raw.ar.len() != raw.p {
            return Err(Error::InvalidSpec(format!(
                "p = {} but {} AR matrices given",
                raw.p,
                raw.ar.len()
            )));
        }
        if raw.ma.len() != raw.q {
            return Err(Error::InvalidSpec(format!(
                "q = {} but {} MA matrices given",
                raw.q,
                raw.ma.len()
            )));
        }
        let n = raw.n;
        let ar = raw
            .ar
            .iter()
            .enumerate()
            .map(|(j, m)| to_matrix(m, n, &format!("ar[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        let ma = raw
            .ma
            .iter()
            .enumerate()
            .map(|(j, m)| to_matrix(m, n, &format!("ma[{j}]")))
            .collect::<Result<Vec<_>>>()?;
        let impact = to_matrix(&raw.impact, n, "impact")?;
        DgpSpec::new(ar, ma, impact, raw.burn_in)
    }
}

impl From<DgpSpec> for RawSpec {
    fn from(s: DgpSpec) -> Self {
        RawSpec {
            n: s.n,
            p: s.ar.len(),
            q: s.ma.len(),
            ar: s.ar.iter().map(to_rows).collect(),
            ma: s.ma.iter().map(to_rows).collect(),
            impact: to_rows(&s.impact),
            burn_in: s.burn_in,
        }
    }
}

impl DgpSpec {
    /// Validates dimensions, stationarity and a nonsingular impact matrix.
    pub fn new(
        ar: Vec<DMatrix<f64>>,
        ma: Vec<DMatrix<f64>>,
        impact: DMatrix<f64>,
        burn_in: usize,
    ) -> Result<Self> {
        let n = impact.nrows();
        if n == 0 || impact.ncols() != n {
            return Err(Error::InvalidSpec("impact must be square and non-empty".into()));
        }
        if ar.iter().chain(&ma).any(|m| m.shape() != (n, n)) {
            return Err(Error::InvalidSpec(format!("all coefficient matrices must be {n}x{n}")));
        }
        if ar.iter().chain(&ma).chain(std::iter::once(&impact)).any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidSpec("non-finite coefficient".into()));
        }
        let radius = spectral_radius(&ar);
        if radius >= 1.0 {
            return Err(Error::NonStationary { radius });
        }
        if impact.determinant().abs() < 1e-12 {
            return Err(Error::InvalidSpec("impact matrix is singular".into()));
        }
        Ok(Self {
            n,
            ar,
            ma,
            impact,
            burn_in,
        })
    }

    /// Univariate ARMA(1,1) `y_t = rho y_{t-1} + e_t + alpha e_{t-1}`.
    pub fn arma(rho: f64, alpha: f64) -> Result<Self> {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        let ar = if rho == 0.0 { vec![] } else { vec![one(rho)] };
        let ma = if alpha == 0.0 { vec![] } else { vec![one(alpha)] };
        Self::new(ar, ma, one(1.0), DEFAULT_BURN_IN)
    }

    /// Three-variable SVAR(4).
    pub fn svar4() -> Self {
        let ar = vec![
            m3([[1.31, 0.75, 0.25], [-0.12, 2.08, 0.23], [-0.23, 0.56, 1.75]]),
            m3([[-0.52, -1.06, -0.35], [0.16, -1.59, -0.33], [0.32, -0.78, -1.12]]),
            m3([[0.04, 0.48, 0.16], [-0.08, 0.53, 0.15], [-0.14, 0.35, 0.31]]),
            m3([[0.01, -0.07, -0.02], [0.01, -0.06, -0.02], [0.02, -0.05, -0.03]]),
        ];
        let impact = m3([[2.0, -1.5, 0.2], [1.7, 1.3, 0.7], [0.6, -0.6, 1.7]]);
        Self::new(ar, vec![], impact, DEFAULT_BURN_IN).expect("built-in SVAR(4) is valid")
    }

    /// Three-variable SVARMA(4,1).
    pub fn svarma41() -> Self {
        let ar = vec![
            m3([[1.24, -0.04, -0.03], [-0.58, 1.77, 0.32], [-0.78, 0.76, 1.63]]),
            m3([[-0.52, 0.02, 0.06], [0.74, -1.23, -0.39], [1.04, -0.98, -1.02]]),
            m3([[0.08, 0.00, -0.03], [-0.30, 0.39, 0.16], [-0.44, 0.41, 0.29]]),
            m3([[-0.01, 0.00, 0.00], [0.04, -0.04, -0.02], [0.06, -0.05, -0.03]]),
        ];
        let ma = vec![m3([[-0.30, 0.10, -0.40], [-0.20, 0.20, -1.00], [-0.30, 0.07, 0.20]])];
        let impact = m3([[1.30, 0.40, 0.10], [-0.02, 0.05, 2.00], [-0.08, -1.70, 0.80]]);
        Self::new(ar, ma, impact, DEFAULT_BURN_IN).expect("built-in SVARMA(4,1) is valid")
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.ar.len()
    }

    pub fn q(&self) -> usize {
        self.ma.len()
    }

    pub fn ar(&self) -> &[DMatrix<f64>] {
        &self.ar
    }

    pub fn ma(&self) -> &[DMatrix<f64>] {
        &self.ma
    }

    pub fn impact(&self) -> &DMatrix<f64> {
        &self.impact
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    /// Draws `t` observations after discarding `burn_in` periods started
    /// from zero initial conditions. The structural shocks are returned with
    /// the panel.
    pub fn simulate(&self, t: usize, seed: u64) -> Result<TimeSeriesPanel> {
        if t == 0 {
            return Err(Error::InsufficientData("simulation length must be positive".into()));
        }
        let n = self.n;
        let p = self.p();
        let q = self.q();
        let total = self.burn_in + t;
        let mut rng = SeedPath::new(seed).rng();
        // row-major buffers, period by period
        let mut eps = vec![0.0; total * n];
        for e in eps.iter_mut() {
            *e = standard_normal(&mut rng);
        }
        let mut y = vec![0.0; total * n];
        let ar: Vec<Vec<f64>> = self.ar.iter().map(row_major).collect();
        let ma: Vec<Vec<f64>> = std::iter::once(&self.impact)
            .chain(&self.ma)
            .map(row_major)
            .collect();
        for s in 0..total {
            for i in 0..n {
                let mut v = 0.0;
                for (j, a) in ar.iter().enumerate().take(p.min(s)) {
                    let lag = (s - j - 1) * n;
                    for k in 0..n {
                        v += a[i * n + k] * y[lag + k];
                    }
                }
                for (k, m) in ma.iter().enumerate().take(q.min(s) + 1) {
                    let lag = (s - k) * n;
                    for l in 0..n {
                        v += m[i * n + l] * eps[lag + l];
                    }
                }
                y[s * n + i] = v;
            }
        }
        let off = self.burn_in * n;
        let data = DMatrix::from_row_slice(t, n, &y[off..]);
        let shocks = DMatrix::from_row_slice(t, n, &eps[off..]);
        let names = if n == 1 {
            vec!["y".to_string()]
        } else {
            (1..=n).map(|i| format!("y{i}")).collect()
        };
        TimeSeriesPanel::new(data, names)?.with_shocks(shocks)
    }

    /// Exact structural VMA coefficients `Theta_0..Theta_H`.
    pub fn true_irf(&self, horizons: usize) -> TrueIrf {
        let mut values: Vec<DMatrix<f64>> = Vec::with_capacity(horizons + 1);
        for h in 0..=horizons {
            let mut th = if h == 0 {
                self.impact.clone()
            } else if h <= self.q() {
                self.ma[h - 1].clone()
            } else {
                DMatrix::zeros(self.n, self.n)
            };
            for j in 1..=h.min(self.p()) {
                th += &self.ar[j - 1] * &values[h - j];
            }
            values.push(th);
        }
        TrueIrf { values }
    }
}

fn m3(rows: [[f64; 3]; 3]) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |i, j| rows[i][j])
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Looks up a built-in process. `arma` takes `[rho, alpha]`; the other
/// names take no parameters.
pub fn builtin(name: &str, params: &[f64]) -> Result<DgpSpec> {
    match name {
        "arma" => match params {
            [rho, alpha] => DgpSpec::arma(*rho, *alpha),
            _ => Err(Error::InvalidSpec("arma takes two parameters: rho alpha".into())),
        },
        "svar4" | "svarma41" if !params.is_empty() => {
            Err(Error::InvalidSpec(format!("{name} takes no parameters")))
        }
        "svar4" => Ok(DgpSpec::svar4()),
        "svarma41" => Ok(DgpSpec::svarma41()),
        other => Err(Error::InvalidSpec(format!(
            "unknown DGP `{other}`; available: {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

/// Registry of built-in processes with their default parameters.
pub fn builtin_specs() -> Vec<(String, DgpSpec)> {
    vec![
        ("arma(0.5,0.5)".into(), DgpSpec::arma(0.5, 0.5).expect("stable")),
        ("svar4".into(), DgpSpec::svar4()),
        ("svarma41".into(), DgpSpec::svarma41()),
    ]
}

/// Population impulse responses: `values[h][(i, j)]` is the response of
/// variable `i` to structural shock `j` after `h` periods.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueIrf {
    pub values: Vec<DMatrix<f64>>,
}

impl TrueIrf {
    pub fn horizons(&self) -> usize {
        self.values.len() - 1
    }

    pub fn response(&self, variable: usize, shock: usize) -> Vec<f64> {
        self.values.iter().map(|m| m[(variable, shock)]).collect()
    }

    /// Scalar path for univariate processes.
    pub fn scalar(&self) -> Vec<f64> {
        self.response(0, 0)
    }
}
