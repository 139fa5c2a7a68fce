//! Dense least squares via Householder QR with column pivoting, plus the
//! companion-matrix helpers used for stability checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot tolerance below which a design is declared rank deficient.
pub const RANK_TOL: f64 = 1e-10;

/// Solve `min ||X b - Y||` column by column for a full-column-rank `X`.
///
/// `y` may carry several right-hand sides (one per column); the
/// returned matrix has one coefficient column per right-hand side.
pub fn lstsq(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, k) = x.shape();
    if y.nrows() != m {
        return Err(Error::DimensionMismatch(format!(
            "design has {m} rows but target has {}",
            y.nrows()
        )));
    }
    if m < k {
        return Err(Error::InsufficientData(format!(
            "{m} observations for {k} regressors"
        )));
    }
    let r = y.ncols();
    if k == 0 {
        return Ok(DMatrix::zeros(0, r));
    }
    let mut a = x.clone();
    let mut b = y.clone();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut diag = vec![0.0; k];
    let mut v = vec![0.0; m];
    let mut largest = 0.0_f64;

    for j in 0..k {
        // pivot on the largest remaining column norm
        let mut best = j;
        let mut best_norm = -1.0;
        for c in j..k {
            let col = a.column(c);
            let s: f64 = col.rows_range(j..m).iter().map(|t| t * t).sum();
            if s > best_norm {
                best_norm = s;
                best = c;
            }
        }
        if best != j {
            a.swap_columns(j, best);
            perm.swap(j, best);
        }
        let norm = best_norm.max(0.0).sqrt();
        if j == 0 {
            largest = norm;
        }
        if norm <= RANK_TOL * largest || norm == 0.0 {
            return Err(Error::SingularDesign { column: perm[j] });
        }
        let ajj = a[(j, j)];
        let alpha = if ajj >= 0.0 { -norm } else { norm };
        diag[j] = alpha;
        for i in j..m {
            v[i] = a[(i, j)];
        }
        v[j] -= alpha;
        let vtv: f64 = v[j..m].iter().map(|t| t * t).sum();
        if vtv == 0.0 {
            continue;
        }
        let scale = 2.0 / vtv;
        for c in (j + 1)..k {
            let mut dot = 0.0;
            for i in j..m {
                dot += v[i] * a[(i, c)];
            }
            let f = dot * scale;
            for i in j..m {
                a[(i, c)] -= f * v[i];
            }
        }
        for c in 0..r {
            let mut dot = 0.0;
            for i in j..m {
                dot += v[i] * b[(i, c)];
            }
            let f = dot * scale;
            for i in j..m {
                b[(i, c)] -= f * v[i];
            }
        }
    }

    let mut coef = DMatrix::zeros(k, r);
    for c in 0..r {
        let mut z = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = b[(i, c)];
            for l in (i + 1)..k {
                s -= a[(i, l)] * z[l];
            }
            z[i] = s / diag[i];
        }
        for i in 0..k {
            coef[(perm[i], c)] = z[i];
        }
    }
    Ok(coef)
}

/// Single right-hand-side convenience wrapper around [`lstsq`].
pub fn lstsq_vec(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let ym = DMatrix::from_column_slice(y.len(), 1, y.as_slice());
    let b = lstsq(x, &ym)?;
    Ok(b.column(0).into_owned())
}

/// Companion matrix of the lag polynomial `I - A_1 L - ... - A_p L^p`.
pub fn companion(ar: &[DMatrix<f64>]) -> DMatrix<f64> {
    let p = ar.len();
    if p == 0 {
        return DMatrix::zeros(0, 0);
    }
    let n = ar[0].nrows();
    let mut c = DMatrix::zeros(n * p, n * p);
    for (j, a) in ar.iter().enumerate() {
        c.view_mut((0, j * n), (n, n)).copy_from(a);
    }
    for i in n..n * p {
        c[(i, i - n)] = 1.0;
    }
    c
}

/// Largest eigenvalue modulus of the companion matrix; zero for `p = 0`.
pub fn spectral_radius(ar: &[DMatrix<f64>]) -> f64 {
    if ar.is_empty() {
        return 0.0;
    }
    let c = companion(ar);
    c.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let y = DVector::from_vec(vec![1.0, 3.0, 5.0, 7.0]);
        let b = lstsq_vec(&x, &y).unwrap();
        assert_relative_eq!(b[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(b[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn duplicate_column_is_named() {
        let x = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.5, 0.5, 1.0, 1.5, 1.5, 1.0, -2.0, -2.0, 1.0, 3.0, 3.0],
        );
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        match lstsq_vec(&x, &y) {
            Err(Error::SingularDesign { column }) => assert!(column == 1 || column == 2),
            other => panic!("expected singular design, got {other:?}"),
        }
    }

    #[test]
    fn companion_radius_of_scalar_ar1() {
        let a = vec![DMatrix::from_element(1, 1, -0.7)];
        assert_relative_eq!(spectral_radius(&a), 0.7, epsilon = 1e-12);
    }
}
