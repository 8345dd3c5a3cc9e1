//! Ordinary least squares through a modified Gram-Schmidt QR factorization.

use serde::{Deserialize, Serialize};

use super::tdist::t_two_sided_p;
use crate::error::{Error, Result};

/// A column whose orthogonalized norm drops below this fraction of its
/// original norm is treated as linearly dependent on earlier columns.
const COLLINEARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    /// Column names, intercept first.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_values: Vec<f64>,
    pub p_values: Vec<f64>,
    /// `σ² (XᵀX)⁻¹`, row-major `p × p`.
    pub covariance: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    pub df_resid: usize,
    pub n: usize,
}

/// Fits `y = b0 + Σ bj xj` with an implicit intercept. `columns` are the
/// predictors, each of length `y.len()`.
pub fn ols(y: &[f64], columns: &[Vec<f64>], names: &[String]) -> Result<OlsFit> {
    let n = y.len();
    let p = columns.len() + 1;
    if columns.iter().any(|c| c.len() != n) || names.len() != columns.len() {
        return Err(Error::Validation("design columns differ in length".into()));
    }
    if n <= p {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {p} coefficients"
        )));
    }
    let mut all_names = vec!["(intercept)".to_string()];
    all_names.extend(names.iter().cloned());
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(p);
    q.push(vec![1.0; n]);
    q.extend(columns.iter().cloned());

    // Modified Gram-Schmidt: q becomes orthonormal, r upper triangular.
    let mut r = vec![vec![0.0; p]; p];
    for j in 0..p {
        let original = norm(&q[j]);
        for i in 0..j {
            let (head, tail) = q.split_at_mut(j);
            let rij = dot(&head[i], &tail[0]);
            r[i][j] = rij;
            for (v, u) in tail[0].iter_mut().zip(&head[i]) {
                *v -= rij * u;
            }
        }
        let rjj = norm(&q[j]);
        if original == 0.0 || rjj <= COLLINEARITY_TOL * original {
            return Err(Error::Collinearity { column: all_names[j].clone() });
        }
        r[j][j] = rjj;
        for v in q[j].iter_mut() {
            *v /= rjj;
        }
    }

    let qty: Vec<f64> = q.iter().map(|col| dot(col, y)).collect();
    let mut b = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = ((i + 1)..p).map(|k| r[i][k] * b[k]).sum();
        b[i] = (qty[i] - s) / r[i][i];
    }

    let residuals: Vec<f64> = (0..n)
        .map(|row| {
            let fitted = b[0] + columns.iter().zip(&b[1..]).map(|(c, bj)| c[row] * bj).sum::<f64>();
            y[row] - fitted
        })
        .collect();
    let sse = dot(&residuals, &residuals);
    let ybar = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let df_resid = n - p;
    let sigma2 = sse / df_resid as f64;

    // (XᵀX)⁻¹ = R⁻¹ R⁻ᵀ.
    let rinv = upper_inverse(&r);
    let covariance: Vec<Vec<f64>> = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| sigma2 * (i.max(j)..p).map(|k| rinv[i][k] * rinv[j][k]).sum::<f64>())
                .collect()
        })
        .collect();
    let std_errors: Vec<f64> = (0..p).map(|i| covariance[i][i].max(0.0).sqrt()).collect();
    let t_values: Vec<f64> = b
        .iter()
        .zip(&std_errors)
        .map(|(bi, se)| match (*se == 0.0, *bi == 0.0) {
            (true, true) => 0.0,
            (true, false) => bi.signum() * f64::INFINITY,
            _ => bi / se,
        })
        .collect();
    let p_values = t_values.iter().map(|t| t_two_sided_p(*t, df_resid as f64)).collect();
    Ok(OlsFit {
        names: all_names,
        coefficients: b,
        std_errors,
        t_values,
        p_values,
        covariance,
        residuals,
        r_squared: if sst > 0.0 { (1.0 - sse / sst).clamp(0.0, 1.0) } else { 0.0 },
        df_resid,
        n,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn upper_inverse(r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = r.len();
    let mut inv = vec![vec![0.0; p]; p];
    for j in 0..p {
        inv[j][j] = 1.0 / r[j][j];
        for i in (0..j).rev() {
            let s: f64 = ((i + 1)..=j).map(|k| r[i][k] * inv[k][j]).sum();
            inv[i][j] = -s / r[i][i];
        }
    }
    inv
}
