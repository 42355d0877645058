//! Ordinary least squares with an intercept.

use super::dist::t_two_sided_p;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub const INTERCEPT: &str = "intercept";

/// Columns whose scaled QR pivot falls below this are treated as collinear.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub response: String,
    pub predictors: Vec<String>,
    /// Intercept first, then predictors in order.
    pub coefficients: Vec<Coefficient>,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub n: usize,
    pub residual_dof: usize,
}

impl RegressionFit {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

/// Fits `y = b0 + Σ bj xj` by least squares.
///
/// Coefficients come from a Householder QR of the column-scaled design
/// matrix; standard errors use `σ² (XᵀX)⁻¹` with `σ² = SSR / (n − k − 1)` and
/// p-values are two-sided Student-t.
pub fn ols_fit(response: &str, predictors: &[(&str, &[f64])], y: &[f64]) -> Result<RegressionFit> {
    let n = y.len();
    let k = predictors.len();
    if n < k + 2 {
        return Err(Error::TooFewObservations { n, k });
    }
    for (name, col) in predictors {
        if col.len() != n {
            return Err(Error::Dimension(format!(
                "{name} has {} rows, response has {n}",
                col.len()
            )));
        }
    }
    if y.iter()
        .chain(predictors.iter().flat_map(|(_, c)| c.iter()))
        .any(|v| !v.is_finite())
    {
        return Err(Error::Dimension("non-finite value in regression input".into()));
    }

    let p = k + 1;
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { predictors[j - 1].1[i] });
    let norms: Vec<f64> = (0..p).map(|j| design.column(j).norm()).collect();
    if norms.contains(&0.0) {
        return Err(Error::RankDeficient);
    }
    let mut scaled = design.clone();
    for (j, s) in norms.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / s);
    }

    let qr = scaled.qr();
    let r = qr.r();
    if (0..p).any(|j| r[(j, j)].abs() < RANK_TOL) {
        return Err(Error::RankDeficient);
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta_scaled = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficient)?;
    let beta: Vec<f64> = (0..p).map(|j| beta_scaled[j] / norms[j]).collect();

    // (XᵀX)⁻¹ = D⁻¹ R⁻¹ R⁻ᵀ D⁻¹
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::RankDeficient)?;
    let cov_scaled = &r_inv * r_inv.transpose();

    let fitted = &design * DVector::from_column_slice(&beta);
    let ssr: f64 = (&yv - &fitted).iter().map(|e| e * e).sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let scale: f64 = y.iter().map(|v| v * v).sum();
    let r_squared = if sst > 1e-24 * scale { 1.0 - ssr / sst } else { 0.0 };
    let dof = n - p;
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / dof as f64;
    let sigma2 = ssr / dof as f64;

    let mut coefficients = Vec::with_capacity(p);
    for j in 0..p {
        let std_error = (sigma2 * cov_scaled[(j, j)]).sqrt() / norms[j];
        let t_stat = beta[j] / std_error;
        coefficients.push(Coefficient {
            name: if j == 0 {
                INTERCEPT.to_string()
            } else {
                predictors[j - 1].0.to_string()
            },
            estimate: beta[j],
            std_error,
            t_stat,
            p_value: t_two_sided_p(t_stat, dof as f64),
        });
    }

    Ok(RegressionFit {
        response: response.to_string(),
        predictors: predictors.iter().map(|(n, _)| n.to_string()).collect(),
        coefficients,
        r_squared,
        adj_r_squared,
        n,
        residual_dof: dof,
    })
}
