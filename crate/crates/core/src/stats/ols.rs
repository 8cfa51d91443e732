//! Ordinary least squares through a column-scaled SVD.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dist::{f_sf, t_two_sided_p};
use super::StatsError;

pub const INTERCEPT: &str = "Intercept";

/// Singular values below this fraction of the largest mark a rank deficiency.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    columns: Vec<String>,
    data: DMatrix<f64>,
    intercept: bool,
}

impl DesignMatrix {
    /// Builds an `n × p` design from named columns. With `intercept`, a
    /// leading column of ones named [`INTERCEPT`] is added.
    pub fn from_columns(names: Vec<String>, cols: &[Vec<f64>], intercept: bool) -> Result<Self, StatsError> {
        if names.len() != cols.len() {
            return Err(StatsError::DimensionMismatch(format!("{} names for {} columns", names.len(), cols.len())));
        }
        let n = cols.first().map_or(0, Vec::len);
        if let Some(c) = cols.iter().find(|c| c.len() != n) {
            return Err(StatsError::DimensionMismatch(format!("column of length {} in a design with {n} rows", c.len())));
        }
        if cols.iter().flatten().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        let offset = usize::from(intercept);
        let p = cols.len() + offset;
        let data = DMatrix::from_fn(n, p, |i, j| if j < offset { 1.0 } else { cols[j - offset][i] });
        let mut columns = Vec::with_capacity(p);
        if intercept {
            columns.push(INTERCEPT.to_string());
        }
        columns.extend(names);
        Ok(DesignMatrix { columns, data, intercept })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>], intercept: bool) -> Result<Self, StatsError> {
        let cols: Vec<Vec<f64>> = (0..names.len()).map(|j| rows.iter().map(|r| r.get(j).copied().unwrap_or(f64::NAN)).collect()).collect();
        if rows.iter().any(|r| r.len() != names.len()) {
            return Err(StatsError::DimensionMismatch("ragged rows".into()));
        }
        Self::from_columns(names, &cols, intercept)
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn has_intercept(&self) -> bool {
        self.intercept
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data.column(j).iter().copied().collect()
    }

    /// Predictor columns only, intercept removed.
    pub fn predictors(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let start = usize::from(self.intercept);
        (self.columns[start..].to_vec(), (start..self.ncols()).map(|j| self.column(j)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub columns: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    /// Overall F test; only for models with an intercept and a predictor.
    pub f: Option<f64>,
    pub f_p: Option<f64>,
    pub n: usize,
    pub df_resid: usize,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl RegressionFit {
    pub fn index(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    /// `(coef, se, t, p)` for a named column.
    pub fn term(&self, column: &str) -> Option<(f64, f64, f64, f64)> {
        self.index(column).map(|i| (self.coef[i], self.se[i], self.t[i], self.p[i]))
    }
}

pub fn ols_fit(x: &DesignMatrix, y: &[f64]) -> Result<RegressionFit, StatsError> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(StatsError::DimensionMismatch(format!("{n} design rows, {} responses", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    if p == 0 || n <= p {
        return Err(StatsError::InsufficientData { n, p });
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let sst_centered: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    if sst_centered == 0.0 {
        return Err(StatsError::ZeroVarianceResponse);
    }

    // unit-norm columns so the rank test does not depend on units
    let scale: Vec<f64> = (0..p).map(|j| x.data.column(j).norm()).collect();
    if let Some(j) = scale.iter().position(|s| *s == 0.0) {
        return Err(StatsError::Collinear {
            columns: vec![x.columns[j].clone()],
        });
    }
    let mut xs = x.data.clone();
    for (j, s) in scale.iter().enumerate() {
        xs.column_mut(j).unscale_mut(*s);
    }
    let svd = xs.svd(true, true);
    let (u, v_t, sv) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"), svd.singular_values);
    let s_max = sv.max();
    let null: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] < RANK_TOL * s_max).collect();
    if !null.is_empty() {
        let mut involved = vec![false; p];
        for &k in &null {
            let row = v_t.row(k);
            let peak = row.amax();
            for j in 0..p {
                if row[j].abs() > 1e-6 * peak {
                    involved[j] = true;
                }
            }
        }
        return Err(StatsError::Collinear {
            columns: (0..p).filter(|&j| involved[j]).map(|j| x.columns[j].clone()).collect(),
        });
    }

    let yv = DVector::from_column_slice(y);
    let uty = u.transpose() * &yv;
    let inv_s = sv.map(|s| 1.0 / s);
    let beta_scaled = v_t.transpose() * uty.component_mul(&inv_s);
    let coef: Vec<f64> = (0..p).map(|j| beta_scaled[j] / scale[j]).collect();

    let fitted = &x.data * DVector::from_column_slice(&coef);
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let df_resid = n - p;
    let sigma2 = ssr / df_resid as f64;

    // diag((XᵀX)⁻¹) = Σ_k V_jk² / σ_k², rescaled
    let se: Vec<f64> = (0..p)
        .map(|j| {
            let d: f64 = (0..sv.len()).map(|k| (v_t[(k, j)] * inv_s[k]).powi(2)).sum();
            (sigma2 * d).sqrt() / scale[j]
        })
        .collect();
    let t: Vec<f64> = coef.iter().zip(&se).map(|(b, s)| b / s).collect();
    let pv = t
        .iter()
        .map(|t| if t.is_nan() { Ok(f64::NAN) } else { t_two_sided_p(*t, df_resid as f64) })
        .collect::<Result<Vec<_>, _>>()?;

    let sst = if x.intercept { sst_centered } else { y.iter().map(|v| v * v).sum() };
    let r2 = 1.0 - ssr / sst;
    let df_total = if x.intercept { n - 1 } else { n };
    let adj_r2 = 1.0 - (1.0 - r2) * df_total as f64 / df_resid as f64;
    let (f, f_p) = if x.intercept && p > 1 {
        let df_model = (p - 1) as f64;
        let f = (r2 / df_model) / ((1.0 - r2) / df_resid as f64);
        let fp = if f.is_finite() { f_sf(f, df_model, df_resid as f64)? } else { 0.0 };
        (Some(f), Some(fp))
    } else {
        (None, None)
    };

    Ok(RegressionFit {
        columns: x.columns.clone(),
        coef,
        se,
        t,
        p: pv,
        r2,
        adj_r2,
        f,
        f_p,
        n,
        df_resid,
        residuals,
    })
}
