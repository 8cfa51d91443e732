//! Variance inflation factors from the inverse correlation matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ols::DesignMatrix;
use super::StatsError;

const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifEntry {
    pub column: String,
    /// `f64::INFINITY` when the column is an exact linear combination of
    /// the others (or constant).
    pub vif: f64,
    pub infinite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    pub entries: Vec<VifEntry>,
}

impl VifReport {
    pub fn get(&self, column: &str) -> Option<&VifEntry> {
        self.entries.iter().find(|e| e.column == column)
    }
}

/// VIF of each predictor (the intercept column, if any, is ignored).
///
/// With Z the centered, unit-norm predictor matrix and Z = UΣVᵀ, the
/// diagonal of (ZᵀZ)⁻¹ is Σ_k V_jk² / σ_k², which equals 1/(1 − R²_j).
pub fn vif(x: &DesignMatrix) -> Result<VifReport, StatsError> {
    let (names, cols) = x.predictors();
    let (n, p) = (x.nrows(), cols.len());
    if p < 2 || n <= p {
        return Err(StatsError::InsufficientData { n, p });
    }
    let moments: Vec<(f64, f64)> = cols
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n as f64;
            (mean, c.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt())
        })
        .collect();
    let constant: Vec<bool> = moments.iter().map(|(_, norm)| *norm == 0.0).collect();
    let z = DMatrix::from_fn(n, p, |i, j| {
        let (mean, norm) = moments[j];
        if constant[j] {
            0.0
        } else {
            (cols[j][i] - mean) / norm
        }
    });
    let svd = z.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;
    let s_max = sv.max();

    let entries = (0..p)
        .map(|j| {
            let mut infinite = constant[j];
            let mut total = 0.0;
            for k in 0..sv.len() {
                let w = v_t[(k, j)];
                if sv[k] <= RANK_TOL * s_max {
                    if w.abs() > 1e-6 {
                        infinite = true;
                    }
                } else {
                    total += (w / sv[k]).powi(2);
                }
            }
            VifEntry {
                column: names[j].clone(),
                vif: if infinite { f64::INFINITY } else { total },
                infinite,
            }
        })
        .collect();
    Ok(VifReport { entries })
}
