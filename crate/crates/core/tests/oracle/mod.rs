//! Independent reference computations shared by the integration and
//! acceptance tests. Nothing here calls into the solver paths it checks.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

pub struct Design {
    pub names: Vec<String>,
    /// Predictor columns, without the intercept.
    pub cols: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

/// Correlated Gaussian predictors and a noisy linear response with every
/// true coefficient bounded away from zero.
pub fn seeded_design(seed: u64, n: usize, p: usize) -> Design {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
    let mut cols = base.clone();
    for j in 1..p {
        let mix: f64 = rng.random_range(-0.6..0.6);
        let scale: f64 = rng.random_range(0.5..5.0);
        let shift: f64 = rng.random_range(-3.0..3.0);
        for i in 0..n {
            cols[j][i] = scale * (base[j][i] + mix * base[j - 1][i]) + shift;
        }
    }
    let beta: Vec<f64> = (0..=p)
        .map(|_| {
            let m: f64 = rng.random_range(0.5..2.0);
            if rng.random_bool(0.5) { m } else { -m }
        })
        .collect();
    let noise = Normal::new(0.0, rng.random_range(0.2..2.0)).unwrap();
    let y = (0..n)
        .map(|i| beta[0] + (0..p).map(|j| beta[j + 1] * cols[j][i]).sum::<f64>() + noise.sample(&mut rng))
        .collect();
    Design {
        names: (0..p).map(|j| format!("x{j}")).collect(),
        cols,
        y,
    }
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for c in 0..n {
        let pivot = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, pivot);
        inv.swap(c, pivot);
        let d = a[c][c];
        for j in 0..n {
            a[c][j] /= d;
            inv[c][j] /= d;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    for j in 0..n {
                        a[r][j] -= f * a[c][j];
                        inv[r][j] -= f * inv[c][j];
                    }
                }
            }
        }
    }
    inv
}

pub struct OracleFit {
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub r2: f64,
    pub adj_r2: f64,
    pub f: f64,
}

/// Intercept model solved from (XᵀX)β = Xᵀy with an explicit inverse.
pub fn normal_equations(cols: &[Vec<f64>], y: &[f64]) -> OracleFit {
    let n = y.len();
    let mut x: Vec<Vec<f64>> = vec![vec![1.0; n]];
    x.extend(cols.iter().cloned());
    let p = x.len();
    let xtx: Vec<Vec<f64>> = (0..p).map(|a| (0..p).map(|b| (0..n).map(|i| x[a][i] * x[b][i]).sum()).collect()).collect();
    let xty: Vec<f64> = (0..p).map(|a| (0..n).map(|i| x[a][i] * y[i]).sum()).collect();
    let inv = invert(xtx);
    let coef: Vec<f64> = (0..p).map(|a| (0..p).map(|b| inv[a][b] * xty[b]).sum()).collect();
    let ssr: f64 = (0..n)
        .map(|i| {
            let fitted: f64 = (0..p).map(|a| coef[a] * x[a][i]).sum();
            (y[i] - fitted).powi(2)
        })
        .sum();
    let mean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let s2 = ssr / (n - p) as f64;
    let r2 = 1.0 - ssr / sst;
    OracleFit {
        se: (0..p).map(|a| (s2 * inv[a][a]).sqrt()).collect(),
        coef,
        r2,
        adj_r2: 1.0 - (1.0 - r2) * (n - 1) as f64 / (n - p) as f64,
        f: (r2 / (p - 1) as f64) / ((1.0 - r2) / (n - p) as f64),
    }
}

/// Product-moment r from raw sums.
pub fn raw_sum_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

/// Two-sided p of r through the t statistic and a reference incomplete beta.
pub fn pearson_p_reference(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    statrs::function::beta::beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 { got.abs() } else { (got - want).abs() / want.abs() }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn sample_sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}
