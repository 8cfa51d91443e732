mod oracle;

use oracle::{normal_equations, pearson_p_reference, raw_sum_pearson, rel_err, seeded_design};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ContinuousCDF, StudentsT};
use urgentcare_core::stats::{ols_fit, pearson, t_cdf, vif, DesignMatrix};

#[test]
fn ols_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for seed in 0..100u64 {
        let n = rng.random_range(50..=500);
        let p = rng.random_range(2..=12);
        let d = seeded_design(seed, n, p);
        let x = DesignMatrix::from_columns(d.names.clone(), &d.cols, true).unwrap();
        let fit = ols_fit(&x, &d.y).unwrap();
        let o = normal_equations(&d.cols, &d.y);
        for j in 0..=p {
            assert!(rel_err(fit.coef[j], o.coef[j]) < 1e-8, "seed {seed} coef {j}");
            assert!(rel_err(fit.se[j], o.se[j]) < 1e-8, "seed {seed} se {j}");
        }
        assert!(rel_err(fit.r2, o.r2) < 1e-8);
        assert!(rel_err(fit.adj_r2, o.adj_r2) < 1e-8);
        assert!(rel_err(fit.f.unwrap(), o.f) < 1e-8);
    }
}

#[test]
fn seeded_300_by_6() {
    let d = seeded_design(300, 300, 6);
    let x = DesignMatrix::from_columns(d.names.clone(), &d.cols, true).unwrap();
    let fit = ols_fit(&x, &d.y).unwrap();
    let o = normal_equations(&d.cols, &d.y);
    for j in 0..7 {
        assert!(rel_err(fit.coef[j], o.coef[j]) < 1e-8);
        assert!(rel_err(fit.se[j], o.se[j]) < 1e-8);
    }
    assert_eq!(fit.df_resid, 293);
}

/// R²_j from regressing column j on the others plus an intercept.
fn definitional_vif(cols: &[Vec<f64>]) -> Vec<f64> {
    (0..cols.len())
        .map(|j| {
            let others: Vec<Vec<f64>> = cols.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, c)| c.clone()).collect();
            let names = (0..others.len()).map(|k| format!("o{k}")).collect();
            let fit = ols_fit(&DesignMatrix::from_columns(names, &others, true).unwrap(), &cols[j]).unwrap();
            1.0 / (1.0 - fit.r2)
        })
        .collect()
}

#[test]
fn vif_matches_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for seed in 0..50u64 {
        let n = rng.random_range(40..=300);
        let p = rng.random_range(2..=8);
        let d = seeded_design(1000 + seed, n, p);
        let report = vif(&DesignMatrix::from_columns(d.names.clone(), &d.cols, false).unwrap()).unwrap();
        for (e, want) in report.entries.iter().zip(definitional_vif(&d.cols)) {
            assert!(!e.infinite);
            assert!(rel_err(e.vif, want) < 1e-8, "seed {seed}: {} vs {want}", e.vif);
            assert!(e.vif >= 1.0 - 1e-12);
        }
    }
}

#[test]
fn correlated_three_column_vif() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
    let b: Vec<f64> = a.iter().map(|v| 0.8 * v + 0.6 * rng.sample::<f64, _>(StandardNormal)).collect();
    let c: Vec<f64> = a.iter().zip(&b).map(|(u, v)| 0.3 * u - 0.5 * v + rng.sample::<f64, _>(StandardNormal)).collect();
    let cols = vec![a, b, c];
    let names = vec!["a".into(), "b".into(), "c".into()];
    let report = vif(&DesignMatrix::from_columns(names, &cols, false).unwrap()).unwrap();
    for (e, want) in report.entries.iter().zip(definitional_vif(&cols)) {
        assert!(rel_err(e.vif, want) < 1e-8);
        assert!(e.vif > 1.0);
    }
}

#[test]
fn pearson_matches_definitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(3..=400);
        let rho: f64 = rng.random_range(-0.95..0.95);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = x.iter().map(|v| rho * v + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
        let got = pearson(&x, &y).unwrap();
        let r = raw_sum_pearson(&x, &y);
        assert!((got.r - r).abs() <= 1e-12, "{} vs {r}", got.r);
        assert!((got.p - pearson_p_reference(r, n)).abs() <= 1e-8);
        assert_eq!(got.n, n);
    }
}

#[test]
fn t_cdf_against_reference() {
    for df in [1u32, 2, 3, 5, 10, 29, 30, 100, 493] {
        let reference = StudentsT::new(0.0, 1.0, f64::from(df)).unwrap();
        assert_eq!(t_cdf(0.0, f64::from(df)).unwrap(), 0.5);
        for k in -60..=60 {
            let t = f64::from(k) * 0.25;
            let got = t_cdf(t, f64::from(df)).unwrap();
            assert!((got - reference.cdf(t)).abs() <= 1e-10, "df {df} t {t}");
        }
    }
    for k in -200..=200 {
        let t = f64::from(k) * 0.1;
        let closed = 0.5 + t.atan() / std::f64::consts::PI;
        assert!((t_cdf(t, 1.0).unwrap() - closed).abs() <= 1e-10);
    }
    assert!((t_cdf(2.042, 30.0).unwrap() - 0.975).abs() < 1e-4);
}
