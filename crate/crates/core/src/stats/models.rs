//! Rating models over facility profiles.
//!
//! Model 1 regresses the mean star rating on the five aspect means. Model 2
//! adds the seven block-group covariates, z-scored over the fitted sample.

use serde::{Deserialize, Serialize};

use super::ols::{ols_fit, DesignMatrix, RegressionFit};
use super::StatsError;
use crate::absa::Aspect;
use crate::aggregate::{FacilityAspectProfile, FilterPolicy};
use crate::census::{self, CensusError, Covariate, EnrichedProfile};

/// Subtract the mean; a second pass removes rounding left by the first.
pub fn center(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return vec![];
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let shifted: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let drift = shifted.iter().sum::<f64>() / n;
    shifted.iter().map(|v| v - drift).collect()
}

/// `***` below 0.001, `**` below 0.05.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.05 {
        "**"
    } else {
        ""
    }
}

fn zscore(name: &str, values: &[f64]) -> Result<Vec<f64>, StatsError> {
    census::zscore(name, values).map_err(|e| match e {
        CensusError::TooFewValues(_) => StatsError::InsufficientData { n: values.len(), p: 1 },
        _ => StatsError::ZeroVariance(name.to_string()),
    })
}

fn aspect_column<'a>(
    profiles: impl Iterator<Item = &'a FacilityAspectProfile>,
    aspect: Aspect,
) -> Result<Vec<f64>, StatsError> {
    profiles
        .map(|p| {
            p.mean(aspect).ok_or_else(|| StatsError::MissingAspect {
                facility_id: p.facility_id.clone(),
                aspect,
            })
        })
        .collect()
}

pub fn fit_model1(profiles: &[FacilityAspectProfile]) -> Result<RegressionFit, StatsError> {
    let cols = Aspect::ALL
        .iter()
        .map(|a| aspect_column(profiles.iter(), *a))
        .collect::<Result<Vec<_>, _>>()?;
    let names = Aspect::ALL.iter().map(|a| a.table_label().to_string()).collect();
    let x = DesignMatrix::from_columns(names, &cols, true)?;
    let y: Vec<f64> = profiles.iter().map(|p| p.mean_rating).collect();
    ols_fit(&x, &y)
}

/// Design for the chosen aspects followed by all seven z-scored covariates,
/// plus the mean-rating response.
pub fn model2_design(enriched: &[EnrichedProfile], aspects: &[Aspect]) -> Result<(DesignMatrix, Vec<f64>), StatsError> {
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for a in aspects {
        names.push(a.table_label().to_string());
        cols.push(aspect_column(enriched.iter().map(|e| &e.profile), *a)?);
    }
    for c in Covariate::ALL {
        let raw: Vec<f64> = enriched.iter().map(|e| e.cbg.get(c)).collect();
        names.push(c.table_label().to_string());
        cols.push(zscore(c.key(), &raw)?);
    }
    let x = DesignMatrix::from_columns(names, &cols, true)?;
    Ok((x, enriched.iter().map(|e| e.profile.mean_rating).collect()))
}

pub fn fit_model2(enriched: &[EnrichedProfile]) -> Result<RegressionFit, StatsError> {
    let (x, y) = model2_design(enriched, &Aspect::ALL)?;
    ols_fit(&x, &y)
}

pub fn interaction_name(a: &str, b: &str) -> String {
    format!("{a} × {b}")
}

/// Model 2 with centered aspect means and three products of centered terms:
/// interpersonal × operational efficiency, interpersonal × density and
/// operational efficiency × density.
pub fn fit_interactions(enriched: &[EnrichedProfile]) -> Result<RegressionFit, StatsError> {
    let (x, y) = model2_design(enriched, &Aspect::ALL)?;
    let (mut names, mut cols) = x.predictors();
    for (name, col) in names.iter().zip(cols.iter_mut()) {
        if Aspect::ALL.iter().any(|a| a.table_label() == name) {
            *col = center(col);
        }
    }
    let find = |label: &str| names.iter().position(|n| n == label).expect("column present");
    let ip = find(Aspect::InterpersonalFactors.table_label());
    let oe = find(Aspect::OperationalEfficiency.table_label());
    let dens = find(Covariate::PopulationDensity.table_label());
    let product = |i: usize, j: usize| -> Vec<f64> { cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).collect() };
    let extra = [(ip, oe), (ip, dens), (oe, dens)].map(|(i, j)| (interaction_name(&names[i], &names[j]), product(i, j)));
    for (name, col) in extra {
        names.push(name);
        cols.push(col);
    }
    ols_fit(&DesignMatrix::from_columns(names, &cols, true)?, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub strict: RegressionFit,
    /// Finances excluded, fitted on the larger relaxed sample.
    pub relaxed: RegressionFit,
    pub n_strict: usize,
    pub n_relaxed: usize,
}

/// Fits Model 2 on the strict sample and Model 2 without Finances on the
/// relaxed sample. The relaxed policy may differ from the strict one only by
/// a lower Finances threshold.
pub fn sensitivity_run(
    enriched: &[EnrichedProfile],
    strict: &FilterPolicy,
    relaxed: &FilterPolicy,
) -> Result<SensitivityResult, StatsError> {
    for a in Aspect::ALL {
        let (s, r) = (strict.threshold(a), relaxed.threshold(a));
        let ok = if a == Aspect::Finances { r <= s } else { r == s };
        if !ok {
            return Err(StatsError::InvalidPolicy(format!("{} threshold {s} vs {r}", a.label())));
        }
    }
    let strict_sample: Vec<EnrichedProfile> = enriched.iter().filter(|e| strict.admits(&e.profile)).cloned().collect();
    let relaxed_sample: Vec<EnrichedProfile> = enriched.iter().filter(|e| relaxed.admits(&e.profile)).cloned().collect();
    let strict_fit = fit_model2(&strict_sample)?;
    let without_finances: Vec<Aspect> = Aspect::ALL.into_iter().filter(|a| *a != Aspect::Finances).collect();
    let (x, y) = model2_design(&relaxed_sample, &without_finances)?;
    Ok(SensitivityResult {
        strict: strict_fit,
        relaxed: ols_fit(&x, &y)?,
        n_strict: strict_sample.len(),
        n_relaxed: relaxed_sample.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_examples() {
        assert_eq!(center(&[1.0, 2.0, 3.0]), vec![-1.0, 0.0, 1.0]);
        assert_eq!(center(&[7.0]), vec![0.0]);
    }

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.0009), "***");
        assert_eq!(stars(0.001), "**");
        assert_eq!(stars(0.049), "**");
        assert_eq!(stars(0.05), "");
    }
}
