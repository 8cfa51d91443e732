//! Pearson correlation and correlation matrices over facility profiles.

use serde::{Deserialize, Serialize};

use super::dist::beta_reg;
use super::StatsError;
use crate::absa::Aspect;
use crate::aggregate::FacilityAspectProfile;
use crate::corpus::Region;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    /// Two-sided, from a t statistic with n − 2 degrees of freedom.
    pub p: f64,
    pub n: usize,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::DimensionMismatch(format!("{} vs {} values", x.len(), y.len())));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewObservations(n));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::ZeroVariance("x".into()));
    }
    if syy == 0.0 {
        return Err(StatsError::ZeroVariance("y".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    // df / (df + t²) simplifies to 1 − r²
    let p = beta_reg(df / 2.0, 0.5, (1.0 - r) * (1.0 + r));
    Ok(CorrelationResult { r, p, n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    /// `None` for the pooled sample.
    pub region: Option<Region>,
    pub variables: Vec<String>,
    pub n: usize,
    /// `None` where a variable is constant in the sample.
    pub cells: Vec<Vec<Option<CorrelationResult>>>,
}

pub const RATING_VARIABLE: &str = "Rating";

fn matrix_for(region: Option<Region>, profiles: &[&FacilityAspectProfile]) -> CorrelationMatrix {
    let mut variables: Vec<String> = Aspect::ALL.iter().map(|a| a.table_label().to_string()).collect();
    variables.push(RATING_VARIABLE.into());
    let series: Vec<Vec<f64>> = Aspect::ALL
        .iter()
        .map(|a| profiles.iter().map(|p| p.mean(*a).unwrap_or(f64::NAN)).collect())
        .chain(std::iter::once(profiles.iter().map(|p| p.mean_rating).collect()))
        .collect();
    let k = series.len();
    let mut cells = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let cell = pearson(&series[i], &series[j]).ok().map(|mut c| {
                if i == j {
                    c.r = 1.0;
                    c.p = 0.0;
                }
                c
            });
            cells[i][j] = cell;
            cells[j][i] = cell;
        }
    }
    CorrelationMatrix {
        region,
        variables,
        n: profiles.len(),
        cells,
    }
}

/// Correlations among the five aspect means and the mean rating, over
/// facilities that have every aspect mean. With `by_region`, one matrix per
/// region; regions with fewer than 3 facilities are skipped and reported in
/// the second element.
pub fn corr_matrix(profiles: &[FacilityAspectProfile], by_region: bool) -> (Vec<CorrelationMatrix>, Vec<Region>) {
    let complete: Vec<&FacilityAspectProfile> =
        profiles.iter().filter(|p| Aspect::ALL.iter().all(|a| p.mean(*a).is_some())).collect();
    if !by_region {
        return if complete.len() < 3 { (vec![], vec![]) } else { (vec![matrix_for(None, &complete)], vec![]) };
    }
    let mut regions: Vec<Region> = complete.iter().map(|p| p.region).collect();
    regions.sort();
    regions.dedup();
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for region in regions {
        let members: Vec<&FacilityAspectProfile> = complete.iter().copied().filter(|p| p.region == region).collect();
        if members.len() < 3 {
            skipped.push(region);
        } else {
            out.push(matrix_for(Some(region), &members));
        }
    }
    (out, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn examples() {
        let r = pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(r.r, 1.0);
        assert_eq!(r.p, 0.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 0.0, 1.0]).unwrap().r, 0.0);
        assert_eq!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(StatsError::TooFewObservations(2)));
        assert!(matches!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatsError::ZeroVariance(_))));
    }

    fn profile(i: usize, region: Region) -> FacilityAspectProfile {
        let x = i as f64;
        let means = [(x * 0.37).sin(), (x * 0.11).cos(), (x * 0.53).sin(), (x * 0.29).cos(), (x * 0.71).sin()];
        FacilityAspectProfile {
            facility_id: format!("f{i}"),
            name: String::new(),
            region,
            latitude: 0.0,
            longitude: 0.0,
            mean_rating: means[0],
            aspect_mean: Aspect::ALL.iter().copied().zip(means).collect(),
            aspect_count: BTreeMap::new(),
            n_text_reviews: 10,
            meta_avg_rating: None,
        }
    }

    #[test]
    fn matrix_is_symmetric_with_unit_diagonal() {
        let mut profiles: Vec<_> = (0..30).map(|i| profile(i, Region::Fl)).collect();
        profiles.extend((30..32).map(|i| profile(i, Region::Dmv)));
        let (pooled, _) = corr_matrix(&profiles, false);
        let m = &pooled[0];
        assert_eq!(m.n, 32);
        for i in 0..6 {
            assert_eq!(m.cells[i][i].unwrap().r, 1.0);
            for j in 0..6 {
                assert_eq!(m.cells[i][j].unwrap().r, m.cells[j][i].unwrap().r);
            }
        }
        // rating was set equal to the interpersonal mean
        assert_eq!(m.cells[0][5].unwrap().r, 1.0);
        let (by_region, skipped) = corr_matrix(&profiles, true);
        assert_eq!(by_region.len(), 1);
        assert_eq!(by_region[0].region, Some(Region::Fl));
        assert_eq!(skipped, vec![Region::Dmv]);
    }
}
