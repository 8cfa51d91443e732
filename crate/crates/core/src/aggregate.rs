//! Per-facility and per-region roll-ups of review sentiment.
//!
//! Facility profiles feed the regression models, so aspect means are
//! per-facility averages. Regional summaries are review-weighted: each
//! region's aspect mean is taken over the concatenated review scores, not
//! over facility means.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::absa::{polarity_to_score, Aspect, AspectSentimentSet};
use crate::corpus::{FacilitySet, Region, Review, ReviewSet};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AggregateError {
    #[error("sentiment record for unknown review `{0}`")]
    UnknownReview(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityAspectProfile {
    pub facility_id: String,
    pub name: String,
    pub region: Region,
    pub latitude: f64,
    pub longitude: f64,
    pub mean_rating: f64,
    /// Present only for aspects with at least one mention.
    pub aspect_mean: BTreeMap<Aspect, f64>,
    pub aspect_count: BTreeMap<Aspect, u64>,
    pub n_text_reviews: u64,
    pub meta_avg_rating: Option<f64>,
}

impl FacilityAspectProfile {
    pub fn count(&self, aspect: Aspect) -> u64 {
        self.aspect_count.get(&aspect).copied().unwrap_or(0)
    }

    pub fn mean(&self, aspect: Aspect) -> Option<f64> {
        self.aspect_mean.get(&aspect).copied()
    }
}

/// Which reviews feed `mean_rating`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatingSource {
    #[default]
    TextReviews,
    AllReviews,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileOutput {
    /// Sorted by facility id.
    pub profiles: Vec<FacilityAspectProfile>,
    /// Facilities without any text review.
    pub omitted_no_text: usize,
    /// Text reviews with no usable sentiment record.
    pub unclassified_reviews: usize,
}

fn scored_reviews<'a>(
    reviews: &'a ReviewSet,
    sentiments: &'a BTreeMap<String, AspectSentimentSet>,
) -> Result<BTreeMap<&'a str, &'a Review>, AggregateError> {
    let by_id: BTreeMap<&str, &Review> = reviews.reviews.iter().map(|r| (r.review_id.as_str(), r)).collect();
    if let Some(unknown) = sentiments.keys().find(|k| !by_id.contains_key(k.as_str())) {
        return Err(AggregateError::UnknownReview(unknown.clone()));
    }
    Ok(by_id)
}

pub fn facility_profiles(
    facilities: &FacilitySet,
    reviews: &ReviewSet,
    sentiments: &BTreeMap<String, AspectSentimentSet>,
    rating_source: RatingSource,
) -> Result<ProfileOutput, AggregateError> {
    scored_reviews(reviews, sentiments)?;
    let mut by_facility: BTreeMap<&str, Vec<&Review>> = BTreeMap::new();
    for r in &reviews.reviews {
        by_facility.entry(r.facility_id.as_str()).or_default().push(r);
    }

    let mut out = ProfileOutput::default();
    for f in &facilities.facilities {
        let all = by_facility.get(f.facility_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        let text: Vec<&Review> = all.iter().copied().filter(|r| r.has_text()).collect();
        if text.is_empty() {
            out.omitted_no_text += 1;
            continue;
        }
        let rated: &[&Review] = match rating_source {
            RatingSource::TextReviews => &text,
            RatingSource::AllReviews => all,
        };
        let mean_rating = rated.iter().map(|r| f64::from(r.rating)).sum::<f64>() / rated.len() as f64;

        let mut sums: BTreeMap<Aspect, f64> = BTreeMap::new();
        let mut counts: BTreeMap<Aspect, u64> = Aspect::ALL.iter().map(|a| (*a, 0)).collect();
        for r in &text {
            let Some(set) = sentiments.get(&r.review_id) else {
                out.unclassified_reviews += 1;
                continue;
            };
            for (a, p) in &set.labels {
                *sums.entry(*a).or_default() += polarity_to_score(*p);
                *counts.entry(*a).or_default() += 1;
            }
        }
        let aspect_mean = sums.iter().map(|(a, s)| (*a, s / counts[a] as f64)).collect();
        out.profiles.push(FacilityAspectProfile {
            facility_id: f.facility_id.clone(),
            name: f.name.clone(),
            region: f.region,
            latitude: f.latitude,
            longitude: f.longitude,
            mean_rating,
            aspect_mean,
            aspect_count: counts,
            n_text_reviews: text.len() as u64,
            meta_avg_rating: f.meta_avg_rating,
        });
    }
    Ok(out)
}

/// Minimum number of mentions per aspect. Aspects missing from the map have
/// no threshold.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub min_per_aspect: BTreeMap<Aspect, u64>,
}

impl FilterPolicy {
    pub fn uniform(min: u64) -> Self {
        Self {
            min_per_aspect: Aspect::ALL.iter().map(|a| (*a, min)).collect(),
        }
    }

    /// `uniform(min)` with the Finances threshold removed.
    pub fn relaxed_finances(min: u64) -> Self {
        let mut p = Self::uniform(min);
        p.min_per_aspect.insert(Aspect::Finances, 0);
        p
    }

    pub fn threshold(&self, aspect: Aspect) -> u64 {
        self.min_per_aspect.get(&aspect).copied().unwrap_or(0)
    }

    pub fn admits(&self, profile: &FacilityAspectProfile) -> bool {
        Aspect::ALL.iter().all(|a| profile.count(*a) >= self.threshold(*a))
    }
}

pub fn apply_filter(profiles: &[FacilityAspectProfile], policy: &FilterPolicy) -> Vec<FacilityAspectProfile> {
    profiles.iter().filter(|p| policy.admits(p)).cloned().collect()
}

/// Box-plot statistics with Tukey fences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxPlot {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    /// Most extreme observations inside the fences.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile of sorted data (the default in R and NumPy).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxPlot {
    pub fn from_values(values: &[f64]) -> Option<BoxPlot> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let (q1, median, q3) = (quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75));
        let iqr = q3 - q1;
        let (lower_fence, upper_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = v.iter().copied().filter(|x| (lower_fence..=upper_fence).contains(x)).collect();
        Some(BoxPlot {
            n: v.len(),
            min: v[0],
            q1,
            median,
            q3,
            max: v[v.len() - 1],
            lower_fence,
            upper_fence,
            whisker_low: inside.first().copied().unwrap_or(q1),
            whisker_high: inside.last().copied().unwrap_or(q3),
            outliers: v.iter().copied().filter(|x| !(lower_fence..=upper_fence).contains(x)).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectRegionStats {
    /// Review-weighted mean score; `None` when no review mentions the aspect.
    pub mean_score: Option<f64>,
    pub n_reviews: u64,
    /// Distribution of facility-level aspect means.
    pub facility_means: Option<BoxPlot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionAspectSummary {
    pub region: Region,
    pub n_facilities: usize,
    pub n_text_reviews: u64,
    /// Review-weighted mean star rating.
    pub mean_rating: f64,
    pub facility_ratings: Option<BoxPlot>,
    pub aspects: BTreeMap<Aspect, AspectRegionStats>,
}

pub fn region_summary(
    profiles: &[FacilityAspectProfile],
    reviews: &ReviewSet,
    sentiments: &BTreeMap<String, AspectSentimentSet>,
) -> Result<Vec<RegionAspectSummary>, AggregateError> {
    scored_reviews(reviews, sentiments)?;
    let region_of: BTreeMap<&str, Region> = profiles.iter().map(|p| (p.facility_id.as_str(), p.region)).collect();
    let regions: BTreeSet<Region> = region_of.values().copied().collect();

    let mut out = Vec::new();
    for region in regions {
        let members: Vec<&FacilityAspectProfile> = profiles.iter().filter(|p| p.region == region).collect();
        let mut rating_sum = 0.0;
        let mut n_text = 0u64;
        let mut sums: BTreeMap<Aspect, (f64, u64)> = BTreeMap::new();
        for r in &reviews.reviews {
            if region_of.get(r.facility_id.as_str()) != Some(&region) || !r.has_text() {
                continue;
            }
            rating_sum += f64::from(r.rating);
            n_text += 1;
            if let Some(set) = sentiments.get(&r.review_id) {
                for (a, p) in &set.labels {
                    let e = sums.entry(*a).or_default();
                    e.0 += polarity_to_score(*p);
                    e.1 += 1;
                }
            }
        }
        let aspects = Aspect::ALL
            .iter()
            .map(|a| {
                let (sum, n) = sums.get(a).copied().unwrap_or((0.0, 0));
                let means: Vec<f64> = members.iter().filter_map(|p| p.mean(*a)).collect();
                (
                    *a,
                    AspectRegionStats {
                        mean_score: (n > 0).then(|| sum / n as f64),
                        n_reviews: n,
                        facility_means: BoxPlot::from_values(&means),
                    },
                )
            })
            .collect();
        let ratings: Vec<f64> = members.iter().map(|p| p.mean_rating).collect();
        out.push(RegionAspectSummary {
            region,
            n_facilities: members.len(),
            n_text_reviews: n_text,
            mean_rating: if n_text > 0 { rating_sum / n_text as f64 } else { f64::NAN },
            facility_ratings: BoxPlot::from_values(&ratings),
            aspects,
        });
    }
    Ok(out)
}

/// CSV with one row per facility.
pub fn write_profiles_csv<W: std::io::Write>(out: W, profiles: &[FacilityAspectProfile]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "facility_id".to_string(),
        "name".into(),
        "region".into(),
        "latitude".into(),
        "longitude".into(),
        "mean_rating".into(),
        "n_text_reviews".into(),
    ];
    for a in Aspect::ALL {
        header.push(format!("{}_mean", a.key()));
        header.push(format!("{}_count", a.key()));
    }
    w.write_record(&header)?;
    for p in profiles {
        let mut row = vec![
            p.facility_id.clone(),
            p.name.clone(),
            p.region.to_string(),
            p.latitude.to_string(),
            p.longitude.to_string(),
            p.mean_rating.to_string(),
            p.n_text_reviews.to_string(),
        ];
        for a in Aspect::ALL {
            row.push(p.mean(a).map(|m| m.to_string()).unwrap_or_default());
            row.push(p.count(a).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
