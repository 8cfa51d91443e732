use std::collections::{BTreeMap, BTreeSet};

use urgentcare_core::absa::lexicon::Lexicon;
use urgentcare_core::absa::{Aspect, AspectSentimentSet};
use urgentcare_core::aggregate::{apply_filter, facility_profiles, FilterPolicy, RatingSource};
use urgentcare_core::census::{join_covariates, CbgSource, CbgTable, Covariate, EnrichedProfile};
use urgentcare_core::corpus::{drop_textless, filter_region, filter_urgent_care, reviews_for, FacilitySet, Region, ReviewSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use urgentcare_core::aggregate::FacilityAspectProfile;
use urgentcare_core::census::CbgProfile;
use urgentcare_core::stats::{center, fit_interactions, fit_model1, fit_model2, sensitivity_run, StatsError};
use urgentcare_core::stats::models::interaction_name;
use urgentcare_core::synth::{generate, SynthConfig};

fn enriched_sample(config: &SynthConfig) -> Vec<EnrichedProfile> {
    let corpus = generate(config);
    let mut facilities = corpus.facilities.clone();
    facilities.sort_by(|a, b| a.facility_id.cmp(&b.facility_id));
    let all = FacilitySet { facilities, malformed: 0 };
    let urgent = filter_urgent_care(&all, "urgent care").unwrap();
    let kept = filter_region(&urgent, &BTreeSet::from([Region::Dmv, Region::Fl]));
    let reviews = drop_textless(&reviews_for(&ReviewSet { reviews: corpus.reviews.clone(), malformed: 0 }, &kept));
    let lex = Lexicon::builtin();
    let sentiments: BTreeMap<String, AspectSentimentSet> = reviews
        .reviews
        .iter()
        .map(|r| (r.review_id.clone(), AspectSentimentSet::new(r.review_id.clone(), lex.classify(r.text.as_deref().unwrap()))))
        .collect();
    let profiles = facility_profiles(&kept, &reviews, &sentiments, RatingSource::TextReviews).unwrap();
    let table = CbgTable {
        profiles: corpus.cbg_profiles.iter().map(|p| (p.cbg_id.clone(), p.clone())).collect(),
        rejected: 0,
    };
    join_covariates(&profiles.profiles, &table, CbgSource::Geometry(&corpus.geometries)).enriched
}

#[test]
fn model2_recovers_planted_coefficients() {
    let enriched = enriched_sample(&SynthConfig::default());
    let strict: Vec<EnrichedProfile> = enriched.iter().filter(|e| FilterPolicy::uniform(10).admits(&e.profile)).cloned().collect();
    assert_eq!(strict.len(), 500);
    let fit = fit_model2(&strict).unwrap();
    let (b, _, _, p) = fit.term(Aspect::InterpersonalFactors.table_label()).unwrap();
    assert!((1.5..=1.9).contains(&b) && p < 0.001);
    let (b, _, _, p) = fit.term(Aspect::OperationalEfficiency.table_label()).unwrap();
    assert!((0.2..=0.4).contains(&b) && p < 0.001);
    let (b, _, _, p) = fit.term(Covariate::PopulationDensity.table_label()).unwrap();
    assert!(b > 0.0 && p < 0.05);
    assert_eq!(fit.columns.len(), 13);
}

/// Profiles with uniform aspect means and covariates; the rating is
/// `rating(aspect means, raw covariates, z-scored density)` plus N(0, 0.05).
fn random_enriched(seed: u64, n: usize, rating: impl Fn(&[f64; 5], f64) -> f64) -> Vec<EnrichedProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).unwrap();
    let densities: Vec<f64> = (0..n).map(|_| rng.random_range(10.0..20_000.0)).collect();
    let dz = urgentcare_core::census::zscore("d", &densities).unwrap();
    (0..n)
        .map(|i| {
            let means: [f64; 5] = std::array::from_fn(|_| rng.random_range(-0.8..0.9));
            let profile = FacilityAspectProfile {
                facility_id: format!("f{i:04}"),
                name: String::new(),
                region: if i % 3 == 0 { Region::Dmv } else { Region::Fl },
                latitude: 0.0,
                longitude: 0.0,
                mean_rating: rating(&means, dz[i]) + noise.sample(&mut rng),
                aspect_mean: Aspect::ALL.iter().copied().zip(means).collect(),
                aspect_count: Aspect::ALL.iter().map(|a| (*a, rng.random_range(0..40u64))).collect(),
                n_text_reviews: 40,
                meta_avg_rating: None,
            };
            let cbg = CbgProfile {
                cbg_id: format!("{:012}", i),
                population_density: densities[i],
                median_income: rng.random_range(20_000.0..200_000.0),
                rent_to_income_ratio: rng.random_range(0.1..0.5),
                gini_index: rng.random_range(0.3..0.6),
                household_below_poverty_rate: rng.random_range(0.0..0.4),
                no_insurance_rate: rng.random_range(0.0..0.3),
                unemployment_rate: rng.random_range(0.0..0.2),
            };
            EnrichedProfile { profile, cbg }
        })
        .collect()
}

#[test]
fn model1_recovers_interpersonal_slope() {
    let sample = random_enriched(1, 300, |m, _| 3.0 + 1.7 * m[0]);
    let profiles: Vec<FacilityAspectProfile> = sample.into_iter().map(|e| e.profile).collect();
    let fit = fit_model1(&profiles).unwrap();
    let labels: Vec<&str> = Aspect::ALL.iter().map(|a| a.table_label()).collect();
    assert_eq!(&fit.columns[1..], labels.as_slice());
    let (b, _, _, p) = fit.term("Interpersonal Factors").unwrap();
    assert!((1.6..=1.8).contains(&b) && p < 0.001);
}

#[test]
fn model1_errors() {
    let mut profiles: Vec<FacilityAspectProfile> = random_enriched(2, 40, |_, _| 4.0).into_iter().map(|e| e.profile).collect();
    for p in &mut profiles {
        p.mean_rating = 4.0;
    }
    assert_eq!(fit_model1(&profiles), Err(StatsError::ZeroVarianceResponse));
    let five: Vec<FacilityAspectProfile> = random_enriched(3, 5, |m, _| m[0]).into_iter().map(|e| e.profile).collect();
    assert_eq!(fit_model1(&five), Err(StatsError::InsufficientData { n: 5, p: 6 }));
    let mut missing = random_enriched(4, 30, |m, _| m[0]).into_iter().map(|e| e.profile).collect::<Vec<_>>();
    missing[3].aspect_mean.remove(&Aspect::Finances);
    assert!(matches!(fit_model1(&missing), Err(StatsError::MissingAspect { aspect: Aspect::Finances, .. })));
}

#[test]
fn model2_layout_and_standardized_covariates() {
    let sample = random_enriched(5, 200, |m, dz| 3.0 + 1.7 * m[0] + 0.02 * dz);
    let (x, _) = urgentcare_core::stats::model2_design(&sample, &Aspect::ALL).unwrap();
    let mut expected = vec!["Intercept".to_string()];
    expected.extend(Aspect::ALL.iter().map(|a| a.table_label().to_string()));
    expected.extend(Covariate::ALL.iter().map(|c| c.table_label().to_string()));
    assert_eq!(x.columns(), expected.as_slice());
    for j in 6..13 {
        let col = x.column(j);
        assert!((col.iter().sum::<f64>() / col.len() as f64).abs() <= 1e-12);
    }
    let fit = fit_model2(&sample).unwrap();
    let (g, _, _, p) = fit.term("Population Density").unwrap();
    assert!(g > 0.0 && p < 0.05);
}

#[test]
fn unrelated_covariates_are_rarely_significant() {
    let mut significant = 0;
    let mut tests = 0;
    for seed in 0..100 {
        let sample = random_enriched(100 + seed, 500, |m, _| 3.0 + 1.7 * m[0] + 0.3 * m[2]);
        let fit = fit_model2(&sample).unwrap();
        for c in Covariate::ALL {
            tests += 1;
            if fit.term(c.table_label()).unwrap().3 < 0.05 {
                significant += 1;
            }
        }
    }
    // 700 tests at level 0.05: expect 35, sd about 5.8
    let rate = f64::from(significant) / f64::from(tests);
    assert!((0.02..=0.08).contains(&rate), "false positive rate {rate}");
}

#[test]
fn interaction_terms() {
    let mut clean = 0;
    for seed in 0..100 {
        let sample = random_enriched(300 + seed, 500, |m, dz| 3.0 + 1.7 * m[0] + 0.3 * m[2] + 0.02 * dz);
        let fit = fit_interactions(&sample).unwrap();
        let ps: Vec<f64> = fit.p[fit.p.len() - 3..].to_vec();
        if ps.iter().all(|p| *p > 0.05) {
            clean += 1;
        }
    }
    // three independent 5% tests: about 86% of runs are clean
    assert!(clean >= 75, "{clean} clean runs");

    let sample = random_enriched(9, 500, |m, dz| 3.0 + 1.7 * m[0] + 0.3 * m[2] + 0.02 * dz);
    let ip: Vec<f64> = sample.iter().map(|e| e.profile.mean(Aspect::InterpersonalFactors).unwrap()).collect();
    let oe: Vec<f64> = sample.iter().map(|e| e.profile.mean(Aspect::OperationalEfficiency).unwrap()).collect();
    let (ci, co) = (center(&ip), center(&oe));
    let product_mean = ci.iter().zip(&co).map(|(a, b)| a * b).sum::<f64>() / ci.len() as f64;
    // the sample covariance of the centered terms, generally nonzero
    assert!(product_mean.abs() > 1e-6);
    let fit = fit_interactions(&sample).unwrap();
    let name = interaction_name("Interpersonal Factors", "Operational Efficiency");
    assert!(fit.index(&name).is_some());
    assert_eq!(fit.columns.len(), 16);
}

#[test]
fn planted_interaction_is_recovered() {
    let effect = 0.05;
    let sample = random_enriched(17, 500, |m, dz| {
        let ci = m[0] - 0.05;
        3.0 + 1.7 * m[0] + 0.3 * m[2] + 0.02 * dz + effect * ci * dz
    });
    let fit = fit_interactions(&sample).unwrap();
    let (b, se, _, _) = fit.term(&interaction_name("Interpersonal Factors", "Population Density")).unwrap();
    assert!((b - effect).abs() <= 2.0 * se, "{b} ± {se}");
}

#[test]
fn sensitivity_direction_on_synthetic_corpus() {
    let config = SynthConfig { finance_coverage: 0.3, ..SynthConfig::default() };
    let enriched = enriched_sample(&config);
    let run = sensitivity_run(&enriched, &FilterPolicy::uniform(10), &FilterPolicy::relaxed_finances(10)).unwrap();
    assert!(run.n_relaxed > run.n_strict);
    assert_eq!(run.relaxed.columns.len(), 12);
    assert!(run.relaxed.index("Finances").is_none());
    assert!(run.strict.term("Interpersonal Factors").unwrap().3 < 0.001);
    assert!(run.relaxed.term("Interpersonal Factors").unwrap().3 < 0.001);
    assert_eq!(apply_filter(&enriched.iter().map(|e| e.profile.clone()).collect::<Vec<_>>(), &FilterPolicy::uniform(10)).len(), run.n_strict);

    let mut bad = FilterPolicy::relaxed_finances(10);
    bad.min_per_aspect.insert(Aspect::TechnicalQuality, 3);
    assert!(matches!(sensitivity_run(&enriched, &FilterPolicy::uniform(10), &bad), Err(StatsError::InvalidPolicy(_))));
}
