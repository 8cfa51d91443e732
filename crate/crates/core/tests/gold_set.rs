use std::collections::{BTreeMap, BTreeSet};

use urgentcare_core::absa::lexicon::Lexicon;
use urgentcare_core::absa::{AspectSentimentSet, Polarity};
use urgentcare_core::evalharness::{flatten, score, GoldSet};
use urgentcare_core::synth::{generate, SynthConfig};

#[test]
fn synthetic_gold_supports_match_brute_count() {
    let config = SynthConfig { n_facilities: 60, ..SynthConfig::default() };
    let corpus = generate(&config);
    let ids: BTreeSet<&str> = corpus.annotations.iter().map(|a| a.review_id.as_str()).collect();
    assert_eq!(ids.len(), 400);

    // strict majority per (review, aspect), counted by hand over raw annotations
    let mut votes: BTreeMap<(&str, &str), BTreeMap<&str, usize>> = BTreeMap::new();
    let mut annotators: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &corpus.annotations {
        *annotators.entry(a.review_id.as_str()).or_default() += 1;
        for (aspect, p) in &a.labels {
            *votes.entry((a.review_id.as_str(), aspect.label())).or_default().entry(p.as_str()).or_default() += 1;
        }
    }
    let mut brute: BTreeMap<&str, usize> = BTreeMap::new();
    for ((review, _), counts) in &votes {
        let k = annotators[review];
        if let Some((p, _)) = counts.iter().find(|(_, n)| 2 * **n > k) {
            *brute.entry(p).or_default() += 1;
        }
    }

    let gold = GoldSet::from_annotations(&corpus.annotations);
    let lex = Lexicon::builtin();
    let predictions: BTreeMap<String, AspectSentimentSet> = corpus
        .reviews
        .iter()
        .filter(|r| ids.contains(r.review_id.as_str()))
        .map(|r| (r.review_id.clone(), AspectSentimentSet::new(r.review_id.clone(), lex.classify(r.text.as_deref().unwrap()))))
        .collect();
    let rows = flatten(&gold, &predictions).unwrap();
    let report = score(&rows).unwrap();

    let total: usize = brute.values().sum();
    assert_eq!(rows.len(), total);
    for p in Polarity::ALL {
        let n = brute.get(p.as_str()).copied().unwrap_or(0);
        assert_eq!(report.classes[&p].support, n, "{p}");
        assert_eq!(rows.iter().filter(|r| r.gold == p).count(), n);
    }
    // positive dominates, neutral is rare
    assert!(brute["positive"] > brute["negative"] && brute["negative"] > brute.get("neutral").copied().unwrap_or(0));
}
