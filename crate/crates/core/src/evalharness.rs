//! Gold-label resolution and classifier scoring.
//!
//! Annotations are merged per (review, aspect) by strict majority over all
//! annotators of that review, where an annotator who left the aspect blank
//! casts a "not mentioned" vote. Evaluation runs over flattened
//! (review, aspect) instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::absa::{Aspect, AspectSentimentSet, Polarity};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("annotation csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("annotation csv is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("annotation row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("no predictions for reviews: {}", .0.join(", "))]
    MissingPredictions(Vec<String>),
    #[error("no rows to score")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub review_id: String,
    pub annotator_id: u32,
    pub labels: BTreeMap<Aspect, Polarity>,
}

/// Reads the long-format annotation CSV
/// (`review_id,annotator_id,aspect,polarity`). A row with aspect `None`
/// records that the annotator saw the review and found no aspect.
pub fn read_annotations<R: Read>(reader: R) -> Result<Vec<AnnotationRecord>, EvalError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or(EvalError::MissingColumn(name))
    };
    let (c_review, c_ann, c_aspect, c_pol) = (col("review_id")?, col("annotator_id")?, col("aspect")?, col("polarity")?);

    let mut records: BTreeMap<(String, u32), BTreeMap<Aspect, Polarity>> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 2;
        let row = row?;
        let bad = |message: String| EvalError::BadRow { row: row_no, message };
        let field = |c: usize| row.get(c).unwrap_or("").trim();
        let review_id = field(c_review);
        if review_id.is_empty() {
            return Err(bad("empty review_id".into()));
        }
        let annotator: u32 = field(c_ann)
            .parse()
            .map_err(|_| bad(format!("bad annotator_id `{}`", field(c_ann))))?;
        let labels = records.entry((review_id.to_string(), annotator)).or_default();
        if field(c_aspect) == "None" {
            continue;
        }
        let aspect: Aspect = field(c_aspect).parse().map_err(bad)?;
        let polarity: Polarity = field(c_pol).parse().map_err(bad)?;
        if let Some(prev) = labels.insert(aspect, polarity) {
            if prev != polarity {
                return Err(bad(format!("conflicting labels for {aspect}")));
            }
        }
    }
    Ok(records
        .into_iter()
        .map(|((review_id, annotator_id), labels)| AnnotationRecord {
            review_id,
            annotator_id,
            labels,
        })
        .collect())
}

pub fn write_annotations<W: std::io::Write>(out: W, records: &[AnnotationRecord]) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["review_id", "annotator_id", "aspect", "polarity"])?;
    for r in records {
        if r.labels.is_empty() {
            w.write_record([r.review_id.as_str(), &r.annotator_id.to_string(), "None", "None"])?;
        }
        for (a, p) in &r.labels {
            w.write_record([r.review_id.as_str(), &r.annotator_id.to_string(), a.label(), p.as_str()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VoteOutcome {
    pub gold: BTreeMap<Aspect, Polarity>,
    pub unresolved: BTreeSet<Aspect>,
}

/// Majority vote over the records of a single review.
///
/// For each aspect labeled by at least one annotator, the options are the
/// three polarities and "not mentioned". An option wins only with more than
/// half of the votes; otherwise the aspect is unresolved.
pub fn majority_vote(records: &[AnnotationRecord]) -> VoteOutcome {
    let annotators: BTreeSet<u32> = records.iter().map(|r| r.annotator_id).collect();
    let k = annotators.len();
    let mut out = VoteOutcome::default();
    for aspect in Aspect::ALL {
        let mut votes: BTreeMap<Polarity, usize> = BTreeMap::new();
        for r in records {
            if let Some(p) = r.labels.get(&aspect) {
                *votes.entry(*p).or_default() += 1;
            }
        }
        let mentioned: usize = votes.values().sum();
        if mentioned == 0 {
            continue;
        }
        let absent = k - mentioned;
        if 2 * absent > k {
            continue;
        }
        match votes.iter().find(|(_, n)| 2 * **n > k) {
            Some((p, _)) => {
                out.gold.insert(aspect, *p);
            }
            None => {
                out.unresolved.insert(aspect);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldSet {
    pub entries: BTreeMap<(String, Aspect), Polarity>,
    pub unresolved: BTreeSet<(String, Aspect)>,
    /// Every annotated review, including ones without gold aspects.
    pub reviews: BTreeSet<String>,
}

impl GoldSet {
    pub fn from_annotations(records: &[AnnotationRecord]) -> GoldSet {
        let mut by_review: BTreeMap<&str, Vec<AnnotationRecord>> = BTreeMap::new();
        for r in records {
            by_review.entry(r.review_id.as_str()).or_default().push(r.clone());
        }
        let mut gold = GoldSet::default();
        for (review_id, recs) in by_review {
            let vote = majority_vote(&recs);
            for (a, p) in vote.gold {
                gold.entries.insert((review_id.to_string(), a), p);
            }
            for a in vote.unresolved {
                gold.unresolved.insert((review_id.to_string(), a));
            }
            gold.reviews.insert(review_id.to_string());
        }
        gold
    }

    /// Drops the given reviews entirely.
    pub fn without_reviews(&self, drop: &BTreeSet<String>) -> GoldSet {
        GoldSet {
            entries: self
                .entries
                .iter()
                .filter(|((r, _), _)| !drop.contains(r))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            unresolved: self.unresolved.iter().filter(|(r, _)| !drop.contains(r)).cloned().collect(),
            reviews: self.reviews.difference(drop).cloned().collect(),
        }
    }

    pub fn summary(&self) -> GoldSummary {
        let mut support = BTreeMap::new();
        for p in self.entries.values() {
            *support.entry(*p).or_insert(0usize) += 1;
        }
        GoldSummary {
            n_reviews: self.reviews.len(),
            n_instances: self.entries.len(),
            n_unresolved: self.unresolved.len(),
            n_instances_with_ties: self.entries.len() + self.unresolved.len(),
            support,
        }
    }
}

/// Resolved and tie-inclusive instance counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSummary {
    pub n_reviews: usize,
    pub n_instances: usize,
    pub n_unresolved: usize,
    pub n_instances_with_ties: usize,
    pub support: BTreeMap<Polarity, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatRow {
    pub review_id: String,
    pub aspect: Aspect,
    pub gold: Polarity,
    /// `None` when the prediction does not mention the aspect.
    pub predicted: Option<Polarity>,
}

/// One row per gold (review, aspect) entry.
pub fn flatten(gold: &GoldSet, predictions: &BTreeMap<String, AspectSentimentSet>) -> Result<Vec<FlatRow>, EvalError> {
    let missing: BTreeSet<&str> = gold
        .entries
        .keys()
        .map(|(r, _)| r.as_str())
        .filter(|r| !predictions.contains_key(*r))
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing.into_iter().map(str::to_owned).collect()));
    }
    Ok(gold
        .entries
        .iter()
        .map(|((review_id, aspect), g)| FlatRow {
            review_id: review_id.clone(),
            aspect: *aspect,
            gold: *g,
            predicted: predictions[review_id].labels.get(aspect).copied(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub predicted: usize,
    /// Some metric had a zero denominator and was set to 0.
    pub zero_division: bool,
}

impl ClassMetrics {
    pub fn zero_support(&self) -> bool {
        self.support == 0
    }
}

/// Rows are predictions (positive, negative, neutral, absent); columns are
/// gold classes (positive, negative, neutral).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 3]; 4],
}

impl ConfusionMatrix {
    pub const ROWS: [&'static str; 4] = ["positive", "negative", "neutral", "absent"];

    fn index(p: Polarity) -> usize {
        match p {
            Polarity::Positive => 0,
            Polarity::Negative => 1,
            Polarity::Neutral => 2,
        }
    }

    pub fn record(&mut self, gold: Polarity, predicted: Option<Polarity>) {
        let row = predicted.map_or(3, Self::index);
        self.counts[row][Self::index(gold)] += 1;
    }

    pub fn get(&self, predicted: Option<Polarity>, gold: Polarity) -> usize {
        self.counts[predicted.map_or(3, Self::index)][Self::index(gold)]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..3).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: BTreeMap<Polarity, ClassMetrics>,
    pub accuracy: f64,
    /// Averaged over classes with non-zero support.
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub confusion: ConfusionMatrix,
    pub n_rows: usize,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn score(rows: &[FlatRow]) -> Result<EvalReport, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut confusion = ConfusionMatrix::default();
    for row in rows {
        confusion.record(row.gold, row.predicted);
    }
    let mut classes = BTreeMap::new();
    for c in Polarity::ALL {
        let tp = confusion.get(Some(c), c);
        let predicted: usize = Polarity::ALL.iter().map(|g| confusion.get(Some(c), *g)).sum();
        let support: usize = (0..4).map(|r| confusion.counts[r][ConfusionMatrix::index(c)]).sum();
        let (precision, zp) = ratio(tp, predicted);
        let (recall, zr) = ratio(tp, support);
        let (f1, zf) = if precision + recall > 0.0 {
            (2.0 * precision * recall / (precision + recall), false)
        } else {
            (0.0, true)
        };
        classes.insert(
            c,
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
                predicted,
                zero_division: zp || zr || zf,
            },
        );
    }
    let supported: Vec<&ClassMetrics> = classes.values().filter(|m| !m.zero_support()).collect();
    let mean = |f: fn(&ClassMetrics) -> f64| supported.iter().map(|m| f(m)).sum::<f64>() / supported.len() as f64;
    Ok(EvalReport {
        accuracy: confusion.trace() as f64 / confusion.total() as f64,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        classes,
        confusion,
        n_rows: rows.len(),
    })
}

impl EvalReport {
    /// Aligned plain-text rendering.
    pub fn to_table(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{title}");
        let _ = writeln!(s, "{:<10} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support");
        for c in Polarity::ALL {
            let m = &self.classes[&c];
            let flag = if m.zero_support() {
                "  (no support)"
            } else if m.zero_division {
                "  (0/0)"
            } else {
                ""
            };
            let _ = writeln!(
                s,
                "{:<10} {:>9.3} {:>9.3} {:>9.3} {:>8}{flag}",
                c.as_str(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            );
        }
        let _ = writeln!(
            s,
            "{:<10} {:>9.3} {:>9.3} {:>9.3} {:>8}",
            "macro", self.macro_precision, self.macro_recall, self.macro_f1, self.n_rows
        );
        let _ = writeln!(s, "accuracy   {:.4} ({} rows)", self.accuracy, self.n_rows);
        let _ = writeln!(s);
        let _ = writeln!(s, "confusion (rows: predicted, columns: gold)");
        let _ = writeln!(s, "{:<10} {:>9} {:>9} {:>9}", "", "positive", "negative", "neutral");
        for (name, row) in ConfusionMatrix::ROWS.iter().zip(self.confusion.counts.iter()) {
            let _ = writeln!(s, "{:<10} {:>9} {:>9} {:>9}", name, row[0], row[1], row[2]);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Polarity::*;

    fn rec(review: &str, annotator: u32, labels: &[(Aspect, Polarity)]) -> AnnotationRecord {
        AnnotationRecord {
            review_id: review.into(),
            annotator_id: annotator,
            labels: labels.iter().copied().collect(),
        }
    }

    fn row(gold: Polarity, predicted: Option<Polarity>) -> FlatRow {
        FlatRow {
            review_id: "r".into(),
            aspect: Aspect::Finances,
            gold,
            predicted,
        }
    }

    #[test]
    fn strict_majority_wins() {
        let f = Aspect::Finances;
        let v = majority_vote(&[
            rec("r", 1, &[(f, Positive)]),
            rec("r", 2, &[(f, Positive)]),
            rec("r", 3, &[(f, Positive)]),
            rec("r", 4, &[(f, Negative)]),
        ]);
        assert_eq!(v.gold, BTreeMap::from([(f, Positive)]));
        assert!(v.unresolved.is_empty());
    }

    #[test]
    fn two_two_tie_is_unresolved() {
        let f = Aspect::Finances;
        let v = majority_vote(&[
            rec("r", 1, &[(f, Positive)]),
            rec("r", 2, &[(f, Positive)]),
            rec("r", 3, &[(f, Negative)]),
            rec("r", 4, &[(f, Negative)]),
        ]);
        assert!(v.gold.is_empty());
        assert_eq!(v.unresolved, BTreeSet::from([f]));
    }

    #[test]
    fn absence_majority_excludes() {
        let f = Aspect::Finances;
        let v = majority_vote(&[rec("r", 1, &[(f, Positive)]), rec("r", 2, &[]), rec("r", 3, &[]), rec("r", 4, &[])]);
        assert_eq!(v, VoteOutcome::default());
    }

    #[test]
    fn hand_computed_confusion() {
        let mut rows = Vec::new();
        rows.extend((0..8).map(|_| row(Positive, Some(Positive))));
        rows.extend((0..2).map(|_| row(Positive, Some(Negative))));
        rows.extend((0..5).map(|_| row(Negative, Some(Negative))));
        let r = score(&rows).unwrap();
        let pos = r.classes[&Positive];
        assert_eq!(pos.precision, 1.0);
        assert_eq!(pos.recall, 0.8);
        assert!((pos.f1 - 0.888_888_888_9).abs() < 1e-9);
        assert_eq!(r.accuracy, 13.0 / 15.0);
        assert!(r.classes[&Neutral].zero_support());
        // macro excludes the unsupported neutral class
        let neg = r.classes[&Negative];
        assert!((r.macro_f1 - (pos.f1 + neg.f1) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn absent_prediction_is_a_miss() {
        let r = score(&[row(Negative, None), row(Negative, Some(Negative))]).unwrap();
        let neg = r.classes[&Negative];
        assert_eq!((neg.precision, neg.recall), (1.0, 0.5));
        assert_eq!(r.confusion.get(None, Negative), 1);
        assert_eq!(r.accuracy, 0.5);
    }

    #[test]
    fn flatten_rows() {
        let gold = GoldSet::from_annotations(&[rec("r1", 1, &[(Aspect::Finances, Negative)])]);
        let preds = BTreeMap::from([(
            "r1".to_string(),
            AspectSentimentSet::new("r1", BTreeMap::from([(Aspect::Finances, Negative)])),
        )]);
        assert_eq!(flatten(&gold, &preds).unwrap(), vec![FlatRow {
            review_id: "r1".into(),
            aspect: Aspect::Finances,
            gold: Negative,
            predicted: Some(Negative)
        }]);
        let none = BTreeMap::from([("r1".to_string(), AspectSentimentSet::none("r1"))]);
        assert_eq!(flatten(&gold, &none).unwrap()[0].predicted, None);
        assert!(matches!(flatten(&gold, &BTreeMap::new()), Err(EvalError::MissingPredictions(ids)) if ids == ["r1"]));
    }

    #[test]
    fn empty_rows_error() {
        assert!(matches!(score(&[]), Err(EvalError::Empty)));
    }

    #[test]
    fn annotation_csv_round_trip() {
        let records = vec![
            rec("r1", 1, &[(Aspect::Finances, Negative), (Aspect::InterpersonalFactors, Positive)]),
            rec("r1", 2, &[]),
        ];
        let mut buf = Vec::new();
        write_annotations(&mut buf, &records).unwrap();
        assert_eq!(read_annotations(buf.as_slice()).unwrap(), records);
        let bad = "review_id,annotator_id,aspect,polarity\nr1,1,Parking,positive\n";
        assert!(matches!(read_annotations(bad.as_bytes()), Err(EvalError::BadRow { row: 2, .. })));
    }

    fn polarity() -> impl Strategy<Value = Polarity> {
        proptest::sample::select(Polarity::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn accuracy_is_trace_over_total(pairs in proptest::collection::vec((polarity(), proptest::option::of(polarity())), 1..200)) {
            let rows: Vec<FlatRow> = pairs.iter().map(|(g, p)| row(*g, *p)).collect();
            let r = score(&rows).unwrap();
            prop_assert_eq!(r.accuracy, r.confusion.trace() as f64 / r.confusion.total() as f64);
            let support: usize = r.classes.values().map(|m| m.support).sum();
            prop_assert_eq!(support, rows.len());
            for m in r.classes.values() {
                let (lo, hi) = (m.precision.min(m.recall), m.precision.max(m.recall));
                prop_assert!(m.f1 >= lo - 1e-12 && m.f1 <= hi + 1e-12);
                for v in [m.precision, m.recall, m.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            let mut reversed = rows.clone();
            reversed.reverse();
            prop_assert_eq!(score(&reversed).unwrap(), r);
        }

        #[test]
        fn vote_is_permutation_invariant(
            labels in proptest::collection::vec(proptest::collection::btree_map(proptest::sample::select(Aspect::ALL.to_vec()), polarity(), 0..=5), 1..=4),
            seed in any::<u64>(),
        ) {
            let records: Vec<AnnotationRecord> = labels.into_iter().enumerate()
                .map(|(i, l)| AnnotationRecord { review_id: "r".into(), annotator_id: i as u32, labels: l })
                .collect();
            let mut shuffled = records.clone();
            let n = shuffled.len();
            shuffled.rotate_left((seed as usize) % n);
            if seed % 2 == 0 { shuffled.reverse(); }
            prop_assert_eq!(majority_vote(&records), majority_vote(&shuffled));
        }
    }
}
