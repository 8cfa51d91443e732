//! Aspect-based sentiment classification of review text.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

mod backend;
pub mod lexicon;
mod parse;
mod prompt;

pub use backend::{
    classify_batch, BackendConfig, BackendError, BackendKind, BatchError, BatchOptions, BatchOutput, BatchStats,
    Classifier, HttpTransport, ResponseCache, SentimentRecord, Transport, TransportError,
};
pub use parse::{canonical_json, parse_llm_response, ParseError, ParsedResponse};
pub use prompt::{build_prompt, PromptBundle, PromptError};

/// One of the five patient-experience dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Aspect {
    #[serde(rename = "Interpersonal Factors")]
    InterpersonalFactors,
    #[serde(rename = "Technical Quality")]
    TechnicalQuality,
    #[serde(rename = "Operational Efficiency")]
    OperationalEfficiency,
    #[serde(rename = "Finances")]
    Finances,
    #[serde(rename = "Facilities/Availability")]
    FacilitiesAvailability,
}

impl Aspect {
    pub const ALL: [Aspect; 5] = [
        Aspect::InterpersonalFactors,
        Aspect::TechnicalQuality,
        Aspect::OperationalEfficiency,
        Aspect::Finances,
        Aspect::FacilitiesAvailability,
    ];

    /// The JSON key used in prompts and model responses.
    pub fn label(self) -> &'static str {
        match self {
            Aspect::InterpersonalFactors => "Interpersonal Factors",
            Aspect::TechnicalQuality => "Technical Quality",
            Aspect::OperationalEfficiency => "Operational Efficiency",
            Aspect::Finances => "Finances",
            Aspect::FacilitiesAvailability => "Facilities/Availability",
        }
    }

    /// Row label used in regression tables.
    pub fn table_label(self) -> &'static str {
        match self {
            Aspect::FacilitiesAvailability => "Facilities",
            other => other.label(),
        }
    }

    /// snake_case column stem for CSV output.
    pub fn key(self) -> &'static str {
        match self {
            Aspect::InterpersonalFactors => "interpersonal",
            Aspect::TechnicalQuality => "technical_quality",
            Aspect::OperationalEfficiency => "operational_efficiency",
            Aspect::Finances => "finances",
            Aspect::FacilitiesAvailability => "facilities",
        }
    }

    pub fn from_label(label: &str) -> Option<Aspect> {
        Aspect::ALL.into_iter().find(|a| a.label() == label)
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Aspect {
    type Err = String;

    /// Accepts the exact label, the snake_case key, or the table label.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Aspect::ALL
            .into_iter()
            .find(|a| a.label() == s || a.key() == s || a.table_label() == s)
            .ok_or_else(|| format!("unknown aspect `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Negative,
    Neutral,
    Positive,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Negative, Polarity::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        }
    }

    /// Exact lowercase match only.
    pub fn from_value(s: &str) -> Option<Polarity> {
        match s {
            "positive" => Some(Polarity::Positive),
            "negative" => Some(Polarity::Negative),
            "neutral" => Some(Polarity::Neutral),
            _ => None,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Polarity::from_value(&s.trim().to_ascii_lowercase()).ok_or_else(|| format!("unknown polarity `{s}`"))
    }
}

/// Maps a polarity to its numeric sentiment score.
pub fn polarity_to_score(p: Polarity) -> f64 {
    match p {
        Polarity::Positive => 1.0,
        Polarity::Neutral => 0.0,
        Polarity::Negative => -1.0,
    }
}

/// Per-review labels. An absent aspect means "not mentioned".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AspectSentimentSet {
    pub review_id: String,
    pub labels: BTreeMap<Aspect, Polarity>,
    /// True iff the review mentions none of the five aspects.
    pub none_flag: bool,
}

impl AspectSentimentSet {
    pub fn new(review_id: impl Into<String>, labels: BTreeMap<Aspect, Polarity>) -> Self {
        let none_flag = labels.is_empty();
        Self {
            review_id: review_id.into(),
            labels,
            none_flag,
        }
    }

    pub fn none(review_id: impl Into<String>) -> Self {
        Self::new(review_id, BTreeMap::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aspect_labels_round_trip_through_serde() {
        for a in Aspect::ALL {
            let json = serde_json::to_string(&a).unwrap();
            assert_eq!(json, format!("\"{}\"", a.label()));
            assert_eq!(Aspect::from_label(a.label()), Some(a));
        }
        assert_eq!(Aspect::FacilitiesAvailability.label(), "Facilities/Availability");
    }

    #[test]
    fn scores() {
        assert_eq!(polarity_to_score(Polarity::Positive), 1.0);
        assert_eq!(polarity_to_score(Polarity::Negative), -1.0);
        assert_eq!(polarity_to_score(Polarity::Neutral), 0.0);
        // order-preserving
        let mut ps = Polarity::ALL.to_vec();
        ps.sort();
        let scores: Vec<f64> = ps.iter().map(|p| polarity_to_score(*p)).collect();
        assert_eq!(scores, [-1.0, 0.0, 1.0]);
    }

    #[test]
    fn polarity_is_strict() {
        assert_eq!(Polarity::from_value("positive"), Some(Polarity::Positive));
        assert_eq!(Polarity::from_value("Positive"), None);
    }
}
