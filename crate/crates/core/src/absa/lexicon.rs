//! Offline cue-word classifier.
//!
//! Text is split into clauses at sentence punctuation and at the word "but".
//! A clause mentions an aspect when it contains one of that aspect's cue
//! words; its polarity is the sign of the summed polarity words in the clause
//! (a negator up to two tokens earlier flips a word). Each aspect takes the
//! sign of the sum of its clause votes, with zero meaning neutral.
//!
//! The tables are deliberately small. They exist so the whole pipeline can
//! run without a remote model, and the synthetic generator builds its texts
//! from the same tables.

use std::collections::BTreeMap;

use super::{Aspect, Polarity};

/// Topic words that mark an aspect without carrying sentiment.
pub const TOPIC_CUES: &[(&str, Aspect)] = &[
    ("staff", Aspect::InterpersonalFactors),
    ("doctor", Aspect::InterpersonalFactors),
    ("doctors", Aspect::InterpersonalFactors),
    ("nurse", Aspect::InterpersonalFactors),
    ("nurses", Aspect::InterpersonalFactors),
    ("receptionist", Aspect::InterpersonalFactors),
    ("receptionists", Aspect::InterpersonalFactors),
    ("physician", Aspect::InterpersonalFactors),
    ("provider", Aspect::InterpersonalFactors),
    ("attitude", Aspect::InterpersonalFactors),
    ("manner", Aspect::InterpersonalFactors),
    ("diagnosis", Aspect::TechnicalQuality),
    ("diagnosed", Aspect::TechnicalQuality),
    ("treatment", Aspect::TechnicalQuality),
    ("treated", Aspect::TechnicalQuality),
    ("exam", Aspect::TechnicalQuality),
    ("examination", Aspect::TechnicalQuality),
    ("prescription", Aspect::TechnicalQuality),
    ("prescribed", Aspect::TechnicalQuality),
    ("xray", Aspect::TechnicalQuality),
    ("stitches", Aspect::TechnicalQuality),
    ("wait", Aspect::OperationalEfficiency),
    ("waited", Aspect::OperationalEfficiency),
    ("waiting", Aspect::OperationalEfficiency),
    ("line", Aspect::OperationalEfficiency),
    ("appointment", Aspect::OperationalEfficiency),
    ("scheduling", Aspect::OperationalEfficiency),
    ("process", Aspect::OperationalEfficiency),
    ("checkin", Aspect::OperationalEfficiency),
    ("minutes", Aspect::OperationalEfficiency),
    ("queue", Aspect::OperationalEfficiency),
    ("bill", Aspect::Finances),
    ("billed", Aspect::Finances),
    ("billing", Aspect::Finances),
    ("charge", Aspect::Finances),
    ("charged", Aspect::Finances),
    ("charges", Aspect::Finances),
    ("cost", Aspect::Finances),
    ("costs", Aspect::Finances),
    ("price", Aspect::Finances),
    ("prices", Aspect::Finances),
    ("pricing", Aspect::Finances),
    ("insurance", Aspect::Finances),
    ("copay", Aspect::Finances),
    ("payment", Aspect::Finances),
    ("fee", Aspect::Finances),
    ("fees", Aspect::Finances),
    ("clinic", Aspect::FacilitiesAvailability),
    ("facility", Aspect::FacilitiesAvailability),
    ("building", Aspect::FacilitiesAvailability),
    ("room", Aspect::FacilitiesAvailability),
    ("rooms", Aspect::FacilitiesAvailability),
    ("lobby", Aspect::FacilitiesAvailability),
    ("parking", Aspect::FacilitiesAvailability),
    ("equipment", Aspect::FacilitiesAvailability),
    ("bathroom", Aspect::FacilitiesAvailability),
    ("restroom", Aspect::FacilitiesAvailability),
];

/// Cue words that mark an aspect and carry their own polarity.
pub const POLAR_CUES: &[(&str, Aspect, Polarity)] = &[
    ("friendly", Aspect::InterpersonalFactors, Polarity::Positive),
    ("kind", Aspect::InterpersonalFactors, Polarity::Positive),
    ("courteous", Aspect::InterpersonalFactors, Polarity::Positive),
    ("caring", Aspect::InterpersonalFactors, Polarity::Positive),
    ("polite", Aspect::InterpersonalFactors, Polarity::Positive),
    ("respectful", Aspect::InterpersonalFactors, Polarity::Positive),
    ("compassionate", Aspect::InterpersonalFactors, Polarity::Positive),
    ("rude", Aspect::InterpersonalFactors, Polarity::Negative),
    ("dismissive", Aspect::InterpersonalFactors, Polarity::Negative),
    ("disrespectful", Aspect::InterpersonalFactors, Polarity::Negative),
    ("condescending", Aspect::InterpersonalFactors, Polarity::Negative),
    ("unprofessional", Aspect::InterpersonalFactors, Polarity::Negative),
    ("thorough", Aspect::TechnicalQuality, Polarity::Positive),
    ("knowledgeable", Aspect::TechnicalQuality, Polarity::Positive),
    ("accurate", Aspect::TechnicalQuality, Polarity::Positive),
    ("competent", Aspect::TechnicalQuality, Polarity::Positive),
    ("misdiagnosed", Aspect::TechnicalQuality, Polarity::Negative),
    ("misdiagnosis", Aspect::TechnicalQuality, Polarity::Negative),
    ("incompetent", Aspect::TechnicalQuality, Polarity::Negative),
    ("fast", Aspect::OperationalEfficiency, Polarity::Positive),
    ("efficient", Aspect::OperationalEfficiency, Polarity::Positive),
    ("short", Aspect::OperationalEfficiency, Polarity::Positive),
    ("slow", Aspect::OperationalEfficiency, Polarity::Negative),
    ("disorganized", Aspect::OperationalEfficiency, Polarity::Negative),
    ("long", Aspect::OperationalEfficiency, Polarity::Negative),
    ("hours", Aspect::OperationalEfficiency, Polarity::Negative),
    ("affordable", Aspect::Finances, Polarity::Positive),
    ("expensive", Aspect::Finances, Polarity::Negative),
    ("overpriced", Aspect::Finances, Polarity::Negative),
    ("overcharged", Aspect::Finances, Polarity::Negative),
    ("clean", Aspect::FacilitiesAvailability, Polarity::Positive),
    ("comfortable", Aspect::FacilitiesAvailability, Polarity::Positive),
    ("spotless", Aspect::FacilitiesAvailability, Polarity::Positive),
    ("dirty", Aspect::FacilitiesAvailability, Polarity::Negative),
    ("filthy", Aspect::FacilitiesAvailability, Polarity::Negative),
    ("crowded", Aspect::FacilitiesAvailability, Polarity::Negative),
    ("overcrowded", Aspect::FacilitiesAvailability, Polarity::Negative),
];

/// Aspect-neutral sentiment words.
pub const POSITIVE_WORDS: &[&str] = &[
    "great", "good", "excellent", "amazing", "wonderful", "awesome", "fantastic", "best", "helpful", "pleasant",
    "reasonable", "fair", "nice", "perfect", "recommend", "recommended", "happy", "satisfied", "professional",
    "attentive", "superb", "outstanding",
];

pub const NEGATIVE_WORDS: &[&str] = &[
    "terrible", "bad", "awful", "horrible", "worst", "poor", "unhelpful", "ridiculous", "disappointed",
    "disappointing", "unacceptable", "extra", "hidden", "wrong", "lousy", "dreadful",
];

pub const NEGATORS: &[&str] = &[
    "not", "no", "never", "didn't", "wasn't", "isn't", "don't", "weren't", "hardly", "nothing",
];

fn lookup_cue(word: &str) -> Option<(Aspect, Option<Polarity>)> {
    if let Some((_, a)) = TOPIC_CUES.iter().find(|(w, _)| *w == word) {
        return Some((*a, None));
    }
    POLAR_CUES
        .iter()
        .find(|(w, _, _)| *w == word)
        .map(|(_, a, p)| (*a, Some(*p)))
}

fn word_polarity(word: &str) -> Option<Polarity> {
    if POSITIVE_WORDS.contains(&word) {
        Some(Polarity::Positive)
    } else if NEGATIVE_WORDS.contains(&word) {
        Some(Polarity::Negative)
    } else {
        None
    }
}

fn flip(p: Polarity) -> Polarity {
    match p {
        Polarity::Positive => Polarity::Negative,
        Polarity::Negative => Polarity::Positive,
        Polarity::Neutral => Polarity::Neutral,
    }
}

/// Lowercased word tokens grouped into clauses.
fn clauses(text: &str) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut clause: Vec<String> = Vec::new();
    let mut word = String::new();

    fn flush_word(word: &mut String, clause: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        if word.is_empty() {
            return;
        }
        let w = std::mem::take(word);
        let w = w.trim_matches('\'').to_string();
        if w == "but" {
            if !clause.is_empty() {
                out.push(std::mem::take(clause));
            }
        } else if !w.is_empty() {
            clause.push(w);
        }
    }

    for ch in text.chars() {
        let ch = if ch == '\u{2019}' { '\'' } else { ch };
        if ch.is_alphanumeric() || ch == '\'' {
            word.extend(ch.to_lowercase());
        } else {
            flush_word(&mut word, &mut clause, &mut out);
            if matches!(ch, '.' | '!' | '?' | ';' | '\n') && !clause.is_empty() {
                out.push(std::mem::take(&mut clause));
            }
        }
    }
    flush_word(&mut word, &mut clause, &mut out);
    if !clause.is_empty() {
        out.push(clause);
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Lexicon;

impl Lexicon {
    pub fn builtin() -> Self {
        Lexicon
    }

    /// Pure function of the text.
    pub fn classify(&self, text: &str) -> BTreeMap<Aspect, Polarity> {
        let mut totals: BTreeMap<Aspect, i64> = BTreeMap::new();
        for clause in clauses(text) {
            let mut score = 0i64;
            let mut mentioned: Vec<Aspect> = Vec::new();
            for (i, token) in clause.iter().enumerate() {
                let negated = clause[i.saturating_sub(2)..i]
                    .iter()
                    .any(|t| NEGATORS.contains(&t.as_str()));
                let cue = lookup_cue(token);
                if let Some((aspect, _)) = cue {
                    if !mentioned.contains(&aspect) {
                        mentioned.push(aspect);
                    }
                }
                let polarity = cue.and_then(|(_, p)| p).or_else(|| word_polarity(token));
                if let Some(p) = polarity {
                    let p = if negated { flip(p) } else { p };
                    score += match p {
                        Polarity::Positive => 1,
                        Polarity::Negative => -1,
                        Polarity::Neutral => 0,
                    };
                }
            }
            for aspect in mentioned {
                *totals.entry(aspect).or_default() += score.signum();
            }
        }
        totals
            .into_iter()
            .map(|(a, t)| {
                let p = match t.signum() {
                    1 => Polarity::Positive,
                    -1 => Polarity::Negative,
                    _ => Polarity::Neutral,
                };
                (a, p)
            })
            .collect()
    }
}
