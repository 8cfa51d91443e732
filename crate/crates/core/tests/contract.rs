use std::collections::BTreeMap;

use serde::Deserialize;
use urgentcare_core::absa::lexicon::Lexicon;
use urgentcare_core::absa::{build_prompt, canonical_json, parse_llm_response, Aspect, Polarity};

const TEMPLATE: &str = include_str!("fixtures/prompt_template.txt");
const VALID: &str = include_str!("fixtures/parser/valid.json");
const ADVERSARIAL: &str = include_str!("fixtures/parser/adversarial.json");

const EXAMPLE_1: &str = "The doctor was very kind and took the time to explain everything to me in detail. The diagnosis was accurate, and I felt well cared for. The clinic was also clean and comfortable.";
const EXAMPLE_2: &str = "I had to wait for more than three hours even though I had an appointment. The staff was rude and unhelpful. Also, the bill had extra charges that were not explained to me.";

#[derive(Deserialize)]
struct Case {
    case: String,
    raw: String,
    #[serde(default)]
    expected: BTreeMap<String, String>,
}

fn cases(text: &str) -> Vec<Case> {
    serde_json::from_str(text).unwrap()
}

fn labels(pairs: &[(Aspect, Polarity)]) -> BTreeMap<Aspect, Polarity> {
    pairs.iter().copied().collect()
}

#[test]
fn rendered_prompt_matches_template() {
    for review in [EXAMPLE_1, "Short.", "braces {review} and \"quotes\"\nsecond line", "ünïcødé ✓"] {
        let rendered = build_prompt(review).unwrap().render();
        assert_eq!(rendered, TEMPLATE.replacen("{review}", review, 1));
    }
}

#[test]
fn template_contains_both_worked_examples() {
    assert!(TEMPLATE.contains(EXAMPLE_1));
    assert!(TEMPLATE.contains(EXAMPLE_2));
}

#[test]
fn worked_example_outputs_parse() {
    let out1 = "{\n  \"Interpersonal Factors\": \"positive\",\n  \"Technical Quality\": \"positive\",\n  \"Facilities/Availability\": \"positive\"\n}";
    let out2 = "{\n  \"Interpersonal Factors\": \"negative\",\n  \"Operational Efficiency\": \"negative\",\n  \"Finances\": \"negative\"\n}";
    let want1 = labels(&[
        (Aspect::InterpersonalFactors, Polarity::Positive),
        (Aspect::TechnicalQuality, Polarity::Positive),
        (Aspect::FacilitiesAvailability, Polarity::Positive),
    ]);
    let want2 = labels(&[
        (Aspect::InterpersonalFactors, Polarity::Negative),
        (Aspect::OperationalEfficiency, Polarity::Negative),
        (Aspect::Finances, Polarity::Negative),
    ]);
    assert!(TEMPLATE.contains(out1) && TEMPLATE.contains(out2));
    assert_eq!(parse_llm_response(out1).unwrap().labels, want1);
    assert_eq!(parse_llm_response(out2).unwrap().labels, want2);
    let lex = Lexicon::builtin();
    assert_eq!(lex.classify(EXAMPLE_1), want1);
    assert_eq!(lex.classify(EXAMPLE_2), want2);
}

#[test]
fn valid_fixture_is_accepted() {
    let cases = cases(VALID);
    assert_eq!(cases.len(), 50);
    assert!(cases.iter().any(|c| c.raw.trim() == r#"{"None": "None"}"#));
    assert!(cases.iter().any(|c| c.raw.starts_with("```")));
    for c in &cases {
        let parsed = parse_llm_response(&c.raw).unwrap_or_else(|e| panic!("{} rejected: {e}\n{}", c.case, c.raw));
        let got: BTreeMap<String, String> =
            parsed.labels.iter().map(|(a, p)| (a.label().to_string(), p.as_str().to_string())).collect();
        assert_eq!(got, c.expected, "{}", c.case);
        assert_eq!(parsed.none_flag, c.expected.is_empty());
        assert_eq!(parsed.fence_stripped, c.raw.trim_start().starts_with("```"));
        // canonical form is a fixed point
        let canon = canonical_json(&parsed.labels);
        assert_eq!(parse_llm_response(&canon).unwrap().labels, parsed.labels);
        assert_eq!(canonical_json(&parse_llm_response(&canon).unwrap().labels), canon);
    }
}

#[test]
fn adversarial_fixture_is_rejected() {
    let cases = cases(ADVERSARIAL);
    assert_eq!(cases.len(), 50);
    for c in &cases {
        assert!(parse_llm_response(&c.raw).is_err(), "{} accepted: {}", c.case, c.raw);
    }
}
