//! Strict validation of model responses.
//!
//! Accepted shapes are a flat JSON object whose keys are a subset of the five
//! exact aspect labels with values `"positive"`, `"negative"` or `"neutral"`,
//! or exactly `{"None": "None"}`. A single Markdown code fence around the
//! object is tolerated and reported; anything else is rejected.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use super::{Aspect, AspectSentimentSet, Polarity};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("response is empty")]
    Empty,
    #[error("malformed code fence")]
    BadFence,
    #[error("not a single JSON object: {0}")]
    NotJson(String),
    #[error("unknown aspect `{0}`")]
    UnknownAspect(String),
    #[error("invalid sentiment value for `{0}`")]
    InvalidSentiment(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("`None` must be the only key and map to \"None\"")]
    BadNone,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedResponse {
    pub labels: BTreeMap<Aspect, Polarity>,
    pub none_flag: bool,
    /// A Markdown fence was stripped before parsing.
    pub fence_stripped: bool,
}

impl ParsedResponse {
    pub fn into_set(self, review_id: impl Into<String>) -> AspectSentimentSet {
        AspectSentimentSet {
            review_id: review_id.into(),
            labels: self.labels,
            none_flag: self.none_flag,
        }
    }
}

/// Object entries in document order, duplicates preserved.
struct Entries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;

        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = Entries;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Entries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }

        deserializer.deserialize_map(EntriesVisitor)
    }
}

fn strip_fence(s: &str) -> Result<Option<&str>, ParseError> {
    let Some(rest) = s.strip_prefix("```") else {
        return Ok(None);
    };
    let (tag, body) = rest.split_once('\n').ok_or(ParseError::BadFence)?;
    if !tag.trim().chars().all(|c| c.is_ascii_alphanumeric()) {
        return Err(ParseError::BadFence);
    }
    let inner = body.trim_end().strip_suffix("```").ok_or(ParseError::BadFence)?;
    if inner.contains("```") {
        return Err(ParseError::BadFence);
    }
    Ok(Some(inner.trim()))
}

pub fn parse_llm_response(raw: &str) -> Result<ParsedResponse, ParseError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(ParseError::Empty);
    }
    let (body, fence_stripped) = match strip_fence(trimmed)? {
        Some(inner) => (inner, true),
        None => (trimmed, false),
    };

    let mut de = serde_json::Deserializer::from_str(body);
    let Entries(entries) = Entries::deserialize(&mut de).map_err(|e| ParseError::NotJson(e.to_string()))?;
    de.end().map_err(|e| ParseError::NotJson(e.to_string()))?;

    if entries.iter().any(|(k, _)| k == "None") {
        return match entries.as_slice() {
            [(_, Value::String(v))] if v == "None" => Ok(ParsedResponse {
                labels: BTreeMap::new(),
                none_flag: true,
                fence_stripped,
            }),
            _ => Err(ParseError::BadNone),
        };
    }

    let mut labels = BTreeMap::new();
    for (key, value) in entries {
        let aspect = Aspect::from_label(&key).ok_or_else(|| ParseError::UnknownAspect(key.clone()))?;
        let polarity = value
            .as_str()
            .and_then(Polarity::from_value)
            .ok_or_else(|| ParseError::InvalidSentiment(key.clone()))?;
        if labels.insert(aspect, polarity).is_some() {
            return Err(ParseError::DuplicateKey(key));
        }
    }
    let none_flag = labels.is_empty();
    Ok(ParsedResponse {
        labels,
        none_flag,
        fence_stripped,
    })
}

/// Compact canonical serialization, aspects in declaration order.
pub fn canonical_json(labels: &BTreeMap<Aspect, Polarity>) -> String {
    if labels.is_empty() {
        return r#"{"None":"None"}"#.to_string();
    }
    // serde_json::Map would sort keys alphabetically
    let body: Vec<String> = labels
        .iter()
        .map(|(a, p)| format!("{}:{}", Value::String(a.label().into()), Value::String(p.as_str().into())))
        .collect();
    format!("{{{}}}", body.join(","))
}
