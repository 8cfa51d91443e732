//! Review and point-of-interest ingestion and filtering.
//!
//! Records are read from JSON-lines (the native format of the public Google
//! Maps review dumps) or CSV. Malformed records are skipped and counted; a
//! file in which more than half of the records are malformed is rejected as
//! corrupt.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::sha256_hex;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt input: {malformed} of {total} records are malformed")]
    Corrupt { malformed: usize, total: usize },
    #[error("csv input: {0}")]
    Csv(#[from] csv::Error),
    #[error("filter keyword must not be empty")]
    EmptyKeyword,
    #[error("write failed: {0}")]
    Write(#[from] std::io::Error),
}

/// Why a single record was rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("record is not a JSON object")]
    NotAnObject,
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("missing field `{0}`")]
    Missing(&'static str),
    #[error("field `{0}` has the wrong type")]
    WrongType(&'static str),
    #[error("rating {0} outside 1..=5")]
    RatingOutOfRange(f64),
    #[error("coordinate out of range")]
    CoordinateOutOfRange,
    #[error("duplicate id `{0}`")]
    Duplicate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    #[serde(rename = "DMV")]
    Dmv,
    #[serde(rename = "FL")]
    Fl,
    #[serde(rename = "OTHER")]
    Other,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Dmv, Region::Fl, Region::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Region::Dmv => "DMV",
            Region::Fl => "FL",
            Region::Other => "OTHER",
        }
    }

    /// Region for a two-letter US state abbreviation.
    pub fn from_state(state: &str) -> Region {
        match state {
            "DC" | "MD" | "VA" => Region::Dmv,
            "FL" => Region::Fl,
            _ => Region::Other,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DMV" => Ok(Region::Dmv),
            "FL" => Ok(Region::Fl),
            "OTHER" => Ok(Region::Other),
            other => Err(format!("unknown region `{other}` (expected DMV, FL or OTHER)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    JsonLines,
    Csv,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json-lines" | "jsonl" => Ok(InputFormat::JsonLines),
            "csv" => Ok(InputFormat::Csv),
            other => Err(format!("unknown input format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facility {
    pub facility_id: String,
    pub name: String,
    pub address: String,
    pub latitude: f64,
    pub longitude: f64,
    pub category_tags: Vec<String>,
    pub meta_avg_rating: Option<f64>,
    pub meta_num_ratings: Option<u64>,
    /// Two-letter state parsed from the address, if any.
    pub state: Option<String>,
    pub region: Region,
}

impl Facility {
    pub fn region_resolved(&self) -> bool {
        self.state.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub facility_id: String,
    pub rating: u8,
    pub text: Option<String>,
    /// UTC epoch milliseconds.
    pub timestamp: Option<i64>,
    pub user_id: Option<String>,
}

impl Review {
    /// Whether the review carries non-whitespace text.
    pub fn has_text(&self) -> bool {
        self.text.as_deref().is_some_and(|t| !t.trim().is_empty())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReviewSet {
    /// Sorted by `review_id`.
    pub reviews: Vec<Review>,
    pub malformed: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FacilitySet {
    /// Sorted by `facility_id`.
    pub facilities: Vec<Facility>,
    pub malformed: usize,
}

impl FacilitySet {
    pub fn ids(&self) -> BTreeSet<&str> {
        self.facilities.iter().map(|f| f.facility_id.as_str()).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Facility> {
        self.facilities
            .binary_search_by(|f| f.facility_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.facilities[i])
    }

    /// Number of facilities whose region could not be resolved from the address.
    pub fn unresolved_regions(&self) -> usize {
        self.facilities.iter().filter(|f| !f.region_resolved()).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionCounts {
    pub n_facilities: usize,
    pub n_reviews_total: usize,
    pub n_reviews_with_text: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub n_facilities: usize,
    pub n_reviews_total: usize,
    pub n_reviews_with_text: usize,
    pub orphan_reviews: usize,
    pub by_region: BTreeMap<Region, RegionCounts>,
}

/// Deterministic review id for records that lack one.
pub fn synthesize_review_id(user_id: Option<&str>, facility_id: &str, timestamp: Option<i64>) -> String {
    let ts = timestamp.map(|t| t.to_string()).unwrap_or_default();
    let digest = sha256_hex(format!("{}\u{1f}{}\u{1f}{}", user_id.unwrap_or(""), facility_id, ts));
    format!("h{}", &digest[..24])
}

fn string_field(obj: &Map<String, Value>, key: &'static str) -> Result<Option<String>, RecordError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(Value::Number(n)) => Ok(Some(n.to_string())),
        Some(_) => Err(RecordError::WrongType(key)),
    }
}

fn number_field(obj: &Map<String, Value>, key: &'static str) -> Result<Option<f64>, RecordError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Number(n)) => n.as_f64().map(Some).ok_or(RecordError::WrongType(key)),
        Some(Value::String(s)) => s
            .trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|_| RecordError::WrongType(key)),
        Some(_) => Err(RecordError::WrongType(key)),
    }
}

fn parse_rating(value: f64) -> Result<u8, RecordError> {
    if value.fract() == 0.0 && (1.0..=5.0).contains(&value) {
        Ok(value as u8)
    } else {
        Err(RecordError::RatingOutOfRange(value))
    }
}

fn parse_timestamp(raw: Option<f64>) -> Result<Option<i64>, RecordError> {
    match raw {
        None => Ok(None),
        Some(t) if t.is_finite() && t.fract() == 0.0 && t.abs() < 9.0e15 => Ok(Some(t as i64)),
        Some(_) => Err(RecordError::WrongType("time")),
    }
}

fn build_review(
    review_id: Option<String>,
    facility_id: Option<String>,
    rating: Option<f64>,
    text: Option<String>,
    time: Option<f64>,
    user_id: Option<String>,
) -> Result<Review, RecordError> {
    let facility_id = facility_id
        .filter(|s| !s.is_empty())
        .ok_or(RecordError::Missing("gmap_id"))?;
    let rating = parse_rating(rating.ok_or(RecordError::Missing("rating"))?)?;
    let timestamp = parse_timestamp(time)?;
    let review_id = match review_id.filter(|s| !s.is_empty()) {
        Some(id) => id,
        None => synthesize_review_id(user_id.as_deref(), &facility_id, timestamp),
    };
    Ok(Review {
        review_id,
        facility_id,
        rating,
        text,
        timestamp,
        user_id,
    })
}

/// Parses one JSON-lines review record.
///
/// `review_id` (or `id`) is optional; when absent it is synthesized from
/// `user_id`, `gmap_id` and `time`.
pub fn parse_review_record(line: &str) -> Result<Review, RecordError> {
    let value: Value = serde_json::from_str(line).map_err(|e| RecordError::Json(e.to_string()))?;
    let obj = value.as_object().ok_or(RecordError::NotAnObject)?;
    let review_id = match string_field(obj, "review_id")? {
        Some(id) => Some(id),
        None => string_field(obj, "id")?,
    };
    let text = match obj.get("text") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(RecordError::WrongType("text")),
    };
    build_review(
        review_id,
        string_field(obj, "gmap_id")?,
        number_field(obj, "rating")?,
        text,
        number_field(obj, "time")?,
        string_field(obj, "user_id")?,
    )
}

/// Parses one JSON-lines POI record, resolving its region from the address.
pub fn parse_facility_record(line: &str) -> Result<Facility, RecordError> {
    let value: Value = serde_json::from_str(line).map_err(|e| RecordError::Json(e.to_string()))?;
    let obj = value.as_object().ok_or(RecordError::NotAnObject)?;
    let facility_id = string_field(obj, "gmap_id")?
        .filter(|s| !s.is_empty())
        .ok_or(RecordError::Missing("gmap_id"))?;
    let name = string_field(obj, "name")?.unwrap_or_default();
    let address = string_field(obj, "address")?.unwrap_or_default();
    let latitude = number_field(obj, "latitude")?.ok_or(RecordError::Missing("latitude"))?;
    let longitude = number_field(obj, "longitude")?.ok_or(RecordError::Missing("longitude"))?;
    if !(-90.0..=90.0).contains(&latitude) || !(-180.0..=180.0).contains(&longitude) {
        return Err(RecordError::CoordinateOutOfRange);
    }
    let category_tags = match obj.get("category") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| v.as_str().map(str::to_owned).ok_or(RecordError::WrongType("category")))
            .collect::<Result<_, _>>()?,
        Some(Value::String(s)) => vec![s.clone()],
        Some(_) => return Err(RecordError::WrongType("category")),
    };
    let meta_avg_rating = number_field(obj, "avg_rating")?.filter(|r| (1.0..=5.0).contains(r));
    let meta_num_ratings = number_field(obj, "num_of_reviews")?
        .filter(|n| *n >= 0.0 && n.fract() == 0.0)
        .map(|n| n as u64);
    let state = parse_state(&address);
    let region = state.as_deref().map(Region::from_state).unwrap_or(Region::Other);
    Ok(Facility {
        facility_id,
        name,
        address,
        latitude,
        longitude,
        category_tags,
        meta_avg_rating,
        meta_num_ratings,
        state,
        region,
    })
}

fn state_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b([A-Z]{2})\s+\d{5}(?:-\d{4})?\b").expect("valid regex"))
}

/// Two-letter state abbreviation followed by a ZIP code; the last such
/// occurrence in the address wins.
pub fn parse_state(address: &str) -> Option<String> {
    state_regex()
        .captures_iter(address)
        .last()
        .map(|c| c[1].to_string())
}

fn finish<T>(items: Vec<T>, malformed: usize) -> Result<(Vec<T>, usize), CorpusError> {
    let total = items.len() + malformed;
    if malformed * 2 > total {
        return Err(CorpusError::Corrupt { malformed, total });
    }
    Ok((items, malformed))
}

fn dedup_sorted<T>(mut items: Vec<T>, key: impl Fn(&T) -> &str) -> (Vec<T>, usize) {
    // stable sort keeps the first occurrence of each id in front
    items.sort_by(|a, b| key(a).cmp(key(b)));
    let before = items.len();
    let mut seen: HashSet<String> = HashSet::with_capacity(before);
    items.retain(|item| seen.insert(key(item).to_owned()));
    let dups = before - items.len();
    (items, dups)
}

/// Reads reviews from any reader.
pub fn read_reviews<R: Read>(reader: R, format: InputFormat) -> Result<ReviewSet, CorpusError> {
    let mut reviews = Vec::new();
    let mut malformed = 0usize;
    match format {
        InputFormat::JsonLines => {
            for line in BufReader::new(reader).lines() {
                let line = match line {
                    Ok(l) => l,
                    Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                        malformed += 1;
                        continue;
                    }
                    Err(e) => return Err(CorpusError::Write(e)),
                };
                if line.trim().is_empty() {
                    continue;
                }
                match parse_review_record(&line) {
                    Ok(r) => reviews.push(r),
                    Err(_) => malformed += 1,
                }
            }
        }
        InputFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
            let headers = rdr.headers()?.clone();
            let col = |name: &str| headers.iter().position(|h| h.trim() == name);
            let (c_id, c_fac, c_rating, c_text, c_time, c_user) = (
                col("review_id").or_else(|| col("id")),
                col("gmap_id"),
                col("rating"),
                col("text"),
                col("time"),
                col("user_id"),
            );
            for record in rdr.records() {
                let Ok(record) = record else {
                    malformed += 1;
                    continue;
                };
                let get = |c: Option<usize>| {
                    c.and_then(|i| record.get(i))
                        .map(str::to_owned)
                        .filter(|s| !s.is_empty())
                };
                let num = |c: Option<usize>| -> Result<Option<f64>, RecordError> {
                    match get(c) {
                        None => Ok(None),
                        Some(s) => s.trim().parse().map(Some).map_err(|_| RecordError::WrongType("number")),
                    }
                };
                let parsed = (|| {
                    build_review(get(c_id), get(c_fac), num(c_rating)?, get(c_text), num(c_time)?, get(c_user))
                })();
                match parsed {
                    Ok(r) => reviews.push(r),
                    Err(_) => malformed += 1,
                }
            }
        }
    }
    let (reviews, dups) = dedup_sorted(reviews, |r| &r.review_id);
    let (reviews, malformed) = finish(reviews, malformed + dups)?;
    Ok(ReviewSet { reviews, malformed })
}

pub fn load_reviews(path: &Path, format: InputFormat) -> Result<ReviewSet, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_reviews(file, format)
}

pub fn read_facilities<R: Read>(reader: R) -> Result<FacilitySet, CorpusError> {
    let mut facilities = Vec::new();
    let mut malformed = 0usize;
    for line in BufReader::new(reader).lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                malformed += 1;
                continue;
            }
            Err(e) => return Err(CorpusError::Write(e)),
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_facility_record(&line) {
            Ok(f) => facilities.push(f),
            Err(_) => malformed += 1,
        }
    }
    let (facilities, dups) = dedup_sorted(facilities, |f| &f.facility_id);
    let (facilities, malformed) = finish(facilities, malformed + dups)?;
    Ok(FacilitySet { facilities, malformed })
}

pub fn load_facilities(path: &Path) -> Result<FacilitySet, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_facilities(file)
}

/// Keeps facilities whose name or any category tag contains `keyword`,
/// compared case-insensitively.
pub fn filter_urgent_care(facilities: &FacilitySet, keyword: &str) -> Result<FacilitySet, CorpusError> {
    let needle = keyword.trim().to_lowercase();
    if needle.is_empty() {
        return Err(CorpusError::EmptyKeyword);
    }
    let matches = |s: &str| s.to_lowercase().contains(&needle);
    Ok(FacilitySet {
        facilities: facilities
            .facilities
            .iter()
            .filter(|f| matches(&f.name) || f.category_tags.iter().any(|t| matches(t)))
            .cloned()
            .collect(),
        malformed: facilities.malformed,
    })
}

/// Keeps facilities whose region is in `regions`. Facilities with an
/// unresolvable address are `Region::Other` and are dropped unless `Other`
/// is requested explicitly.
pub fn filter_region(facilities: &FacilitySet, regions: &BTreeSet<Region>) -> FacilitySet {
    FacilitySet {
        facilities: facilities
            .facilities
            .iter()
            .filter(|f| regions.contains(&f.region))
            .cloned()
            .collect(),
        malformed: facilities.malformed,
    }
}

pub fn drop_textless(reviews: &ReviewSet) -> ReviewSet {
    ReviewSet {
        reviews: reviews.reviews.iter().filter(|r| r.has_text()).cloned().collect(),
        malformed: reviews.malformed,
    }
}

/// Keeps reviews that belong to one of `facilities`.
pub fn reviews_for(reviews: &ReviewSet, facilities: &FacilitySet) -> ReviewSet {
    let ids = facilities.ids();
    ReviewSet {
        reviews: reviews
            .reviews
            .iter()
            .filter(|r| ids.contains(r.facility_id.as_str()))
            .cloned()
            .collect(),
        malformed: reviews.malformed,
    }
}

pub fn corpus_summary(reviews: &ReviewSet, facilities: &FacilitySet) -> CorpusSummary {
    let mut summary = CorpusSummary {
        n_facilities: facilities.facilities.len(),
        ..Default::default()
    };
    for f in &facilities.facilities {
        summary.by_region.entry(f.region).or_default().n_facilities += 1;
    }
    for r in &reviews.reviews {
        let Some(f) = facilities.get(&r.facility_id) else {
            summary.orphan_reviews += 1;
            continue;
        };
        let counts = summary.by_region.entry(f.region).or_default();
        counts.n_reviews_total += 1;
        summary.n_reviews_total += 1;
        if r.has_text() {
            counts.n_reviews_with_text += 1;
            summary.n_reviews_with_text += 1;
        }
    }
    summary
}

/// Serializes a review in the input JSON-lines schema.
pub fn review_to_record(r: &Review) -> Value {
    serde_json::json!({
        "review_id": r.review_id,
        "gmap_id": r.facility_id,
        "rating": r.rating,
        "text": r.text,
        "time": r.timestamp,
        "user_id": r.user_id,
    })
}

/// Serializes a facility in the input JSON-lines schema.
pub fn facility_to_record(f: &Facility) -> Value {
    serde_json::json!({
        "gmap_id": f.facility_id,
        "name": f.name,
        "address": f.address,
        "latitude": f.latitude,
        "longitude": f.longitude,
        "category": f.category_tags,
        "avg_rating": f.meta_avg_rating,
        "num_of_reviews": f.meta_num_ratings,
    })
}

pub fn write_reviews<W: Write>(mut out: W, reviews: &[Review]) -> std::io::Result<()> {
    for r in reviews {
        serde_json::to_writer(&mut out, &review_to_record(r))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_facilities<W: Write>(mut out: W, facilities: &[Facility]) -> std::io::Result<()> {
    for f in facilities {
        serde_json::to_writer(&mut out, &facility_to_record(f))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
