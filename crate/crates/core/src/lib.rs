//! Aspect-based sentiment analytics for urgent-care facility reviews.
//!
//! The crate is organised as a pipeline of pure stages:
//!
//! * [`corpus`] ingests review and point-of-interest dumps and filters them
//!   down to text-bearing urgent-care reviews in the regions of interest.
//! * [`absa`] builds the classification prompt, talks to a pluggable
//!   backend (remote chat model, offline lexicon, or replay cache) and
//!   validates the strict JSON it returns.
//! * [`evalharness`] resolves multi-annotator gold labels and scores a
//!   backend with precision/recall/F1/accuracy.
//! * [`aggregate`] rolls review labels up to per-facility profiles and
//!   per-region summaries.
//! * [`census`] attaches block-group socioeconomic covariates.
//! * [`stats`] holds correlation, OLS, VIF and the regression models.
//! * [`synth`] generates synthetic corpora with planted ground truth.
//! * [`report`] renders fit tables and GeoJSON.

pub mod absa;
pub mod aggregate;
pub mod census;
pub mod corpus;
pub mod evalharness;
pub mod report;
pub mod stats;
pub mod synth;

mod hashing;

pub use hashing::sha256_hex;
