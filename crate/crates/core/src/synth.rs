//! Seeded synthetic corpora with planted ground truth.
//!
//! Review texts are assembled from the lexicon tables, one sentence per
//! labelled aspect, so the offline lexicon backend recovers the planted
//! labels. Facility ratings follow a known linear model in the realized
//! interpersonal and operational-efficiency means and block-group density.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::absa::{polarity_to_score, Aspect, Polarity};
use crate::census::{self, CbgGeometry, CbgProfile};
use crate::corpus::{review_to_record, synthesize_review_id, write_facilities, Facility, Region, Review};
use crate::evalharness::{write_annotations, AnnotationRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedModel {
    pub intercept: f64,
    pub interpersonal: f64,
    pub operational_efficiency: f64,
    /// Effect of z-scored block-group population density.
    pub density: f64,
    pub noise_sd: f64,
}

impl Default for PlantedModel {
    fn default() -> Self {
        PlantedModel {
            intercept: 3.0,
            interpersonal: 1.7,
            operational_efficiency: 0.3,
            density: 0.02,
            noise_sd: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_facilities: usize,
    /// Share of facilities placed in Florida; the rest go to DC, MD and VA.
    pub fl_share: f64,
    /// Every aspect is topped up to this many mentions per facility.
    pub min_mentions: u64,
    /// Share of facilities whose Finances mentions are kept; the others are
    /// cut to between 0 and 5.
    pub finance_coverage: f64,
    pub min_reviews: usize,
    pub max_reviews: usize,
    /// Facilities that the urgent-care and region filters should drop.
    pub n_decoys: usize,
    pub planted: PlantedModel,
    pub gold_reviews: usize,
    pub annotators: u32,
    /// Per-label probability that an annotator deviates from the planted label.
    pub annotator_noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            n_facilities: 500,
            fl_share: 0.6,
            min_mentions: 10,
            finance_coverage: 1.0,
            min_reviews: 24,
            max_reviews: 48,
            n_decoys: 40,
            planted: PlantedModel::default(),
            gold_reviews: 400,
            annotators: 4,
            annotator_noise: 0.04,
        }
    }
}

/// Probability that a review mentions each aspect, before top-up.
const MENTION_RATE: [f64; 5] = [0.5, 0.35, 0.45, 0.25, 0.3];
const NEUTRAL_SHARE: f64 = 0.15;

const TOPICS: [&[&str]; 5] = [
    &["staff", "doctor", "nurse", "receptionist", "provider", "physician"],
    &["diagnosis", "treatment", "exam", "prescription"],
    &["wait", "line", "appointment", "process", "checkin"],
    &["bill", "billing", "cost", "price", "insurance", "copay"],
    &["clinic", "facility", "building", "lobby", "parking", "bathroom"],
];

const GOOD: &[&str] = &[
    "great", "good", "excellent", "amazing", "wonderful", "helpful", "pleasant", "nice", "superb", "outstanding",
];
const BAD: &[&str] = &["terrible", "bad", "awful", "horrible", "poor", "unacceptable", "lousy", "dreadful", "disappointing"];

/// Sentences that mention no aspect and carry no sentiment.
pub const FILLERS: &[&str] = &[
    "We came in on a Tuesday.",
    "My son had a fever.",
    "I went there after work.",
    "It was my first visit.",
    "We drove in from out of town.",
    "I needed a flu shot.",
    "My daughter hurt her ankle.",
    "I had a sore throat.",
];

fn sentence(rng: &mut ChaCha8Rng, aspect: Aspect, polarity: Polarity) -> String {
    let idx = Aspect::ALL.iter().position(|a| *a == aspect).expect("aspect listed");
    let topic = TOPICS[idx].choose(rng).expect("non-empty");
    let good = GOOD.choose(rng).expect("non-empty");
    let bad = BAD.choose(rng).expect("non-empty");
    match (polarity, rng.random_range(0..3)) {
        (Polarity::Positive, 0) => format!("The {topic} was {good}."),
        (Polarity::Positive, 1) => format!("{} {topic}.", capitalize(good)),
        (Polarity::Positive, _) => format!("Really {good} {topic}!"),
        (Polarity::Negative, 0) => format!("The {topic} was {bad}."),
        (Polarity::Negative, 1) => format!("The {topic} was not {good}."),
        (Polarity::Negative, _) => format!("{} {topic}.", capitalize(bad)),
        (Polarity::Neutral, 0) => format!("I asked about the {topic}."),
        (Polarity::Neutral, 1) => format!("They mentioned the {topic}."),
        (Polarity::Neutral, _) => format!("There is a {topic} there."),
    }
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn build_text(rng: &mut ChaCha8Rng, labels: &BTreeMap<Aspect, Polarity>) -> String {
    let mut parts: Vec<String> = labels.iter().map(|(a, p)| sentence(rng, *a, *p)).collect();
    if parts.is_empty() || rng.random_bool(0.4) {
        parts.push(FILLERS.choose(rng).expect("non-empty").to_string());
    }
    parts.shuffle(rng);
    parts.join(" ")
}

fn draw_polarity(rng: &mut ChaCha8Rng, target_mean: f64) -> Polarity {
    let u: f64 = rng.random();
    let p_pos = (1.0 - NEUTRAL_SHARE) * (1.0 + target_mean) / 2.0;
    if u < NEUTRAL_SHARE {
        Polarity::Neutral
    } else if u < NEUTRAL_SHARE + p_pos {
        Polarity::Positive
    } else {
        Polarity::Negative
    }
}

struct StateArea {
    code: &'static str,
    fips: u32,
    city: &'static str,
    zip: u32,
    lon: (f64, f64),
    lat: (f64, f64),
    grid: usize,
}

const AREAS: [StateArea; 4] = [
    StateArea { code: "FL", fips: 12, city: "Tampa", zip: 33602, lon: (-82.8, -80.2), lat: (26.0, 28.6), grid: 10 },
    StateArea { code: "DC", fips: 11, city: "Washington", zip: 20001, lon: (-77.12, -76.91), lat: (38.80, 38.99), grid: 3 },
    StateArea { code: "MD", fips: 24, city: "Baltimore", zip: 21201, lon: (-77.3, -76.4), lat: (39.0, 39.6), grid: 6 },
    StateArea { code: "VA", fips: 51, city: "Arlington", zip: 22201, lon: (-77.6, -77.0), lat: (38.3, 38.79), grid: 6 },
];

const CHAINS: &[&str] = &["CareNow", "MedExpress", "Patient First", "CityMD", "FastMed", "Velocity", "AFC", "NextCare"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityTruth {
    pub facility_id: String,
    pub region: Region,
    pub cbg_id: String,
    pub interpersonal_mean: f64,
    pub operational_efficiency_mean: f64,
    pub density_z: f64,
    /// Planted model value before rounding to whole stars.
    pub target_rating: f64,
    /// Mean of the generated star ratings over text reviews.
    pub mean_rating: f64,
    pub finance_downsampled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub facilities: Vec<FacilityTruth>,
    /// Planted labels of every text review at a retained facility.
    pub labels: BTreeMap<String, BTreeMap<Aspect, Polarity>>,
    /// Reviews sampled for the annotation set.
    pub gold_review_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    /// Retained facilities first, then decoys.
    pub facilities: Vec<Facility>,
    pub reviews: Vec<Review>,
    /// Reviews written without an id; the reader synthesizes it.
    pub omitted_ids: Vec<String>,
    pub cbg_profiles: Vec<CbgProfile>,
    pub geometries: Vec<CbgGeometry>,
    pub facility_cbg: BTreeMap<String, String>,
    pub annotations: Vec<AnnotationRecord>,
    pub truth: GroundTruth,
}

pub const POIS_FILE: &str = "pois.jsonl";
pub const REVIEWS_FILE: &str = "reviews.jsonl";
pub const CBG_PROFILES_FILE: &str = "cbg_profiles.csv";
pub const CBG_GEOMETRIES_FILE: &str = "cbg_geometries.geojson";
pub const FACILITY_CBG_FILE: &str = "facility_cbg.csv";
pub const ANNOTATIONS_FILE: &str = "annotations.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

struct Cell {
    cbg_id: String,
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
}

fn build_cells(rng: &mut ChaCha8Rng) -> (Vec<Vec<Cell>>, Vec<CbgProfile>, Vec<CbgGeometry>) {
    let density = Normal::new(1500f64.ln(), 1.0).expect("valid normal");
    let mut cells = Vec::new();
    let mut profiles = Vec::new();
    let mut geometries = Vec::new();
    for area in &AREAS {
        let mut area_cells = Vec::new();
        let dx = (area.lon.1 - area.lon.0) / area.grid as f64;
        let dy = (area.lat.1 - area.lat.0) / area.grid as f64;
        for row in 0..area.grid {
            for col in 0..area.grid {
                let cbg_id = format!("{:02}{:03}{:06}{}", area.fips, 1 + 2 * row, 100 + col, 1);
                let (x0, y0) = (area.lon.0 + col as f64 * dx, area.lat.0 + row as f64 * dy);
                let (x1, y1) = (area.lon.0 + (col + 1) as f64 * dx, area.lat.0 + (row + 1) as f64 * dy);
                let ring = vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]];
                geometries.push(CbgGeometry::new(cbg_id.clone(), vec![vec![ring]]).expect("grid cell is a valid ring"));
                profiles.push(CbgProfile {
                    cbg_id: cbg_id.clone(),
                    population_density: density.sample(rng).exp(),
                    median_income: rng.random_range(30_000.0..150_000.0),
                    rent_to_income_ratio: rng.random_range(0.15..0.45),
                    gini_index: rng.random_range(0.30..0.60),
                    household_below_poverty_rate: rng.random_range(0.02..0.35),
                    no_insurance_rate: rng.random_range(0.02..0.25),
                    unemployment_rate: rng.random_range(0.02..0.15),
                });
                area_cells.push(Cell { cbg_id, x0, y0, dx, dy });
            }
        }
        cells.push(area_cells);
    }
    (cells, profiles, geometries)
}

struct Draft {
    labels: BTreeMap<Aspect, Polarity>,
}

pub fn generate(config: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (cells, cbg_profiles, geometries) = build_cells(&mut rng);
    let density_of: BTreeMap<&str, f64> = cbg_profiles.iter().map(|p| (p.cbg_id.as_str(), p.population_density)).collect();

    let n_fl = (config.n_facilities as f64 * config.fl_share).round() as usize;
    let mut area_of: Vec<usize> = (0..config.n_facilities)
        .map(|i| {
            if i < n_fl {
                0
            } else {
                let u: f64 = rng.random();
                if u < 0.2 {
                    1
                } else if u < 0.6 {
                    2
                } else {
                    3
                }
            }
        })
        .collect();
    area_of.shuffle(&mut rng);

    let mut downsampled = vec![false; config.n_facilities];
    let n_keep = (config.n_facilities as f64 * config.finance_coverage.clamp(0.0, 1.0)).round() as usize;
    for flag in downsampled.iter_mut().skip(n_keep) {
        *flag = true;
    }
    downsampled.shuffle(&mut rng);

    let mut facilities = Vec::new();
    let mut facility_cbg = BTreeMap::new();
    let mut drafts: Vec<Vec<Draft>> = Vec::new();
    for (i, &area_idx) in area_of.iter().enumerate() {
        let area = &AREAS[area_idx];
        let cell = cells[area_idx].choose(&mut rng).expect("non-empty grid");
        let lon = cell.x0 + cell.dx * rng.random_range(0.1..0.9);
        let lat = cell.y0 + cell.dy * rng.random_range(0.1..0.9);
        let id = format!("fac{:05}", i + 1);
        let chain = CHAINS.choose(&mut rng).expect("non-empty");
        facilities.push(Facility {
            facility_id: id.clone(),
            name: format!("{chain} Urgent Care {}", i + 1),
            address: format!("{} Main St, {}, {} {}", 100 + i, area.city, area.code, area.zip),
            latitude: lat,
            longitude: lon,
            category_tags: vec!["Urgent care center".into(), "Medical clinic".into()],
            meta_avg_rating: None,
            meta_num_ratings: None,
            state: Some(area.code.into()),
            region: Region::from_state(area.code),
        });
        facility_cbg.insert(id, cell.cbg_id.clone());

        let targets: [f64; 5] = std::array::from_fn(|_| rng.random_range(-0.6..0.8));
        let n_reviews = rng.random_range(config.min_reviews..=config.max_reviews.max(config.min_reviews));
        let mut reviews: Vec<Draft> = (0..n_reviews)
            .map(|_| Draft {
                labels: Aspect::ALL
                    .iter()
                    .enumerate()
                    .filter_map(|(k, a)| {
                        let mentioned = rng.random_bool(MENTION_RATE[k]);
                        mentioned.then(|| (*a, draw_polarity(&mut rng, targets[k])))
                    })
                    .collect(),
            })
            .collect();
        for (k, aspect) in Aspect::ALL.iter().enumerate() {
            loop {
                let lacking: Vec<usize> = (0..reviews.len()).filter(|&r| !reviews[r].labels.contains_key(aspect)).collect();
                if reviews.len() - lacking.len() >= config.min_mentions as usize || lacking.is_empty() {
                    break;
                }
                let r = *lacking.choose(&mut rng).expect("non-empty");
                let p = draw_polarity(&mut rng, targets[k]);
                reviews[r].labels.insert(*aspect, p);
            }
        }
        if downsampled[i] {
            let keep = rng.random_range(0..=5usize);
            let mut with: Vec<usize> = (0..reviews.len()).filter(|&r| reviews[r].labels.contains_key(&Aspect::Finances)).collect();
            with.shuffle(&mut rng);
            for &r in with.iter().skip(keep) {
                reviews[r].labels.remove(&Aspect::Finances);
            }
        }
        drafts.push(reviews);
    }

    let densities: Vec<f64> = facilities.iter().map(|f| density_of[facility_cbg[&f.facility_id].as_str()]).collect();
    let density_z = census::zscore("population_density", &densities).expect("generated densities vary");

    let noise = Normal::new(0.0, config.planted.noise_sd.max(0.0)).expect("valid normal");
    let m = &config.planted;
    let mut reviews = Vec::new();
    let mut omitted_ids = Vec::new();
    let mut labels_truth = BTreeMap::new();
    let mut truths = Vec::new();
    let mut counter = 0usize;
    let mut next_review = |rng: &mut ChaCha8Rng, facility_id: &str, rating: u8, text: Option<String>, omitted: &mut Vec<String>| {
        counter += 1;
        let user = format!("u{counter:07}");
        let ts = 1_577_836_800_000i64 + rng.random_range(0..126_230_400_000i64);
        let review_id = if rng.random_bool(0.03) {
            let id = synthesize_review_id(Some(&user), facility_id, Some(ts));
            omitted.push(id.clone());
            id
        } else {
            format!("r{counter:08}")
        };
        Review {
            review_id,
            facility_id: facility_id.to_string(),
            rating,
            text,
            timestamp: Some(ts),
            user_id: Some(user),
        }
    };

    for (i, facility) in facilities.iter_mut().enumerate() {
        let drafts = &drafts[i];
        let mean_of = |aspect: Aspect| {
            let scores: Vec<f64> = drafts.iter().filter_map(|d| d.labels.get(&aspect)).map(|p| polarity_to_score(*p)).collect();
            scores.iter().sum::<f64>() / scores.len() as f64
        };
        let (ip, oe) = (mean_of(Aspect::InterpersonalFactors), mean_of(Aspect::OperationalEfficiency));
        let target = (m.intercept + m.interpersonal * ip + m.operational_efficiency * oe + m.density * density_z[i] + noise.sample(&mut rng))
            .clamp(1.0, 5.0);
        let n = drafts.len();
        let total = ((target * n as f64).round() as usize).clamp(n, 5 * n);
        let mut stars = vec![(total / n) as u8; n];
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        for &k in order.iter().take(total % n) {
            stars[k] += 1;
        }

        let mut all_ratings = Vec::new();
        for (d, star) in drafts.iter().zip(&stars) {
            let text = build_text(&mut rng, &d.labels);
            let review = next_review(&mut rng, &facility.facility_id, *star, Some(text), &mut omitted_ids);
            labels_truth.insert(review.review_id.clone(), d.labels.clone());
            all_ratings.push(f64::from(*star));
            reviews.push(review);
        }
        for _ in 0..rng.random_range(0..=3) {
            let star = rng.random_range(1..=5u8);
            let text = if rng.random_bool(0.5) { None } else { Some("   ".to_string()) };
            all_ratings.push(f64::from(star));
            reviews.push(next_review(&mut rng, &facility.facility_id, star, text, &mut omitted_ids));
        }
        let meta = all_ratings.iter().sum::<f64>() / all_ratings.len() as f64;
        facility.meta_avg_rating = Some((meta * 10.0).round() / 10.0);
        facility.meta_num_ratings = Some(all_ratings.len() as u64);
        truths.push(FacilityTruth {
            facility_id: facility.facility_id.clone(),
            region: facility.region,
            cbg_id: facility_cbg[&facility.facility_id].clone(),
            interpersonal_mean: ip,
            operational_efficiency_mean: oe,
            density_z: density_z[i],
            target_rating: target,
            mean_rating: total as f64 / n as f64,
            finance_downsampled: downsampled[i],
        });
    }

    for d in 0..config.n_decoys {
        let id = format!("dec{:05}", d + 1);
        let (name, tags, address, lon, lat) = if d % 2 == 0 {
            let area = &AREAS[d % AREAS.len()];
            let lon = rng.random_range(area.lon.0..area.lon.1);
            let lat = rng.random_range(area.lat.0..area.lat.1);
            (
                format!("Bright Smiles Dental {}", d + 1),
                vec!["Dentist".to_string()],
                format!("{} Oak Ave, {}, {} {}", 10 + d, area.city, area.code, area.zip),
                lon,
                lat,
            )
        } else {
            (
                format!("Lone Star Urgent Care {}", d + 1),
                vec!["Urgent care center".to_string()],
                format!("{} Elm St, Houston, TX 77002", 10 + d),
                rng.random_range(-95.6..-95.2),
                rng.random_range(29.6..29.9),
            )
        };
        let mut f = Facility {
            facility_id: id.clone(),
            name,
            address,
            latitude: lat,
            longitude: lon,
            category_tags: tags,
            meta_avg_rating: Some(4.0),
            meta_num_ratings: Some(5),
            state: None,
            region: Region::Other,
        };
        f.state = crate::corpus::parse_state(&f.address);
        f.region = f.state.as_deref().map(Region::from_state).unwrap_or(Region::Other);
        for _ in 0..5 {
            let labels: BTreeMap<Aspect, Polarity> = [(Aspect::InterpersonalFactors, draw_polarity(&mut rng, 0.0))].into();
            let text = build_text(&mut rng, &labels);
            let star = rng.random_range(1..=5u8);
            reviews.push(next_review(&mut rng, &id, star, Some(text), &mut omitted_ids));
        }
        facilities.push(f);
    }

    let mut candidates: Vec<&String> = labels_truth.keys().collect();
    candidates.shuffle(&mut rng);
    let mut gold_ids: Vec<String> = candidates.into_iter().take(config.gold_reviews).cloned().collect();
    gold_ids.sort();
    let mut annotations = Vec::new();
    for id in &gold_ids {
        let planted = &labels_truth[id];
        for annotator in 1..=config.annotators {
            let mut labels = BTreeMap::new();
            for (a, p) in planted {
                let u: f64 = rng.random();
                if u < config.annotator_noise / 2.0 {
                    continue;
                }
                let p = if u < config.annotator_noise {
                    let others: Vec<Polarity> = Polarity::ALL.into_iter().filter(|q| q != p).collect();
                    *others.choose(&mut rng).expect("two others")
                } else {
                    *p
                };
                labels.insert(*a, p);
            }
            annotations.push(AnnotationRecord {
                review_id: id.clone(),
                annotator_id: annotator,
                labels,
            });
        }
    }

    reviews.sort_by(|a, b| a.review_id.cmp(&b.review_id));
    omitted_ids.sort();
    SynthCorpus {
        facilities,
        reviews,
        omitted_ids,
        cbg_profiles,
        geometries,
        facility_cbg,
        annotations,
        truth: GroundTruth {
            config: config.clone(),
            facilities: truths,
            labels: labels_truth,
            gold_review_ids: gold_ids,
        },
    }
}

impl SynthCorpus {
    /// Writes the input files the pipeline consumes and returns their paths.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let mut create = |name: &str| -> std::io::Result<BufWriter<fs::File>> {
            let path = dir.join(name);
            written.push(path.clone());
            Ok(BufWriter::new(fs::File::create(path)?))
        };

        let mut w = create(POIS_FILE)?;
        write_facilities(&mut w, &self.facilities)?;
        w.flush()?;

        let mut w = create(REVIEWS_FILE)?;
        for r in &self.reviews {
            let mut record = review_to_record(r);
            if self.omitted_ids.binary_search(&r.review_id).is_ok() {
                record.as_object_mut().expect("object").remove("review_id");
            }
            serde_json::to_writer(&mut w, &record)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;

        let mut w = create(CBG_PROFILES_FILE)?;
        census::write_cbg_profiles(&mut w, &self.cbg_profiles).map_err(std::io::Error::other)?;
        w.flush()?;

        let mut w = create(CBG_GEOMETRIES_FILE)?;
        serde_json::to_writer(&mut w, &census::geometries_to_geojson(&self.geometries))?;
        w.flush()?;

        let mut w = create(FACILITY_CBG_FILE)?;
        writeln!(w, "facility_id,cbg_id")?;
        for (f, c) in &self.facility_cbg {
            writeln!(w, "{f},{c}")?;
        }
        w.flush()?;

        let mut w = create(ANNOTATIONS_FILE)?;
        write_annotations(&mut w, &self.annotations).map_err(std::io::Error::other)?;
        w.flush()?;

        let mut w = create(GROUND_TRUTH_FILE)?;
        serde_json::to_writer_pretty(&mut w, &self.truth)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::absa::lexicon::{POLAR_CUES, TOPIC_CUES};
    use crate::absa::lexicon::Lexicon;

    fn small() -> SynthConfig {
        SynthConfig {
            n_facilities: 40,
            n_decoys: 6,
            gold_reviews: 50,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn vocabulary_comes_from_the_lexicon() {
        for (k, topics) in TOPICS.iter().enumerate() {
            for t in *topics {
                assert!(TOPIC_CUES.contains(&(*t, Aspect::ALL[k])), "{t}");
            }
        }
        let lex = Lexicon::builtin();
        for f in FILLERS {
            assert!(lex.classify(f).is_empty(), "{f}");
        }
        assert!(POLAR_CUES.iter().all(|(w, _, _)| !GOOD.contains(w) && !BAD.contains(w)));
    }

    #[test]
    fn same_seed_same_corpus() {
        assert_eq!(generate(&small()), generate(&small()));
        let other = SynthConfig { seed: 7, ..small() };
        assert_ne!(generate(&small()).reviews, generate(&other).reviews);
    }

    #[test]
    fn lexicon_recovers_planted_labels() {
        let c = generate(&small());
        let lex = Lexicon::builtin();
        let by_id: BTreeMap<&str, &Review> = c.reviews.iter().map(|r| (r.review_id.as_str(), r)).collect();
        let mut agree = 0;
        for (id, planted) in &c.truth.labels {
            if &lex.classify(by_id[id.as_str()].text.as_deref().unwrap()) == planted {
                agree += 1;
            }
        }
        assert!(agree as f64 >= 0.99 * c.truth.labels.len() as f64);
    }

    #[test]
    fn mentions_and_ratings_follow_the_plan() {
        let cfg = SynthConfig { finance_coverage: 0.3, ..small() };
        let c = generate(&cfg);
        for t in &c.truth.facilities {
            let labels: Vec<&BTreeMap<Aspect, Polarity>> = c
                .reviews
                .iter()
                .filter(|r| r.facility_id == t.facility_id)
                .filter_map(|r| c.truth.labels.get(&r.review_id))
                .collect();
            for a in Aspect::ALL {
                let n = labels.iter().filter(|l| l.contains_key(&a)).count() as u64;
                if a == Aspect::Finances && t.finance_downsampled {
                    assert!(n <= 5);
                } else {
                    assert!(n >= cfg.min_mentions, "{} {a:?} {n}", t.facility_id);
                }
            }
            let n_text = labels.len() as f64;
            assert!((t.mean_rating - t.target_rating).abs() <= 0.5 / n_text + 1e-12 || t.target_rating == 1.0 || t.target_rating == 5.0);
        }
        let kept = c.truth.facilities.iter().filter(|t| !t.finance_downsampled).count();
        assert_eq!(kept, 12);
    }

    #[test]
    fn facilities_sit_inside_their_block_group() {
        let c = generate(&small());
        for f in c.facilities.iter().filter(|f| f.facility_id.starts_with("fac")) {
            assert_eq!(census::assign_cbg(f.longitude, f.latitude, &c.geometries), Some(c.facility_cbg[&f.facility_id].as_str()));
        }
    }
}
