//! One function per subcommand. Every stage reads only persisted artifacts
//! and its configured inputs, so deleting a stage directory and rerunning
//! the stage reproduces it byte for byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use urgentcare_core::absa::{
    classify_batch, Aspect, AspectSentimentSet, BackendKind, BatchError, BatchOptions, Classifier, SentimentRecord,
};
use urgentcare_core::aggregate::{apply_filter, facility_profiles, region_summary, write_profiles_csv, FacilityAspectProfile, FilterPolicy};
use urgentcare_core::census::{
    join_covariates, load_cbg_profiles, load_geometries, load_join_table, CbgSource, Covariate, EnrichedProfile,
};
use urgentcare_core::corpus::{
    corpus_summary, drop_textless, filter_region, filter_urgent_care, load_facilities, load_reviews, reviews_for,
    write_facilities, write_reviews, CorpusError, InputFormat,
};
use urgentcare_core::evalharness::{flatten, read_annotations, score, GoldSet};
use urgentcare_core::report::{boxplots_json, facilities_geojson, fit_table, vif_table};
use urgentcare_core::stats::{
    corr_matrix, fit_interactions, fit_model1, fit_model2, model2_design, sensitivity_run, vif, RegressionFit,
    SensitivityResult, VifReport,
};
use urgentcare_core::synth::{self, generate, GroundTruth};

use crate::config::{InputPaths, RunConfig};
use crate::error::CliError;
use crate::manifest::{io_err, RunManifest, StageDir, MANIFEST_FILE, TIMINGS_FILE};

pub const INGEST: &str = "ingest";
pub const CLASSIFY: &str = "classify";
pub const EVALUATE: &str = "evaluate";
pub const AGGREGATE: &str = "aggregate";
pub const JOIN_CENSUS: &str = "join-census";
pub const FIT: &str = "fit";
pub const REPORT: &str = "report";
pub const SYNTHESIZE: &str = "synthesize";
pub const E2E_CHECK: &str = "e2e-check";

/// Directory written by `synthesize`, relative to the output directory.
pub const SYNTHETIC_DIR: &str = "synthetic";
/// Config written next to the synthetic corpus.
pub const SYNTHETIC_CONFIG: &str = "run.toml";

pub const FACILITIES_FILE: &str = "facilities.jsonl";
pub const REVIEWS_FILE: &str = "reviews.jsonl";
pub const SENTIMENTS_FILE: &str = "sentiments.jsonl";
pub const PARTIAL_FILE: &str = "sentiments.partial.jsonl";
pub const PROFILES_FILE: &str = "profiles.json";
pub const ENRICHED_FILE: &str = "enriched.json";
pub const FITS_FILE: &str = "fits.json";

fn require_input<'a>(stage: &str, path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    let p = path
        .as_deref()
        .ok_or_else(|| CliError::usage(stage, format!("{what} file not configured")))?;
    if !p.is_file() {
        return Err(CliError::usage(stage, format!("{what} file not found: {}", p.display())));
    }
    Ok(p)
}

/// Path of a completed upstream artifact.
fn artifact(cfg: &RunConfig, stage: &str, upstream: &str, file: &str) -> Result<PathBuf, CliError> {
    let dir = cfg.out_dir.join(upstream);
    let p = dir.join(file);
    if !dir.join(MANIFEST_FILE).is_file() || !p.is_file() {
        return Err(CliError::usage(
            stage,
            format!("missing {upstream} output {}; run `{upstream}` first", p.display()),
        ));
    }
    Ok(p)
}

fn corpus_err(stage: &str, e: CorpusError) -> CliError {
    match e {
        CorpusError::Write(_) => CliError::failure(stage, e.to_string()),
        _ => CliError::usage(stage, e.to_string()),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(stage: &str, path: &Path) -> Result<T, CliError> {
    let bytes = fs::read(path).map_err(|e| io_err(stage, path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::usage(stage, format!("{}: {e}", path.display())))
}

pub fn read_sentiments(stage: &str, path: &Path) -> Result<Vec<SentimentRecord>, CliError> {
    let file = File::open(path).map_err(|e| io_err(stage, path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(stage, path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| CliError::usage(stage, format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

fn sentiment_sets(records: &[SentimentRecord]) -> BTreeMap<String, AspectSentimentSet> {
    records.iter().filter_map(|r| r.to_set().map(|s| (r.review_id.clone(), s))).collect()
}

fn to_bytes(stage: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::failure(stage, e.to_string()))?;
    Ok(buf)
}

pub fn ingest(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let pois = require_input(INGEST, &cfg.inputs.pois, "poi")?;
    let reviews_path = require_input(INGEST, &cfg.inputs.reviews, "review")?;
    let mut st = StageDir::create(&cfg.out_dir, INGEST)?;
    st.input(pois)?;
    st.input(reviews_path)?;

    let t = Instant::now();
    let all = load_facilities(pois).map_err(|e| corpus_err(INGEST, e))?;
    let reviews = load_reviews(reviews_path, cfg.inputs.reviews_format).map_err(|e| corpus_err(INGEST, e))?;
    st.phase("load", t);

    let urgent = filter_urgent_care(&all, &cfg.keyword).map_err(|e| corpus_err(INGEST, e))?;
    let kept = filter_region(&urgent, &cfg.regions);
    let kept_reviews = reviews_for(&reviews, &kept);
    let summary = corpus_summary(&kept_reviews, &kept);

    let facilities_bytes = to_bytes(INGEST, |b| write_facilities(b, &kept.facilities))?;
    st.write(FACILITIES_FILE, &facilities_bytes)?;
    let reviews_bytes = to_bytes(INGEST, |b| write_reviews(b, &kept_reviews.reviews))?;
    st.write(REVIEWS_FILE, &reviews_bytes)?;
    st.write_json("summary.json", &summary)?;

    st.count("facilities_input", all.facilities.len());
    st.count("facilities_malformed", all.malformed);
    st.count("facilities_urgent_care", urgent.facilities.len());
    st.count("facilities_unresolved_region", urgent.unresolved_regions());
    st.count("facilities_kept", kept.facilities.len());
    st.count("reviews_input", reviews.reviews.len());
    st.count("reviews_malformed", reviews.malformed);
    st.count("reviews_kept", kept_reviews.reviews.len());
    st.count("reviews_with_text", summary.n_reviews_with_text);
    st.finish(cfg)
}

/// Successful records from an interrupted run that still apply.
fn resumable(path: &Path, label: &str, wanted: &BTreeSet<&str>) -> BTreeMap<String, SentimentRecord> {
    let Ok(file) = File::open(path) else {
        return BTreeMap::new();
    };
    BufReader::new(file)
        .lines()
        .map_while(Result::ok)
        // a torn final line simply fails to parse
        .filter_map(|l| serde_json::from_str::<SentimentRecord>(&l).ok())
        .filter(|r| !r.is_failure() && r.backend == label && wanted.contains(r.review_id.as_str()))
        .map(|r| (r.review_id.clone(), r))
        .collect()
}

pub fn classify(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let reviews_path = artifact(cfg, CLASSIFY, INGEST, REVIEWS_FILE)?;
    let classifier = Classifier::new(cfg.backend.clone()).map_err(|e| CliError::usage(CLASSIFY, e.to_string()))?;
    let reviews = drop_textless(&load_reviews(&reviews_path, InputFormat::JsonLines).map_err(|e| corpus_err(CLASSIFY, e))?);
    let mut st = StageDir::create(&cfg.out_dir, CLASSIFY)?;
    st.input(&reviews_path)?;

    let label = cfg.backend.backend_label();
    let wanted: BTreeSet<&str> = reviews.reviews.iter().map(|r| r.review_id.as_str()).collect();
    let partial_path = st.path(PARTIAL_FILE);
    let mut records = resumable(&partial_path, &label, &wanted);
    let resumed = records.len();
    let todo: Vec<_> = reviews.reviews.iter().filter(|r| !records.contains_key(&r.review_id)).cloned().collect();

    let mut clean = Vec::new();
    for r in records.values() {
        serde_json::to_writer(&mut clean, r).map_err(|e| CliError::failure(CLASSIFY, e.to_string()))?;
        clean.push(b'\n');
    }
    fs::write(&partial_path, &clean).map_err(|e| io_err(CLASSIFY, &partial_path, e))?;
    let partial = OpenOptions::new().append(true).open(&partial_path).map_err(|e| io_err(CLASSIFY, &partial_path, e))?;
    let partial = Mutex::new(partial);
    let append = |r: &SentimentRecord| {
        if r.is_failure() {
            return;
        }
        if let Ok(mut line) = serde_json::to_vec(r) {
            line.push(b'\n');
            let _ = partial.lock().map(|mut f| f.write_all(&line));
        }
    };

    let t = Instant::now();
    let out = match classify_batch(&todo, &classifier, BatchOptions::from_config(&cfg.backend), Some(&append)) {
        Ok(out) => out,
        Err(e @ BatchError::TooManyFailures { .. }) => {
            return Err(CliError::failure(
                CLASSIFY,
                format!("{e}; finished records are kept in {} and a rerun resumes from them", partial_path.display()),
            ));
        }
        Err(e) => return Err(CliError::usage(CLASSIFY, e.to_string())),
    };
    st.phase("classify", t);
    drop(partial);
    records.extend(out.records);

    st.write_jsonl(SENTIMENTS_FILE, records.values())?;
    fs::remove_file(&partial_path).map_err(|e| io_err(CLASSIFY, &partial_path, e))?;

    let failed = records.values().filter(|r| r.is_failure()).count();
    let none = records.values().filter(|r| !r.is_failure() && r.none_flag).count();
    let mut mentions: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records.values() {
        for a in r.labels.keys() {
            *mentions.entry(a.label()).or_default() += 1;
        }
    }
    st.count("backend", &label);
    st.count("reviews", records.len());
    st.count("labeled", records.len() - failed);
    st.count("failed", failed);
    st.count("no_aspect", none);
    st.count("aspect_mentions", mentions);
    st.run_stats.insert("resumed".into(), resumed.into());
    st.run_stats.insert("classified_this_run".into(), todo.len().into());
    st.run_stats.insert("batch".into(), serde_json::to_value(out.stats).unwrap_or_default());
    st.finish(cfg)
}

fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

/// Scores every backend found in the prediction files against the gold set.
pub fn evaluate(cfg: &RunConfig, extra_predictions: &[PathBuf]) -> Result<RunManifest, CliError> {
    let ann = require_input(EVALUATE, &cfg.inputs.annotations, "annotation")?;
    let mut sources: Vec<PathBuf> = Vec::new();
    let own = cfg.out_dir.join(CLASSIFY).join(SENTIMENTS_FILE);
    if own.is_file() && cfg.out_dir.join(CLASSIFY).join(MANIFEST_FILE).is_file() {
        sources.push(own);
    }
    for p in extra_predictions {
        if !p.is_file() {
            return Err(CliError::usage(EVALUATE, format!("prediction file not found: {}", p.display())));
        }
        sources.push(p.clone());
    }
    if sources.is_empty() {
        return Err(CliError::usage(EVALUATE, "no predictions; run `classify` first or pass --predictions"));
    }

    let mut st = StageDir::create(&cfg.out_dir, EVALUATE)?;
    st.input(ann)?;
    let file = File::open(ann).map_err(|e| io_err(EVALUATE, ann, e))?;
    let annotations = read_annotations(file).map_err(|e| CliError::usage(EVALUATE, e.to_string()))?;
    let gold = GoldSet::from_annotations(&annotations);

    let mut by_backend: BTreeMap<String, BTreeMap<String, AspectSentimentSet>> = BTreeMap::new();
    for src in &sources {
        st.input(src)?;
        for r in read_sentiments(EVALUATE, src)? {
            let Some(set) = r.to_set() else { continue };
            if by_backend.entry(r.backend.clone()).or_default().insert(r.review_id.clone(), set).is_some() {
                return Err(CliError::usage(
                    EVALUATE,
                    format!("review {} has two {} predictions", r.review_id, r.backend),
                ));
            }
        }
    }
    if by_backend.is_empty() {
        return Err(CliError::usage(EVALUATE, "prediction files hold no usable records"));
    }

    let mut stems = BTreeSet::new();
    for (backend, preds) in &by_backend {
        let missing: BTreeSet<String> = gold.reviews.iter().filter(|r| !preds.contains_key(*r)).cloned().collect();
        let scoped = gold.without_reviews(&missing);
        if scoped.entries.is_empty() {
            return Err(CliError::usage(
                EVALUATE,
                format!("no overlapping review_ids between the gold set and {backend} predictions"),
            ));
        }
        let rows = flatten(&scoped, preds).map_err(|e| CliError::failure(EVALUATE, e.to_string()))?;
        let report = score(&rows).map_err(|e| CliError::failure(EVALUATE, e.to_string()))?;
        let stem = file_stem(backend);
        if !stems.insert(stem.clone()) {
            return Err(CliError::usage(EVALUATE, format!("backend labels collide on file name {stem}")));
        }
        st.write_json(
            &format!("{stem}.json"),
            &json!({
                "backend": backend,
                "gold_reviews": gold.reviews.len(),
                "reviews_without_prediction": missing.len(),
                "gold": scoped.summary(),
                "report": report,
            }),
        )?;
        st.write(&format!("{stem}.txt"), report.to_table(&format!("Sentiment classification: {backend}")).as_bytes())?;
        st.count(&format!("{backend}.rows"), rows.len());
        st.count(&format!("{backend}.accuracy"), report.accuracy);
    }
    st.count("gold_reviews", gold.reviews.len());
    st.count("gold_unresolved", gold.unresolved.len());
    st.finish(cfg)
}

pub fn aggregate(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let fac_path = artifact(cfg, AGGREGATE, INGEST, FACILITIES_FILE)?;
    let rev_path = artifact(cfg, AGGREGATE, INGEST, REVIEWS_FILE)?;
    let sent_path = artifact(cfg, AGGREGATE, CLASSIFY, SENTIMENTS_FILE)?;
    let mut st = StageDir::create(&cfg.out_dir, AGGREGATE)?;
    for p in [&fac_path, &rev_path, &sent_path] {
        st.input(p)?;
    }
    let facilities = load_facilities(&fac_path).map_err(|e| corpus_err(AGGREGATE, e))?;
    let reviews = load_reviews(&rev_path, InputFormat::JsonLines).map_err(|e| corpus_err(AGGREGATE, e))?;
    let sentiments = sentiment_sets(&read_sentiments(AGGREGATE, &sent_path)?);

    let out = facility_profiles(&facilities, &reviews, &sentiments, cfg.rating_source)
        .map_err(|e| CliError::usage(AGGREGATE, e.to_string()))?;
    let regions = region_summary(&out.profiles, &reviews, &sentiments).map_err(|e| CliError::usage(AGGREGATE, e.to_string()))?;

    st.write_json(PROFILES_FILE, &out.profiles)?;
    let csv_bytes = to_bytes(AGGREGATE, |b| write_profiles_csv(b, &out.profiles).map_err(std::io::Error::other))?;
    st.write("profiles.csv", &csv_bytes)?;
    st.write_json("region_summary.json", &regions)?;

    st.count("profiles", out.profiles.len());
    st.count("omitted_no_text", out.omitted_no_text);
    st.count("unclassified_reviews", out.unclassified_reviews);
    st.count("admitted_strict", apply_filter(&out.profiles, &strict_policy(cfg)).len());
    st.count("admitted_relaxed", apply_filter(&out.profiles, &relaxed_policy(cfg)).len());
    st.finish(cfg)
}

pub fn strict_policy(cfg: &RunConfig) -> FilterPolicy {
    FilterPolicy::uniform(cfg.min_reviews)
}

pub fn relaxed_policy(cfg: &RunConfig) -> FilterPolicy {
    let mut p = FilterPolicy::uniform(cfg.min_reviews);
    p.min_per_aspect.insert(Aspect::Finances, cfg.relaxed_finances_min);
    p
}

pub fn join_census(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let prof_path = artifact(cfg, JOIN_CENSUS, AGGREGATE, PROFILES_FILE)?;
    let cbg_path = require_input(JOIN_CENSUS, &cfg.inputs.cbg_profiles, "cbg profile")?;
    let inputs: &InputPaths = &cfg.inputs;
    if inputs.cbg_geometries.is_none() && inputs.facility_cbg.is_none() {
        return Err(CliError::usage(JOIN_CENSUS, "neither cbg_geometries nor facility_cbg is configured"));
    }
    let mut st = StageDir::create(&cfg.out_dir, JOIN_CENSUS)?;
    st.input(&prof_path)?;
    st.input(cbg_path)?;
    let profiles: Vec<FacilityAspectProfile> = read_json(JOIN_CENSUS, &prof_path)?;
    let table = load_cbg_profiles(cbg_path).map_err(|e| CliError::usage(JOIN_CENSUS, e.to_string()))?;

    let out = if inputs.cbg_geometries.is_some() {
        let g = require_input(JOIN_CENSUS, &inputs.cbg_geometries, "cbg geometry")?;
        st.input(g)?;
        let set = load_geometries(g).map_err(|e| CliError::usage(JOIN_CENSUS, e.to_string()))?;
        st.count("geometries", set.geometries.len());
        st.count("geometries_rejected", set.rejected);
        join_covariates(&profiles, &table, CbgSource::Geometry(&set.geometries))
    } else {
        let j = require_input(JOIN_CENSUS, &inputs.facility_cbg, "facility-cbg")?;
        st.input(j)?;
        let (map, rejected) = load_join_table(j).map_err(|e| CliError::usage(JOIN_CENSUS, e.to_string()))?;
        st.count("join_rows_rejected", rejected);
        join_covariates(&profiles, &table, CbgSource::Lookup(&map))
    };
    if out.enriched.is_empty() {
        return Err(CliError::failure(JOIN_CENSUS, "no facility matched a block group with covariates"));
    }
    st.write_json(ENRICHED_FILE, &out.enriched)?;
    st.write_json("unmatched.json", &json!({"unassigned": out.unassigned, "missing_data": out.missing_data}))?;
    st.count("cbg_profiles", table.profiles.len());
    st.count("cbg_profiles_rejected", table.rejected);
    st.count("enriched", out.enriched.len());
    st.count("unassigned", out.unassigned.len());
    st.count("missing_data", out.missing_data.len());
    st.finish(cfg)
}

/// Everything `fit` produces, as persisted in `fits.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub strict_policy: FilterPolicy,
    pub relaxed_policy: FilterPolicy,
    pub n_joined: usize,
    pub n_sample: usize,
    pub model1: RegressionFit,
    pub model2: RegressionFit,
    pub vif: VifReport,
    pub interactions: Option<RegressionFit>,
    pub interactions_error: Option<String>,
    pub sensitivity: Option<SensitivityResult>,
    pub sensitivity_error: Option<String>,
}

pub fn fit(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let path = artifact(cfg, FIT, JOIN_CENSUS, ENRICHED_FILE)?;
    let mut st = StageDir::create(&cfg.out_dir, FIT)?;
    st.input(&path)?;
    let enriched: Vec<EnrichedProfile> = read_json(FIT, &path)?;
    let (strict, relaxed) = (strict_policy(cfg), relaxed_policy(cfg));
    let sample: Vec<EnrichedProfile> = enriched.iter().filter(|e| strict.admits(&e.profile)).cloned().collect();
    let profiles: Vec<FacilityAspectProfile> = sample.iter().map(|e| e.profile.clone()).collect();
    let stats_err = |e: urgentcare_core::stats::StatsError| CliError::failure(FIT, format!("{e} (n = {})", sample.len()));

    let model1 = fit_model1(&profiles).map_err(stats_err)?;
    let model2 = fit_model2(&sample).map_err(stats_err)?;
    let (x, _) = model2_design(&sample, &Aspect::ALL).map_err(stats_err)?;
    let vif = vif(&x).map_err(stats_err)?;
    let (interactions, interactions_error) = match fit_interactions(&sample) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (sensitivity, sensitivity_error) = match sensitivity_run(&enriched, &strict, &relaxed) {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let artifact = FitArtifact {
        strict_policy: strict,
        relaxed_policy: relaxed,
        n_joined: enriched.len(),
        n_sample: sample.len(),
        model1,
        model2,
        vif,
        interactions,
        interactions_error,
        sensitivity,
        sensitivity_error,
    };
    st.write_json(FITS_FILE, &artifact)?;
    st.count("n_joined", artifact.n_joined);
    st.count("n_sample", artifact.n_sample);
    st.count("model2_r2", artifact.model2.r2);
    st.finish(cfg)
}

pub fn report(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let prof_path = artifact(cfg, REPORT, AGGREGATE, PROFILES_FILE)?;
    let fits_path = artifact(cfg, REPORT, FIT, FITS_FILE)?;
    let mut st = StageDir::create(&cfg.out_dir, REPORT)?;
    st.input(&prof_path)?;
    st.input(&fits_path)?;
    let profiles: Vec<FacilityAspectProfile> = read_json(REPORT, &prof_path)?;
    let fits: FitArtifact = read_json(REPORT, &fits_path)?;
    let sample = apply_filter(&profiles, &fits.strict_policy);

    let mut tables = fit_table("Facility rating models", &[("Model 1", &fits.model1), ("Model 2", &fits.model2)]);
    if let Some(f) = &fits.interactions {
        tables.push('\n');
        tables.push_str(&fit_table("Interaction model (centered aspect means)", &[("Interactions", f)]));
    }
    if let Some(s) = &fits.sensitivity {
        tables.push('\n');
        tables.push_str(&fit_table(
            "Finances threshold sensitivity",
            &[("Strict", &s.strict), ("Relaxed", &s.relaxed)],
        ));
    }
    st.write("regression_tables.txt", tables.as_bytes())?;
    st.write("vif.txt", vif_table(&fits.vif).as_bytes())?;
    st.write_json("facilities.geojson", &facilities_geojson(&sample))?;
    st.write_json("boxplots.json", &boxplots_json(&sample))?;
    let (pooled, _) = corr_matrix(&sample, false);
    let (by_region, skipped) = corr_matrix(&sample, true);
    st.write_json(
        "correlations.json",
        &json!({"pooled": pooled.first(), "by_region": by_region, "skipped_regions": skipped}),
    )?;
    st.count("facilities_mapped", sample.len());
    st.finish(cfg)
}

/// Config that points a pipeline run at a synthetic corpus in `dir`.
fn synthetic_config(cfg: &RunConfig) -> RunConfig {
    RunConfig {
        out_dir: PathBuf::from(".."),
        inputs: InputPaths {
            reviews: Some(synth::REVIEWS_FILE.into()),
            reviews_format: InputFormat::JsonLines,
            pois: Some(synth::POIS_FILE.into()),
            cbg_profiles: Some(synth::CBG_PROFILES_FILE.into()),
            cbg_geometries: Some(synth::CBG_GEOMETRIES_FILE.into()),
            facility_cbg: Some(synth::FACILITY_CBG_FILE.into()),
            annotations: Some(synth::ANNOTATIONS_FILE.into()),
        },
        ..cfg.clone()
    }
}

pub fn synthesize(cfg: &RunConfig) -> Result<RunManifest, CliError> {
    let mut st = StageDir::create(&cfg.out_dir, SYNTHETIC_DIR)?;
    st.stage = SYNTHESIZE;
    let t = Instant::now();
    let corpus = generate(&cfg.synth);
    st.phase("generate", t);
    let written = corpus.write_to(&st.dir).map_err(|e| io_err(SYNTHESIZE, &st.dir, e))?;
    for p in &written {
        if let Some(name) = p.file_name().and_then(|n| n.to_str()) {
            st.adopt(name);
        }
    }
    let toml = toml::to_string(&synthetic_config(cfg)).map_err(|e| CliError::failure(SYNTHESIZE, e.to_string()))?;
    st.write(SYNTHETIC_CONFIG, toml.as_bytes())?;
    st.count("facilities", corpus.facilities.len());
    st.count("reviews", corpus.reviews.len());
    st.count("reviews_without_id", corpus.omitted_ids.len());
    st.count("cbg_profiles", corpus.cbg_profiles.len());
    st.count("annotations", corpus.annotations.len());
    st.finish(cfg)
}

/// One named pass/fail check of `e2e-check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

/// Pipeline stages in run order, after synthesis.
pub const PIPELINE: [&str; 7] = [INGEST, CLASSIFY, EVALUATE, AGGREGATE, JOIN_CENSUS, FIT, REPORT];

pub fn run_stage(cfg: &RunConfig, stage: &str) -> Result<RunManifest, CliError> {
    match stage {
        INGEST => ingest(cfg),
        CLASSIFY => classify(cfg),
        EVALUATE => evaluate(cfg, &[]),
        AGGREGATE => aggregate(cfg),
        JOIN_CENSUS => join_census(cfg),
        FIT => fit(cfg),
        REPORT => report(cfg),
        SYNTHESIZE => synthesize(cfg),
        other => Err(CliError::usage(other, "not a pipeline stage")),
    }
}

/// Digests of every deterministic file in the stage directories.
pub fn output_digests(out_dir: &Path, stages: &[&str]) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for stage in stages {
        let dir = out_dir.join(stage);
        let entries = fs::read_dir(&dir).map_err(|e| io_err(E2E_CHECK, &dir, e))?;
        let mut names: Vec<String> = entries
            .filter_map(Result::ok)
            .filter(|e| e.path().is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| n != TIMINGS_FILE)
            .collect();
        names.sort();
        for n in names {
            let p = dir.join(&n);
            let bytes = fs::read(&p).map_err(|e| io_err(E2E_CHECK, &p, e))?;
            out.insert(format!("{stage}/{n}"), urgentcare_core::sha256_hex(bytes));
        }
    }
    Ok(out)
}

/// Synthesizes a corpus, runs the whole pipeline on it with the lexicon
/// backend, checks the recovered coefficients against the planted model
/// and reruns every stage to compare output digests.
pub fn e2e_check(cfg: &RunConfig) -> Result<Vec<Check>, CliError> {
    synthesize(cfg)?;
    let mut run = RunConfig::load(&cfg.out_dir.join(SYNTHETIC_DIR).join(SYNTHETIC_CONFIG))?;
    run.backend.kind = BackendKind::Lexicon;
    run.backend.cache_dir = None;
    for stage in PIPELINE {
        run_stage(&run, stage)?;
    }
    let truth: GroundTruth = read_json(E2E_CHECK, &run.out_dir.join(SYNTHETIC_DIR).join(synth::GROUND_TRUTH_FILE))?;
    let fits: FitArtifact = read_json(E2E_CHECK, &run.out_dir.join(FIT).join(FITS_FILE))?;
    let planted = &truth.config.planted;
    let m2 = &fits.model2;
    let term = |name: &str| m2.term(name).unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN));
    let mut checks = Vec::new();

    let (b, _, _, p) = term(Aspect::InterpersonalFactors.table_label());
    checks.push(check(
        "interpersonal recovered",
        (b - planted.interpersonal).abs() <= 0.2 && p < 0.001,
        format!("beta {b:.4} (planted {}), p {p:.3e}", planted.interpersonal),
    ));
    let (b, _, _, p) = term(Aspect::OperationalEfficiency.table_label());
    checks.push(check(
        "operational efficiency recovered",
        (b - planted.operational_efficiency).abs() <= 0.1 && p < 0.001,
        format!("beta {b:.4} (planted {}), p {p:.3e}", planted.operational_efficiency),
    ));
    let (b, _, _, p) = term(Covariate::PopulationDensity.table_label());
    checks.push(check(
        "density positive",
        b > 0.0 && p < 0.05,
        format!("gamma {b:.4} (planted {}), p {p:.3e}", planted.density),
    ));
    for a in [Aspect::TechnicalQuality, Aspect::Finances, Aspect::FacilitiesAvailability] {
        let (b, _, _, p) = term(a.table_label());
        checks.push(check(&format!("{} null", a.table_label()), p > 0.05, format!("beta {b:.4}, p {p:.3}")));
    }

    let records = read_sentiments(E2E_CHECK, &run.out_dir.join(CLASSIFY).join(SENTIMENTS_FILE))?;
    let agree = records
        .iter()
        .filter(|r| truth.labels.get(&r.review_id).is_some_and(|l| *l == r.labels))
        .count();
    let share = agree as f64 / records.len().max(1) as f64;
    checks.push(check("lexicon matches planted labels", share >= 0.99, format!("{agree}/{} reviews", records.len())));

    let mut stages = vec![SYNTHETIC_DIR];
    stages.extend(PIPELINE);
    let before = output_digests(&run.out_dir, &stages)?;
    for stage in stages.iter() {
        let dir = run.out_dir.join(stage);
        fs::remove_dir_all(&dir).map_err(|e| io_err(E2E_CHECK, &dir, e))?;
    }
    synthesize(cfg)?;
    for stage in PIPELINE {
        run_stage(&run, stage)?;
    }
    let after = output_digests(&run.out_dir, &stages)?;
    let differing: Vec<&String> = before.keys().chain(after.keys()).filter(|k| before.get(*k) != after.get(*k)).collect();
    checks.push(check(
        "rerun is byte-identical",
        differing.is_empty() && !before.is_empty(),
        if differing.is_empty() { format!("{} files", before.len()) } else { format!("differs: {differing:?}") },
    ));

    let dir = run.out_dir.join(E2E_CHECK);
    fs::create_dir_all(&dir).map_err(|e| io_err(E2E_CHECK, &dir, e))?;
    let path = dir.join("checks.json");
    crate::manifest::write_json_pretty(&path, &checks).map_err(|e| io_err(E2E_CHECK, &path, e))?;
    Ok(checks)
}
