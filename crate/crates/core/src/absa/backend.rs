use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::lexicon::Lexicon;
use super::parse::parse_llm_response;
use super::prompt::{build_prompt, PromptError};
use super::{Aspect, AspectSentimentSet, Polarity};
use crate::corpus::Review;
use crate::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    RemoteLlm,
    Lexicon,
    ReplayCache,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::RemoteLlm => "remote-llm",
            BackendKind::Lexicon => "lexicon",
            BackendKind::ReplayCache => "replay-cache",
        }
    }
}

impl FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "remote-llm" | "remote" => Ok(BackendKind::RemoteLlm),
            "lexicon" => Ok(BackendKind::Lexicon),
            "replay-cache" | "replay" => Ok(BackendKind::ReplayCache),
            other => Err(format!("unknown backend `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub model_name: String,
    pub max_retries: u32,
    pub request_timeout_secs: f64,
    /// Requests per second.
    pub rate_limit: f64,
    /// First backoff delay; doubles per retry, with jitter.
    pub retry_base_ms: u64,
    pub endpoint: String,
    pub api_key_env: String,
    pub temperature: f64,
    pub cache_dir: Option<PathBuf>,
    pub concurrency: usize,
    pub max_failure_rate: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Lexicon,
            model_name: "gpt-4o-mini".into(),
            max_retries: 3,
            request_timeout_secs: 60.0,
            rate_limit: 5.0,
            retry_base_ms: 1000,
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            temperature: 0.0,
            cache_dir: None,
            concurrency: 4,
            max_failure_rate: 0.10,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |msg: &str| Err(BackendError::Config(msg.to_string()));
        if !(self.rate_limit.is_finite() && self.rate_limit > 0.0) {
            return bad("rate_limit must be > 0");
        }
        if !(self.request_timeout_secs.is_finite() && self.request_timeout_secs > 0.0) {
            return bad("request_timeout_secs must be > 0");
        }
        if self.concurrency == 0 {
            return bad("concurrency must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return bad("max_failure_rate must lie in [0, 1]");
        }
        if self.model_name.trim().is_empty() {
            return bad("model_name must not be empty");
        }
        Ok(())
    }

    /// Label recorded on every output record.
    pub fn backend_label(&self) -> String {
        match self.kind {
            BackendKind::Lexicon => "lexicon".to_string(),
            kind => format!("{}:{}", kind.as_str(), self.model_name),
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("invalid backend config: {0}")]
    Config(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("review {review_id}: {source}")]
    Prompt {
        review_id: String,
        #[source]
        source: PromptError,
    },
    #[error("review {review_id}: transport failed after {attempts} attempts: {source}")]
    Transport {
        review_id: String,
        attempts: u32,
        #[source]
        source: TransportError,
    },
    #[error("review {0}: no cached response")]
    CacheMiss(String),
    #[error("response cache: {0}")]
    Cache(#[from] std::io::Error),
}

#[derive(Debug, Clone, Error)]
pub enum TransportError {
    #[error("http: {0}")]
    Http(String),
    #[error("status {0}")]
    Status(u16),
    #[error("unexpected response body: {0}")]
    Body(String),
}

/// A chat-completion endpoint.
pub trait Transport: Send + Sync {
    fn complete(&self, model: &str, prompt: &str) -> Result<String, TransportError>;
}

/// OpenAI-compatible chat-completion client.
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoint: String,
    api_key: String,
    temperature: f64,
}

impl HttpTransport {
    pub fn new(config: &BackendConfig, api_key: String) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.request_timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            endpoint: config.endpoint.clone(),
            api_key,
            temperature: config.temperature,
        }
    }
}

impl Transport for HttpTransport {
    fn complete(&self, model: &str, prompt: &str) -> Result<String, TransportError> {
        let body = json!({
            "model": model,
            "temperature": self.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(&body)
            .map_err(|e| TransportError::Http(e.to_string()))?;
        let status = resp.status().as_u16();
        if status != 200 {
            return Err(TransportError::Status(status));
        }
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::Body(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_owned)
            .ok_or_else(|| TransportError::Body("missing choices[0].message.content".into()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheEntry {
    model: String,
    review_id: String,
    prompt_hash: String,
    response: String,
}

/// One JSON file per response under a content-hash path.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, model: &str, review_id: &str, prompt_hash: &str) -> PathBuf {
        let key = sha256_hex(format!("{model}\u{1f}{review_id}\u{1f}{prompt_hash}"));
        self.root.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn load(&self, model: &str, review_id: &str, prompt_hash: &str) -> std::io::Result<Option<String>> {
        let path = self.path_for(model, review_id, prompt_hash);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let entry: CacheEntry = serde_json::from_slice(&bytes)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        if entry.model != model || entry.review_id != review_id || entry.prompt_hash != prompt_hash {
            return Err(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("cache entry {} does not match its key", path.display()),
            ));
        }
        Ok(Some(entry.response))
    }

    /// Atomic write via rename.
    pub fn store(&self, model: &str, review_id: &str, prompt_hash: &str, response: &str) -> std::io::Result<()> {
        static SEQ: AtomicUsize = AtomicUsize::new(0);
        let path = self.path_for(model, review_id, prompt_hash);
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir)?;
        let entry = CacheEntry {
            model: model.into(),
            review_id: review_id.into(),
            prompt_hash: prompt_hash.into(),
            response: response.into(),
        };
        let tmp = dir.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            SEQ.fetch_add(1, Ordering::Relaxed)
        ));
        fs::write(&tmp, serde_json::to_vec_pretty(&entry).expect("cache entry serializes"))?;
        fs::rename(&tmp, &path)
    }
}

/// Canonical per-review output line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentRecord {
    pub review_id: String,
    pub labels: BTreeMap<Aspect, Polarity>,
    pub none_flag: bool,
    pub backend: String,
    pub prompt_hash: String,
    /// Set when classification failed; the review is excluded downstream.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SentimentRecord {
    pub fn is_failure(&self) -> bool {
        self.error.is_some()
    }

    pub fn to_set(&self) -> Option<AspectSentimentSet> {
        if self.is_failure() {
            return None;
        }
        Some(AspectSentimentSet {
            review_id: self.review_id.clone(),
            labels: self.labels.clone(),
            none_flag: self.none_flag,
        })
    }
}

#[derive(Debug, Default)]
struct Counters {
    remote_calls: AtomicUsize,
    cache_hits: AtomicUsize,
    retries: AtomicUsize,
    fence_stripped: AtomicUsize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchStats {
    pub total: usize,
    pub labeled: usize,
    pub failed: usize,
    pub remote_calls: usize,
    pub cache_hits: usize,
    pub retries: usize,
    pub fence_stripped: usize,
}

enum Engine {
    Remote(Box<dyn Transport>),
    Lexicon(Lexicon),
    Replay,
}

pub struct Classifier {
    config: BackendConfig,
    engine: Engine,
    cache: Option<ResponseCache>,
    counters: Counters,
    next_slot: Mutex<Option<Instant>>,
}

impl Classifier {
    /// Builds the configured backend. A remote backend needs its API key
    /// in the environment; a replay backend needs a cache directory.
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let engine = match config.kind {
            BackendKind::Lexicon => Engine::Lexicon(Lexicon::builtin()),
            BackendKind::ReplayCache => Engine::Replay,
            BackendKind::RemoteLlm => {
                let key = std::env::var(&config.api_key_env)
                    .ok()
                    .filter(|k| !k.trim().is_empty())
                    .ok_or_else(|| BackendError::MissingApiKey(config.api_key_env.clone()))?;
                Engine::Remote(Box::new(HttpTransport::new(&config, key)))
            }
        };
        Self::assemble(config, engine)
    }

    /// A remote-style classifier over a caller-supplied transport.
    pub fn with_transport(config: BackendConfig, transport: Box<dyn Transport>) -> Result<Self, BackendError> {
        config.validate()?;
        Self::assemble(config, Engine::Remote(transport))
    }

    fn assemble(config: BackendConfig, engine: Engine) -> Result<Self, BackendError> {
        let cache = config.cache_dir.clone().map(ResponseCache::new);
        if matches!(engine, Engine::Replay) && cache.is_none() {
            return Err(BackendError::Config("replay-cache backend requires cache_dir".into()));
        }
        Ok(Self {
            config,
            engine,
            cache,
            counters: Counters::default(),
            next_slot: Mutex::new(None),
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn stats_snapshot(&self) -> BatchStats {
        BatchStats {
            remote_calls: self.counters.remote_calls.load(Ordering::SeqCst),
            cache_hits: self.counters.cache_hits.load(Ordering::SeqCst),
            retries: self.counters.retries.load(Ordering::SeqCst),
            fence_stripped: self.counters.fence_stripped.load(Ordering::SeqCst),
            ..Default::default()
        }
    }

    fn wait_for_slot(&self) {
        let interval = Duration::from_secs_f64(1.0 / self.config.rate_limit);
        let now = Instant::now();
        let slot = {
            let mut next = self.next_slot.lock().expect("rate limiter lock");
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + interval);
            slot
        };
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        if self.config.retry_base_ms == 0 {
            return Duration::ZERO;
        }
        let base = self.config.retry_base_ms.saturating_mul(1u64 << attempt.min(16));
        let jitter = rand::rng().random_range(0..=base / 2);
        Duration::from_millis(base + jitter)
    }

    fn fetch(&self, transport: &dyn Transport, review_id: &str, prompt: &str, hash: &str) -> Result<String, BackendError> {
        let mut attempt = 0u32;
        loop {
            self.wait_for_slot();
            self.counters.remote_calls.fetch_add(1, Ordering::SeqCst);
            match transport.complete(&self.config.model_name, prompt) {
                Ok(raw) => {
                    if let Some(cache) = &self.cache {
                        cache.store(&self.config.model_name, review_id, hash, &raw)?;
                    }
                    return Ok(raw);
                }
                Err(source) if attempt >= self.config.max_retries => {
                    return Err(BackendError::Transport {
                        review_id: review_id.to_string(),
                        attempts: attempt + 1,
                        source,
                    });
                }
                Err(_) => {
                    self.counters.retries.fetch_add(1, Ordering::SeqCst);
                    std::thread::sleep(self.backoff(attempt));
                    attempt += 1;
                }
            }
        }
    }

    /// Classifies one review. Unparseable responses yield a failure record
    /// rather than an error.
    pub fn classify(&self, review: &Review) -> Result<SentimentRecord, BackendError> {
        let text = review.text.as_deref().unwrap_or("");
        let prompt = build_prompt(text).map_err(|source| BackendError::Prompt {
            review_id: review.review_id.clone(),
            source,
        })?;
        let hash = prompt.hash();
        let record = |labels: BTreeMap<Aspect, Polarity>, none_flag: bool, error: Option<String>| SentimentRecord {
            review_id: review.review_id.clone(),
            labels,
            none_flag,
            backend: self.config.backend_label(),
            prompt_hash: hash.clone(),
            error,
        };

        if let Engine::Lexicon(lexicon) = &self.engine {
            let labels = lexicon.classify(text);
            let none = labels.is_empty();
            return Ok(record(labels, none, None));
        }

        let model = &self.config.model_name;
        let cached = match &self.cache {
            Some(cache) => cache.load(model, &review.review_id, &hash)?,
            None => None,
        };
        let mut raw = match (cached, &self.engine) {
            (Some(raw), _) => {
                self.counters.cache_hits.fetch_add(1, Ordering::SeqCst);
                raw
            }
            (None, Engine::Remote(t)) => self.fetch(t.as_ref(), &review.review_id, &prompt.render(), &hash)?,
            (None, _) => return Err(BackendError::CacheMiss(review.review_id.clone())),
        };

        let mut reparses = 0u32;
        loop {
            match parse_llm_response(&raw) {
                Ok(parsed) => {
                    if parsed.fence_stripped {
                        self.counters.fence_stripped.fetch_add(1, Ordering::SeqCst);
                    }
                    return Ok(record(parsed.labels, parsed.none_flag, None));
                }
                Err(e) => {
                    let Engine::Remote(t) = &self.engine else {
                        return Ok(record(BTreeMap::new(), false, Some(format!("unparseable response: {e}"))));
                    };
                    if reparses >= self.config.max_retries {
                        return Ok(record(BTreeMap::new(), false, Some(format!("unparseable response: {e}"))));
                    }
                    reparses += 1;
                    self.counters.retries.fetch_add(1, Ordering::SeqCst);
                    raw = self.fetch(t.as_ref(), &review.review_id, &prompt.render(), &hash)?;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BatchOptions {
    pub concurrency: usize,
    pub max_failure_rate: f64,
}

impl BatchOptions {
    pub fn from_config(config: &BackendConfig) -> Self {
        Self {
            concurrency: config.concurrency,
            max_failure_rate: config.max_failure_rate,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutput {
    pub records: BTreeMap<String, SentimentRecord>,
    pub stats: BatchStats,
}

impl BatchOutput {
    pub fn sentiment_sets(&self) -> BTreeMap<String, AspectSentimentSet> {
        self.records
            .iter()
            .filter_map(|(id, r)| r.to_set().map(|s| (id.clone(), s)))
            .collect()
    }
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("duplicate review id `{0}` in batch")]
    DuplicateReview(String),
    #[error("review `{0}` has no text")]
    MissingText(String),
    #[error("{failed} of {total} classifications failed (limit {limit:.1}%)", limit = .limit * 100.0)]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit: f64,
        output: Box<BatchOutput>,
    },
}

/// Classifies every review. The result is keyed by review id, so it does not
/// depend on input order or on the degree of concurrency. Backend errors
/// become failure records and count toward the failure limit.
pub fn classify_batch(
    reviews: &[Review],
    classifier: &Classifier,
    options: BatchOptions,
    on_record: Option<&(dyn Fn(&SentimentRecord) + Sync)>,
) -> Result<BatchOutput, BatchError> {
    let mut seen = std::collections::HashSet::with_capacity(reviews.len());
    for r in reviews {
        if !r.has_text() {
            return Err(BatchError::MissingText(r.review_id.clone()));
        }
        if !seen.insert(r.review_id.as_str()) {
            return Err(BatchError::DuplicateReview(r.review_id.clone()));
        }
    }

    let before = classifier.stats_snapshot();
    let slots: Vec<Mutex<Option<SentimentRecord>>> = reviews.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = options.concurrency.max(1).min(reviews.len().max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(review) = reviews.get(i) else { break };
                let record = classifier.classify(review).unwrap_or_else(|e| SentimentRecord {
                    review_id: review.review_id.clone(),
                    labels: BTreeMap::new(),
                    none_flag: false,
                    backend: classifier.config.backend_label(),
                    prompt_hash: build_prompt(review.text.as_deref().unwrap_or(""))
                        .map(|p| p.hash())
                        .unwrap_or_default(),
                    error: Some(e.to_string()),
                });
                if let Some(cb) = on_record {
                    cb(&record);
                }
                *slots[i].lock().expect("result slot") = Some(record);
            });
        }
    });

    let mut records = BTreeMap::new();
    for slot in slots {
        let record = slot.into_inner().expect("result slot").expect("every review processed");
        let previous = records.insert(record.review_id.clone(), record);
        debug_assert!(previous.is_none());
    }
    let after = classifier.stats_snapshot();
    let failed = records.values().filter(|r| r.is_failure()).count();
    let stats = BatchStats {
        total: records.len(),
        labeled: records.len() - failed,
        failed,
        remote_calls: after.remote_calls - before.remote_calls,
        cache_hits: after.cache_hits - before.cache_hits,
        retries: after.retries - before.retries,
        fence_stripped: after.fence_stripped - before.fence_stripped,
    };
    let output = BatchOutput { records, stats };
    if !reviews.is_empty() && failed as f64 / reviews.len() as f64 > options.max_failure_rate {
        return Err(BatchError::TooManyFailures {
            failed,
            total: reviews.len(),
            limit: options.max_failure_rate,
            output: Box::new(output),
        });
    }
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::absa::canonical_json;

    fn review(id: &str, text: &str) -> Review {
        Review {
            review_id: id.into(),
            facility_id: "f".into(),
            rating: 4,
            text: Some(text.into()),
            timestamp: None,
            user_id: None,
        }
    }

    /// Answers with the lexicon's canonical JSON; the first `fail_first`
    /// calls fail at the transport level.
    struct ScriptedTransport {
        calls: AtomicUsize,
        fail_first: usize,
        garbage_first: usize,
    }

    impl ScriptedTransport {
        fn new(fail_first: usize, garbage_first: usize) -> Self {
            Self {
                calls: AtomicUsize::new(0),
                fail_first,
                garbage_first,
            }
        }
    }

    impl Transport for ScriptedTransport {
        fn complete(&self, _model: &str, prompt: &str) -> Result<String, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.fail_first {
                return Err(TransportError::Status(503));
            }
            if n < self.fail_first + self.garbage_first {
                return Ok("Sure! Here is the analysis.".into());
            }
            let review = prompt
                .split("The review content is: ")
                .nth(1)
                .and_then(|s| s.split('\n').next())
                .unwrap();
            Ok(canonical_json(&Lexicon::builtin().classify(review)))
        }
    }

    fn remote_config(cache: Option<&Path>) -> BackendConfig {
        BackendConfig {
            kind: BackendKind::RemoteLlm,
            retry_base_ms: 0,
            rate_limit: 1.0e6,
            max_retries: 2,
            cache_dir: cache.map(Path::to_path_buf),
            ..Default::default()
        }
    }

    #[test]
    fn config_validation() {
        let mut c = BackendConfig::default();
        assert!(c.validate().is_ok());
        c.rate_limit = 0.0;
        assert!(matches!(c.validate(), Err(BackendError::Config(_))));
    }

    #[test]
    fn remote_requires_api_key() {
        let config = BackendConfig {
            kind: BackendKind::RemoteLlm,
            api_key_env: "URGENTCARE_TEST_KEY_THAT_IS_NEVER_SET".into(),
            ..Default::default()
        };
        assert!(matches!(Classifier::new(config), Err(BackendError::MissingApiKey(_))));
    }

    #[test]
    fn lexicon_gibberish_is_none() {
        let c = Classifier::new(BackendConfig::default()).unwrap();
        let rec = c.classify(&review("r", "asdf qwerty")).unwrap();
        assert!(rec.none_flag);
        assert!(rec.labels.is_empty());
        assert_eq!(rec.backend, "lexicon");
    }

    #[test]
    fn cached_reviews_skip_remote_calls() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path());
        let reviews = vec![
            review("a", "The staff was rude."),
            review("b", "Clean clinic."),
            review("c", "asdf"),
        ];
        for r in &reviews {
            let hash = build_prompt(r.text.as_deref().unwrap()).unwrap().hash();
            let labels = Lexicon::builtin().classify(r.text.as_deref().unwrap());
            cache.store("gpt-4o-mini", &r.review_id, &hash, &canonical_json(&labels)).unwrap();
        }
        let transport = ScriptedTransport::new(0, 0);
        let classifier =
            Classifier::with_transport(remote_config(Some(dir.path())), Box::new(transport)).unwrap();
        let out = classify_batch(&reviews, &classifier, BatchOptions::from_config(classifier.config()), None).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.stats.remote_calls, 0);
        assert_eq!(out.stats.cache_hits, 3);
    }

    #[test]
    fn transport_failures_are_retried() {
        let dir = tempfile::tempdir().unwrap();
        let reviews: Vec<Review> = (0..100)
            .map(|i| review(&format!("r{i:03}"), "The wait was long but the nurse was kind."))
            .collect();
        let classifier =
            Classifier::with_transport(remote_config(Some(dir.path())), Box::new(ScriptedTransport::new(2, 0)))
                .unwrap();
        let opts = BatchOptions {
            concurrency: 1,
            max_failure_rate: 0.1,
        };
        let out = classify_batch(&reviews, &classifier, opts, None).unwrap();
        assert_eq!(out.records.len(), 100);
        assert_eq!(out.stats.failed, 0);
        assert_eq!(out.stats.retries, 2);
        assert_eq!(out.stats.remote_calls, 102);

        // everything persisted: a replay run reproduces the output exactly
        let replay = Classifier::new(BackendConfig {
            kind: BackendKind::ReplayCache,
            cache_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        })
        .unwrap();
        let again = classify_batch(&reviews, &replay, BatchOptions::from_config(replay.config()), None).unwrap();
        assert_eq!(again.stats.cache_hits, 100);
        let strip = |o: &BatchOutput| -> Vec<_> { o.records.values().map(|r| (r.labels.clone(), r.none_flag)).collect() };
        assert_eq!(strip(&out), strip(&again));
    }

    #[test]
    fn exhausted_retries_surface_review_id() {
        let classifier =
            Classifier::with_transport(remote_config(None), Box::new(ScriptedTransport::new(10, 0))).unwrap();
        match classifier.classify(&review("r42", "ok")) {
            Err(BackendError::Transport { review_id, attempts, .. }) => {
                assert_eq!(review_id, "r42");
                assert_eq!(attempts, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn garbage_then_valid_is_recovered() {
        let classifier =
            Classifier::with_transport(remote_config(None), Box::new(ScriptedTransport::new(0, 1))).unwrap();
        let rec = classifier.classify(&review("r", "The staff was rude.")).unwrap();
        assert!(rec.error.is_none());
        assert_eq!(rec.labels[&Aspect::InterpersonalFactors], Polarity::Negative);

        let stubborn =
            Classifier::with_transport(remote_config(None), Box::new(ScriptedTransport::new(0, 100))).unwrap();
        let rec = stubborn.classify(&review("r", "The staff was rude.")).unwrap();
        assert!(rec.is_failure());
        assert!(rec.to_set().is_none());
    }

    #[test]
    fn failure_rate_aborts() {
        let dir = tempfile::tempdir().unwrap();
        let replay = Classifier::new(BackendConfig {
            kind: BackendKind::ReplayCache,
            cache_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        })
        .unwrap();
        let reviews = vec![review("a", "x"), review("b", "y")];
        match classify_batch(&reviews, &replay, BatchOptions::from_config(replay.config()), None) {
            Err(BatchError::TooManyFailures { failed: 2, total: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn batch_is_order_and_concurrency_invariant() {
        let classifier = Classifier::new(BackendConfig::default()).unwrap();
        let mut reviews: Vec<Review> = (0..40)
            .map(|i| review(&format!("r{i}"), if i % 3 == 0 { "Rude staff." } else { "Great clinic, short wait." }))
            .collect();
        let one = classify_batch(&reviews, &classifier, BatchOptions { concurrency: 1, max_failure_rate: 0.0 }, None)
            .unwrap();
        reviews.reverse();
        let many = classify_batch(&reviews, &classifier, BatchOptions { concurrency: 8, max_failure_rate: 0.0 }, None)
            .unwrap();
        assert_eq!(one.records, many.records);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let classifier = Classifier::new(BackendConfig::default()).unwrap();
        let reviews = vec![review("a", "x"), review("a", "y")];
        assert!(matches!(
            classify_batch(&reviews, &classifier, BatchOptions::from_config(classifier.config()), None),
            Err(BatchError::DuplicateReview(_))
        ));
    }
}
