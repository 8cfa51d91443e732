//! Run configuration: a TOML file plus command-line overrides.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use urgentcare_core::absa::{BackendConfig, BackendKind};
use urgentcare_core::aggregate::RatingSource;
use urgentcare_core::corpus::{InputFormat, Region};
use urgentcare_core::synth::SynthConfig;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputPaths {
    pub reviews: Option<PathBuf>,
    pub reviews_format: InputFormat,
    pub pois: Option<PathBuf>,
    pub cbg_profiles: Option<PathBuf>,
    /// Block-group polygons. Takes precedence over `facility_cbg`.
    pub cbg_geometries: Option<PathBuf>,
    /// Precomputed `facility_id,cbg_id` table.
    pub facility_cbg: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
}

impl Default for InputPaths {
    fn default() -> Self {
        Self {
            reviews: None,
            reviews_format: InputFormat::JsonLines,
            pois: None,
            cbg_profiles: None,
            cbg_geometries: None,
            facility_cbg: None,
            annotations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Case-insensitive substring matched against category tags.
    pub keyword: String,
    pub regions: BTreeSet<Region>,
    /// Per-aspect mention threshold of the strict filter policy.
    pub min_reviews: u64,
    /// Finances threshold of the relaxed policy used by the sensitivity fit.
    pub relaxed_finances_min: u64,
    pub rating_source: RatingSource,
    pub inputs: InputPaths,
    pub backend: BackendConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out_dir: PathBuf::from("out"),
            keyword: "urgent care".into(),
            regions: BTreeSet::from([Region::Dmv, Region::Fl]),
            min_reviews: 10,
            relaxed_finances_min: 0,
            rating_source: RatingSource::TextReviews,
            inputs: InputPaths::default(),
            backend: BackendConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

/// Values given on the command line; each replaces the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub regions: Option<Vec<Region>>,
    pub min_reviews: Option<u64>,
    pub backend: Option<BackendKind>,
    pub out_dir: Option<PathBuf>,
}

/// Joins `p` onto `base` and removes `.` and `..` components lexically.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    let joined = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let mut out = PathBuf::new();
    for c in joined.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                if !out.pop() {
                    out.push("..");
                }
            }
            other => out.push(other),
        }
    }
    out
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::usage("config", e.to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage("config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        self.out_dir = resolve(base, &self.out_dir);
        let i = &mut self.inputs;
        for p in [
            &mut i.reviews,
            &mut i.pois,
            &mut i.cbg_profiles,
            &mut i.cbg_geometries,
            &mut i.facility_cbg,
            &mut i.annotations,
            &mut self.backend.cache_dir,
        ] {
            if let Some(path) = p.as_mut() {
                *path = resolve(base, path);
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(regions) = &o.regions {
            self.regions = regions.iter().copied().collect();
        }
        if let Some(m) = o.min_reviews {
            self.min_reviews = m;
        }
        if let Some(kind) = o.backend {
            self.backend.kind = kind;
        }
        if let Some(out) = &o.out_dir {
            self.out_dir = resolve(Path::new("."), out);
        }
        self.synth.seed = self.seed;
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::usage("config", m));
        if self.keyword.trim().is_empty() {
            return bad("keyword must not be empty".into());
        }
        if self.regions.is_empty() {
            return bad("at least one region is required".into());
        }
        if self.relaxed_finances_min > self.min_reviews {
            return bad("relaxed_finances_min must not exceed min_reviews".into());
        }
        self.backend.validate().map_err(|e| CliError::usage("config", e.to_string()))?;
        let s = &self.synth;
        if s.n_facilities < 3 || s.min_reviews == 0 || s.min_reviews > s.max_reviews {
            return bad("synth needs n_facilities >= 3 and 0 < min_reviews <= max_reviews".into());
        }
        if !(0.0..=1.0).contains(&s.fl_share) || !(0.0..=1.0).contains(&s.finance_coverage) {
            return bad("synth shares must lie in [0, 1]".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sede = 1").is_err());
        assert!(RunConfig::from_toml("[backend]\nmodel = \"x\"").is_err());
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let mut cfg = RunConfig::from_toml(
            "out_dir = \"..\"\nregions = [\"FL\"]\n[inputs]\nreviews = \"r.jsonl\"\npois = \"/abs/p.jsonl\"\n[backend]\nkind = \"replay-cache\"\ncache_dir = \"cache\"",
        )
        .unwrap();
        cfg.rebase(Path::new("/runs/a/synthetic"));
        assert_eq!(cfg.out_dir, PathBuf::from("/runs/a"));
        assert_eq!(cfg.inputs.reviews.unwrap(), PathBuf::from("/runs/a/synthetic/r.jsonl"));
        assert_eq!(cfg.inputs.pois.unwrap(), PathBuf::from("/abs/p.jsonl"));
        assert_eq!(cfg.backend.cache_dir.unwrap(), PathBuf::from("/runs/a/synthetic/cache"));
        assert_eq!(cfg.regions, BTreeSet::from([Region::Fl]));
    }

    #[test]
    fn overrides_win() {
        let mut cfg = RunConfig::default();
        cfg.apply(&Overrides {
            seed: Some(7),
            regions: Some(vec![Region::Fl]),
            min_reviews: Some(3),
            backend: Some(BackendKind::ReplayCache),
            out_dir: None,
        });
        assert_eq!((cfg.seed, cfg.synth.seed, cfg.min_reviews), (7, 7, 3));
        assert_eq!(cfg.backend.kind, BackendKind::ReplayCache);
        assert_eq!(cfg.regions.len(), 1);
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let cfg = RunConfig { relaxed_finances_min: 11, ..RunConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig { regions: BTreeSet::new(), ..RunConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
