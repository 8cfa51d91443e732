//! Command-line front end for the urgent-care review pipeline.
//!
//! Each subcommand is one pipeline stage that reads persisted artifacts
//! from the output directory and writes its own stage directory there.

pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use urgentcare_core::absa::BackendKind;
use urgentcare_core::corpus::Region;

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;
use crate::manifest::{OutputLock, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "urgentcare", version, about = "Aspect-based sentiment analytics for urgent-care reviews")]
pub struct Cli {
    /// TOML run configuration; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated regions, e.g. `DMV,FL`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub regions: Option<Vec<Region>>,
    /// Minimum mentions per aspect for a facility to enter the models.
    #[arg(long, global = true)]
    pub min_reviews: Option<u64>,
    /// `lexicon`, `replay-cache` or `remote-llm`.
    #[arg(long, global = true)]
    pub backend: Option<BackendKind>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter the POI and review dumps down to text-bearing urgent-care reviews.
    Ingest,
    /// Label every ingested review with per-aspect sentiment.
    Classify,
    /// Score predictions against the annotated gold set.
    Evaluate {
        /// Additional sentiment JSON-lines files, e.g. from other backends.
        #[arg(long)]
        predictions: Vec<PathBuf>,
    },
    /// Roll review labels up to facility profiles and region summaries.
    Aggregate,
    /// Attach block-group covariates to facility profiles.
    JoinCensus,
    /// Fit the rating models, VIF, interaction and sensitivity runs.
    Fit,
    /// Render regression tables, GeoJSON, box plots and correlations.
    Report,
    /// Write a synthetic corpus with known ground truth.
    Synthesize,
    /// Synthesize, run the whole pipeline and check recovery and determinism.
    E2eCheck,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            regions: self.regions.clone(),
            min_reviews: self.min_reviews,
            backend: self.backend,
            out_dir: self.out.clone(),
        }
    }

    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

/// What a successful invocation produced.
pub enum Outcome {
    Stage(RunManifest),
    Checks(Vec<stages::Check>),
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = cli.run_config()?;
    let _lock = OutputLock::acquire(&cfg.out_dir)?;
    let manifest = match &cli.command {
        Command::Ingest => stages::ingest(&cfg)?,
        Command::Classify => stages::classify(&cfg)?,
        Command::Evaluate { predictions } => stages::evaluate(&cfg, predictions)?,
        Command::Aggregate => stages::aggregate(&cfg)?,
        Command::JoinCensus => stages::join_census(&cfg)?,
        Command::Fit => stages::fit(&cfg)?,
        Command::Report => stages::report(&cfg)?,
        Command::Synthesize => stages::synthesize(&cfg)?,
        Command::E2eCheck => {
            let checks = stages::e2e_check(&cfg)?;
            if let Some(bad) = checks.iter().find(|c| !c.passed) {
                let failed = checks.iter().filter(|c| !c.passed).count();
                return Err(CliError::failure(
                    stages::E2E_CHECK,
                    format!("{failed} check(s) failed, first: {} ({})", bad.name, bad.detail),
                ))
                .inspect_err(|_| print_checks(&checks));
            }
            return Ok(Outcome::Checks(checks));
        }
    };
    Ok(Outcome::Stage(manifest))
}

pub fn print_checks(checks: &[stages::Check]) {
    for c in checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
}
