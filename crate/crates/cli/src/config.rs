//! Run configuration: defaults, optional JSON file, environment and flags.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Environment variable that replaces the seed of a loaded or default config.
pub const SEED_ENV: &str = "RULECIRCUIT_SEED";

/// Name of the resolved configuration written into the output directory.
pub const CONFIG_FILE: &str = "config.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScoringMethod {
    Pc1,
    Pc2,
    Pc3,
    Baseline,
}

impl ScoringMethod {
    pub const ALL: [ScoringMethod; 4] = [
        ScoringMethod::Pc1,
        ScoringMethod::Pc2,
        ScoringMethod::Pc3,
        ScoringMethod::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoringMethod::Pc1 => "pc1",
            ScoringMethod::Pc2 => "pc2",
            ScoringMethod::Pc3 => "pc3",
            ScoringMethod::Baseline => "baseline",
        }
    }
}

impl fmt::Display for ScoringMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Label used in the metrics CSV; defaults to the train file's directory name.
    pub dataset: Option<String>,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub min_confidence: f64,
    pub min_support: u64,
    pub materialize_inverse: bool,
    pub components: usize,
    pub alpha: f64,
    pub em_iterations: usize,
    pub seed: u64,
    pub delta: f64,
    pub methods: Vec<ScoringMethod>,
    pub rule_counts: Vec<usize>,
    pub top_k: usize,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            train: None,
            valid: None,
            test: None,
            rules: None,
            min_confidence: 0.7,
            min_support: 0,
            materialize_inverse: false,
            components: 4,
            alpha: 1.0,
            em_iterations: 10,
            seed: 0,
            delta: 0.001,
            methods: ScoringMethod::ALL.to_vec(),
            rule_counts: vec![100, 250, 500, 1000, 1500, 2000],
            top_k: rulecircuit::scoring::DEFAULT_TOP_K,
            output: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Replaces the seed with `RULECIRCUIT_SEED` when it is set.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(value) = std::env::var(SEED_ENV) {
            self.seed = value
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV} must be an unsigned integer, got {value:?}"))?;
        }
        Ok(())
    }

    pub fn dataset_name(&self) -> String {
        if let Some(name) = &self.dataset {
            return name.clone();
        }
        self.train
            .as_deref()
            .and_then(Path::parent)
            .and_then(Path::file_name)
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".to_string())
    }

    pub fn require(field: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
        match field {
            Some(p) => Ok(p.clone()),
            None => bail!("no {flag} path configured; pass --{flag} or set it in the config file"),
        }
    }

    /// Checks the documented ranges of every numeric field.
    pub fn validate(&self) -> Result<()> {
        if !(self.min_confidence.is_finite() && (0.0..=1.0).contains(&self.min_confidence)) {
            bail!("min-confidence must lie in [0, 1], got {}", self.min_confidence);
        }
        if self.components == 0 {
            bail!("components must be at least 1");
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            bail!("alpha must be a positive finite number, got {}", self.alpha);
        }
        if !(0.0..=1.0).contains(&self.delta) {
            bail!("delta must lie in [0, 1], got {}", self.delta);
        }
        if self.methods.is_empty() {
            bail!("at least one scoring method is required");
        }
        if self.rule_counts.is_empty() || self.rule_counts.contains(&0) {
            bail!("rule counts must be a non-empty list of positive integers");
        }
        if self.top_k == 0 {
            bail!("top-k must be at least 1");
        }
        Ok(())
    }

    /// Methods and rule counts in canonical order without repeats.
    pub fn normalized(mut self) -> RunConfig {
        self.methods.sort();
        self.methods.dedup();
        self.rule_counts.sort_unstable();
        self.rule_counts.dedup();
        self
    }
}
