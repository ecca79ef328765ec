//! Run configuration: defaults, flat key=value config files, and flag
//! overrides. Flags win over the file, the file wins over defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Which completion backend answers prompts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Remote,
    Scripted,
}

/// Which components to disable, mirroring the ablation rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    None,
    NoMethodology,
    NoCluster,
    NoFilter,
}

impl Ablation {
    pub fn tag(&self) -> &'static str {
        match self {
            Ablation::None => "full",
            Ablation::NoMethodology => "w/o Abstract Guidance",
            Ablation::NoCluster => "w/o History Cluster",
            Ablation::NoFilter => "w/o Action Filter",
        }
    }
}

/// Fully resolved configuration for a run. Serialized into the manifest so
/// a run can be reproduced from its output directory alone.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub kg: Option<PathBuf>,
    pub alias: Option<PathBuf>,
    pub questions: Option<PathBuf>,
    pub format: String,
    pub history: Option<PathBuf>,
    pub methodology: Option<PathBuf>,
    pub backend: Backend,
    pub script: Option<PathBuf>,
    pub seed: u64,
    pub max_steps: usize,
    pub top_k: usize,
    pub clusters: usize,
    pub history_size: usize,
    pub sample_size: usize,
    pub parse_retries: usize,
    pub transcript_budget: usize,
    pub jobs: usize,
    pub ablation: Ablation,
    pub out: Option<PathBuf>,
    pub api_base: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub retries: usize,
    pub embed_url: Option<String>,
    pub embed_model: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kg: None,
            alias: None,
            questions: None,
            format: "multitq".into(),
            history: None,
            methodology: None,
            backend: Backend::Scripted,
            script: None,
            seed: 0,
            max_steps: tkgqa_core::reasoner::DEFAULT_MAX_STEPS,
            top_k: tkgqa_core::candidates::DEFAULT_TOP_K,
            clusters: tkgqa_core::memory::DEFAULT_CLUSTERS,
            history_size: tkgqa_core::memory::DEFAULT_HISTORY_SIZE,
            sample_size: 200,
            parse_retries: tkgqa_core::reasoner::DEFAULT_PARSE_RETRIES,
            transcript_budget: tkgqa_core::memory::DEFAULT_TRANSCRIPT_BUDGET,
            jobs: 1,
            ablation: Ablation::None,
            out: None,
            api_base: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_secs: 60,
            retries: 3,
            embed_url: None,
            embed_model: "text-embedding-3-small".into(),
        }
    }
}

impl RunConfig {
    /// Apply a flat `key = value` config file (`#` starts a comment).
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected key = value, found {raw_line:?}",
                    path.display(),
                    lineno + 1
                );
            };
            self.apply_pair(key.trim(), value.trim())
                .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        }
        Ok(())
    }

    fn apply_pair(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "kg" => self.kg = Some(value.into()),
            "alias" => self.alias = Some(value.into()),
            "questions" => self.questions = Some(value.into()),
            "format" => self.format = value.to_string(),
            "history" => self.history = Some(value.into()),
            "methodology" => self.methodology = Some(value.into()),
            "backend" => {
                self.backend = match value.to_ascii_lowercase().as_str() {
                    "remote" => Backend::Remote,
                    "scripted" => Backend::Scripted,
                    other => bail!("unknown backend {other:?}"),
                }
            }
            "script" => self.script = Some(value.into()),
            "seed" => self.seed = value.parse().context("seed must be an integer")?,
            "max-steps" => self.max_steps = value.parse().context("max-steps must be an integer")?,
            "top-k" => self.top_k = value.parse().context("top-k must be an integer")?,
            "clusters" => self.clusters = value.parse().context("clusters must be an integer")?,
            "history-size" => {
                self.history_size = value.parse().context("history-size must be an integer")?
            }
            "sample-size" => {
                self.sample_size = value.parse().context("sample-size must be an integer")?
            }
            "parse-retries" => {
                self.parse_retries = value.parse().context("parse-retries must be an integer")?
            }
            "transcript-budget" => {
                self.transcript_budget =
                    value.parse().context("transcript-budget must be an integer")?
            }
            "jobs" => self.jobs = value.parse().context("jobs must be an integer")?,
            "ablate" => {
                self.ablation = match value.to_ascii_lowercase().as_str() {
                    "none" => Ablation::None,
                    "no-methodology" => Ablation::NoMethodology,
                    "no-cluster" => Ablation::NoCluster,
                    "no-filter" => Ablation::NoFilter,
                    other => bail!("unknown ablation {other:?}"),
                }
            }
            "out" => self.out = Some(value.into()),
            "api-base" => self.api_base = value.to_string(),
            "model" => self.model = value.to_string(),
            "api-key-env" => self.api_key_env = value.to_string(),
            "timeout-secs" => {
                self.timeout_secs = value.parse().context("timeout-secs must be an integer")?
            }
            "retries" => self.retries = value.parse().context("retries must be an integer")?,
            "embed-url" => self.embed_url = Some(value.to_string()),
            "embed-model" => self.embed_model = value.to_string(),
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// Hash of the resolved configuration, recorded in the manifest.
    pub fn sha256(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        format!("{:x}", hasher.finalize())
    }
}
