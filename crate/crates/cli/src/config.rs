//! Run configuration: one TOML file driving every pipeline stage.

use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use recallcheck_core::prompt::RetryPolicy;
use recallcheck_core::query::TemplateRules;
use recallcheck_core::search::TimeWindow;
use recallcheck_core::shop::TimeOfDay;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogSection {
    pub path: PathBuf,
    pub format: CatalogFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    Llm,
    Template,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSection {
    pub mode: GeneratorMode,
    /// Prompt template language for the LLM generator: "en" or "zh".
    #[serde(default = "default_language")]
    pub language: String,
    #[serde(default = "TemplateRules::default")]
    pub template_rules: TemplateRules,
}

fn default_language() -> String {
    "en".to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationMode {
    Llm,
    Rule,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSection {
    pub mode: ValidationMode,
    #[serde(default = "default_max_query_len")]
    pub max_query_len: usize,
}

fn default_max_query_len() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Sim,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSection {
    pub mode: BackendMode,
    /// Simulator configuration file (JSON), for mode = "sim".
    #[serde(default)]
    pub sim_config: Option<PathBuf>,
    /// Search endpoint base URL, for mode = "http".
    #[serde(default)]
    pub url: Option<String>,
}

/// Controlled execution context: fixed account, pinned local time, and
/// the allowed run window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSection {
    pub account_id: String,
    pub page_size: u32,
    #[serde(default = "default_page_depth")]
    pub page_depth: u32,
    /// Local time queries execute at, "HH:MM".
    pub time: String,
    /// Allowed window, "HH:MM-HH:MM"; queries outside it are gated.
    pub window: String,
}

fn default_page_depth() -> u32 {
    1
}

impl ContextSection {
    pub fn minute_of_day(&self) -> Result<u16> {
        TimeOfDay::parse(&self.time)
            .map(|t| t.minutes)
            .with_context(|| format!("bad context time `{}`", self.time))
    }

    pub fn time_window(&self) -> Result<TimeWindow> {
        TimeWindow::parse(&self.window)
            .with_context(|| format!("bad context window `{}`", self.window))
    }
}

/// Chat-completion endpoint parameters. The API key is read from the
/// environment variable named here; it never appears in the file body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSection {
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: u32,
    #[serde(default)]
    pub retry: RetrySection,
}

fn default_rpm() -> u32 {
    60
}

/// Retry knobs in milliseconds so tests can shrink them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrySection {
    pub per_attempt_timeout_ms: u64,
    pub max_retries: u32,
    pub wait_min_ms: u64,
    pub wait_max_ms: u64,
}

impl Default for RetrySection {
    fn default() -> Self {
        let p = RetryPolicy::default();
        Self {
            per_attempt_timeout_ms: p.per_attempt_timeout.as_millis() as u64,
            max_retries: p.max_retries,
            wait_min_ms: p.wait_min.as_millis() as u64,
            wait_max_ms: p.wait_max.as_millis() as u64,
        }
    }
}

impl RetrySection {
    pub fn policy(&self) -> RetryPolicy {
        RetryPolicy {
            per_attempt_timeout: Duration::from_millis(self.per_attempt_timeout_ms),
            max_retries: self.max_retries,
            wait_min: Duration::from_millis(self.wait_min_ms),
            wait_max: Duration::from_millis(self.wait_max_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitsSection {
    /// Fraction of shops allowed to fail a stage before the run exits
    /// with the partial-failure code.
    pub partial_failure_threshold: f64,
}

impl Default for LimitsSection {
    fn default() -> Self {
        Self { partial_failure_threshold: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default = "default_run_id")]
    pub run_id: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub catalog: CatalogSection,
    pub generator: GeneratorSection,
    pub validation: ValidationSection,
    pub backend: BackendSection,
    pub context: ContextSection,
    #[serde(default)]
    pub endpoint: Option<EndpointSection>,
    #[serde(default)]
    pub limits: LimitsSection,
}

fn default_run_id() -> String {
    "run".to_string()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&raw).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.validation.mode == ValidationMode::Off
            && self.generator.mode == GeneratorMode::Llm
        {
            bail!("validation = \"off\" is only allowed with the template generator; LLM output must be validated");
        }
        if self.generator.mode == GeneratorMode::Llm && self.endpoint.is_none() {
            bail!("generator = \"llm\" requires an [endpoint] section");
        }
        if self.validation.mode == ValidationMode::Llm && self.endpoint.is_none() {
            bail!("validation = \"llm\" requires an [endpoint] section");
        }
        match self.backend.mode {
            BackendMode::Sim if self.backend.sim_config.is_none() => {
                bail!("backend = \"sim\" requires backend.sim_config")
            }
            BackendMode::Http if self.backend.url.is_none() => {
                bail!("backend = \"http\" requires backend.url")
            }
            _ => {}
        }
        if self.context.page_size == 0 || self.context.page_depth == 0 {
            bail!("context.page_size and context.page_depth must be positive");
        }
        if !(0.0..=1.0).contains(&self.limits.partial_failure_threshold) {
            bail!("limits.partial_failure_threshold must be within [0, 1]");
        }
        self.context.minute_of_day()?;
        self.context.time_window()?;
        if let Some(ep) = &self.endpoint {
            ep.retry
                .policy()
                .validate()
                .map_err(|e| anyhow::anyhow!("bad retry policy: {e}"))?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, stamped into reports so a
    /// report can be traced back to the exact configuration.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let canon = serde_json::to_vec(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&canon);
        hex(&hasher.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
