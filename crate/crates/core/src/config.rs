//! Engine configuration: a TOML file plus `LEDGERSQL_*` environment overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{
    EmbedderHandle, HashEmbedder, HttpEndpoint, ModelSettings, OpenAiCompatible, ProviderHandle, RetryPolicy,
    RetryingEmbedder, RetryingProvider, ScriptedProvider,
};
use crate::proto::ConfigOverrides;
use crate::retrieval::DEFAULT_TOP_K;
use crate::sql::{DEFAULT_DIALECT, DEFAULT_MAGNITUDE_THRESHOLD};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("environment variable {name}: cannot parse {value:?}")]
    Env { name: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("provider setup failed: {0}")]
    Provider(String),
}

/// Budgets and thresholds for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Attempts shared by the fast and slow loops.
    pub total_budget: usize,
    /// Consecutive failures that force delegation to the generator.
    pub escalation_threshold: usize,
    /// Row limit for intermediate executions.
    pub row_limit: u64,
    /// Row cap for the final answer.
    pub final_row_cap: u64,
    pub magnitude_threshold: u64,
    pub statement_timeout_secs: u64,
    pub top_k: usize,
    /// Full-schema bypass applies when the schema DDL estimate fits.
    pub context_budget_tokens: usize,
    /// Limit for the fast loop's message list before pruning.
    pub prompt_limit_tokens: usize,
    /// Exploratory probes allowed per session; they are not attempts.
    pub probe_budget: usize,
    pub compression_cap_chars: usize,
    pub dialect: String,
    pub orchestrator: ModelSettings,
    pub generator: ModelSettings,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            total_budget: 4,
            escalation_threshold: 2,
            row_limit: 50,
            final_row_cap: 10_000,
            magnitude_threshold: DEFAULT_MAGNITUDE_THRESHOLD,
            statement_timeout_secs: 30,
            top_k: DEFAULT_TOP_K,
            context_budget_tokens: 30_000,
            prompt_limit_tokens: 60_000,
            probe_budget: 2,
            compression_cap_chars: 4_000,
            dialect: DEFAULT_DIALECT.to_string(),
            orchestrator: ModelSettings::default(),
            generator: ModelSettings::default(),
        }
    }
}

impl SessionConfig {
    pub fn statement_timeout(&self) -> Duration {
        Duration::from_secs(self.statement_timeout_secs)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("total_budget", self.total_budget as u64),
            ("escalation_threshold", self.escalation_threshold as u64),
            ("row_limit", self.row_limit),
            ("final_row_cap", self.final_row_cap),
            ("magnitude_threshold", self.magnitude_threshold),
            ("top_k", self.top_k as u64),
            ("context_budget_tokens", self.context_budget_tokens as u64),
            ("prompt_limit_tokens", self.prompt_limit_tokens as u64),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ConfigError::Invalid(format!("{name} must be positive")));
        }
        for m in [&self.orchestrator, &self.generator] {
            if !(0.0..=1.0).contains(&m.temperature) {
                return Err(ConfigError::Invalid(format!("temperature {} outside [0, 1]", m.temperature)));
            }
        }
        Ok(())
    }

    /// Applies per-request overrides.
    pub fn with_overrides(&self, o: &ConfigOverrides) -> Self {
        let mut c = self.clone();
        if let Some(v) = o.total_budget {
            c.total_budget = v;
        }
        if let Some(v) = o.escalation_threshold {
            c.escalation_threshold = v;
        }
        if let Some(v) = o.row_limit {
            c.row_limit = v;
        }
        if let Some(v) = o.magnitude_threshold {
            c.magnitude_threshold = v;
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ChatBackend {
    /// Chat-completion HTTP endpoint.
    Http,
    /// Replays a script file.
    Script { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EmbedBackend {
    Http { model: String, dimension: usize },
    Hash,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderConfig {
    pub endpoint: HttpEndpoint,
    pub retry: RetryPolicy,
    pub orchestrator: ChatBackend,
    pub generator: ChatBackend,
    pub judge: ChatBackend,
    pub embedder: EmbedBackend,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: HttpEndpoint::default(),
            retry: RetryPolicy::default(),
            orchestrator: ChatBackend::Http,
            generator: ChatBackend::Http,
            judge: ChatBackend::Http,
            embedder: EmbedBackend::Hash,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub judge: ModelSettings,
    /// Sampling temperature for repeated trials.
    pub trial_temperature: f64,
    pub parallelism: usize,
    pub render_cap_chars: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            judge: ModelSettings::default(),
            trial_temperature: 0.3,
            parallelism: 1,
            render_cap_chars: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    /// Holds `<id>.metadata.json`, `<id>.index.json` and `<id>.sqlite` per database.
    pub data_dir: PathBuf,
    pub trace_dir: PathBuf,
    pub trace_retention: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".to_string(),
            data_dir: PathBuf::from("data"),
            trace_dir: PathBuf::from("traces"),
            trace_retention: 1000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub session: SessionConfig,
    pub providers: ProviderConfig,
    pub eval: EvalConfig,
    pub server: ServerConfig,
}

fn parse_env<T: std::str::FromStr>(name: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Env {
        name: name.to_string(),
        value: value.to_string(),
    })
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let c: EngineConfig = toml::from_str(text)?;
        c.session.validate()?;
        Ok(c)
    }

    /// Reads `path` when given, then applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut c = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml_str(&text)?
            }
            None => Self::default(),
        };
        c.apply_env(std::env::vars())?;
        Ok(c)
    }

    /// Applies `LEDGERSQL_*` overrides from `vars`.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (name, value) in vars {
            let Some(key) = name.strip_prefix("LEDGERSQL_") else { continue };
            let s = &mut self.session;
            match key {
                "TOTAL_BUDGET" => s.total_budget = parse_env(&name, &value)?,
                "ESCALATION_THRESHOLD" => s.escalation_threshold = parse_env(&name, &value)?,
                "ROW_LIMIT" => s.row_limit = parse_env(&name, &value)?,
                "FINAL_ROW_CAP" => s.final_row_cap = parse_env(&name, &value)?,
                "MAGNITUDE_THRESHOLD" => s.magnitude_threshold = parse_env(&name, &value)?,
                "STATEMENT_TIMEOUT_SECS" => s.statement_timeout_secs = parse_env(&name, &value)?,
                "TOP_K" => s.top_k = parse_env(&name, &value)?,
                "CONTEXT_BUDGET_TOKENS" => s.context_budget_tokens = parse_env(&name, &value)?,
                "ORCHESTRATOR_MODEL" => s.orchestrator.model_id = value,
                "GENERATOR_MODEL" => s.generator.model_id = value,
                "JUDGE_MODEL" => self.eval.judge.model_id = value,
                "TEMPERATURE" => {
                    let t: f64 = parse_env(&name, &value)?;
                    s.orchestrator.temperature = t;
                    s.generator.temperature = t;
                }
                "TRIAL_TEMPERATURE" => self.eval.trial_temperature = parse_env(&name, &value)?,
                "BASE_URL" => self.providers.endpoint.base_url = value,
                "BIND" => self.server.bind = value,
                "DATA_DIR" => self.server.data_dir = PathBuf::from(value),
                "TRACE_DIR" => self.server.trace_dir = PathBuf::from(value),
                "TRACE_RETENTION" => self.server.trace_retention = parse_env(&name, &value)?,
                "SCRIPT" => {
                    let b = ChatBackend::Script { path: PathBuf::from(value) };
                    self.providers.orchestrator = b.clone();
                    self.providers.generator = b.clone();
                    self.providers.judge = b;
                }
                _ => tracing::debug!(%name, "ignoring unknown LEDGERSQL_ variable"),
            }
        }
        self.session.validate()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Provider handles for every agent role.
#[derive(Clone)]
pub struct Providers {
    pub orchestrator: ProviderHandle,
    pub generator: ProviderHandle,
    pub judge: ProviderHandle,
    pub embedder: EmbedderHandle,
}

impl Providers {
    /// One chat provider for every role.
    pub fn uniform(chat: ProviderHandle, embedder: EmbedderHandle) -> Self {
        Self {
            orchestrator: chat.clone(),
            generator: chat.clone(),
            judge: chat,
            embedder,
        }
    }

    /// Builds the handles described by `config`. Roles that name the same
    /// script file share one scripted provider so replies are consumed in
    /// order across roles.
    pub fn from_config(config: &ProviderConfig) -> Result<Self, ConfigError> {
        let mut scripts: Vec<(PathBuf, ProviderHandle)> = Vec::new();
        let http: Arc<OpenAiCompatible> = Arc::new(match &config.embedder {
            EmbedBackend::Http { model, dimension } => {
                OpenAiCompatible::new(config.endpoint.clone()).with_embedding_model(model.clone(), *dimension)
            }
            EmbedBackend::Hash => OpenAiCompatible::new(config.endpoint.clone()),
        });
        let mut chat = |backend: &ChatBackend| -> Result<ProviderHandle, ConfigError> {
            match backend {
                ChatBackend::Http => Ok(Arc::new(RetryingProvider::new(http.clone(), config.retry))),
                ChatBackend::Script { path } => {
                    if let Some((_, p)) = scripts.iter().find(|(q, _)| q == path) {
                        return Ok(p.clone());
                    }
                    let p: ProviderHandle =
                        Arc::new(ScriptedProvider::from_file(path).map_err(|e| ConfigError::Provider(e.to_string()))?);
                    scripts.push((path.clone(), p.clone()));
                    Ok(p)
                }
            }
        };
        let orchestrator = chat(&config.orchestrator)?;
        let generator = chat(&config.generator)?;
        let judge = chat(&config.judge)?;
        let embedder: EmbedderHandle = match &config.embedder {
            EmbedBackend::Hash => Arc::new(HashEmbedder::default()),
            EmbedBackend::Http { .. } => Arc::new(RetryingEmbedder::new(http.clone(), config.retry)),
        };
        Ok(Self {
            orchestrator,
            generator,
            judge,
            embedder,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = SessionConfig::default();
        assert_eq!((c.total_budget, c.escalation_threshold), (4, 2));
        assert_eq!((c.row_limit, c.final_row_cap, c.magnitude_threshold), (50, 10_000, 1000));
        assert_eq!(c.statement_timeout(), Duration::from_secs(30));
        assert_eq!(c.orchestrator.temperature, 0.0);
        assert_eq!(EvalConfig::default().trial_temperature, 0.3);
    }

    #[test]
    fn toml_then_env() {
        let mut c = EngineConfig::from_toml_str(
            "[session]\nescalation_threshold = 3\n[session.generator]\nmodel_id = \"o3\"\ntemperature = 0.0\nmax_output_tokens = 4096\n",
        )
        .unwrap();
        assert_eq!(c.session.escalation_threshold, 3);
        assert_eq!(c.session.generator.model_id, "o3");
        assert_eq!(c.session.total_budget, 4);
        c.apply_env([("LEDGERSQL_TOTAL_BUDGET".to_string(), "6".to_string()), ("HOME".into(), "/x".into())])
            .unwrap();
        assert_eq!(c.session.total_budget, 6);
    }

    #[test]
    fn bad_values_rejected() {
        assert!(EngineConfig::from_toml_str("[session]\ntotal_budget = 0\n").is_err());
        let mut c = EngineConfig::default();
        assert!(c.apply_env([("LEDGERSQL_ROW_LIMIT".to_string(), "many".to_string())]).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let c = EngineConfig::default();
        assert_eq!(EngineConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }
}
