//! Model roster: provider endpoints plus per-model capability flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;
use std::time::Duration;

use biomotion_core::prompt::Modality;
use serde::{Deserialize, Serialize};

use crate::GatewayError;

pub const DEFAULT_MAX_NEW_TOKENS: u32 = 32768;

static BUILTIN: LazyLock<Roster> = LazyLock::new(|| {
    Roster::from_toml(include_str!("../data/roster.toml")).expect("bundled roster is valid")
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    /// OpenAI chat completions (`max_completion_tokens`).
    Openai,
    /// Any server speaking the chat completions dialect (`max_tokens`).
    OpenaiCompatible,
    Anthropic,
    Gemini,
    /// Canned responses read from disk; no network traffic.
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    /// Directory of canned responses for `static` providers.
    #[serde(default)]
    pub response_dir: Option<PathBuf>,
}

fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
    pub request_timeout_secs: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            initial_backoff_ms: 1000,
            max_backoff_ms: 30_000,
            request_timeout_secs: 600,
        }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, where `attempt` starts at 1.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(20);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs(self.request_timeout_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelEntry {
    id: String,
    provider: String,
    #[serde(default)]
    api_model: Option<String>,
    #[serde(default)]
    max_new_tokens: Option<u32>,
    #[serde(default = "yes")]
    text: bool,
    #[serde(default)]
    image: bool,
    #[serde(default)]
    thinking: bool,
    #[serde(default = "general")]
    group: String,
    /// Extra top-level fields merged into the request body.
    #[serde(default)]
    extra: BTreeMap<String, toml::Value>,
}

fn yes() -> bool {
    true
}

fn general() -> String {
    "general".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RosterFile {
    #[serde(default = "default_tokens")]
    max_new_tokens: u32,
    #[serde(default)]
    retry: RetryPolicy,
    providers: BTreeMap<String, ProviderConfig>,
    #[serde(default)]
    models: Vec<ModelEntry>,
}

fn default_tokens() -> u32 {
    DEFAULT_MAX_NEW_TOKENS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalitySupport {
    pub text: bool,
    pub image: bool,
}

impl ModalitySupport {
    pub fn supports(&self, modality: Modality) -> bool {
        match modality {
            Modality::TextOnly => self.text,
            Modality::ImageText => self.image,
        }
    }
}

/// One model with its provider settings resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_id: String,
    /// Name sent to the provider; defaults to `model_id`.
    pub api_model: String,
    pub provider: String,
    pub kind: ProviderKind,
    pub endpoint: String,
    pub credential_env: Option<String>,
    pub max_new_tokens: u32,
    pub modalities: ModalitySupport,
    pub thinking: bool,
    pub group: String,
    pub extra: serde_json::Map<String, serde_json::Value>,
    pub response_dir: Option<PathBuf>,
}

impl ModelConfig {
    /// A text-and-image model served by a `static` provider.
    pub fn canned(model_id: impl Into<String>, response_dir: impl Into<PathBuf>) -> ModelConfig {
        let model_id = model_id.into();
        ModelConfig {
            api_model: model_id.clone(),
            model_id,
            provider: "static".into(),
            kind: ProviderKind::Static,
            endpoint: String::new(),
            credential_env: None,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            modalities: ModalitySupport { text: true, image: true },
            thinking: false,
            group: general(),
            extra: Default::default(),
            response_dir: Some(response_dir.into()),
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: String| Err(GatewayError::Config(format!("{}: {m}", self.model_id)));
        if self.model_id.trim().is_empty() {
            return bad("empty model id".into());
        }
        if self.max_new_tokens == 0 {
            return bad("max_new_tokens must be positive".into());
        }
        if !self.modalities.text && !self.modalities.image {
            return bad("supports no modality".into());
        }
        match self.kind {
            ProviderKind::Static => {
                if self.response_dir.is_none() {
                    return bad("static provider needs response_dir".into());
                }
            }
            _ => {
                if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
                    return bad(format!("endpoint {:?} is not an http(s) URL", self.endpoint));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roster {
    retry: RetryPolicy,
    providers: BTreeMap<String, ProviderConfig>,
    models: Vec<ModelConfig>,
}

impl Roster {
    /// The bundled 53-model benchmark roster.
    pub fn builtin() -> &'static Roster {
        &BUILTIN
    }

    pub fn from_toml(text: &str) -> Result<Roster, GatewayError> {
        let file: RosterFile =
            toml::from_str(text).map_err(|e| GatewayError::Config(e.to_string()))?;
        let mut models = Vec::with_capacity(file.models.len());
        for m in file.models {
            let p = file.providers.get(&m.provider).ok_or_else(|| {
                GatewayError::Config(format!("{}: unknown provider {:?}", m.id, m.provider))
            })?;
            let extra = match serde_json::to_value(&m.extra) {
                Ok(serde_json::Value::Object(map)) => map,
                _ => return Err(GatewayError::Config(format!("{}: bad extra table", m.id))),
            };
            let cfg = ModelConfig {
                api_model: m.api_model.unwrap_or_else(|| m.id.clone()),
                model_id: m.id,
                provider: m.provider,
                kind: p.kind,
                endpoint: p.endpoint.trim_end_matches('/').to_string(),
                credential_env: p.credential_env.clone(),
                max_new_tokens: m.max_new_tokens.unwrap_or(file.max_new_tokens),
                modalities: ModalitySupport { text: m.text, image: m.image },
                thinking: m.thinking,
                group: m.group,
                extra,
                response_dir: p.response_dir.clone(),
            };
            cfg.validate()?;
            if models.iter().any(|x: &ModelConfig| x.model_id == cfg.model_id) {
                return Err(GatewayError::Config(format!("duplicate model {}", cfg.model_id)));
            }
            models.push(cfg);
        }
        for (name, p) in &file.providers {
            if p.max_concurrency == 0 {
                return Err(GatewayError::Config(format!("provider {name}: max_concurrency is 0")));
            }
        }
        if file.retry.max_attempts == 0 {
            return Err(GatewayError::Config("retry.max_attempts must be positive".into()));
        }
        Ok(Roster { retry: file.retry, providers: file.providers, models })
    }

    /// Loads a roster; relative `response_dir` paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Roster, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("{}: {e}", path.display())))?;
        let mut roster = Roster::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for m in &mut roster.models {
            if let Some(dir) = &m.response_dir {
                if dir.is_relative() {
                    m.response_dir = Some(base.join(dir));
                }
            }
        }
        Ok(roster)
    }

    pub fn retry(&self) -> &RetryPolicy {
        &self.retry
    }

    pub fn set_retry(&mut self, retry: RetryPolicy) {
        self.retry = retry;
    }

    pub fn providers(&self) -> &BTreeMap<String, ProviderConfig> {
        &self.providers
    }

    pub fn models(&self) -> &[ModelConfig] {
        &self.models
    }

    pub fn model(&self, id: &str) -> Option<&ModelConfig> {
        self.models.iter().find(|m| m.model_id == id)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}
