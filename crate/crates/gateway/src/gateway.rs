use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use biomotion_core::artifact::{ArtifactId, ArtifactStore, GenerationArtifact};
use biomotion_core::prompt::PromptBundle;
use chrono::Utc;
use tokio::sync::Semaphore;
use tracing::{debug, warn};

use crate::adapter::{build_call, canned_candidates, parse_reply, ProviderReply, ProviderRequest};
use crate::config::{ModelConfig, ProviderKind, RetryPolicy, Roster};
use crate::extract::{extract_code_with, loc_metric_with, CodeRules};
use crate::GatewayError;

/// Resolves credential names (as written in the roster) to secrets.
pub trait CredentialSource: Send + Sync {
    fn lookup(&self, name: &str) -> Option<String>;
}

/// Reads credentials from the process environment.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnvCredentials;

impl CredentialSource for EnvCredentials {
    fn lookup(&self, name: &str) -> Option<String> {
        std::env::var(name).ok().filter(|v| !v.is_empty())
    }
}

impl CredentialSource for HashMap<String, String> {
    fn lookup(&self, name: &str) -> Option<String> {
        self.get(name).cloned()
    }
}

enum Failure {
    Retry(String),
    Fatal(GatewayError),
}

pub struct Gateway {
    roster: Roster,
    client: reqwest::Client,
    credentials: Arc<dyn CredentialSource>,
    rules: CodeRules,
    limits: Mutex<HashMap<String, Arc<Semaphore>>>,
}

impl Gateway {
    pub fn new(roster: Roster) -> Result<Gateway, GatewayError> {
        Gateway::with_credentials(roster, Arc::new(EnvCredentials))
    }

    pub fn with_credentials(
        roster: Roster,
        credentials: Arc<dyn CredentialSource>,
    ) -> Result<Gateway, GatewayError> {
        let client = reqwest::Client::builder()
            .timeout(roster.retry().request_timeout())
            .build()
            .map_err(|e| GatewayError::Config(format!("http client: {e}")))?;
        let limits = roster
            .providers()
            .iter()
            .map(|(name, p)| (name.clone(), Arc::new(Semaphore::new(p.max_concurrency))))
            .collect();
        Ok(Gateway {
            roster,
            client,
            credentials,
            rules: CodeRules::python(),
            limits: Mutex::new(limits),
        })
    }

    pub fn with_rules(mut self, rules: CodeRules) -> Gateway {
        self.rules = rules;
        self
    }

    pub fn roster(&self) -> &Roster {
        &self.roster
    }

    fn limit(&self, provider: &str) -> Arc<Semaphore> {
        let mut map = self.limits.lock().unwrap_or_else(|p| p.into_inner());
        map.entry(provider.to_string()).or_insert_with(|| Arc::new(Semaphore::new(4))).clone()
    }

    /// Looks the model up in the roster and generates.
    pub async fn generate_for(
        &self,
        bundle: &PromptBundle,
        model_id: &str,
    ) -> Result<GenerationArtifact, GatewayError> {
        let cfg = self
            .roster
            .model(model_id)
            .ok_or_else(|| GatewayError::UnknownModel(model_id.to_string()))?
            .clone();
        self.generate(bundle, &cfg).await
    }

    /// Sends one prompt and turns the reply into an artifact. Nothing is stored.
    pub async fn generate(
        &self,
        bundle: &PromptBundle,
        cfg: &ModelConfig,
    ) -> Result<GenerationArtifact, GatewayError> {
        cfg.validate()?;
        if !cfg.modalities.supports(bundle.modality) {
            return Err(GatewayError::Modality { model: cfg.model_id.clone(), modality: bundle.modality });
        }
        let key = match &cfg.credential_env {
            Some(name) => Some(self.credentials.lookup(name).ok_or_else(|| GatewayError::Credential {
                model: cfg.model_id.clone(),
                reason: format!("environment variable {name} is not set"),
            })?),
            None => None,
        };
        let spec_key = bundle.spec.id();
        let req = ProviderRequest {
            system: &bundle.system_text,
            user: &bundle.user_text,
            image_png: bundle.reference_image.as_ref().map(|r| r.png.as_slice()),
            spec_key: spec_key.as_str(),
        };

        let permit = self.limit(&cfg.provider).acquire_owned().await;
        let (reply, latency_ms) = self.send_with_retry(cfg, &req, key.as_deref()).await?;
        drop(permit);

        let script = extract_code_with(&reply.text, &self.rules);
        let loc = script.as_deref().map(|s| loc_metric_with(s, &self.rules)).unwrap_or(0);
        Ok(GenerationArtifact {
            artifact_id: ArtifactId::generate(),
            model_id: cfg.model_id.clone(),
            spec_id: spec_key,
            modality: bundle.modality,
            template_version: bundle.template_version.clone(),
            raw_response: reply.text,
            reasoning: reply.reasoning,
            script,
            loc,
            created_at: Utc::now(),
            latency_ms: Some(latency_ms),
            render: None,
        })
    }

    /// Generates and appends the artifact to the store.
    pub async fn generate_into(
        &self,
        bundle: &PromptBundle,
        cfg: &ModelConfig,
        store: &ArtifactStore,
    ) -> Result<GenerationArtifact, GatewayError> {
        let artifact = self.generate(bundle, cfg).await?;
        store.put(&artifact)?;
        Ok(artifact)
    }

    async fn send_with_retry(
        &self,
        cfg: &ModelConfig,
        req: &ProviderRequest<'_>,
        key: Option<&str>,
    ) -> Result<(ProviderReply, u64), GatewayError> {
        let policy: &RetryPolicy = self.roster.retry();
        let mut last = String::new();
        for attempt in 1..=policy.max_attempts {
            let started = Instant::now();
            match self.send_once(cfg, req, key).await {
                Ok(reply) => return Ok((reply, started.elapsed().as_millis() as u64)),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(msg)) => {
                    warn!(model = %cfg.model_id, attempt, "transient failure: {msg}");
                    last = msg;
                    if attempt < policy.max_attempts {
                        tokio::time::sleep(policy.backoff(attempt)).await;
                    }
                }
            }
        }
        Err(GatewayError::Transport { attempts: policy.max_attempts, message: last })
    }

    async fn send_once(
        &self,
        cfg: &ModelConfig,
        req: &ProviderRequest<'_>,
        key: Option<&str>,
    ) -> Result<ProviderReply, Failure> {
        if cfg.kind == ProviderKind::Static {
            return read_canned(cfg, req).map_err(Failure::Fatal);
        }
        let call = build_call(cfg, req, key).expect("network provider");
        debug!(model = %cfg.model_id, url = %call.url, "sending");
        let mut rb = self.client.post(&call.url).json(&call.body);
        for (k, v) in &call.headers {
            rb = rb.header(k, v);
        }
        let resp = rb.send().await.map_err(|e| Failure::Retry(e.to_string()))?;
        let status = resp.status();
        let body = resp.text().await.map_err(|e| Failure::Retry(e.to_string()))?;
        let excerpt: String = body.chars().take(300).collect();
        match status.as_u16() {
            200..=299 => {}
            401 | 403 => {
                return Err(Failure::Fatal(GatewayError::Credential {
                    model: cfg.model_id.clone(),
                    reason: format!("HTTP {status}: {excerpt}"),
                }))
            }
            408 | 429 | 500..=599 => return Err(Failure::Retry(format!("HTTP {status}: {excerpt}"))),
            _ => {
                return Err(Failure::Fatal(GatewayError::Provider { status: status.as_u16(), message: excerpt }))
            }
        }
        let json: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| Failure::Fatal(GatewayError::Decode(e.to_string())))?;
        parse_reply(cfg.kind, &json).map_err(|e| Failure::Fatal(GatewayError::Decode(e)))
    }
}

fn read_canned(cfg: &ModelConfig, req: &ProviderRequest<'_>) -> Result<ProviderReply, GatewayError> {
    let dir = cfg
        .response_dir
        .as_deref()
        .ok_or_else(|| GatewayError::Config(format!("{}: no response_dir", cfg.model_id)))?;
    for path in canned_candidates(dir, &cfg.model_id, req.spec_key) {
        match std::fs::read_to_string(&path) {
            Ok(text) => return Ok(ProviderReply { text, reasoning: None }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
            Err(e) => return Err(GatewayError::Config(format!("{}: {e}", path.display()))),
        }
    }
    Err(GatewayError::Config(format!(
        "{}: no canned response for {} under {}",
        cfg.model_id,
        req.spec_key,
        dir.display()
    )))
}
