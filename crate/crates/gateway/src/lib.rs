//! Model gateway: the benchmark roster, provider adapters, and turning raw
//! responses into stored generation artifacts.

pub mod adapter;
pub mod config;
pub mod extract;
mod gateway;

use biomotion_core::artifact::StoreError;
use biomotion_core::prompt::Modality;
use thiserror::Error;

pub use config::{ModalitySupport, ModelConfig, ProviderConfig, ProviderKind, RetryPolicy, Roster, DEFAULT_MAX_NEW_TOKENS};
pub use extract::{extract_code, extract_code_with, loc_metric, loc_metric_with, wrap_in_fence, CodeRules};
pub use gateway::{CredentialSource, EnvCredentials, Gateway};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("credentials for {model}: {reason}")]
    Credential { model: String, reason: String },
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("{model} does not accept {modality} prompts")]
    Modality { model: String, modality: Modality },
    #[error("provider rejected request (HTTP {status}): {message}")]
    Provider { status: u16, message: String },
    #[error("undecodable provider response: {0}")]
    Decode(String),
    #[error("unknown model {0}")]
    UnknownModel(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}
