//! The interpreter backend contract and its two implementations.

mod remote;
mod scripted;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::syntax::StepName;

pub use remote::{RemoteBackend, RemoteConfig, ENV_KEY, ENV_MODEL, ENV_URL};
pub use scripted::{load_script, parse_script, ScriptError, ScriptRule, ScriptedBackend};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Which response protocol the caller will apply to the reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallPhase {
    Execute,
    Branch,
    Retrieve,
}

impl fmt::Display for CallPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Execute => "execute",
            Self::Branch => "branch",
            Self::Retrieve => "retrieve",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionRequest {
    pub phase: CallPhase,
    pub step: StepName,
    pub prompt: String,
    pub max_output_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Usage {
    pub input_units: u64,
    pub output_units: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionResponse {
    pub text: String,
    pub backend_id: String,
    pub usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Unavailable { status: Option<u16>, message: String },
    #[error("backend did not answer within {0:?}")]
    Timeout(Duration),
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error("no script rule matches phase={phase} step={step}")]
    NoMatchingRule { phase: CallPhase, step: StepName },
}

impl BackendError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Unavailable { .. } => "BACKEND_UNAVAILABLE",
            Self::Timeout(_) => "BACKEND_TIMEOUT",
            Self::EmptyResponse => "EMPTY_RESPONSE",
            Self::NoMatchingRule { .. } => "NO_MATCHING_RULE",
        }
    }
}

/// Produces text for execute, branch and retrieve prompts.
///
/// Implementations must be usable from several threads; a single run calls
/// `complete` strictly sequentially.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        (**self).complete(request)
    }
}
