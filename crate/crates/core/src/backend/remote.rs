use std::env;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionRequest, CompletionResponse, Usage, DEFAULT_TIMEOUT};

pub const ENV_URL: &str = "CORE_BACKEND_URL";
pub const ENV_KEY: &str = "CORE_BACKEND_KEY";
pub const ENV_MODEL: &str = "CORE_BACKEND_MODEL";

const DEFAULT_MODEL: &str = "gpt-4-1106-preview";
const DEFAULT_MAX_TOKENS: u32 = 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteConfig {
    /// Either the full chat-completions URL or a base URL to which
    /// `/chat/completions` is appended.
    pub url: String,
    pub key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub max_tokens: u32,
}

impl RemoteConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            key: None,
            model: DEFAULT_MODEL.into(),
            timeout: DEFAULT_TIMEOUT,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    /// Reads `CORE_BACKEND_URL`, `CORE_BACKEND_KEY` and `CORE_BACKEND_MODEL`.
    pub fn from_env() -> Option<Self> {
        let url = env::var(ENV_URL).ok().filter(|u| !u.is_empty())?;
        let mut config = Self::new(url);
        config.key = env::var(ENV_KEY).ok().filter(|k| !k.is_empty());
        if let Ok(model) = env::var(ENV_MODEL) {
            if !model.is_empty() {
                config.model = model;
            }
        }
        Some(config)
    }

    pub fn endpoint(&self) -> String {
        let url = self.url.trim_end_matches('/');
        if url.ends_with("/chat/completions") {
            url.to_string()
        } else {
            format!("{url}/chat/completions")
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f32,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

/// Chat-completions client. Sends the whole prompt as one user message at temperature 0.
pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::Unavailable {
                status: None,
                message: e.to_string(),
            })?;
        Ok(Self { config, client })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn transport_error(&self, err: reqwest::Error) -> BackendError {
        if err.is_timeout() {
            BackendError::Timeout(self.config.timeout)
        } else {
            BackendError::Unavailable {
                status: err.status().map(|s| s.as_u16()),
                message: err.to_string(),
            }
        }
    }
}

impl Backend for RemoteBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: [ChatMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: 0.0,
            max_tokens: self.config.max_tokens,
        };
        let mut call = self.client.post(self.config.endpoint()).json(&body);
        if let Some(key) = &self.config.key {
            call = call.bearer_auth(key);
        }
        let response = call.send().map_err(|e| self.transport_error(e))?;
        let status = response.status();
        if !status.is_success() {
            let message = response.text().unwrap_or_default();
            return Err(BackendError::Unavailable {
                status: Some(status.as_u16()),
                message,
            });
        }
        let text = response.text().map_err(|e| self.transport_error(e))?;
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Unavailable {
                status: Some(status.as_u16()),
                message: format!("unreadable completion body: {e}"),
            })?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        if content.is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(CompletionResponse {
            text: content,
            backend_id: format!("http:{}", self.config.model),
            usage: parsed.usage.map(|u| Usage {
                input_units: u.prompt_tokens,
                output_units: u.completion_tokens,
            }),
        })
    }
}
