//! Layered settings for the command-line tool.
//!
//! Sources, lowest precedence first: built-in defaults, the config file,
//! environment variables, command-line flags. The config file is flat text,
//! one `section.key = value` per line, `#` starting a comment:
//!
//! ```text
//! run.max_steps = 20
//! run.retrieval_mode = lexical
//! backend.url = http://localhost:8000/v1
//! tools.text_search.corpus = docs
//! ```

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::backend::{RemoteConfig, DEFAULT_TIMEOUT, ENV_KEY, ENV_MODEL, ENV_URL};
use crate::engine::RunConfig;
use crate::tools::{builtin_registry, ExternalCommand, ToolRegistry};

pub const ENV_CONFIG: &str = "CORE_CONFIG";
pub const DEFAULT_CONFIG_FILE: &str = "core.toml";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{origin}: line {line}: expected `section.key = value`")]
    Syntax { origin: String, line: usize },
    #[error("{origin}: unknown setting {key:?}")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: invalid value {value:?} for {key}: {reason}")]
    InvalidValue {
        origin: String,
        key: String,
        value: String,
        reason: String,
    },
    #[error("cannot read config file {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteSettings {
    pub url: Option<String>,
    pub key: Option<String>,
    pub model: Option<String>,
    pub timeout: Duration,
    pub max_tokens: Option<u32>,
}

impl Default for RemoteSettings {
    fn default() -> Self {
        Self {
            url: None,
            key: None,
            model: None,
            timeout: DEFAULT_TIMEOUT,
            max_tokens: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExternalCommandSettings {
    pub enabled: bool,
    pub program: Option<PathBuf>,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    pub run: RunConfig,
    pub remote: RemoteSettings,
    pub text_search_corpus: Option<PathBuf>,
    pub external_command: ExternalCommandSettings,
}

fn parse_number<T: std::str::FromStr>(origin: &str, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        origin: origin.into(),
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_positive(origin: &str, key: &str, value: &str) -> Result<usize, ConfigError> {
    let n: usize = parse_number(origin, key, value)?;
    if n == 0 {
        return Err(ConfigError::InvalidValue {
            origin: origin.into(),
            key: key.into(),
            value: value.into(),
            reason: "must be positive".into(),
        });
    }
    Ok(n)
}

fn parse_bool(origin: &str, key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            origin: origin.into(),
            key: key.into(),
            value: value.into(),
            reason: "expected true or false".into(),
        }),
    }
}

/// Splits config text into `(line, key, value)` entries.
pub fn parse_entries(origin: &str, text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut entries = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            origin: origin.into(),
            line: index + 1,
        })?;
        let key = key.trim();
        if key.is_empty() || !key.contains('.') {
            return Err(ConfigError::Syntax {
                origin: origin.into(),
                line: index + 1,
            });
        }
        let value = value.trim();
        let value = value
            .strip_prefix('"')
            .and_then(|v| v.strip_suffix('"'))
            .unwrap_or(value);
        entries.push((index + 1, key.to_string(), value.to_string()));
    }
    Ok(entries)
}

impl Settings {
    /// Applies one `section.key = value` setting.
    pub fn set(&mut self, origin: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "run.max_steps" => self.run.max_steps = parse_positive(origin, key, value)?,
            "run.max_tool_calls_per_step" => {
                self.run.max_tool_calls_per_step = parse_positive(origin, key, value)?
            }
            "run.branch_retries" => self.run.branch_retries = parse_positive(origin, key, value)?,
            "run.retrieval_k" => self.run.retrieval_k = parse_positive(origin, key, value)?,
            "run.progress_window" => self.run.progress_window = parse_positive(origin, key, value)?,
            "run.retrieval_mode" => {
                self.run.retrieval_mode =
                    value.parse().map_err(|reason| ConfigError::InvalidValue {
                        origin: origin.into(),
                        key: key.into(),
                        value: value.into(),
                        reason,
                    })?
            }
            "backend.url" => self.remote.url = Some(value.into()),
            "backend.key" => self.remote.key = Some(value.into()),
            "backend.model" => self.remote.model = Some(value.into()),
            "backend.timeout_secs" => {
                self.remote.timeout = Duration::from_secs(parse_positive(origin, key, value)? as u64)
            }
            "backend.max_tokens" => self.remote.max_tokens = Some(parse_number(origin, key, value)?),
            "tools.text_search.corpus" => self.text_search_corpus = Some(value.into()),
            "tools.external_command.enabled" => {
                self.external_command.enabled = parse_bool(origin, key, value)?
            }
            "tools.external_command.program" => {
                self.external_command.program = Some(value.into())
            }
            "tools.external_command.args" => {
                self.external_command.args = value.split_whitespace().map(String::from).collect()
            }
            _ => {
                return Err(ConfigError::UnknownKey {
                    origin: origin.into(),
                    key: key.into(),
                })
            }
        }
        Ok(())
    }

    pub fn apply_text(&mut self, origin: &str, text: &str) -> Result<(), ConfigError> {
        for (line, key, value) in parse_entries(origin, text)? {
            self.set(&format!("{origin}:{line}"), &key, &value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.apply_text(&path.display().to_string(), &text)
    }

    /// Applies `CORE_BACKEND_*` variables read through `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        let get = |name| lookup(name).filter(|v| !v.is_empty());
        if let Some(url) = get(ENV_URL) {
            self.remote.url = Some(url);
        }
        if let Some(key) = get(ENV_KEY) {
            self.remote.key = Some(key);
        }
        if let Some(model) = get(ENV_MODEL) {
            self.remote.model = Some(model);
        }
    }

    /// Defaults, then the config file (explicit path, `CORE_CONFIG`, or
    /// `./core.toml` when present), then the environment.
    pub fn load(explicit: Option<&Path>, lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut settings = Self::default();
        let path = explicit
            .map(Path::to_path_buf)
            .or_else(|| lookup(ENV_CONFIG).filter(|p| !p.is_empty()).map(PathBuf::from))
            .or_else(|| {
                let default = PathBuf::from(DEFAULT_CONFIG_FILE);
                default.is_file().then_some(default)
            });
        if let Some(path) = path {
            settings.apply_file(&path)?;
        }
        settings.apply_env(lookup);
        Ok(settings)
    }

    pub fn load_from_process_env(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load(explicit, |name| env::var(name).ok())
    }

    pub fn remote_config(&self) -> Option<RemoteConfig> {
        let mut config = RemoteConfig::new(self.remote.url.clone()?);
        config.key = self.remote.key.clone();
        if let Some(model) = &self.remote.model {
            config.model = model.clone();
        }
        if let Some(max_tokens) = self.remote.max_tokens {
            config.max_tokens = max_tokens;
        }
        config.timeout = self.remote.timeout;
        Some(config)
    }

    pub fn registry(&self) -> Result<ToolRegistry, ConfigError> {
        let mut registry = builtin_registry(self.text_search_corpus.clone());
        if self.external_command.enabled {
            let program = self.external_command.program.clone().ok_or_else(|| {
                ConfigError::InvalidValue {
                    origin: "settings".into(),
                    key: "tools.external_command.program".into(),
                    value: String::new(),
                    reason: "required when tools.external_command.enabled is true".into(),
                }
            })?;
            registry
                .register(ExternalCommand::new(program, self.external_command.args.clone()))
                .expect("external_command does not clash with built-ins");
        }
        Ok(registry)
    }
}
