use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::Deserialize;

use super::{Backend, BackendError, CallPhase, CompletionRequest, CompletionResponse};
use crate::syntax::StepName;

/// One canned answer. Every set match field must hold for the rule to apply.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptRule {
    #[serde(default)]
    pub phase: Option<CallPhase>,
    #[serde(default)]
    pub step: Option<StepName>,
    #[serde(default)]
    pub prompt_contains: Option<String>,
    /// 1-based index of the call among calls with the same (phase, step).
    #[serde(default)]
    pub nth_call: Option<u64>,
    pub respond: String,
}

impl ScriptRule {
    fn has_matcher(&self) -> bool {
        self.phase.is_some()
            || self.step.is_some()
            || self.prompt_contains.is_some()
            || self.nth_call.is_some()
    }

    fn matches(&self, request: &CompletionRequest, call_number: u64) -> bool {
        self.phase.is_none_or(|p| p == request.phase)
            && self.step.as_ref().is_none_or(|s| *s == request.step)
            && self
                .prompt_contains
                .as_deref()
                .is_none_or(|needle| request.prompt.contains(needle))
            && self.nth_call.is_none_or(|n| n == call_number)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("script is not a JSON array of rules: {0}")]
    NotAnArray(String),
    #[error("script rule {index}: {message}")]
    Rule { index: usize, message: String },
}

impl ScriptError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Io { .. } => "SCRIPT_IO",
            Self::NotAnArray(_) | Self::Rule { .. } => "SCRIPT_PARSE_ERROR",
        }
    }
}

/// Deterministic backend answering from an ordered rule list; first match wins.
#[derive(Debug)]
pub struct ScriptedBackend {
    rules: Vec<ScriptRule>,
    counters: Mutex<HashMap<(CallPhase, StepName), u64>>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptRule>) -> Self {
        Self {
            rules,
            counters: Mutex::new(HashMap::new()),
        }
    }

    pub fn rules(&self) -> &[ScriptRule] {
        &self.rules
    }

    /// Number of calls seen so far for `(phase, step)`.
    pub fn calls(&self, phase: CallPhase, step: &StepName) -> u64 {
        let counters = self.counters.lock().expect("counter lock poisoned");
        counters.get(&(phase, step.clone())).copied().unwrap_or(0)
    }
}

pub fn parse_script(text: &str) -> Result<ScriptedBackend, ScriptError> {
    let values: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| ScriptError::NotAnArray(e.to_string()))?;
    let mut rules = Vec::with_capacity(values.len());
    for (index, value) in values.into_iter().enumerate() {
        let rule: ScriptRule = serde_json::from_value(value).map_err(|e| ScriptError::Rule {
            index,
            message: e.to_string(),
        })?;
        if !rule.has_matcher() {
            return Err(ScriptError::Rule {
                index,
                message: "rule sets none of phase, step, prompt_contains, nth_call".into(),
            });
        }
        rules.push(rule);
    }
    Ok(ScriptedBackend::new(rules))
}

pub fn load_script(path: impl AsRef<Path>) -> Result<ScriptedBackend, ScriptError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScriptError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_script(&text)
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let call_number = {
            let mut counters = self.counters.lock().expect("counter lock poisoned");
            let counter = counters
                .entry((request.phase, request.step.clone()))
                .or_insert(0);
            *counter += 1;
            *counter
        };
        let rule = self
            .rules
            .iter()
            .find(|rule| rule.matches(request, call_number))
            .ok_or_else(|| BackendError::NoMatchingRule {
                phase: request.phase,
                step: request.step.clone(),
            })?;
        if rule.respond.is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(CompletionResponse {
            text: rule.respond.clone(),
            backend_id: "script".into(),
            usage: None,
        })
    }
}
