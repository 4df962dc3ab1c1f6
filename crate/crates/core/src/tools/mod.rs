//! Tool registry, built-in tools and the reply protocol used to request them.

pub mod builtin;
pub mod calculator;
mod directive;

use std::collections::BTreeMap;
use std::fmt::Write;
use std::panic::{self, AssertUnwindSafe};

use serde::{Deserialize, Serialize};

pub use builtin::{builtin_registry, Calculator, Echo, ExternalCommand, KvStore, TextSearch};
pub use directive::{
    parse_directive, Action, Directive, MalformedAction, ParsedDirective, ACTION_MARKER,
    RESPONSE_MARKER,
};

pub const MAX_PARAMS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub description: String,
    pub required: bool,
}

impl ParamSpec {
    pub fn required(name: &str, description: &str) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            required: true,
        }
    }

    pub fn optional(name: &str, description: &str) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            required: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub params: Vec<ParamSpec>,
}

/// Per-run mutable state shared by the tools of one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ToolState {
    pub kv: BTreeMap<String, String>,
}

pub trait Tool: Send + Sync {
    fn spec(&self) -> &ToolSpec;

    /// Runs the tool. `Err` carries a message for the interpreter, not a run failure.
    fn call(&self, args: &BTreeMap<String, String>, state: &mut ToolState) -> Result<String, String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub tool: String,
    pub args_echo: BTreeMap<String, String>,
    pub content: String,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("tool {0:?} is already registered")]
    DuplicateTool(String),
    #[error("tool {name:?} declares {count} parameters (limit {MAX_PARAMS})")]
    TooManyParams { name: String, count: usize },
    #[error("invalid tool name {0:?}")]
    InvalidName(String),
}

#[derive(Default)]
pub struct ToolRegistry {
    tools: BTreeMap<String, Box<dyn Tool>>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, tool: impl Tool + 'static) -> Result<(), RegistryError> {
        let spec = tool.spec();
        let name = spec.name.clone();
        if name.is_empty() || name.chars().any(|c| !(c.is_alphanumeric() || c == '_' || c == '-')) {
            return Err(RegistryError::InvalidName(name));
        }
        if spec.params.len() > MAX_PARAMS {
            return Err(RegistryError::TooManyParams {
                count: spec.params.len(),
                name,
            });
        }
        if self.tools.contains_key(&name) {
            return Err(RegistryError::DuplicateTool(name));
        }
        self.tools.insert(name, Box::new(tool));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&dyn Tool> {
        self.tools.get(name).map(|t| t.as_ref())
    }

    /// Specs sorted by tool name.
    pub fn specs(&self) -> impl Iterator<Item = &ToolSpec> {
        self.tools.values().map(|t| t.spec())
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    /// Runs `action`. Every failure, including a panicking tool, comes back as
    /// an `ok: false` observation.
    pub fn invoke(&self, action: &Action, state: &mut ToolState) -> Observation {
        let fail = |content: String| Observation {
            tool: action.tool.clone(),
            args_echo: action.args.clone(),
            content,
            ok: false,
        };
        let Some(tool) = self.get(&action.tool) else {
            return fail(format!("unknown tool: {}", action.tool));
        };
        let missing: Vec<&str> = tool
            .spec()
            .params
            .iter()
            .filter(|p| p.required && !action.args.contains_key(&p.name))
            .map(|p| p.name.as_str())
            .collect();
        if !missing.is_empty() {
            return fail(format!(
                "tool {} is missing required argument(s): {}",
                action.tool,
                missing.join(", ")
            ));
        }
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| tool.call(&action.args, state)));
        let (ok, content) = match outcome {
            Ok(Ok(content)) => (true, content),
            Ok(Err(message)) => (false, message),
            Err(_) => (false, format!("tool {} crashed", action.tool)),
        };
        Observation {
            tool: action.tool.clone(),
            args_echo: action.args.clone(),
            content: if content.is_empty() {
                "(empty output)".into()
            } else {
                content
            },
            ok,
        }
    }
}

/// One `- name(param, optional?): description` line per tool, sorted by name.
pub fn render_tool_catalog(registry: &ToolRegistry) -> String {
    let mut out = String::new();
    for spec in registry.specs() {
        let params = spec
            .params
            .iter()
            .map(|p| {
                if p.required {
                    p.name.clone()
                } else {
                    format!("{}?", p.name)
                }
            })
            .collect::<Vec<_>>()
            .join(", ");
        let _ = writeln!(out, "- {}({}): {}", spec.name, params, spec.description);
    }
    out
}
