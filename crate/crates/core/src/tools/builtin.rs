//! Desk-scale tools available to every run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use num_rational::Ratio;
use walkdir::WalkDir;

use super::calculator;
use super::{ParamSpec, Tool, ToolRegistry, ToolSpec, ToolState};
use crate::memory::score_text;

/// Lines returned by `text_search`.
pub const SEARCH_RESULTS: usize = 3;

/// Registry with `calculator`, `echo`, `kv_store` and `text_search`.
pub fn builtin_registry(corpus: Option<PathBuf>) -> ToolRegistry {
    let mut registry = ToolRegistry::new();
    registry.register(Calculator::new()).expect("fresh registry");
    registry.register(Echo::new()).expect("fresh registry");
    registry.register(KvStore::new()).expect("fresh registry");
    registry
        .register(TextSearch::new(corpus))
        .expect("fresh registry");
    registry
}

pub struct Calculator(ToolSpec);

impl Calculator {
    pub fn new() -> Self {
        Self(ToolSpec {
            name: "calculator".into(),
            description: "evaluate an arithmetic expression with + - * / and parentheses".into(),
            params: vec![ParamSpec::required("expr", "the expression, e.g. 2*(3+4)")],
        })
    }
}

impl Default for Calculator {
    fn default() -> Self {
        Self::new()
    }
}

impl Tool for Calculator {
    fn spec(&self) -> &ToolSpec {
        &self.0
    }

    fn call(&self, args: &BTreeMap<String, String>, _: &mut ToolState) -> Result<String, String> {
        calculator::calculate(&args["expr"]).map_err(|e| format!("calculator error: {e}"))
    }
}

pub struct Echo(ToolSpec);

impl Echo {
    pub fn new() -> Self {
        Self(ToolSpec {
            name: "echo".into(),
            description: "return the given text unchanged".into(),
            params: vec![ParamSpec::required("text", "text to return")],
        })
    }
}

impl Default for Echo {
    fn default() -> Self {
        Self::new()
    }
}

impl Tool for Echo {
    fn spec(&self) -> &ToolSpec {
        &self.0
    }

    fn call(&self, args: &BTreeMap<String, String>, _: &mut ToolState) -> Result<String, String> {
        Ok(args["text"].clone())
    }
}

pub struct KvStore(ToolSpec);

impl KvStore {
    pub fn new() -> Self {
        Self(ToolSpec {
            name: "kv_store".into(),
            description: "get or set a string value for this run (op is get or set)".into(),
            params: vec![
                ParamSpec::required("op", "get or set"),
                ParamSpec::required("key", "key name"),
                ParamSpec::optional("value", "value to store (set only)"),
            ],
        })
    }
}

impl Default for KvStore {
    fn default() -> Self {
        Self::new()
    }
}

impl Tool for KvStore {
    fn spec(&self) -> &ToolSpec {
        &self.0
    }

    fn call(&self, args: &BTreeMap<String, String>, state: &mut ToolState) -> Result<String, String> {
        let key = &args["key"];
        match args["op"].as_str() {
            "get" => state
                .kv
                .get(key)
                .cloned()
                .ok_or_else(|| format!("kv_store: no value for key {key:?}")),
            "set" => {
                let value = args
                    .get("value")
                    .ok_or("kv_store: set requires a value")?;
                state.kv.insert(key.clone(), value.clone());
                Ok(format!("{key} = {value}"))
            }
            other => Err(format!("kv_store: unknown op {other:?} (expected get or set)")),
        }
    }
}

/// Scores every line of every file under a corpus directory against a query.
pub struct TextSearch {
    spec: ToolSpec,
    corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchHit {
    pub path: PathBuf,
    pub line: usize,
    pub text: String,
    pub score: Ratio<usize>,
}

impl TextSearch {
    pub fn new(corpus: Option<PathBuf>) -> Self {
        Self {
            spec: ToolSpec {
                name: "text_search".into(),
                description: "find the lines of the document corpus most relevant to a query"
                    .into(),
                params: vec![
                    ParamSpec::required("query", "words to look for"),
                    ParamSpec::optional("corpus", "directory to search instead of the configured one"),
                ],
            },
            corpus,
        }
    }

    /// Best lines first; ties by path then line number.
    pub fn search(root: &Path, query: &str, limit: usize) -> Result<Vec<SearchHit>, String> {
        if !root.is_dir() {
            return Err(format!("text_search: corpus {} is not a directory", root.display()));
        }
        let mut hits = Vec::new();
        for entry in WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| format!("text_search: {e}"))?;
            if !entry.file_type().is_file() {
                continue;
            }
            // binary or unreadable files are skipped
            let Ok(text) = fs::read_to_string(entry.path()) else {
                continue;
            };
            let rel = entry
                .path()
                .strip_prefix(root)
                .unwrap_or(entry.path())
                .to_path_buf();
            for (index, line) in text.lines().enumerate() {
                let score = score_text(query, line);
                if score > Ratio::from_integer(0) {
                    hits.push(SearchHit {
                        path: rel.clone(),
                        line: index + 1,
                        text: line.trim().to_string(),
                        score,
                    });
                }
            }
        }
        hits.sort_by(|a, b| {
            b.score
                .cmp(&a.score)
                .then_with(|| a.path.cmp(&b.path))
                .then(a.line.cmp(&b.line))
        });
        hits.truncate(limit);
        Ok(hits)
    }
}

impl Tool for TextSearch {
    fn spec(&self) -> &ToolSpec {
        &self.spec
    }

    fn call(&self, args: &BTreeMap<String, String>, _: &mut ToolState) -> Result<String, String> {
        let root = match args.get("corpus") {
            Some(dir) => PathBuf::from(dir),
            None => self
                .corpus
                .clone()
                .ok_or("text_search: no corpus configured (set tools.text_search.corpus)")?,
        };
        let query = &args["query"];
        let hits = Self::search(&root, query, SEARCH_RESULTS)?;
        if hits.is_empty() {
            return Ok(format!("no lines match {query:?}"));
        }
        Ok(hits
            .iter()
            .map(|h| format!("{}:{}: {}", h.path.display(), h.line, h.text))
            .collect::<Vec<_>>()
            .join("\n"))
    }
}

/// Runs a configured local program, passing each argument as `--key=value`
/// (sorted by key); stdout becomes the observation.
///
/// This executes arbitrary commands and is never registered unless the run
/// configuration enables it.
pub struct ExternalCommand {
    spec: ToolSpec,
    program: PathBuf,
    base_args: Vec<String>,
}

impl ExternalCommand {
    pub fn new(program: impl Into<PathBuf>, base_args: Vec<String>) -> Self {
        let program = program.into();
        Self {
            spec: ToolSpec {
                name: "external_command".into(),
                description: format!(
                    "run {} with the given arguments passed as --key=value",
                    program.display()
                ),
                params: vec![],
            },
            program,
            base_args,
        }
    }
}

impl Tool for ExternalCommand {
    fn spec(&self) -> &ToolSpec {
        &self.spec
    }

    fn call(&self, args: &BTreeMap<String, String>, _: &mut ToolState) -> Result<String, String> {
        let output = Command::new(&self.program)
            .args(&self.base_args)
            .args(args.iter().map(|(k, v)| format!("--{k}={v}")))
            .output()
            .map_err(|e| format!("external_command: cannot run {}: {e}", self.program.display()))?;
        let stdout = String::from_utf8_lossy(&output.stdout).trim_end().to_string();
        if output.status.success() {
            Ok(stdout)
        } else {
            Err(format!(
                "external_command exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim_end()
            ))
        }
    }
}
