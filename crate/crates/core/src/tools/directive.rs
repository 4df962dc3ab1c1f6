use std::collections::BTreeMap;

use serde::Deserialize;

pub const ACTION_MARKER: &str = "ACTION:";
pub const RESPONSE_MARKER: &str = "RESPONSE:";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub tool: String,
    pub args: BTreeMap<String, String>,
}

/// What the interpreter asked for in an execute-phase reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Directive {
    Action(Action),
    Final(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDirective {
    pub directive: Directive,
    /// Set when the reply had neither marker and was taken whole as the answer.
    pub loose_response: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed ACTION line: {reason}")]
pub struct MalformedAction {
    pub reason: String,
}

impl MalformedAction {
    pub fn code(&self) -> &'static str {
        "MALFORMED_ACTION"
    }
}

#[derive(Deserialize)]
struct ActionJson {
    tool: String,
    args: BTreeMap<String, String>,
}

fn parse_action(json: &str) -> Result<Action, MalformedAction> {
    let parsed: ActionJson = serde_json::from_str(json.trim()).map_err(|e| MalformedAction {
        reason: e.to_string(),
    })?;
    if parsed.tool.trim().is_empty() {
        return Err(MalformedAction {
            reason: "empty tool name".into(),
        });
    }
    Ok(Action {
        tool: parsed.tool.trim().to_string(),
        args: parsed.args,
    })
}

/// Reads a backend reply: the first `ACTION:` line wins, then the first
/// `RESPONSE:` line (everything after the marker is the answer), otherwise
/// the whole reply is the answer.
pub fn parse_directive(text: &str) -> Result<ParsedDirective, MalformedAction> {
    if let Some(rest) = text
        .lines()
        .find_map(|line| line.trim_start().strip_prefix(ACTION_MARKER))
    {
        return Ok(ParsedDirective {
            directive: Directive::Action(parse_action(rest)?),
            loose_response: false,
        });
    }

    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let body = line.trim_start();
        if body.starts_with(RESPONSE_MARKER) {
            let start = offset + (line.len() - body.len()) + RESPONSE_MARKER.len();
            return Ok(ParsedDirective {
                directive: Directive::Final(text[start..].trim().to_string()),
                loose_response: false,
            });
        }
        offset += line.len();
    }

    Ok(ParsedDirective {
        directive: Directive::Final(text.trim().to_string()),
        loose_response: true,
    })
}
