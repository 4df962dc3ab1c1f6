//! Append-only execution log, written as JSON Lines.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::syntax::StepName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Retrieve,
    Prompt,
    BackendCall,
    ToolCall,
    Branch,
    Finish,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Retrieve => "retrieve",
            Self::Prompt => "prompt",
            Self::BackendCall => "backend_call",
            Self::ToolCall => "tool_call",
            Self::Branch => "branch",
            Self::Finish => "finish",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub step: StepName,
    pub phase: Phase,
    pub payload: String,
    pub logical_time: u64,
}

/// Payload prefix of a `finish` event that ends a failed run.
pub const FAILED_PREFIX: &str = "failed: ";
/// Payload prefix of a `branch` event whose reply was accepted.
pub const BRANCH_TAKEN_PREFIX: &str = "taken: ";
/// Payload prefix of a `branch` event whose reply was rejected.
pub const BRANCH_REJECTED_PREFIX: &str = "rejected: ";
/// First payload line of a `backend_call` event whose reply carried no directive marker.
pub const LOOSE_RESPONSE_MARKER: &str = "[loose_response]";

impl TraceEvent {
    pub fn is_failure(&self) -> bool {
        self.phase == Phase::Finish && self.payload.starts_with(FAILED_PREFIX)
    }

    /// Target named by an accepted branch event.
    pub fn branch_taken(&self) -> Option<&str> {
        if self.phase == Phase::Branch {
            self.payload.strip_prefix(BRANCH_TAKEN_PREFIX)
        } else {
            None
        }
    }
}

pub fn write_jsonl<W: Write>(events: &[TraceEvent], mut out: W) -> io::Result<()> {
    for event in events {
        serde_json::to_writer(&mut out, event)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl(events: &[TraceEvent]) -> String {
    let mut buf = Vec::new();
    write_jsonl(events, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Debug, thiserror::Error)]
pub enum TraceReadError {
    #[error("line {line}: {source}")]
    Malformed {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads a JSON Lines trace; blank lines are skipped.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<TraceEvent>, TraceReadError> {
    let mut events = Vec::new();
    for (index, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|source| TraceReadError::Malformed {
            line: index + 1,
            source,
        })?;
        events.push(event);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_names() {
        let event = TraceEvent {
            seq: 3,
            step: StepName::new("ask").unwrap(),
            phase: Phase::BackendCall,
            payload: "RESPONSE: ok".into(),
            logical_time: 2,
        };
        let line = to_jsonl(std::slice::from_ref(&event));
        assert_eq!(
            line,
            "{\"seq\":3,\"step\":\"ask\",\"phase\":\"backend_call\",\"payload\":\"RESPONSE: ok\",\"logical_time\":2}\n"
        );
        assert_eq!(read_jsonl(line.as_bytes()).unwrap(), vec![event]);
    }

    #[test]
    fn malformed_line_is_reported() {
        let text = "{\"seq\":0,\"step\":\"a\",\"phase\":\"finish\",\"payload\":\"\",\"logical_time\":0}\n{\"seq\":1,";
        match read_jsonl(text.as_bytes()) {
            Err(TraceReadError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
