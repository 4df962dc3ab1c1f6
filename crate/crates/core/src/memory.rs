//! Run-local observation memory with lexical relevance retrieval, and the
//! rolling progress summary built from completed steps.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::syntax::StepName;
use crate::trace::{Phase, TraceEvent};

/// Words dropped before relevance scoring.
pub const STOP_WORDS: [&str; 30] = [
    "a", "an", "the", "and", "or", "but", "if", "then", "of", "to", "in", "on", "at", "by", "for",
    "with", "from", "is", "are", "was", "be", "it", "this", "that", "as", "into", "about", "its",
    "do", "does",
];

/// Maximum characters in a progress summary line, marker included.
pub const MAX_SUMMARY_CHARS: usize = 500;
pub const TRUNCATION_MARKER: char = '…';

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordSource {
    Tool { name: String },
    StepResult,
}

impl fmt::Display for RecordSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Tool { name } => write!(f, "tool:{name}"),
            Self::StepResult => f.write_str("step_result"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub id: u64,
    pub origin_step: StepName,
    pub source: RecordSource,
    pub content: String,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MemoryError {
    #[error("memory record content is empty")]
    EmptyContent,
    #[error("record ids must strictly increase (found {found} after {previous})")]
    NonIncreasingId { previous: u64, found: u64 },
    #[error("invalid memory dump: {0}")]
    Dump(String),
}

/// Append-only store. Ids start at 1 and increase by one per record.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MemoryStore {
    records: Vec<MemoryRecord>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(
        &mut self,
        origin_step: StepName,
        source: RecordSource,
        content: impl Into<String>,
        created_at: u64,
    ) -> Result<u64, MemoryError> {
        let content = content.into();
        if content.is_empty() {
            return Err(MemoryError::EmptyContent);
        }
        let id = self.records.last().map_or(1, |r| r.id + 1);
        self.records.push(MemoryRecord {
            id,
            origin_step,
            source,
            content,
            created_at,
        });
        Ok(id)
    }

    pub fn records(&self) -> &[MemoryRecord] {
        &self.records
    }

    pub fn get(&self, id: u64) -> Option<&MemoryRecord> {
        // ids are dense from 1
        usize::try_from(id)
            .ok()
            .and_then(|i| i.checked_sub(1))
            .and_then(|i| self.records.get(i))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("records serialize")
    }

    /// Loads a dump produced by [`MemoryStore::to_json`], re-checking the id invariant.
    pub fn from_json(text: &str) -> Result<Self, MemoryError> {
        let records: Vec<MemoryRecord> =
            serde_json::from_str(text).map_err(|e| MemoryError::Dump(e.to_string()))?;
        let mut previous = 0;
        for record in &records {
            if record.content.is_empty() {
                return Err(MemoryError::EmptyContent);
            }
            if record.id != previous + 1 {
                return Err(MemoryError::NonIncreasingId {
                    previous,
                    found: record.id,
                });
            }
            previous = record.id;
        }
        Ok(Self { records })
    }

    /// The `k` most relevant records with a positive score, best first.
    pub fn retrieve(&self, instruction: &str, k: usize) -> Vec<&MemoryRecord> {
        if k == 0 {
            return Vec::new();
        }
        let query = tokens(instruction);
        let mut scored: Vec<(Ratio<usize>, &MemoryRecord)> = self
            .records
            .iter()
            .map(|r| (score_tokens(&query, &r.content), r))
            .filter(|(s, _)| *s > Ratio::from_integer(0))
            .collect();
        scored.sort_by(|(sa, a), (sb, b)| sb.cmp(sa).then(b.id.cmp(&a.id)));
        scored.into_iter().take(k).map(|(_, r)| r).collect()
    }
}

/// Lowercased, punctuation-free, stop-word-free token set.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split_whitespace()
        .map(|word| {
            word.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|word| !word.is_empty() && !STOP_WORDS.contains(&word.as_str()))
        .collect()
}

fn score_tokens(query: &BTreeSet<String>, content: &str) -> Ratio<usize> {
    if query.is_empty() {
        return Ratio::from_integer(0);
    }
    let content = tokens(content);
    let shared = query.intersection(&content).count();
    Ratio::new(shared, query.len())
}

/// Fraction of the instruction's tokens that also occur in `content`.
pub fn score_text(instruction: &str, content: &str) -> Ratio<usize> {
    score_tokens(&tokens(instruction), content)
}

pub fn score(instruction: &str, record: &MemoryRecord) -> Ratio<usize> {
    score_text(instruction, &record.content)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressEntry {
    pub step: StepName,
    pub summary: String,
}

/// First line of `text`, cut to [`MAX_SUMMARY_CHARS`] with a trailing marker.
pub fn summarize(text: &str) -> String {
    let first = text.lines().next().unwrap_or("").trim();
    if first.chars().count() <= MAX_SUMMARY_CHARS {
        return first.to_string();
    }
    let mut cut: String = first.chars().take(MAX_SUMMARY_CHARS - 1).collect();
    cut.push(TRUNCATION_MARKER);
    cut
}

/// One entry per completed step in the trace, keeping the latest `window`.
pub fn progress_summary(trace: &[TraceEvent], window: usize) -> Vec<ProgressEntry> {
    let finished: Vec<&TraceEvent> = trace
        .iter()
        .filter(|e| e.phase == Phase::Finish && !e.is_failure())
        .collect();
    let skip = finished.len().saturating_sub(window);
    finished
        .into_iter()
        .skip(skip)
        .map(|e| ProgressEntry {
            step: e.step.clone(),
            summary: summarize(&e.payload),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(name: &str) -> StepName {
        StepName::new(name).unwrap()
    }

    fn finish(seq: u64, name: &str, payload: &str) -> TraceEvent {
        TraceEvent {
            seq,
            step: step(name),
            phase: Phase::Finish,
            payload: payload.into(),
            logical_time: seq,
        }
    }

    #[test]
    fn ids_start_at_one() {
        let mut store = MemoryStore::new();
        assert_eq!(store.append(step("a"), RecordSource::StepResult, "x", 0), Ok(1));
        assert_eq!(store.append(step("a"), RecordSource::StepResult, "y", 1), Ok(2));
        assert_eq!(
            store.append(step("a"), RecordSource::StepResult, "", 2),
            Err(MemoryError::EmptyContent)
        );
        assert_eq!(store.len(), 2);
        assert_eq!(store.get(2).unwrap().content, "y");
        assert!(store.get(0).is_none());
    }

    #[test]
    fn hand_computed_score() {
        // instruction tokens {search, city, weather}; content tokens {weather, report, city, paris}
        assert_eq!(
            tokens("search the city weather"),
            BTreeSet::from(["search".into(), "city".into(), "weather".into()])
        );
        assert_eq!(
            score_text("search the city weather", "weather report for city Paris"),
            Ratio::new(2, 3)
        );
        assert_eq!(score_text("alpha beta", "gamma delta"), Ratio::from_integer(0));
        assert_eq!(
            score_text("Alpha, beta!", "beta gamma alpha"),
            Ratio::from_integer(1)
        );
        assert_eq!(score_text("the of a", "the of a"), Ratio::from_integer(0));
    }

    #[test]
    fn retrieve_edge_cases() {
        let mut store = MemoryStore::new();
        assert!(store.retrieve("weather", 4).is_empty());
        store
            .append(step("a"), RecordSource::StepResult, "weather is sunny", 0)
            .unwrap();
        assert!(store.retrieve("weather", 0).is_empty());
        assert_eq!(store.retrieve("weather", 4).len(), 1);
        assert!(store.retrieve("traffic", 4).is_empty());
    }

    #[test]
    fn ties_prefer_recent() {
        let mut store = MemoryStore::new();
        for content in ["city weather", "city news", "city weather today", "weather"] {
            store
                .append(step("a"), RecordSource::StepResult, content, 0)
                .unwrap();
        }
        let ids: Vec<u64> = store
            .retrieve("city weather", 10)
            .iter()
            .map(|r| r.id)
            .collect();
        assert_eq!(ids, vec![3, 1, 4, 2]);
    }

    #[test]
    fn dump_round_trip() {
        let mut store = MemoryStore::new();
        store
            .append(step("a"), RecordSource::Tool { name: "echo".into() }, "hi", 3)
            .unwrap();
        store
            .append(step("b"), RecordSource::StepResult, "done", 4)
            .unwrap();
        let json = store.to_json();
        assert_eq!(MemoryStore::from_json(&json).unwrap(), store);
        let bad = json.replace("\"id\": 2", "\"id\": 5");
        assert!(matches!(
            MemoryStore::from_json(&bad),
            Err(MemoryError::NonIncreasingId { previous: 1, found: 5 })
        ));
    }

    #[test]
    fn summary_truncation() {
        assert_eq!(summarize("first\nsecond"), "first");
        let long = "x".repeat(600);
        let cut = summarize(&long);
        assert_eq!(cut.chars().count(), MAX_SUMMARY_CHARS);
        assert!(cut.ends_with(TRUNCATION_MARKER));
        assert_eq!(summarize(&"y".repeat(500)).chars().count(), 500);
    }

    #[test]
    fn progress_window() {
        assert!(progress_summary(&[], 10).is_empty());
        let three: Vec<_> = (0..3).map(|i| finish(i, &format!("s{i}"), "ok")).collect();
        let entries = progress_summary(&three, 10);
        assert_eq!(
            entries.iter().map(|e| e.step.as_str()).collect::<Vec<_>>(),
            vec!["s0", "s1", "s2"]
        );
        let twelve: Vec<_> = (0..12).map(|i| finish(i, &format!("s{i}"), "ok")).collect();
        let entries = progress_summary(&twelve, 10);
        assert_eq!(entries.len(), 10);
        assert_eq!(entries[0].step.as_str(), "s2");
        assert_eq!(entries[9].step.as_str(), "s11");
    }
}
