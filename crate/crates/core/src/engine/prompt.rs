//! Prompt texts sent to the backend. The headers and footers here are fixed
//! byte strings: traces and scripts match on them.

use std::fmt::Write;

use crate::memory::{MemoryRecord, ProgressEntry};
use crate::syntax::Step;

pub const TASK_HEADER: &str = "## Task Description";
pub const PROGRESS_HEADER: &str = "## Current Progress";
pub const OBSERVATION_HEADER: &str = "## Observation";
pub const INSTRUCTION_HEADER: &str = "## Current Instruction";
pub const TOOLS_HEADER: &str = "## Available Tools";
pub const BRANCHES_HEADER: &str = "## Branches";
pub const CANDIDATES_HEADER: &str = "## Candidate Records";
pub const REPLY_HEADER: &str = "## Reply Format";
pub const NO_PROGRESS: &str = "(none)";
pub const NO_TOOLS: &str = "(no tools available)";

pub const EXECUTE_FOOTER: &str = "\
To run a tool, reply with one line:
ACTION: {\"tool\": \"<tool name>\", \"args\": {\"<param>\": \"<value>\"}}
The tool output will be added to the Observation section and you will be asked again.
When the current instruction is complete, reply with:
RESPONSE: <result of the current instruction>
";

pub const BRANCH_FOOTER: &str = "\
Decide which branch condition holds given the progress and observations above.
Reply with exactly one line:
BRANCH: <target>
";

pub const RETRIEVE_FOOTER: &str = "\
List the records that are relevant to the current instruction, most relevant first.
Reply with exactly one line:
RECORDS: <id>, <id>, ...
or `RECORDS: none` when no record is relevant.
";

fn four_elements(
    out: &mut String,
    task: &str,
    progress: &[ProgressEntry],
    observations: &[&MemoryRecord],
    instruction: &str,
) {
    let _ = writeln!(out, "{TASK_HEADER}\n{task}\n");
    let _ = writeln!(out, "{PROGRESS_HEADER}");
    if progress.is_empty() {
        let _ = writeln!(out, "{NO_PROGRESS}");
    }
    for entry in progress {
        let _ = writeln!(out, "- {}: {}", entry.step, entry.summary);
    }
    out.push('\n');
    if !observations.is_empty() {
        let _ = writeln!(out, "{OBSERVATION_HEADER}");
        for record in observations {
            let _ = writeln!(out, "{}", render_record(record));
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{INSTRUCTION_HEADER}\n{instruction}\n");
}

/// `[id] source from step: content`
pub fn render_record(record: &MemoryRecord) -> String {
    format!(
        "[{}] {} from {}: {}",
        record.id, record.source, record.origin_step, record.content
    )
}

/// Prompt for the execute phase of a step.
pub fn build_execution_prompt(
    task: &str,
    progress: &[ProgressEntry],
    observations: &[&MemoryRecord],
    step: &Step,
    catalog: &str,
) -> String {
    let mut out = String::new();
    four_elements(&mut out, task, progress, observations, &step.instruction);
    let _ = writeln!(out, "{TOOLS_HEADER}");
    if catalog.is_empty() {
        let _ = writeln!(out, "{NO_TOOLS}");
    } else {
        out.push_str(catalog);
    }
    let _ = writeln!(out, "\n{REPLY_HEADER}");
    out.push_str(EXECUTE_FOOTER);
    out
}

/// Prompt asking which declared branch of a Decision step to take.
pub fn build_branch_prompt(
    task: &str,
    progress: &[ProgressEntry],
    observations: &[&MemoryRecord],
    step: &Step,
) -> String {
    let mut out = String::new();
    four_elements(&mut out, task, progress, observations, &step.instruction);
    let _ = writeln!(out, "{BRANCHES_HEADER}");
    for (i, branch) in step.branches().iter().enumerate() {
        let _ = writeln!(out, "{}. {} => {}", i + 1, branch.condition, branch.target);
    }
    let _ = writeln!(out, "\n{REPLY_HEADER}");
    out.push_str(BRANCH_FOOTER);
    out
}

/// Line appended to a branch prompt after a rejected reply.
pub fn branch_correction(step: &Step, reason: &str) -> String {
    let targets: Vec<&str> = step.branches().iter().map(|b| b.target.as_str()).collect();
    format!(
        "\nYour previous reply was rejected ({reason}). Reply with exactly one line `BRANCH: <target>` where <target> is one of: {}.\n",
        targets.join(", ")
    )
}

/// Prompt asking the backend to choose relevant records from a shortlist.
pub fn build_retrieval_prompt(task: &str, instruction: &str, candidates: &[&MemoryRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TASK_HEADER}\n{task}\n");
    let _ = writeln!(out, "{INSTRUCTION_HEADER}\n{instruction}\n");
    let _ = writeln!(out, "{CANDIDATES_HEADER}");
    for record in candidates {
        let _ = writeln!(out, "{}", render_record(record));
    }
    let _ = writeln!(out, "\n{REPLY_HEADER}");
    out.push_str(RETRIEVE_FOOTER);
    out
}
