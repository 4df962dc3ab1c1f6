use std::fmt::Write;
use std::str::FromStr;

use super::model::{Connection, Program, Step, StepType};

/// Canonical `.core` text: one line per step, single spaces around separators.
pub fn render_core(program: &Program) -> String {
    let mut out = String::new();
    for step in &program.steps {
        out.push_str(&render_step(step));
        out.push('\n');
    }
    out
}

pub fn render_step(step: &Step) -> String {
    let head = format!("{} ::: {} ::: {}", step.name, step.step_type, step.instruction);
    match &step.connection {
        Connection::End => head,
        Connection::Next(target) => format!("{head} ::: {target}"),
        Connection::Branches(branches) => {
            let joined = branches
                .iter()
                .map(|b| format!("{} => {}", b.condition, b.target))
                .collect::<Vec<_>>()
                .join(" ;; ");
            format!("{head} ::: {joined}")
        }
    }
}

/// Labelled pseudo-code listing of the program.
pub fn render_pseudocode(program: &Program) -> String {
    let mut out = String::new();
    for step in &program.steps {
        let _ = writeln!(out, "{}:", step.name);
        match &step.connection {
            Connection::Next(target) => {
                let _ = writeln!(out, "    DO {} → GOTO {}", step.instruction, target);
            }
            Connection::Branches(branches) => {
                let _ = writeln!(out, "    // {}", step.instruction);
                for (i, branch) in branches.iter().enumerate() {
                    let keyword = if i == 0 { "IF" } else { "ELSE IF" };
                    let _ = writeln!(
                        out,
                        "    {keyword} {} THEN GOTO {}",
                        branch.condition, branch.target
                    );
                }
            }
            Connection::End => {
                let _ = writeln!(out, "    END: {}", step.instruction);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowchartFormat {
    Dot,
    Mermaid,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unsupported flowchart format {0:?} (expected dot or mermaid)")]
pub struct UnsupportedFormat(pub String);

impl FromStr for FlowchartFormat {
    type Err = UnsupportedFormat;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dot" => Ok(Self::Dot),
            "mermaid" => Ok(Self::Mermaid),
            _ => Err(UnsupportedFormat(s.to_string())),
        }
    }
}

pub fn render_flowchart(program: &Program, format: FlowchartFormat) -> String {
    match format {
        FlowchartFormat::Dot => render_dot(program),
        FlowchartFormat::Mermaid => render_mermaid(program),
    }
}

fn dot_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out
}

fn render_dot(program: &Program) -> String {
    let mut out = String::from("digraph core {\n");
    for step in &program.steps {
        let shape = match step.step_type {
            StepType::Process => "shape=box",
            StepType::Decision => "shape=diamond",
            StepType::Terminal => "shape=box, style=rounded",
        };
        let label = dot_escape(&format!("{}\n{}", step.name, step.instruction));
        let _ = writeln!(out, "    \"{}\" [{shape}, label=\"{label}\"];", step.name);
    }
    for step in &program.steps {
        match &step.connection {
            Connection::Next(target) => {
                let _ = writeln!(out, "    \"{}\" -> \"{}\";", step.name, target);
            }
            Connection::Branches(branches) => {
                for branch in branches {
                    let _ = writeln!(
                        out,
                        "    \"{}\" -> \"{}\" [label=\"{}\"];",
                        step.name,
                        branch.target,
                        dot_escape(&branch.condition)
                    );
                }
            }
            Connection::End => {}
        }
    }
    out.push_str("}\n");
    out
}

// Mermaid has no backslash escapes inside quoted text; entity codes are used instead.
fn mermaid_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '"' => out.push_str("#quot;"),
            '#' => out.push_str("#35;"),
            '|' => out.push_str("#124;"),
            '\n' => out.push_str("<br/>"),
            _ => out.push(c),
        }
    }
    out
}

fn render_mermaid(program: &Program) -> String {
    let mut out = String::from("flowchart TD\n");
    for step in &program.steps {
        let label = mermaid_escape(&format!("{}: {}", step.name, step.instruction));
        let (open, close) = match step.step_type {
            StepType::Process => ("[", "]"),
            StepType::Decision => ("{", "}"),
            StepType::Terminal => ("(", ")"),
        };
        let _ = writeln!(out, "    {}{open}\"{label}\"{close}", step.name);
    }
    for step in &program.steps {
        match &step.connection {
            Connection::Next(target) => {
                let _ = writeln!(out, "    {} --> {}", step.name, target);
            }
            Connection::Branches(branches) => {
                for branch in branches {
                    let _ = writeln!(
                        out,
                        "    {} -->|\"{}\"| {}",
                        step.name,
                        mermaid_escape(&branch.condition),
                        branch.target
                    );
                }
            }
            Connection::End => {}
        }
    }
    out
}
