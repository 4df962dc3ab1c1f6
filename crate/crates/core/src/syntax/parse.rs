use std::collections::HashMap;

use super::model::{
    Branch, Connection, Program, Step, StepName, StepType, BRANCH_ARROW, BRANCH_SEPARATOR,
    SEPARATOR,
};

/// A single parse diagnostic. Every variant carries the 1-based line it refers to.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: expected 3 or 4 `:::`-separated components, found {found}")]
    WrongComponentCount { line: usize, found: usize },
    #[error("line {line}: invalid step name {name:?}")]
    InvalidStepName { line: usize, name: String },
    #[error("line {line}: unknown step type {found:?} (expected Process, Decision or Terminal)")]
    UnknownStepType { line: usize, found: String },
    #[error("line {line}: step instruction is empty")]
    EmptyInstruction { line: usize },
    #[error("line {line}: {step_type} step has no connection")]
    MissingConnection { line: usize, step_type: StepType },
    #[error("line {line}: malformed branch {branch:?}: {reason}")]
    MalformedBranch {
        line: usize,
        branch: String,
        reason: &'static str,
    },
    #[error("line {line}: Decision step needs at least 2 branches, found {found}")]
    TooFewBranches { line: usize, found: usize },
    #[error("line {line}: branch condition {condition:?} appears more than once")]
    DuplicateCondition { line: usize, condition: String },
    #[error("line {line}: Terminal step declares a target {target:?}")]
    TerminalWithTarget { line: usize, target: String },
    #[error("line {line}: Process step declares branches")]
    ProcessWithBranches { line: usize },
    #[error("line {line}: program contains no steps")]
    EmptyProgram { line: usize },
    #[error("line {second_line}: duplicate step name {name:?} (first defined on line {first_line})")]
    DuplicateStepName {
        name: String,
        first_line: usize,
        second_line: usize,
    },
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::WrongComponentCount { .. } => "WRONG_COMPONENT_COUNT",
            Self::InvalidStepName { .. } => "INVALID_STEP_NAME",
            Self::UnknownStepType { .. } => "UNKNOWN_STEP_TYPE",
            Self::EmptyInstruction { .. } => "EMPTY_INSTRUCTION",
            Self::MissingConnection { .. } => "MISSING_CONNECTION",
            Self::MalformedBranch { .. } => "MALFORMED_BRANCH",
            Self::TooFewBranches { .. } => "TOO_FEW_BRANCHES",
            Self::DuplicateCondition { .. } => "DUPLICATE_CONDITION",
            Self::TerminalWithTarget { .. } => "TERMINAL_WITH_TARGET",
            Self::ProcessWithBranches { .. } => "PROCESS_WITH_BRANCHES",
            Self::EmptyProgram { .. } => "EMPTY_PROGRAM",
            Self::DuplicateStepName { .. } => "DUPLICATE_STEP_NAME",
        }
    }

    pub fn line(&self) -> usize {
        match *self {
            Self::WrongComponentCount { line, .. }
            | Self::InvalidStepName { line, .. }
            | Self::UnknownStepType { line, .. }
            | Self::EmptyInstruction { line }
            | Self::MissingConnection { line, .. }
            | Self::MalformedBranch { line, .. }
            | Self::TooFewBranches { line, .. }
            | Self::DuplicateCondition { line, .. }
            | Self::TerminalWithTarget { line, .. }
            | Self::ProcessWithBranches { line }
            | Self::EmptyProgram { line } => line,
            Self::DuplicateStepName { second_line, .. } => second_line,
        }
    }
}

fn parse_name(text: &str, line: usize) -> Result<StepName, ParseError> {
    StepName::new(text).map_err(|_| ParseError::InvalidStepName {
        line,
        name: text.to_string(),
    })
}

/// Parses one logical step line.
pub fn parse_step(text: &str, line: usize) -> Result<Step, ParseError> {
    let parts: Vec<&str> = text.split(SEPARATOR).map(str::trim).collect();
    if parts.len() != 3 && parts.len() != 4 {
        return Err(ParseError::WrongComponentCount {
            line,
            found: parts.len(),
        });
    }

    let name = parse_name(parts[0], line)?;
    let step_type = StepType::parse(parts[1]).ok_or_else(|| ParseError::UnknownStepType {
        line,
        found: parts[1].to_string(),
    })?;
    let instruction = parts[2];
    if instruction.is_empty() {
        return Err(ParseError::EmptyInstruction { line });
    }
    let raw_connection = parts.get(3).copied();

    let connection = match step_type {
        StepType::Terminal => match raw_connection {
            None | Some("") => Connection::End,
            Some(none) if none.eq_ignore_ascii_case("none") => Connection::End,
            Some(target) => {
                return Err(ParseError::TerminalWithTarget {
                    line,
                    target: target.to_string(),
                })
            }
        },
        StepType::Process => match raw_connection {
            None | Some("") => return Err(ParseError::MissingConnection { line, step_type }),
            Some(target) if target.contains(BRANCH_ARROW) || target.contains(BRANCH_SEPARATOR) => {
                return Err(ParseError::ProcessWithBranches { line })
            }
            Some(target) => Connection::Next(parse_name(target, line)?),
        },
        StepType::Decision => match raw_connection {
            None | Some("") => return Err(ParseError::MissingConnection { line, step_type }),
            Some(spec) => Connection::Branches(parse_branches(spec, line)?),
        },
    };

    Ok(Step {
        name,
        step_type,
        instruction: instruction.to_string(),
        connection,
        source_line: line,
    })
}

fn parse_branches(spec: &str, line: usize) -> Result<Vec<Branch>, ParseError> {
    let mut branches: Vec<Branch> = Vec::new();
    for raw in spec.split(BRANCH_SEPARATOR) {
        let raw = raw.trim();
        let malformed = |reason| ParseError::MalformedBranch {
            line,
            branch: raw.to_string(),
            reason,
        };
        // The target is a bare name, so the last arrow is the delimiter.
        let (condition, target) = raw
            .rsplit_once(BRANCH_ARROW)
            .ok_or_else(|| malformed("missing `=>`"))?;
        let (condition, target) = (condition.trim(), target.trim());
        if condition.is_empty() {
            return Err(malformed("empty condition"));
        }
        if target.is_empty() {
            return Err(malformed("empty target"));
        }
        let target = parse_name(target, line)?;
        if branches.iter().any(|b| b.condition == condition) {
            return Err(ParseError::DuplicateCondition {
                line,
                condition: condition.to_string(),
            });
        }
        branches.push(Branch {
            condition: condition.to_string(),
            target,
        });
    }
    if branches.len() < 2 {
        return Err(ParseError::TooFewBranches {
            line,
            found: branches.len(),
        });
    }
    Ok(branches)
}

/// Joins backslash continuations and yields `(first_line_number, text)`
/// for every logical line.
fn logical_lines(source: &str) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut pending: Option<(usize, String)> = None;
    for (index, raw) in source.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let continued = raw.ends_with('\\') && !raw.ends_with("\\\\");
        let body = if continued { &raw[..raw.len() - 1] } else { raw };
        let (start, mut text) = pending.take().unwrap_or((index + 1, String::new()));
        if !text.is_empty() {
            text.push(' ');
        }
        text.push_str(body);
        if continued {
            pending = Some((start, text));
        } else {
            out.push((start, text));
        }
    }
    if let Some(rest) = pending {
        out.push(rest);
    }
    out
}

/// Parses a complete `.core` source. The first step becomes the entry point.
pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let mut steps: Vec<Step> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    let lines = logical_lines(source);
    for (line, text) in &lines {
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed.starts_with("//") {
            continue;
        }
        let step = parse_step(trimmed, *line)?;
        if let Some(&first_line) = seen.get(step.name.as_str()) {
            return Err(ParseError::DuplicateStepName {
                name: step.name.to_string(),
                first_line,
                second_line: *line,
            });
        }
        seen.insert(step.name.to_string(), *line);
        steps.push(step);
    }
    match steps.first() {
        Some(first) => Ok(Program {
            entry: first.name.clone(),
            steps,
        }),
        None => Err(ParseError::EmptyProgram {
            line: source.lines().count().max(1),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(s: &str) -> StepName {
        StepName::new(s).unwrap()
    }

    #[test]
    fn process_step() {
        let step = parse_step("ask ::: Process ::: Ask the user for a city name ::: lookup", 1).unwrap();
        assert_eq!(step.name, name("ask"));
        assert_eq!(step.step_type, StepType::Process);
        assert_eq!(step.instruction, "Ask the user for a city name");
        assert_eq!(step.connection, Connection::Next(name("lookup")));
    }

    #[test]
    fn decision_step() {
        let step = parse_step(
            "check ::: Decision ::: Is the result list empty? ::: result list is empty => retry ;; result list has items => report",
            4,
        )
        .unwrap();
        assert_eq!(step.step_type, StepType::Decision);
        assert_eq!(
            step.connection,
            Connection::Branches(vec![
                Branch {
                    condition: "result list is empty".into(),
                    target: name("retry")
                },
                Branch {
                    condition: "result list has items".into(),
                    target: name("report")
                },
            ])
        );
        assert_eq!(step.source_line, 4);
    }

    #[test]
    fn terminal_forms() {
        for text in [
            "done ::: Terminal ::: Print the final answer",
            "done ::: Terminal ::: Print the final answer :::",
            "done ::: terminal ::: Print the final answer ::: None",
        ] {
            let step = parse_step(text, 1).unwrap();
            assert_eq!(step.connection, Connection::End, "{text}");
            assert_eq!(step.step_type, StepType::Terminal);
        }
    }

    #[test]
    fn step_type_is_case_insensitive() {
        let step = parse_step("a ::: pRoCeSs ::: x ::: b", 1).unwrap();
        assert_eq!(step.step_type, StepType::Process);
    }

    #[test]
    fn condition_may_contain_arrow() {
        let step = parse_step("d ::: Decision ::: q ::: x => y => a ;; other => b", 1).unwrap();
        assert_eq!(step.branches()[0].condition, "x => y");
    }

    #[test]
    fn step_errors() {
        let cases = [
            ("x ::: Loop ::: do ::: y", "UNKNOWN_STEP_TYPE"),
            ("x ::: Process", "WRONG_COMPONENT_COUNT"),
            ("x ::: Process ::: a ::: b ::: c", "WRONG_COMPONENT_COUNT"),
            ("x ::: Process :::  ::: y", "EMPTY_INSTRUCTION"),
            ("x ::: Process ::: go", "MISSING_CONNECTION"),
            ("x ::: Process ::: go ::: a => b ;; c => d", "PROCESS_WITH_BRANCHES"),
            ("x ::: Terminal ::: stop ::: y", "TERMINAL_WITH_TARGET"),
            ("x ::: Decision ::: q ::: a ;; b => c", "MALFORMED_BRANCH"),
            ("x ::: Decision ::: q ::: => a ;; b => c", "MALFORMED_BRANCH"),
            ("x ::: Decision ::: q ::: a => ;; b => c", "MALFORMED_BRANCH"),
            ("x ::: Decision ::: q ::: a => b", "TOO_FEW_BRANCHES"),
            ("x ::: Decision ::: q ::: a => b ;; a => c", "DUPLICATE_CONDITION"),
            ("bad name ::: Process ::: go ::: y", "INVALID_STEP_NAME"),
            ("x ::: Process ::: go ::: two words", "INVALID_STEP_NAME"),
        ];
        for (text, code) in cases {
            let err = parse_step(text, 7).unwrap_err();
            assert_eq!(err.code(), code, "{text}");
            assert_eq!(err.line(), 7);
        }
    }

    #[test]
    fn program_entry_is_first_step() {
        let src = "ask ::: Process ::: Ask the user for a city name ::: lookup\n\
                   lookup ::: Process ::: Look up the weather ::: done\n\
                   done ::: Terminal ::: Print the final answer\n";
        let program = parse_program(src).unwrap();
        assert_eq!(program.entry, name("ask"));
        assert_eq!(program.steps.len(), 3);
        assert_eq!(program.steps[2].source_line, 3);
    }

    #[test]
    fn comments_blanks_and_continuations() {
        let src = "// header\r\n\r\n  // indented comment\r\nask ::: Process ::: first half \\\r\n  second half ::: done\r\ndone ::: Terminal ::: bye\r\n";
        let program = parse_program(src).unwrap();
        assert_eq!(program.steps[0].instruction, "first half    second half");
        assert_eq!(program.steps[0].source_line, 4);
        assert_eq!(program.steps[1].source_line, 6);
    }

    #[test]
    fn duplicate_names() {
        let src = "ask ::: Process ::: a ::: done\nask ::: Process ::: b ::: done\ndone ::: Terminal ::: c";
        let err = parse_program(src).unwrap_err();
        assert_eq!(
            err,
            ParseError::DuplicateStepName {
                name: "ask".into(),
                first_line: 1,
                second_line: 2
            }
        );
    }

    #[test]
    fn empty_program() {
        for src in ["", "\n\n", "// only\n   // comments\n\n"] {
            assert_eq!(parse_program(src).unwrap_err().code(), "EMPTY_PROGRAM");
        }
    }

    #[test]
    fn errors_carry_physical_line() {
        let src = "// c\n\na ::: Process ::: x ::: b\nb ::: Nope ::: y ::: a\n";
        let err = parse_program(src).unwrap_err();
        assert_eq!((err.code(), err.line()), ("UNKNOWN_STEP_TYPE", 4));
    }
}
