use std::fmt;

use serde::{Deserialize, Serialize};

/// Component separator between the four parts of a step line.
pub const SEPARATOR: &str = ":::";
/// Separator between branches of a Decision connection.
pub const BRANCH_SEPARATOR: &str = ";;";
/// Separator between a branch condition and its target.
pub const BRANCH_ARROW: &str = "=>";

/// Identifier of a step: letters, digits, `_` and `-`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct StepName(String);

impl StepName {
    pub fn new(value: impl Into<String>) -> Result<Self, InvalidStepName> {
        let value = value.into();
        if Self::is_valid(&value) {
            Ok(Self(value))
        } else {
            Err(InvalidStepName(value))
        }
    }

    pub fn is_valid(value: &str) -> bool {
        !value.is_empty()
            && value
                .chars()
                .all(|c| c.is_alphanumeric() || c == '_' || c == '-')
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StepName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for StepName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for StepName {
    type Error = InvalidStepName;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<StepName> for String {
    fn from(name: StepName) -> Self {
        name.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid step name {0:?}")]
pub struct InvalidStepName(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepType {
    Process,
    Decision,
    Terminal,
}

impl StepType {
    /// Case-insensitive match against the three type keywords.
    pub fn parse(text: &str) -> Option<Self> {
        match text.to_ascii_lowercase().as_str() {
            "process" => Some(Self::Process),
            "decision" => Some(Self::Decision),
            "terminal" => Some(Self::Terminal),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Process => "Process",
            Self::Decision => "Decision",
            Self::Terminal => "Terminal",
        }
    }
}

impl fmt::Display for StepType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub condition: String,
    pub target: StepName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connection {
    Next(StepName),
    Branches(Vec<Branch>),
    End,
}

impl Connection {
    /// Targets in declaration order (with repeats for converging branches).
    pub fn targets(&self) -> Vec<&StepName> {
        match self {
            Self::Next(target) => vec![target],
            Self::Branches(branches) => branches.iter().map(|b| &b.target).collect(),
            Self::End => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Step {
    pub name: StepName,
    pub step_type: StepType,
    pub instruction: String,
    pub connection: Connection,
    /// 1-based line of the step in its source (first physical line when continued).
    pub source_line: usize,
}

impl Step {
    pub fn branches(&self) -> &[Branch] {
        match &self.connection {
            Connection::Branches(branches) => branches,
            _ => &[],
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.step_type == StepType::Terminal
    }
}

// Source positions do not participate in equality: a re-rendered program is
// the same program even if its lines moved.
impl PartialEq for Step {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.step_type == other.step_type
            && self.instruction == other.instruction
            && self.connection == other.connection
    }
}

impl Eq for Step {}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub steps: Vec<Step>,
    pub entry: StepName,
}

impl Program {
    pub fn step(&self, name: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.name.as_str() == name)
    }

    pub fn entry_step(&self) -> &Step {
        // entry is always the first step
        &self.steps[0]
    }
}
