use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievalMode {
    /// Deterministic token-overlap ranking.
    #[default]
    Lexical,
    /// The backend picks from a lexical shortlist.
    Backend,
}

impl std::str::FromStr for RetrievalMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexical" => Ok(Self::Lexical),
            "backend" => Ok(Self::Backend),
            other => Err(format!("unknown retrieval mode {other:?} (expected lexical or backend)")),
        }
    }
}

/// Budgets and knobs for one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub max_steps: usize,
    pub max_tool_calls_per_step: usize,
    pub branch_retries: usize,
    pub retrieval_k: usize,
    pub progress_window: usize,
    pub retrieval_mode: RetrievalMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            max_steps: 50,
            max_tool_calls_per_step: 5,
            branch_retries: 2,
            retrieval_k: 4,
            progress_window: 10,
            retrieval_mode: RetrievalMode::Lexical,
        }
    }
}

impl RunConfig {
    pub fn check(&self) -> Result<(), String> {
        let fields = [
            ("max_steps", self.max_steps),
            ("max_tool_calls_per_step", self.max_tool_calls_per_step),
            ("branch_retries", self.branch_retries),
            ("retrieval_k", self.retrieval_k),
            ("progress_window", self.progress_window),
        ];
        match fields.iter().find(|(_, v)| *v == 0) {
            Some((name, _)) => Err(format!("{name} must be positive")),
            None => Ok(()),
        }
    }
}
