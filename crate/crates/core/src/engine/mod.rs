//! Step-by-step interpreter for validated programs.
//!
//! Each executed step goes through four procedures: observations relevant to
//! the instruction are retrieved from memory, a prompt is built from the task,
//! progress, observations and instruction, the backend reply is analysed (and
//! tools are run until the backend gives a final response), and finally the
//! next step is chosen. Decision steps ask the backend which declared branch
//! holds; replies naming an undeclared target are retried a bounded number of
//! times.

mod config;
pub mod prompt;

use std::collections::BTreeSet;

use serde::Serialize;

pub use config::{RetrievalMode, RunConfig};
pub use prompt::{build_branch_prompt, build_execution_prompt};

use crate::backend::{Backend, BackendError, CallPhase, CompletionRequest};
use crate::flowgraph::check_program;
use crate::memory::{progress_summary, summarize, MemoryStore, ProgressEntry, RecordSource};
use crate::syntax::{Program, Step, StepName, StepType};
use crate::tools::{parse_directive, render_tool_catalog, Directive, ToolRegistry, ToolState};
use crate::trace::{
    Phase, TraceEvent, BRANCH_REJECTED_PREFIX, BRANCH_TAKEN_PREFIX, FAILED_PREFIX,
    LOOSE_RESPONSE_MARKER,
};

/// Upper bound on reply length passed to every backend call.
pub const MAX_OUTPUT_CHARS: usize = 4000;
/// Size of the lexical shortlist offered in backend retrieval mode.
pub const RETRIEVAL_SHORTLIST: usize = 10;
pub const BRANCH_MARKER: &str = "BRANCH:";
pub const RECORDS_MARKER: &str = "RECORDS:";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("step {step}: no final response after {calls} tool calls")]
    ToolLoopExhausted { step: StepName, calls: usize },
    #[error("step {step}: no valid branch after {attempts} attempts (last reply {last_reply:?})")]
    InvalidBranch {
        step: StepName,
        attempts: usize,
        last_reply: String,
    },
    #[error("step {step}: {source}")]
    Backend {
        step: StepName,
        #[source]
        source: BackendError,
    },
    #[error("program is not runnable: {0}")]
    Validation(String),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("step {0} does not exist")]
    MissingStep(StepName),
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::ToolLoopExhausted { .. } => "TOOL_LOOP_EXHAUSTED",
            Self::InvalidBranch { .. } => "INVALID_BRANCH",
            Self::Backend { source, .. } => source.code(),
            Self::Validation(_) => "VALIDATION",
            Self::InvalidConfig(_) => "INVALID_CONFIG",
            Self::MissingStep(_) => "MISSING_STEP",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BudgetExhausted,
    Failed,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Completed => "completed",
            Self::BudgetExhausted => "budget_exhausted",
            Self::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunFailure {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    pub final_answer: Option<String>,
    pub steps_executed: usize,
    pub trace: Vec<TraceEvent>,
    pub error: Option<RunFailure>,
    pub backend_calls: u64,
    pub memory: MemoryStore,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    status: RunStatus,
    final_answer: Option<&'a str>,
    steps_executed: usize,
    backend_calls: u64,
    error: Option<&'a RunFailure>,
}

impl RunResult {
    /// Single-object JSON summary (trace excluded).
    pub fn summary_json(&self) -> String {
        serde_json::to_string(&RunSummary {
            status: self.status,
            final_answer: self.final_answer.as_deref(),
            steps_executed: self.steps_executed,
            backend_calls: self.backend_calls,
            error: self.error.as_ref(),
        })
        .expect("summary serializes")
    }

    /// Step names of the `finish` events of successfully executed steps.
    pub fn finish_path(&self) -> Vec<&StepName> {
        finish_path(&self.trace)
    }
}

pub fn finish_path(trace: &[TraceEvent]) -> Vec<&StepName> {
    trace
        .iter()
        .filter(|e| e.phase == Phase::Finish && !e.is_failure())
        .map(|e| &e.step)
        .collect()
}

/// Mutable state of one run: memory, tool state, the trace and the logical clock.
#[derive(Debug, Default)]
pub struct RunState {
    pub memory: MemoryStore,
    pub tools: ToolState,
    pub trace: Vec<TraceEvent>,
    /// Advances once per backend call and once per tool call.
    pub clock: u64,
    pub backend_calls: u64,
}

impl RunState {
    pub fn new() -> Self {
        Self::default()
    }

    fn emit(&mut self, step: &StepName, phase: Phase, payload: impl Into<String>) {
        self.trace.push(TraceEvent {
            seq: self.trace.len() as u64,
            step: step.clone(),
            phase,
            payload: payload.into(),
            logical_time: self.clock,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub final_text: String,
    /// Memory ids of observations recorded while executing the step.
    pub observations_added: Vec<u64>,
    /// Ids of records retrieved at the start of the step.
    pub retrieved: Vec<u64>,
    pub trace_events: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextStep {
    Step(StepName),
    End,
}

/// Immutable inputs shared by every step of a run.
pub struct Engine<'a> {
    task: &'a str,
    config: &'a RunConfig,
    backend: &'a dyn Backend,
    registry: &'a ToolRegistry,
    catalog: String,
}

impl<'a> Engine<'a> {
    pub fn new(
        task: &'a str,
        config: &'a RunConfig,
        backend: &'a dyn Backend,
        registry: &'a ToolRegistry,
    ) -> Self {
        Self {
            task,
            config,
            backend,
            registry,
            catalog: render_tool_catalog(registry),
        }
    }

    fn call(
        &self,
        state: &mut RunState,
        step: &StepName,
        phase: CallPhase,
        prompt: String,
    ) -> Result<String, EngineError> {
        let request = CompletionRequest {
            phase,
            step: step.clone(),
            prompt,
            max_output_chars: MAX_OUTPUT_CHARS,
        };
        state.clock += 1;
        state.backend_calls += 1;
        self.backend
            .complete(&request)
            .map(|r| r.text)
            .map_err(|source| EngineError::Backend {
                step: step.clone(),
                source,
            })
    }

    fn progress(&self, state: &RunState) -> Vec<ProgressEntry> {
        progress_summary(&state.trace, self.config.progress_window)
    }

    fn retrieve(&self, state: &mut RunState, step: &Step) -> Result<Vec<u64>, EngineError> {
        let k = self.config.retrieval_k;
        let (label, ids) = match self.config.retrieval_mode {
            RetrievalMode::Lexical => {
                let ids = state
                    .memory
                    .retrieve(&step.instruction, k)
                    .iter()
                    .map(|r| r.id)
                    .collect();
                ("lexical", ids)
            }
            RetrievalMode::Backend => {
                let candidates: Vec<u64> = state
                    .memory
                    .retrieve(&step.instruction, RETRIEVAL_SHORTLIST)
                    .iter()
                    .map(|r| r.id)
                    .collect();
                if candidates.is_empty() {
                    ("backend", candidates)
                } else {
                    let records: Vec<_> =
                        candidates.iter().filter_map(|id| state.memory.get(*id)).collect();
                    let prompt =
                        prompt::build_retrieval_prompt(self.task, &step.instruction, &records);
                    let reply = self.call(state, &step.name, CallPhase::Retrieve, prompt)?;
                    state.emit(&step.name, Phase::BackendCall, reply.as_str());
                    match parse_records_reply(&reply, &candidates, k) {
                        Some(ids) => ("backend", ids),
                        None => ("backend-fallback", candidates.into_iter().take(k).collect()),
                    }
                }
            }
        };
        let listed = if ids.is_empty() {
            "(none)".to_string()
        } else {
            ids.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
        };
        state.emit(&step.name, Phase::Retrieve, format!("{label} records: {listed}"));
        Ok(ids)
    }

    /// Retrieval, prompt construction and the tool loop for one step.
    pub fn execute_step(&self, state: &mut RunState, step: &Step) -> Result<StepOutcome, EngineError> {
        let first_event = state.trace.len();
        let retrieved = self.retrieve(state, step)?;
        let progress = self.progress(state);
        let mut observations_added: Vec<u64> = Vec::new();
        let mut tool_calls = 0;

        let final_text = loop {
            let visible: Vec<_> = retrieved
                .iter()
                .chain(observations_added.iter().filter(|id| !retrieved.contains(id)))
                .filter_map(|id| state.memory.get(*id))
                .collect();
            let prompt =
                build_execution_prompt(self.task, &progress, &visible, step, &self.catalog);
            state.emit(&step.name, Phase::Prompt, prompt.as_str());
            let reply = self.call(state, &step.name, CallPhase::Execute, prompt)?;
            let parsed = parse_directive(&reply);
            let loose = matches!(parsed, Ok(ref p) if p.loose_response);
            let payload = if loose {
                format!("{LOOSE_RESPONSE_MARKER}\n{reply}")
            } else {
                reply.clone()
            };
            state.emit(&step.name, Phase::BackendCall, payload);

            let (tool, content) = match parsed {
                Ok(parsed) => match parsed.directive {
                    Directive::Final(answer) => break answer,
                    Directive::Action(action) => {
                        if tool_calls == self.config.max_tool_calls_per_step {
                            return Err(EngineError::ToolLoopExhausted {
                                step: step.name.clone(),
                                calls: tool_calls,
                            });
                        }
                        tool_calls += 1;
                        state.clock += 1;
                        let observation = self.registry.invoke(&action, &mut state.tools);
                        state.emit(
                            &step.name,
                            Phase::ToolCall,
                            serde_json::to_string(&observation).expect("observation serializes"),
                        );
                        let content = if observation.ok {
                            observation.content
                        } else {
                            format!("error: {}", observation.content)
                        };
                        (observation.tool, content)
                    }
                },
                // a broken ACTION line is shown to the backend like a failed tool call
                Err(malformed) => {
                    if tool_calls == self.config.max_tool_calls_per_step {
                        return Err(EngineError::ToolLoopExhausted {
                            step: step.name.clone(),
                            calls: tool_calls,
                        });
                    }
                    tool_calls += 1;
                    state.clock += 1;
                    let content = format!("error: {malformed}");
                    state.emit(
                        &step.name,
                        Phase::ToolCall,
                        serde_json::json!({ "tool": null, "ok": false, "content": content }).to_string(),
                    );
                    ("(malformed)".to_string(), content)
                }
            };
            let id = state
                .memory
                .append(step.name.clone(), RecordSource::Tool { name: tool }, content, state.clock)
                .expect("tool observations are never empty");
            observations_added.push(id);
        };

        if step.step_type == StepType::Process && !final_text.is_empty() {
            let id = state
                .memory
                .append(
                    step.name.clone(),
                    RecordSource::StepResult,
                    final_text.clone(),
                    state.clock,
                )
                .expect("checked non-empty");
            observations_added.push(id);
        }

        Ok(StepOutcome {
            final_text,
            observations_added,
            retrieved,
            trace_events: state.trace[first_event..].to_vec(),
        })
    }

    /// Successor of an executed step. Only Decision steps consult the backend.
    pub fn choose_next(
        &self,
        state: &mut RunState,
        step: &Step,
        outcome: &StepOutcome,
    ) -> Result<NextStep, EngineError> {
        match step.step_type {
            StepType::Terminal => Ok(NextStep::End),
            StepType::Process => match step.connection.targets().first() {
                Some(target) => Ok(NextStep::Step((*target).clone())),
                None => Err(EngineError::MissingStep(step.name.clone())),
            },
            StepType::Decision => self.choose_branch(state, step, outcome),
        }
    }

    fn choose_branch(
        &self,
        state: &mut RunState,
        step: &Step,
        outcome: &StepOutcome,
    ) -> Result<NextStep, EngineError> {
        let mut progress = self.progress(state);
        progress.push(ProgressEntry {
            step: step.name.clone(),
            summary: summarize(&outcome.final_text),
        });
        let mut seen = BTreeSet::new();
        let visible: Vec<_> = outcome
            .retrieved
            .iter()
            .chain(&outcome.observations_added)
            .filter(|id| seen.insert(**id))
            .filter_map(|id| state.memory.get(*id))
            .collect();
        let base = build_branch_prompt(self.task, &progress, &visible, step);

        let attempts = 1 + self.config.branch_retries;
        let mut prompt = base.clone();
        let mut last_reply = String::new();
        for _ in 0..attempts {
            state.emit(&step.name, Phase::Prompt, prompt.as_str());
            let reply = self.call(state, &step.name, CallPhase::Branch, prompt)?;
            state.emit(&step.name, Phase::BackendCall, reply.as_str());
            match parse_branch_reply(&reply, step) {
                Ok(target) => {
                    state.emit(
                        &step.name,
                        Phase::Branch,
                        format!("{BRANCH_TAKEN_PREFIX}{target}"),
                    );
                    return Ok(NextStep::Step(target));
                }
                Err(reason) => {
                    state.emit(
                        &step.name,
                        Phase::Branch,
                        format!("{BRANCH_REJECTED_PREFIX}{reason}"),
                    );
                    prompt = format!("{base}{}", prompt::branch_correction(step, &reason));
                    last_reply = reply;
                }
            }
        }
        Err(EngineError::InvalidBranch {
            step: step.name.clone(),
            attempts,
            last_reply,
        })
    }

    /// Runs `program` from its entry step until a Terminal step, the step
    /// budget, or an error.
    pub fn run(&self, program: &Program) -> RunResult {
        let mut state = RunState::new();
        let mut steps_executed = 0;

        let failed = |mut state: RunState, step: &StepName, err: EngineError, steps_executed| {
            state.emit(
                step,
                Phase::Finish,
                format!("{FAILED_PREFIX}{}: {err}", err.code()),
            );
            RunResult {
                status: RunStatus::Failed,
                final_answer: None,
                steps_executed,
                error: Some(RunFailure {
                    code: err.code().to_string(),
                    message: err.to_string(),
                }),
                backend_calls: state.backend_calls,
                trace: state.trace,
                memory: state.memory,
            }
        };

        if let Err(message) = self.config.check() {
            return failed(state, &program.entry, EngineError::InvalidConfig(message), 0);
        }
        let report = check_program(program);
        if let Some(first) = report.errors().next() {
            let message = first.to_string();
            return failed(state, &program.entry, EngineError::Validation(message), 0);
        }

        let mut current = program.entry.clone();
        while steps_executed < self.config.max_steps {
            let Some(step) = program.step(current.as_str()) else {
                return failed(state, &current, EngineError::MissingStep(current.clone()), steps_executed);
            };
            let outcome = match self.execute_step(&mut state, step) {
                Ok(outcome) => outcome,
                Err(err) => return failed(state, &step.name, err, steps_executed),
            };
            let next = match self.choose_next(&mut state, step, &outcome) {
                Ok(next) => next,
                Err(err) => return failed(state, &step.name, err, steps_executed),
            };
            state.emit(&step.name, Phase::Finish, outcome.final_text.as_str());
            steps_executed += 1;
            match next {
                NextStep::End => {
                    return RunResult {
                        status: RunStatus::Completed,
                        final_answer: Some(outcome.final_text),
                        steps_executed,
                        error: None,
                        backend_calls: state.backend_calls,
                        trace: state.trace,
                        memory: state.memory,
                    }
                }
                NextStep::Step(name) => current = name,
            }
        }

        RunResult {
            status: RunStatus::BudgetExhausted,
            final_answer: None,
            steps_executed,
            error: None,
            backend_calls: state.backend_calls,
            trace: state.trace,
            memory: state.memory,
        }
    }
}

/// Convenience wrapper around [`Engine::run`].
pub fn run(
    program: &Program,
    task: &str,
    config: &RunConfig,
    backend: &dyn Backend,
    registry: &ToolRegistry,
) -> RunResult {
    Engine::new(task, config, backend, registry).run(program)
}

/// Accepts `BRANCH: <target>` naming one of the step's declared targets.
pub fn parse_branch_reply(reply: &str, step: &Step) -> Result<StepName, String> {
    let Some(target) = reply
        .lines()
        .find_map(|line| line.trim_start().strip_prefix(BRANCH_MARKER))
        .map(str::trim)
    else {
        return Err(format!("no `{BRANCH_MARKER}` line"));
    };
    step.branches()
        .iter()
        .find(|b| b.target.as_str() == target)
        .map(|b| b.target.clone())
        .ok_or_else(|| format!("{target:?} is not a declared branch target"))
}

/// Ids from a `RECORDS:` reply restricted to the shortlist, or `None` if the
/// reply has no such line.
fn parse_records_reply(reply: &str, candidates: &[u64], k: usize) -> Option<Vec<u64>> {
    let listed = reply
        .lines()
        .find_map(|line| line.trim_start().strip_prefix(RECORDS_MARKER))?
        .trim();
    if listed.eq_ignore_ascii_case("none") {
        return Some(Vec::new());
    }
    let mut ids = Vec::new();
    for id in listed
        .split(',')
        .filter_map(|part| part.trim().trim_start_matches('[').trim_end_matches(']').parse::<u64>().ok())
    {
        if candidates.contains(&id) && !ids.contains(&id) {
            ids.push(id);
        }
    }
    ids.truncate(k);
    Some(ids)
}
