//! Step graph construction and static control-flow checks.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::syntax::{Connection, Program, Step, StepName, StepType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub from: StepName,
    pub to: StepName,
    pub label: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FlowGraph {
    pub nodes: BTreeMap<StepName, Step>,
    /// Edges in program order: steps by source order, branches by declaration order.
    pub edges: Vec<Edge>,
    pub entry: StepName,
    order: Vec<StepName>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: step {step:?} refers to unknown step {target:?}")]
pub struct UnknownTarget {
    pub step: String,
    pub target: String,
    pub line: usize,
}

impl UnknownTarget {
    pub fn code(&self) -> &'static str {
        "UNKNOWN_TARGET"
    }
}

/// Edge list declared by a program, in program order.
pub fn edge_set(program: &Program) -> Vec<Edge> {
    let mut edges = Vec::new();
    for step in &program.steps {
        match &step.connection {
            Connection::Next(target) => edges.push(Edge {
                from: step.name.clone(),
                to: target.clone(),
                label: None,
            }),
            Connection::Branches(branches) => edges.extend(branches.iter().map(|b| Edge {
                from: step.name.clone(),
                to: b.target.clone(),
                label: Some(b.condition.clone()),
            })),
            Connection::End => {}
        }
    }
    edges
}

pub fn build_graph(program: &Program) -> Result<FlowGraph, UnknownTarget> {
    let nodes: BTreeMap<StepName, Step> = program
        .steps
        .iter()
        .map(|s| (s.name.clone(), s.clone()))
        .collect();
    for step in &program.steps {
        if let Some(missing) = step
            .connection
            .targets()
            .into_iter()
            .find(|t| !nodes.contains_key(*t))
        {
            return Err(UnknownTarget {
                step: step.name.to_string(),
                target: missing.to_string(),
                line: step.source_line,
            });
        }
    }
    Ok(FlowGraph {
        nodes,
        edges: edge_set(program),
        entry: program.entry.clone(),
        order: program.steps.iter().map(|s| s.name.clone()).collect(),
    })
}

impl FlowGraph {
    /// Node names in source order.
    pub fn names(&self) -> &[StepName] {
        &self.order
    }

    pub fn successors<'a>(&'a self, name: &'a StepName) -> impl Iterator<Item = &'a StepName> + 'a {
        self.edges.iter().filter(move |e| &e.from == name).map(|e| &e.to)
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        self.edges
            .iter()
            .any(|e| e.from.as_str() == from && e.to.as_str() == to)
    }

    fn adjacency(&self) -> HashMap<&StepName, Vec<&StepName>> {
        let mut adj: HashMap<&StepName, Vec<&StepName>> = HashMap::new();
        for edge in &self.edges {
            adj.entry(&edge.from).or_default().push(&edge.to);
        }
        adj
    }

    fn reverse_adjacency(&self) -> HashMap<&StepName, Vec<&StepName>> {
        let mut adj: HashMap<&StepName, Vec<&StepName>> = HashMap::new();
        for edge in &self.edges {
            adj.entry(&edge.to).or_default().push(&edge.from);
        }
        adj
    }
}

fn bfs<'a>(
    starts: impl IntoIterator<Item = &'a StepName>,
    adj: &HashMap<&'a StepName, Vec<&'a StepName>>,
) -> BTreeSet<StepName> {
    let mut seen: BTreeSet<StepName> = BTreeSet::new();
    let mut queue: VecDeque<&StepName> = VecDeque::new();
    for start in starts {
        if seen.insert(start.clone()) {
            queue.push_back(start);
        }
    }
    while let Some(node) = queue.pop_front() {
        for next in adj.get(node).into_iter().flatten() {
            if seen.insert((*next).clone()) {
                queue.push_back(next);
            }
        }
    }
    seen
}

/// Steps reachable from the entry, entry included.
pub fn reachable_steps(graph: &FlowGraph) -> BTreeSet<StepName> {
    bfs([&graph.entry], &graph.adjacency())
}

/// Steps from which some Terminal step can be reached.
pub fn steps_reaching_terminal(graph: &FlowGraph) -> BTreeSet<StepName> {
    let terminals = graph
        .nodes
        .values()
        .filter(|s| s.step_type == StepType::Terminal)
        .map(|s| &s.name);
    bfs(terminals, &graph.reverse_adjacency())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Error => "ERROR",
            Self::Warning => "WARNING",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    UnknownTarget,
    NoTerminal,
    UnreachableStep,
    NoPathToTerminal,
    DuplicateBranchTarget,
    SelfLoop,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::UnknownTarget => "UNKNOWN_TARGET",
            Self::NoTerminal => "NO_TERMINAL",
            Self::UnreachableStep => "UNREACHABLE_STEP",
            Self::NoPathToTerminal => "NO_PATH_TO_TERMINAL",
            Self::DuplicateBranchTarget => "DUPLICATE_BRANCH_TARGET",
            Self::SelfLoop => "SELF_LOOP",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            Self::UnknownTarget
            | Self::NoTerminal
            | Self::UnreachableStep
            | Self::NoPathToTerminal => Severity::Error,
            Self::DuplicateBranchTarget | Self::SelfLoop => Severity::Warning,
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    pub step: Option<StepName>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.severity, self.code)?;
        if let Some(step) = &self.step {
            write!(f, " step={step}")?;
        }
        if let Some(line) = self.line {
            write!(f, " line={line}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    fn from_diagnostics(mut diagnostics: Vec<Diagnostic>) -> Self {
        // program-level findings (no line) sort first
        diagnostics.sort_by_key(|d| (d.line, d.code));
        let ok = diagnostics.iter().all(|d| d.severity != Severity::Error);
        Self { ok, diagnostics }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
    }

    pub fn has(&self, code: DiagnosticCode) -> bool {
        self.diagnostics.iter().any(|d| d.code == code)
    }

    /// Steps flagged with `code`, in report order.
    pub fn steps_with(&self, code: DiagnosticCode) -> Vec<&StepName> {
        self.diagnostics
            .iter()
            .filter(|d| d.code == code)
            .filter_map(|d| d.step.as_ref())
            .collect()
    }

    /// One `SEVERITY CODE step=<name> line=<n>: message` line per diagnostic.
    pub fn to_text(&self) -> String {
        self.diagnostics
            .iter()
            .map(|d| format!("{d}\n"))
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.diagnostics).expect("diagnostics serialize")
    }
}

pub fn validate(graph: &FlowGraph) -> ValidationReport {
    let mut diagnostics = Vec::new();
    let mut push = |code: DiagnosticCode, step: Option<&Step>, message: String| {
        diagnostics.push(Diagnostic {
            severity: code.severity(),
            code,
            step: step.map(|s| s.name.clone()),
            line: step.map(|s| s.source_line),
            message,
        });
    };

    let has_terminal = graph
        .nodes
        .values()
        .any(|s| s.step_type == StepType::Terminal);
    if !has_terminal {
        push(
            DiagnosticCode::NoTerminal,
            None,
            "program has no Terminal step".to_string(),
        );
    }

    let reachable = reachable_steps(graph);
    let reaches_terminal = steps_reaching_terminal(graph);

    for name in graph.names() {
        let step = &graph.nodes[name];
        if !reachable.contains(name) {
            push(
                DiagnosticCode::UnreachableStep,
                Some(step),
                format!("step {name} cannot be reached from entry step {}", graph.entry),
            );
        } else if !reaches_terminal.contains(name) {
            push(
                DiagnosticCode::NoPathToTerminal,
                Some(step),
                format!("no Terminal step is reachable from step {name}"),
            );
        }

        let mut seen_targets = BTreeSet::new();
        for branch in step.branches() {
            if !seen_targets.insert(&branch.target) {
                push(
                    DiagnosticCode::DuplicateBranchTarget,
                    Some(step),
                    format!("several branches of {name} lead to {}", branch.target),
                );
                break;
            }
        }

        if matches!(&step.connection, Connection::Next(target) if target == name) {
            push(
                DiagnosticCode::SelfLoop,
                Some(step),
                format!("Process step {name} transitions to itself unconditionally"),
            );
        }
    }

    ValidationReport::from_diagnostics(diagnostics)
}

/// Full static check of a parsed program. Dangling targets are reported as
/// `UNKNOWN_TARGET` errors; the graph checks run only when every target exists.
pub fn check_program(program: &Program) -> ValidationReport {
    match build_graph(program) {
        Ok(graph) => validate(&graph),
        Err(_) => {
            let names: BTreeSet<&StepName> = program.steps.iter().map(|s| &s.name).collect();
            let diagnostics = program
                .steps
                .iter()
                .flat_map(|step| {
                    step.connection
                        .targets()
                        .into_iter()
                        .filter(|t| !names.contains(t))
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .map(move |target| Diagnostic {
                            severity: Severity::Error,
                            code: DiagnosticCode::UnknownTarget,
                            step: Some(step.name.clone()),
                            line: Some(step.source_line),
                            message: format!("step {} refers to unknown step {target}", step.name),
                        })
                })
                .collect();
            ValidationReport::from_diagnostics(diagnostics)
        }
    }
}
