//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use corelang::memory::{MemoryStore, RecordSource};
use corelang::syntax::{Branch, Connection, Program, Step, StepName, StepType};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn examples_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn name(s: &str) -> StepName {
    StepName::new(s).unwrap()
}

// ---------------------------------------------------------------------------
// program generators

const WORDS: &[&str] = &[
    "ask", "the", "user", "for", "a", "city", "is", "list", "empty?", "check", "weather",
    "\"quoted\"", "x=1", "a>b", "50%", "#tag", "|pipe|", "café", "日本", "back\\slash", "(paren)",
    "{brace}", "[box]", "=>", "don't", "it's", "::", "; semi", "->", "//", "*", "done.",
];

fn phrase<R: Rng>(rng: &mut R, max_words: usize) -> String {
    let count = rng.gen_range(1..=max_words);
    (0..count)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_name<R: Rng>(rng: &mut R) -> String {
    const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-";
    let len = rng.gen_range(1..=10);
    (0..len)
        .map(|_| CHARS[rng.gen_range(0..CHARS.len())] as char)
        .collect()
}

fn random_connection<R: Rng>(rng: &mut R, step_type: StepType, names: &[String]) -> Connection {
    let pick = |rng: &mut R| name(names.choose(rng).unwrap());
    match step_type {
        StepType::Process => Connection::Next(pick(rng)),
        StepType::Terminal => Connection::End,
        StepType::Decision => {
            let count = rng.gen_range(2..=4);
            let mut conditions = BTreeSet::new();
            let mut branches = Vec::new();
            while branches.len() < count {
                let condition = phrase(rng, 5);
                if conditions.insert(condition.clone()) {
                    branches.push(Branch {
                        condition,
                        target: pick(rng),
                    });
                }
            }
            Connection::Branches(branches)
        }
    }
}

fn random_type<R: Rng>(rng: &mut R) -> StepType {
    match rng.gen_range(0..10) {
        0..=4 => StepType::Process,
        5..=7 => StepType::Decision,
        _ => StepType::Terminal,
    }
}

/// Grammar-valid program with up to `max_steps` steps. Targets always name
/// existing steps; source lines are 1..n.
pub fn random_program<R: Rng>(rng: &mut R, max_steps: usize) -> Program {
    let count = rng.gen_range(1..=max_steps);
    let mut names = BTreeSet::new();
    while names.len() < count {
        names.insert(random_name(rng));
    }
    let mut names: Vec<String> = names.into_iter().collect();
    names.shuffle(rng);
    let steps: Vec<Step> = names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let step_type = random_type(rng);
            Step {
                name: name(n),
                step_type,
                instruction: phrase(rng, 8),
                connection: random_connection(rng, step_type, &names),
                source_line: i + 1,
            }
        })
        .collect();
    Program {
        entry: steps[0].name.clone(),
        steps,
    }
}

/// Program over nodes `s0..s{n-1}` with random control flow, used to stress
/// the graph checks. Terminal steps are sometimes absent altogether.
pub fn random_graph_program<R: Rng>(rng: &mut R, max_nodes: usize) -> Program {
    let n = rng.gen_range(1..=max_nodes);
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let terminal_weight = if rng.gen_bool(0.2) { 0 } else { rng.gen_range(1..=3) };
    let steps = (0..n)
        .map(|i| {
            let roll = rng.gen_range(0..10);
            let step_type = if roll < terminal_weight {
                StepType::Terminal
            } else if roll < 7 {
                StepType::Process
            } else {
                StepType::Decision
            };
            let connection = match step_type {
                StepType::Process => Connection::Next(name(names.choose(rng).unwrap())),
                StepType::Terminal => Connection::End,
                StepType::Decision => Connection::Branches(
                    (0..rng.gen_range(2..=3))
                        .map(|b| Branch {
                            condition: format!("case {b}"),
                            target: name(names.choose(rng).unwrap()),
                        })
                        .collect(),
                ),
            };
            Step {
                name: name(&names[i]),
                step_type,
                instruction: format!("step {i}"),
                connection,
                source_line: i + 1,
            }
        })
        .collect::<Vec<_>>();
    Program {
        entry: name("s0"),
        steps,
    }
}

// ---------------------------------------------------------------------------
// reachability oracle: boolean transitive closure (Warshall)

pub struct Closure {
    pub names: Vec<StepName>,
    pub reach: Vec<Vec<bool>>,
}

pub fn transitive_closure(program: &Program) -> Closure {
    let names: Vec<StepName> = program.steps.iter().map(|s| s.name.clone()).collect();
    let index: BTreeMap<&StepName, usize> = names.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let n = names.len();
    let mut reach = vec![vec![false; n]; n];
    for (i, step) in program.steps.iter().enumerate() {
        reach[i][i] = true;
        for target in step.connection.targets() {
            reach[i][index[target]] = true;
        }
    }
    for k in 0..n {
        let via = reach[k].clone();
        for row in reach.iter_mut() {
            if row[k] {
                for (cell, &through) in row.iter_mut().zip(&via) {
                    *cell |= through;
                }
            }
        }
    }
    Closure { names, reach }
}

pub struct ReachabilityFindings {
    pub reachable: BTreeSet<StepName>,
    pub unreachable: BTreeSet<StepName>,
    pub no_path_to_terminal: BTreeSet<StepName>,
}

pub fn brute_force_findings(program: &Program) -> ReachabilityFindings {
    let closure = transitive_closure(program);
    let entry = closure
        .names
        .iter()
        .position(|n| *n == program.entry)
        .unwrap();
    let terminals: Vec<usize> = program
        .steps
        .iter()
        .enumerate()
        .filter(|(_, s)| s.step_type == StepType::Terminal)
        .map(|(i, _)| i)
        .collect();
    let mut findings = ReachabilityFindings {
        reachable: BTreeSet::new(),
        unreachable: BTreeSet::new(),
        no_path_to_terminal: BTreeSet::new(),
    };
    for (j, node) in closure.names.iter().enumerate() {
        if closure.reach[entry][j] {
            findings.reachable.insert(node.clone());
            if !terminals.iter().any(|&t| closure.reach[j][t]) {
                findings.no_path_to_terminal.insert(node.clone());
            }
        } else {
            findings.unreachable.insert(node.clone());
        }
    }
    findings
}

// ---------------------------------------------------------------------------
// arithmetic oracle: shunting-yard to RPN, then stack evaluation

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(BigRational),
    Op(char),
    Neg,
    LParen,
    RParen,
}

fn tokenize(expr: &str) -> Option<Vec<Token>> {
    let chars: Vec<char> = expr.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
            if frac.contains('.') || (int.is_empty() && frac.is_empty()) {
                return None;
            }
            let digits = format!("{int}{frac}");
            let numer: BigInt = digits.parse().ok()?;
            let denom = BigInt::from(10).pow(frac.len() as u32);
            tokens.push(Token::Num(BigRational::new(numer, denom)));
        } else {
            let prev_is_value = matches!(tokens.last(), Some(Token::Num(_)) | Some(Token::RParen));
            tokens.push(match c {
                '(' => Token::LParen,
                ')' => Token::RParen,
                '-' if !prev_is_value => Token::Neg,
                // unary plus is a no-op
                '+' if !prev_is_value => {
                    i += 1;
                    continue;
                }
                '+' | '-' | '*' | '/' => Token::Op(c),
                _ => return None,
            });
            i += 1;
        }
    }
    Some(tokens)
}

fn precedence(token: &Token) -> u8 {
    match token {
        Token::Op('+') | Token::Op('-') => 1,
        Token::Op(_) => 2,
        Token::Neg => 3,
        _ => 0,
    }
}

/// `Ok(None)` on division by zero, `Err` on a syntax error.
pub fn shunting_yard_eval(expr: &str) -> Result<Option<BigRational>, ()> {
    let tokens = tokenize(expr).ok_or(())?;
    let mut output: Vec<Token> = Vec::new();
    let mut stack: Vec<Token> = Vec::new();
    for token in tokens {
        match token {
            Token::Num(_) => output.push(token),
            Token::Neg => stack.push(token),
            Token::Op(_) => {
                while let Some(top) = stack.last() {
                    // binary operators are left-associative; unary minus binds tighter
                    if *top != Token::LParen && precedence(top) >= precedence(&token) {
                        output.push(stack.pop().unwrap());
                    } else {
                        break;
                    }
                }
                stack.push(token);
            }
            Token::LParen => stack.push(token),
            Token::RParen => loop {
                match stack.pop() {
                    Some(Token::LParen) => break,
                    Some(op) => output.push(op),
                    None => return Err(()),
                }
            },
        }
    }
    while let Some(op) = stack.pop() {
        if op == Token::LParen {
            return Err(());
        }
        output.push(op);
    }

    let mut values: Vec<BigRational> = Vec::new();
    let mut div_by_zero = false;
    for token in output {
        match token {
            Token::Num(v) => values.push(v),
            Token::Neg => {
                let v = values.pop().ok_or(())?;
                values.push(-v);
            }
            Token::Op(op) => {
                let b = values.pop().ok_or(())?;
                let a = values.pop().ok_or(())?;
                values.push(match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    _ => {
                        if b.is_zero() {
                            div_by_zero = true;
                            BigRational::zero()
                        } else {
                            a / b
                        }
                    }
                });
            }
            _ => return Err(()),
        }
    }
    if values.len() != 1 {
        return Err(());
    }
    Ok(if div_by_zero { None } else { values.pop() })
}

/// Rounds half away from zero at 10 places using integer division.
pub fn oracle_format(value: &BigRational) -> String {
    let scale = BigInt::from(10).pow(10);
    let numer = value.numer().abs() * &scale;
    let denom = value.denom().abs();
    let mut q = &numer / &denom;
    let r = &numer % &denom;
    if r * 2 >= denom {
        q += 1;
    }
    let digits = format!("{q:0>11}");
    let (int, frac) = digits.split_at(digits.len() - 10);
    let frac = frac.trim_end_matches('0');
    let sign = if value.is_negative() && !q.is_zero() { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}

pub fn random_expression<R: Rng>(rng: &mut R, depth: usize) -> String {
    let leaf = depth == 0 || rng.gen_bool(0.25);
    let ws = |rng: &mut R| if rng.gen_bool(0.3) { " " } else { "" };
    if leaf {
        return match rng.gen_range(0..3) {
            0 => rng.gen_range(0..20).to_string(),
            1 => rng.gen_range(0..1000).to_string(),
            _ => format!("{}.{}", rng.gen_range(0..100), rng.gen_range(0..1000)),
        };
    }
    match rng.gen_range(0..10) {
        0 => format!("-{}", random_expression(rng, depth - 1)),
        1 | 2 => format!("({})", random_expression(rng, depth - 1)),
        _ => {
            let op = ['+', '-', '*', '/'][rng.gen_range(0..4)];
            format!(
                "{}{}{}{}{}",
                random_expression(rng, depth - 1),
                ws(rng),
                op,
                ws(rng),
                random_expression(rng, depth - 1)
            )
        }
    }
}

// ---------------------------------------------------------------------------
// retrieval oracle

const RECORD_WORDS: &[&str] = &[
    "city", "weather", "paris", "report", "rain", "sun", "the", "of", "traffic", "train",
    "museum", "ticket", "price", "search", "result", "empty", "list", "Weather,", "CITY!",
];

pub fn random_store<R: Rng>(rng: &mut R, size: usize) -> MemoryStore {
    let mut store = MemoryStore::new();
    for i in 0..size {
        let content = (0..rng.gen_range(1..=6))
            .map(|_| *RECORD_WORDS.choose(rng).unwrap())
            .collect::<Vec<_>>()
            .join(" ");
        let source = if rng.gen_bool(0.5) {
            RecordSource::StepResult
        } else {
            RecordSource::Tool { name: "echo".into() }
        };
        store
            .append(name(&format!("s{}", i % 7)), source, content, i as u64)
            .unwrap();
    }
    store
}

pub fn random_instruction<R: Rng>(rng: &mut R) -> String {
    (0..rng.gen_range(1..=5))
        .map(|_| *RECORD_WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

const ORACLE_STOP: &str = "a an the and or but if then of to in on at by for with from is are was \
                           be it this that as into about its do does";

pub fn oracle_tokens(text: &str) -> BTreeSet<String> {
    let stop: BTreeSet<&str> = ORACLE_STOP.split_whitespace().collect();
    let mut out = BTreeSet::new();
    for word in text.split_whitespace() {
        let mut cleaned = String::new();
        for c in word.chars() {
            if c.is_alphanumeric() {
                cleaned.extend(c.to_lowercase());
            }
        }
        if !cleaned.is_empty() && !stop.contains(cleaned.as_str()) {
            out.insert(cleaned);
        }
    }
    out
}

/// (shared, query size) with the query size kept as the denominator.
pub fn oracle_score(instruction: &str, content: &str) -> (u64, u64) {
    let query = oracle_tokens(instruction);
    let content = oracle_tokens(content);
    let shared = query.iter().filter(|t| content.contains(*t)).count();
    (shared as u64, query.len().max(1) as u64)
}

/// Compare fractions a/b and c/d by cross multiplication.
pub fn cmp_fraction(a: (u64, u64), b: (u64, u64)) -> std::cmp::Ordering {
    (a.0 * b.1).cmp(&(b.0 * a.1))
}

/// Score every record, sort by (score desc, id desc), keep positive, take k.
pub fn brute_force_retrieve(store: &MemoryStore, instruction: &str, k: usize) -> Vec<u64> {
    let mut all: Vec<(u64, (u64, u64))> = store
        .records()
        .iter()
        .map(|r| (r.id, oracle_score(instruction, &r.content)))
        .filter(|(_, s)| s.0 > 0)
        .collect();
    all.sort_by(|(ia, sa), (ib, sb)| cmp_fraction(*sb, *sa).then(ib.cmp(ia)));
    all.into_iter().take(k).map(|(id, _)| id).collect()
}

/// Every line of every file under `root`, scored and ranked by
/// (score desc, relative path asc, line asc); top `k` as `path:line`.
pub fn brute_force_search(root: &Path, query: &str, k: usize) -> Vec<String> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, out);
            } else {
                out.push(path);
            }
        }
    }
    let mut files = Vec::new();
    walk(root, &mut files);
    let mut hits = Vec::new();
    for file in files {
        let rel = file.strip_prefix(root).unwrap().to_path_buf();
        let text = std::fs::read_to_string(&file).unwrap();
        for (i, line) in text.lines().enumerate() {
            let s = oracle_score(query, line);
            if s.0 > 0 {
                hits.push((s, rel.clone(), i + 1));
            }
        }
    }
    hits.sort_by(|a, b| cmp_fraction(b.0, a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    hits.into_iter()
        .take(k)
        .map(|(_, p, l)| format!("{}:{l}", p.display()))
        .collect()
}

// ---------------------------------------------------------------------------
// example runs

pub const EXAMPLE_TASKS: [(&str, &str); 4] = [
    ("sequence", "Help me pack for a weekend hike"),
    ("selection", "Is 42 even or odd?"),
    ("iteration", "Count to three"),
    ("tool_use", "What is 2*(3+4)?"),
];

pub fn load_example(program: &str) -> corelang::syntax::Program {
    let path = examples_dir().join(format!("{program}.core"));
    corelang::syntax::parse_program(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Runs `examples/<program>.core` against `examples/<script>.script.json`
/// with the built-in tools and no text-search corpus.
pub fn run_example(
    program: &str,
    script: &str,
    task: &str,
    config: &corelang::engine::RunConfig,
) -> corelang::engine::RunResult {
    let program = load_example(program);
    let backend =
        corelang::backend::load_script(examples_dir().join(format!("{script}.script.json")))
            .unwrap();
    let registry = corelang::tools::builtin_registry(None);
    corelang::engine::run(&program, task, config, &backend, &registry)
}

/// Checks one step's phases: retrieve, prompt, backend_call, then
/// (tool_call, prompt, backend_call)*, then (prompt, backend_call, branch)*
/// and a closing finish.
pub fn step_shape_error(phases: &[corelang::trace::Phase]) -> Option<String> {
    use corelang::trace::Phase::*;
    let fail = || Some(format!("unexpected phase sequence {phases:?}"));
    let mut rest = match phases {
        [Retrieve, Prompt, BackendCall, rest @ ..] => rest,
        _ => return fail(),
    };
    while let [ToolCall, Prompt, BackendCall, tail @ ..] = rest {
        rest = tail;
    }
    while let [Prompt, BackendCall, Branch, tail @ ..] = rest {
        rest = tail;
    }
    if rest == [Finish] {
        None
    } else {
        fail()
    }
}

/// Splits a trace into per-step phase lists, each ending at a finish event.
pub fn step_phases(trace: &[corelang::trace::TraceEvent]) -> Vec<(String, Vec<corelang::trace::Phase>)> {
    let mut steps = Vec::new();
    let mut current = Vec::new();
    for event in trace {
        current.push(event.phase);
        if event.phase == corelang::trace::Phase::Finish {
            steps.push((event.step.to_string(), std::mem::take(&mut current)));
        }
    }
    if !current.is_empty() {
        steps.push(("(unfinished)".into(), current));
    }
    steps
}

/// Whether `path` starts at the entry, follows graph edges and ends on a Terminal step.
pub fn path_error(program: &corelang::syntax::Program, path: &[&StepName]) -> Option<String> {
    let first = path.first()?;
    if **first != program.entry {
        return Some(format!("path starts at {first}, not {}", program.entry));
    }
    for pair in path.windows(2) {
        let step = program.step(pair[0].as_str())?;
        if !step.connection.targets().contains(&pair[1]) {
            return Some(format!("no edge {} -> {}", pair[0], pair[1]));
        }
    }
    let last = program.step(path.last()?.as_str())?;
    if !last.is_terminal() {
        return Some(format!("path ends at non-Terminal {}", last.name));
    }
    None
}
