//! `corelang` command-line interface.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage or input error,
//! 3 run stopped by the step budget, 4 run failed.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::backend::{load_script, Backend, RemoteBackend};
use crate::config::Settings;
use crate::engine::{finish_path, run, RunStatus};
use crate::flowgraph::{build_graph, check_program};
use crate::syntax::{
    parse_program, render_core, render_flowchart, render_pseudocode, FlowchartFormat, Program,
};
use crate::tools::render_tool_catalog;
use crate::trace::{read_jsonl, write_jsonl, TraceEvent, TraceReadError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_FAILED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "corelang", version, about = "Parse, check, render and run CoRE agent programs")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a program's syntax and control flow.
    Validate {
        file: PathBuf,
        /// Print the report as a JSON array.
        #[arg(long)]
        json: bool,
        #[arg(long, short)]
        verbose: bool,
    },
    /// Render a program as canonical CoRE, pseudo-code, DOT or Mermaid.
    Render {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = RenderFormat::Core)]
        format: RenderFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a program against an interpreter backend.
    Run(RunArgs),
    /// Print a recorded trace step by step.
    Replay {
        trace: PathBuf,
        /// Show prompts and multi-line payloads in full.
        #[arg(long)]
        full: bool,
        /// Check the trace's step path against this program's graph.
        #[arg(long)]
        program: Option<PathBuf>,
    },
    /// Tool registry commands.
    Tools {
        #[command(subcommand)]
        command: ToolsCommand,
    },
}

#[derive(Subcommand, Debug)]
enum ToolsCommand {
    /// List the tools available to runs.
    List {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RenderFormat {
    Core,
    Pseudo,
    Dot,
    Mermaid,
}

#[derive(Args, Debug)]
struct RunArgs {
    file: PathBuf,
    #[arg(long)]
    task: String,
    /// `http` or `script:<path>`.
    #[arg(long)]
    backend: String,
    /// Write the trace as JSON Lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Print the run summary as one JSON object.
    #[arg(long)]
    json: bool,
    /// Config file (overrides CORE_CONFIG and ./core.toml).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a setting, e.g. `--set run.retrieval_k=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Validate {
            file,
            json,
            verbose,
        } => cmd_validate(&file, json, verbose, out, err),
        Command::Render { file, format, out: dest } => cmd_render(&file, format, dest.as_deref(), out, err),
        Command::Run(args) => cmd_run(&args, out, err),
        Command::Replay {
            trace,
            full,
            program,
        } => cmd_replay(&trace, full, program.as_deref(), out, err),
        Command::Tools {
            command: ToolsCommand::List { config },
        } => cmd_tools_list(config.as_deref(), out, err),
    };
    result.unwrap_or_else(|e| {
        let _ = writeln!(err, "error: {e}");
        EXIT_USAGE
    })
}

type CmdResult = std::io::Result<i32>;

/// Reads and parses a program, reporting failures on `err`.
fn load_program(path: &Path, err: &mut dyn Write) -> std::io::Result<Option<Program>> {
    let source = match fs::read_to_string(path) {
        Ok(source) => source,
        Err(e) => {
            writeln!(err, "{}: {e}", path.display())?;
            return Ok(None);
        }
    };
    match parse_program(&source) {
        Ok(program) => Ok(Some(program)),
        Err(e) => {
            writeln!(err, "{}:{}: {}: {e}", path.display(), e.line(), e.code())?;
            Ok(None)
        }
    }
}

fn cmd_validate(path: &Path, json: bool, verbose: bool, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let Some(program) = load_program(path, err)? else {
        return Ok(EXIT_USAGE);
    };
    let report = check_program(&program);
    if json {
        writeln!(out, "{}", report.to_json())?;
    } else {
        out.write_all(report.to_text().as_bytes())?;
        if verbose {
            writeln!(
                out,
                "{}: {} ({} steps, entry {})",
                path.display(),
                if report.ok { "ok" } else { "invalid" },
                program.steps.len(),
                program.entry
            )?;
        }
    }
    Ok(if report.ok { EXIT_OK } else { EXIT_INVALID })
}

fn cmd_render(
    path: &Path,
    format: RenderFormat,
    dest: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let Some(program) = load_program(path, err)? else {
        return Ok(EXIT_USAGE);
    };
    let text = match format {
        RenderFormat::Core => render_core(&program),
        RenderFormat::Pseudo => render_pseudocode(&program),
        RenderFormat::Dot => render_flowchart(&program, FlowchartFormat::Dot),
        RenderFormat::Mermaid => render_flowchart(&program, FlowchartFormat::Mermaid),
    };
    match dest {
        Some(dest) => {
            if let Err(e) = fs::write(dest, text) {
                writeln!(err, "{}: {e}", dest.display())?;
                return Ok(EXIT_USAGE);
            }
        }
        None => out.write_all(text.as_bytes())?,
    }
    Ok(EXIT_OK)
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let mut settings = match Settings::load_from_process_env(args.config.as_deref()) {
        Ok(settings) => settings,
        Err(e) => {
            writeln!(err, "config error: {e}")?;
            return Ok(EXIT_USAGE);
        }
    };
    for entry in &args.overrides {
        let applied = match entry.split_once('=') {
            Some((key, value)) => settings
                .set("--set", key.trim(), value.trim())
                .map_err(|e| e.to_string()),
            None => Err(format!("--set expects KEY=VALUE, got {entry:?}")),
        };
        if let Err(e) = applied {
            writeln!(err, "config error: {e}")?;
            return Ok(EXIT_USAGE);
        }
    }
    if let Some(max_steps) = args.max_steps {
        if max_steps == 0 {
            writeln!(err, "--max-steps must be positive")?;
            return Ok(EXIT_USAGE);
        }
        settings.run.max_steps = max_steps;
    }

    let Some(program) = load_program(&args.file, err)? else {
        return Ok(EXIT_USAGE);
    };
    let report = check_program(&program);
    if !report.ok {
        err.write_all(report.to_text().as_bytes())?;
        return Ok(EXIT_INVALID);
    }

    let backend: Box<dyn Backend> = if args.backend == "http" {
        let Some(remote) = settings.remote_config() else {
            writeln!(err, "--backend http needs backend.url or CORE_BACKEND_URL")?;
            return Ok(EXIT_USAGE);
        };
        match RemoteBackend::new(remote) {
            Ok(backend) => Box::new(backend),
            Err(e) => {
                writeln!(err, "{e}")?;
                return Ok(EXIT_USAGE);
            }
        }
    } else if let Some(path) = args.backend.strip_prefix("script:") {
        match load_script(path) {
            Ok(backend) => Box::new(backend),
            Err(e) => {
                writeln!(err, "{e}")?;
                return Ok(EXIT_USAGE);
            }
        }
    } else {
        writeln!(err, "unknown backend {:?} (expected http or script:<path>)", args.backend)?;
        return Ok(EXIT_USAGE);
    };
    let registry = match settings.registry() {
        Ok(registry) => registry,
        Err(e) => {
            writeln!(err, "config error: {e}")?;
            return Ok(EXIT_USAGE);
        }
    };

    let result = run(&program, &args.task, &settings.run, backend.as_ref(), &registry);

    if let Some(path) = &args.trace {
        let written = fs::File::create(path).and_then(|f| write_jsonl(&result.trace, std::io::BufWriter::new(f)));
        if let Err(e) = written {
            writeln!(err, "cannot write trace {}: {e}", path.display())?;
            return Ok(EXIT_USAGE);
        }
    }

    if args.json {
        writeln!(out, "{}", result.summary_json())?;
    } else {
        match result.status {
            RunStatus::Completed => {
                writeln!(out, "{}", result.final_answer.as_deref().unwrap_or_default())?
            }
            RunStatus::BudgetExhausted => writeln!(
                out,
                "budget_exhausted: no Terminal step reached after {} steps",
                result.steps_executed
            )?,
            RunStatus::Failed => {
                let failure = result.error.as_ref().expect("failed runs carry an error");
                writeln!(out, "failed: {}: {}", failure.code, failure.message)?
            }
        }
    }
    Ok(match result.status {
        RunStatus::Completed => EXIT_OK,
        RunStatus::BudgetExhausted => EXIT_BUDGET,
        RunStatus::Failed => EXIT_FAILED,
    })
}

fn fold(payload: &str, full: bool) -> String {
    let lines: Vec<&str> = payload.lines().collect();
    if full || lines.len() <= 1 {
        return lines.join("\n                ");
    }
    format!("{} … ({} lines, --full to expand)", lines[0], lines.len())
}

fn cmd_replay(
    path: &Path,
    full: bool,
    program_path: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let file = match fs::File::open(path) {
        Ok(file) => file,
        Err(e) => {
            writeln!(err, "{}: {e}", path.display())?;
            return Ok(EXIT_USAGE);
        }
    };
    let events = match read_jsonl(BufReader::new(file)) {
        Ok(events) => events,
        Err(TraceReadError::Malformed { line, source }) => {
            writeln!(err, "{}: malformed trace at line {line}: {source}", path.display())?;
            return Ok(EXIT_USAGE);
        }
        Err(e) => {
            writeln!(err, "{}: {e}", path.display())?;
            return Ok(EXIT_USAGE);
        }
    };

    let mut number = 0;
    let mut previous: Option<&TraceEvent> = None;
    for event in &events {
        if previous.is_none_or(|p| p.step != event.step || p.phase == crate::trace::Phase::Finish) {
            number += 1;
            writeln!(out, "#{number} {}", event.step)?;
        }
        writeln!(out, "  {:<13} {}", event.phase.to_string(), fold(&event.payload, full))?;
        previous = Some(event);
    }

    if let Some(pair) = events.windows(2).find(|w| w[1].seq <= w[0].seq) {
        writeln!(err, "sequence numbers not increasing: {} then {}", pair[0].seq, pair[1].seq)?;
        return Ok(EXIT_INVALID);
    }

    if let Some(program_path) = program_path {
        let Some(program) = load_program(program_path, err)? else {
            return Ok(EXIT_USAGE);
        };
        let graph = match build_graph(&program) {
            Ok(graph) => graph,
            Err(e) => {
                writeln!(err, "{e}")?;
                return Ok(EXIT_INVALID);
            }
        };
        let path = finish_path(&events);
        if let Some(first) = path.first() {
            if **first != graph.entry {
                writeln!(err, "trace starts at {first}, but the entry step is {}", graph.entry)?;
                return Ok(EXIT_INVALID);
            }
        }
        if let Some(pair) = path.windows(2).find(|w| !graph.has_edge(w[0].as_str(), w[1].as_str())) {
            writeln!(err, "invalid transition {} -> {}", pair[0], pair[1])?;
            return Ok(EXIT_INVALID);
        }
    }
    Ok(EXIT_OK)
}

fn cmd_tools_list(config: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let registry = match Settings::load_from_process_env(config).and_then(|s| s.registry()) {
        Ok(registry) => registry,
        Err(e) => {
            writeln!(err, "config error: {e}")?;
            return Ok(EXIT_USAGE);
        }
    };
    out.write_all(render_tool_catalog(&registry).as_bytes())?;
    Ok(EXIT_OK)
}
