//! The `ecalp` command: run scripts under the daemon, query them, check
//! them, and translate ECA-RuleML documents.
//!
//! Exit codes: 0 on a clean run, 1 on parse or configuration errors, 2 on
//! runtime failures.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use ecalp::daemon::{format_message, CycleReport, Daemon, Mode};
use ecalp::kb::{KnowledgeState, ModuleId};
use ecalp::parser::{format_term, parse_program, parse_query, ParsedProgram, Query};
use ecalp::solver::{SimulatedClock, Solver};
use ecalp::term::Term;
use ecalp::updates::test_integrity;
use ecalp_ruleml::{parse_eca_ruleml, translate_to_ecalp};

pub use config::{CliConfig, ClockSpec, ConfigError, Injection, TraceLevel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "ecalp", version, about = "Event-condition-action logic programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load scripts and poll their ECA rules.
    Run(RunArgs),
    /// Answer a goal against the loaded scripts.
    Query(QueryArgs),
    /// Translate an ECA-RuleML document into a script.
    Translate {
        input: String,
        /// Output file; standard output when absent.
        #[arg(short, long)]
        output: Option<String>,
    },
    /// Parse scripts and test their integrity constraints.
    Check {
        #[arg(required = true)]
        scripts: Vec<String>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(required = true)]
    scripts: Vec<String>,
    #[arg(long, conflicts_with = "parallel")]
    deterministic: bool,
    /// Run rules of a cycle on worker threads.
    #[arg(long)]
    parallel: bool,
    #[arg(long, default_value_t = 1000)]
    tick_ms: u64,
    #[arg(long)]
    max_cycles: Option<u64>,
    /// `real` or `sim:START:STEP_MS`.
    #[arg(long, default_value = "real")]
    clock: ClockSpec,
    /// `term@seconds`, relative to the clock start.
    #[arg(long)]
    inject: Vec<Injection>,
    /// off, rules or solver; ECALP_TRACE takes precedence.
    #[arg(long, default_value = "off")]
    trace: TraceLevel,
    /// Goal answered against the final state.
    #[arg(long)]
    query: Option<String>,
}

#[derive(Args, Debug)]
struct QueryArgs {
    /// Scripts followed by the goal. Without a goal the scripts' own
    /// `Goal?` queries are answered.
    #[arg(required = true)]
    args: Vec<String>,
    /// `term@seconds` events recorded before answering.
    #[arg(long)]
    inject: Vec<Injection>,
    /// Start time for injections; plain integer times when absent.
    #[arg(long)]
    clock: Option<ClockSpec>,
}

/// An exit code with its diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message: message.into(),
    }
}

fn runtime_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_RUNTIME,
        message: message.into(),
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(args) => run_config(args, out),
        Command::Query(args) => query(args, out),
        Command::Translate { input, output } => translate(&input, output.as_deref(), out, err),
        Command::Check { scripts } => check(&scripts, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn env_trace() -> Result<Option<TraceLevel>, Failure> {
    match std::env::var("ECALP_TRACE") {
        Ok(v) if !v.is_empty() => v.parse().map(Some).map_err(|e| config_error(format!("ECALP_TRACE: {e}"))),
        _ => Ok(None),
    }
}

fn run_config(args: RunArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let config = CliConfig {
        scripts: args.scripts,
        mode: if args.parallel { Mode::Parallel } else { Mode::Deterministic },
        tick_ms: args.tick_ms,
        max_cycles: args.max_cycles,
        clock: args.clock,
        trace_level: env_trace()?.unwrap_or(args.trace),
        inject: args.inject,
        query: args.query,
    };
    run(&config, out)
}

/// Reads and parses every script before loading any of them.
pub fn load_scripts(scripts: &[String]) -> Result<KnowledgeState, String> {
    let mut parsed: Vec<(String, ParsedProgram)> = Vec::new();
    for path in scripts {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
        let program = parse_program(&text).map_err(|e| format!("{path}:{e}"))?;
        parsed.push((path.clone(), program));
    }
    Ok(parsed
        .into_iter()
        .fold(KnowledgeState::empty(), |state, (path, program)| state.load_program(ModuleId::new(&path), &program)))
}

/// Runs the daemon per `config`, streaming trace and notification lines.
pub fn run(config: &CliConfig, out: &mut dyn Write) -> Result<(), Failure> {
    config.validate().map_err(|e| config_error(e.0))?;
    let query = config
        .query
        .as_deref()
        .map(|q| parse_query(q).map_err(|e| config_error(format!("query: {e}"))))
        .transpose()?;
    let state = load_scripts(&config.scripts).map_err(config_error)?;
    let mut daemon = Daemon::new(state).with_mode(config.mode);
    if let ClockSpec::Simulated { start, .. } = config.clock {
        daemon = daemon.with_simulated_clock(Arc::new(SimulatedClock::new(start)));
    }
    let origin = daemon.now();
    let injections: Vec<_> = config
        .inject
        .iter()
        .map(|i| (origin.plus_seconds(i.seconds), i.event.clone()))
        .collect();
    let mut io_error = None;
    let level = config.trace_level;
    daemon
        .run(
            Duration::from_millis(config.period_ms()),
            config.max_cycles,
            None,
            &injections,
            &mut |report| {
                if io_error.is_none() {
                    io_error = write_report(out, report, level).err();
                }
            },
        )
        .map_err(|e| runtime_error(e.to_string()))?;
    if let Some(e) = io_error {
        return Err(runtime_error(e.to_string()));
    }
    if let Some(q) = query {
        answer(&daemon.current_solver(), &q, out)?;
    }
    Ok(())
}

/// Lines for one cycle: trace entries, committed updates, then messages.
pub fn write_report(out: &mut dyn Write, report: &CycleReport, level: TraceLevel) -> std::io::Result<()> {
    if level >= TraceLevel::Rules {
        for entry in &report.trace {
            writeln!(out, "{entry}")?;
        }
    }
    if level >= TraceLevel::Solver {
        for t in &report.transitions {
            for u in &t.updates {
                writeln!(
                    out,
                    "{}\t{}\t{}\tcommit {}->{} {u}",
                    report.cycle,
                    t.rule,
                    t.stage.name(),
                    t.pre_state_index,
                    t.post_state_index
                )?;
            }
        }
    }
    for (to, m) in &report.messages {
        writeln!(out, "{}", format_message(to, m))?;
    }
    Ok(())
}

/// Prints each answer's bindings, `yes` for a ground success, `no` when
/// there is no answer.
fn answer(solver: &Solver, q: &Query, out: &mut dyn Write) -> Result<(), Failure> {
    let io = |e: std::io::Error| runtime_error(e.to_string());
    let named: Vec<_> = q.variables.iter().filter(|v| !v.name.starts_with('_')).collect();
    let mut any = false;
    for sol in solver.solve_query(q) {
        let sol = sol.map_err(|e| runtime_error(e.to_string()))?;
        any = true;
        if named.is_empty() {
            writeln!(out, "yes").map_err(io)?;
            break;
        }
        let parts: Vec<String> = named
            .iter()
            .map(|v| format!("{} = {}", v.name, format_term(&sol.value(v))))
            .collect();
        writeln!(out, "{}", parts.join(", ")).map_err(io)?;
    }
    if !any {
        writeln!(out, "no").map_err(io)?;
    }
    Ok(())
}

fn query(args: QueryArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let mut items = args.args;
    let goal = match items.last() {
        Some(last) if !std::path::Path::new(last).exists() => items.pop(),
        _ => None,
    };
    if items.is_empty() {
        return Err(config_error("no script given"));
    }
    let mut queries = Vec::new();
    if let Some(goal) = &goal {
        queries.push(parse_query(goal).map_err(|e| config_error(format!("query: {e}")))?);
    }
    let mut state = load_scripts(&items).map_err(config_error)?;
    if goal.is_none() {
        for path in &items {
            let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{path}: {e}")))?;
            queries.extend(parse_program(&text).map_err(|e| config_error(format!("{path}:{e}")))?.queries);
        }
    }
    for i in &args.inject {
        let time = match args.clock {
            Some(ClockSpec::Simulated { start, .. }) => Term::Time(start.plus_seconds(i.seconds)),
            _ => Term::int(i.seconds),
        };
        state = ecalp::events::record_occurrence(&state, &i.event, &time);
    }
    let solver = Solver::new(state);
    for q in &queries {
        answer(&solver, q, out)?;
    }
    Ok(())
}

fn translate(input: &str, output: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    let xml = std::fs::read_to_string(input).map_err(|e| config_error(format!("{input}: {e}")))?;
    let node = parse_eca_ruleml(&xml).map_err(|e| config_error(format!("{input}: {e}")))?;
    let result = translate_to_ecalp(&node).map_err(|e| config_error(format!("{input}: {e}")))?;
    for w in &result.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    match output {
        Some(path) => std::fs::write(path, &result.program).map_err(|e| runtime_error(format!("{path}: {e}"))),
        None => out.write_all(result.program.as_bytes()).map_err(|e| runtime_error(e.to_string())),
    }
}

fn check(scripts: &[String], out: &mut dyn Write) -> Result<(), Failure> {
    let state = load_scripts(scripts).map_err(config_error)?;
    let violations = test_integrity(&Solver::new(state)).map_err(|e| runtime_error(e.to_string()))?;
    let io = |e: std::io::Error| runtime_error(e.to_string());
    if violations.is_empty() {
        writeln!(out, "ok").map_err(io)?;
        return Ok(());
    }
    for v in &violations {
        writeln!(out, "{v}").map_err(io)?;
    }
    Err(runtime_error(format!("{} integrity violation(s)", violations.len())))
}
