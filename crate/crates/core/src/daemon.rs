//! The reactive layer. ECA rules are `eca(T, E, C, A, P, EL)` facts in the
//! knowledge base; a daemon re-reads them every cycle and proves each as the
//! ordered goal `T, E, ((C, A, P) ; EL)`. Updates and messages produced by
//! the winning branch are applied as one transaction afterwards.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use thiserror::Error;

use crate::events::record_occurrence;
use crate::kb::{KnowledgeState, ModuleId, UpdateRecord};
use crate::parser::{flatten_conjunction, format_term};
use crate::solver::{Intent, IntervalTimers, Registry, SimulatedClock, SolveError, Solver, SolverOptions};
use crate::term::{Substitution, Term, TimePoint};
use crate::updates::{run_transaction, TxOutcome, UpdateTransaction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Time,
    Event,
    Condition,
    Action,
    Post,
    Else,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Time,
        Stage::Event,
        Stage::Condition,
        Stage::Action,
        Stage::Post,
        Stage::Else,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Time => "time",
            Stage::Event => "event",
            Stage::Condition => "condition",
            Stage::Action => "action",
            Stage::Post => "post",
            Stage::Else => "else",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Fired,
    ElseFired,
    TimeNotDue,
    EventAbsent,
    Failed { stage: Stage, diagnostic: String },
    /// The action part is blank; the rule never runs.
    Inert,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Fired => f.write_str("fired"),
            Outcome::ElseFired => f.write_str("else_fired"),
            Outcome::TimeNotDue => f.write_str("time_not_due"),
            Outcome::EventAbsent => f.write_str("event_absent"),
            Outcome::Failed { stage, diagnostic } => write!(f, "failed({stage}): {diagnostic}"),
            Outcome::Inert => f.write_str("inert"),
        }
    }
}

/// A rule's identity: its module and its position among that module's rules.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId {
    pub module: ModuleId,
    pub ordinal: usize,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.module, self.ordinal)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EcaRule {
    pub id: RuleId,
    pub time: Term,
    pub event: Term,
    pub condition: Term,
    pub action: Term,
    pub post: Term,
    pub else_action: Term,
}

impl EcaRule {
    /// Reads a normalized `eca/6` term.
    pub fn from_term(id: RuleId, t: &Term) -> Option<EcaRule> {
        match (t.name(), t.args()) {
            (Some("eca"), [time, event, condition, action, post, else_action]) => Some(EcaRule {
                id,
                time: time.clone(),
                event: event.clone(),
                condition: condition.clone(),
                action: action.clone(),
                post: post.clone(),
                else_action: else_action.clone(),
            }),
            _ => None,
        }
    }

    pub fn part(&self, stage: Stage) -> &Term {
        match stage {
            Stage::Time => &self.time,
            Stage::Event => &self.event,
            Stage::Condition => &self.condition,
            Stage::Action => &self.action,
            Stage::Post => &self.post,
            Stage::Else => &self.else_action,
        }
    }

    pub fn is_inert(&self) -> bool {
        self.action.is_blank()
    }

    fn next_var(&self) -> u64 {
        Stage::ALL
            .iter()
            .filter_map(|s| self.part(*s).max_var_id())
            .max()
            .map_or(0, |m| m + 1)
    }
}

/// Every `eca/6` fact, in knowledge-base order.
pub fn collect_eca_rules(state: &KnowledgeState) -> Vec<EcaRule> {
    let mut ordinals: HashMap<ModuleId, usize> = HashMap::new();
    state
        .clauses_for("eca", 6, None)
        .iter()
        .filter(|c| c.clause.is_fact())
        .filter_map(|c| {
            let n = ordinals.entry(c.module.clone()).or_insert(0);
            let id = RuleId {
                module: c.module.clone(),
                ordinal: *n,
            };
            *n += 1;
            EcaRule::from_term(id, &c.clause.head)
        })
        .collect()
}

/// The result of proving one rule, before its intents are committed.
#[derive(Clone, Debug)]
pub struct Execution {
    pub outcome: Outcome,
    /// Intents of the winning branch; empty unless fired or else-fired.
    pub intents: Vec<Intent>,
    /// Parts handed to the solver, in call order. Blank parts are not called.
    pub calls: Vec<Stage>,
}

enum Flow {
    Found { intents: Vec<Intent>, via_else: bool },
    Fail,
    /// A cut in this part was executed and the continuation failed.
    Cut(Stage),
}

type Halt = (Stage, SolveError);
type Cont<'c> = &'c mut dyn FnMut(&mut Run, Substitution, u64, Vec<Intent>) -> Result<Flow, Halt>;

struct Run<'r> {
    rule: &'r EcaRule,
    snapshot: Solver,
    current: Solver,
    calls: Vec<Stage>,
    answered: [bool; 6],
}

impl Run<'_> {
    fn part(&mut self, stage: Stage, subst: Substitution, next_var: u64, intents: Vec<Intent>, k: Cont<'_>) -> Result<Flow, Halt> {
        let term = self.rule.part(stage).clone();
        if term.is_blank() {
            self.answered[stage as usize] = true;
            return k(self, subst, next_var, intents);
        }
        self.calls.push(stage);
        let solver = match stage {
            Stage::Time | Stage::Event => &self.snapshot,
            _ => &self.current,
        };
        let mut sols = solver.solve_from(flatten_conjunction(term), subst, next_var);
        while let Some(answer) = sols.next() {
            let s = answer.map_err(|e| (stage, e))?;
            self.answered[stage as usize] = true;
            let mut all = intents.clone();
            all.extend(s.intents);
            match k(self, s.subst, s.next_var, all)? {
                Flow::Fail if sols.cut_executed() => return Ok(Flow::Cut(stage)),
                Flow::Fail => {}
                other => return Ok(other),
            }
        }
        Ok(if sols.cut_executed() { Flow::Cut(stage) } else { Flow::Fail })
    }

    fn branch(&mut self, subst: Substitution, next_var: u64, intents: Vec<Intent>) -> Result<Flow, Halt> {
        let main = self.part(Stage::Condition, subst.clone(), next_var, intents.clone(), &mut |run, s, nv, i| {
            run.part(Stage::Action, s, nv, i, &mut |run, s, nv, i| {
                run.part(Stage::Post, s, nv, i, &mut |_, _, _, intents| {
                    Ok(Flow::Found {
                        intents,
                        via_else: false,
                    })
                })
            })
        })?;
        if !matches!(main, Flow::Fail) || self.rule.else_action.is_blank() {
            return Ok(main);
        }
        let alt = self.part(Stage::Else, subst, next_var, intents, &mut |_, _, _, intents| {
            Ok(Flow::Found {
                intents,
                via_else: true,
            })
        })?;
        Ok(match alt {
            Flow::Cut(_) => Flow::Fail,
            other => other,
        })
    }
}

/// Proves a rule. Time and event parts read `snapshot`, the other parts
/// read `current`. No state is changed.
pub fn execute_eca(rule: &EcaRule, snapshot: &Solver, current: &Solver) -> Execution {
    if rule.is_inert() {
        return Execution {
            outcome: Outcome::Inert,
            intents: Vec::new(),
            calls: Vec::new(),
        };
    }
    let owner = rule.id.to_string();
    let mut run = Run {
        rule,
        snapshot: snapshot.clone().with_owner(&owner),
        current: current.clone().with_owner(&owner),
        calls: Vec::new(),
        answered: [false; 6],
    };
    let flow = run.part(Stage::Time, Substitution::new(), rule.next_var(), Vec::new(), &mut |run, s, nv, i| {
        run.part(Stage::Event, s, nv, i, &mut |run, s, nv, i| run.branch(s, nv, i))
    });
    let (outcome, intents) = match flow {
        Ok(Flow::Found { intents, via_else }) => (if via_else { Outcome::ElseFired } else { Outcome::Fired }, intents),
        Err((stage, e)) => (
            Outcome::Failed {
                stage,
                diagnostic: e.to_string(),
            },
            Vec::new(),
        ),
        Ok(flow) => {
            let outcome = if !run.answered[Stage::Time as usize] {
                Outcome::TimeNotDue
            } else if !run.answered[Stage::Event as usize] {
                Outcome::EventAbsent
            } else {
                let (stage, diagnostic) = match flow {
                    Flow::Cut(stage) => (stage, format!("cut in {stage} part pruned the remaining alternatives")),
                    _ => {
                        let stage = run.calls.iter().copied().max().unwrap_or(Stage::Action);
                        (stage, format!("{stage} part has no answer"))
                    }
                };
                Outcome::Failed { stage, diagnostic }
            };
            (outcome, Vec::new())
        }
    };
    Execution {
        outcome,
        intents,
        calls: run.calls,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRecord {
    pub pre_state_index: u64,
    pub post_state_index: u64,
    pub rule: RuleId,
    pub stage: Stage,
    pub updates: Vec<UpdateRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub cycle: u64,
    pub rule: RuleId,
    /// `None` for the line carrying the outcome.
    pub stage: Option<Stage>,
    pub note: String,
}

impl fmt::Display for TraceEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let stage = self.stage.map_or("-", Stage::name);
        write!(f, "{}\t{}\t{}\t{}", self.cycle, self.rule, stage, self.note)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CycleReport {
    pub cycle: u64,
    /// One outcome per polled rule, in rule order.
    pub outcomes: Vec<(RuleId, Outcome)>,
    /// Committed firings, in commit order.
    pub transitions: Vec<TransitionRecord>,
    /// `sendMessage(Recipient, Message)` payloads of committed firings.
    pub messages: Vec<(Term, Term)>,
    pub trace: Vec<TraceEntry>,
}

impl CycleReport {
    pub fn outcome(&self, rule: &RuleId) -> Option<&Outcome> {
        self.outcomes.iter().find(|(id, _)| id == rule).map(|(_, o)| o)
    }

    pub fn count(&self, pred: impl Fn(&Outcome) -> bool) -> usize {
        self.outcomes.iter().filter(|(_, o)| pred(o)).count()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Rules run one after another; each sees its predecessors' commits.
    #[default]
    Deterministic,
    /// Rules run concurrently on the cycle snapshot; commits are serialized
    /// in completion order.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DaemonError {
    #[error("tick must be at least 1 ms")]
    ZeroTick,
    #[error("a simulated clock requires deterministic mode")]
    SimulatedParallel,
}

/// Owns the knowledge state and runs cycles over it.
pub struct Daemon {
    state: KnowledgeState,
    base: Solver,
    simulated: Option<Arc<SimulatedClock>>,
    mode: Mode,
    cycle: u64,
    started: bool,
}

impl Daemon {
    pub fn new(state: KnowledgeState) -> Daemon {
        Daemon {
            base: Solver::new(KnowledgeState::empty()),
            state,
            simulated: None,
            mode: Mode::Deterministic,
            cycle: 0,
            started: false,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Daemon {
        self.mode = mode;
        self
    }

    pub fn with_registry(mut self, registry: Arc<Registry>) -> Daemon {
        self.base = self.base.with_registry(registry);
        self
    }

    pub fn with_options(mut self, opts: SolverOptions) -> Daemon {
        self.base = self.base.with_options(opts);
        self
    }

    pub fn with_simulated_clock(mut self, clock: Arc<SimulatedClock>) -> Daemon {
        let opts = SolverOptions {
            clock: clock.clone(),
            ..self.base.options().clone()
        };
        self.base = self.base.with_options(opts);
        self.simulated = Some(clock);
        self
    }

    pub fn state(&self) -> &KnowledgeState {
        &self.state
    }

    pub fn into_state(self) -> KnowledgeState {
        self.state
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn now(&self) -> TimePoint {
        self.base.options().clock.now()
    }

    pub fn timers(&self) -> &Arc<IntervalTimers> {
        self.base.timers()
    }

    /// Records an event occurrence at `time`.
    pub fn inject(&mut self, event: &Term, time: &Term) {
        self.state = record_occurrence(&self.state, event, time);
    }

    fn solver(&self, state: &KnowledgeState) -> Solver {
        self.base.clone().with_state(state.clone())
    }

    /// A solver over the current state sharing the daemon's clock and timers.
    pub fn current_solver(&self) -> Solver {
        self.solver(&self.state)
    }

    fn start(&mut self) {
        if !self.started {
            self.base.timers().set_epoch(self.now());
            self.started = true;
        }
    }

    /// Polls the rules and executes each once.
    pub fn run_cycle(&mut self) -> CycleReport {
        self.start();
        self.cycle += 1;
        let entry = self.state.clone();
        let rules = collect_eca_rules(&entry);
        let snapshot = self.solver(&entry);
        let mut report = CycleReport {
            cycle: self.cycle,
            ..CycleReport::default()
        };
        let mut outcomes: Vec<Option<Outcome>> = vec![None; rules.len()];
        let mut calls: Vec<Vec<Stage>> = vec![Vec::new(); rules.len()];
        match self.mode {
            Mode::Deterministic => {
                for (i, rule) in rules.iter().enumerate() {
                    let exec = execute_eca(rule, &snapshot, &self.solver(&self.state));
                    calls[i] = exec.calls.clone();
                    outcomes[i] = Some(self.commit(rule, exec, &mut report));
                }
            }
            Mode::Parallel => {
                for (i, exec) in execute_parallel(&rules, &snapshot) {
                    calls[i] = exec.calls.clone();
                    outcomes[i] = Some(self.commit(&rules[i], exec, &mut report));
                }
            }
        }
        for ((rule, outcome), calls) in rules.iter().zip(outcomes).zip(calls) {
            let outcome = outcome.expect("every rule has an outcome");
            for stage in calls {
                report.trace.push(TraceEntry {
                    cycle: self.cycle,
                    rule: rule.id.clone(),
                    stage: Some(stage),
                    note: "call".into(),
                });
            }
            report.trace.push(TraceEntry {
                cycle: self.cycle,
                rule: rule.id.clone(),
                stage: None,
                note: outcome.to_string(),
            });
            report.outcomes.push((rule.id.clone(), outcome));
        }
        report
    }

    /// Applies a firing's intents as one transaction.
    fn commit(&mut self, rule: &EcaRule, exec: Execution, report: &mut CycleReport) -> Outcome {
        let stage = match exec.outcome {
            Outcome::Fired => Stage::Action,
            Outcome::ElseFired => Stage::Else,
            other => return other,
        };
        let tx = UpdateTransaction::new(Intent::ops(&exec.intents));
        match run_transaction(&self.solver(&self.state), &tx) {
            TxOutcome::Committed { state, applied } => {
                if !applied.is_empty() {
                    report.transitions.push(TransitionRecord {
                        pre_state_index: self.state.state_index(),
                        post_state_index: state.state_index(),
                        rule: rule.id.clone(),
                        stage,
                        updates: applied,
                    });
                }
                self.state = state;
                report.messages.extend(Intent::messages(&exec.intents));
                exec.outcome
            }
            TxOutcome::RolledBack { violations, diagnostic } => {
                let mut parts: Vec<String> = violations.iter().map(ToString::to_string).collect();
                parts.extend(diagnostic);
                Outcome::Failed {
                    stage: Stage::Post,
                    diagnostic: format!("transaction rolled back: {}", parts.join("; ")),
                }
            }
        }
    }

    /// Runs cycles every `tick` until `max_cycles` cycles have run or `stop`
    /// is raised. Injections `(time, event)` are recorded before the first
    /// cycle at or after their time. A simulated clock is advanced by one
    /// tick per cycle; otherwise the daemon sleeps.
    pub fn run(
        &mut self,
        tick: Duration,
        max_cycles: Option<u64>,
        stop: Option<&AtomicBool>,
        injections: &[(TimePoint, Term)],
        on_report: &mut dyn FnMut(&CycleReport),
    ) -> Result<(), DaemonError> {
        let tick_ms = i64::try_from(tick.as_millis()).unwrap_or(i64::MAX);
        if tick_ms < 1 {
            return Err(DaemonError::ZeroTick);
        }
        if self.simulated.is_some() && self.mode == Mode::Parallel {
            return Err(DaemonError::SimulatedParallel);
        }
        self.start();
        let mut pending: Vec<(TimePoint, Term)> = injections.to_vec();
        pending.sort_by_key(|(t, _)| *t);
        let mut pending = pending.into_iter().peekable();
        let mut ran = 0u64;
        while max_cycles.is_none_or(|m| ran < m) {
            if stop.is_some_and(|s| s.load(Ordering::SeqCst)) {
                break;
            }
            let now = self.now();
            while let Some((at, event)) = pending.next_if(|(at, _)| *at <= now) {
                self.inject(&event, &Term::Time(at));
            }
            let report = self.run_cycle();
            on_report(&report);
            ran += 1;
            if max_cycles.is_some_and(|m| ran >= m) {
                break;
            }
            match &self.simulated {
                Some(clock) => clock.advance_millis(tick_ms),
                None => std::thread::sleep(tick),
            }
        }
        Ok(())
    }
}

/// Executes rules on worker threads; results arrive in completion order.
fn execute_parallel(rules: &[EcaRule], snapshot: &Solver) -> Vec<(usize, Execution)> {
    let workers = std::thread::available_parallelism()
        .map_or(4, |n| n.get())
        .min(rules.len())
        .max(1);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(rule) = rules.get(i) else { break };
                if tx.send((i, execute_eca(rule, snapshot, snapshot))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        rx.iter().collect()
    })
}

/// One line per committed message, `NOTIFY <recipient> <message>`.
pub fn format_message(recipient: &Term, message: &Term) -> String {
    format!("NOTIFY {} {}", format_term(recipient), format_term(message))
}
