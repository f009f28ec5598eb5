//! Interval-based event calculus and complex event detection.
//!
//! Occurrences are `occurs(Event, Time)` facts kept in event instance
//! sequence modules `eis(Type)`. An atomic event at `T` spans `[T,T]`; a
//! detected complex event is stored with its whole interval `[T1,T2]`.
//! Times are time points or plain integers.

mod algebra;
pub mod oracle;

use std::collections::HashSet;

use crate::kb::{KnowledgeState, ModuleId};
use crate::parser::format_term;
use crate::solver::{Answer, ConsumePolicy, Ctx, Intent, Payload, Registry, SolveError, Solver, TxOp};
use crate::term::{unify, unify_with, Clause, Substitution, Term, TimePoint};
use crate::updates::resolve_op;

pub use algebra::{EventError, EventExpr, Match, Matcher, Window};

/// A point on the time line: integer ticks or a calendar time point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Instant {
    Int(i64),
    Time(TimePoint),
}

impl Instant {
    pub fn from_term(t: &Term) -> Option<Instant> {
        match t {
            Term::Int(i) => i64::try_from(i).ok().map(Instant::Int),
            Term::Time(tp) => Some(Instant::Time(*tp)),
            _ => None,
        }
    }

    pub fn to_term(self) -> Term {
        match self {
            Instant::Int(i) => Term::int(i),
            Instant::Time(t) => Term::Time(t),
        }
    }

    pub fn plus_seconds(self, secs: i64) -> Instant {
        match self {
            Instant::Int(i) => Instant::Int(i.saturating_add(secs)),
            Instant::Time(t) => Instant::Time(t.plus_seconds(secs)),
        }
    }
}

/// Endpoints of an occurrence time: `T` stands for `[T,T]`.
pub fn occurrence_interval(t: &Term) -> Option<(Term, Term)> {
    match t.as_proper_list().as_deref() {
        Some([s, e]) => Some((s.clone(), e.clone())),
        Some(_) => None,
        None => Some((t.clone(), t.clone())),
    }
}

fn instant_interval(t: &Term) -> Option<(Instant, Instant)> {
    let (s, e) = occurrence_interval(t)?;
    let (s, e) = (Instant::from_term(&s)?, Instant::from_term(&e)?);
    (s <= e).then_some((s, e))
}

fn interval_term(start: Instant, end: Instant) -> Term {
    Term::proper_list(vec![start.to_term(), end.to_term()])
}

#[derive(Clone, Debug, PartialEq)]
pub struct Occurrence {
    pub event: Term,
    pub start: Instant,
    pub end: Instant,
    /// Arrival order; breaks ties between equal times.
    pub seq: u64,
    pub module: ModuleId,
}

/// Every `occurs/2` fact with a well-formed time, ordered by time then arrival.
pub fn occurrences(state: &KnowledgeState) -> Vec<Occurrence> {
    let mut out: Vec<Occurrence> = state
        .clauses_for("occurs", 2, None)
        .iter()
        .filter(|c| c.clause.is_fact())
        .filter_map(|c| {
            let args = c.clause.head.args();
            let (start, end) = instant_interval(&args[1])?;
            Some(Occurrence {
                event: args[0].clone(),
                start,
                end,
                seq: c.stamp,
                module: c.module.clone(),
            })
        })
        .collect();
    out.sort_by_key(|o| (o.start, o.end, o.seq));
    out
}

/// Adds `occurs(event, time)` to the event's instance sequence.
pub fn record_occurrence(state: &KnowledgeState, event: &Term, time: &Term) -> KnowledgeState {
    state.add_module(
        ModuleId::eis_for(event),
        vec![Clause::fact(Term::compound("occurs", vec![event.clone(), time.clone()]))],
    )
}

/// Applies a consumption policy to an instance sequence.
pub fn consume(state: &KnowledgeState, key: &ModuleId, policy: ConsumePolicy) -> KnowledgeState {
    let op = TxOp::Consume {
        key: key.clone(),
        policy,
        pattern: None,
    };
    resolve_op(state, &op)
        .unwrap_or_default()
        .iter()
        .fold(state.clone(), |s, r| s.apply(r))
}

fn next_var_after(terms: &[&Term]) -> u64 {
    terms.iter().filter_map(|t| t.max_var_id()).max().map_or(0, |m| m + 1)
}

/// Whether a terminator declared for `pair` by `terminates(X, Pair, [T1,T2])`
/// occurs strictly between `t1` and `t2`. With a context list, only
/// terminators unifying with one of its members count.
pub fn broken(
    solver: &Solver,
    t1: Instant,
    pair: &[Term; 2],
    t2: Instant,
    context: Option<&[Term]>,
    occurrences: &[Occurrence],
) -> Result<bool, SolveError> {
    if !solver.state().has_clauses("terminates", 3) {
        return Ok(false);
    }
    let terminator = Term::var("Terminator", next_var_after(&[&pair[0], &pair[1]]));
    let goal = Term::compound(
        "terminates",
        vec![
            terminator.clone(),
            Term::proper_list(pair.to_vec()),
            interval_term(t1, t2),
        ],
    );
    for answer in solver.solve(&[goal]) {
        let x = answer?.subst.apply(&terminator);
        if let Some(ctx) = context {
            if !ctx.iter().any(|c| unify(c, &x, &Substitution::new()).is_some()) {
                continue;
            }
        }
        let offset = next_var_after(&[&x]);
        let inside = occurrences.iter().any(|o| {
            t1 < o.start && o.end < t2 && unify(&x, &o.event.offset_vars(offset), &Substitution::new()).is_some()
        });
        if inside {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Answers of `holdsInterval([E1,E2], [T11,T22])`: an occurrence of `e1`
/// ending no later than an occurrence of `e2` starts, with no terminator in
/// between. Each answer carries the bindings of the two patterns.
pub fn holds_interval_answers(
    solver: &Solver,
    e1: &Term,
    e2: &Term,
    context: Option<&[Term]>,
    subst: &Substitution,
    next_var: u64,
) -> Result<Vec<(Substitution, Instant, Instant)>, SolveError> {
    let occs = occurrences(solver.state());
    let matcher = Matcher::new(solver, &occs, next_var);
    let leaf = |p: &Term, s: &Substitution| {
        matcher
            .matches(&EventExpr::Leaf(p.clone()), s)
            .map_err(|e| SolveError::Type(e.to_string()))
    };
    let mut out = Vec::new();
    let mut firsts = leaf(e1, subst)?;
    firsts.sort_by_key(|m| (m.start, m.end, m.used.clone()));
    for m1 in firsts {
        let mut seconds = leaf(e2, &m1.subst)?;
        seconds.sort_by_key(|m| (m.start, m.end, m.used.clone()));
        for m2 in seconds {
            if m1.end > m2.start {
                continue;
            }
            let pair = [m2.subst.apply(e1), m2.subst.apply(e2)];
            if !broken(solver, m1.end, &pair, m2.start, context, &occs)? {
                out.push((m2.subst.clone(), m1.start, m2.end));
            }
        }
    }
    Ok(out)
}

/// Intervals of `holdsInterval([e1,e2], I)` for ground or pattern events.
pub fn holds_interval(solver: &Solver, e1: &Term, e2: &Term) -> Result<Vec<(Instant, Instant)>, SolveError> {
    let next_var = next_var_after(&[e1, e2]);
    Ok(holds_interval_answers(solver, e1, e2, None, &Substitution::new(), next_var)?
        .into_iter()
        .map(|(_, s, e)| (s, e))
        .collect())
}

/// A complex event type with its defining expression and per-leaf
/// consumption, read from `detection(Name, Expr)` or
/// `detection(Name, Expr, [consume(Leaf, Policy), ...])` facts.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionRule {
    pub name: Term,
    pub expr: EventExpr,
    pub consumption: Vec<(Term, ConsumePolicy)>,
}

impl DetectionRule {
    pub fn new(name: Term, expr: EventExpr) -> DetectionRule {
        DetectionRule {
            name,
            expr,
            consumption: Vec::new(),
        }
    }

    pub fn consuming(mut self, leaf: Term, policy: ConsumePolicy) -> DetectionRule {
        self.consumption.push((leaf, policy));
        self
    }

    pub fn from_fact(head: &Term) -> Result<DetectionRule, EventError> {
        let args = head.args();
        let bad = |reason: &str| EventError::Malformed {
            term: format_term(head),
            reason: reason.into(),
        };
        if head.name() != Some("detection") || !(2..=3).contains(&args.len()) {
            return Err(bad("expected detection/2 or detection/3"));
        }
        let mut rule = DetectionRule::new(args[0].clone(), EventExpr::from_term(&args[1])?);
        if let Some(policies) = args.get(2) {
            let items = policies.as_proper_list().ok_or_else(|| bad("consumption must be a list"))?;
            for item in items {
                let policy = match (item.name(), item.args()) {
                    (Some("consume"), [leaf, p]) => p
                        .as_atom()
                        .and_then(ConsumePolicy::from_name)
                        .map(|p| (leaf.clone(), p)),
                    _ => None,
                };
                rule.consumption
                    .push(policy.ok_or_else(|| bad("consumption entries are consume(Event, all|first|last|none)"))?);
            }
        }
        Ok(rule)
    }

    fn consumes(&self) -> bool {
        self.consumption.iter().any(|(_, p)| *p != ConsumePolicy::None)
    }
}

pub fn detection_rules(state: &KnowledgeState) -> Result<Vec<DetectionRule>, EventError> {
    let mut out = Vec::new();
    for arity in [2, 3] {
        for c in state.clauses_for("detection", arity, None).iter() {
            if c.clause.is_fact() {
                out.push((c.stamp, DetectionRule::from_fact(&c.clause.head)?));
            }
        }
    }
    out.sort_by_key(|(stamp, _)| *stamp);
    Ok(out.into_iter().map(|(_, r)| r).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    pub event: Term,
    pub start: Instant,
    pub end: Instant,
    pub used: Vec<u64>,
}

impl Detection {
    pub fn interval(&self) -> Term {
        interval_term(self.start, self.end)
    }

    fn occurs_fact(&self) -> Clause {
        Clause::fact(Term::compound("occurs", vec![self.event.clone(), self.interval()]))
    }
}

const MAX_DETECTION_ROUNDS: usize = 10_000;

/// Detects new occurrences of a complex event, records each under
/// `eis(Name)` and applies the rule's consumption.
///
/// Without consumption every new match is recorded in one pass. With
/// consumption matches are taken one at a time, earliest end first, and
/// the expression is re-evaluated after each consumption.
pub fn detect(solver: &Solver, rule: &DetectionRule) -> Result<(Vec<Detection>, KnowledgeState), EventError> {
    let mut state = solver.state().clone();
    let mut found = Vec::new();
    for _ in 0..MAX_DETECTION_ROUNDS {
        let fresh = new_detections(&solver.clone().with_state(state.clone()), rule)?;
        if fresh.is_empty() {
            break;
        }
        let take = if rule.consumes() { 1 } else { fresh.len() };
        for d in fresh.into_iter().take(take) {
            state = state.add_module(ModuleId::eis_for(&d.event), vec![d.occurs_fact()]);
            for op in consumption_ops(rule) {
                for r in resolve_op(&state, &op).unwrap_or_default() {
                    state = state.apply(&r);
                }
            }
            found.push(d);
        }
        if !rule.consumes() {
            break;
        }
    }
    Ok((found, state))
}

fn consumption_ops(rule: &DetectionRule) -> Vec<TxOp> {
    rule.consumption
        .iter()
        .filter(|(_, p)| *p != ConsumePolicy::None)
        .map(|(leaf, policy)| TxOp::Consume {
            key: ModuleId::eis_for(leaf),
            policy: *policy,
            pattern: None,
        })
        .collect()
}

/// Matches not yet recorded in the state, earliest end first, one per interval.
fn new_detections(solver: &Solver, rule: &DetectionRule) -> Result<Vec<Detection>, EventError> {
    let state = solver.state();
    let occs = occurrences(state);
    let next_var = next_var_after(&[&rule.name, &rule.expr.to_term()]);
    let matches = Matcher::new(solver, &occs, next_var).matches(&rule.expr, &Substitution::new())?;
    let recorded: HashSet<(Term, Instant, Instant)> = occs
        .iter()
        .map(|o| (o.event.clone(), o.start, o.end))
        .collect();
    let mut seen = HashSet::new();
    Ok(matches
        .into_iter()
        .filter_map(|m| {
            let event = m.subst.apply(&rule.name);
            let key = (event.clone(), m.start, m.end);
            if recorded.contains(&key) || !seen.insert(key) {
                return None;
            }
            Some(Detection {
                event,
                start: m.start,
                end: m.end,
                used: m.used,
            })
        })
        .collect())
}

fn type_error(e: EventError) -> SolveError {
    match e {
        EventError::Solve(e) => e,
        other => SolveError::Type(other.to_string()),
    }
}

pub(crate) fn register_library(r: &mut Registry) {
    r.register_library("event", 2, event_builtin);
    r.register_library("holdsInterval", 2, |c, a| holds_interval_builtin(c, a, None));
    r.register_library("holdsInterval", 3, |c, a| {
        let context = c.resolve(&a[2]);
        let items = context
            .as_proper_list()
            .ok_or_else(|| SolveError::Type(format!("{} is not a context list", format_term(&context))))?;
        holds_interval_builtin(c, a, Some(&items))
    });
    r.register_library("broken", 3, broken_builtin);
    r.register_library("detect", 2, detect_builtin);
}

fn event_builtin(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let expr = EventExpr::from_term(&ctx.resolve(&args[0])).map_err(type_error)?;
    let occs = occurrences(ctx.solver.state());
    let matches = Matcher::new(ctx.solver, &occs, ctx.next_var)
        .matches(&expr, ctx.subst)
        .map_err(type_error)?;
    Ok(matches
        .into_iter()
        .filter_map(|m| {
            unify_with(&args[1], &interval_term(m.start, m.end), &m.subst, ctx.solver.options().occurs_check)
                .map(|s| ctx.answer(s))
        })
        .collect())
}

fn pair_of(ctx: &Ctx<'_>, t: &Term) -> Result<(Term, Term), SolveError> {
    let t = ctx.resolve(t);
    match t.as_proper_list().as_deref() {
        Some([a, b]) => Ok((a.clone(), b.clone())),
        _ => Err(SolveError::Type(format!("{} is not an event pair [E1,E2]", format_term(&t)))),
    }
}

fn holds_interval_builtin(ctx: &mut Ctx<'_>, args: &[Term], context: Option<&[Term]>) -> Result<Vec<Answer>, SolveError> {
    let (e1, e2) = pair_of(ctx, &args[0])?;
    let answers = holds_interval_answers(ctx.solver, &e1, &e2, context, ctx.subst, ctx.next_var)?;
    Ok(answers
        .into_iter()
        .filter_map(|(s, start, end)| {
            unify_with(&args[1], &interval_term(start, end), &s, ctx.solver.options().occurs_check)
                .map(|s| ctx.answer(s))
        })
        .collect())
}

fn broken_builtin(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let instant = |t: &Term| {
        let t = ctx.resolve(t);
        Instant::from_term(&t).ok_or_else(|| SolveError::Instantiation(format!("broken/3 needs times, got {}", format_term(&t))))
    };
    let (t1, t2) = (instant(&args[0])?, instant(&args[2])?);
    let (e1, e2) = pair_of(ctx, &args[1])?;
    let occs = occurrences(ctx.solver.state());
    if broken(ctx.solver, t1, &[e1, e2], t2, None, &occs)? {
        Ok(ctx.succeed())
    } else {
        Ok(Vec::new())
    }
}

/// `detect(Name, T)`: each answer is one new detection, carrying the update
/// that records it and the rule's consumption as intents.
fn detect_builtin(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let mut out = Vec::new();
    for rule in detection_rules(ctx.solver.state()).map_err(type_error)? {
        let Some(s) = ctx.unify(&args[0], &rule.name) else { continue };
        let renamed = ctx.solver.clone();
        let (detections, _) = detect(&renamed, &rule).map_err(type_error)?;
        for d in detections {
            let Some(s) = unify_with(&args[0], &d.event, &s, false)
                .and_then(|s| unify_with(&args[1], &d.interval(), &s, false))
            else {
                continue;
            };
            let mut intents = vec![Intent::add(
                ModuleId::eis_for(&d.event),
                Payload::Clauses(vec![d.occurs_fact()]),
            )];
            intents.extend(consumption_ops(&rule).into_iter().map(Intent::Op));
            out.push(Answer {
                subst: s,
                intents,
                next_var: ctx.next_var,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
