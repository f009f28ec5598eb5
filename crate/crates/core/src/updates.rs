//! Integrity constraints and transactional updates.
//!
//! A constraint is turned into a goal whose provability means the state is
//! inconsistent. A transaction applies its ops to a hypothetical state,
//! checks every constraint there, and either publishes that state or leaves
//! the input untouched.

use std::cmp::Ordering;
use std::fmt;

use crate::events::occurrence_interval;
use crate::kb::{KnowledgeState, ModuleId, UpdateRecord};
use crate::parser::{format_term, parse_clauses, parse_program};
use crate::solver::{compare_values, ConsumePolicy, Intent, Payload, SolveError, Solver, TxOp};
use crate::term::{unify, Clause, Substitution, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Exactly one operand holds.
    Xor,
    /// Not both operands hold.
    Mutex,
    /// The operand must not hold.
    Forbidden,
    /// The goal must not be provable.
    Custom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntegrityConstraint {
    pub kind: ConstraintKind,
    pub operands: Vec<Term>,
    /// Module the constraint was declared in, if any.
    pub oid: Option<ModuleId>,
}

impl IntegrityConstraint {
    pub fn xor(a: Term, b: Term) -> Self {
        Self::with(ConstraintKind::Xor, vec![a, b])
    }

    pub fn mutex(a: Term, b: Term) -> Self {
        Self::with(ConstraintKind::Mutex, vec![a, b])
    }

    pub fn forbidden(a: Term) -> Self {
        Self::with(ConstraintKind::Forbidden, vec![a])
    }

    pub fn custom(goal: Term) -> Self {
        Self::with(ConstraintKind::Custom, vec![goal])
    }

    fn with(kind: ConstraintKind, operands: Vec<Term>) -> Self {
        IntegrityConstraint {
            kind,
            operands,
            oid: None,
        }
    }

    /// Reads the argument of an `integrity/1` fact.
    pub fn from_term(t: &Term, oid: Option<ModuleId>) -> Self {
        let args = t.args();
        let mut ic = match (t.name(), args.len()) {
            (Some("xor"), 2) => Self::xor(args[0].clone(), args[1].clone()),
            (Some("mutex"), 2) => Self::mutex(args[0].clone(), args[1].clone()),
            (Some("forbidden"), 1) => Self::forbidden(args[0].clone()),
            _ => Self::custom(t.clone()),
        };
        ic.oid = oid;
        ic
    }

    /// The goal whose answers witness a violation.
    pub fn goal(&self) -> Term {
        let and = |a: Term, b: Term| Term::compound(",", vec![a, b]);
        let not = |a: Term| Term::compound("not", vec![a]);
        let ops = &self.operands;
        match self.kind {
            ConstraintKind::Xor => Term::compound(
                ";",
                vec![
                    and(ops[0].clone(), ops[1].clone()),
                    and(not(ops[0].clone()), not(ops[1].clone())),
                ],
            ),
            ConstraintKind::Mutex => and(ops[0].clone(), ops[1].clone()),
            ConstraintKind::Forbidden | ConstraintKind::Custom => ops[0].clone(),
        }
    }

    pub fn to_term(&self) -> Term {
        let ops = self.operands.clone();
        match self.kind {
            ConstraintKind::Xor => Term::compound("xor", ops),
            ConstraintKind::Mutex => Term::compound("mutex", ops),
            ConstraintKind::Forbidden => Term::compound("forbidden", ops),
            ConstraintKind::Custom => ops[0].clone(),
        }
    }
}

impl fmt::Display for IntegrityConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "integrity({})", format_term(&self.to_term()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub constraint: IntegrityConstraint,
    /// The violating goal instance for the first answer found.
    pub witness: Term,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated by {}", self.constraint, format_term(&self.witness))
    }
}

/// Constraints declared by `integrity/1` facts in the state.
pub fn constraints_in(state: &KnowledgeState) -> Vec<IntegrityConstraint> {
    state
        .clauses_for("integrity", 1, None)
        .iter()
        .filter(|c| c.clause.is_fact())
        .map(|c| IntegrityConstraint::from_term(&c.clause.head.args()[0], Some(c.module.clone())))
        .collect()
}

pub fn evaluate_constraint(solver: &Solver, ic: &IntegrityConstraint) -> Result<Option<Violation>, SolveError> {
    let goal = ic.goal();
    match solver.solve(std::slice::from_ref(&goal)).next() {
        None => Ok(None),
        Some(Err(e)) => Err(e),
        Some(Ok(s)) => Ok(Some(Violation {
            constraint: ic.clone(),
            witness: s.subst.apply(&goal),
        })),
    }
}

/// Every constraint of the solver's state that is violated there.
pub fn test_integrity(solver: &Solver) -> Result<Vec<Violation>, SolveError> {
    check_all(solver, &constraints_in(solver.state()))
}

fn check_all(solver: &Solver, ics: &[IntegrityConstraint]) -> Result<Vec<Violation>, SolveError> {
    let mut out = Vec::new();
    for ic in ics {
        if let Some(v) = evaluate_constraint(solver, ic)? {
            out.push(v);
        }
    }
    Ok(out)
}

/// Direction of a hypothetical update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Polarity {
    #[default]
    Add,
    Remove,
}

const HYPOTHESIS: &str = "$hypothesis";

/// Tests the constraints against the state with `lit` added (or removed)
/// without publishing anything.
pub fn test_integrity_hypothetical(
    solver: &Solver,
    lit: &Term,
    polarity: Polarity,
) -> Result<Vec<Violation>, SolveError> {
    let state = solver.state();
    let fact = Clause::fact(lit.clone());
    let hypo = match polarity {
        Polarity::Add => state.add_module(ModuleId::new(HYPOTHESIS), vec![fact]),
        Polarity::Remove => {
            let holders: Vec<ModuleId> = state
                .module_ids()
                .filter(|oid| state.module(oid).unwrap_or(&[]).iter().any(|c| c.clause == fact))
                .cloned()
                .collect();
            holders.into_iter().fold(state.clone(), |s, oid| {
                let n = s.module(&oid).unwrap_or(&[]).iter().filter(|c| c.clause == fact).count();
                s.retract(oid, vec![fact.clone(); n])
            })
        }
    };
    test_integrity(&solver.clone().with_state(hypo))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateTransaction {
    pub ops: Vec<TxOp>,
    /// Constraints checked in addition to those in the knowledge base.
    pub extra_constraints: Vec<IntegrityConstraint>,
}

impl UpdateTransaction {
    pub fn new(ops: Vec<TxOp>) -> Self {
        UpdateTransaction {
            ops,
            extra_constraints: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub enum TxOutcome {
    Committed {
        state: KnowledgeState,
        applied: Vec<UpdateRecord>,
    },
    RolledBack {
        violations: Vec<Violation>,
        diagnostic: Option<String>,
    },
}

impl TxOutcome {
    pub fn is_committed(&self) -> bool {
        matches!(self, TxOutcome::Committed { .. })
    }

    /// The published state, or `input` after a rollback.
    pub fn state_or(&self, input: &KnowledgeState) -> KnowledgeState {
        match self {
            TxOutcome::Committed { state, .. } => state.clone(),
            TxOutcome::RolledBack { .. } => input.clone(),
        }
    }
}

pub fn run_transaction(solver: &Solver, tx: &UpdateTransaction) -> TxOutcome {
    let rollback = |diagnostic: String| TxOutcome::RolledBack {
        violations: Vec::new(),
        diagnostic: Some(diagnostic),
    };
    let mut hypo = solver.state().clone();
    let mut applied = Vec::new();
    for op in &tx.ops {
        match resolve_op(&hypo, op) {
            Ok(records) => {
                for r in records {
                    hypo = hypo.apply(&r);
                    applied.push(r);
                }
            }
            Err(e) => return rollback(e),
        }
    }
    let checker = solver.clone().with_state(hypo.clone());
    let mut ics = constraints_in(&hypo);
    ics.extend(tx.extra_constraints.iter().cloned());
    match check_all(&checker, &ics) {
        Err(e) => rollback(format!("integrity check failed: {e}")),
        Ok(v) if !v.is_empty() => TxOutcome::RolledBack {
            violations: v,
            diagnostic: None,
        },
        Ok(_) => TxOutcome::Committed { state: hypo, applied },
    }
}

/// Turns an op into the concrete update records it stands for in `state`.
pub fn resolve_op(state: &KnowledgeState, op: &TxOp) -> Result<Vec<UpdateRecord>, String> {
    match op {
        TxOp::Add { oid, payload } => {
            let clauses = resolve_payload(payload)?;
            Ok(if clauses.is_empty() {
                Vec::new()
            } else {
                vec![UpdateRecord::add(oid.clone(), clauses)]
            })
        }
        TxOp::Remove { oid } => Ok(vec![UpdateRecord::remove(oid.clone())]),
        TxOp::Retract { oid, clauses } => Ok(vec![UpdateRecord::retract(oid.clone(), clauses.clone())]),
        TxOp::Consume { key, policy, pattern } => Ok(consume_records(state, key, *policy, pattern.as_ref())),
    }
}

fn consume_records(
    state: &KnowledgeState,
    key: &ModuleId,
    policy: ConsumePolicy,
    pattern: Option<&Term>,
) -> Vec<UpdateRecord> {
    let Some(module) = state.module(key) else { return Vec::new() };
    if policy == ConsumePolicy::None {
        return Vec::new();
    }
    if policy == ConsumePolicy::All && pattern.is_none() {
        return vec![UpdateRecord::remove(key.clone())];
    }
    let mut occurrences: Vec<_> = module
        .iter()
        .filter(|c| c.clause.is_fact() && c.clause.head.name() == Some("occurs") && c.clause.head.args().len() == 2)
        .filter(|c| match pattern {
            Some(p) => unify(p, &c.clause.head.offset_vars(p.max_var_id().map_or(0, |m| m + 1)), &Substitution::new()).is_some(),
            None => true,
        })
        .collect();
    if occurrences.is_empty() {
        return Vec::new();
    }
    occurrences.sort_by(|a, b| {
        let ta = occurrence_interval(&a.clause.head.args()[1]);
        let tb = occurrence_interval(&b.clause.head.args()[1]);
        let by_time = match (ta, tb) {
            (Some((s1, e1)), Some((s2, e2))) => compare_values(&s1, &s2)
                .and_then(|o| Ok(o.then(compare_values(&e1, &e2)?)))
                .unwrap_or(Ordering::Equal),
            _ => Ordering::Equal,
        };
        by_time.then(a.stamp.cmp(&b.stamp))
    });
    let chosen: Vec<Clause> = match policy {
        ConsumePolicy::All => occurrences.iter().map(|c| c.clause.clone()).collect(),
        ConsumePolicy::First => vec![occurrences[0].clause.clone()],
        ConsumePolicy::Last => vec![occurrences[occurrences.len() - 1].clause.clone()],
        ConsumePolicy::None => Vec::new(),
    };
    vec![UpdateRecord::retract(key.clone(), chosen)]
}

/// Parses a payload into clauses, filling in placeholders.
pub fn resolve_payload(payload: &Payload) -> Result<Vec<Clause>, String> {
    match payload {
        Payload::Clauses(cs) => Ok(cs.clone()),
        Payload::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
            parse_program(&text)
                .map(|p| p.clauses)
                .map_err(|e| format!("{path}:{e}"))
        }
        Payload::Source { text, bindings } => {
            let clauses = parse_clauses(text).map_err(|e| format!("in update payload: {e}"))?;
            if bindings.is_empty() {
                return Ok(clauses);
            }
            let mut positional = bindings.iter();
            Ok(clauses
                .iter()
                .map(|c| {
                    let mut chosen = std::collections::HashMap::new();
                    for v in c.variables() {
                        let value = if v.is_anonymous() {
                            positional.next().cloned()
                        } else {
                            v.name
                                .strip_prefix('_')
                                .and_then(|n| n.parse::<usize>().ok())
                                .and_then(|n| bindings.get(n).cloned())
                        };
                        if let Some(value) = value {
                            chosen.insert(v.id, value);
                        }
                    }
                    Clause::new(
                        c.head.substitute(&chosen),
                        c.body.iter().map(|l| l.substitute(&chosen)).collect(),
                    )
                })
                .collect())
        }
    }
}

/// Result of carrying out the intents of a proof outside the daemon.
#[derive(Clone, Debug)]
pub struct EffectReport {
    pub state: KnowledgeState,
    pub applied: Vec<UpdateRecord>,
    /// Messages from committed work, in order.
    pub messages: Vec<(Term, Term)>,
    /// Diagnostics of updates that were not applied.
    pub rejected: Vec<String>,
}

/// Applies plain updates one by one and each `transaction/1` group under
/// integrity checking.
pub fn apply_intents(solver: &Solver, intents: &[Intent]) -> EffectReport {
    let mut report = EffectReport {
        state: solver.state().clone(),
        applied: Vec::new(),
        messages: Vec::new(),
        rejected: Vec::new(),
    };
    for intent in intents {
        match intent {
            Intent::Op(op) => match resolve_op(&report.state, op) {
                Ok(records) => {
                    for r in records {
                        report.state = report.state.apply(&r);
                        report.applied.push(r);
                    }
                }
                Err(e) => report.rejected.push(e),
            },
            Intent::Send { recipient, message } => report.messages.push((recipient.clone(), message.clone())),
            Intent::Transaction(inner) => {
                let tx = UpdateTransaction::new(Intent::ops(inner));
                match run_transaction(&solver.clone().with_state(report.state.clone()), &tx) {
                    TxOutcome::Committed { state, applied } => {
                        report.state = state;
                        report.applied.extend(applied);
                        report.messages.extend(Intent::messages(inner));
                    }
                    TxOutcome::RolledBack { violations, diagnostic } => {
                        let mut why: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
                        why.extend(diagnostic);
                        report.rejected.push(format!("transaction rolled back: {}", why.join("; ")));
                    }
                }
            }
        }
    }
    report
}
