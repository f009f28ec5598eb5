//! Productions and validation.
//!
//! Each production is an ordered list of slots, a slot being a set of
//! admissible child kinds with a repetition range. Where the grammar writes
//! `a | b, c` the alternation binds inside the slot and the comma separates
//! slots, so `Cterm ::= [oid,] op | Ctor | Attachment, {slot,} ...` reads as
//! an optional `oid`, then one of `op`, `Ctor` or `Attachment`, then the
//! arguments. Braces mean one or more. Operators that combine events need
//! at least two operands.
//!
//! | kind | children |
//! |------|----------|
//! | `RuleBase` | `[oid] {ECA \| Atom \| Neg \| Implies \| EC nodes}*` |
//! | `ECA` | `[oid] [time] [event] [condition] action [postcondition] [else]` |
//! | `time`, `condition`, `postcondition` | one goal |
//! | `event` | a goal, an event term or an operator |
//! | `action`, `else` | `Cterm \| Atom \| Assert \| Retract \| And` or an operator |
//! | `Assert` | `[oid] content \| And` |
//! | `Retract` | `oid` |
//! | `Naf` | `[oid] weak \| Atom \| Cterm` |
//! | `Neg` | `[oid] strong \| Atom \| Equal \| Cterm` |
//! | `Cterm` | `[oid] op \| Ctor \| Attachment, {arg \| slot \| term}` |
//! | `Attachment` | `[oid] Ind \| Var \| Cterm, Ind` |
//! | `Occurs` | `[oid] event-term, interval` |
//! | `Terminates` | `[oid] event-term, fluent-term \| interval, time \| interval` |
//! | `HoldsInterval` | `[oid] interval \| operator \| Cterm, interval` |
//! | `Interval` | `[oid] endpoint, endpoint` |
//! | `Sequence`, `Or`, `Xor`, `Conjunction`, `Concurrent` | `[oid] operand operand {operand}` |
//! | `Not`, `Aperiodic` | `[oid] operand, interval` |
//! | `Any` | `[oid] Ind \| Data \| Var, {operand}` |
//! | `Periodic` | `[oid] time \| Ind \| Var \| Cterm \| Data, interval` |

use std::fmt::Write;

use crate::ast::{Kind, RulemlNode};
use crate::RulemlError;

use Kind::*;

#[derive(Clone, Copy, Debug)]
pub struct Slot {
    pub alts: &'static [Kind],
    pub min: usize,
    /// `None` for unbounded.
    pub max: Option<usize>,
}

const fn one(alts: &'static [Kind]) -> Slot {
    Slot { alts, min: 1, max: Some(1) }
}

const fn opt(alts: &'static [Kind]) -> Slot {
    Slot { alts, min: 0, max: Some(1) }
}

const fn many(alts: &'static [Kind], min: usize) -> Slot {
    Slot { alts, min, max: None }
}

const OID: Slot = opt(&[Oid]);

const TERM: &[Kind] = &[Ind, Data, Var, Skolem, Cterm, Plex];
const ARGS: &[Kind] = &[Arg, Slot, Ind, Data, Var, Skolem, Cterm, Plex];
const GOAL: &[Kind] = &[
    Naf, Neg, Cterm, Atom, And, Equal, Occurs, HoldsInterval, Happens, Planned, HoldsAt, ValueAt,
];
const EVENT_PART: &[Kind] = &[
    Naf, Neg, Cterm, Atom, Ind, Var, Sequence, Or, Xor, Conjunction, Concurrent, Not, Any, Aperiodic,
];
const ACTION_PART: &[Kind] = &[
    Cterm, Atom, Assert, Retract, And, Sequence, Or, Xor, Conjunction, Concurrent, Not, Any, Aperiodic,
];
const OPERAND: &[Kind] = &[
    Event, Action, Ind, Var, Cterm, Atom, Assert, Retract, Sequence, Or, Xor, Conjunction, Concurrent, Not, Any, Aperiodic,
    Periodic,
];
const EVENT_TERM: &[Kind] = &[Event, Ind, Var, Cterm];
const FLUENT_TERM: &[Kind] = &[Fluent, Ind, Var, Cterm];
const TIME_TERM: &[Kind] = &[Time, Ind, Var, Cterm, Data];
const INTERVAL: &[Kind] = &[IntervalRole, Interval, Plex, Var];
const ENDPOINT: &[Kind] = &[
    Event, Time, Ind, Data, Var, Cterm, Sequence, Or, Xor, Conjunction, Concurrent, Not, Any, Aperiodic,
    Periodic,
];
const HOLDS_SUBJECT: &[Kind] = &[
    IntervalRole, Interval, Plex, Ind, Var, Cterm, Sequence, Or, Xor, Conjunction, Concurrent, Not, Any,
    Aperiodic, Periodic,
];
const TOP: &[Kind] = &[
    Eca, Atom, Neg, Implies, Occurs, Terminates, Happens, Planned, Initially, Initiates, HoldsAt, ValueAt,
];
const CLAUSES: &[Kind] = &[Atom, Neg, Implies, Eca, Occurs, Terminates];
const CONJUNCTS: &[Kind] = &[
    Atom, Cterm, Naf, Neg, Equal, Implies, Eca, Occurs, Terminates, HoldsInterval, Happens, Planned, HoldsAt,
    ValueAt,
];

/// The production for a kind; empty for leaves.
pub fn production(kind: Kind) -> Vec<Slot> {
    match kind {
        RuleBase => vec![OID, many(TOP, 0)],
        Eca => vec![
            OID,
            opt(&[Time]),
            opt(&[Event]),
            opt(&[Condition]),
            one(&[Action]),
            opt(&[Postcondition]),
            opt(&[Else]),
        ],
        Time => vec![one(&[Naf, Neg, Cterm, Atom, Ind, Var, Data])],
        Condition | Postcondition => vec![one(GOAL)],
        Event => vec![one(EVENT_PART)],
        Action | Else => vec![one(ACTION_PART)],
        Assert => vec![OID, one(&[Content, And])],
        Retract => vec![one(&[Oid])],
        Content => vec![many(CLAUSES, 1)],
        Naf => vec![OID, one(&[Weak, Atom, Cterm])],
        Neg => vec![OID, one(&[Strong, Atom, Equal, Cterm])],
        Weak => vec![one(&[Atom, Cterm])],
        Strong => vec![one(&[Atom, Equal, Cterm])],
        Implies => vec![OID, one(&[Head]), one(&[Body])],
        Head => vec![one(&[Atom, Cterm])],
        Body => vec![one(GOAL)],
        And => vec![OID, many(CONJUNCTS, 0)],
        Atom => vec![OID, one(&[Op, Rel]), many(ARGS, 0)],
        Equal => vec![OID, one(TERM), one(TERM)],
        Cterm => vec![OID, one(&[Op, Ctor, Attachment]), many(ARGS, 0)],
        Op => vec![one(&[Ctor, Rel, Attachment])],
        Attachment => vec![OID, one(&[Ind, Var, Cterm]), one(&[Ind])],
        Arg => vec![one(TERM)],
        Slot => vec![one(TERM), one(TERM)],
        Oid => vec![one(&[Ind, Var])],
        Happens | Planned => vec![OID, one(EVENT_TERM), one(TIME_TERM)],
        Occurs => vec![OID, one(EVENT_TERM), one(INTERVAL)],
        Initially => vec![OID, one(FLUENT_TERM)],
        Initiates => vec![OID, one(EVENT_TERM), one(FLUENT_TERM), one(TIME_TERM)],
        Terminates => vec![
            OID,
            one(EVENT_TERM),
            one(&[Fluent, Ind, Var, Cterm, IntervalRole, Interval]),
            one(&[Time, Ind, Var, Cterm, Data, IntervalRole, Interval, Plex]),
        ],
        HoldsAt => vec![OID, one(FLUENT_TERM), one(TIME_TERM)],
        ValueAt => vec![
            OID,
            one(&[Parameter, Ind, Var, Cterm]),
            one(TIME_TERM),
            one(&[Ind, Var, Cterm, Data]),
        ],
        HoldsInterval => vec![OID, one(HOLDS_SUBJECT), one(INTERVAL)],
        Fluent | Parameter => vec![one(&[Ind, Var, Cterm])],
        IntervalRole => vec![one(&[Interval, Plex, Var])],
        Interval => vec![OID, one(ENDPOINT), one(ENDPOINT)],
        Sequence | Or | Xor | Conjunction | Concurrent => vec![OID, many(OPERAND, 2)],
        Not | Aperiodic => vec![OID, one(OPERAND), one(INTERVAL)],
        Any => vec![OID, one(&[Ind, Data, Var]), many(OPERAND, 1)],
        Periodic => vec![OID, one(&[Time, Ind, Var, Cterm, Data]), one(INTERVAL)],
        Plex => vec![OID, many(&[Ind, Data, Var, Skolem, Cterm, Plex, Slot], 0)],
        Ind | Data | Var | Skolem | Ctor | Rel => Vec::new(),
    }
}

/// Renders a production in the grammar's notation.
pub fn describe(kind: Kind) -> String {
    let mut out = format!("{kind} ::=");
    for slot in production(kind) {
        let alts: Vec<&str> = slot.alts.iter().map(|k| k.name()).collect();
        let alts = alts.join(" | ");
        let _ = match (slot.min, slot.max) {
            (0, Some(1)) => write!(out, " [{alts}]"),
            (1, Some(1)) => write!(out, " {alts}"),
            (0, None) => write!(out, " {{{alts}}}*"),
            (1, None) => write!(out, " {{{alts}}}"),
            (n, _) => write!(out, " {{{alts}}}{n}+"),
        };
    }
    out
}

fn matches_slots(slots: &[Slot], children: &[RulemlNode]) -> bool {
    let Some((slot, rest)) = slots.split_first() else {
        return children.is_empty();
    };
    let max = slot.max.unwrap_or(usize::MAX);
    let mut taken = 0;
    loop {
        if taken >= slot.min && matches_slots(rest, &children[taken..]) {
            return true;
        }
        if taken == max || taken == children.len() || !slot.alts.contains(&children[taken].kind) {
            return false;
        }
        taken += 1;
    }
}

/// Checks a node and its descendants against the productions.
pub fn validate(node: &RulemlNode) -> Result<(), RulemlError> {
    validate_at(node, &mut Vec::new())
}

fn validate_at(node: &RulemlNode, path: &mut Vec<Kind>) -> Result<(), RulemlError> {
    path.push(node.kind);
    let here = || path.iter().map(|k| k.name()).collect::<Vec<_>>().join("/");
    if node.kind.is_leaf() {
        if !node.children.is_empty() {
            return Err(RulemlError::Grammar {
                path: here(),
                production: format!("{} ::= text", node.kind),
                message: "text element has child elements".into(),
            });
        }
    } else {
        if !node.text.is_empty() {
            return Err(RulemlError::Grammar {
                path: here(),
                production: describe(node.kind),
                message: "unexpected text content".into(),
            });
        }
        if !matches_slots(&production(node.kind), &node.children) {
            let found: Vec<&str> = node.children.iter().map(|c| c.kind.name()).collect();
            return Err(RulemlError::Grammar {
                path: here(),
                production: describe(node.kind),
                message: format!("children [{}] do not fit", found.join(", ")),
            });
        }
        for c in &node.children {
            validate_at(c, path)?;
        }
    }
    path.pop();
    Ok(())
}
