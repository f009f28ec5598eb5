//! Deferred knowledge-base effects produced by a proof.

use std::fmt;

use crate::kb::ModuleId;
use crate::parser::{format_clause, format_term};
use crate::term::{Clause, Term};

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Clauses(Vec<Clause>),
    /// Clause text, parsed when the update is applied. `_N` placeholders take
    /// `bindings[N]`; bare `_` take the remaining bindings in textual order.
    Source { text: String, bindings: Vec<Term> },
    /// A script file, read when the update is applied.
    File(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConsumePolicy {
    All,
    First,
    Last,
    None,
}

impl ConsumePolicy {
    pub fn from_name(name: &str) -> Option<ConsumePolicy> {
        match name {
            "all" => Some(ConsumePolicy::All),
            "first" => Some(ConsumePolicy::First),
            "last" => Some(ConsumePolicy::Last),
            "none" => Some(ConsumePolicy::None),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TxOp {
    Add { oid: ModuleId, payload: Payload },
    Remove { oid: ModuleId },
    Retract { oid: ModuleId, clauses: Vec<Clause> },
    /// Removes occurrences from an event instance sequence. `pattern`, when
    /// present, restricts the policy to `occurs` facts unifying with it.
    Consume {
        key: ModuleId,
        policy: ConsumePolicy,
        pattern: Option<Term>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Intent {
    Op(TxOp),
    /// Ops guarded as one unit by the integrity constraints.
    Transaction(Vec<Intent>),
    Send { recipient: Term, message: Term },
}

impl Intent {
    pub fn add(oid: ModuleId, payload: Payload) -> Intent {
        Intent::Op(TxOp::Add { oid, payload })
    }

    pub fn remove(oid: ModuleId) -> Intent {
        Intent::Op(TxOp::Remove { oid })
    }

    /// Every update op in order, transactions flattened.
    pub fn ops(intents: &[Intent]) -> Vec<TxOp> {
        let mut out = Vec::new();
        for i in intents {
            match i {
                Intent::Op(op) => out.push(op.clone()),
                Intent::Transaction(inner) => out.extend(Intent::ops(inner)),
                Intent::Send { .. } => {}
            }
        }
        out
    }

    /// Every outbound message in order, transactions flattened.
    pub fn messages(intents: &[Intent]) -> Vec<(Term, Term)> {
        let mut out = Vec::new();
        for i in intents {
            match i {
                Intent::Send { recipient, message } => out.push((recipient.clone(), message.clone())),
                Intent::Transaction(inner) => out.extend(Intent::messages(inner)),
                Intent::Op(_) => {}
            }
        }
        out
    }
}

impl fmt::Display for TxOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TxOp::Add { oid, payload } => match payload {
                Payload::Clauses(cs) => {
                    let text: Vec<String> = cs.iter().map(format_clause).collect();
                    write!(f, "add({oid}, {})", text.join(" "))
                }
                Payload::Source { text, bindings } if bindings.is_empty() => write!(f, "add({oid}, {text:?})"),
                Payload::Source { text, bindings } => {
                    let b: Vec<String> = bindings.iter().map(format_term).collect();
                    write!(f, "add({oid}, {text:?}, [{}])", b.join(","))
                }
                Payload::File(path) => write!(f, "add({path:?})"),
            },
            TxOp::Remove { oid } => write!(f, "remove({oid})"),
            TxOp::Retract { oid, clauses } => {
                let text: Vec<String> = clauses.iter().map(format_clause).collect();
                write!(f, "retract({oid}, {})", text.join(" "))
            }
            TxOp::Consume { key, policy, pattern } => {
                let policy = format!("{policy:?}").to_lowercase();
                match pattern {
                    Some(p) => write!(f, "consume({key}, {policy}, {})", format_term(p)),
                    None => write!(f, "consume({key}, {policy})"),
                }
            }
        }
    }
}
