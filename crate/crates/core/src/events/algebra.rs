//! Event algebra expressions and their matcher.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{broken, Instant, Occurrence};
use crate::parser::format_term;
use crate::solver::{SolveError, Solver};
use crate::term::{unify_with, Substitution, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventError {
    #[error("malformed event expression {term}: {reason}")]
    Malformed { term: String, reason: String },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// A window `[initiator, terminator]` of two event expressions.
pub type Window = (Box<EventExpr>, Box<EventExpr>);

#[derive(Clone, Debug, PartialEq)]
pub enum EventExpr {
    Leaf(Term),
    Sequence(Vec<EventExpr>),
    Conjunction(Vec<EventExpr>),
    Or(Vec<EventExpr>),
    Xor(Vec<EventExpr>),
    Concurrent(Vec<EventExpr>),
    Not { expr: Box<EventExpr>, window: Window },
    Any { n: usize, children: Vec<EventExpr> },
    Aperiodic { expr: Box<EventExpr>, window: Window },
    /// Fires every `period` seconds strictly inside the window.
    Periodic { period: i64, window: Window },
}

fn malformed(t: &Term, reason: &str) -> EventError {
    EventError::Malformed {
        term: format_term(t),
        reason: reason.into(),
    }
}

type Accept<'a> = dyn Fn(&[Match], &Match) -> Result<bool, EventError> + 'a;

impl EventExpr {
    /// Reads an expression. `sequence`, `conjunction`, `or`, `xor` and
    /// `concurrent` take two or more children; `not/2`, `aperiodic/2` and
    /// `periodic/2` take a `[Initiator, Terminator]` window; `any(N, [..])`
    /// picks N children. `[E]` and any other term are leaf event patterns.
    pub fn from_term(t: &Term) -> Result<EventExpr, EventError> {
        let args = t.args();
        let children = |min: usize| -> Result<Vec<EventExpr>, EventError> {
            if args.len() < min {
                return Err(malformed(t, &format!("needs at least {min} children")));
            }
            args.iter().map(EventExpr::from_term).collect()
        };
        let window = |w: &Term| -> Result<Window, EventError> {
            match w.as_proper_list().as_deref() {
                Some([i, j]) => Ok((Box::new(EventExpr::from_term(i)?), Box::new(EventExpr::from_term(j)?))),
                _ => Err(malformed(t, "window must be a two-element list")),
            }
        };
        if let Some(items) = t.as_proper_list() {
            return match items.as_slice() {
                [e] => Ok(EventExpr::Leaf(e.clone())),
                _ => Err(malformed(t, "an event list holds exactly one event")),
            };
        }
        match (t.name(), args.len()) {
            (Some("sequence"), _) => Ok(EventExpr::Sequence(children(2)?)),
            (Some("conjunction"), _) => Ok(EventExpr::Conjunction(children(2)?)),
            (Some("or"), _) => Ok(EventExpr::Or(children(2)?)),
            (Some("xor"), _) => Ok(EventExpr::Xor(children(2)?)),
            (Some("concurrent"), _) => Ok(EventExpr::Concurrent(children(2)?)),
            (Some("not"), 2) => Ok(EventExpr::Not {
                expr: Box::new(EventExpr::from_term(&args[0])?),
                window: window(&args[1])?,
            }),
            (Some("aperiodic"), 2) => Ok(EventExpr::Aperiodic {
                expr: Box::new(EventExpr::from_term(&args[0])?),
                window: window(&args[1])?,
            }),
            (Some("periodic"), 2) => {
                let period = match &args[0] {
                    Term::Span(s) => s.total_seconds(),
                    Term::Int(i) => i64::try_from(i).map_err(|_| malformed(t, "period out of range"))?,
                    _ => return Err(malformed(t, "period must be a time span or integer")),
                };
                if period <= 0 {
                    return Err(malformed(t, "period must be positive"));
                }
                Ok(EventExpr::Periodic {
                    period,
                    window: window(&args[1])?,
                })
            }
            (Some("any"), 2) => {
                let n = args[0]
                    .as_int()
                    .and_then(|n| usize::try_from(n).ok())
                    .ok_or_else(|| malformed(t, "any/2 needs a count"))?;
                let items = args[1]
                    .as_proper_list()
                    .ok_or_else(|| malformed(t, "any/2 needs a list of events"))?;
                if n == 0 || n > items.len() {
                    return Err(malformed(t, "count must be between 1 and the number of events"));
                }
                Ok(EventExpr::Any {
                    n,
                    children: items.iter().map(EventExpr::from_term).collect::<Result<_, _>>()?,
                })
            }
            _ => Ok(EventExpr::Leaf(t.clone())),
        }
    }

    pub fn to_term(&self) -> Term {
        let list = |cs: &[EventExpr]| cs.iter().map(EventExpr::to_term).collect::<Vec<_>>();
        let window = |(i, j): &Window| Term::proper_list(vec![i.to_term(), j.to_term()]);
        match self {
            EventExpr::Leaf(t) => t.clone(),
            EventExpr::Sequence(cs) => Term::compound("sequence", list(cs)),
            EventExpr::Conjunction(cs) => Term::compound("conjunction", list(cs)),
            EventExpr::Or(cs) => Term::compound("or", list(cs)),
            EventExpr::Xor(cs) => Term::compound("xor", list(cs)),
            EventExpr::Concurrent(cs) => Term::compound("concurrent", list(cs)),
            EventExpr::Not { expr, window: w } => Term::compound("not", vec![expr.to_term(), window(w)]),
            EventExpr::Any { n, children } => Term::compound(
                "any",
                vec![Term::int(*n as i64), Term::proper_list(list(children))],
            ),
            EventExpr::Aperiodic { expr, window: w } => Term::compound("aperiodic", vec![expr.to_term(), window(w)]),
            EventExpr::Periodic { period, window: w } => Term::compound("periodic", vec![Term::int(*period), window(w)]),
        }
    }

    /// Leaf event patterns, left to right.
    pub fn leaves(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Term>) {
        match self {
            EventExpr::Leaf(t) => out.push(t),
            EventExpr::Sequence(cs)
            | EventExpr::Conjunction(cs)
            | EventExpr::Or(cs)
            | EventExpr::Xor(cs)
            | EventExpr::Concurrent(cs)
            | EventExpr::Any { children: cs, .. } => cs.iter().for_each(|c| c.collect_leaves(out)),
            EventExpr::Not { expr, window } | EventExpr::Aperiodic { expr, window } => {
                expr.collect_leaves(out);
                window.0.collect_leaves(out);
                window.1.collect_leaves(out);
            }
            EventExpr::Periodic { window, .. } => {
                window.0.collect_leaves(out);
                window.1.collect_leaves(out);
            }
        }
    }
}

/// One occurrence of an expression: its interval, the bindings of its leaf
/// patterns and the occurrences it is made of.
#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    pub start: Instant,
    pub end: Instant,
    pub subst: Substitution,
    /// Sequence numbers of the contributing occurrences, ascending.
    pub used: Vec<u64>,
}

impl Match {
    fn key(&self) -> (Instant, Instant, Vec<u64>) {
        (self.end, self.start, self.used.clone())
    }
}

fn disjoint(a: &[u64], b: &[u64]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_err())
}

fn union(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Evaluates expressions over a fixed set of occurrences.
pub struct Matcher<'a> {
    pub(super) solver: &'a Solver,
    pub(super) occurrences: &'a [Occurrence],
    pub(super) next_var: u64,
}

impl<'a> Matcher<'a> {
    pub fn new(solver: &'a Solver, occurrences: &'a [Occurrence], next_var: u64) -> Matcher<'a> {
        Matcher {
            solver,
            occurrences,
            next_var,
        }
    }

    /// All matches, earliest end first, without duplicates.
    pub fn matches(&self, expr: &EventExpr, subst: &Substitution) -> Result<Vec<Match>, EventError> {
        let mut ms = self.eval(expr, subst)?;
        ms.sort_by_key(Match::key);
        let mut seen = BTreeSet::new();
        ms.retain(|m| seen.insert(m.key()));
        Ok(ms)
    }

    fn leaf(&self, pattern: &Term, subst: &Substitution) -> Vec<Match> {
        let occurs_check = self.solver.options().occurs_check;
        self.occurrences
            .iter()
            .filter_map(|o| {
                let event = if o.event.is_ground() {
                    o.event.clone()
                } else {
                    o.event.offset_vars(self.next_var)
                };
                unify_with(pattern, &event, subst, occurs_check).map(|s| Match {
                    start: o.start,
                    end: o.end,
                    subst: s,
                    used: vec![o.seq],
                })
            })
            .collect()
    }

    /// Combines one match per child, left to right, with disjoint
    /// contributors; `accept` sees the matches chosen so far plus the new one.
    fn combine(
        &self,
        children: &[&EventExpr],
        subst: &Substitution,
        accept: &Accept,
    ) -> Result<Vec<Vec<Match>>, EventError> {
        let mut partial: Vec<Vec<Match>> = vec![Vec::new()];
        for child in children {
            let mut next = Vec::new();
            for chosen in partial {
                let s = chosen.last().map_or(subst, |m| &m.subst);
                for m in self.eval(child, s)? {
                    if chosen.iter().all(|c| disjoint(&c.used, &m.used)) && accept(&chosen, &m)? {
                        let mut extended = chosen.clone();
                        extended.push(m);
                        next.push(extended);
                    }
                }
            }
            partial = next;
        }
        Ok(partial)
    }

    fn hull(parts: Vec<Match>) -> Match {
        let start = parts.iter().map(|m| m.start).min().expect("non-empty");
        let end = parts.iter().map(|m| m.end).max().expect("non-empty");
        let used = parts.iter().fold(Vec::new(), |acc, m| union(&acc, &m.used));
        let subst = parts.into_iter().last().expect("non-empty").subst;
        Match { start, end, subst, used }
    }

    /// Window pairs: an initiator match ending no later than a terminator match starts.
    fn windows(&self, window: &Window, subst: &Substitution) -> Result<Vec<(Match, Match)>, EventError> {
        let mut out = Vec::new();
        for mi in self.eval(&window.0, subst)? {
            for mj in self.eval(&window.1, &mi.subst)? {
                if mi.end <= mj.start && disjoint(&mi.used, &mj.used) {
                    out.push((mi.clone(), mj));
                }
            }
        }
        Ok(out)
    }

    fn eval(&self, expr: &EventExpr, subst: &Substitution) -> Result<Vec<Match>, EventError> {
        match expr {
            EventExpr::Leaf(p) => Ok(self.leaf(p, subst)),
            EventExpr::Sequence(cs) => {
                let context: Vec<Term> = cs.iter().map(EventExpr::to_term).collect();
                let refs: Vec<&EventExpr> = cs.iter().collect();
                let accept = |chosen: &[Match], m: &Match| -> Result<bool, EventError> {
                    let Some(prev) = chosen.last() else { return Ok(true) };
                    if prev.end > m.start {
                        return Ok(false);
                    }
                    let k = chosen.len();
                    let pair = [m.subst.apply(&context[k - 1]), m.subst.apply(&context[k])];
                    Ok(!broken(self.solver, prev.end, &pair, m.start, Some(&context), self.occurrences)?)
                };
                Ok(self.combine(&refs, subst, &accept)?.into_iter().map(Self::hull).collect())
            }
            EventExpr::Conjunction(cs) => {
                let refs: Vec<&EventExpr> = cs.iter().collect();
                Ok(self
                    .combine(&refs, subst, &|_, _| Ok(true))?
                    .into_iter()
                    .map(Self::hull)
                    .collect())
            }
            EventExpr::Concurrent(cs) => {
                let refs: Vec<&EventExpr> = cs.iter().collect();
                let overlap = |chosen: &[Match], m: &Match| -> Result<bool, EventError> {
                    Ok(chosen.iter().all(|c| c.start <= m.end && m.start <= c.end))
                };
                Ok(self.combine(&refs, subst, &overlap)?.into_iter().map(Self::hull).collect())
            }
            EventExpr::Or(cs) => {
                let mut out = Vec::new();
                for c in cs {
                    out.extend(self.eval(c, subst)?);
                }
                Ok(out)
            }
            EventExpr::Xor(cs) => {
                let per_child: Vec<Vec<Match>> = cs.iter().map(|c| self.eval(c, subst)).collect::<Result<_, _>>()?;
                let mut out = Vec::new();
                for (i, ms) in per_child.iter().enumerate() {
                    if per_child.iter().enumerate().all(|(j, other)| j == i || other.is_empty()) {
                        out.extend(ms.iter().cloned());
                    }
                }
                Ok(out)
            }
            EventExpr::Any { n, children } => {
                let mut out = Vec::new();
                for combo in combinations(children.len(), *n) {
                    let refs: Vec<&EventExpr> = combo.iter().map(|&i| &children[i]).collect();
                    out.extend(self.combine(&refs, subst, &|_, _| Ok(true))?.into_iter().map(Self::hull));
                }
                Ok(out)
            }
            EventExpr::Not { expr, window } => {
                let mut out = Vec::new();
                for (mi, mj) in self.windows(window, subst)? {
                    let inside = self
                        .eval(expr, &mj.subst)?
                        .iter()
                        .any(|x| mi.end < x.start && x.end < mj.start);
                    if !inside {
                        out.push(Match {
                            start: mi.start,
                            end: mj.end,
                            used: union(&mi.used, &mj.used),
                            subst: mj.subst,
                        });
                    }
                }
                Ok(out)
            }
            EventExpr::Aperiodic { expr, window } => {
                let mut out = Vec::new();
                for (mi, mj) in self.windows(window, subst)? {
                    for x in self.eval(expr, &mj.subst)? {
                        if mi.end < x.start && x.end < mj.start {
                            out.push(Match {
                                start: x.start,
                                end: x.end,
                                used: union(&union(&mi.used, &x.used), &mj.used),
                                subst: x.subst,
                            });
                        }
                    }
                }
                Ok(out)
            }
            EventExpr::Periodic { period, window } => {
                let mut out = Vec::new();
                for (mi, mj) in self.windows(window, subst)? {
                    let mut point = mi.end.plus_seconds(*period);
                    while point < mj.start {
                        out.push(Match {
                            start: point,
                            end: point,
                            used: union(&mi.used, &mj.used),
                            subst: mj.subst.clone(),
                        });
                        point = point.plus_seconds(*period);
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Index sets of size `k` out of `n`, in lexicographic order.
pub(super) fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            go(i + 1, n, k, current, out);
            current.pop();
        }
    }
    go(0, n, k, &mut current, &mut out);
    out
}
