//! First-order terms, substitutions and unification.

mod clause;
mod subst;
mod time;

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_bigint::BigInt;
use thiserror::Error;

pub use clause::{Clause, Span};
pub use subst::{is_variant, unify, unify_with, Substitution};
pub use time::{compare_time, Temporal, TimePoint, TimeSpan};

pub type Symbol = Arc<str>;

/// Atom reserved for an omitted ECA part.
pub const BLANK: &str = "$blank";
pub const NIL: &str = "[]";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("invalid time literal {0}")]
    InvalidTime(String),
    #[error("kind mismatch: {0}")]
    KindMismatch(String),
}

/// A logic variable. Identity is the numeric id; the name is for printing.
#[derive(Clone, Debug)]
pub struct Var {
    pub name: Symbol,
    pub id: u64,
}

impl Var {
    pub fn new(name: impl Into<Symbol>, id: u64) -> Self {
        Var {
            name: name.into(),
            id,
        }
    }

    pub fn is_anonymous(&self) -> bool {
        &*self.name == "_"
    }
}

impl PartialEq for Var {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Var {}

impl Hash for Var {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Atom(Symbol),
    Int(BigInt),
    Str(Arc<str>),
    Var(Var),
    /// Always at least one argument; zero-arity functors are atoms.
    Compound(Symbol, Arc<[Term]>),
    /// Non-empty item list with an optional tail; `None` means `[]`.
    List(Arc<[Term]>, Option<Arc<Term>>),
    Time(TimePoint),
    Span(TimeSpan),
}

impl Term {
    pub fn atom(name: &str) -> Term {
        Term::Atom(name.into())
    }

    pub fn int(v: i64) -> Term {
        Term::Int(BigInt::from(v))
    }

    pub fn string(s: &str) -> Term {
        Term::Str(s.into())
    }

    pub fn var(name: &str, id: u64) -> Term {
        Term::Var(Var::new(name, id))
    }

    pub fn nil() -> Term {
        Term::atom(NIL)
    }

    pub fn blank() -> Term {
        Term::atom(BLANK)
    }

    pub fn compound(functor: &str, args: Vec<Term>) -> Term {
        Term::compound_sym(functor.into(), args)
    }

    pub fn compound_sym(functor: Symbol, args: Vec<Term>) -> Term {
        if args.is_empty() {
            Term::Atom(functor)
        } else {
            Term::Compound(functor, args.into())
        }
    }

    /// Builds a list, flattening list tails and dropping an explicit `[]` tail.
    pub fn list(items: Vec<Term>, tail: Option<Term>) -> Term {
        let mut items = items;
        let mut tail = tail;
        loop {
            match tail {
                Some(Term::List(more, t)) => {
                    items.extend(more.iter().cloned());
                    tail = t.map(|t| (*t).clone());
                }
                Some(Term::Atom(ref a)) if &**a == NIL => tail = None,
                _ => break,
            }
        }
        if items.is_empty() {
            return tail.unwrap_or_else(Term::nil);
        }
        Term::List(items.into(), tail.map(Arc::new))
    }

    pub fn proper_list(items: Vec<Term>) -> Term {
        Term::list(items, None)
    }

    pub fn time(t: TimePoint) -> Term {
        Term::Time(t)
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn is_blank(&self) -> bool {
        matches!(self, Term::Atom(a) if &**a == BLANK)
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Term::Atom(a) if &**a == NIL)
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Term::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Term::Int(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_time(&self) -> Option<TimePoint> {
        match self {
            Term::Time(t) => Some(*t),
            _ => None,
        }
    }

    /// Items of a proper list (`[]` gives an empty slice).
    pub fn as_proper_list(&self) -> Option<Vec<Term>> {
        match self {
            Term::List(items, None) => Some(items.to_vec()),
            Term::Atom(a) if &**a == NIL => Some(Vec::new()),
            _ => None,
        }
    }

    /// Predicate key of a callable term.
    pub fn functor(&self) -> Option<(Symbol, usize)> {
        match self {
            Term::Atom(a) => Some((a.clone(), 0)),
            Term::Compound(f, args) => Some((f.clone(), args.len())),
            _ => None,
        }
    }

    pub fn name(&self) -> Option<&str> {
        match self {
            Term::Atom(a) | Term::Compound(a, _) => Some(a),
            _ => None,
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            Term::Compound(_, args) => args,
            _ => &[],
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
            Term::List(items, tail) => {
                items.iter().all(Term::is_ground) && tail.as_ref().is_none_or(|t| t.is_ground())
            }
            _ => true,
        }
    }

    /// Distinct variables in depth-first, left-to-right order of first occurrence.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    pub(crate) fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            Term::List(items, tail) => {
                items.iter().for_each(|a| a.collect_vars(out));
                if let Some(t) = tail {
                    t.collect_vars(out);
                }
            }
            _ => {}
        }
    }

    pub fn max_var_id(&self) -> Option<u64> {
        match self {
            Term::Var(v) => Some(v.id),
            Term::Compound(_, args) => args.iter().filter_map(Term::max_var_id).max(),
            Term::List(items, tail) => items
                .iter()
                .chain(tail.as_deref())
                .filter_map(Term::max_var_id)
                .max(),
            _ => None,
        }
    }

    /// Rebuilds the term with every variable passed through `f`.
    pub fn map_vars(&self, f: &mut impl FnMut(&Var) -> Term) -> Term {
        match self {
            Term::Var(v) => f(v),
            Term::Compound(name, args) => Term::Compound(
                name.clone(),
                args.iter().map(|a| a.map_vars(f)).collect::<Vec<_>>().into(),
            ),
            Term::List(items, tail) => Term::list(
                items.iter().map(|a| a.map_vars(f)).collect(),
                tail.as_ref().map(|t| t.map_vars(f)),
            ),
            other => other.clone(),
        }
    }

    /// Shifts every variable id by `offset`.
    pub fn offset_vars(&self, offset: u64) -> Term {
        if self.is_ground() {
            return self.clone();
        }
        self.map_vars(&mut |v| Term::Var(Var::new(v.name.clone(), v.id + offset)))
    }

    /// Replaces each variable by a ground term or leaves it untouched.
    pub fn substitute(&self, bindings: &HashMap<u64, Term>) -> Term {
        self.map_vars(&mut |v| bindings.get(&v.id).cloned().unwrap_or(Term::Var(v.clone())))
    }

    /// Expands a time literal into its compound form, for unification with
    /// partially instantiated `datetime/6` or `timespan/4` patterns.
    pub(crate) fn time_as_compound(&self) -> Option<Term> {
        match self {
            Term::Time(t) => Some(Term::compound(
                "datetime",
                t.fields().iter().map(|&f| Term::int(f)).collect(),
            )),
            Term::Span(s) => Some(Term::compound(
                "timespan",
                [s.days, s.hours, s.minutes, s.seconds]
                    .iter()
                    .map(|&f| Term::int(f.into()))
                    .collect(),
            )),
            _ => None,
        }
    }

    /// Converts `datetime/6` and `timespan/4` compounds with integer
    /// arguments into time literals.
    pub fn normalize_time_literal(self) -> Result<Term, TermError> {
        let Term::Compound(ref f, ref args) = self else {
            return Ok(self);
        };
        let ints: Option<Vec<i64>> = args
            .iter()
            .map(|a| a.as_int().and_then(|i| i64::try_from(i).ok()))
            .collect();
        let Some(ints) = ints else { return Ok(self) };
        match (&**f, ints.as_slice()) {
            ("datetime", &[y, mo, d, h, mi, s]) => {
                let field = |v: i64| u32::try_from(v).map_err(|_| bad_time(&self));
                let year = i32::try_from(y).map_err(|_| bad_time(&self))?;
                Ok(Term::Time(TimePoint::new(
                    year,
                    field(mo)?,
                    field(d)?,
                    field(h)?,
                    field(mi)?,
                    field(s)?,
                )?))
            }
            ("timespan", &[d, h, mi, s]) => {
                let field = |v: i64| u32::try_from(v).map_err(|_| bad_time(&self));
                Ok(Term::Span(TimeSpan::new(field(d)?, field(h)?, field(mi)?, field(s)?)))
            }
            _ => Ok(self),
        }
    }
}

fn bad_time(t: &Term) -> TermError {
    TermError::InvalidTime(format!("{t:?}"))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::format_term(self))
    }
}

impl From<TimePoint> for Term {
    fn from(t: TimePoint) -> Self {
        Term::Time(t)
    }
}

impl From<TimeSpan> for Term {
    fn from(s: TimeSpan) -> Self {
        Term::Span(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_arity_compound_is_atom() {
        assert_eq!(Term::compound("f", vec![]), Term::atom("f"));
    }

    #[test]
    fn list_tails_are_flattened() {
        let inner = Term::list(vec![Term::int(2)], None);
        let l = Term::list(vec![Term::int(1)], Some(inner));
        assert_eq!(l, Term::proper_list(vec![Term::int(1), Term::int(2)]));
        assert_eq!(Term::list(vec![], None), Term::nil());
        let open = Term::list(vec![], Some(Term::var("T", 0)));
        assert_eq!(open, Term::var("T", 0));
    }

    #[test]
    fn time_literal_normalization() {
        let t = Term::compound("datetime", [2005, 1, 1, 0, 0, 1].map(Term::int).to_vec());
        assert!(matches!(t.normalize_time_literal(), Ok(Term::Time(_))));
        let bad = Term::compound("datetime", [2005, 13, 1, 0, 0, 1].map(Term::int).to_vec());
        assert!(bad.normalize_time_literal().is_err());
        let open = Term::compound(
            "datetime",
            vec![Term::var("Y", 0), Term::int(1), Term::int(1), Term::int(0), Term::int(0), Term::int(0)],
        );
        assert!(matches!(open.normalize_time_literal(), Ok(Term::Compound(..))));
    }

    #[test]
    fn variables_in_order() {
        let t = Term::compound(
            "f",
            vec![Term::var("Y", 1), Term::var("X", 0), Term::var("Y", 1)],
        );
        let ids: Vec<u64> = t.variables().iter().map(|v| v.id).collect();
        assert_eq!(ids, vec![1, 0]);
        assert_eq!(t.max_var_id(), Some(1));
    }
}
