use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use super::{Term, Var};

/// Source location (1-based line and column).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

/// `head :- body`, or a fact when the body is empty.
///
/// Variables are numbered `0..var_count` in order of first occurrence.
/// Equality ignores the source span.
#[derive(Clone, Debug)]
pub struct Clause {
    pub head: Term,
    pub body: Vec<Term>,
    pub span: Span,
    var_count: u64,
}

impl Clause {
    pub fn new(head: Term, body: Vec<Term>) -> Clause {
        let mut vars: Vec<Var> = Vec::new();
        head.collect_vars(&mut vars);
        for lit in &body {
            lit.collect_vars(&mut vars);
        }
        let numbering: HashMap<u64, u64> = vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v.id, i as u64))
            .collect();
        let mut renumber = |v: &Var| Term::Var(Var::new(v.name.clone(), numbering[&v.id]));
        Clause {
            head: head.map_vars(&mut renumber),
            body: body.iter().map(|l| l.map_vars(&mut renumber)).collect(),
            span: Span::default(),
            var_count: vars.len() as u64,
        }
    }

    pub fn fact(head: Term) -> Clause {
        Clause::new(head, Vec::new())
    }

    pub fn with_span(mut self, span: Span) -> Clause {
        self.span = span;
        self
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub fn var_count(&self) -> u64 {
        self.var_count
    }

    pub fn key(&self) -> Option<(super::Symbol, usize)> {
        self.head.functor()
    }

    /// Copy with every variable id shifted by `offset`.
    pub fn instantiate(&self, offset: u64) -> (Term, Vec<Term>) {
        if self.var_count == 0 {
            return (self.head.clone(), self.body.clone());
        }
        (
            self.head.offset_vars(offset),
            self.body.iter().map(|l| l.offset_vars(offset)).collect(),
        )
    }

    /// Copy whose variables all have ids greater than `fresh_counter`.
    pub fn rename_apart(&self, fresh_counter: u64) -> Clause {
        let (head, body) = self.instantiate(fresh_counter + 1);
        Clause {
            head,
            body,
            span: self.span,
            var_count: self.var_count,
        }
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut vars = Vec::new();
        self.head.collect_vars(&mut vars);
        for lit in &self.body {
            lit.collect_vars(&mut vars);
        }
        vars
    }

    /// The clause as a single term: `head` or `':-'(head, body)`.
    pub fn to_term(&self) -> Term {
        match self.body.split_last() {
            None => self.head.clone(),
            Some((last, init)) => {
                let body = init
                    .iter()
                    .rev()
                    .fold(last.clone(), |acc, l| Term::compound(",", vec![l.clone(), acc]));
                Term::compound(":-", vec![self.head.clone(), body])
            }
        }
    }
}

impl PartialEq for Clause {
    fn eq(&self, other: &Self) -> bool {
        self.head == other.head && self.body == other.body
    }
}

impl Eq for Clause {}

impl Hash for Clause {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.head.hash(state);
        self.body.hash(state);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule() -> Clause {
        // p(X) :- q(X)
        Clause::new(
            Term::compound("p", vec![Term::var("X", 42)]),
            vec![Term::compound("q", vec![Term::var("X", 42)])],
        )
    }

    #[test]
    fn construction_normalizes_variable_ids() {
        let c = rule();
        assert_eq!(c.var_count(), 1);
        assert_eq!(c.head.max_var_id(), Some(0));
    }

    #[test]
    fn rename_uses_fresh_ids() {
        let c = rule().rename_apart(100);
        assert_eq!(c.head, Term::compound("p", vec![Term::var("X", 101)]));
        assert_eq!(c.body[0], Term::compound("q", vec![Term::var("X", 101)]));
    }

    #[test]
    fn renaming_a_ground_clause_is_identity() {
        let c = Clause::fact(Term::compound("f", vec![Term::int(1)]));
        assert_eq!(c.rename_apart(7), c);
    }

    #[test]
    fn successive_renames_share_no_ids() {
        let c = rule();
        let first = c.rename_apart(100);
        let second = c.rename_apart(100 + c.var_count());
        let ids = |cl: &Clause| cl.variables().iter().map(|v| v.id).collect::<Vec<_>>();
        assert!(ids(&first).iter().all(|i| !ids(&second).contains(i)));
    }
}
