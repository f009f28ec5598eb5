use std::collections::HashMap;
use std::fmt;

use super::{Term, Var};

/// A finite map from variables to terms, stored in triangular form.
///
/// Bindings may refer to other bound variables; [`Substitution::apply`]
/// resolves them to a fixed point, so applying twice equals applying once.
/// Cloning is O(1).
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Substitution {
    bindings: imbl::HashMap<u64, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn get(&self, var: &Var) -> Option<&Term> {
        self.bindings.get(&var.id)
    }

    /// Adds a binding without any checks. The variable must be unbound.
    pub fn bind(&mut self, var: &Var, term: Term) {
        self.bindings.insert(var.id, term);
    }

    pub fn with(mut self, var: &Var, term: Term) -> Self {
        self.bind(var, term);
        self
    }

    pub fn bound_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.bindings.keys().copied()
    }

    /// Follows variable bindings at the top of `t` only.
    pub fn walk<'a>(&'a self, mut t: &'a Term) -> &'a Term {
        while let Term::Var(v) = t {
            match self.bindings.get(&v.id) {
                Some(next) => t = next,
                None => break,
            }
        }
        t
    }

    /// Replaces every bound variable in `t`, transitively.
    pub fn apply(&self, t: &Term) -> Term {
        if self.bindings.is_empty() {
            return t.clone();
        }
        match self.walk(t) {
            Term::Var(v) => Term::Var(v.clone()),
            Term::Compound(f, args) => Term::Compound(
                f.clone(),
                args.iter().map(|a| self.apply(a)).collect::<Vec<_>>().into(),
            ),
            Term::List(items, tail) => Term::list(
                items.iter().map(|a| self.apply(a)).collect(),
                tail.as_ref().map(|t| self.apply(t)),
            ),
            other => other.clone(),
        }
    }

    /// Fully resolved value of `var`, if bound.
    pub fn resolve(&self, var: &Var) -> Option<Term> {
        self.get(var).map(|t| self.apply(t))
    }

    /// An equivalent substitution in which no binding mentions a bound variable.
    pub fn normalized(&self) -> Substitution {
        let mut out = Substitution::new();
        for (id, t) in self.bindings.iter() {
            out.bindings.insert(*id, self.apply(t));
        }
        out
    }

    /// Keeps only the listed variables (fully resolved).
    pub fn restrict(&self, vars: &[Var]) -> Substitution {
        let mut out = Substitution::new();
        for v in vars {
            if let Some(t) = self.resolve(v) {
                if t != Term::Var(v.clone()) {
                    out.bind(v, t);
                }
            }
        }
        out
    }

    fn occurs(&self, var: &Var, t: &Term) -> bool {
        match self.walk(t) {
            Term::Var(v) => v == var,
            Term::Compound(_, args) => args.iter().any(|a| self.occurs(var, a)),
            Term::List(items, tail) => {
                items.iter().any(|a| self.occurs(var, a))
                    || tail.as_ref().is_some_and(|t| self.occurs(var, t))
            }
            _ => false,
        }
    }
}

impl fmt::Debug for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut entries: Vec<_> = self.bindings.iter().collect();
        entries.sort_by_key(|(id, _)| **id);
        f.debug_map()
            .entries(entries.into_iter().map(|(id, t)| (format!("_{id}"), t.to_string())))
            .finish()
    }
}

/// Most general unifier of `a` and `b` extending `s`, with occurs-check.
pub fn unify(a: &Term, b: &Term, s: &Substitution) -> Option<Substitution> {
    unify_with(a, b, s, true)
}

pub fn unify_with(a: &Term, b: &Term, s: &Substitution, occurs_check: bool) -> Option<Substitution> {
    let mut s = s.clone();
    let mut pending: Vec<(Term, Term)> = vec![(a.clone(), b.clone())];
    while let Some((x, y)) = pending.pop() {
        let x = s.walk(&x).clone();
        let y = s.walk(&y).clone();
        match (&x, &y) {
            (Term::Var(v), Term::Var(w)) if v == w => {}
            (Term::Var(v), _) => {
                if occurs_check && s.occurs(v, &y) {
                    return None;
                }
                s.bind(v, y);
            }
            (_, Term::Var(w)) => {
                if occurs_check && s.occurs(w, &x) {
                    return None;
                }
                s.bind(w, x);
            }
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                if f != g || xs.len() != ys.len() {
                    return None;
                }
                pending.extend(xs.iter().cloned().zip(ys.iter().cloned()));
            }
            (Term::List(xs, xt), Term::List(ys, yt)) => {
                let n = xs.len().min(ys.len());
                pending.extend(xs[..n].iter().cloned().zip(ys[..n].iter().cloned()));
                let rest_x = Term::list(xs[n..].to_vec(), xt.as_deref().cloned());
                let rest_y = Term::list(ys[n..].to_vec(), yt.as_deref().cloned());
                pending.push((rest_x, rest_y));
            }
            (Term::Time(_) | Term::Span(_), Term::Compound(..)) => {
                pending.push((x.time_as_compound()?, y));
            }
            (Term::Compound(..), Term::Time(_) | Term::Span(_)) => {
                pending.push((x, y.time_as_compound()?));
            }
            _ => {
                if x != y {
                    return None;
                }
            }
        }
    }
    Some(s)
}

/// True when `a` and `b` are equal up to a consistent renaming of variables.
pub fn is_variant(a: &Term, b: &Term) -> bool {
    fn go(a: &Term, b: &Term, fwd: &mut HashMap<u64, u64>, back: &mut HashMap<u64, u64>) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                let f = *fwd.entry(x.id).or_insert(y.id);
                let r = *back.entry(y.id).or_insert(x.id);
                f == y.id && r == x.id
            }
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                f == g && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(x, y)| go(x, y, fwd, back))
            }
            (Term::List(xs, xt), Term::List(ys, yt)) => {
                xs.len() == ys.len()
                    && xs.iter().zip(ys.iter()).all(|(x, y)| go(x, y, fwd, back))
                    && match (xt, yt) {
                        (None, None) => true,
                        (Some(x), Some(y)) => go(x, y, fwd, back),
                        _ => false,
                    }
            }
            (Term::Var(_), _) | (_, Term::Var(_)) => false,
            _ => a == b,
        }
    }
    go(a, b, &mut HashMap::new(), &mut HashMap::new())
}
