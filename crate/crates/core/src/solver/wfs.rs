//! Well-founded model of function-free normal programs by alternating
//! fixpoint. Independent of the resolution engine; used to check it.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use super::Registry;
use crate::parser::format_term;
use crate::term::{Clause, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Undefined,
}

/// Partition of the atoms occurring in the grounded program.
#[derive(Clone, Debug, Default)]
pub struct WfsModel {
    pub true_atoms: HashSet<Term>,
    pub false_atoms: HashSet<Term>,
    pub undefined_atoms: HashSet<Term>,
}

impl WfsModel {
    /// Truth of a ground atom; atoms outside the program are false.
    pub fn truth(&self, atom: &Term) -> Truth {
        if self.true_atoms.contains(atom) {
            Truth::True
        } else if self.undefined_atoms.contains(atom) {
            Truth::Undefined
        } else {
            Truth::False
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WfsError {
    #[error("not a function-free program: {0}")]
    NonDatalog(String),
    #[error("builtins are not supported: {0}")]
    Builtin(String),
    #[error("grounding too large: {0}")]
    TooLarge(String),
}

const MAX_GROUND_RULES: usize = 1_000_000;

struct GroundRule {
    head: usize,
    pos: Vec<usize>,
    neg: Vec<usize>,
}

pub fn wfs_model(program: &[Clause]) -> Result<WfsModel, WfsError> {
    let registry = Registry::standard();
    let mut universe: Vec<Term> = Vec::new();
    let mut seen = HashSet::new();
    for c in program {
        check_atom(&c.head, &registry)?;
        collect_constants(&c.head, &mut universe, &mut seen);
        for lit in &c.body {
            let (atom, _) = split_literal(lit);
            check_atom(atom, &registry)?;
            collect_constants(atom, &mut universe, &mut seen);
        }
    }

    let mut atoms: Vec<Term> = Vec::new();
    let mut index: HashMap<Term, usize> = HashMap::new();
    let mut intern = |t: Term| -> usize {
        *index.entry(t.clone()).or_insert_with(|| {
            atoms.push(t);
            atoms.len() - 1
        })
    };
    let mut rules = Vec::new();
    for c in program {
        let vars = c.variables();
        let mut ids: Vec<u64> = vars.iter().map(|v| v.id).collect();
        ids.sort_unstable();
        ids.dedup();
        let combos = universe.len().checked_pow(ids.len() as u32).unwrap_or(usize::MAX);
        if ids.is_empty() {
            // nothing to instantiate
        } else if universe.is_empty() {
            continue;
        } else if combos.saturating_add(rules.len()) > MAX_GROUND_RULES {
            return Err(WfsError::TooLarge(format!("{} ground instances", combos)));
        }
        let mut choice = vec![0usize; ids.len()];
        loop {
            let bindings: HashMap<u64, Term> = ids
                .iter()
                .zip(&choice)
                .map(|(id, &k)| (*id, universe[k].clone()))
                .collect();
            let head = intern(c.head.substitute(&bindings));
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for lit in &c.body {
                let (atom, positive) = split_literal(lit);
                let a = intern(atom.substitute(&bindings));
                if positive {
                    pos.push(a);
                } else {
                    neg.push(a);
                }
            }
            rules.push(GroundRule { head, pos, neg });
            // advance the odometer
            let mut i = 0;
            while i < choice.len() {
                choice[i] += 1;
                if choice[i] < universe.len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == choice.len() {
                break;
            }
        }
    }

    let n = atoms.len();
    let gamma = |assumed: &[bool]| -> Vec<bool> {
        let mut model = vec![false; n];
        let mut changed = true;
        while changed {
            changed = false;
            for r in &rules {
                if !model[r.head]
                    && r.pos.iter().all(|&a| model[a])
                    && r.neg.iter().all(|&a| !assumed[a])
                {
                    model[r.head] = true;
                    changed = true;
                }
            }
        }
        model
    };
    let mut truth = vec![false; n];
    loop {
        let next = gamma(&gamma(&truth));
        if next == truth {
            break;
        }
        truth = next;
    }
    let possible = gamma(&truth);

    let mut model = WfsModel::default();
    for (i, atom) in atoms.into_iter().enumerate() {
        if truth[i] {
            model.true_atoms.insert(atom);
        } else if possible[i] {
            model.undefined_atoms.insert(atom);
        } else {
            model.false_atoms.insert(atom);
        }
    }
    Ok(model)
}

fn split_literal(lit: &Term) -> (&Term, bool) {
    match lit {
        Term::Compound(f, args) if args.len() == 1 && (&**f == "not" || &**f == "\\+") => (&args[0], false),
        other => (other, true),
    }
}

fn check_atom(t: &Term, registry: &Registry) -> Result<(), WfsError> {
    let (name, arity) = match t {
        Term::Atom(a) => (a.clone(), 0),
        Term::Compound(f, args) => (f.clone(), args.len()),
        other => return Err(WfsError::NonDatalog(format!("{} is not an atom", format_term(other)))),
    };
    if registry.contains(&name, arity) || matches!(&*name, "," | ";" | "!" | "call" | "findall" | "true" | "fail") {
        return Err(WfsError::Builtin(format!("{name}/{arity}")));
    }
    for a in t.args() {
        if !matches!(a, Term::Var(_)) && !a.is_ground() {
            return Err(WfsError::NonDatalog(format!(
                "argument {} contains variables under a function symbol",
                format_term(a)
            )));
        }
    }
    Ok(())
}

fn collect_constants(t: &Term, out: &mut Vec<Term>, seen: &mut HashSet<Term>) {
    for a in t.args() {
        if a.is_ground() && seen.insert(a.clone()) {
            out.push(a.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_program, parse_term};

    fn model(text: &str) -> WfsModel {
        wfs_model(&parse_program(text).unwrap().clauses).unwrap()
    }

    fn atom(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    #[test]
    fn tautology_is_false() {
        let m = model("p :- p.");
        assert!(m.false_atoms.contains(&atom("p")));
        assert!(m.true_atoms.is_empty() && m.undefined_atoms.is_empty());
    }

    #[test]
    fn even_loop_through_negation_is_undefined() {
        let m = model("p :- not(q). q :- not(p).");
        assert_eq!(m.truth(&atom("p")), Truth::Undefined);
        assert_eq!(m.truth(&atom("q")), Truth::Undefined);
    }

    #[test]
    fn definite_program() {
        let m = model("f(1). r(1) :- f(1).");
        assert_eq!(m.truth(&atom("f(1)")), Truth::True);
        assert_eq!(m.truth(&atom("r(1)")), Truth::True);
    }

    #[test]
    fn stratified_negation() {
        let m = model("a :- not(b). b :- c. d :- not(a).");
        assert_eq!(m.truth(&atom("a")), Truth::True);
        assert_eq!(m.truth(&atom("b")), Truth::False);
        assert_eq!(m.truth(&atom("d")), Truth::False);
    }

    #[test]
    fn non_ground_rules_are_grounded_over_constants() {
        let m = model("e(1,2). e(2,3). path(X,Y) :- e(X,Y). path(X,Z) :- e(X,Y), path(Y,Z).");
        assert_eq!(m.truth(&atom("path(1,3)")), Truth::True);
        assert_eq!(m.truth(&atom("path(3,1)")), Truth::False);
    }

    #[test]
    fn rejects_functions_and_builtins() {
        let p = parse_program("p(f(X)) :- q(X).").unwrap();
        assert!(matches!(wfs_model(&p.clauses), Err(WfsError::NonDatalog(_))));
        let p = parse_program("p(X) :- X < 3.").unwrap();
        assert!(matches!(wfs_model(&p.clauses), Err(WfsError::Builtin(_))));
    }
}
