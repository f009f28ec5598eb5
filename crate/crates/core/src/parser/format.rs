use std::collections::HashMap;
use std::fmt::Write;

use super::infix_op;
use crate::term::{Clause, Term, Var};

/// Renders a term in script syntax; the output reads back as an equal term
/// up to variable renaming.
pub fn format_term(t: &Term) -> String {
    let names = VarNames::for_terms(std::slice::from_ref(t));
    let mut out = String::new();
    write_term(t, 1200, &names, &mut out);
    out
}

/// Renders a clause with its terminating `.`.
pub fn format_clause(c: &Clause) -> String {
    let mut all = vec![c.head.clone()];
    all.extend(c.body.iter().cloned());
    let names = VarNames::for_terms(&all);
    let mut out = String::new();
    write_term(&c.head, 1199, &names, &mut out);
    if !c.body.is_empty() {
        out.push_str(" :- ");
        for (i, lit) in c.body.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_term(lit, 999, &names, &mut out);
        }
    }
    out.push('.');
    out
}

/// Print names, disambiguated when distinct variables share a name.
struct VarNames {
    names: HashMap<u64, String>,
}

impl VarNames {
    fn for_terms(terms: &[Term]) -> VarNames {
        let mut vars: Vec<Var> = Vec::new();
        let mut counts: HashMap<u64, usize> = HashMap::new();
        for t in terms {
            count_occurrences(t, &mut counts);
            t.collect_vars(&mut vars);
        }
        let mut by_name: HashMap<&str, usize> = HashMap::new();
        for v in &vars {
            *by_name.entry(&v.name).or_default() += 1;
        }
        let names = vars
            .iter()
            .map(|v| {
                let name = if v.is_anonymous() {
                    if counts[&v.id] == 1 {
                        "_".to_string()
                    } else {
                        format!("_G{}", v.id)
                    }
                } else if by_name[&*v.name] > 1 {
                    format!("{}_{}", v.name, v.id)
                } else {
                    v.name.to_string()
                };
                (v.id, name)
            })
            .collect();
        VarNames { names }
    }
}

fn count_occurrences(t: &Term, counts: &mut HashMap<u64, usize>) {
    match t {
        Term::Var(v) => *counts.entry(v.id).or_default() += 1,
        Term::Compound(_, args) => args.iter().for_each(|a| count_occurrences(a, counts)),
        Term::List(items, tail) => {
            items.iter().for_each(|a| count_occurrences(a, counts));
            if let Some(t) = tail {
                count_occurrences(t, counts);
            }
        }
        _ => {}
    }
}

fn is_plain_atom(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_lowercase() => chars.all(|c| c.is_alphanumeric() || c == '_'),
        _ => false,
    }
}

fn write_atom(s: &str, out: &mut String) {
    if is_plain_atom(s) || s == "[]" || s == "!" || s == ";" {
        out.push_str(s);
    } else {
        out.push('\'');
        for c in s.chars() {
            match c {
                '\'' => out.push_str("\\'"),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                c => out.push(c),
            }
        }
        out.push('\'');
    }
}

fn write_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_term(t: &Term, max: u16, names: &VarNames, out: &mut String) {
    match t {
        Term::Atom(_) if t.is_blank() => out.push('_'),
        Term::Atom(a) => write_atom(a, out),
        Term::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Term::Str(s) => write_string(s, out),
        Term::Var(v) => out.push_str(&names.names[&v.id]),
        Term::Time(tp) => {
            let _ = write!(out, "{tp}");
        }
        Term::Span(s) => {
            let _ = write!(out, "{s}");
        }
        Term::List(items, tail) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_term(item, 999, names, out);
            }
            if let Some(tail) = tail {
                out.push('|');
                write_term(tail, 999, names, out);
            }
            out.push(']');
        }
        Term::Compound(f, args) => {
            if args.len() == 2 {
                if let Some((prec, assoc)) = infix_op(f) {
                    use super::Assoc;
                    let (lmax, rmax) = match assoc {
                        Assoc::Xfx => (prec - 1, prec - 1),
                        Assoc::Xfy => (prec - 1, prec),
                        Assoc::Yfx => (prec, prec - 1),
                    };
                    let wrap = prec > max;
                    if wrap {
                        out.push('(');
                    }
                    write_term(&args[0], lmax, names, out);
                    if &**f == "," {
                        out.push_str(", ");
                    } else {
                        let _ = write!(out, " {f} ");
                    }
                    write_term(&args[1], rmax, names, out);
                    if wrap {
                        out.push(')');
                    }
                    return;
                }
            }
            write_atom(f, out);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_term(a, 999, names, out);
            }
            out.push(')');
        }
    }
}
