//! Translation of documents into ECA-LP scripts.

use std::collections::HashMap;

use ecalp::parser::{format_term, parse_program};
use ecalp::term::Term;

use crate::ast::{Kind, RulemlNode};
use crate::grammar::validate;
use crate::RulemlError;

/// ECA-LP source plus notes on constructs mapped with caveats.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TranslationResult {
    pub program: String,
    pub warnings: Vec<String>,
}

/// Translates a rule base, a single rule or a single clause-like node.
pub fn translate_to_ecalp(node: &RulemlNode) -> Result<TranslationResult, RulemlError> {
    validate(node)?;
    let mut tr = Translator::default();
    let mut program = String::new();
    let items: Vec<&RulemlNode> = match node.kind {
        Kind::RuleBase => node.body().collect(),
        _ => vec![node],
    };
    for item in items {
        tr.vars.clear();
        let clause = tr.clause(item)?;
        program.push_str(&format_term(&clause));
        program.push_str(".\n");
    }
    parse_program(&program).map_err(|e| RulemlError::Translation(format!("generated text does not parse: {e}")))?;
    Ok(TranslationResult {
        program,
        warnings: tr.warnings,
    })
}

#[derive(Default)]
struct Translator {
    warnings: Vec<String>,
    vars: HashMap<String, Term>,
    next_var: u64,
    updates: usize,
}

fn conj(mut goals: Vec<Term>, op: &str) -> Term {
    match goals.pop() {
        None => Term::atom("true"),
        Some(last) => goals.into_iter().rev().fold(last, |acc, g| Term::compound(op, vec![g, acc])),
    }
}

fn unsupported(node: &RulemlNode, role: &str) -> RulemlError {
    RulemlError::Translation(format!("<{}> has no translation as {role}", node.kind))
}

impl Translator {
    fn fresh(&mut self, name: &str) -> Term {
        self.next_var += 1;
        Term::var(name, self.next_var)
    }

    fn var(&mut self, text: &str) -> Term {
        if text.is_empty() {
            return self.fresh("_");
        }
        let name = match text.chars().next() {
            Some(c) if c.is_uppercase() || c == '_' => text.to_string(),
            _ => format!("V{text}"),
        };
        if let Some(v) = self.vars.get(&name) {
            return v.clone();
        }
        let v = self.fresh(&name);
        self.vars.insert(name, v.clone());
        v
    }

    fn warn(&mut self, msg: String) {
        if !self.warnings.contains(&msg) {
            self.warnings.push(msg);
        }
    }

    fn no_runtime(&mut self, kind: Kind) {
        self.warn(format!("<{kind}> is translated but has no execution support"));
    }

    /// A clause of the program.
    fn clause(&mut self, node: &RulemlNode) -> Result<Term, RulemlError> {
        match node.kind {
            Kind::Eca => self.eca(node),
            Kind::Implies => {
                let head = self.term(only(node.child(Kind::Head).expect("validated")))?;
                let body = self.goal(only(node.child(Kind::Body).expect("validated")))?;
                Ok(Term::compound(":-", vec![head, body]))
            }
            Kind::Neg => self.goal(node),
            _ => self.term(node),
        }
    }

    fn eca(&mut self, node: &RulemlNode) -> Result<Term, RulemlError> {
        let mut parts = Vec::new();
        for kind in [Kind::Time, Kind::Event, Kind::Condition, Kind::Action, Kind::Postcondition, Kind::Else] {
            let part = match node.child(kind) {
                None => Term::blank(),
                Some(p) => {
                    let inner = only(p);
                    match kind {
                        Kind::Event => self.event_part(inner)?,
                        Kind::Action | Kind::Else => self.action(inner)?,
                        _ => self.goal(inner)?,
                    }
                }
            };
            parts.push(part);
        }
        Ok(Term::compound("eca", parts))
    }

    fn event_part(&mut self, node: &RulemlNode) -> Result<Term, RulemlError> {
        if node.kind.is_operator() {
            let expr = self.expr(node)?;
            let t = self.fresh("_");
            return Ok(Term::compound("event", vec![expr, t]));
        }
        self.goal(node)
    }

    fn action(&mut self, node: &RulemlNode) -> Result<Term, RulemlError> {
        let items: Vec<&RulemlNode> = node.body().collect();
        match node.kind {
            Kind::Event | Kind::Action => self.action(only(node)),
            Kind::Sequence | Kind::Conjunction | Kind::Concurrent | Kind::And => {
                if node.kind == Kind::Concurrent {
                    self.warn("<Concurrent> actions run one after another".into());
                }
                let goals = items.into_iter().map(|c| self.action(c)).collect::<Result<_, _>>()?;
                Ok(conj(goals, ","))
            }
            Kind::Or | Kind::Xor => {
                if node.kind == Kind::Xor {
                    self.warn("<Xor> actions take the first alternative that succeeds".into());
                }
                let goals = items.into_iter().map(|c| self.action(c)).collect::<Result<_, _>>()?;
                Ok(conj(goals, ";"))
            }
            Kind::Not | Kind::Any | Kind::Aperiodic | Kind::Periodic => {
                self.warn(format!("<{}> in an action is read as an event query", node.kind));
                self.event_part(node)
            }
            _ => self.goal(node),
        }
    }

    fn goal(&mut self, node: &RulemlNode) -> Result<Term, RulemlError> {
        match node.kind {
            Kind::Naf => {
                let g = self.goal(only(node))?;
                Ok(Term::compound("not", vec![g]))
            }
            Kind::Neg => {
                let g = self.goal(only(node))?;
                Ok(Term::compound("neg", vec![g]))
            }
            Kind::Weak | Kind::Strong => self.goal(only(node)),
            Kind::And => {
                let goals = node.body().map(|c| self.goal(c)).collect::<Result<_, _>>()?;
                Ok(conj(goals, ","))
            }
            Kind::Assert => self.assert(node),
            Kind::Retract => {
                let oid = self.term(only(node.child(Kind::Oid).expect("validated")))?;
                Ok(Term::compound("remove", vec![oid]))
            }
            Kind::Implies | Kind::Eca => Err(unsupported(node, "a goal")),
            _ => self.term(node),
        }
    }

    fn assert(&mut self, node: &RulemlNode) -> Result<Term, RulemlError> {
        let oid = match node.child(Kind::Oid) {
            Some(o) => self.term(only(o))?,
            None => {
                self.updates += 1;
                Term::atom(&format!("update{}", self.updates))
            }
        };
        let holder = node.body().next().expect("validated");
        let outer = std::mem::take(&mut self.vars);
        let mut placeholders: Vec<(String, Term)> = Vec::new();
        let mut text = String::new();
        for item in holder.body() {
            self.vars.clear();
            // variables of the enclosing rule become `_N` placeholders
            let mut names = Vec::new();
            item.walk(&mut |n| {
                if n.kind == Kind::Var && !n.text.is_empty() {
                    names.push(n.text.clone());
                }
            });
            for name in names {
                let key = match name.chars().next() {
                    Some(c) if c.is_uppercase() || c == '_' => name.clone(),
                    _ => format!("V{name}"),
                };
                if let Some(bound) = outer.get(&key) {
                    let index = match placeholders.iter().position(|(k, _)| *k == key) {
                        Some(i) => i,
                        None => {
                            placeholders.push((key.clone(), bound.clone()));
                            placeholders.len() - 1
                        }
                    };
                    let placeholder = self.fresh(&format!("_{index}"));
                    self.vars.insert(key, placeholder);
                }
            }
            let clause = self.clause(item)?;
            if !text.is_empty() {
                text.push(' ');
            }
            text.push_str(&format_term(&clause));
            text.push('.');
        }
        self.vars = outer;
        if placeholders.is_empty() {
            Ok(Term::compound("add", vec![oid, Term::string(&text)]))
        } else {
            let bindings = Term::proper_list(placeholders.into_iter().map(|(_, v)| v).collect());
            Ok(Term::compound("add", vec![oid, Term::string(&text), bindings]))
        }
    }

    /// Event algebra expressions.
    fn expr(&mut self, node: &RulemlNode) -> Result<Term, RulemlError> {
        let items: Vec<&RulemlNode> = node.body().collect();
        let functor = match node.kind {
            Kind::Sequence => "sequence",
            Kind::Or => "or",
            Kind::Xor => "xor",
            Kind::Conjunction => "conjunction",
            Kind::Concurrent => "concurrent",
            Kind::Not | Kind::Aperiodic => {
                let functor = if node.kind == Kind::Not { "not" } else { "aperiodic" };
                let e = self.expr(items[0])?;
                let w = self.term(items[1])?;
                return Ok(Term::compound(functor, vec![e, w]));
            }
            Kind::Any => {
                let n = self.term(items[0])?;
                let es = items[1..].iter().map(|c| self.expr(c)).collect::<Result<_, _>>()?;
                return Ok(Term::compound("any", vec![n, Term::proper_list(es)]));
            }
            Kind::Periodic => {
                let p = self.term(items[0])?;
                let w = self.term(items[1])?;
                return Ok(Term::compound("periodic", vec![p, w]));
            }
            Kind::Event | Kind::Action => return self.expr(only(node)),
            _ => return self.term(node),
        };
        let es = items.into_iter().map(|c| self.expr(c)).collect::<Result<_, _>>()?;
        Ok(Term::compound(functor, es))
    }

    /// Data terms, atoms and event calculus literals.
    fn term(&mut self, node: &RulemlNode) -> Result<Term, RulemlError> {
        let args: Vec<&RulemlNode> = node.body().collect();
        let pred = |tr: &mut Self, name: &str, args: &[&RulemlNode]| -> Result<Term, RulemlError> {
            let ts = args.iter().map(|a| tr.term(a)).collect::<Result<_, _>>()?;
            Ok(Term::compound(name, ts))
        };
        match node.kind {
            Kind::Ind => Ok(match node.text.parse::<i64>() {
                Ok(n) => Term::int(n),
                Err(_) => Term::atom(&node.text),
            }),
            Kind::Data => Ok(match node.text.parse::<i64>() {
                Ok(n) => Term::int(n),
                Err(_) => Term::string(&node.text),
            }),
            Kind::Var => Ok(self.var(&node.text)),
            Kind::Skolem => Ok(Term::compound("skolem", vec![Term::atom(&node.text)])),
            Kind::Plex => {
                let items = args.iter().map(|a| self.term(a)).collect::<Result<_, _>>()?;
                Ok(Term::proper_list(items))
            }
            Kind::Slot => {
                self.warn("slotted arguments are passed positionally as slot(Name, Value)".into());
                pred(self, "slot", &args)
            }
            Kind::Atom | Kind::Cterm => self.structure(&args),
            Kind::Equal => pred(self, "=", &args),
            Kind::Interval => {
                let ends = args.iter().map(|a| self.expr(a)).collect::<Result<_, _>>()?;
                Ok(Term::proper_list(ends))
            }
            Kind::Arg | Kind::Event | Kind::Time | Kind::Fluent | Kind::Parameter | Kind::IntervalRole => {
                self.term(only(node))
            }
            Kind::Occurs | Kind::Terminates => {
                let name = if node.kind == Kind::Occurs { "occurs" } else { "terminates" };
                let first = self.expr(args[0])?;
                let mut ts = vec![first];
                for a in &args[1..] {
                    ts.push(self.term(a)?);
                }
                Ok(Term::compound(name, ts))
            }
            Kind::HoldsInterval => {
                let subject = self.expr(args[0])?;
                let window = self.term(args[1])?;
                // a complex event is queried through the algebra
                let name = if only_operator(args[0]) { "event" } else { "holdsInterval" };
                Ok(Term::compound(name, vec![subject, window]))
            }
            Kind::Happens | Kind::Planned | Kind::Initially | Kind::Initiates | Kind::HoldsAt | Kind::ValueAt => {
                self.no_runtime(node.kind);
                let name = match node.kind {
                    Kind::Happens => "happens",
                    Kind::Planned => "planned",
                    Kind::Initially => "initially",
                    Kind::Initiates => "initiates",
                    Kind::HoldsAt => "holdsAt",
                    _ => "valueAt",
                };
                pred(self, name, &args)
            }
            k if k.is_operator() => self.expr(node),
            _ => Err(unsupported(node, "a term")),
        }
    }

    /// `Atom` and `Cterm`: a functor position followed by arguments.
    fn structure(&mut self, items: &[&RulemlNode]) -> Result<Term, RulemlError> {
        let head = match items[0].kind {
            Kind::Op => only(items[0]),
            _ => items[0],
        };
        let functor = match head.kind {
            Kind::Attachment => {
                let parts: Vec<&RulemlNode> = head.body().collect();
                let method = parts[1].text.clone();
                let target = match parts[0].kind {
                    Kind::Cterm => "a computed object".to_string(),
                    _ => parts[0].text.clone(),
                };
                self.warn(format!("attachment {method} on {target} becomes a call of host function {method}"));
                method
            }
            _ => head.text.clone(),
        };
        let args = items[1..].iter().map(|a| self.term(a)).collect::<Result<Vec<_>, _>>()?;
        Ok(if args.is_empty() {
            Term::atom(&functor)
        } else {
            Term::compound(&functor, args)
        })
    }
}

fn only_operator(node: &RulemlNode) -> bool {
    match node.kind {
        Kind::IntervalRole | Kind::Event => only_operator(only(node)),
        k => k.is_operator(),
    }
}

/// The single non-oid child of a wrapper.
fn only(node: &RulemlNode) -> &RulemlNode {
    node.body().next().expect("validated wrapper has content")
}
