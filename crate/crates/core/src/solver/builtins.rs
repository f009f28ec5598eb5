use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;

use super::{Answer, CallSite, ConsumePolicy, Ctx, Intent, Payload, SolveError, TimerKey, TxOp};
use crate::kb::ModuleId;
use crate::parser::{flatten_conjunction, format_term};
use crate::term::{Clause, Symbol, Term, TimePoint, TimeSpan};
use crate::updates::{self, Polarity};

pub type NativeFn = fn(&mut Ctx<'_>, &[Term]) -> Result<Vec<Answer>, SolveError>;

/// A host function sees its arguments with current bindings applied and
/// returns, per answer, terms to unify with those arguments.
pub type HostFn = Arc<dyn Fn(&[Term]) -> Result<Vec<HostAnswer>, String> + Send + Sync>;

#[derive(Clone, Debug, Default)]
pub struct HostAnswer {
    pub args: Vec<Term>,
    pub intents: Vec<Intent>,
}

impl HostAnswer {
    pub fn new(args: Vec<Term>) -> HostAnswer {
        HostAnswer {
            args,
            intents: Vec::new(),
        }
    }
}

#[derive(Clone)]
pub enum Builtin {
    Native {
        f: NativeFn,
        /// Library predicates give way to user clauses for the same predicate.
        library: bool,
    },
    Host {
        name: String,
        f: HostFn,
        effectful: bool,
    },
}

impl fmt::Debug for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::Native { library, .. } => write!(f, "Native(library: {library})"),
            Builtin::Host { name, effectful, .. } => write!(f, "Host({name}, effectful: {effectful})"),
        }
    }
}

impl Builtin {
    pub fn is_library(&self) -> bool {
        matches!(self, Builtin::Native { library: true, .. })
    }

    pub(crate) fn call(&self, ctx: &mut Ctx<'_>, goal: &Term) -> Result<Vec<Answer>, SolveError> {
        match self {
            Builtin::Native { f, .. } => f(ctx, goal.args()),
            Builtin::Host { name, f, effectful } => {
                let args: Vec<Term> = goal.args().iter().map(|a| ctx.resolve(a)).collect();
                let answers = f(&args).map_err(|message| SolveError::Host {
                    name: name.clone(),
                    message,
                })?;
                let mut out = Vec::new();
                for a in answers {
                    if !effectful && !a.intents.is_empty() {
                        return Err(SolveError::Host {
                            name: name.clone(),
                            message: "pure host function emitted effects".into(),
                        });
                    }
                    if a.args.len() != args.len() {
                        return Err(SolveError::Host {
                            name: name.clone(),
                            message: format!("returned {} arguments, expected {}", a.args.len(), args.len()),
                        });
                    }
                    let mut subst = Some(ctx.subst.clone());
                    for (x, y) in args.iter().zip(&a.args) {
                        subst = subst.and_then(|s| {
                            crate::term::unify_with(x, y, &s, ctx.solver.options().occurs_check)
                        });
                    }
                    if let Some(s) = subst {
                        out.push(Answer {
                            subst: s,
                            intents: a.intents,
                            next_var: ctx.next_var,
                        });
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Builtins keyed by name and arity.
#[derive(Clone, Debug, Default)]
pub struct Registry {
    entries: HashMap<Symbol, Vec<(usize, Builtin)>>,
}

impl Registry {
    pub fn empty() -> Registry {
        Registry::default()
    }

    /// Control, comparison, arithmetic, clock, update and event builtins.
    pub fn standard() -> Registry {
        let mut r = Registry::empty();
        let natives: &[(&str, usize, NativeFn)] = &[
            ("=", 2, unify_builtin),
            ("\\=", 2, not_unify),
            ("<", 2, |c, a| compare_op(c, a, Ordering::is_lt, true)),
            ("<=", 2, |c, a| compare_op(c, a, Ordering::is_le, true)),
            ("=<", 2, |c, a| compare_op(c, a, Ordering::is_le, true)),
            (">", 2, |c, a| compare_op(c, a, Ordering::is_gt, false)),
            (">=", 2, |c, a| compare_op(c, a, Ordering::is_ge, false)),
            ("is", 2, is),
            ("var", 1, |c, a| Ok(when(c, c.resolve(&a[0]).is_var()))),
            ("nonvar", 1, |c, a| Ok(when(c, !c.resolve(&a[0]).is_var()))),
            ("ground", 1, |c, a| Ok(when(c, c.resolve(&a[0]).is_ground()))),
            ("sysTime", 1, sys_time),
            ("interval", 2, interval),
            ("add", 1, add_file),
            ("add", 2, |c, a| add(c, a, false)),
            ("add", 3, |c, a| add(c, a, true)),
            ("update", 2, |c, a| add(c, a, false)),
            ("update", 3, |c, a| add(c, a, true)),
            ("remove", 1, remove),
            ("transaction", 1, transaction),
            ("partial", 2, partial),
            ("testIntegrity", 0, test_integrity),
            ("testIntegrity", 1, test_integrity_literal),
            ("sendMessage", 2, send_message),
            ("consume", 1, |c, a| consume(c, &a[0], ConsumePolicy::All)),
            ("consume", 2, consume_with_policy),
        ];
        for (name, arity, f) in natives {
            r.register_native(name, *arity, *f);
        }
        crate::events::register_library(&mut r);
        r
    }

    pub fn register_native(&mut self, name: &str, arity: usize, f: NativeFn) {
        self.insert(name, arity, Builtin::Native { f, library: false });
    }

    /// Registers a predicate that user clauses for `name/arity` override.
    pub fn register_library(&mut self, name: &str, arity: usize, f: NativeFn) {
        self.insert(name, arity, Builtin::Native { f, library: true });
    }

    /// Registers a host function. Pure functions may only bind arguments;
    /// effectful ones may also return intents.
    pub fn register_host(&mut self, name: &str, arity: usize, effectful: bool, f: HostFn) {
        self.insert(
            name,
            arity,
            Builtin::Host {
                name: format!("{name}/{arity}"),
                f,
                effectful,
            },
        );
    }

    fn insert(&mut self, name: &str, arity: usize, b: Builtin) {
        let slot = self.entries.entry(Symbol::from(name)).or_default();
        slot.retain(|(n, _)| *n != arity);
        slot.push((arity, b));
    }

    pub fn lookup(&self, name: &str, arity: usize) -> Option<&Builtin> {
        self.entries
            .get(name)?
            .iter()
            .find(|(n, _)| *n == arity)
            .map(|(_, b)| b)
    }

    pub fn contains(&self, name: &str, arity: usize) -> bool {
        self.lookup(name, arity).is_some()
    }

    /// Calls a registered builtin directly.
    pub fn call(&self, ctx: &mut Ctx<'_>, goal: &Term) -> Result<Vec<Answer>, SolveError> {
        let (name, arity) = goal
            .functor()
            .ok_or_else(|| SolveError::Type(format!("{} is not callable", format_term(goal))))?;
        match self.lookup(&name, arity) {
            Some(b) => b.call(ctx, goal),
            None => Err(SolveError::UnknownBuiltin(format!("{name}/{arity}"))),
        }
    }
}

fn when(ctx: &Ctx<'_>, cond: bool) -> Vec<Answer> {
    if cond {
        ctx.succeed()
    } else {
        Vec::new()
    }
}

fn unify_builtin(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    Ok(ctx.unify_answer(&args[0], &args[1]))
}

fn not_unify(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    Ok(when(ctx, ctx.unify(&args[0], &args[1]).is_none()))
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Int(BigInt),
    Time(TimePoint),
    Span(TimeSpan),
}

impl Value {
    fn into_term(self) -> Term {
        match self {
            Value::Int(i) => Term::Int(i),
            Value::Time(t) => Term::Time(t),
            Value::Span(s) => Term::Span(s),
        }
    }
}

fn span_from(secs: i64, expr: &Term) -> Result<Value, SolveError> {
    u64::try_from(secs)
        .map(|s| Value::Span(TimeSpan::from_seconds(s)))
        .map_err(|_| SolveError::Type(format!("negative time span in {}", format_term(expr))))
}

fn eval(t: &Term) -> Result<Value, SolveError> {
    match t {
        Term::Int(i) => Ok(Value::Int(i.clone())),
        Term::Time(tp) => Ok(Value::Time(*tp)),
        Term::Span(s) => Ok(Value::Span(*s)),
        Term::Var(_) => Err(SolveError::Instantiation(format!("unbound variable in arithmetic: {}", format_term(t)))),
        Term::Compound(f, args) if args.len() == 1 && &**f == "-" => match eval(&args[0])? {
            Value::Int(i) => Ok(Value::Int(-i)),
            _ => Err(SolveError::Type(format!("cannot negate {}", format_term(t)))),
        },
        Term::Compound(f, args) if args.len() == 2 => {
            let (a, b) = (eval(&args[0])?, eval(&args[1])?);
            use Value::*;
            match (&**f, a, b) {
                ("+", Int(x), Int(y)) => Ok(Int(x + y)),
                ("-", Int(x), Int(y)) => Ok(Int(x - y)),
                ("*", Int(x), Int(y)) => Ok(Int(x * y)),
                ("/" | "//", Int(_), Int(y)) if y == BigInt::from(0) => {
                    Err(SolveError::Type("division by zero".into()))
                }
                ("/" | "//", Int(x), Int(y)) => Ok(Int(x / y)),
                ("mod", Int(_), Int(y)) if y == BigInt::from(0) => Err(SolveError::Type("division by zero".into())),
                ("mod", Int(x), Int(y)) => Ok(Int(((x % &y) + &y) % y)),
                ("+", Time(x), Span(s)) | ("+", Span(s), Time(x)) => Ok(Time(x.plus_seconds(s.total_seconds()))),
                ("-", Time(x), Span(s)) => Ok(Time(x.plus_seconds(-s.total_seconds()))),
                ("-", Time(x), Time(y)) => span_from(x.seconds_since(y), t),
                ("+", Span(x), Span(y)) => span_from(x.total_seconds() + y.total_seconds(), t),
                ("-", Span(x), Span(y)) => span_from(x.total_seconds() - y.total_seconds(), t),
                ("*", Span(x), Int(n)) | ("*", Int(n), Span(x)) => {
                    let n = i64::try_from(&n).map_err(|_| SolveError::Type("span factor out of range".into()))?;
                    span_from(x.total_seconds() * n, t)
                }
                _ => Err(SolveError::Type(format!("cannot evaluate {}", format_term(t)))),
            }
        }
        _ => Err(SolveError::Type(format!("cannot evaluate {}", format_term(t)))),
    }
}

/// Orders two instants or durations of the same kind.
pub(crate) fn compare_values(a: &Term, b: &Term) -> Result<Ordering, SolveError> {
    match (eval(a)?, eval(b)?) {
        (Value::Int(x), Value::Int(y)) => Ok(x.cmp(&y)),
        (Value::Time(x), Value::Time(y)) => Ok(x.cmp(&y)),
        (Value::Span(x), Value::Span(y)) => Ok(x.total_seconds().cmp(&y.total_seconds())),
        _ => Err(SolveError::Type(format!(
            "cannot compare {} with {}",
            format_term(a),
            format_term(b)
        ))),
    }
}

fn as_interval(t: &Term) -> Option<(Term, Term)> {
    match t.as_proper_list()?.as_slice() {
        [a, b] => Some((a.clone(), b.clone())),
        _ => None,
    }
}

/// Between two intervals `[A,B] op [C,D]` compares B with C for `<`/`<=`
/// and A with D for `>`/`>=`.
fn compare_op(
    ctx: &mut Ctx<'_>,
    args: &[Term],
    accept: fn(Ordering) -> bool,
    forward: bool,
) -> Result<Vec<Answer>, SolveError> {
    let (a, b) = (ctx.resolve(&args[0]), ctx.resolve(&args[1]));
    let (x, y) = match (as_interval(&a), as_interval(&b)) {
        (Some((a0, a1)), Some((b0, b1))) => {
            if forward {
                (a1, b0)
            } else {
                (a0, b1)
            }
        }
        _ => (a, b),
    };
    Ok(when(ctx, accept(compare_values(&x, &y)?)))
}

fn is(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let value = eval(&ctx.resolve(&args[1]))?.into_term();
    Ok(ctx.unify_answer(&args[0], &value))
}

fn sys_time(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let now = Term::Time(ctx.solver.options().clock.now());
    Ok(ctx.unify_answer(&args[0], &now))
}

fn interval(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let period = match ctx.resolve(&args[0]) {
        Term::Span(s) => s,
        Term::Var(_) => return Err(SolveError::Instantiation("interval/2 needs a time span".into())),
        other => return Err(SolveError::Type(format!("{} is not a time span", format_term(&other)))),
    };
    let (now, answers) = match ctx.resolve(&args[1]) {
        Term::Time(t) => (t, ctx.succeed()),
        Term::Var(_) => {
            let t = ctx.solver.options().clock.now();
            (t, ctx.unify_answer(&args[1], &Term::Time(t)))
        }
        other => return Err(SolveError::Type(format!("{} is not a time point", format_term(&other)))),
    };
    let CallSite { clause, index } = ctx.site;
    let key = TimerKey {
        owner: ctx.solver.owner().to_string(),
        clause,
        index,
    };
    Ok(if ctx.solver.timers().check(key, period, now) {
        answers
    } else {
        Vec::new()
    })
}

fn module_id(ctx: &Ctx<'_>, t: &Term) -> Result<ModuleId, SolveError> {
    let t = ctx.resolve(t);
    ModuleId::from_term(&t).ok_or_else(|| SolveError::Instantiation(format!("module id {} is not ground", format_term(&t))))
}

/// Clause terms (`H :- B`, facts, or a list of them) as clauses.
pub(crate) fn terms_to_clauses(t: &Term) -> Result<Vec<Clause>, SolveError> {
    let items = t.as_proper_list().unwrap_or_else(|| vec![t.clone()]);
    items
        .into_iter()
        .map(|item| {
            let (head, body) = match &item {
                Term::Compound(f, args) if &**f == ":-" && args.len() == 2 => {
                    (args[0].clone(), flatten_conjunction(args[1].clone()))
                }
                _ => (item.clone(), Vec::new()),
            };
            match head {
                Term::Atom(_) | Term::Compound(..) => Ok(Clause::new(head, body)),
                other => Err(SolveError::Type(format!("{} cannot head a clause", format_term(&other)))),
            }
        })
        .collect()
}

fn payload(ctx: &Ctx<'_>, t: &Term, bindings: Vec<Term>) -> Result<Payload, SolveError> {
    match ctx.resolve(t) {
        Term::Str(text) => Ok(Payload::Source {
            text: text.to_string(),
            bindings,
        }),
        Term::Var(_) => Err(SolveError::Instantiation("update payload is unbound".into())),
        other if bindings.is_empty() => Ok(Payload::Clauses(terms_to_clauses(&other)?)),
        other => Err(SolveError::Type(format!(
            "placeholder bindings need clause text, got {}",
            format_term(&other)
        ))),
    }
}

fn text_of(t: &Term) -> Option<String> {
    match t {
        Term::Str(s) => Some(s.to_string()),
        Term::Atom(a) => Some(a.to_string()),
        _ => None,
    }
}

fn add_file(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let path = ctx.resolve(&args[0]);
    let path = text_of(&path).ok_or_else(|| SolveError::Type(format!("{} is not a file path", format_term(&path))))?;
    Ok(ctx.effect(vec![Intent::add(ModuleId::new(&path), Payload::File(path))]))
}

fn add(ctx: &mut Ctx<'_>, args: &[Term], with_bindings: bool) -> Result<Vec<Answer>, SolveError> {
    let oid = module_id(ctx, &args[0])?;
    let bindings = if with_bindings {
        let list = ctx.resolve(&args[2]);
        list.as_proper_list()
            .ok_or_else(|| SolveError::Type(format!("{} is not a list of bindings", format_term(&list))))?
    } else {
        Vec::new()
    };
    let payload = payload(ctx, &args[1], bindings)?;
    Ok(ctx.effect(vec![Intent::add(oid, payload)]))
}

fn remove(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let oid = module_id(ctx, &args[0])?;
    Ok(ctx.effect(vec![Intent::remove(oid)]))
}

/// Runs the goal for its first answer and groups the updates it produced.
fn transaction(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let goal = ctx.resolve(&args[0]);
    match ctx.sub_solve(flatten_conjunction(goal)).next() {
        None => Ok(Vec::new()),
        Some(Err(e)) => Err(e),
        Some(Ok(s)) => Ok(vec![Answer {
            subst: s.subst,
            intents: vec![Intent::Transaction(s.intents)],
            next_var: s.next_var,
        }]),
    }
}

/// Proves the goal against a single module's clauses.
fn partial(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let oid = module_id(ctx, &args[1])?;
    let goal = ctx.resolve(&args[0]);
    let scoped = ctx.solver.clone().with_scope(Some(oid));
    scoped
        .sub_solve(flatten_conjunction(goal), ctx.subst.clone(), ctx.next_var, ctx.depth + 1)
        .map(|r| {
            r.map(|s| Answer {
                subst: s.subst,
                intents: s.intents,
                next_var: s.next_var,
            })
        })
        .collect()
}

fn test_integrity(ctx: &mut Ctx<'_>, _args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let violations = updates::test_integrity(ctx.solver)?;
    Ok(when(ctx, violations.is_empty()))
}

fn test_integrity_literal(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let lit = ctx.resolve(&args[0]);
    let (lit, polarity) = match &lit {
        Term::Compound(f, a) if &**f == "remove" && a.len() == 1 => (a[0].clone(), Polarity::Remove),
        _ => (lit.clone(), Polarity::Add),
    };
    if !lit.is_ground() {
        return Err(SolveError::Instantiation(format!(
            "testIntegrity/1 needs a ground literal, got {}",
            format_term(&lit)
        )));
    }
    let check = updates::test_integrity_hypothetical(ctx.solver, &lit, polarity)?;
    Ok(when(ctx, check.is_empty()))
}

fn send_message(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let recipient = ctx.resolve(&args[0]);
    let message = ctx.resolve(&args[1]);
    Ok(ctx.effect(vec![Intent::Send { recipient, message }]))
}

/// `consume(eis(K))` addresses a whole sequence; any other term addresses
/// the occurrences of that event in its type's sequence.
fn consume(ctx: &mut Ctx<'_>, target: &Term, policy: ConsumePolicy) -> Result<Vec<Answer>, SolveError> {
    let target = ctx.resolve(target);
    let op = match &target {
        Term::Var(_) => return Err(SolveError::Instantiation("consume/1 needs an event or eis key".into())),
        Term::Compound(f, a) if &**f == "eis" && a.len() == 1 => TxOp::Consume {
            key: module_id(ctx, &target)?,
            policy,
            pattern: None,
        },
        event => {
            let time = ctx.fresh_var("_");
            TxOp::Consume {
                key: ModuleId::eis_for(event),
                policy,
                pattern: Some(Term::compound("occurs", vec![event.clone(), time])),
            }
        }
    };
    Ok(ctx.effect(vec![Intent::Op(op)]))
}

fn consume_with_policy(ctx: &mut Ctx<'_>, args: &[Term]) -> Result<Vec<Answer>, SolveError> {
    let policy = ctx.resolve(&args[1]);
    let policy = policy
        .as_atom()
        .and_then(ConsumePolicy::from_name)
        .ok_or_else(|| SolveError::Type(format!("unknown consumption policy {}", format_term(&policy))))?;
    consume(ctx, &args[0], policy)
}
