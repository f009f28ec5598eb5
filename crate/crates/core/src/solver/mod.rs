//! SLDNF resolution over a knowledge-state snapshot.
//!
//! Goals are selected leftmost-first and clauses are tried in textual order
//! with chronological backtracking. `!` prunes the alternatives of the
//! enclosing clause, `not/1` is negation as finite failure (the literal must
//! be ground when selected), and an ancestor check fails any goal that is a
//! variant of a goal it was derived from. Effectful builtins never touch the
//! snapshot; they leave [`Intent`]s on the answer.

mod builtins;
mod clock;
mod intent;
mod wfs;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::kb::{ClauseRef, KnowledgeState, ModuleId};
use crate::parser::{flatten_conjunction, format_term, Query};
use crate::term::{is_variant, unify_with, Substitution, Term, Var};

pub use builtins::{Builtin, HostAnswer, HostFn, NativeFn, Registry};
pub(crate) use builtins::compare_values;
pub use clock::{Clock, IntervalTimers, RealClock, SimulatedClock, TimerKey};
pub use intent::{ConsumePolicy, Intent, Payload, TxOp};
pub use wfs::{wfs_model, Truth, WfsError, WfsModel};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("floundering: negated literal {0} is not ground when selected")]
    Floundering(String),
    #[error("depth limit {limit} exceeded at {goal}")]
    DepthExceeded { limit: usize, goal: String },
    #[error("instantiation error: {0}")]
    Instantiation(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("unknown builtin {0}")]
    UnknownBuiltin(String),
    #[error("loop through negation at {0}")]
    NegativeLoop(String),
    #[error("host function {name} failed: {message}")]
    Host { name: String, message: String },
}

#[derive(Clone)]
pub struct SolverOptions {
    pub max_depth: usize,
    pub loop_check: bool,
    pub occurs_check: bool,
    /// Restricts clause lookup to one module.
    pub scope: Option<ModuleId>,
    pub clock: Arc<dyn Clock>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_depth: 10_000,
            loop_check: true,
            occurs_check: true,
            scope: None,
            clock: Arc::new(RealClock),
        }
    }
}

impl fmt::Debug for SolverOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverOptions")
            .field("max_depth", &self.max_depth)
            .field("loop_check", &self.loop_check)
            .field("occurs_check", &self.occurs_check)
            .field("scope", &self.scope)
            .finish()
    }
}

/// Position of a literal: the stamp of the clause whose body holds it
/// (`None` for the top-level goal) and its index there.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CallSite {
    pub clause: Option<u64>,
    pub index: usize,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub subst: Substitution,
    pub intents: Vec<Intent>,
    /// First variable id not used by this derivation.
    pub next_var: u64,
}

impl Solution {
    pub fn value(&self, var: &Var) -> Term {
        self.subst.apply(&Term::Var(var.clone()))
    }
}

/// One answer of a builtin call.
#[derive(Clone, Debug)]
pub struct Answer {
    pub subst: Substitution,
    pub intents: Vec<Intent>,
    pub next_var: u64,
}

/// A resolution engine bound to one snapshot. Cheap to clone.
#[derive(Clone)]
pub struct Solver {
    state: KnowledgeState,
    opts: SolverOptions,
    registry: Arc<Registry>,
    timers: Arc<IntervalTimers>,
    owner: Arc<str>,
}

impl Solver {
    pub fn new(state: KnowledgeState) -> Solver {
        Solver {
            state,
            opts: SolverOptions::default(),
            registry: Arc::new(Registry::standard()),
            timers: Arc::new(IntervalTimers::new()),
            owner: "".into(),
        }
    }

    pub fn with_options(mut self, opts: SolverOptions) -> Solver {
        self.opts = opts;
        self
    }

    pub fn with_registry(mut self, registry: Arc<Registry>) -> Solver {
        self.registry = registry;
        self
    }

    pub fn with_timers(mut self, timers: Arc<IntervalTimers>) -> Solver {
        self.timers = timers;
        self
    }

    /// Names the rule on whose behalf goals run; keys `interval/2` state.
    pub fn with_owner(mut self, owner: &str) -> Solver {
        self.owner = owner.into();
        self
    }

    pub fn with_state(mut self, state: KnowledgeState) -> Solver {
        self.state = state;
        self
    }

    pub fn with_scope(mut self, scope: Option<ModuleId>) -> Solver {
        self.opts.scope = scope;
        self
    }

    pub fn state(&self) -> &KnowledgeState {
        &self.state
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn registry(&self) -> &Arc<Registry> {
        &self.registry
    }

    pub fn timers(&self) -> &Arc<IntervalTimers> {
        &self.timers
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn solve(&self, goals: &[Term]) -> Solutions {
        let next_var = goals
            .iter()
            .filter_map(Term::max_var_id)
            .max()
            .map_or(0, |m| m + 1);
        self.solve_from(goals.to_vec(), Substitution::new(), next_var)
    }

    pub fn solve_query(&self, q: &Query) -> Solutions {
        self.solve(&q.literals)
    }

    /// Continues a derivation: `subst` is the binding environment so far and
    /// `next_var` the first unused variable id.
    pub fn solve_from(&self, goals: Vec<Term>, subst: Substitution, next_var: u64) -> Solutions {
        Solutions::new(self.clone(), goals, subst, next_var, 0, None)
    }

    pub(crate) fn sub_solve(&self, goals: Vec<Term>, subst: Substitution, next_var: u64, depth: usize) -> Solutions {
        Solutions::new(self.clone(), goals, subst, next_var, depth, None)
    }

    fn nested(&self, goals: Vec<Term>, m: &Machine, depth: usize, ancestors: Ancestors) -> Solutions {
        Solutions::new(self.clone(), goals, m.subst.clone(), m.next_var, depth, ancestors)
    }

    /// Whether `goals` has at least one answer.
    pub fn prove(&self, goals: &[Term]) -> Result<bool, SolveError> {
        self.solve(goals).next().transpose().map(|s| s.is_some())
    }

    /// All answers, or the first error.
    pub fn all(&self, goals: &[Term]) -> Result<Vec<Solution>, SolveError> {
        self.solve(goals).collect()
    }
}

type Goals = Option<Arc<GoalNode>>;

struct GoalNode {
    frame: Frame,
    next: Goals,
}

impl Drop for GoalNode {
    fn drop(&mut self) {
        let mut next = self.next.take();
        while let Some(node) = next {
            match Arc::try_unwrap(node) {
                Ok(mut n) => next = n.next.take(),
                Err(_) => break,
            }
        }
    }
}

type Ancestors = Option<Arc<AncestorNode>>;

struct AncestorNode {
    /// `None` marks entry into a negated subgoal.
    goal: Option<Term>,
    next: Ancestors,
}

impl Drop for AncestorNode {
    fn drop(&mut self) {
        let mut next = self.next.take();
        while let Some(node) = next {
            match Arc::try_unwrap(node) {
                Ok(mut n) => next = n.next.take(),
                Err(_) => break,
            }
        }
    }
}

#[derive(Clone)]
struct Frame {
    term: Term,
    /// Choice-point stack height that `!` in this literal cuts back to.
    barrier: usize,
    depth: usize,
    ancestors: Ancestors,
    site: CallSite,
}

#[derive(Clone)]
struct Machine {
    goals: Goals,
    subst: Substitution,
    intents: imbl::Vector<Intent>,
    next_var: u64,
}

fn push_goal(frame: Frame, next: Goals) -> Goals {
    Some(Arc::new(GoalNode { frame, next }))
}

struct ChoicePoint {
    /// Machine as it was when the goal was selected, minus that goal.
    base: Machine,
    alt: Alt,
}

enum Alt {
    Clauses {
        frame: Frame,
        goal: Term,
        ancestors: Ancestors,
        clauses: Arc<[ClauseRef]>,
        next: usize,
    },
    Answers(std::vec::IntoIter<Answer>),
    Branches {
        frame: Frame,
        branches: std::vec::IntoIter<Term>,
    },
}

enum Step {
    Next(Machine),
    Fail,
    Success(Solution),
    Error(SolveError),
}

/// Lazy answer stream of one goal.
pub struct Solutions {
    solver: Solver,
    stack: Vec<ChoicePoint>,
    pending: Option<Machine>,
    done: bool,
    cut: bool,
}

impl Solutions {
    fn new(solver: Solver, goals: Vec<Term>, subst: Substitution, next_var: u64, depth: usize, ancestors: Ancestors) -> Solutions {
        let mut list: Goals = None;
        for (index, term) in goals.into_iter().enumerate().rev() {
            let frame = Frame {
                term,
                barrier: 0,
                depth,
                ancestors: ancestors.clone(),
                site: CallSite { clause: None, index },
            };
            list = push_goal(frame, list);
        }
        Solutions {
            solver,
            stack: Vec::new(),
            pending: Some(Machine {
                goals: list,
                subst,
                intents: imbl::Vector::new(),
                next_var,
            }),
            done: false,
            cut: false,
        }
    }

    /// Whether a `!` written directly in the goal has been executed.
    pub fn cut_executed(&self) -> bool {
        self.cut
    }

    fn step(&mut self, mut m: Machine) -> Step {
        let Some(node) = m.goals.clone() else {
            return Step::Success(Solution {
                subst: m.subst,
                intents: m.intents.into_iter().collect(),
                next_var: m.next_var,
            });
        };
        m.goals = node.next.clone();
        let frame = &node.frame;
        let goal = m.subst.walk(&frame.term).clone();
        let (name, arity) = match &goal {
            Term::Atom(a) => (a.clone(), 0),
            Term::Compound(f, args) => (f.clone(), args.len()),
            Term::Var(_) => return Step::Error(SolveError::Instantiation("goal is an unbound variable".into())),
            other => return Step::Error(SolveError::Type(format!("{} is not callable", format_term(other)))),
        };
        let args = goal.args();
        match (&*name, arity) {
            ("true", 0) => Step::Next(m),
            ("fail", 0) | ("false", 0) => Step::Fail,
            ("!", 0) => {
                self.stack.truncate(frame.barrier);
                if frame.depth == 0 {
                    self.cut = true;
                }
                Step::Next(m)
            }
            (",", 2) => {
                let mut rest = m.goals.clone();
                for t in args.iter().rev() {
                    rest = push_goal(Frame { term: t.clone(), ..frame.clone() }, rest);
                }
                m.goals = rest;
                Step::Next(m)
            }
            (";", 2) => {
                let first = args[0].clone();
                let branches = vec![args[1].clone()].into_iter();
                let mut next = m.clone();
                next.goals = push_goal(Frame { term: first, ..frame.clone() }, m.goals.clone());
                self.stack.push(ChoicePoint {
                    base: m,
                    alt: Alt::Branches {
                        frame: frame.clone(),
                        branches,
                    },
                });
                Step::Next(next)
            }
            ("call", 1) => {
                m.goals = push_goal(
                    Frame {
                        term: args[0].clone(),
                        barrier: self.stack.len(),
                        depth: frame.depth + 1,
                        ..frame.clone()
                    },
                    m.goals.clone(),
                );
                Step::Next(m)
            }
            ("not", 1) | ("\\+", 1) => self.negation(m, frame, &args[0]),
            ("findall", 3) => self.findall(m, frame, args),
            _ => {
                let registry = self.solver.registry.clone();
                if let Some(b) = registry.lookup(&name, arity) {
                    if !(b.is_library() && self.solver.state.has_clauses(&name, arity)) {
                        return self.call_builtin(b, m, frame, &goal);
                    }
                }
                self.call_user(m, frame, goal, &name, arity)
            }
        }
    }

    fn negation(&mut self, m: Machine, frame: &Frame, lit: &Term) -> Step {
        let lit = m.subst.apply(lit);
        if !lit.is_ground() {
            return Step::Error(SolveError::Floundering(format_term(&lit)));
        }
        let boundary = Some(Arc::new(AncestorNode {
            goal: None,
            next: frame.ancestors.clone(),
        }));
        let mut sub = self.solver.nested(flatten_conjunction(lit), &m, frame.depth + 1, boundary);
        match sub.next() {
            None => Step::Next(m),
            Some(Ok(_)) => Step::Fail,
            Some(Err(e)) => Step::Error(e),
        }
    }

    fn findall(&mut self, mut m: Machine, frame: &Frame, args: &[Term]) -> Step {
        let goal = m.subst.apply(&args[1]);
        let mut sub = self
            .solver
            .nested(flatten_conjunction(goal), &m, frame.depth + 1, frame.ancestors.clone());
        let mut items = Vec::new();
        let mut next_var = m.next_var;
        for answer in &mut sub {
            match answer {
                Ok(s) => {
                    items.push(s.subst.apply(&args[0]));
                    next_var = next_var.max(s.next_var);
                }
                Err(e) => return Step::Error(e),
            }
        }
        match unify_with(&args[2], &Term::proper_list(items), &m.subst, self.solver.opts.occurs_check) {
            Some(s) => {
                m.subst = s;
                m.next_var = next_var;
                Step::Next(m)
            }
            None => Step::Fail,
        }
    }

    fn call_builtin(&mut self, b: &Builtin, m: Machine, frame: &Frame, goal: &Term) -> Step {
        let answers = {
            let mut ctx = Ctx {
                solver: &self.solver,
                subst: &m.subst,
                next_var: m.next_var,
                depth: frame.depth,
                site: frame.site,
            };
            b.call(&mut ctx, goal)
        };
        let mut answers = match answers {
            Ok(a) => a.into_iter(),
            Err(e) => return Step::Error(e),
        };
        let Some(first) = answers.next() else { return Step::Fail };
        let next = continue_with(&m, first);
        if answers.len() > 0 {
            self.stack.push(ChoicePoint {
                base: m,
                alt: Alt::Answers(answers),
            });
        }
        Step::Next(next)
    }

    fn call_user(&mut self, m: Machine, frame: &Frame, goal: Term, name: &str, arity: usize) -> Step {
        let opts = &self.solver.opts;
        if frame.depth >= opts.max_depth {
            return Step::Error(SolveError::DepthExceeded {
                limit: opts.max_depth,
                goal: format_term(&m.subst.apply(&goal)),
            });
        }
        let ancestors = if opts.loop_check {
            let applied = m.subst.apply(&goal);
            let mut node = frame.ancestors.as_ref();
            let mut negated = false;
            while let Some(a) = node {
                match &a.goal {
                    None => negated = true,
                    Some(g) if g.name() == Some(name) && g.args().len() == arity && is_variant(g, &applied) => {
                        return if negated {
                            Step::Error(SolveError::NegativeLoop(format_term(&applied)))
                        } else {
                            Step::Fail
                        };
                    }
                    Some(_) => {}
                }
                node = a.next.as_ref();
            }
            Some(Arc::new(AncestorNode {
                goal: Some(applied),
                next: frame.ancestors.clone(),
            }))
        } else {
            None
        };
        let clauses = self.solver.state.clauses_for(name, arity, opts.scope.as_ref());
        let height = self.stack.len();
        match self.try_clauses(&m, frame, &goal, &ancestors, &clauses, 0, height) {
            None => Step::Fail,
            Some((i, next)) => {
                if i + 1 < clauses.len() {
                    self.stack.push(ChoicePoint {
                        base: m,
                        alt: Alt::Clauses {
                            frame: frame.clone(),
                            goal,
                            ancestors,
                            clauses,
                            next: i + 1,
                        },
                    });
                }
                Step::Next(next)
            }
        }
    }

    /// Resolves `goal` against the first clause at or after `start` whose head unifies.
    #[allow(clippy::too_many_arguments)]
    fn try_clauses(
        &self,
        base: &Machine,
        frame: &Frame,
        goal: &Term,
        ancestors: &Ancestors,
        clauses: &[ClauseRef],
        start: usize,
        height: usize,
    ) -> Option<(usize, Machine)> {
        for (i, stored) in clauses.iter().enumerate().skip(start) {
            let clause = &stored.clause;
            let (head, body) = clause.instantiate(base.next_var);
            let Some(subst) = unify_with(goal, &head, &base.subst, self.solver.opts.occurs_check) else {
                continue;
            };
            let mut goals = base.goals.clone();
            for (index, lit) in body.into_iter().enumerate().rev() {
                goals = push_goal(
                    Frame {
                        term: lit,
                        barrier: height,
                        depth: frame.depth + 1,
                        ancestors: ancestors.clone(),
                        site: CallSite {
                            clause: Some(stored.stamp),
                            index,
                        },
                    },
                    goals,
                );
            }
            return Some((
                i,
                Machine {
                    goals,
                    subst,
                    intents: base.intents.clone(),
                    next_var: base.next_var + clause.var_count(),
                },
            ));
        }
        None
    }

    fn backtrack(&mut self) -> Option<Machine> {
        while let Some(mut cp) = self.stack.pop() {
            let height = self.stack.len();
            let found = match &mut cp.alt {
                Alt::Clauses {
                    frame,
                    goal,
                    ancestors,
                    clauses,
                    next,
                } => match self.try_clauses(&cp.base, frame, goal, ancestors, clauses, *next, height) {
                    Some((i, m)) => {
                        *next = i + 1;
                        Some((m, i + 1 < clauses.len()))
                    }
                    None => None,
                },
                Alt::Answers(answers) => answers
                    .next()
                    .map(|a| (continue_with(&cp.base, a), answers.len() > 0)),
                Alt::Branches { frame, branches } => branches.next().map(|term| {
                    let mut m = cp.base.clone();
                    m.goals = push_goal(Frame { term, ..frame.clone() }, m.goals);
                    (m, branches.len() > 0)
                }),
            };
            if let Some((m, more)) = found {
                if more {
                    self.stack.push(cp);
                }
                return Some(m);
            }
        }
        None
    }
}

fn continue_with(base: &Machine, answer: Answer) -> Machine {
    let mut intents = base.intents.clone();
    intents.extend(answer.intents);
    Machine {
        goals: base.goals.clone(),
        subst: answer.subst,
        intents,
        next_var: answer.next_var.max(base.next_var),
    }
}

impl Iterator for Solutions {
    type Item = Result<Solution, SolveError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let m = match self.pending.take() {
                Some(m) => m,
                None => match self.backtrack() {
                    Some(m) => m,
                    None => {
                        self.done = true;
                        return None;
                    }
                },
            };
            match self.step(m) {
                Step::Next(m) => self.pending = Some(m),
                Step::Fail => {}
                Step::Success(s) => return Some(Ok(s)),
                Step::Error(e) => {
                    self.done = true;
                    self.stack.clear();
                    return Some(Err(e));
                }
            }
        }
    }
}

/// What a builtin sees of the derivation that called it.
pub struct Ctx<'a> {
    pub solver: &'a Solver,
    pub subst: &'a Substitution,
    pub next_var: u64,
    pub depth: usize,
    pub site: CallSite,
}

impl Ctx<'_> {
    pub fn resolve(&self, t: &Term) -> Term {
        self.subst.apply(t)
    }

    pub fn unify(&self, a: &Term, b: &Term) -> Option<Substitution> {
        unify_with(a, b, self.subst, self.solver.opts.occurs_check)
    }

    pub fn answer(&self, subst: Substitution) -> Answer {
        Answer {
            subst,
            intents: Vec::new(),
            next_var: self.next_var,
        }
    }

    /// Succeeds once without new bindings.
    pub fn succeed(&self) -> Vec<Answer> {
        vec![self.answer(self.subst.clone())]
    }

    /// Succeeds once, leaving `intents`.
    pub fn effect(&self, intents: Vec<Intent>) -> Vec<Answer> {
        vec![Answer {
            subst: self.subst.clone(),
            intents,
            next_var: self.next_var,
        }]
    }

    /// Succeeds once if `a` and `b` unify.
    pub fn unify_answer(&self, a: &Term, b: &Term) -> Vec<Answer> {
        self.unify(a, b).map(|s| self.answer(s)).into_iter().collect()
    }

    pub fn fresh_var(&mut self, name: &str) -> Term {
        let v = Term::var(name, self.next_var);
        self.next_var += 1;
        v
    }

    /// Runs goals in a nested derivation sharing the current bindings.
    pub fn sub_solve(&self, goals: Vec<Term>) -> Solutions {
        self.solver
            .sub_solve(goals, self.subst.clone(), self.next_var, self.depth + 1)
    }
}
