//! Unitized, versioned knowledge base.
//!
//! Clauses live in modules keyed by a [`ModuleId`]. Every update produces a
//! new immutable [`KnowledgeState`] with `state_index + 1`; the state keeps
//! the update history it was built from, so it can always be replayed from
//! the empty state.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::sync::{Arc, Mutex};

use indexmap::IndexMap;
use thiserror::Error;

use crate::parser::{format_clause, format_term, parse_program, ParseError, ParsedProgram};
use crate::term::{Clause, Symbol, Term};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModuleId(Arc<str>);

impl ModuleId {
    pub fn new(oid: &str) -> ModuleId {
        ModuleId(oid.into())
    }

    /// Module id named by a ground term: strings and atoms by their text,
    /// anything else by its printed form.
    pub fn from_term(t: &Term) -> Option<ModuleId> {
        match t {
            Term::Str(s) => Some(ModuleId::new(s)),
            Term::Atom(a) => Some(ModuleId::new(a)),
            other if other.is_ground() => Some(ModuleId::new(&format_term(other))),
            _ => None,
        }
    }

    /// Event instance sequence module `eis(Type)` for an event term.
    pub fn eis_for(event: &Term) -> ModuleId {
        let key = event.name().map(Term::atom).unwrap_or_else(|| event.clone());
        ModuleId::new(&format_term(&Term::compound("eis", vec![key])))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ModuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ModuleId {
    fn from(s: &str) -> Self {
        ModuleId::new(s)
    }
}

/// A clause as stored in a state: its module and a global arrival stamp.
#[derive(Debug)]
pub struct StoredClause {
    pub clause: Clause,
    pub module: ModuleId,
    /// Strictly increasing in insertion order across the whole knowledge base.
    pub stamp: u64,
}

pub type ClauseRef = Arc<StoredClause>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UpdateKind {
    /// Positive update: append clauses to the module.
    Add(Vec<Clause>),
    /// Negative update: drop the whole module.
    Remove,
    /// Partial negative update: drop the first equal occurrence of each clause.
    Retract(Vec<Clause>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
    Partial,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UpdateRecord {
    pub oid: ModuleId,
    pub kind: UpdateKind,
}

impl UpdateRecord {
    pub fn add(oid: ModuleId, clauses: Vec<Clause>) -> UpdateRecord {
        UpdateRecord {
            oid,
            kind: UpdateKind::Add(clauses),
        }
    }

    pub fn remove(oid: ModuleId) -> UpdateRecord {
        UpdateRecord {
            oid,
            kind: UpdateKind::Remove,
        }
    }

    pub fn retract(oid: ModuleId, clauses: Vec<Clause>) -> UpdateRecord {
        UpdateRecord {
            oid,
            kind: UpdateKind::Retract(clauses),
        }
    }

    pub fn polarity(&self) -> Polarity {
        match self.kind {
            UpdateKind::Add(_) => Polarity::Positive,
            UpdateKind::Remove => Polarity::Negative,
            UpdateKind::Retract(_) => Polarity::Partial,
        }
    }
}

impl fmt::Display for UpdateRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let clauses = |cs: &[Clause]| cs.iter().map(format_clause).collect::<Vec<_>>().join(" ");
        match &self.kind {
            UpdateKind::Add(cs) => write!(f, "add({}, {})", self.oid, clauses(cs)),
            UpdateKind::Remove => write!(f, "remove({})", self.oid),
            UpdateKind::Retract(cs) => write!(f, "retract({}, {})", self.oid, clauses(cs)),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{source}")]
    Parse { path: String, source: ParseError },
}

struct HistoryNode {
    record: UpdateRecord,
    prev: Option<Arc<HistoryNode>>,
}

/// Immutable snapshot of the knowledge base.
#[derive(Clone)]
pub struct KnowledgeState {
    inner: Arc<Inner>,
}

#[derive(Clone, Default)]
struct Inner {
    index: u64,
    modules: IndexMap<ModuleId, Arc<[ClauseRef]>>,
    predicates: HashMap<(Symbol, usize), Arc<[ClauseRef]>>,
    history: Option<Arc<HistoryNode>>,
    history_len: usize,
    history_cap: Option<usize>,
    next_stamp: u64,
}

impl Default for KnowledgeState {
    fn default() -> Self {
        Self::empty()
    }
}

impl fmt::Debug for KnowledgeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KnowledgeState")
            .field("index", &self.inner.index)
            .field("modules", &self.inner.modules.len())
            .finish()
    }
}

impl KnowledgeState {
    pub fn empty() -> KnowledgeState {
        KnowledgeState {
            inner: Arc::new(Inner::default()),
        }
    }

    /// Caps the retained history; when exceeded, the history is rebased onto
    /// one positive record per live module.
    pub fn with_history_cap(&self, cap: usize) -> KnowledgeState {
        let mut inner = (*self.inner).clone();
        inner.history_cap = Some(cap.max(1));
        let mut state = KnowledgeState {
            inner: Arc::new(inner),
        };
        state.compact_if_needed();
        state
    }

    pub fn state_index(&self) -> u64 {
        self.inner.index
    }

    pub fn module_ids(&self) -> impl Iterator<Item = &ModuleId> {
        self.inner.modules.keys()
    }

    pub fn module(&self, oid: &ModuleId) -> Option<&[ClauseRef]> {
        self.inner.modules.get(oid).map(|m| &**m)
    }

    pub fn contains_module(&self, oid: &ModuleId) -> bool {
        self.inner.modules.contains_key(oid)
    }

    pub fn clause_count(&self) -> usize {
        self.inner.modules.values().map(|m| m.len()).sum()
    }

    /// All clauses in global order (module insertion order, then source order).
    pub fn all_clauses(&self) -> impl Iterator<Item = &ClauseRef> {
        self.inner.modules.values().flat_map(|m| m.iter())
    }

    /// Clauses whose head is `functor/arity`, optionally restricted to one module.
    pub fn clauses_for(&self, functor: &str, arity: usize, scope: Option<&ModuleId>) -> Arc<[ClauseRef]> {
        let all = self
            .inner
            .predicates
            .get(&(Symbol::from(functor), arity))
            .cloned()
            .unwrap_or_else(|| Arc::from(Vec::new()));
        match scope {
            None => all,
            Some(oid) => all.iter().filter(|c| &c.module == oid).cloned().collect(),
        }
    }

    pub fn has_clauses(&self, functor: &str, arity: usize) -> bool {
        self.inner
            .predicates
            .contains_key(&(Symbol::from(functor), arity))
    }

    pub fn add_module(&self, oid: ModuleId, clauses: Vec<Clause>) -> KnowledgeState {
        self.apply(&UpdateRecord::add(oid, clauses))
    }

    pub fn remove_module(&self, oid: &ModuleId) -> KnowledgeState {
        self.apply(&UpdateRecord::remove(oid.clone()))
    }

    pub fn retract(&self, oid: ModuleId, clauses: Vec<Clause>) -> KnowledgeState {
        self.apply(&UpdateRecord::retract(oid, clauses))
    }

    /// Applies one update. An `Add` with no clauses is not an update and
    /// leaves the state as it is.
    pub fn apply(&self, record: &UpdateRecord) -> KnowledgeState {
        if matches!(&record.kind, UpdateKind::Add(cs) if cs.is_empty()) {
            return self.clone();
        }
        let mut inner = (*self.inner).clone();
        match &record.kind {
            UpdateKind::Add(clauses) => {
                let mut module: Vec<ClauseRef> = inner
                    .modules
                    .get(&record.oid)
                    .map(|m| m.to_vec())
                    .unwrap_or_default();
                for c in clauses {
                    module.push(Arc::new(StoredClause {
                        clause: c.clone(),
                        module: record.oid.clone(),
                        stamp: inner.next_stamp,
                    }));
                    inner.next_stamp += 1;
                }
                inner.modules.insert(record.oid.clone(), module.into());
            }
            UpdateKind::Remove => {
                inner.modules.shift_remove(&record.oid);
            }
            UpdateKind::Retract(clauses) => {
                if let Some(existing) = inner.modules.get(&record.oid) {
                    let mut module = existing.to_vec();
                    for c in clauses {
                        if let Some(pos) = module.iter().position(|s| &s.clause == c) {
                            module.remove(pos);
                        }
                    }
                    if module.is_empty() {
                        inner.modules.shift_remove(&record.oid);
                    } else {
                        inner.modules.insert(record.oid.clone(), module.into());
                    }
                }
            }
        }
        inner.index += 1;
        inner.history = Some(Arc::new(HistoryNode {
            record: record.clone(),
            prev: inner.history.take(),
        }));
        inner.history_len += 1;
        inner.predicates = index_predicates(&inner.modules);
        let mut state = KnowledgeState {
            inner: Arc::new(inner),
        };
        state.compact_if_needed();
        state
    }

    fn compact_if_needed(&mut self) {
        let Some(cap) = self.inner.history_cap else { return };
        if self.inner.history_len <= cap {
            return;
        }
        let mut inner = (*self.inner).clone();
        let mut history = None;
        let mut len = 0;
        for (oid, clauses) in &inner.modules {
            history = Some(Arc::new(HistoryNode {
                record: UpdateRecord::add(oid.clone(), clauses.iter().map(|c| c.clause.clone()).collect()),
                prev: history,
            }));
            len += 1;
        }
        inner.history = history;
        inner.history_len = len;
        self.inner = Arc::new(inner);
    }

    /// Updates that rebuild this state's clauses from the empty state, oldest first.
    pub fn history(&self) -> Vec<UpdateRecord> {
        let mut out = Vec::with_capacity(self.inner.history_len);
        let mut node = self.inner.history.as_ref();
        while let Some(n) = node {
            out.push(n.record.clone());
            node = n.prev.as_ref();
        }
        out.reverse();
        out
    }

    pub fn replay(records: &[UpdateRecord]) -> KnowledgeState {
        records
            .iter()
            .fold(KnowledgeState::empty(), |s, r| s.apply(r))
    }

    /// Clause multiset per live module, for comparing states.
    pub fn clause_sets(&self) -> BTreeMap<ModuleId, Vec<Clause>> {
        self.inner
            .modules
            .iter()
            .map(|(oid, cs)| (oid.clone(), cs.iter().map(|c| c.clause.clone()).collect()))
            .collect()
    }

    /// Printed form of every module in order; equal strings mean equal clause sets.
    pub fn fingerprint(&self) -> String {
        let mut out = String::new();
        for (oid, clauses) in &self.inner.modules {
            out.push_str(&format!("module {oid}\n"));
            for c in clauses.iter() {
                out.push_str(&format_clause(&c.clause));
                out.push('\n');
            }
        }
        out
    }

    /// Adds a parsed program as module `oid`.
    pub fn load_program(&self, oid: ModuleId, program: &ParsedProgram) -> KnowledgeState {
        self.add_module(oid, program.clauses.clone())
    }

    /// Loads a script file; the path becomes the module id.
    pub fn load_file(&self, path: &Path) -> Result<(KnowledgeState, ParsedProgram), LoadError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
            path: display.clone(),
            source,
        })?;
        let program = parse_program(&text).map_err(|source| LoadError::Parse {
            path: display.clone(),
            source,
        })?;
        Ok((self.load_program(ModuleId::new(&display), &program), program))
    }
}

fn index_predicates(
    modules: &IndexMap<ModuleId, Arc<[ClauseRef]>>,
) -> HashMap<(Symbol, usize), Arc<[ClauseRef]>> {
    let mut index: HashMap<(Symbol, usize), Vec<ClauseRef>> = HashMap::new();
    for clauses in modules.values() {
        for c in clauses.iter() {
            if let Some(key) = c.clause.key() {
                index.entry(key).or_default().push(c.clone());
            }
        }
    }
    index.into_iter().map(|(k, v)| (k, v.into())).collect()
}

/// Single-writer handle: readers take snapshots, writers apply updates serially.
pub struct SharedKb {
    current: Mutex<KnowledgeState>,
    writer: Mutex<()>,
}

impl SharedKb {
    pub fn new(state: KnowledgeState) -> SharedKb {
        SharedKb {
            current: Mutex::new(state),
            writer: Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> KnowledgeState {
        self.current.lock().expect("kb lock").clone()
    }

    /// Runs `f` against the latest state and publishes its result atomically.
    pub fn update<R>(&self, f: impl FnOnce(&KnowledgeState) -> (KnowledgeState, R)) -> R {
        let _w = self.writer.lock().expect("writer lock");
        let base = self.snapshot();
        let (next, r) = f(&base);
        *self.current.lock().expect("kb lock") = next;
        r
    }
}
