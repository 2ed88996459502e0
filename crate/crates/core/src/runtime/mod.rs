//! Interactive execution of a linked specification.
//!
//! A [`Session`] holds the current configuration, the trace so far and an
//! undo history. Labels that still carry metavariables (a sum over an
//! infinite sort waiting for a value) are offered as open descriptors; the
//! caller supplies the values when firing.
//!
//! Servers can be backed by native handlers. When an `s-call(srv, svc)`
//! fires and a handler is bound for `srv` and the constructor of `svc`,
//! the handler runs immediately. Calls it makes through its [`Stub`] are
//! not shortcuts: each one fires the client/server protocol transitions in
//! order, so nested calls show up in the trace like any other step. The
//! handler's result is then held until the matching `s-return` fires.

mod calculator;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::flat::FlatSpec;
use crate::resolve::{parse_pattern, PatternError};
use crate::semantics::{entry, Config, Path, SemError, StepTables, Stepper};
use crate::terms::{
    enumerate_sort, name, normalize_binding, unify_args, ActionLabel, AtomPattern, Binding, Name,
    Proc, Term,
};

pub use calculator::{
    calculator_demo, calculator_handlers, calculator_session, Demo, CALCULATOR_MANIFEST,
    CALCULATOR_SPEC,
};

/// Nesting limit for handler calls made through a stub.
pub const MAX_NESTING: usize = 64;

/// Configurations whose derivatives are remembered; the memo is dropped
/// when it grows past this.
const MEMO_LIMIT: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error(transparent)]
    Sem(#[from] SemError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("no enabled transition with index {0}")]
    NoSuchIndex(usize),
    #[error("transition {index} needs a value for {missing}")]
    Open { index: usize, missing: String },
    #[error("value {value} for {var} does not have sort {sort}")]
    BadValue { var: String, value: String, sort: String },
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("no enabled transition matches {0}")]
    NoMatch(String),
    #[error("script line {line}: {message}")]
    Script { line: usize, message: String },
    #[error("session is blocked: {0}")]
    Blocked(String),
}

/// Signature of a native service implementation: the service arguments
/// and a stub for calling other servers.
pub type HandlerFn = Arc<dyn Fn(&[Term], &mut dyn Stub) -> Result<Term, String> + Send + Sync>;

/// Outgoing calls of a running handler.
pub trait Stub {
    /// Calls `service` on `server` through the client/server protocol and
    /// returns the result.
    fn call(&mut self, server: &str, service: Term) -> Result<Term, String>;
}

/// Native handlers keyed by server ID and service constructor.
#[derive(Clone, Default)]
pub struct Handlers {
    map: BTreeMap<(String, String), HandlerFn>,
}

impl Handlers {
    pub fn bind(
        &mut self,
        server: &str,
        service: &str,
        f: impl Fn(&[Term], &mut dyn Stub) -> Result<Term, String> + Send + Sync + 'static,
    ) {
        self.map
            .insert((server.to_string(), service.to_string()), Arc::new(f));
    }

    pub fn get(&self, server: &str, service: &str) -> Option<&HandlerFn> {
        self.map.get(&(server.to_string(), service.to_string()))
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn bindings(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.keys().map(|(s, f)| (s.as_str(), f.as_str()))
    }
}

impl fmt::Debug for Handlers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.map.keys()).finish()
    }
}

/// One enabled transition of the current configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Descriptor {
    pub index: usize,
    pub label: ActionLabel,
    /// Metavariables (name, sort) the caller must supply before firing.
    pub open: Vec<(Name, Name)>,
    pub next: Option<Proc>,
    pub participants: Vec<Path>,
    pub comm: bool,
}

impl Descriptor {
    /// Printed target configuration.
    pub fn target(&self) -> String {
        Config::from_next(&self.next).to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub label: ActionLabel,
    pub participants: Vec<Path>,
    /// 0 for steps fired by the caller, n for steps fired by a handler
    /// running n levels deep.
    pub nesting: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Snapshot {
    current: Option<Proc>,
    trace_len: usize,
    pending: BTreeMap<Name, Term>,
    error: Option<String>,
}

/// How [`Session::run_auto`] picks transitions.
#[derive(Clone, Debug)]
pub enum Policy {
    /// Uniform choice among enabled transitions; open values are drawn from
    /// the sort enumeration up to the session's depth bound.
    Random,
    /// One label pattern per entry, fired in order. `_` matches anything.
    Script(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub fired: usize,
    pub terminated: bool,
    /// Stopped in a running configuration with nothing enabled.
    pub deadlocked: bool,
    pub error: Option<String>,
}

pub struct Session {
    spec: Arc<FlatSpec>,
    tables: Arc<StepTables>,
    memo: HashMap<Proc, Arc<Vec<Descriptor>>>,
    by_ptr: HashMap<usize, (Proc, Arc<Vec<Descriptor>>)>,
    initial: Proc,
    state: Snapshot,
    trace: Vec<TraceEvent>,
    history: Vec<Snapshot>,
    handlers: Handlers,
    rng: ChaCha8Rng,
    depth_bound: usize,
    enabled: Vec<Descriptor>,
    revision: u64,
    nesting: usize,
}

impl Session {
    pub fn new(
        spec: Arc<FlatSpec>,
        root: &str,
        handlers: Handlers,
        seed: u64,
        depth_bound: usize,
    ) -> Result<Session, SessionError> {
        let initial = entry(&spec, root, vec![])?.canonical();
        let tables = Arc::new(StepTables::new(&spec)?);
        let mut s = Session {
            spec,
            tables,
            memo: HashMap::new(),
            by_ptr: HashMap::new(),
            initial: initial.clone(),
            state: Snapshot {
                current: Some(initial),
                trace_len: 0,
                pending: BTreeMap::new(),
                error: None,
            },
            trace: Vec::new(),
            history: Vec::new(),
            handlers,
            rng: ChaCha8Rng::seed_from_u64(seed),
            depth_bound,
            enabled: Vec::new(),
            revision: 0,
            nesting: 0,
        };
        s.refresh()?;
        Ok(s)
    }

    pub fn spec(&self) -> &Arc<FlatSpec> {
        &self.spec
    }

    pub fn initial(&self) -> &Proc {
        &self.initial
    }

    /// `None` once the configuration has terminated.
    pub fn current(&self) -> Option<&Proc> {
        self.state.current.as_ref()
    }

    pub fn terminated(&self) -> bool {
        self.state.current.is_none()
    }

    pub fn error(&self) -> Option<&str> {
        self.state.error.as_deref()
    }

    pub fn enabled(&self) -> &[Descriptor] {
        &self.enabled
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    /// Handler results waiting for their `s-return`, by server.
    pub fn pending(&self) -> &BTreeMap<Name, Term> {
        &self.state.pending
    }

    /// Incremented by every change of state; lets clients detect stale
    /// indices.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn can_undo(&self) -> bool {
        !self.history.is_empty()
    }

    fn refresh(&mut self) -> Result<(), SessionError> {
        self.enabled.clear();
        if self.state.error.is_some() {
            return Ok(());
        }
        let Some(p) = self.state.current.clone() else {
            return Ok(());
        };
        let templates = self.templates(&p)?;
        let mut out: Vec<Descriptor> = Vec::with_capacity(templates.len());
        for t in templates.iter() {
            let d = match self.pending_binding(&t.label) {
                Some(b) => {
                    let label = t.label.apply(&b);
                    let next = t.next.as_ref().map(|n| n.apply(&b).canonical());
                    Descriptor {
                        index: out.len(),
                        open: open_metas(&label, &next),
                        label,
                        next,
                        participants: t.participants.clone(),
                        comm: t.comm,
                    }
                }
                None => Descriptor {
                    index: out.len(),
                    ..t.clone()
                },
            };
            if !out
                .iter()
                .any(|o| o.label == d.label && o.next == d.next && o.participants == d.participants)
            {
                out.push(d);
            }
        }
        self.enabled = out;
        Ok(())
    }

    /// Descriptors of `p` before pending results are filled in. Memoized,
    /// first by node identity and then by value.
    fn templates(&mut self, p: &Proc) -> Result<Arc<Vec<Descriptor>>, SessionError> {
        let key = Arc::as_ptr(p) as usize;
        if let Some((_, t)) = self.by_ptr.get(&key) {
            return Ok(t.clone());
        }
        let t = match self.memo.get(p) {
            Some(t) => t.clone(),
            None => {
                let stepper = Stepper::with_tables(&self.spec, self.tables.clone());
                let t: Vec<Descriptor> = stepper
                    .step(p)?
                    .into_iter()
                    .enumerate()
                    .map(|(index, st)| {
                        let next = st.next.map(|n| n.canonical());
                        Descriptor {
                            index,
                            open: open_metas(&st.label, &next),
                            label: st.label,
                            next,
                            participants: st.participants,
                            comm: st.comm,
                        }
                    })
                    .collect();
                let t = Arc::new(t);
                if self.memo.len() >= MEMO_LIMIT {
                    self.memo.clear();
                }
                self.memo.insert(p.clone(), t.clone());
                t
            }
        };
        if self.by_ptr.len() >= MEMO_LIMIT {
            self.by_ptr.clear();
        }
        // the stored Proc keeps the address from being reused
        self.by_ptr.insert(key, (p.clone(), t.clone()));
        Ok(t)
    }

    /// Binds the result of an `s-return(srv, ?r)` to the value a handler
    /// left for `srv`.
    fn pending_binding(&self, label: &ActionLabel) -> Option<Binding> {
        let ActionLabel::Act { atom, args } = label else {
            return None;
        };
        if &**atom != "s-return" || args.len() != 2 {
            return None;
        }
        let Term::App { ctor, args: a, .. } = &args[0] else {
            return None;
        };
        if !a.is_empty() {
            return None;
        }
        let v = self.state.pending.get(ctor)?;
        let mut b = Binding::new();
        unify_args(&args[1..], std::slice::from_ref(v), &mut b).then(|| normalize_binding(&b))
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            trace_len: self.trace.len(),
            ..self.state.clone()
        }
    }

    fn restore(&mut self, s: Snapshot) -> Result<(), SessionError> {
        self.trace.truncate(s.trace_len);
        self.state = s;
        self.revision += 1;
        self.refresh()
    }

    /// Fires enabled transition `index` without open values.
    pub fn fire(&mut self, index: usize) -> Result<(), SessionError> {
        self.fire_with(index, &Binding::new())
    }

    /// Fires enabled transition `index`, binding its open metavariables
    /// from `values`.
    pub fn fire_with(&mut self, index: usize, values: &Binding) -> Result<(), SessionError> {
        if let Some(e) = &self.state.error {
            return Err(SessionError::Blocked(e.clone()));
        }
        let d = self
            .enabled
            .get(index)
            .cloned()
            .ok_or(SessionError::NoSuchIndex(index))?;
        for (v, sort) in &d.open {
            match values.get(v) {
                None => {
                    return Err(SessionError::Open {
                        index,
                        missing: format!("{v} : {sort}"),
                    })
                }
                Some(t) if t.sort() != sort || !t.is_ground() => {
                    return Err(SessionError::BadValue {
                        var: v.to_string(),
                        value: t.to_string(),
                        sort: sort.to_string(),
                    })
                }
                Some(_) => {}
            }
        }
        let b: Binding = values
            .iter()
            .filter(|(k, _)| d.open.iter().any(|(v, _)| v == *k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let snap = self.snapshot();
        self.history.push(snap);
        let (label, next) = instantiate(&d, &b);
        self.advance(label, next, d.participants);
        self.revision += 1;
        self.refresh()
    }

    /// Moves to `next` and runs the handler hook. Handler failures leave
    /// the session blocked with the failure recorded.
    fn advance(&mut self, label: ActionLabel, next: Option<Proc>, participants: Vec<Path>) {
        self.trace.push(TraceEvent {
            label: label.clone(),
            participants,
            nesting: self.nesting,
        });
        self.state.current = next;
        let ActionLabel::Act { atom, args } = &label else {
            return;
        };
        match (&**atom, args.as_slice()) {
            ("s-return", [Term::App { ctor, .. }, _]) => {
                self.state.pending.remove(ctor);
            }
            ("s-call", [Term::App { ctor: server, .. }, Term::App { ctor: svc, args: sargs, .. }]) => {
                let Some(h) = self.handlers.get(server, svc).cloned() else {
                    return;
                };
                if self.nesting >= MAX_NESTING {
                    self.state.error = Some(format!("handler nesting exceeds {MAX_NESTING}"));
                    return;
                }
                self.nesting += 1;
                let r = h(sargs, &mut CallStub { session: self, me: server.clone() });
                self.nesting -= 1;
                match r {
                    Ok(v) => {
                        self.state.pending.insert(server.clone(), v);
                    }
                    Err(e) => {
                        if self.state.error.is_none() {
                            self.state.error = Some(format!("handler {server}.{svc}: {e}"));
                        }
                    }
                }
            }
            _ => {}
        }
    }

    pub fn undo(&mut self) -> Result<(), SessionError> {
        let s = self.history.pop().ok_or(SessionError::NothingToUndo)?;
        self.restore(s)
    }

    /// Back to the initial configuration with an empty trace and history.
    pub fn reset(&mut self) -> Result<(), SessionError> {
        self.history.clear();
        self.restore(Snapshot {
            current: Some(self.initial.clone()),
            trace_len: 0,
            pending: BTreeMap::new(),
            error: None,
        })
    }

    /// First enabled transition whose label matches `pattern`, with the
    /// binding of its open metavariables. Wildcards in the pattern must not
    /// be left bound to an open metavariable.
    pub fn find(&self, pattern: &AtomPattern) -> Option<(usize, Binding)> {
        self.enabled.iter().find_map(|d| {
            let ActionLabel::Act { atom, args } = &d.label else {
                return None;
            };
            if *atom != pattern.atom {
                return None;
            }
            let mut b = Binding::new();
            if !unify_args(&pattern.args, args, &mut b) {
                return None;
            }
            let b = normalize_binding(&b);
            let values: Binding = d
                .open
                .iter()
                .filter_map(|(v, _)| b.get(v).map(|t| (v.clone(), t.clone())))
                .collect();
            (values.len() == d.open.len() && values.values().all(Term::is_ground))
                .then_some((d.index, values))
        })
    }

    /// Fires the first enabled transition matching the label pattern
    /// `text`; `tau` fires the first silent step.
    pub fn fire_label(&mut self, text: &str) -> Result<(), SessionError> {
        if text.trim() == "tau" {
            let i = self
                .enabled
                .iter()
                .position(|d| d.label.is_tau())
                .ok_or_else(|| SessionError::NoMatch("tau".into()))?;
            return self.fire(i);
        }
        let p = parse_pattern(&self.spec, text)?;
        let (i, b) = self
            .find(&p)
            .ok_or_else(|| SessionError::NoMatch(text.trim().to_string()))?;
        self.fire_with(i, &b)
    }

    /// Random values for the open metavariables of descriptor `index`.
    pub fn random_values(&mut self, index: usize) -> Result<Binding, SessionError> {
        let d = self
            .enabled
            .get(index)
            .ok_or(SessionError::NoSuchIndex(index))?;
        let mut b = Binding::new();
        for (v, sort) in d.open.clone() {
            let pool = enumerate_sort(&self.spec, &sort, Some(self.depth_bound))
                .map_err(|e| SemError::Sort(e.to_string()))?;
            if pool.is_empty() {
                return Err(SessionError::Open {
                    index,
                    missing: format!("{v} : {sort}"),
                });
            }
            b.insert(v, pool[self.rng.gen_range(0..pool.len())].clone());
        }
        Ok(b)
    }

    /// Fires up to `max_steps` transitions chosen by `policy`. A script
    /// stops at its end; the random policy stops on termination, deadlock
    /// or a handler failure.
    pub fn run_auto(&mut self, policy: &Policy, max_steps: usize) -> Result<RunOutcome, SessionError> {
        let mut fired = 0;
        match policy {
            Policy::Random => {
                while fired < max_steps && !self.enabled.is_empty() {
                    let i = self.rng.gen_range(0..self.enabled.len());
                    let b = self.random_values(i)?;
                    self.fire_with(i, &b)?;
                    fired += 1;
                }
            }
            Policy::Script(lines) => {
                for (n, l) in lines.iter().enumerate().take(max_steps) {
                    self.fire_label(l).map_err(|e| SessionError::Script {
                        line: n + 1,
                        message: e.to_string(),
                    })?;
                    fired += 1;
                }
            }
        }
        Ok(RunOutcome {
            fired,
            terminated: self.terminated(),
            deadlocked: !self.terminated() && self.enabled.is_empty() && self.error().is_none(),
            error: self.state.error.clone(),
        })
    }

    /// Number of trace events matching the label pattern `text`.
    pub fn trace_count(&self, text: &str) -> Result<usize, SessionError> {
        let p = parse_pattern(&self.spec, text)?;
        Ok(self
            .trace
            .iter()
            .filter(|e| crate::resolve::match_pattern(&p, &e.label).is_some())
            .count())
    }

    /// Event counts per atom (`tau` for silent steps).
    pub fn trace_stats(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for e in &self.trace {
            let k = e.label.atom().map_or("tau".to_string(), |a| a.to_string());
            *m.entry(k).or_insert(0) += 1;
        }
        m
    }

    /// One `index<TAB>label` line per event.
    pub fn export_trace(&self) -> String {
        self.trace
            .iter()
            .enumerate()
            .map(|(i, e)| format!("{i}\t{}\n", e.label))
            .collect()
    }
}

/// Metavariables of a label and its target, in order of appearance.
fn open_metas(label: &ActionLabel, next: &Option<Proc>) -> Vec<(Name, Name)> {
    let mut open = Vec::new();
    if !label.has_meta() && !next.as_ref().is_some_and(|n| n.has_meta()) {
        return open;
    }
    for a in label.args() {
        a.collect_vars(&mut open);
    }
    if let Some(n) = next {
        n.free_vars(&mut open);
    }
    open.retain(|(v, _)| v.starts_with('?'));
    let mut seen = std::collections::BTreeSet::new();
    open.retain(|x| seen.insert(x.clone()));
    open
}

fn instantiate(d: &Descriptor, b: &Binding) -> (ActionLabel, Option<Proc>) {
    if b.is_empty() {
        return (d.label.clone(), d.next.clone());
    }
    (d.label.apply(b), d.next.as_ref().map(|n| n.apply(b).canonical()))
}

/// Parses a scenario script: one label pattern per line, `--` comments.
pub fn parse_script(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split("--").next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

struct CallStub<'a> {
    session: &'a mut Session,
    me: Name,
}

impl CallStub<'_> {
    fn fire_next(&mut self, atom: &str, args: Vec<Option<Term>>) -> Result<ActionLabel, String> {
        let s = &mut *self.session;
        if let Some(e) = &s.state.error {
            return Err(e.clone());
        }
        s.refresh().map_err(|e| e.to_string())?;
        let mut fresh = 0;
        let sorts = s
            .spec
            .atom(atom, args.len())
            .ok_or_else(|| format!("protocol atom {atom} is not declared"))?
            .arg_sorts
            .clone();
        let pattern = AtomPattern {
            atom: name(atom),
            args: args
                .into_iter()
                .zip(sorts)
                .map(|(a, sort)| {
                    a.unwrap_or_else(|| {
                        fresh += 1;
                        Term::Var {
                            name: name(&format!("_{fresh}")),
                            sort,
                        }
                    })
                })
                .collect(),
        };
        let (i, b) = s.find(&pattern).ok_or_else(|| {
            format!("call from {} stalled: {pattern} is not enabled", self.me)
        })?;
        let d = s.enabled[i].clone();
        let (label, next) = instantiate(&d, &b);
        s.advance(label.clone(), next, d.participants);
        match &s.state.error {
            Some(e) => Err(e.clone()),
            None => Ok(label),
        }
    }
}

impl Stub for CallStub<'_> {
    fn call(&mut self, server: &str, service: Term) -> Result<Term, String> {
        let me = Term::App {
            ctor: self.me.clone(),
            sort: name("ID"),
            args: vec![],
        };
        let srv = Term::App {
            ctor: name(server),
            sort: name("ID"),
            args: vec![],
        };
        let (m, d, svc) = (Some(me), Some(srv), Some(service));
        self.fire_next("c-call", vec![m.clone(), d.clone(), svc.clone()])?;
        self.fire_next("cs-request", vec![m.clone(), d.clone(), svc.clone()])?;
        self.fire_next("s-call", vec![d.clone(), svc])?;
        self.fire_next("s-return", vec![d.clone(), None])?;
        self.fire_next("cs-result", vec![d.clone(), m.clone(), None])?;
        let l = self.fire_next("c-return", vec![d, m, None])?;
        Ok(l.args()[2].clone())
    }
}
