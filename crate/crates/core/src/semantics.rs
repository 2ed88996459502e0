//! Structural operational semantics and transition-system construction.
//!
//! Sums over finite sorts expand to one branch per element. Sums over
//! infinite sorts (recursive constructors or literal carriers) bind their
//! variable to a fresh metavariable `?k`; a communication partner then
//! instantiates it by unification. A step whose label or target still holds
//! a metavariable at the top level is an error for [`build_lts`]; the
//! simulator resolves such steps itself.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::flat::FlatSpec;
use crate::terms::{
    enumerate_sort, is_infinite_sort, name, normalize_binding, unify_args,
    ActionLabel, AtomSetDef, Binding, Name, Proc, ProcExpr, SetRef, Term, META_PREFIX,
};

/// Consecutive instantiations allowed without producing an action.
pub const UNFOLD_BUDGET: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemError {
    #[error("unguarded recursion: unfolding {0} exceeds {UNFOLD_BUDGET} instantiations without an action")]
    Unguarded(String),
    #[error("sum over infinite sort {sort} has no communication partner (state {state})")]
    UnboundSum { sort: String, state: String },
    #[error("free variable {var} in process expression {expr}")]
    FreeVariable { var: String, expr: String },
    #[error("{0}")]
    Sort(String),
    #[error("unknown process {0}")]
    UnknownProcess(String),
    #[error("the transition system is truncated; raise the state bound")]
    Truncated,
}

/// Position of a component in a configuration: one entry per `||` (0 = left,
/// 1 = right) or `disrupt` (0 = body, 1 = disruptor) passed on the way down.
pub type Path = Vec<u8>;

/// One derivative of a configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub label: ActionLabel,
    /// `None` when the step terminates the configuration.
    pub next: Option<Proc>,
    /// The label came out of a communication (and may not communicate again).
    pub comm: bool,
    pub participants: Vec<Path>,
}

/// A state of the transition system.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Config {
    Running(Proc),
    Terminated,
    /// State without a process term (synthetic or quotient systems).
    Abstract(usize),
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Config::Running(p) => write!(f, "{p}"),
            Config::Terminated => write!(f, "<terminated>"),
            Config::Abstract(i) => write!(f, "s{i}"),
        }
    }
}

impl Config {
    pub fn from_next(next: &Option<Proc>) -> Config {
        match next {
            Some(p) => Config::Running(p.canonical()),
            None => Config::Terminated,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub from: usize,
    pub label: ActionLabel,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lts {
    pub states: Vec<Config>,
    pub transitions: Vec<Transition>,
    pub initial: usize,
    pub terminating: BTreeSet<usize>,
    pub truncated: bool,
}

impl Lts {
    /// A process-free system over `n` states, for tests and quotients.
    pub fn synthetic(n: usize, initial: usize, edges: &[(usize, ActionLabel, usize)]) -> Lts {
        let mut transitions: Vec<Transition> = edges
            .iter()
            .map(|(f, l, t)| Transition {
                from: *f,
                label: l.clone(),
                to: *t,
            })
            .collect();
        transitions.sort();
        transitions.dedup();
        Lts {
            states: (0..n).map(Config::Abstract).collect(),
            transitions,
            initial,
            terminating: BTreeSet::new(),
            truncated: false,
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Outgoing transitions indexed by source state.
    pub fn successors(&self) -> Vec<Vec<(ActionLabel, usize)>> {
        let mut out = vec![Vec::new(); self.states.len()];
        for t in &self.transitions {
            out[t.from].push((t.label.clone(), t.to));
        }
        out
    }

    /// Line-oriented export: `des (initial, #transitions, #states)` then one
    /// `(from,"label",to)` per transition.
    pub fn to_aut(&self) -> String {
        let mut s = format!(
            "des ({}, {}, {})\n",
            self.initial,
            self.transitions.len(),
            self.states.len()
        );
        for t in &self.transitions {
            s.push_str(&format!("({},\"{}\",{})\n", t.from, t.label, t.to));
        }
        s
    }
}

/// Per-specification tables the stepper precomputes.
#[derive(Debug)]
pub struct StepTables {
    /// Ground elements of every finite sort; `None` for infinite sorts.
    carriers: BTreeMap<Name, Option<Vec<Term>>>,
    /// Processes whose unfolding can recurse without passing an action.
    unguarded: BTreeSet<Name>,
}

impl StepTables {
    pub fn new(spec: &FlatSpec) -> Result<StepTables, SemError> {
        let mut carriers = BTreeMap::new();
        for s in &spec.sorts {
            let c = if is_infinite_sort(spec, s) {
                None
            } else {
                Some(enumerate_sort(spec, s, None).map_err(|e| SemError::Sort(e.to_string()))?)
            };
            carriers.insert(s.clone(), c);
        }
        Ok(StepTables {
            carriers,
            unguarded: unguarded_processes(spec),
        })
    }
}

/// Computes one-step derivatives against a fixed specification.
pub struct Stepper<'a> {
    spec: &'a FlatSpec,
    tables: Arc<StepTables>,
}

struct Ctx {
    fresh: usize,
}

impl<'a> Stepper<'a> {
    pub fn new(spec: &'a FlatSpec) -> Result<Stepper<'a>, SemError> {
        Ok(Stepper {
            spec,
            tables: Arc::new(StepTables::new(spec)?),
        })
    }

    /// A stepper reusing tables built for the same specification.
    pub fn with_tables(spec: &'a FlatSpec, tables: Arc<StepTables>) -> Stepper<'a> {
        Stepper { spec, tables }
    }

    pub fn tables(&self) -> &Arc<StepTables> {
        &self.tables
    }

    pub fn spec(&self) -> &FlatSpec {
        self.spec
    }

    /// All derivatives of `p`, in a deterministic order, without duplicates.
    pub fn step(&self, p: &Proc) -> Result<Vec<Step>, SemError> {
        let mut ctx = Ctx { fresh: 0 };
        let mut steps = self.steps(p, &mut ctx, 0)?;
        let mut seen = BTreeSet::new();
        steps.retain(|s| {
            let key = (s.label.clone(), s.next.as_ref().map(|n| n.canonical()), s.participants.clone());
            seen.insert(key)
        });
        Ok(steps)
    }

    fn steps(&self, p: &Proc, ctx: &mut Ctx, unfold: usize) -> Result<Vec<Step>, SemError> {
        Ok(match &**p {
            ProcExpr::Atom(a, args) => {
                for t in args {
                    let mut vs = Vec::new();
                    t.collect_vars(&mut vs);
                    if let Some((v, _)) = vs.iter().find(|(v, _)| !v.starts_with(META_PREFIX)) {
                        return Err(SemError::FreeVariable {
                            var: v.to_string(),
                            expr: p.to_string(),
                        });
                    }
                }
                vec![Step {
                    label: ActionLabel::Act {
                        atom: a.clone(),
                        args: args.clone(),
                    },
                    next: None,
                    comm: false,
                    participants: vec![Vec::new()],
                }]
            }
            ProcExpr::Skip => vec![Step {
                label: ActionLabel::Tau,
                next: None,
                comm: false,
                participants: vec![Vec::new()],
            }],
            ProcExpr::Delta | ProcExpr::Done => Vec::new(),
            ProcExpr::Inst(n, args) => {
                if unfold >= UNFOLD_BUDGET || self.tables.unguarded.contains(n) {
                    return Err(SemError::Unguarded(n.to_string()));
                }
                let Some(def) = self.spec.def(n) else {
                    if self.spec.process(n).is_some_and(|s| s.formal) {
                        return Ok(Vec::new());
                    }
                    return Err(SemError::UnknownProcess(n.to_string()));
                };
                let binding: Binding = def
                    .formals
                    .iter()
                    .zip(args)
                    .map(|((v, _), t)| (v.clone(), t.clone()))
                    .collect();
                let body = def.body.apply(&binding);
                self.steps(&body, ctx, unfold + 1)?
            }
            ProcExpr::Alt(l, r) => {
                let mut out = self.steps(l, ctx, unfold)?;
                out.extend(self.steps(r, ctx, unfold)?);
                out
            }
            ProcExpr::Seq(l, r) => self
                .steps(l, ctx, unfold)?
                .into_iter()
                .map(|s| Step {
                    next: Some(match s.next {
                        Some(n) => ProcExpr::seq(n, r.clone()),
                        None => r.clone(),
                    }),
                    ..s
                })
                .collect(),
            ProcExpr::Star(body, exit) => {
                let mut out: Vec<Step> = self
                    .steps(body, ctx, unfold)?
                    .into_iter()
                    .map(|s| Step {
                        next: Some(match s.next {
                            Some(n) => ProcExpr::seq(n, p.clone()),
                            None => p.clone(),
                        }),
                        ..s
                    })
                    .collect();
                out.extend(self.steps(exit, ctx, unfold)?);
                out
            }
            ProcExpr::Par(l, r) => self.par_steps(l, r, ctx, unfold)?,
            ProcExpr::Sum(v, sort, body) => {
                let mut out = Vec::new();
                match self.tables.carriers.get(sort) {
                    Some(Some(elems)) => {
                        for t in elems {
                            let b: Binding = [(v.clone(), t.clone())].into_iter().collect();
                            out.extend(self.steps(&body.apply(&b), ctx, unfold)?);
                        }
                    }
                    Some(None) => {
                        ctx.fresh += 1;
                        let meta = Term::var(&format!("{META_PREFIX}{}", ctx.fresh), sort);
                        let b: Binding = [(v.clone(), meta)].into_iter().collect();
                        out.extend(self.steps(&body.apply(&b), ctx, unfold)?);
                    }
                    None => return Err(SemError::Sort(format!("unknown sort {sort}"))),
                }
                out
            }
            ProcExpr::Encaps(h, body) => {
                let set = self.resolve_set(h)?;
                self.steps(body, ctx, unfold)?
                    .into_iter()
                    .filter(|s| !set.contains(&s.label))
                    .map(|s| Step {
                        next: s.next.map(|n| ProcExpr::encaps(h.clone(), n)),
                        ..s
                    })
                    .collect()
            }
            ProcExpr::Hide(h, body) => {
                let set = self.resolve_set(h)?;
                self.steps(body, ctx, unfold)?
                    .into_iter()
                    .map(|s| Step {
                        label: if set.contains(&s.label) {
                            ActionLabel::Tau
                        } else {
                            s.label
                        },
                        next: s.next.map(|n| ProcExpr::hide(h.clone(), n)),
                        ..s
                    })
                    .collect()
            }
            ProcExpr::Disrupt(body, dis) => {
                let mut out: Vec<Step> = self
                    .steps(body, ctx, unfold)?
                    .into_iter()
                    .map(|s| Step {
                        next: s.next.map(|n| ProcExpr::disrupt(n, dis.clone())),
                        participants: prefix(0, s.participants),
                        ..s
                    })
                    .collect();
                out.extend(self.steps(dis, ctx, unfold)?.into_iter().map(|s| Step {
                    participants: prefix(1, s.participants),
                    ..s
                }));
                out
            }
        })
    }

    fn par_steps(&self, l: &Proc, r: &Proc, ctx: &mut Ctx, unfold: usize) -> Result<Vec<Step>, SemError> {
        let ls = self.steps(l, ctx, unfold)?;
        let rs = self.steps(r, ctx, unfold)?;
        let join = |a: Option<Proc>, b: Option<Proc>| match (a, b) {
            (None, None) => None,
            (a, b) => Some(ProcExpr::par(
                a.unwrap_or_else(done),
                b.unwrap_or_else(done),
            )),
        };
        let l_now = || if matches!(**l, ProcExpr::Done) { None } else { Some(l.clone()) };
        let r_now = || if matches!(**r, ProcExpr::Done) { None } else { Some(r.clone()) };
        let mut out = Vec::new();
        for s in &ls {
            out.push(Step {
                label: s.label.clone(),
                next: join(s.next.clone(), r_now()),
                comm: s.comm,
                participants: prefix(0, s.participants.clone()),
            });
        }
        for s in &rs {
            out.push(Step {
                label: s.label.clone(),
                next: join(l_now(), s.next.clone()),
                comm: s.comm,
                participants: prefix(1, s.participants.clone()),
            });
        }
        for a in ls.iter().filter(|s| !s.comm && !s.label.is_tau()) {
            for b in rs.iter().filter(|s| !s.comm && !s.label.is_tau()) {
                for (label, mgu) in self.communicate(&a.label, &b.label) {
                    let na = a.next.as_ref().map(|n| n.apply(&mgu));
                    let nb = b.next.as_ref().map(|n| n.apply(&mgu));
                    let mut participants = prefix(0, a.participants.clone());
                    participants.extend(prefix(1, b.participants.clone()));
                    out.push(Step {
                        label,
                        next: join(na, nb),
                        comm: true,
                        participants,
                    });
                }
            }
        }
        Ok(out)
    }

    /// Results of communicating two labels, each with the unifier it imposes
    /// on metavariables.
    pub fn communicate(&self, la: &ActionLabel, lb: &ActionLabel) -> Vec<(ActionLabel, Binding)> {
        let mut out = Vec::new();
        let (ActionLabel::Act { atom: aa, args: xa }, ActionLabel::Act { atom: ab, args: xb }) =
            (la, lb)
        else {
            return out;
        };
        for rule in &self.spec.comms {
            for (p, q) in [(&rule.lhs_a, &rule.lhs_b), (&rule.lhs_b, &rule.lhs_a)] {
                if p.atom != *aa || q.atom != *ab {
                    continue;
                }
                let mut s = Binding::new();
                if !unify_args(&p.args, xa, &mut s) || !unify_args(&q.args, xb, &mut s) {
                    continue;
                }
                let s = normalize_binding(&s);
                let label = rule.result.apply(&s).to_label();
                let metas: Binding = s
                    .into_iter()
                    .filter(|(k, _)| k.starts_with(META_PREFIX))
                    .collect();
                if !out.iter().any(|(l, _)| *l == label) {
                    out.push((label, metas));
                }
            }
        }
        out
    }

    fn resolve_set(&self, h: &SetRef) -> Result<AtomSetDef, SemError> {
        match h {
            SetRef::Named(n) => self
                .spec
                .set(n)
                .cloned()
                .ok_or_else(|| SemError::Sort(format!("unknown atom set {n}"))),
            SetRef::Inline(ms) => Ok(AtomSetDef {
                name: name("{}"),
                members: ms.clone(),
                quantifiers: Vec::new(),
            }),
        }
    }
}

/// Processes that reach a call cycle through unguarded positions (the
/// alternatives, both sides of `||`, `*` and `disrupt`, and the left of `.`).
/// Unfolding any of them never bottoms out in an action.
pub fn unguarded_processes(spec: &FlatSpec) -> BTreeSet<Name> {
    fn calls(p: &ProcExpr, out: &mut BTreeSet<Name>) {
        match p {
            ProcExpr::Inst(n, _) => {
                out.insert(n.clone());
            }
            ProcExpr::Atom(..) | ProcExpr::Skip | ProcExpr::Delta | ProcExpr::Done => {}
            ProcExpr::Seq(l, _) => calls(l, out),
            ProcExpr::Alt(l, r)
            | ProcExpr::Par(l, r)
            | ProcExpr::Star(l, r)
            | ProcExpr::Disrupt(l, r) => {
                calls(l, out);
                calls(r, out);
            }
            ProcExpr::Sum(_, _, b) | ProcExpr::Encaps(_, b) | ProcExpr::Hide(_, b) => calls(b, out),
        }
    }
    let graph: BTreeMap<Name, BTreeSet<Name>> = spec
        .defs
        .iter()
        .map(|(n, d)| {
            let mut out = BTreeSet::new();
            calls(&d.body, &mut out);
            (n.clone(), out)
        })
        .collect();
    let reach = |from: &Name| {
        let mut seen = BTreeSet::new();
        let mut todo: Vec<Name> = graph.get(from).into_iter().flatten().cloned().collect();
        while let Some(n) = todo.pop() {
            if seen.insert(n.clone()) {
                todo.extend(graph.get(&n).into_iter().flatten().cloned());
            }
        }
        seen
    };
    let reaches: BTreeMap<Name, BTreeSet<Name>> =
        graph.keys().map(|n| (n.clone(), reach(n))).collect();
    let cyclic: BTreeSet<Name> = reaches
        .iter()
        .filter(|(n, r)| r.contains(*n))
        .map(|(n, _)| n.clone())
        .collect();
    reaches
        .into_iter()
        .filter(|(n, r)| cyclic.contains(n) || r.iter().any(|m| cyclic.contains(m)))
        .map(|(n, _)| n)
        .collect()
}

fn done() -> Proc {
    Arc::new(ProcExpr::Done)
}

fn prefix(d: u8, paths: Vec<Path>) -> Vec<Path> {
    paths
        .into_iter()
        .map(|mut p| {
            p.insert(0, d);
            p
        })
        .collect()
}

/// Whether a set membership test could be decided differently by
/// instantiating metavariables in `label`.
pub fn metas_in(label: &ActionLabel) -> Vec<(Name, Name)> {
    let mut vs = Vec::new();
    label.args().iter().for_each(|t| t.collect_vars(&mut vs));
    vs.retain(|(v, _)| v.starts_with(META_PREFIX));
    vs
}

#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub max_states: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { max_states: 100_000 }
    }
}

/// Instantiation of a declared process as an entry expression.
pub fn entry(spec: &FlatSpec, process: &str, args: Vec<Term>) -> Result<Proc, SemError> {
    match spec.process(process) {
        Some(sig) if sig.arg_sorts.len() == args.len() => Ok(ProcExpr::inst(process, args)),
        _ => Err(SemError::UnknownProcess(process.to_string())),
    }
}

/// Breadth-first closure of [`Stepper::step`] from `init`.
pub fn build_lts(spec: &FlatSpec, init: &Proc, opts: &BuildOptions) -> Result<Lts, SemError> {
    let stepper = Stepper::new(spec)?;
    build_lts_with(&stepper, init, opts)
}

pub fn build_lts_with(stepper: &Stepper<'_>, init: &Proc, opts: &BuildOptions) -> Result<Lts, SemError> {
    let mut states = vec![Config::Running(init.canonical())];
    let mut index: HashMap<Config, usize> = HashMap::new();
    index.insert(states[0].clone(), 0);
    let mut transitions = Vec::new();
    let mut terminating = BTreeSet::new();
    let mut truncated = false;
    let mut cursor = 0;
    while cursor < states.len() {
        let from = cursor;
        cursor += 1;
        let p = match &states[from] {
            Config::Running(p) => p.clone(),
            _ => {
                terminating.insert(from);
                continue;
            }
        };
        let mut seen = BTreeSet::new();
        for s in stepper.step(&p)? {
            if let Some((_, sort)) = metas_in(&s.label).into_iter().next() {
                return Err(SemError::UnboundSum {
                    sort: sort.to_string(),
                    state: p.to_string(),
                });
            }
            if let Some(n) = &s.next {
                if n.has_meta() {
                    let mut vs = Vec::new();
                    n.free_vars(&mut vs);
                    let sort = vs
                        .into_iter()
                        .find(|(v, _)| v.starts_with(META_PREFIX))
                        .map(|(_, s)| s.to_string())
                        .unwrap_or_default();
                    return Err(SemError::UnboundSum {
                        sort,
                        state: p.to_string(),
                    });
                }
            }
            let cfg = Config::from_next(&s.next);
            let to = match index.get(&cfg) {
                Some(&i) => i,
                None => {
                    if states.len() >= opts.max_states {
                        truncated = true;
                        continue;
                    }
                    states.push(cfg.clone());
                    index.insert(cfg, states.len() - 1);
                    states.len() - 1
                }
            };
            if seen.insert((s.label.clone(), to)) {
                transitions.push(Transition {
                    from,
                    label: s.label,
                    to,
                });
            }
        }
    }
    Ok(Lts {
        states,
        transitions,
        initial: 0,
        terminating,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linker::flatten;
    use crate::syntax::parse_spec;

    fn spec(src: &str) -> FlatSpec {
        flatten(&parse_spec(src).unwrap(), "M").unwrap()
    }

    fn labels(steps: &[Step]) -> Vec<String> {
        steps.iter().map(|s| s.label.to_string()).collect()
    }

    #[test]
    fn sequence_steps_left_then_right() {
        let sp = spec("process module M begin atoms a b processes P definitions P = a . b end M");
        let st = Stepper::new(&sp).unwrap();
        let s = st.step(&ProcExpr::inst("P", vec![])).unwrap();
        assert_eq!(labels(&s), vec!["a"]);
        assert_eq!(s[0].next.as_ref().unwrap().to_string(), "b");
        let s2 = st.step(s[0].next.as_ref().unwrap()).unwrap();
        assert_eq!(labels(&s2), vec!["b"]);
        assert!(s2[0].next.is_none());
    }

    #[test]
    fn star_with_delta_loops() {
        let sp = spec("process module M begin atoms a processes P definitions P = a * delta end M");
        let lts = build_lts(&sp, &ProcExpr::inst("P", vec![]), &BuildOptions::default()).unwrap();
        assert_eq!(lts.num_states(), 2);
        // the entry instantiation and the unfolded loop are distinct configurations
        let from_loop: Vec<_> = lts.transitions.iter().filter(|t| t.from == 1).collect();
        assert_eq!(from_loop.len(), 1);
        assert_eq!(from_loop[0].to, 1);
    }

    #[test]
    fn unguarded_recursion_is_detected() {
        let sp = spec("process module M begin atoms a processes P definitions P = P + a end M");
        let err = Stepper::new(&sp).unwrap().step(&ProcExpr::inst("P", vec![])).unwrap_err();
        assert!(matches!(err, SemError::Unguarded(_)));
    }

    #[test]
    fn export_format() {
        let sp = spec("process module M begin atoms a b processes P definitions P = a . b end M");
        let lts = build_lts(&sp, &ProcExpr::inst("P", vec![]), &BuildOptions::default()).unwrap();
        assert_eq!(lts.to_aut(), "des (0, 2, 3)\n(0,\"a\",1)\n(1,\"b\",2)\n");
    }

    #[test]
    fn unbounded_sum_without_partner_names_the_sort() {
        let sp = spec(
            "data module T begin exports begin sorts N functions z : N s : N -> N end end T
             process module M begin imports T atoms r : N processes P
             definitions P = sum(x in N, r(x)) end M",
        );
        let err = build_lts(&sp, &ProcExpr::inst("P", vec![]), &BuildOptions::default()).unwrap_err();
        assert_eq!(
            err,
            SemError::UnboundSum {
                sort: "N".into(),
                state: "P".into()
            }
        );
    }

    #[test]
    fn late_instantiation_through_communication() {
        let sp = spec(
            "data module T begin exports begin sorts N functions z : N s : N -> N end end T
             process module M begin imports T atoms snd : N rec : N c : N
             processes P
             sets of atoms H = { snd(x), rec(x) | x in N }
             communications snd(x) | rec(x) = c(x) for x in N
             definitions P = encaps(H, snd(s(z)) || sum(x in N, rec(x) . snd(x))) end M",
        );
        let lts = build_lts(&sp, &ProcExpr::inst("P", vec![]), &BuildOptions::default()).unwrap();
        let labels: Vec<String> = lts.transitions.iter().map(|t| t.label.to_string()).collect();
        assert_eq!(labels, vec!["c(s(z))"]);
    }

    #[test]
    fn truncation_is_flagged() {
        let sp = spec(
            "data module T begin exports begin sorts N functions z : N s : N -> N end end T
             process module M begin imports T atoms a processes P : N
             definitions P(n) = a . P(s(n)) end M",
        );
        let init = entry(&sp, "P", vec![Term::constant("z", "N")]).unwrap();
        let lts = build_lts(&sp, &init, &BuildOptions { max_states: 5 }).unwrap();
        assert!(lts.truncated);
        assert_eq!(lts.num_states(), 5);
    }
}
