//! Data terms, action labels and process expressions.
//!
//! Every later stage (linker, semantics, refinement, runtime) works on these
//! resolved forms. Terms carry their sort so that matching and unification
//! can check well-sortedness without consulting the specification.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::flat::FlatSpec;

/// Interned-ish identifier. Cheap to clone, compared by content.
pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// Prefix reserved for unification variables introduced by the semantics.
pub const META_PREFIX: char = '?';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TermError {
    #[error("sort mismatch: variable {var} has sort {expected}, replacement {term} has sort {found}")]
    SortMismatch {
        var: String,
        expected: String,
        term: String,
        found: String,
    },
    #[error("infinite sort {0}: a depth bound is required to enumerate it")]
    InfiniteSort(String),
    #[error("unknown sort {0}")]
    UnknownSort(String),
}

/// A sort declaration. Only the name matters after linking.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sort {
    pub name: Name,
}

/// Constructor signature; zero arguments denotes a constant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncSig {
    pub name: Name,
    pub arg_sorts: Vec<Name>,
    pub result_sort: Name,
}

impl FuncSig {
    pub fn arity(&self) -> usize {
        self.arg_sorts.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var { name: Name, sort: Name },
    App { ctor: Name, sort: Name, args: Vec<Term> },
    /// Natural-number literal of a sort declared under `literals`.
    Lit { value: u64, sort: Name },
}

/// Variable name to replacement term.
pub type Binding = BTreeMap<Name, Term>;

impl Term {
    pub fn var(name: &str, sort: &str) -> Term {
        Term::Var {
            name: self::name(name),
            sort: self::name(sort),
        }
    }

    pub fn constant(ctor: &str, sort: &str) -> Term {
        Term::App {
            ctor: name(ctor),
            sort: name(sort),
            args: Vec::new(),
        }
    }

    pub fn app(ctor: &str, sort: &str, args: Vec<Term>) -> Term {
        Term::App {
            ctor: name(ctor),
            sort: name(sort),
            args,
        }
    }

    pub fn lit(value: u64, sort: &str) -> Term {
        Term::Lit {
            value,
            sort: name(sort),
        }
    }

    pub fn sort(&self) -> &Name {
        match self {
            Term::Var { sort, .. } | Term::App { sort, .. } | Term::Lit { sort, .. } => sort,
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var { .. } => false,
            Term::Lit { .. } => true,
            Term::App { args, .. } => args.iter().all(Term::is_ground),
        }
    }

    pub fn has_meta(&self) -> bool {
        match self {
            Term::Var { name, .. } => name.starts_with(META_PREFIX),
            Term::Lit { .. } => false,
            Term::App { args, .. } => args.iter().any(Term::has_meta),
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<(Name, Name)>) {
        match self {
            Term::Var { name, sort } => {
                if !out.iter().any(|(n, _)| n == name) {
                    out.push((name.clone(), sort.clone()));
                }
            }
            Term::Lit { .. } => {}
            Term::App { args, .. } => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Checked substitution: every replaced variable must agree on sort.
    pub fn substitute(&self, binding: &Binding) -> Result<Term, TermError> {
        match self {
            Term::Var { name, sort } => match binding.get(name) {
                Some(t) if t.sort() != sort => Err(TermError::SortMismatch {
                    var: name.to_string(),
                    expected: sort.to_string(),
                    term: t.to_string(),
                    found: t.sort().to_string(),
                }),
                Some(t) => Ok(t.clone()),
                None => Ok(self.clone()),
            },
            Term::Lit { .. } => Ok(self.clone()),
            Term::App { ctor, sort, args } => Ok(Term::App {
                ctor: ctor.clone(),
                sort: sort.clone(),
                args: args
                    .iter()
                    .map(|a| a.substitute(binding))
                    .collect::<Result<_, _>>()?,
            }),
        }
    }

    /// Substitution without sort checks, for bindings produced by the
    /// sort-aware unifier.
    pub fn apply(&self, binding: &Binding) -> Term {
        match self {
            Term::Var { name, .. } => match binding.get(name) {
                Some(t) => t.clone(),
                None => self.clone(),
            },
            Term::Lit { .. } => self.clone(),
            Term::App { ctor, sort, args } => {
                if binding.is_empty() || args.is_empty() {
                    return self.clone();
                }
                Term::App {
                    ctor: ctor.clone(),
                    sort: sort.clone(),
                    args: args.iter().map(|a| a.apply(binding)).collect(),
                }
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var { name, .. } => write!(f, "{name}"),
            Term::Lit { value, .. } => write!(f, "{value}"),
            Term::App { ctor, args, .. } => {
                if &**ctor == ">>" && args.len() == 2 {
                    return write!(f, "{} >> {}", args[0], args[1]);
                }
                write!(f, "{ctor}")?;
                write_args(f, args)
            }
        }
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    if args.is_empty() {
        return Ok(());
    }
    write!(f, "(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{a}")?;
    }
    write!(f, ")")
}

/// Label of a transition: the silent step or a ground atomic action.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionLabel {
    Tau,
    Act { atom: Name, args: Vec<Term> },
}

impl ActionLabel {
    pub fn act(atom: &str, args: Vec<Term>) -> ActionLabel {
        ActionLabel::Act {
            atom: name(atom),
            args,
        }
    }

    pub fn is_tau(&self) -> bool {
        matches!(self, ActionLabel::Tau)
    }

    pub fn atom(&self) -> Option<&Name> {
        match self {
            ActionLabel::Tau => None,
            ActionLabel::Act { atom, .. } => Some(atom),
        }
    }

    pub fn args(&self) -> &[Term] {
        match self {
            ActionLabel::Tau => &[],
            ActionLabel::Act { args, .. } => args,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args().iter().all(Term::is_ground)
    }

    pub fn has_meta(&self) -> bool {
        self.args().iter().any(Term::has_meta)
    }

    pub fn apply(&self, binding: &Binding) -> ActionLabel {
        match self {
            ActionLabel::Tau => ActionLabel::Tau,
            ActionLabel::Act { atom, args } => ActionLabel::Act {
                atom: atom.clone(),
                args: args.iter().map(|a| a.apply(binding)).collect(),
            },
        }
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionLabel::Tau => write!(f, "tau"),
            ActionLabel::Act { atom, args } => {
                write!(f, "{atom}")?;
                write_args(f, args)
            }
        }
    }
}

/// An atom applied to terms that may contain variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomPattern {
    pub atom: Name,
    pub args: Vec<Term>,
}

impl AtomPattern {
    pub fn new(atom: &str, args: Vec<Term>) -> AtomPattern {
        AtomPattern {
            atom: name(atom),
            args,
        }
    }

    pub fn to_label(&self) -> ActionLabel {
        ActionLabel::Act {
            atom: self.atom.clone(),
            args: self.args.clone(),
        }
    }

    pub fn apply(&self, binding: &Binding) -> AtomPattern {
        AtomPattern {
            atom: self.atom.clone(),
            args: self.args.iter().map(|a| a.apply(binding)).collect(),
        }
    }
}

impl fmt::Display for AtomPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.atom)?;
        write_args(f, &self.args)
    }
}

/// Variable binder `v in S` used by sums, communications and atom sets.
pub type Quantifier = (Name, Name);

/// `a | b = c for ...`: binary communication between two atom patterns.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CommRule {
    pub lhs_a: AtomPattern,
    pub lhs_b: AtomPattern,
    pub result: AtomPattern,
    pub quantifiers: Vec<Quantifier>,
}

impl fmt::Display for CommRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} | {} = {}", self.lhs_a, self.lhs_b, self.result)?;
        write_binders(f, " for ", &self.quantifiers)
    }
}

fn write_binders(f: &mut fmt::Formatter<'_>, lead: &str, qs: &[Quantifier]) -> fmt::Result {
    for (i, (v, s)) in qs.iter().enumerate() {
        write!(f, "{}{v} in {s}", if i == 0 { lead } else { ", " })?;
    }
    Ok(())
}

/// A named set of atoms, `{ members | binders }`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomSetDef {
    pub name: Name,
    pub members: Vec<AtomPattern>,
    pub quantifiers: Vec<Quantifier>,
}

impl AtomSetDef {
    /// Membership of a ground label; tau is never a member.
    pub fn contains(&self, label: &ActionLabel) -> bool {
        self.members
            .iter()
            .any(|m| match_action(m, &self.quantifiers, label).is_some())
    }
}

impl fmt::Display for AtomSetDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {{", self.name)?;
        for (i, m) in self.members.iter().enumerate() {
            write!(f, "{}{m}", if i == 0 { " " } else { ", " })?;
        }
        if !self.quantifiers.is_empty() {
            write_binders(f, " | ", &self.quantifiers)?;
        }
        write!(f, " }}")
    }
}

/// Reference to an atom set from `encaps`/`hide`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SetRef {
    Named(Name),
    Inline(Vec<AtomPattern>),
}

impl fmt::Display for SetRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetRef::Named(n) => write!(f, "{n}"),
            SetRef::Inline(ms) => {
                write!(f, "{{")?;
                for (i, m) in ms.iter().enumerate() {
                    write!(f, "{}{m}", if i == 0 { "" } else { ", " })?;
                }
                write!(f, "}}")
            }
        }
    }
}

pub type Proc = Arc<ProcExpr>;

/// Resolved process expression.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProcExpr {
    Atom(Name, Vec<Term>),
    Delta,
    Skip,
    /// A parallel operand that has terminated successfully.
    Done,
    Inst(Name, Vec<Term>),
    Alt(Proc, Proc),
    Seq(Proc, Proc),
    Par(Proc, Proc),
    Sum(Name, Name, Proc),
    Encaps(SetRef, Proc),
    Hide(SetRef, Proc),
    Disrupt(Proc, Proc),
    /// Binary iteration `body * exit`.
    Star(Proc, Proc),
}

impl ProcExpr {
    pub fn atom(a: &str, args: Vec<Term>) -> Proc {
        Arc::new(ProcExpr::Atom(name(a), args))
    }

    pub fn inst(p: &str, args: Vec<Term>) -> Proc {
        Arc::new(ProcExpr::Inst(name(p), args))
    }

    pub fn alt(l: Proc, r: Proc) -> Proc {
        Arc::new(ProcExpr::Alt(l, r))
    }

    pub fn seq(l: Proc, r: Proc) -> Proc {
        Arc::new(ProcExpr::Seq(l, r))
    }

    pub fn par(l: Proc, r: Proc) -> Proc {
        Arc::new(ProcExpr::Par(l, r))
    }

    pub fn star(l: Proc, r: Proc) -> Proc {
        Arc::new(ProcExpr::Star(l, r))
    }

    pub fn delta() -> Proc {
        Arc::new(ProcExpr::Delta)
    }

    pub fn skip() -> Proc {
        Arc::new(ProcExpr::Skip)
    }

    pub fn sum(var: &str, sort: &str, body: Proc) -> Proc {
        Arc::new(ProcExpr::Sum(name(var), name(sort), body))
    }

    pub fn encaps(set: SetRef, body: Proc) -> Proc {
        Arc::new(ProcExpr::Encaps(set, body))
    }

    pub fn hide(set: SetRef, body: Proc) -> Proc {
        Arc::new(ProcExpr::Hide(set, body))
    }

    pub fn disrupt(body: Proc, disruptor: Proc) -> Proc {
        Arc::new(ProcExpr::Disrupt(body, disruptor))
    }

    /// Checked substitution of data variables; sum binders shadow.
    pub fn substitute(self: &Proc, binding: &Binding) -> Result<Proc, TermError> {
        subst_proc(self, binding, true)
    }

    /// Unchecked substitution for unifier output.
    pub fn apply(self: &Proc, binding: &Binding) -> Proc {
        if binding.is_empty() {
            return self.clone();
        }
        subst_proc(self, binding, false).expect("unchecked substitution cannot fail")
    }

    /// All data terms are ground (no free variables of any kind).
    pub fn is_ground(&self) -> bool {
        let mut vars = Vec::new();
        self.free_vars(&mut vars);
        vars.is_empty()
    }

    pub fn has_meta(&self) -> bool {
        let mut vars = Vec::new();
        self.free_vars(&mut vars);
        vars.iter().any(|(n, _)| n.starts_with(META_PREFIX))
    }

    pub fn free_vars(&self, out: &mut Vec<(Name, Name)>) {
        match self {
            ProcExpr::Atom(_, args) | ProcExpr::Inst(_, args) => {
                args.iter().for_each(|a| a.collect_vars(out))
            }
            ProcExpr::Delta | ProcExpr::Skip | ProcExpr::Done => {}
            ProcExpr::Alt(l, r)
            | ProcExpr::Seq(l, r)
            | ProcExpr::Par(l, r)
            | ProcExpr::Disrupt(l, r)
            | ProcExpr::Star(l, r) => {
                l.free_vars(out);
                r.free_vars(out);
            }
            ProcExpr::Sum(v, _, body) => {
                let mut inner = Vec::new();
                body.free_vars(&mut inner);
                for (n, s) in inner {
                    if &n != v && !out.iter().any(|(o, _)| *o == n) {
                        out.push((n, s));
                    }
                }
            }
            ProcExpr::Encaps(_, body) | ProcExpr::Hide(_, body) => body.free_vars(out),
        }
    }

    /// Canonical form: `.` right-nested, `+` flattened and ordered, applied
    /// bottom-up. Used as the state-identity key.
    pub fn canonical(self: &Proc) -> Proc {
        match &**self {
            ProcExpr::Atom(..) | ProcExpr::Inst(..) | ProcExpr::Delta | ProcExpr::Skip | ProcExpr::Done => {
                self.clone()
            }
            ProcExpr::Alt(l, r) => {
                if !matches!(**l, ProcExpr::Alt(..)) {
                    let (lc, rc) = (l.canonical(), r.canonical());
                    let head = match &*rc {
                        ProcExpr::Alt(h, _) => h,
                        _ => &rc,
                    };
                    if Arc::ptr_eq(l, &lc) && Arc::ptr_eq(r, &rc) && lc <= *head {
                        return self.clone();
                    }
                }
                let mut alts = Vec::new();
                collect_alts(self, &mut alts);
                let mut alts: Vec<Proc> = alts.into_iter().map(|a| a.canonical()).collect();
                // canonicalizing a child can expose nested alternatives again
                let mut flat = Vec::with_capacity(alts.len());
                for a in alts.drain(..) {
                    collect_alts(&a, &mut flat);
                }
                flat.sort();
                let mut it = flat.into_iter().rev();
                let mut acc = it.next().expect("alternative has children");
                for a in it {
                    acc = ProcExpr::alt(a, acc);
                }
                acc
            }
            ProcExpr::Seq(l, r) => {
                if !matches!(**l, ProcExpr::Seq(..)) {
                    let lc = l.canonical();
                    if Arc::ptr_eq(l, &lc) && !matches!(*lc, ProcExpr::Seq(..)) {
                        return keep2(self, (l, r), (lc, r.canonical()), ProcExpr::seq);
                    }
                }
                let mut items = Vec::new();
                collect_seq(self, &mut items);
                let items: Vec<Proc> = items.into_iter().map(|i| i.canonical()).collect();
                let mut flat = Vec::with_capacity(items.len());
                for i in items {
                    collect_seq(&i, &mut flat);
                }
                let mut it = flat.into_iter().rev();
                let mut acc = it.next().expect("sequence has children");
                for i in it {
                    acc = ProcExpr::seq(i, acc);
                }
                acc
            }
            ProcExpr::Par(l, r) => keep2(self, (l, r), (l.canonical(), r.canonical()), ProcExpr::par),
            ProcExpr::Disrupt(l, r) => keep2(self, (l, r), (l.canonical(), r.canonical()), ProcExpr::disrupt),
            ProcExpr::Star(l, r) => keep2(self, (l, r), (l.canonical(), r.canonical()), ProcExpr::star),
            ProcExpr::Sum(v, s, b) => keep1(self, b, b.canonical(), |nb| {
                Arc::new(ProcExpr::Sum(v.clone(), s.clone(), nb))
            }),
            ProcExpr::Encaps(h, b) => keep1(self, b, b.canonical(), |nb| ProcExpr::encaps(h.clone(), nb)),
            ProcExpr::Hide(h, b) => keep1(self, b, b.canonical(), |nb| ProcExpr::hide(h.clone(), nb)),
        }
    }

    /// Process names referenced through instantiation, in first-occurrence order.
    pub fn called_processes(&self, out: &mut Vec<Name>) {
        self.walk(&mut |e| {
            if let ProcExpr::Inst(p, _) = e {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
        });
    }

    /// Pre-order traversal.
    pub fn walk(&self, f: &mut dyn FnMut(&ProcExpr)) {
        f(self);
        match self {
            ProcExpr::Atom(..) | ProcExpr::Inst(..) | ProcExpr::Delta | ProcExpr::Skip | ProcExpr::Done => {}
            ProcExpr::Alt(l, r)
            | ProcExpr::Seq(l, r)
            | ProcExpr::Par(l, r)
            | ProcExpr::Disrupt(l, r)
            | ProcExpr::Star(l, r) => {
                l.walk(f);
                r.walk(f);
            }
            ProcExpr::Sum(_, _, b) | ProcExpr::Encaps(_, b) | ProcExpr::Hide(_, b) => b.walk(f),
        }
    }

    /// Bottom-up rewrite of every node.
    pub fn map_nodes(self: &Proc, f: &mut dyn FnMut(&ProcExpr) -> Option<Proc>) -> Proc {
        let rebuilt: Proc = match &**self {
            ProcExpr::Atom(..) | ProcExpr::Inst(..) | ProcExpr::Delta | ProcExpr::Skip | ProcExpr::Done => {
                self.clone()
            }
            ProcExpr::Alt(l, r) => ProcExpr::alt(l.map_nodes(f), r.map_nodes(f)),
            ProcExpr::Seq(l, r) => ProcExpr::seq(l.map_nodes(f), r.map_nodes(f)),
            ProcExpr::Par(l, r) => ProcExpr::par(l.map_nodes(f), r.map_nodes(f)),
            ProcExpr::Disrupt(l, r) => ProcExpr::disrupt(l.map_nodes(f), r.map_nodes(f)),
            ProcExpr::Star(l, r) => ProcExpr::star(l.map_nodes(f), r.map_nodes(f)),
            ProcExpr::Sum(v, s, b) => Arc::new(ProcExpr::Sum(v.clone(), s.clone(), b.map_nodes(f))),
            ProcExpr::Encaps(h, b) => ProcExpr::encaps(h.clone(), b.map_nodes(f)),
            ProcExpr::Hide(h, b) => ProcExpr::hide(h.clone(), b.map_nodes(f)),
        };
        f(&rebuilt).unwrap_or(rebuilt)
    }
}

fn collect_alts(p: &Proc, out: &mut Vec<Proc>) {
    match &**p {
        ProcExpr::Alt(l, r) => {
            collect_alts(l, out);
            collect_alts(r, out);
        }
        _ => out.push(p.clone()),
    }
}

fn collect_seq(p: &Proc, out: &mut Vec<Proc>) {
    match &**p {
        ProcExpr::Seq(l, r) => {
            collect_seq(l, out);
            collect_seq(r, out);
        }
        _ => out.push(p.clone()),
    }
}

fn subst_terms(args: &[Term], b: &Binding, checked: bool) -> Result<Vec<Term>, TermError> {
    args.iter()
        .map(|a| if checked { a.substitute(b) } else { Ok(a.apply(b)) })
        .collect()
}

fn keep2(p: &Proc, (l, r): (&Proc, &Proc), (l2, r2): (Proc, Proc), mk: fn(Proc, Proc) -> Proc) -> Proc {
    if Arc::ptr_eq(l, &l2) && Arc::ptr_eq(r, &r2) {
        p.clone()
    } else {
        mk(l2, r2)
    }
}

fn keep1(p: &Proc, b: &Proc, b2: Proc, mk: impl FnOnce(Proc) -> Proc) -> Proc {
    if Arc::ptr_eq(b, &b2) {
        p.clone()
    } else {
        mk(b2)
    }
}

/// Substitution that returns `p` itself (not a copy) for every subterm the
/// binding leaves unchanged.
fn subst_proc(p: &Proc, b: &Binding, checked: bool) -> Result<Proc, TermError> {
    if b.is_empty() {
        return Ok(p.clone());
    }
    let sub = |x: &Proc| subst_proc(x, b, checked);
    Ok(match &**p {
        ProcExpr::Atom(_, args) | ProcExpr::Inst(_, args) if args.iter().all(Term::is_ground) => p.clone(),
        ProcExpr::Atom(a, args) => Arc::new(ProcExpr::Atom(a.clone(), subst_terms(args, b, checked)?)),
        ProcExpr::Inst(n, args) => Arc::new(ProcExpr::Inst(n.clone(), subst_terms(args, b, checked)?)),
        ProcExpr::Delta | ProcExpr::Skip | ProcExpr::Done => p.clone(),
        ProcExpr::Alt(l, r) => keep2(p, (l, r), (sub(l)?, sub(r)?), ProcExpr::alt),
        ProcExpr::Seq(l, r) => keep2(p, (l, r), (sub(l)?, sub(r)?), ProcExpr::seq),
        ProcExpr::Par(l, r) => keep2(p, (l, r), (sub(l)?, sub(r)?), ProcExpr::par),
        ProcExpr::Disrupt(l, r) => keep2(p, (l, r), (sub(l)?, sub(r)?), ProcExpr::disrupt),
        ProcExpr::Star(l, r) => keep2(p, (l, r), (sub(l)?, sub(r)?), ProcExpr::star),
        ProcExpr::Sum(v, s, body) => {
            let nb = if b.contains_key(v) {
                let mut inner = b.clone();
                inner.remove(v);
                subst_proc(body, &inner, checked)?
            } else {
                sub(body)?
            };
            keep1(p, body, nb, |nb| Arc::new(ProcExpr::Sum(v.clone(), s.clone(), nb)))
        }
        ProcExpr::Encaps(h @ SetRef::Named(_), body) => {
            keep1(p, body, sub(body)?, |nb| ProcExpr::encaps(h.clone(), nb))
        }
        ProcExpr::Hide(h @ SetRef::Named(_), body) => {
            keep1(p, body, sub(body)?, |nb| ProcExpr::hide(h.clone(), nb))
        }
        ProcExpr::Encaps(h, body) => ProcExpr::encaps(subst_set(h, b), sub(body)?),
        ProcExpr::Hide(h, body) => ProcExpr::hide(subst_set(h, b), sub(body)?),
    })
}

fn subst_set(h: &SetRef, b: &Binding) -> SetRef {
    match h {
        SetRef::Named(_) => h.clone(),
        SetRef::Inline(ms) => SetRef::Inline(ms.iter().map(|m| m.apply(b)).collect()),
    }
}

impl fmt::Display for ProcExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_proc(self, f, 0)
    }
}

// precedence: 0 = ||, 1 = +, 2 = ., 3 = *, 4 = primary
fn prec(p: &ProcExpr) -> u8 {
    match p {
        ProcExpr::Par(..) => 0,
        ProcExpr::Alt(..) => 1,
        ProcExpr::Seq(..) => 2,
        ProcExpr::Star(..) => 3,
        _ => 4,
    }
}

fn fmt_proc(p: &ProcExpr, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
    let paren = prec(p) < ctx;
    if paren {
        write!(f, "(")?;
    }
    match p {
        ProcExpr::Atom(a, args) | ProcExpr::Inst(a, args) => {
            write!(f, "{a}")?;
            write_args(f, args)?;
        }
        ProcExpr::Delta => write!(f, "delta")?,
        ProcExpr::Done => write!(f, "done")?,
        ProcExpr::Skip => write!(f, "skip")?,
        ProcExpr::Par(l, r) => {
            fmt_proc(l, f, 0)?;
            write!(f, " || ")?;
            fmt_proc(r, f, 1)?;
        }
        ProcExpr::Alt(l, r) => {
            fmt_proc(l, f, 1)?;
            write!(f, " + ")?;
            fmt_proc(r, f, 2)?;
        }
        ProcExpr::Seq(l, r) => {
            fmt_proc(l, f, 3)?;
            write!(f, " . ")?;
            fmt_proc(r, f, 2)?;
        }
        ProcExpr::Star(l, r) => {
            fmt_proc(l, f, 3)?;
            write!(f, " * ")?;
            fmt_proc(r, f, 4)?;
        }
        ProcExpr::Sum(v, s, b) => {
            write!(f, "sum({v} in {s}, ")?;
            fmt_proc(b, f, 0)?;
            write!(f, ")")?;
        }
        ProcExpr::Encaps(h, b) => {
            write!(f, "encaps({h}, ")?;
            fmt_proc(b, f, 0)?;
            write!(f, ")")?;
        }
        ProcExpr::Hide(h, b) => {
            write!(f, "hide({h}, ")?;
            fmt_proc(b, f, 0)?;
            write!(f, ")")?;
        }
        ProcExpr::Disrupt(l, r) => {
            write!(f, "disrupt(")?;
            fmt_proc(l, f, 0)?;
            write!(f, ", ")?;
            fmt_proc(r, f, 0)?;
            write!(f, ")")?;
        }
    }
    if paren {
        write!(f, ")")?;
    }
    Ok(())
}

/// Sort-aware first-order unification. Every `Var` on either side is a
/// unification variable; callers keep the namespaces of pattern variables
/// and meta variables disjoint.
pub fn unify(a: &Term, b: &Term, s: &mut Binding) -> bool {
    let a = resolve(a, s);
    let b = resolve(b, s);
    match (&a, &b) {
        (Term::Var { name: x, sort: sx }, Term::Var { name: y, sort: sy }) => {
            if x == y {
                return true;
            }
            if sx != sy {
                return false;
            }
            s.insert(x.clone(), b.clone());
            true
        }
        (Term::Var { name, sort }, t) | (t, Term::Var { name, sort }) => {
            if t.sort() != sort || occurs(name, t, s) {
                return false;
            }
            s.insert(name.clone(), t.clone());
            true
        }
        (Term::Lit { value: v1, sort: s1 }, Term::Lit { value: v2, sort: s2 }) => v1 == v2 && s1 == s2,
        (
            Term::App { ctor: c1, sort: s1, args: a1 },
            Term::App { ctor: c2, sort: s2, args: a2 },
        ) => {
            c1 == c2
                && s1 == s2
                && a1.len() == a2.len()
                && a1.iter().zip(a2.iter()).all(|(x, y)| unify(x, y, s))
        }
        _ => false,
    }
}

pub fn unify_args(a: &[Term], b: &[Term], s: &mut Binding) -> bool {
    a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| unify(x, y, s))
}

fn resolve(t: &Term, s: &Binding) -> Term {
    let mut cur = t.clone();
    while let Term::Var { name, .. } = &cur {
        match s.get(name) {
            Some(next) => cur = next.clone(),
            None => break,
        }
    }
    cur
}

fn occurs(v: &Name, t: &Term, s: &Binding) -> bool {
    match resolve(t, s) {
        Term::Var { name, .. } => &name == v,
        Term::Lit { .. } => false,
        Term::App { args, .. } => args.iter().any(|a| occurs(v, a, s)),
    }
}

/// Turns a triangular unifier into an idempotent one.
pub fn normalize_binding(s: &Binding) -> Binding {
    s.iter()
        .map(|(k, v)| (k.clone(), deep_resolve(v, s)))
        .collect()
}

fn deep_resolve(t: &Term, s: &Binding) -> Term {
    match resolve(t, s) {
        Term::App { ctor, sort, args } => Term::App {
            ctor,
            sort,
            args: args.iter().map(|a| deep_resolve(a, s)).collect(),
        },
        other => other,
    }
}

/// One-sided matching of a pattern against a ground label. Returns the
/// binding of the quantified variables, or `None`.
pub fn match_action(
    pattern: &AtomPattern,
    quantifiers: &[Quantifier],
    label: &ActionLabel,
) -> Option<Binding> {
    let (atom, args) = match label {
        ActionLabel::Tau => return None,
        ActionLabel::Act { atom, args } => (atom, args),
    };
    if *atom != pattern.atom || args.len() != pattern.args.len() {
        return None;
    }
    let mut b = Binding::new();
    for (p, t) in pattern.args.iter().zip(args) {
        if !match_term(p, t, quantifiers, &mut b) {
            return None;
        }
    }
    Some(b)
}

fn match_term(p: &Term, t: &Term, qs: &[Quantifier], b: &mut Binding) -> bool {
    match p {
        Term::Var { name, sort } if qs.iter().any(|(v, _)| v == name) => {
            if t.sort() != sort {
                return false;
            }
            match b.get(name) {
                Some(prev) => prev == t,
                None => {
                    b.insert(name.clone(), t.clone());
                    true
                }
            }
        }
        Term::Var { .. } => p == t,
        Term::Lit { .. } => p == t,
        Term::App { ctor, sort, args } => match t {
            Term::App {
                ctor: c2,
                sort: s2,
                args: a2,
            } => {
                ctor == c2
                    && sort == s2
                    && args.len() == a2.len()
                    && args.iter().zip(a2).all(|(x, y)| match_term(x, y, qs, b))
            }
            _ => false,
        },
    }
}

/// Does the sort admit infinitely many ground terms?
pub fn is_infinite_sort(spec: &FlatSpec, sort: &str) -> bool {
    fn reaches(spec: &FlatSpec, from: &str, target: &str, seen: &mut Vec<String>) -> bool {
        if seen.iter().any(|s| s == from) {
            return false;
        }
        seen.push(from.to_string());
        for f in spec.constructors_of(from) {
            for a in &f.arg_sorts {
                if &**a == target || spec.literal_sorts.contains(&**a) {
                    return true;
                }
                if reaches(spec, a, target, seen) {
                    return true;
                }
            }
        }
        false
    }
    spec.literal_sorts.contains(sort) || reaches(spec, sort, sort, &mut Vec::new())
}

/// Ground terms of `sort` with at most `depth_bound` constructor nestings,
/// ordered by depth, then constructor declaration order, then arguments.
/// Literals of a literal sort count as `n` nestings (successor form).
pub fn enumerate_sort(
    spec: &FlatSpec,
    sort: &str,
    depth_bound: Option<usize>,
) -> Result<Vec<Term>, TermError> {
    if !spec.has_sort(sort) {
        return Err(TermError::UnknownSort(sort.to_string()));
    }
    let bound = match depth_bound {
        Some(d) => d,
        None => {
            if is_infinite_sort(spec, sort) {
                return Err(TermError::InfiniteSort(sort.to_string()));
            }
            // a finite sort is exhausted once nesting exceeds the number of sorts
            spec.sorts.len() + 1
        }
    };
    let mut levels: BTreeMap<String, Vec<Vec<Term>>> = BTreeMap::new();
    let sorts: Vec<String> = spec.sorts.iter().map(|s| s.to_string()).collect();
    for depth in 0..=bound {
        let mut new_level: BTreeMap<String, Vec<Term>> = BTreeMap::new();
        for s in &sorts {
            let mut fresh = Vec::new();
            if spec.literal_sorts.contains(s.as_str()) {
                fresh.push(Term::Lit {
                    value: depth as u64,
                    sort: name(s),
                });
            }
            for f in spec.constructors_of(s) {
                if f.arg_sorts.is_empty() {
                    if depth == 0 {
                        fresh.push(Term::App {
                            ctor: f.name.clone(),
                            sort: f.result_sort.clone(),
                            args: Vec::new(),
                        });
                    }
                    continue;
                }
                if depth == 0 {
                    continue;
                }
                // args drawn from levels < depth, at least one from depth - 1
                let pools: Vec<Vec<(usize, Term)>> = f
                    .arg_sorts
                    .iter()
                    .map(|a| {
                        levels
                            .get(&**a)
                            .map(|ls| {
                                ls.iter()
                                    .enumerate()
                                    .flat_map(|(d, ts)| ts.iter().map(move |t| (d, t.clone())))
                                    .collect()
                            })
                            .unwrap_or_default()
                    })
                    .collect();
                for combo in cartesian(&pools) {
                    if combo.iter().map(|(d, _)| *d).max() == Some(depth - 1) {
                        fresh.push(Term::App {
                            ctor: f.name.clone(),
                            sort: f.result_sort.clone(),
                            args: combo.into_iter().map(|(_, t)| t).collect(),
                        });
                    }
                }
            }
            new_level.insert(s.clone(), fresh);
        }
        let exhausted = new_level.values().all(Vec::is_empty);
        for (s, ts) in new_level {
            levels.entry(s).or_default().push(ts);
        }
        if exhausted && depth_bound.is_none() {
            break;
        }
    }
    Ok(levels
        .remove(sort)
        .unwrap_or_default()
        .into_iter()
        .flatten()
        .collect())
}

fn cartesian<T: Clone>(pools: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for pool in pools {
        let mut next = Vec::with_capacity(out.len() * pool.len());
        for prefix in &out {
            for item in pool {
                let mut v = prefix.clone();
                v.push(item.clone());
                next.push(v);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(s: &str) -> Term {
        Term::constant(s, "DATA")
    }

    #[test]
    fn substitute_replaces_bound_variable() {
        let t = Term::app("rec", "X", vec![Term::var("d", "DATA")]);
        let mut b = Binding::new();
        b.insert(name("d"), data("message"));
        assert_eq!(t.substitute(&b).unwrap(), Term::app("rec", "X", vec![data("message")]));
    }

    #[test]
    fn substitute_without_occurrence_is_identity() {
        let mut b = Binding::new();
        b.insert(name("d"), data("ack"));
        assert_eq!(data("message").substitute(&b).unwrap(), data("message"));
    }

    #[test]
    fn substitute_rejects_sort_mismatch() {
        let mut b = Binding::new();
        b.insert(name("d"), Term::constant("c1", "ID"));
        let err = Term::var("d", "DATA").substitute(&b).unwrap_err();
        assert!(matches!(err, TermError::SortMismatch { .. }));
    }

    #[test]
    fn substitute_in_sum_respects_shadowing() {
        let body = ProcExpr::atom("r", vec![Term::var("d", "DATA")]);
        let p = ProcExpr::sum("d", "DATA", body);
        let mut b = Binding::new();
        b.insert(name("d"), data("ack"));
        assert_eq!(p.substitute(&b).unwrap(), p);
    }

    #[test]
    fn match_action_binds_quantified_variables() {
        let qs = vec![(name("o"), name("ID")), (name("d"), name("ID")), (name("s"), name("SERVICE"))];
        let pat = AtomPattern::new(
            "cs-request",
            vec![Term::var("o", "ID"), Term::var("d", "ID"), Term::var("s", "SERVICE")],
        );
        let label = ActionLabel::act(
            "cs-request",
            vec![
                Term::constant("operator", "ID"),
                Term::constant("primitive", "ID"),
                Term::constant("primitive-operation", "SERVICE"),
            ],
        );
        let b = match_action(&pat, &qs, &label).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b[&name("s")], Term::constant("primitive-operation", "SERVICE"));
    }

    #[test]
    fn match_action_name_mismatch_is_absent() {
        let qs = vec![(name("n"), name("ID")), (name("s"), name("SERVICE"))];
        let pat = AtomPattern::new("s-call", vec![Term::var("n", "ID"), Term::var("s", "SERVICE")]);
        let label = ActionLabel::act(
            "c-call",
            vec![Term::constant("a", "ID"), Term::constant("b", "ID"), Term::constant("c", "SERVICE")],
        );
        assert!(match_action(&pat, &qs, &label).is_none());
    }

    #[test]
    fn match_action_through_channel_constructor() {
        let ch = |x: Term, y: Term| Term::app(">>", "CHANNEL", vec![x, y]);
        let qs = vec![(name("x"), name("ID")), (name("y"), name("ID")), (name("d"), name("DATA"))];
        let pat = AtomPattern::new(
            "snd",
            vec![ch(Term::var("x", "ID"), Term::var("y", "ID")), Term::var("d", "DATA")],
        );
        let label = ActionLabel::act(
            "snd",
            vec![ch(Term::constant("c1", "ID"), Term::constant("c2", "ID")), data("message")],
        );
        let b = match_action(&pat, &qs, &label).unwrap();
        assert_eq!(b[&name("x")], Term::constant("c1", "ID"));
        assert_eq!(b[&name("y")], Term::constant("c2", "ID"));
        assert_eq!(b[&name("d")], data("message"));
        assert_eq!(pat.apply(&b).to_label(), label);
    }

    #[test]
    fn unify_respects_sorts() {
        let mut s = Binding::new();
        assert!(!unify(&Term::var("?1", "ID"), &data("x"), &mut s));
        assert!(unify(&Term::var("?1", "DATA"), &data("x"), &mut s));
        assert_eq!(s[&name("?1")], data("x"));
    }
}
