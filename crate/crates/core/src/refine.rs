//! Vertical implementation: refine atoms into sequences of lower-level
//! atoms, rename local atoms, and check the result by hiding both sides and
//! comparing them up to rooted weak bisimulation.
//!
//! Mapping files have three optional sections:
//!
//! ```text
//! refinements
//!   snd(operator, $1, $2) -> c-snd-call($1, $2)
//!   rec($1, operator, result) -> c-rec-return(result)
//! renamings
//!   stop -> rec-event(quit)
//! process renamings
//!   Component1 -> PT1
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::bisim::{rooted_weak_bisim, BisimError, BisimResult};
use crate::diag::Loc;
use crate::flat::{FlatSpec, ProcessDef};
use crate::resolve::{match_pattern, pattern_vars, resolve_pattern, PatternError};
use crate::semantics::{build_lts, entry, BuildOptions, Lts, SemError};
use crate::syntax::ast::{RawAtom, RawTerm};
use crate::syntax::parser::{Parser, Tok};
use crate::syntax::ParseError;
use crate::terms::{
    name, unify_args, ActionLabel, AtomPattern, Binding, FuncSig, Name, Proc, ProcExpr, Term,
};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{loc}: placeholder ${n} on the right-hand side does not occur on the left")]
    UnboundPlaceholder { loc: Loc, n: u32 },
    #[error("{loc}: empty right-hand side")]
    EmptyRhs { loc: Loc },
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("cannot carry {term} over to sort {sort} of the target vocabulary")]
    Transport { term: String, sort: Name },
    #[error("{first} and {second} can match the same action")]
    Overlap { first: String, second: String },
    #[error("ambiguous mapping for {occurrence} in {process}: matched by {rules}")]
    Ambiguous {
        occurrence: String,
        process: String,
        rules: String,
    },
    #[error("unknown process {0}")]
    UnknownProcess(String),
    #[error(transparent)]
    Sem(#[from] SemError),
    #[error(transparent)]
    Bisim(#[from] BisimError),
}

/// `lhs -> rhs1 . rhs2 ...` before resolution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawRule {
    pub lhs: RawAtom,
    pub rhs: Vec<RawAtom>,
}

/// A parsed mapping file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RefinementMap {
    pub refinements: Vec<RawRule>,
    pub renamings: Vec<(RawAtom, RawAtom)>,
    pub process_renamings: Vec<(String, String)>,
}

/// A refinement rule with `$n` resolved to sorted variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefineRule {
    pub lhs: AtomPattern,
    pub rhs: Vec<AtomPattern>,
}

impl std::fmt::Display for RefineRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ->", self.lhs)?;
        for (i, r) in self.rhs.iter().enumerate() {
            write!(f, "{}{r}", if i == 0 { " " } else { " . " })?;
        }
        Ok(())
    }
}

/// A mapping resolved against a source and a target vocabulary.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ResolvedMap {
    pub refinements: Vec<RefineRule>,
    /// Renamings are single-atom rules.
    pub renamings: Vec<RefineRule>,
    pub process_renamings: BTreeMap<Name, Name>,
    /// Target constructors, for carrying matched terms across sorts.
    pub vocab: Vec<FuncSig>,
    pub literal_sorts: BTreeSet<Name>,
}

fn placeholders(t: &RawTerm, out: &mut BTreeSet<u32>) {
    match t {
        RawTerm::Placeholder(n) => {
            out.insert(*n);
        }
        RawTerm::App { args, .. } => args.iter().for_each(|a| placeholders(a, out)),
        RawTerm::Int(_) | RawTerm::Wildcard => {}
    }
}

fn atom_placeholders(a: &RawAtom) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    a.args.iter().for_each(|t| placeholders(t, &mut out));
    out
}

fn check_placeholders(lhs: &RawAtom, rhs: &[RawAtom]) -> Result<(), RefineError> {
    let bound = atom_placeholders(lhs);
    for r in rhs {
        if let Some(n) = atom_placeholders(r).difference(&bound).next() {
            return Err(RefineError::UnboundPlaceholder {
                loc: r.loc.clone(),
                n: *n,
            });
        }
    }
    Ok(())
}

const MAP_SECTIONS: &[&str] = &["refinements", "renamings"];

fn at_section(p: &Parser) -> bool {
    MAP_SECTIONS.iter().any(|k| p.is_kw(k)) || (p.is_kw("process") && p.is_kw_at(1, "renamings"))
}

fn rhs_start(p: &Parser, arrow: &Loc) -> Result<(), RefineError> {
    if !matches!(p.peek(), Tok::Ident(_)) || at_section(p) {
        return Err(RefineError::EmptyRhs { loc: arrow.clone() });
    }
    Ok(())
}

/// Parses a mapping file.
pub fn parse_mapping(text: &str) -> Result<RefinementMap, RefineError> {
    parse_mapping_file(text, None)
}

/// As [`parse_mapping`], attributing locations to `file`.
pub fn parse_mapping_file(text: &str, file: Option<&str>) -> Result<RefinementMap, RefineError> {
    let mut p = Parser::new(text, file.map(Arc::from))?;
    let mut m = RefinementMap::default();
    while !p.at_eof() {
        if p.eat_kw("refinements") {
            while !p.at_eof() && !at_section(&p) {
                let lhs = p.raw_atom()?;
                let arrow = p.loc();
                p.expect(Tok::Arrow)?;
                rhs_start(&p, &arrow)?;
                let mut rhs = vec![p.raw_atom()?];
                while p.eat(&Tok::Dot) {
                    rhs.push(p.raw_atom()?);
                }
                check_placeholders(&lhs, &rhs)?;
                m.refinements.push(RawRule { lhs, rhs });
            }
        } else if p.eat_kw("renamings") {
            while !p.at_eof() && !at_section(&p) {
                let lhs = p.raw_atom()?;
                let arrow = p.loc();
                p.expect(Tok::Arrow)?;
                rhs_start(&p, &arrow)?;
                let rhs = p.raw_atom()?;
                check_placeholders(&lhs, std::slice::from_ref(&rhs))?;
                m.renamings.push((lhs, rhs));
            }
        } else if p.is_kw("process") && p.is_kw_at(1, "renamings") {
            p.eat_kw("process");
            p.eat_kw("renamings");
            while !p.at_eof() && !at_section(&p) {
                let from = p.ident()?;
                p.expect(Tok::Arrow)?;
                let to = p.ident()?;
                m.process_renamings.push((from.name, to.name));
            }
        } else {
            let e = p.error::<()>(
                "expected a mapping section",
                &["'refinements'", "'renamings'", "'process renamings'"],
            );
            return Err(e.unwrap_err().into());
        }
    }
    Ok(m)
}

fn resolve_rule(
    lhs: &RawAtom,
    rhs: &[RawAtom],
    source: &FlatSpec,
    target: &FlatSpec,
) -> Result<RefineRule, RefineError> {
    let l = resolve_pattern(source, lhs)?;
    let mut out = Vec::new();
    for r in rhs {
        out.push(resolve_pattern(target, r)?);
    }
    Ok(RefineRule { lhs: l, rhs: out })
}

fn rename_apart(p: &AtomPattern) -> AtomPattern {
    let b: Binding = pattern_vars(p)
        .into_iter()
        .map(|(v, s)| (v.clone(), Term::var(&format!("{v}'"), &s)))
        .collect();
    p.apply(&b)
}

fn patterns_overlap(a: &AtomPattern, b: &AtomPattern) -> bool {
    a.atom == b.atom && a.args.len() == b.args.len() && {
        let b = rename_apart(b);
        unify_args(&a.args, &b.args, &mut Binding::new())
    }
}

impl RefinementMap {
    /// Resolves left-hand sides against `source` and right-hand sides
    /// against `target`. Refinement and renaming left-hand sides must not
    /// overlap.
    pub fn resolve(&self, source: &FlatSpec, target: &FlatSpec) -> Result<ResolvedMap, RefineError> {
        let mut out = ResolvedMap::default();
        for r in &self.refinements {
            out.refinements.push(resolve_rule(&r.lhs, &r.rhs, source, target)?);
        }
        for (l, r) in &self.renamings {
            out.renamings
                .push(resolve_rule(l, std::slice::from_ref(r), source, target)?);
        }
        for f in &out.refinements {
            for g in &out.renamings {
                if patterns_overlap(&f.lhs, &g.lhs) {
                    return Err(RefineError::Overlap {
                        first: f.to_string(),
                        second: g.to_string(),
                    });
                }
            }
        }
        out.vocab = target.functions.clone();
        out.literal_sorts = target.literal_sorts.clone();
        out.process_renamings = self
            .process_renamings
            .iter()
            .map(|(a, b)| (name(a), name(b)))
            .collect();
        Ok(out)
    }
}

impl ResolvedMap {
    /// Re-expresses `t` in sort `sort` by looking its constructors up by
    /// name in the target vocabulary. Needed when the two levels use
    /// different sorts for the same constants.
    fn transport(&self, t: &Term, sort: &Name) -> Result<Term, RefineError> {
        if t.sort() == sort {
            return Ok(t.clone());
        }
        let fail = || RefineError::Transport {
            term: t.to_string(),
            sort: sort.clone(),
        };
        match t {
            Term::Lit { value, .. } if self.literal_sorts.contains(sort) => Ok(Term::Lit {
                value: *value,
                sort: sort.clone(),
            }),
            Term::App { ctor, args, .. } => {
                let f = self
                    .vocab
                    .iter()
                    .find(|f| f.name == *ctor && f.arity() == args.len() && f.result_sort == *sort)
                    .ok_or_else(fail)?;
                let args = args
                    .iter()
                    .zip(&f.arg_sorts)
                    .map(|(a, s)| self.transport(a, s))
                    .collect::<Result<_, _>>()?;
                Ok(Term::App {
                    ctor: f.name.clone(),
                    sort: f.result_sort.clone(),
                    args,
                })
            }
            _ => Err(fail()),
        }
    }

    fn instantiate(&self, p: &AtomPattern, b: &Binding) -> Result<Proc, RefineError> {
        let mut local = Binding::new();
        for (v, s) in pattern_vars(p) {
            if let Some(t) = b.get(&v) {
                local.insert(v, self.transport(t, &s)?);
            }
        }
        let t = p.apply(&local);
        Ok(Arc::new(ProcExpr::Atom(t.atom, t.args)))
    }
}

enum Action<'a> {
    Refine(&'a RefineRule, Binding),
    Rename(&'a RefineRule, Binding),
}

impl ResolvedMap {
    fn lookup(&self, process: &str, atom: &Name, args: &[Term]) -> Result<Option<Action<'_>>, RefineError> {
        let label = ActionLabel::Act {
            atom: atom.clone(),
            args: args.to_vec(),
        };
        let mut hits = Vec::new();
        for r in &self.refinements {
            if let Some(b) = match_pattern(&r.lhs, &label) {
                hits.push(Action::Refine(r, b));
            }
        }
        for r in &self.renamings {
            if let Some(b) = match_pattern(&r.lhs, &label) {
                hits.push(Action::Rename(r, b));
            }
        }
        if hits.len() > 1 {
            let rules: Vec<String> = hits
                .iter()
                .map(|h| match h {
                    Action::Refine(r, _) | Action::Rename(r, _) => r.to_string(),
                })
                .collect();
            return Err(RefineError::Ambiguous {
                occurrence: label.to_string(),
                process: process.to_string(),
                rules: rules.join("; "),
            });
        }
        Ok(hits.pop())
    }

    fn process_name(&self, n: &Name) -> Name {
        self.process_renamings.get(n).cloned().unwrap_or_else(|| n.clone())
    }

    /// Is `label` an instance of some refinement right-hand side element?
    fn in_rhs(&self, label: &ActionLabel) -> bool {
        self.refinements
            .iter()
            .flat_map(|r| &r.rhs)
            .any(|p| match_pattern(p, label).is_some())
    }
}

/// What to put in place of a refinement left-hand side.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Expand,
    Hide,
}

fn rewrite_def(def: &ProcessDef, m: &ResolvedMap, mode: Mode) -> Result<ProcessDef, RefineError> {
    let mut err = None;
    let body = def.body.map_nodes(&mut |e| match e {
        ProcExpr::Atom(a, args) => match m.lookup(&def.name, a, args) {
            Err(e) => {
                err.get_or_insert(e);
                None
            }
            Ok(None) => None,
            Ok(Some(Action::Rename(r, b))) => match m.instantiate(&r.rhs[0], &b) {
                Ok(p) => Some(p),
                Err(e) => {
                    err.get_or_insert(e);
                    None
                }
            },
            Ok(Some(Action::Refine(_, _))) if mode == Mode::Hide => Some(ProcExpr::skip()),
            Ok(Some(Action::Refine(r, b))) => {
                let chain: Result<Vec<Proc>, _> = r.rhs.iter().map(|p| m.instantiate(p, &b)).collect();
                match chain {
                    Ok(mut chain) => {
                        let last = chain.pop().expect("rhs is nonempty");
                        Some(chain.into_iter().rev().fold(last, |acc, a| ProcExpr::seq(a, acc)))
                    }
                    Err(e) => {
                        err.get_or_insert(e);
                        None
                    }
                }
            }
        },
        ProcExpr::Inst(p, args) if m.process_renamings.contains_key(p) => {
            Some(Arc::new(ProcExpr::Inst(m.process_name(p), args.clone())))
        }
        _ => None,
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(ProcessDef {
        name: m.process_name(&def.name),
        formals: def.formals.clone(),
        body,
        loc: def.loc.clone(),
    })
}

fn rewrite_all(
    defs: &BTreeMap<Name, ProcessDef>,
    m: &ResolvedMap,
    mode: Mode,
) -> Result<BTreeMap<Name, ProcessDef>, RefineError> {
    let mut out = BTreeMap::new();
    for d in defs.values() {
        let d = rewrite_def(d, m, mode)?;
        out.insert(d.name.clone(), d);
    }
    Ok(out)
}

/// Replaces every refinement left-hand side by its right-hand side chain,
/// applies renamings to the remaining matching atoms and renames processes.
pub fn apply_mapping(
    defs: &BTreeMap<Name, ProcessDef>,
    m: &ResolvedMap,
) -> Result<BTreeMap<Name, ProcessDef>, RefineError> {
    rewrite_all(defs, m, Mode::Expand)
}

/// Renamings applied, refinement left-hand sides replaced by `skip`.
pub fn abstract_source(
    defs: &BTreeMap<Name, ProcessDef>,
    m: &ResolvedMap,
) -> Result<BTreeMap<Name, ProcessDef>, RefineError> {
    rewrite_all(defs, m, Mode::Hide)
}

/// Every atom that instantiates a refinement right-hand side element becomes `skip`.
pub fn abstract_target(defs: &BTreeMap<Name, ProcessDef>, m: &ResolvedMap) -> BTreeMap<Name, ProcessDef> {
    defs.iter()
        .map(|(n, d)| {
            let body = d.body.map_nodes(&mut |e| match e {
                ProcExpr::Atom(a, args)
                    if m.in_rhs(&ActionLabel::Act {
                        atom: a.clone(),
                        args: args.clone(),
                    }) =>
                {
                    Some(ProcExpr::skip())
                }
                _ => None,
            });
            (n.clone(), ProcessDef { body, ..d.clone() })
        })
        .collect()
}

/// `base` with its definitions replaced by `defs` and the declarations of
/// `vocab` added where missing, so that rewritten bodies are well-formed.
pub fn with_defs(
    base: &FlatSpec,
    vocab: &FlatSpec,
    defs: BTreeMap<Name, ProcessDef>,
    m: &ResolvedMap,
) -> FlatSpec {
    let mut out = base.clone();
    for s in &vocab.sorts {
        if !out.sorts.contains(s) {
            out.sorts.push(s.clone());
        }
    }
    out.literal_sorts.extend(vocab.literal_sorts.iter().cloned());
    for f in &vocab.functions {
        if out.function(&f.name, f.arity()).is_none() {
            out.functions.push(f.clone());
        }
    }
    for a in &vocab.atoms {
        if out.atom(&a.name, a.arg_sorts.len()).is_none() {
            out.atoms.push(a.clone());
        }
    }
    for p in &mut out.processes {
        p.name = m.process_name(&p.name);
    }
    out.defs = defs;
    out
}

/// Outcome of [`verify_refinement`], with both abstracted systems kept for
/// witness replay.
#[derive(Clone, Debug)]
pub struct Verification {
    pub result: BisimResult,
    pub source: Lts,
    pub target: Lts,
}

/// Builds the abstracted source and target systems and compares them up to
/// rooted weak bisimulation.
pub fn verify_refinement(
    spec_a: &FlatSpec,
    map: &ResolvedMap,
    spec_b: &FlatSpec,
    entry_a: &str,
    entry_b: &str,
    opts: &BuildOptions,
) -> Result<Verification, RefineError> {
    if spec_a.def(entry_a).is_none() {
        return Err(RefineError::UnknownProcess(entry_a.to_string()));
    }
    if spec_b.def(entry_b).is_none() {
        return Err(RefineError::UnknownProcess(entry_b.to_string()));
    }
    let a = with_defs(spec_a, spec_b, abstract_source(&spec_a.defs, map)?, map);
    let b = with_defs(spec_b, spec_b, abstract_target(&spec_b.defs, map), &ResolvedMap::default());
    let renamed = map.process_name(&name(entry_a));
    let source = build_lts(&a, &entry(&a, &renamed, Vec::new())?, opts)?;
    let target = build_lts(&b, &entry(&b, entry_b, Vec::new())?, opts)?;
    let result = rooted_weak_bisim(&source, &target)?;
    Ok(Verification { result, source, target })
}

/// Convenience for tests and tools: parse, resolve and apply in one go.
pub fn refine_spec(
    source: &FlatSpec,
    target: &FlatSpec,
    mapping_text: &str,
) -> Result<FlatSpec, RefineError> {
    let m = parse_mapping(mapping_text)?.resolve(source, target)?;
    let defs = apply_mapping(&source.defs, &m)?;
    Ok(with_defs(source, target, defs, &m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linker::flatten;
    use crate::syntax::parse_spec;

    fn spec(src: &str, root: &str) -> FlatSpec {
        flatten(&parse_spec(src).unwrap(), root).unwrap()
    }

    const SRC: &str = "process module A begin atoms a, b, c, d processes P \
                       definitions P = a . b . P + c end A";

    #[test]
    fn rhs_length_two_rule_parses() {
        let m = parse_mapping(
            "refinements\n rec(c2 >> c1, ack) -> tb-rec-msg(t2,t1,tbterm(ack)) . tb-snd-ack-event(T1,tbterm(message))",
        )
        .unwrap();
        assert_eq!(m.refinements.len(), 1);
        assert_eq!(m.refinements[0].rhs.len(), 2);
    }

    #[test]
    fn unbound_placeholder_is_rejected() {
        let err = parse_mapping("refinements a -> b($1)").unwrap_err();
        assert!(matches!(err, RefineError::UnboundPlaceholder { n: 1, .. }), "{err}");
    }

    #[test]
    fn empty_rhs_is_rejected() {
        assert!(matches!(
            parse_mapping("refinements a -> \nrenamings b -> c").unwrap_err(),
            RefineError::EmptyRhs { .. }
        ));
        assert!(matches!(
            parse_mapping("refinements a ->").unwrap_err(),
            RefineError::EmptyRhs { .. }
        ));
    }

    #[test]
    fn identity_and_empty_maps_leave_definitions_alone() {
        let s = spec(SRC, "A");
        for text in ["", "refinements a -> a", "renamings b -> b"] {
            let m = parse_mapping(text).unwrap().resolve(&s, &s).unwrap();
            assert_eq!(apply_mapping(&s.defs, &m).unwrap(), s.defs, "{text:?}");
        }
    }

    #[test]
    fn refinement_expands_and_abstraction_hides() {
        let s = spec(SRC, "A");
        let m = parse_mapping("refinements a -> c . d\nrenamings b -> d\nprocess renamings P -> Q")
            .unwrap()
            .resolve(&s, &s)
            .unwrap();
        let out = apply_mapping(&s.defs, &m).unwrap();
        assert_eq!(out["Q"].body.canonical().to_string(), "c + c . d . d . Q");
        let abs = abstract_source(&s.defs, &m).unwrap();
        assert_eq!(abs["Q"].body.canonical().to_string(), "c + skip . d . Q");
        let tgt = abstract_target(&out, &m);
        assert_eq!(tgt["Q"].body.canonical().to_string(), "skip + skip . skip . skip . Q");
    }

    #[test]
    fn overlapping_refinement_and_renaming_are_rejected() {
        let s = spec(SRC, "A");
        let err = parse_mapping("refinements a -> c\nrenamings a -> d")
            .unwrap()
            .resolve(&s, &s)
            .unwrap_err();
        assert!(matches!(err, RefineError::Overlap { .. }));
    }

    #[test]
    fn two_matching_rules_are_ambiguous() {
        let s = spec(SRC, "A");
        let m = parse_mapping("refinements a -> c\na -> d").unwrap().resolve(&s, &s).unwrap();
        assert!(matches!(
            apply_mapping(&s.defs, &m).unwrap_err(),
            RefineError::Ambiguous { .. }
        ));
    }

    #[test]
    fn identity_map_verifies() {
        let s = spec(SRC, "A");
        let m = ResolvedMap::default();
        let v = verify_refinement(&s, &m, &s, "P", "P", &BuildOptions::default()).unwrap();
        assert!(v.result.equivalent);
    }
}
