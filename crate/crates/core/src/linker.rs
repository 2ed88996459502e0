//! Flattens parsed modules into a [`FlatSpec`].
//!
//! Every import is instantiated with a name map: the importer's map composed
//! with the clause's parameter bindings and renamings. The map applies to all
//! declared names of the imported module and, transitively, of its imports.
//! Locally bound names (definition formals, sum binders, quantifier
//! variables and the `variables` section) are never renamed.
//!
//! Instances that produce identical declarations merge. Differing
//! declarations of one name are reported as clashes.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::diag::{Diagnostic, Loc};
use crate::flat::{AtomSig, FlatSpec, ProcessDef, ProcessSig};
use crate::syntax::ast::*;
use crate::terms::{
    name, unify_args, AtomPattern, AtomSetDef, Binding, CommRule, FuncSig, Name, Proc, ProcExpr,
    SetRef, Term,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{}", render(.0))]
pub struct LinkError(pub Vec<Diagnostic>);

fn render(ds: &[Diagnostic]) -> String {
    ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

/// Result of linking: the spec built from everything that resolved, plus
/// every problem found along the way.
#[derive(Debug, Clone)]
pub struct Linked {
    pub spec: FlatSpec,
    pub diagnostics: Vec<Diagnostic>,
}

/// Links `root` and everything it imports. Fails if linking or [`check`]
/// reports anything.
pub fn flatten(mods: &[ModuleDef], root: &str) -> Result<FlatSpec, LinkError> {
    flatten_many(mods, &[root])
}

pub fn flatten_many(mods: &[ModuleDef], roots: &[&str]) -> Result<FlatSpec, LinkError> {
    let linked = link(mods, roots);
    let mut diags = linked.diagnostics;
    if diags.is_empty() {
        diags = check(&linked.spec);
    }
    if diags.is_empty() {
        Ok(linked.spec)
    } else {
        Err(LinkError(diags))
    }
}

/// Links the given roots without failing early.
pub fn link(mods: &[ModuleDef], roots: &[&str]) -> Linked {
    let mut l = Linker::new(mods);
    for r in roots {
        if l.mods.contains_key(*r) {
            l.instantiate(r, &BTreeMap::new(), &BTreeSet::new(), None);
        } else {
            l.err(None, format!("unknown root module {r}"));
        }
    }
    let spec = l.build();
    Linked {
        spec,
        diagnostics: l.diags,
    }
}

type NameMap = BTreeMap<String, String>;

struct Instance {
    module: String,
    sigma: NameMap,
    /// Formals of this module bound by the importing clause.
    bound: BTreeSet<String>,
}

impl Instance {
    fn rn(&self, n: &str) -> String {
        self.sigma.get(n).cloned().unwrap_or_else(|| n.to_string())
    }
}

struct Linker<'a> {
    mods: BTreeMap<&'a str, &'a ModuleDef>,
    diags: Vec<Diagnostic>,
    instances: Vec<Instance>,
    seen: BTreeSet<(String, Vec<(String, String)>, Vec<String>)>,
    stack: Vec<String>,
}

#[derive(Clone)]
struct Local {
    name: String,
    sort: Name,
}

struct Tables {
    sorts: Vec<Name>,
    literal_sorts: BTreeSet<Name>,
    functions: Vec<FuncSig>,
    atoms: Vec<AtomSig>,
    processes: Vec<ProcessSig>,
}

impl Tables {
    fn function(&self, n: &str, arity: usize) -> Option<&FuncSig> {
        self.functions
            .iter()
            .find(|f| &*f.name == n && f.arity() == arity)
    }

    fn atom(&self, n: &str, arity: usize) -> Option<&AtomSig> {
        self.atoms
            .iter()
            .find(|a| &*a.name == n && a.arg_sorts.len() == arity)
    }

    fn process(&self, n: &str) -> Option<&ProcessSig> {
        self.processes.iter().find(|p| &*p.name == n)
    }

    fn has_sort(&self, s: &str) -> bool {
        self.sorts.iter().any(|x| &**x == s)
    }
}

impl<'a> Linker<'a> {
    fn new(mods: &'a [ModuleDef]) -> Linker<'a> {
        Linker {
            mods: mods.iter().map(|m| (m.name.name.as_str(), m)).collect(),
            diags: Vec::new(),
            instances: Vec::new(),
            seen: BTreeSet::new(),
            stack: Vec::new(),
        }
    }

    fn err(&mut self, loc: Option<&Loc>, msg: impl Into<String>) {
        let d = Diagnostic::new(loc.cloned(), msg);
        if !self.diags.contains(&d) || d.loc.is_none() {
            self.diags.push(d);
        }
    }

    fn instantiate(
        &mut self,
        module: &str,
        sigma: &NameMap,
        bound: &BTreeSet<String>,
        at: Option<&Loc>,
    ) {
        if self.stack.iter().any(|s| s == module) {
            let mut cycle = self.stack.clone();
            cycle.push(module.to_string());
            self.err(at, format!("cyclic import: {}", cycle.join(" -> ")));
            return;
        }
        let key = (
            module.to_string(),
            sigma.iter().map(|(a, b)| (a.clone(), b.clone())).collect(),
            bound.iter().cloned().collect(),
        );
        if self.seen.contains(&key) {
            return;
        }
        let Some(&m) = self.mods.get(module) else {
            self.err(at, format!("unknown module {module}"));
            return;
        };
        self.seen.insert(key);
        self.stack.push(module.to_string());
        for clause in &m.imports {
            self.import(m, clause, sigma);
        }
        self.stack.pop();
        self.instances.push(Instance {
            module: module.to_string(),
            sigma: sigma.clone(),
            bound: bound.clone(),
        });
    }

    fn import(&mut self, importer: &ModuleDef, clause: &ImportClause, sigma: &NameMap) {
        let child_name = clause.module.name.as_str();
        let Some(&child) = self.mods.get(child_name) else {
            self.err(
                Some(&clause.module.loc),
                format!("unknown module {child_name}"),
            );
            return;
        };
        let mut rho = NameMap::new();
        let mut bound = BTreeSet::new();
        let mut bound_sections = BTreeSet::new();
        for b in &clause.bindings {
            let Some(section) = child
                .parameters
                .iter()
                .find(|p| p.name.name == b.section.name)
            else {
                self.err(
                    Some(&b.section.loc),
                    format!(
                        "module {child_name} has no parameter section {}",
                        b.section.name
                    ),
                );
                continue;
            };
            bound_sections.insert(section.name.name.clone());
            let mut actuals = BTreeSet::new();
            for (formal, actual) in &b.map {
                if !section.decls.names().any(|n| n.name == formal.name) {
                    self.err(
                        Some(&formal.loc),
                        format!(
                            "{} is not a formal of parameter section {} of {child_name}",
                            formal.name, section.name.name
                        ),
                    );
                    continue;
                }
                if !actuals.insert(actual.name.clone()) {
                    self.err(
                        Some(&actual.loc),
                        format!("binding is not injective: {} bound twice", actual.name),
                    );
                }
                rho.insert(formal.name.clone(), actual.name.clone());
                bound.insert(formal.name.clone());
            }
            for formal in section.decls.names() {
                if !b.map.iter().any(|(f, _)| f.name == formal.name) {
                    self.err(
                        Some(&b.section.loc),
                        format!(
                            "unbound parameter {} of section {} in import of {child_name}",
                            formal.name, section.name.name
                        ),
                    );
                }
            }
            match self.mods.get(b.source.name.as_str()) {
                Some(_) => {
                    let src = b.source.name.clone();
                    self.instantiate(&src, sigma, &BTreeSet::new(), Some(&b.source.loc));
                    for (formal, actual) in &b.map {
                        if !self.module_declares(&src, &actual.name) {
                            self.err(
                                Some(&actual.loc),
                                format!(
                                    "{} bound to {}, which module {src} does not declare",
                                    formal.name, actual.name
                                ),
                            );
                        }
                    }
                }
                None => self.err(
                    Some(&b.source.loc),
                    format!("unknown module {}", b.source.name),
                ),
            }
        }
        for p in &child.parameters {
            if !bound_sections.contains(&p.name.name) && importer.parameters.is_empty() {
                self.err(
                    Some(&clause.module.loc),
                    format!(
                        "unbound parameter section {} of {child_name} imported by {}",
                        p.name.name, importer.name.name
                    ),
                );
            }
        }
        let own: BTreeSet<&str> = child
            .exports
            .names()
            .chain(child.hidden.names())
            .map(|n| n.name.as_str())
            .collect();
        let mut targets = BTreeSet::new();
        for (from, to) in &clause.renamings {
            if from.name != to.name && own.contains(to.name.as_str()) {
                self.err(
                    Some(&to.loc),
                    format!(
                        "renaming {} -> {} collides with a declaration of {child_name}",
                        from.name, to.name
                    ),
                );
            }
            if !targets.insert(to.name.clone()) {
                self.err(
                    Some(&to.loc),
                    format!("two names renamed to {}", to.name),
                );
            }
            rho.insert(from.name.clone(), to.name.clone());
        }
        let mut child_sigma = sigma.clone();
        for (k, v) in &rho {
            let image = sigma.get(v).cloned().unwrap_or_else(|| v.clone());
            child_sigma.insert(k.clone(), image);
        }
        child_sigma.retain(|k, v| k != v);
        self.instantiate(child_name, &child_sigma, &bound, Some(&clause.module.loc));
    }

    /// Does the module declare `n`, directly or through its imports?
    fn module_declares(&self, module: &str, n: &str) -> bool {
        let mut seen = BTreeSet::new();
        let mut todo = vec![module.to_string()];
        while let Some(m) = todo.pop() {
            if !seen.insert(m.clone()) {
                continue;
            }
            let Some(&md) = self.mods.get(m.as_str()) else {
                continue;
            };
            if md.exports.names().chain(md.hidden.names()).any(|i| i.name == n) {
                return true;
            }
            todo.extend(md.imports.iter().map(|c| c.module.name.clone()));
        }
        false
    }

    fn build(&mut self) -> FlatSpec {
        let instances = std::mem::take(&mut self.instances);
        let tables = self.collect_tables(&instances);
        let mut spec = FlatSpec {
            sorts: tables.sorts.clone(),
            literal_sorts: tables.literal_sorts.clone(),
            functions: tables.functions.clone(),
            atoms: tables.atoms.clone(),
            processes: tables.processes.clone(),
            ..FlatSpec::default()
        };
        let mut set_locs: BTreeMap<Name, Loc> = BTreeMap::new();
        for inst in &instances {
            let m = self.mods[inst.module.as_str()];
            for s in &m.sets {
                let n = name(&inst.rn(&s.name.name));
                let Some(def) = self.resolve_set(inst, &tables, s, &n) else {
                    continue;
                };
                match spec.sets.get(&n) {
                    Some(prev) if *prev != def => {
                        let loc = set_locs.get(&n).cloned();
                        self.err(
                            Some(&s.name.loc),
                            format!(
                                "conflicting definitions of atom set {n} (other at {})",
                                loc.map(|l| l.to_string()).unwrap_or_default()
                            ),
                        );
                    }
                    Some(_) => {}
                    None => {
                        set_locs.insert(n.clone(), s.name.loc.clone());
                        spec.sets.insert(n, def);
                    }
                }
            }
            for c in &m.comms {
                if let Some(rule) = self.resolve_comm(inst, &tables, c) {
                    if !spec.comms.contains(&rule) {
                        spec.comms.push(rule);
                        spec.comm_locs.push(Some(c.a.loc.clone()));
                    }
                }
            }
        }
        for inst in &instances {
            let m = self.mods[inst.module.as_str()];
            let mut local_names = BTreeSet::new();
            for d in &m.definitions {
                let n = name(&inst.rn(&d.name.name));
                if !local_names.insert(n.clone()) {
                    self.err(
                        Some(&d.name.loc),
                        format!("duplicate equation for process {n}"),
                    );
                    continue;
                }
                let Some(def) = self.resolve_def(inst, &tables, m, d, &n, &spec) else {
                    continue;
                };
                match spec.defs.get(&n) {
                    Some(prev) if prev.body != def.body || prev.formals != def.formals => {
                        let other = prev.loc.as_ref().map(|l| l.to_string()).unwrap_or_default();
                        self.err(
                            Some(&d.name.loc),
                            format!("duplicate equation for process {n} (other at {other})"),
                        );
                    }
                    Some(_) => {}
                    None => {
                        spec.defs.insert(n, def);
                    }
                }
            }
        }
        spec
    }

    fn collect_tables(&mut self, instances: &[Instance]) -> Tables {
        let mut t = Tables {
            sorts: Vec::new(),
            literal_sorts: BTreeSet::new(),
            functions: Vec::new(),
            atoms: Vec::new(),
            processes: Vec::new(),
        };
        let mut decl_loc: BTreeMap<String, Loc> = BTreeMap::new();
        // sorts first so that signatures can be checked against them
        let mut all: Vec<(&Instance, &Decls, bool)> = Vec::new();
        for inst in instances {
            let m = self.mods[inst.module.as_str()];
            for p in &m.parameters {
                all.push((inst, &p.decls, true));
            }
            all.push((inst, &m.exports, false));
            all.push((inst, &m.hidden, false));
        }
        let keep = |inst: &Instance, formal: bool, n: &str| !(formal && inst.bound.contains(n));
        for (inst, d, formal) in &all {
            for s in &d.sorts {
                if !keep(inst, *formal, &s.name) {
                    continue;
                }
                let n = name(&inst.rn(&s.name));
                if !t.sorts.contains(&n) {
                    t.sorts.push(n);
                }
            }
        }
        for (inst, d, formal) in &all {
            for s in &d.literals {
                if !keep(inst, *formal, &s.name) {
                    continue;
                }
                let n = inst.rn(&s.name);
                if !t.has_sort(&n) {
                    self.err(Some(&s.loc), format!("literals declared for undeclared sort {n}"));
                }
                t.literal_sorts.insert(name(&n));
            }
        }
        for (inst, d, formal) in &all {
            for f in &d.functions {
                if !keep(inst, *formal, &f.name.name) {
                    continue;
                }
                let sig = FuncSig {
                    name: name(&inst.rn(&f.name.name)),
                    arg_sorts: f.args.iter().map(|a| name(&inst.rn(&a.name))).collect(),
                    result_sort: name(&inst.rn(&f.result.name)),
                };
                for s in sig.arg_sorts.iter().chain(std::iter::once(&sig.result_sort)) {
                    if !t.has_sort(s) {
                        self.err(
                            Some(&f.name.loc),
                            format!("function {} uses undeclared sort {s}", sig.name),
                        );
                    }
                }
                match t.function(&sig.name, sig.arity()) {
                    Some(prev) if *prev != sig => {
                        let other = decl_loc.get(&format!("f:{}", sig.name)).cloned();
                        self.err(
                            Some(&f.name.loc),
                            format!(
                                "conflicting declarations of function {} (other at {})",
                                sig.name,
                                other.map(|l| l.to_string()).unwrap_or_default()
                            ),
                        );
                    }
                    Some(_) => {}
                    None => {
                        decl_loc.insert(format!("f:{}", sig.name), f.name.loc.clone());
                        t.functions.push(sig);
                    }
                }
            }
        }
        for (inst, d, formal) in &all {
            for a in &d.atoms {
                if !keep(inst, *formal, &a.name.name) {
                    continue;
                }
                let sig = AtomSig {
                    name: name(&inst.rn(&a.name.name)),
                    arg_sorts: a.args.iter().map(|s| name(&inst.rn(&s.name))).collect(),
                };
                for s in &sig.arg_sorts {
                    if !t.has_sort(s) {
                        self.err(
                            Some(&a.name.loc),
                            format!("atom {} uses undeclared sort {s}", sig.name),
                        );
                    }
                }
                match t.atom(&sig.name, sig.arg_sorts.len()) {
                    Some(prev) if *prev != sig => self.err(
                        Some(&a.name.loc),
                        format!("conflicting declarations of atom {}", sig.name),
                    ),
                    Some(_) => {}
                    None => t.atoms.push(sig),
                }
            }
        }
        for (inst, d, formal) in &all {
            for p in &d.processes {
                if !keep(inst, *formal, &p.name.name) {
                    continue;
                }
                let sig = ProcessSig {
                    name: name(&inst.rn(&p.name.name)),
                    arg_sorts: p.args.iter().map(|s| name(&inst.rn(&s.name))).collect(),
                    formal: *formal,
                };
                for s in &sig.arg_sorts {
                    if !t.has_sort(s) {
                        self.err(
                            Some(&p.name.loc),
                            format!("process {} uses undeclared sort {s}", sig.name),
                        );
                    }
                }
                if t.atoms.iter().any(|a| a.name == sig.name) {
                    self.err(
                        Some(&p.name.loc),
                        format!("{} declared both as atom and as process", sig.name),
                    );
                }
                match t.processes.iter_mut().find(|q| q.name == sig.name) {
                    Some(prev) if prev.arg_sorts != sig.arg_sorts => self.err(
                        Some(&p.name.loc),
                        format!("conflicting declarations of process {}", sig.name),
                    ),
                    Some(prev) => prev.formal &= sig.formal,
                    None => t.processes.push(sig),
                }
            }
        }
        t
    }

    fn resolve_set(
        &mut self,
        inst: &Instance,
        t: &Tables,
        s: &RawSetDef,
        n: &Name,
    ) -> Option<AtomSetDef> {
        let locals = self.binder_locals(inst, t, &s.binders)?;
        let mut members = Vec::new();
        for a in &s.members {
            members.push(self.resolve_pattern(inst, t, a, &locals)?);
        }
        Some(AtomSetDef {
            name: n.clone(),
            members,
            quantifiers: locals
                .iter()
                .map(|l| (name(&l.name), l.sort.clone()))
                .collect(),
        })
    }

    fn binder_locals(&mut self, inst: &Instance, t: &Tables, bs: &[Binder]) -> Option<Vec<Local>> {
        let mut out = Vec::new();
        for b in bs {
            let sort = inst.rn(&b.sort.name);
            if !t.has_sort(&sort) {
                self.err(Some(&b.sort.loc), format!("undeclared sort {sort}"));
                return None;
            }
            out.push(Local {
                name: b.var.name.clone(),
                sort: name(&sort),
            });
        }
        Some(out)
    }

    fn resolve_comm(&mut self, inst: &Instance, t: &Tables, c: &RawCommDef) -> Option<CommRule> {
        let locals = self.binder_locals(inst, t, &c.binders)?;
        let a = self.resolve_pattern(inst, t, &c.a, &locals)?;
        let b = self.resolve_pattern(inst, t, &c.b, &locals)?;
        let r = self.resolve_pattern(inst, t, &c.result, &locals)?;
        let mut lhs_vars = Vec::new();
        a.args.iter().chain(&b.args).for_each(|x| x.collect_vars(&mut lhs_vars));
        let mut res_vars = Vec::new();
        r.args.iter().for_each(|x| x.collect_vars(&mut res_vars));
        for v in res_vars {
            if !lhs_vars.contains(&v) {
                self.err(
                    Some(&c.result.loc),
                    format!("communication result uses {} which neither operand binds", v.0),
                );
                return None;
            }
        }
        Some(CommRule {
            lhs_a: a,
            lhs_b: b,
            result: r,
            quantifiers: locals
                .iter()
                .map(|l| (name(&l.name), l.sort.clone()))
                .collect(),
        })
    }

    fn resolve_pattern(
        &mut self,
        inst: &Instance,
        t: &Tables,
        a: &RawAtom,
        locals: &[Local],
    ) -> Option<AtomPattern> {
        let n = inst.rn(&a.name);
        let Some(sig) = t.atom(&n, a.args.len()) else {
            self.err(
                Some(&a.loc),
                format!("undeclared atom {n} with {} argument(s)", a.args.len()),
            );
            return None;
        };
        let sorts = sig.arg_sorts.clone();
        let args = self.resolve_args(inst, t, &a.args, &sorts, locals, &a.loc)?;
        Some(AtomPattern {
            atom: name(&n),
            args,
        })
    }

    fn resolve_args(
        &mut self,
        inst: &Instance,
        t: &Tables,
        args: &[RawTerm],
        sorts: &[Name],
        locals: &[Local],
        loc: &Loc,
    ) -> Option<Vec<Term>> {
        let mut out = Vec::new();
        for (a, s) in args.iter().zip(sorts) {
            out.push(self.resolve_term(inst, t, a, s, locals, loc)?);
        }
        Some(out)
    }

    fn resolve_term(
        &mut self,
        inst: &Instance,
        t: &Tables,
        raw: &RawTerm,
        expected: &Name,
        locals: &[Local],
        at: &Loc,
    ) -> Option<Term> {
        match raw {
            RawTerm::Int(v) => {
                if t.literal_sorts.contains(expected) {
                    Some(Term::Lit {
                        value: *v,
                        sort: expected.clone(),
                    })
                } else {
                    self.err(
                        Some(at),
                        format!("literal {v} where sort {expected} (without literals) is expected"),
                    );
                    None
                }
            }
            RawTerm::Placeholder(_) | RawTerm::Wildcard => {
                self.err(Some(at), "placeholders and wildcards are not allowed here");
                None
            }
            RawTerm::App { name: n, args, loc } => {
                if args.is_empty() {
                    if let Some(l) = locals.iter().rev().find(|l| &l.name == n) {
                        if l.sort != *expected {
                            self.err(
                                Some(loc),
                                format!(
                                    "sort mismatch: variable {n} has sort {}, expected {expected}",
                                    l.sort
                                ),
                            );
                            return None;
                        }
                        return Some(Term::Var {
                            name: name(n),
                            sort: l.sort.clone(),
                        });
                    }
                }
                let gn = inst.rn(n);
                let Some(f) = t.function(&gn, args.len()) else {
                    self.err(
                        Some(loc),
                        format!("undeclared function {gn} with {} argument(s)", args.len()),
                    );
                    return None;
                };
                if f.result_sort != *expected {
                    self.err(
                        Some(loc),
                        format!(
                            "sort mismatch: {gn} has sort {}, expected {expected}",
                            f.result_sort
                        ),
                    );
                    return None;
                }
                let f = f.clone();
                let args = self.resolve_args(inst, t, args, &f.arg_sorts, locals, loc)?;
                Some(Term::App {
                    ctor: f.name,
                    sort: f.result_sort,
                    args,
                })
            }
        }
    }

    fn resolve_def(
        &mut self,
        inst: &Instance,
        t: &Tables,
        m: &ModuleDef,
        d: &RawDef,
        n: &Name,
        spec: &FlatSpec,
    ) -> Option<ProcessDef> {
        let Some(sig) = t.process(n) else {
            self.err(
                Some(&d.name.loc),
                format!("equation for undeclared process {n}"),
            );
            return None;
        };
        if sig.arg_sorts.len() != d.params.len() {
            self.err(
                Some(&d.name.loc),
                format!(
                    "process {n} declared with {} argument(s), equation has {}",
                    sig.arg_sorts.len(),
                    d.params.len()
                ),
            );
            return None;
        }
        let mut locals = Vec::new();
        for v in &m.variables {
            let sort = inst.rn(&v.sort.name);
            for x in &v.names {
                locals.push(Local {
                    name: x.name.clone(),
                    sort: name(&sort),
                });
            }
        }
        let formals: Vec<(Name, Name)> = d
            .params
            .iter()
            .zip(&sig.arg_sorts)
            .map(|(p, s)| (name(&p.name), s.clone()))
            .collect();
        for (p, s) in &formals {
            locals.push(Local {
                name: p.to_string(),
                sort: s.clone(),
            });
        }
        let body = self.resolve_proc(inst, t, &d.body, &mut locals, spec, &d.name.loc)?;
        Some(ProcessDef {
            name: n.clone(),
            formals,
            body,
            loc: Some(d.name.loc.clone()),
        })
    }

    fn resolve_proc(
        &mut self,
        inst: &Instance,
        t: &Tables,
        p: &RawProc,
        locals: &mut Vec<Local>,
        spec: &FlatSpec,
        at: &Loc,
    ) -> Option<Proc> {
        Some(match p {
            RawProc::Delta => ProcExpr::delta(),
            RawProc::Skip => ProcExpr::skip(),
            RawProc::Call(a) => {
                let n = inst.rn(&a.name);
                if let Some(sig) = t.process(&n) {
                    if sig.arg_sorts.len() != a.args.len() {
                        self.err(
                            Some(&a.loc),
                            format!(
                                "process {n} expects {} argument(s), got {}",
                                sig.arg_sorts.len(),
                                a.args.len()
                            ),
                        );
                        return None;
                    }
                    let sorts = sig.arg_sorts.clone();
                    let args = self.resolve_args(inst, t, &a.args, &sorts, locals, &a.loc)?;
                    ProcExpr::inst(&n, args)
                } else {
                    let pat = self.resolve_pattern(inst, t, a, locals)?;
                    std::sync::Arc::new(ProcExpr::Atom(pat.atom, pat.args))
                }
            }
            RawProc::Alt(l, r) => ProcExpr::alt(
                self.resolve_proc(inst, t, l, locals, spec, at)?,
                self.resolve_proc(inst, t, r, locals, spec, at)?,
            ),
            RawProc::Seq(l, r) => ProcExpr::seq(
                self.resolve_proc(inst, t, l, locals, spec, at)?,
                self.resolve_proc(inst, t, r, locals, spec, at)?,
            ),
            RawProc::Par(l, r) => ProcExpr::par(
                self.resolve_proc(inst, t, l, locals, spec, at)?,
                self.resolve_proc(inst, t, r, locals, spec, at)?,
            ),
            RawProc::Star(l, r) => ProcExpr::star(
                self.resolve_proc(inst, t, l, locals, spec, at)?,
                self.resolve_proc(inst, t, r, locals, spec, at)?,
            ),
            RawProc::Disrupt(l, r) => ProcExpr::disrupt(
                self.resolve_proc(inst, t, l, locals, spec, at)?,
                self.resolve_proc(inst, t, r, locals, spec, at)?,
            ),
            RawProc::Sum { var, sort, body } => {
                let s = inst.rn(&sort.name);
                if !t.has_sort(&s) {
                    self.err(Some(&sort.loc), format!("undeclared sort {s}"));
                    return None;
                }
                locals.push(Local {
                    name: var.name.clone(),
                    sort: name(&s),
                });
                let b = self.resolve_proc(inst, t, body, locals, spec, at);
                locals.pop();
                ProcExpr::sum(&var.name, &s, b?)
            }
            RawProc::Encaps(h, b) | RawProc::Hide(h, b) => {
                let set = match h {
                    RawSetRef::Named(id) => {
                        let n = inst.rn(&id.name);
                        if !spec.sets.contains_key(n.as_str()) {
                            self.err(Some(&id.loc), format!("undeclared atom set {n}"));
                            return None;
                        }
                        SetRef::Named(name(&n))
                    }
                    RawSetRef::Inline(ms) => {
                        let mut out = Vec::new();
                        for a in ms {
                            out.push(self.resolve_pattern(inst, t, a, locals)?);
                        }
                        SetRef::Inline(out)
                    }
                };
                let body = self.resolve_proc(inst, t, b, locals, spec, at)?;
                if matches!(p, RawProc::Encaps(..)) {
                    ProcExpr::encaps(set, body)
                } else {
                    ProcExpr::hide(set, body)
                }
            }
        })
    }
}

/// Checks the invariants of a flat specification: resolved references,
/// defined processes, closed bodies and a functional communication map.
pub fn check(spec: &FlatSpec) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for def in spec.defs.values() {
        let loc = def.loc.clone();
        let mut fv = Vec::new();
        def.body.free_vars(&mut fv);
        for (v, _) in fv {
            if !def.formals.iter().any(|(f, _)| *f == v) {
                out.push(Diagnostic::new(
                    loc.clone(),
                    format!("free variable {v} in the equation for {}", def.name),
                ));
            }
        }
        def.body.walk(&mut |e| match e {
            ProcExpr::Inst(p, args) => match spec.process(p) {
                None => out.push(Diagnostic::new(
                    loc.clone(),
                    format!("{} refers to undeclared process {p}", def.name),
                )),
                Some(sig) => {
                    let sorts: Vec<&Name> = args.iter().map(Term::sort).collect();
                    if sorts.len() != sig.arg_sorts.len()
                        || sorts.iter().zip(&sig.arg_sorts).any(|(a, b)| *a != b)
                    {
                        out.push(Diagnostic::new(
                            loc.clone(),
                            format!("{} instantiates {p} with ill-sorted arguments", def.name),
                        ));
                    }
                    if !sig.formal && spec.def(p).is_none() {
                        out.push(Diagnostic::new(
                            loc.clone(),
                            format!("process {p} has no defining equation"),
                        ));
                    }
                }
            },
            ProcExpr::Atom(a, args) => {
                if spec.atom(a, args.len()).is_none() {
                    out.push(Diagnostic::new(
                        loc.clone(),
                        format!("{} uses undeclared atom {a}", def.name),
                    ));
                }
            }
            ProcExpr::Encaps(SetRef::Named(h), _) | ProcExpr::Hide(SetRef::Named(h), _) => {
                if spec.set(h).is_none() {
                    out.push(Diagnostic::new(
                        loc.clone(),
                        format!("{} uses undeclared atom set {h}", def.name),
                    ));
                }
            }
            _ => {}
        });
    }
    for i in 0..spec.comms.len() {
        for j in (i + 1)..spec.comms.len() {
            if comm_overlap(&spec.comms[i], &spec.comms[j]) {
                out.push(Diagnostic::new(
                    spec.comm_locs.get(j).cloned().flatten(),
                    format!(
                        "communication rules overlap: `{}` and `{}`",
                        spec.comms[i], spec.comms[j]
                    ),
                ));
            }
        }
    }
    dedup(&mut out);
    out
}

fn dedup(ds: &mut Vec<Diagnostic>) {
    let mut seen = BTreeSet::new();
    ds.retain(|d| seen.insert(d.to_string()));
}

fn rename_apart(p: &AtomPattern, qs: &[(Name, Name)], suffix: &str) -> AtomPattern {
    let b: Binding = qs
        .iter()
        .map(|(v, s)| (v.clone(), Term::var(&format!("{v}{suffix}"), s)))
        .collect();
    p.apply(&b)
}

/// Could some pair of actions be matched by both rules (in either operand order)?
pub fn comm_overlap(r1: &CommRule, r2: &CommRule) -> bool {
    let a2 = rename_apart(&r2.lhs_a, &r2.quantifiers, "'2");
    let b2 = rename_apart(&r2.lhs_b, &r2.quantifiers, "'2");
    let try_pair = |x: &AtomPattern, y: &AtomPattern| {
        if r1.lhs_a.atom != x.atom || r1.lhs_b.atom != y.atom {
            return false;
        }
        let mut s = Binding::new();
        unify_args(&r1.lhs_a.args, &x.args, &mut s) && unify_args(&r1.lhs_b.args, &y.args, &mut s)
    };
    try_pair(&a2, &b2) || try_pair(&b2, &a2)
}
