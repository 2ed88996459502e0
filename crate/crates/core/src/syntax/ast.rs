//! Unresolved syntax trees as produced by the parser.
//!
//! Identifiers are kept as written; the linker decides whether a name is a
//! variable, a constructor, an atom or a process.

use crate::diag::Loc;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ident {
    pub name: String,
    pub loc: Loc,
}

impl Ident {
    pub fn new(name: &str) -> Ident {
        Ident {
            name: name.to_string(),
            loc: Loc::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModuleKind {
    Data,
    Process,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawTerm {
    App {
        name: String,
        args: Vec<RawTerm>,
        loc: Loc,
    },
    Int(u64),
    /// `$n` in refinement mappings.
    Placeholder(u32),
    /// `_` in trace patterns.
    Wildcard,
}

impl RawTerm {
    pub fn ident(name: &str) -> RawTerm {
        RawTerm::App {
            name: name.to_string(),
            args: Vec::new(),
            loc: Loc::default(),
        }
    }
}

/// An identifier applied to terms in process position: an atom or a process
/// instantiation, decided at link time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawAtom {
    pub name: String,
    pub args: Vec<RawTerm>,
    pub loc: Loc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawSetRef {
    Named(Ident),
    Inline(Vec<RawAtom>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawProc {
    Delta,
    Skip,
    Call(RawAtom),
    Alt(Box<RawProc>, Box<RawProc>),
    Seq(Box<RawProc>, Box<RawProc>),
    Par(Box<RawProc>, Box<RawProc>),
    Star(Box<RawProc>, Box<RawProc>),
    Sum {
        var: Ident,
        sort: Ident,
        body: Box<RawProc>,
    },
    Encaps(RawSetRef, Box<RawProc>),
    Hide(RawSetRef, Box<RawProc>),
    Disrupt(Box<RawProc>, Box<RawProc>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuncDecl {
    pub name: Ident,
    pub args: Vec<Ident>,
    pub result: Ident,
}

/// Atom or process signature: a name and its argument sorts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigDecl {
    pub name: Ident,
    pub args: Vec<Ident>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Decls {
    pub sorts: Vec<Ident>,
    pub literals: Vec<Ident>,
    pub functions: Vec<FuncDecl>,
    pub atoms: Vec<SigDecl>,
    pub processes: Vec<SigDecl>,
}

impl Decls {
    pub fn is_empty(&self) -> bool {
        self.sorts.is_empty()
            && self.literals.is_empty()
            && self.functions.is_empty()
            && self.atoms.is_empty()
            && self.processes.is_empty()
    }

    /// Every declared name, regardless of kind.
    pub fn names(&self) -> impl Iterator<Item = &Ident> {
        self.sorts
            .iter()
            .chain(self.functions.iter().map(|f| &f.name))
            .chain(self.atoms.iter().map(|a| &a.name))
            .chain(self.processes.iter().map(|p| &p.name))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamSection {
    pub name: Ident,
    pub decls: Decls,
}

/// `Section bound by [ formal -> actual, ... ] to Module`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BindingClause {
    pub section: Ident,
    pub map: Vec<(Ident, Ident)>,
    pub source: Ident,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImportClause {
    pub module: Ident,
    pub bindings: Vec<BindingClause>,
    pub renamings: Vec<(Ident, Ident)>,
}

impl ImportClause {
    pub fn plain(module: &str) -> ImportClause {
        ImportClause {
            module: Ident::new(module),
            bindings: Vec::new(),
            renamings: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Binder {
    pub var: Ident,
    pub sort: Ident,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSetDef {
    pub name: Ident,
    pub members: Vec<RawAtom>,
    pub binders: Vec<Binder>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawCommDef {
    pub a: RawAtom,
    pub b: RawAtom,
    pub result: RawAtom,
    pub binders: Vec<Binder>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub names: Vec<Ident>,
    pub sort: Ident,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawDef {
    pub name: Ident,
    pub params: Vec<Ident>,
    pub body: RawProc,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuleDef {
    pub kind: ModuleKind,
    pub name: Ident,
    pub parameters: Vec<ParamSection>,
    pub exports: Decls,
    pub imports: Vec<ImportClause>,
    pub hidden: Decls,
    pub sets: Vec<RawSetDef>,
    pub comms: Vec<RawCommDef>,
    pub variables: Vec<VarDecl>,
    pub definitions: Vec<RawDef>,
}

impl ModuleDef {
    pub fn new(kind: ModuleKind, name: &str) -> ModuleDef {
        ModuleDef {
            kind,
            name: Ident::new(name),
            parameters: Vec::new(),
            exports: Decls::default(),
            imports: Vec::new(),
            hidden: Decls::default(),
            sets: Vec::new(),
            comms: Vec::new(),
            variables: Vec::new(),
            definitions: Vec::new(),
        }
    }

    /// Atom signatures declared by this module, exported first.
    pub fn atom_signatures(&self) -> Vec<String> {
        self.exports
            .atoms
            .iter()
            .chain(self.hidden.atoms.iter())
            .map(|a| {
                if a.args.is_empty() {
                    a.name.name.clone()
                } else {
                    let sorts: Vec<&str> = a.args.iter().map(|s| s.name.as_str()).collect();
                    format!("{} : {}", a.name.name, sorts.join(" # "))
                }
            })
            .collect()
    }
}
