//! The fully linked specification every analysis runs on.

use std::collections::{BTreeMap, BTreeSet};

use crate::diag::Loc;
use crate::terms::{AtomSetDef, CommRule, FuncSig, Name, Proc};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomSig {
    pub name: Name,
    pub arg_sorts: Vec<Name>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessSig {
    pub name: Name,
    pub arg_sorts: Vec<Name>,
    /// Declared in a parameter section and left unbound.
    pub formal: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessDef {
    pub name: Name,
    pub formals: Vec<(Name, Name)>,
    pub body: Proc,
    pub loc: Option<Loc>,
}

/// A specification after import, binding and renaming resolution.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlatSpec {
    pub sorts: Vec<Name>,
    /// Sorts whose carrier additionally contains the natural-number literals.
    pub literal_sorts: BTreeSet<Name>,
    pub functions: Vec<FuncSig>,
    pub atoms: Vec<AtomSig>,
    pub sets: BTreeMap<Name, AtomSetDef>,
    pub comms: Vec<CommRule>,
    pub comm_locs: Vec<Option<Loc>>,
    pub processes: Vec<ProcessSig>,
    pub defs: BTreeMap<Name, ProcessDef>,
}

impl FlatSpec {
    pub fn has_sort(&self, s: &str) -> bool {
        self.sorts.iter().any(|x| &**x == s)
    }

    pub fn constructors_of<'a>(&'a self, sort: &'a str) -> impl Iterator<Item = &'a FuncSig> + 'a {
        self.functions.iter().filter(move |f| &*f.result_sort == sort)
    }

    pub fn function(&self, name: &str, arity: usize) -> Option<&FuncSig> {
        self.functions
            .iter()
            .find(|f| &*f.name == name && f.arity() == arity)
    }

    pub fn atom(&self, name: &str, arity: usize) -> Option<&AtomSig> {
        self.atoms
            .iter()
            .find(|a| &*a.name == name && a.arg_sorts.len() == arity)
    }

    pub fn process(&self, name: &str) -> Option<&ProcessSig> {
        self.processes.iter().find(|p| &*p.name == name)
    }

    pub fn def(&self, name: &str) -> Option<&ProcessDef> {
        self.defs.get(name)
    }

    pub fn set(&self, name: &str) -> Option<&AtomSetDef> {
        self.sets.get(name)
    }
}
