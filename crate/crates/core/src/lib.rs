//! Process-algebra workbench: parse and link PSF-style specifications,
//! explore their transition systems, check equivalences and refinements,
//! generate client/server interfaces and simulate the result.

pub mod bisim;
pub mod cslib;
pub mod diag;
pub mod flat;
pub mod linker;
pub mod refine;
pub mod resolve;
pub mod runtime;
pub mod semantics;
pub mod service;
pub mod syntax;
pub mod terms;

pub use diag::{Diagnostic, Loc};
pub use flat::FlatSpec;
pub use syntax::{parse_spec, pretty_print, ModuleDef, ParseError};
pub use terms::{ActionLabel, Proc, ProcExpr, Term};
