//! Concrete syntax: tokens, parser, unresolved trees and printer.

pub mod ast;
pub mod parser;
pub mod printer;

pub use ast::ModuleDef;
pub use parser::{parse_label, parse_proc, parse_term, parse_spec, parse_spec_file, ParseError};
pub use printer::{pretty_print, pretty_print_all};
