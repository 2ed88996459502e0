//! Resolution of free-standing action patterns (mapping files, scenario
//! scripts, trace queries) against a linked specification.
//!
//! `$n` placeholders become variables named `$n`, `_` wildcards become
//! fresh variables `_0`, `_1`, ... Both match any term of the right sort.

use thiserror::Error;

use crate::diag::Loc;
use crate::flat::FlatSpec;
use crate::syntax::ast::{RawAtom, RawTerm};
use crate::syntax::{parse_label, parse_term};
use crate::terms::{match_action, name, ActionLabel, AtomPattern, Binding, Name, Quantifier, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{loc}: {message}")]
pub struct PatternError {
    pub loc: Loc,
    pub message: String,
}

impl PatternError {
    fn new(loc: &Loc, message: impl Into<String>) -> PatternError {
        PatternError {
            loc: loc.clone(),
            message: message.into(),
        }
    }
}

/// Resolves `raw` against the atom and function tables of `spec`.
pub fn resolve_pattern(spec: &FlatSpec, raw: &RawAtom) -> Result<AtomPattern, PatternError> {
    let Some(sig) = spec.atom(&raw.name, raw.args.len()) else {
        return Err(PatternError::new(
            &raw.loc,
            format!("undeclared atom {} with {} argument(s)", raw.name, raw.args.len()),
        ));
    };
    let mut fresh = 0;
    let mut args = Vec::with_capacity(raw.args.len());
    for (a, s) in raw.args.iter().zip(&sig.arg_sorts) {
        args.push(resolve_term(spec, a, s, &raw.loc, &mut fresh)?);
    }
    Ok(AtomPattern {
        atom: sig.name.clone(),
        args,
    })
}

fn resolve_term(
    spec: &FlatSpec,
    raw: &RawTerm,
    expected: &Name,
    at: &Loc,
    fresh: &mut usize,
) -> Result<Term, PatternError> {
    match raw {
        RawTerm::Int(v) if spec.literal_sorts.contains(expected) => Ok(Term::Lit {
            value: *v,
            sort: expected.clone(),
        }),
        RawTerm::Int(v) => Err(PatternError::new(
            at,
            format!("literal {v} where sort {expected} (without literals) is expected"),
        )),
        RawTerm::Placeholder(n) => Ok(Term::Var {
            name: name(&format!("${n}")),
            sort: expected.clone(),
        }),
        RawTerm::Wildcard => {
            let v = format!("_{fresh}");
            *fresh += 1;
            Ok(Term::Var {
                name: name(&v),
                sort: expected.clone(),
            })
        }
        RawTerm::App { name: n, args, loc } => {
            let Some(f) = spec.function(n, args.len()) else {
                return Err(PatternError::new(
                    loc,
                    format!("undeclared function {n} with {} argument(s)", args.len()),
                ));
            };
            if f.result_sort != *expected {
                return Err(PatternError::new(
                    loc,
                    format!("sort mismatch: {n} has sort {}, expected {expected}", f.result_sort),
                ));
            }
            let mut out = Vec::with_capacity(args.len());
            for (a, s) in args.iter().zip(&f.arg_sorts) {
                out.push(resolve_term(spec, a, s, loc, fresh)?);
            }
            Ok(Term::App {
                ctor: f.name.clone(),
                sort: f.result_sort.clone(),
                args: out,
            })
        }
    }
}

/// Parses and resolves a pattern such as `s-call(primitive, succ(_))`.
pub fn parse_pattern(spec: &FlatSpec, text: &str) -> Result<AtomPattern, PatternError> {
    let raw = parse_label(text.trim()).map_err(|e| PatternError {
        loc: e.loc.clone(),
        message: e.to_string(),
    })?;
    resolve_pattern(spec, &raw)
}

/// Parses a ground term of sort `sort`, such as a value for an open
/// descriptor.
pub fn parse_value(spec: &FlatSpec, text: &str, sort: &str) -> Result<Term, PatternError> {
    let raw = parse_term(text.trim()).map_err(|e| PatternError {
        loc: e.loc.clone(),
        message: e.to_string(),
    })?;
    let t = resolve_term(spec, &raw, &name(sort), &Loc::default(), &mut 0)?;
    if !t.is_ground() {
        return Err(PatternError::new(&Loc::default(), format!("value {t} is not ground")));
    }
    Ok(t)
}

/// Parses a label that must be ground, such as `input-data` or `tau`.
pub fn parse_ground_label(spec: &FlatSpec, text: &str) -> Result<ActionLabel, PatternError> {
    if text.trim() == "tau" {
        return Ok(ActionLabel::Tau);
    }
    let p = parse_pattern(spec, text)?;
    if !pattern_vars(&p).is_empty() {
        return Err(PatternError::new(
            &Loc::default(),
            format!("label {p} contains placeholders"),
        ));
    }
    Ok(p.to_label())
}

/// Placeholder and wildcard variables of a resolved pattern.
pub fn pattern_vars(p: &AtomPattern) -> Vec<Quantifier> {
    let mut vs = Vec::new();
    for a in &p.args {
        a.collect_vars(&mut vs);
    }
    vs.retain(|(v, _)| v.starts_with('$') || v.starts_with('_'));
    vs.sort();
    vs.dedup();
    vs
}

/// Matches a label (whose arguments may themselves contain variables)
/// against a pattern, treating placeholders and wildcards as binders.
pub fn match_pattern(p: &AtomPattern, label: &ActionLabel) -> Option<Binding> {
    match_action(p, &pattern_vars(p), label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linker::flatten;
    use crate::syntax::parse_spec;

    fn spec() -> FlatSpec {
        let src = "data module D begin exports begin sorts N literals N functions z : N \
                   s : N -> N end end D \
                   process module P begin imports D atoms a : N # N processes X \
                   definitions X = a(z, z) end P";
        flatten(&parse_spec(src).unwrap(), "P").unwrap()
    }

    #[test]
    fn wildcards_and_placeholders_match_any_term() {
        let sp = spec();
        let p = parse_pattern(&sp, "a(s(_), $1)").unwrap();
        let l = parse_ground_label(&sp, "a(s(3), z)").unwrap();
        let b = match_pattern(&p, &l).unwrap();
        assert_eq!(b.get("$1"), Some(&Term::constant("z", "N")));
        assert!(match_pattern(&p, &parse_ground_label(&sp, "a(z, z)").unwrap()).is_none());
    }

    #[test]
    fn undeclared_atom_is_reported() {
        let err = parse_pattern(&spec(), "b(z)").unwrap_err();
        assert!(err.message.contains("undeclared atom b"));
    }
}
