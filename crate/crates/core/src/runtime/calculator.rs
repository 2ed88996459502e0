//! The calculator demo: four client/server components whose arithmetic is
//! done by native handlers working only with successor, predecessor and
//! zero test, so every step of a computation is a primitive call.

use std::sync::Arc;

use crate::cslib::{generate_interfaces, load_sources, parse_manifest, CsError, GeneratedComposition};
use crate::flat::FlatSpec;
use crate::linker::{flatten, flatten_many};
use crate::syntax::ModuleDef;
use crate::terms::Term;

use super::{Handlers, Session, SessionError, Stub};

pub const CALCULATOR_SPEC: &str = include_str!("../../demo/calculator.psf");
pub const CALCULATOR_MANIFEST: &str = include_str!("../../demo/calculator.manifest");

/// Linked calculator application with its handlers.
pub struct Demo {
    pub modules: Vec<ModuleDef>,
    pub composition: GeneratedComposition,
    pub spec: Arc<FlatSpec>,
    pub root: String,
    pub handlers: Handlers,
}

pub fn calculator_demo() -> Result<Demo, CsError> {
    let mut mods = load_sources(&[("demo/calculator.psf".to_string(), CALCULATOR_SPEC.to_string())])?;
    let comps = parse_manifest(CALCULATOR_MANIFEST, "demo/calculator.manifest")?;
    let roots = ["Operator", "Primitive", "Basic", "Complex"];
    let components = flatten_many(&mods, &roots)?;
    let composition = generate_interfaces(&mods, &components, &comps)?;
    mods.extend(composition.modules.iter().cloned());
    let spec = flatten(&mods, &composition.root)?;
    Ok(Demo {
        modules: mods,
        root: composition.root.clone(),
        composition,
        spec: Arc::new(spec),
        handlers: calculator_handlers(),
    })
}

/// A session on the calculator application.
pub fn calculator_session(seed: u64, depth_bound: usize) -> Result<Session, SessionError> {
    let demo = calculator_demo().map_err(|e| SessionError::Blocked(e.to_string()))?;
    Session::new(demo.spec, &demo.root, demo.handlers, seed, depth_bound)
}

fn num(v: u64) -> Term {
    Term::lit(v, "RESULT")
}

fn svc(f: &str, args: &[u64]) -> Term {
    Term::app(f, "SERVICE", args.iter().map(|&v| num(v)).collect())
}

fn value(t: &Term) -> Result<u64, String> {
    match t {
        Term::Lit { value, .. } => Ok(*value),
        other => Err(format!("expected a number, got {other}")),
    }
}

fn args<const N: usize>(a: &[Term]) -> Result<[u64; N], String> {
    if a.len() != N {
        return Err(format!("expected {N} argument(s), got {}", a.len()));
    }
    let mut out = [0; N];
    for (o, t) in out.iter_mut().zip(a) {
        *o = value(t)?;
    }
    Ok(out)
}

fn call(stub: &mut dyn Stub, server: &str, f: &str, a: &[u64]) -> Result<u64, String> {
    value(&stub.call(server, svc(f, a))?)
}

fn is_zero(stub: &mut dyn Stub, n: u64) -> Result<bool, String> {
    Ok(call(stub, "primitive", "iszero", &[n])? == 1)
}

fn less_than(stub: &mut dyn Stub, a: u64, b: u64) -> Result<bool, String> {
    let d = call(stub, "basic", "subtract", &[b, a])?;
    Ok(!is_zero(stub, d)?)
}

pub fn calculator_handlers() -> Handlers {
    let mut h = Handlers::default();
    h.bind("primitive", "succ", |a, _| Ok(num(args::<1>(a)?[0] + 1)));
    h.bind("primitive", "pred", |a, _| Ok(num(args::<1>(a)?[0].saturating_sub(1))));
    h.bind("primitive", "iszero", |a, _| Ok(num(u64::from(args::<1>(a)?[0] == 0))));
    h.bind("basic", "add", |a, stub| {
        let [mut x, mut y] = args::<2>(a)?;
        while !is_zero(stub, y)? {
            x = call(stub, "primitive", "succ", &[x])?;
            y = call(stub, "primitive", "pred", &[y])?;
        }
        Ok(num(x))
    });
    h.bind("basic", "subtract", |a, stub| {
        let [mut x, mut y] = args::<2>(a)?;
        while !is_zero(stub, y)? && !is_zero(stub, x)? {
            x = call(stub, "primitive", "pred", &[x])?;
            y = call(stub, "primitive", "pred", &[y])?;
        }
        Ok(num(x))
    });
    h.bind("complex", "multiply", |a, stub| {
        let [x, mut y] = args::<2>(a)?;
        let mut r = 0;
        while !is_zero(stub, y)? {
            r = call(stub, "basic", "add", &[r, x])?;
            y = call(stub, "primitive", "pred", &[y])?;
        }
        Ok(num(r))
    });
    h.bind("complex", "divide", |a, stub| {
        let [mut x, y] = args::<2>(a)?;
        let mut r = 0;
        if !is_zero(stub, y)? {
            while !less_than(stub, x, y)? {
                x = call(stub, "basic", "subtract", &[x, y])?;
                r = call(stub, "primitive", "succ", &[r])?;
            }
        }
        Ok(num(r))
    });
    h
}
