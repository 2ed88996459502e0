//! The shipped architecture and client/server libraries, detection of
//! client/server roles, generation of interface compositions, and the
//! quit/shutdown check on composed systems.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::flat::FlatSpec;
use crate::semantics::{Config, Lts};
use crate::syntax::{parse_spec, parse_spec_file, ModuleDef, ParseError};
use crate::terms::{ActionLabel, Name, ProcExpr, Term};

pub const CLIENT_SERVER_LIBRARY: &str = include_str!("../library/v1/clientserver.psf");
pub const ARCHITECTURE_LIBRARY: &str = include_str!("../library/v1/architecture.psf");

/// Names of the client/server library modules, in file order.
pub const CLIENT_SERVER_MODULES: [&str; 9] = [
    "ClientServerTypes",
    "ClientServerPrimitives",
    "ServerPrimitives",
    "S-I",
    "NewServer",
    "ClientPrimitives",
    "NewC-I",
    "NewClient",
    "ClientServer",
];

#[derive(Debug, Error)]
pub enum CsError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Link(#[from] crate::linker::LinkError),
    #[error("module {0} is defined both by the library and by the specification")]
    LibraryClash(String),
    #[error("unknown process {0}")]
    UnknownProcess(String),
    #[error("{process}: c-snd-call with non-constant server argument {arg}; interfaces cannot be generated statically")]
    DynamicServer { process: String, arg: String },
    #[error("component {0} is neither a client nor a server")]
    NoRoles(String),
    #[error("server {server} is claimed by both {first} and {second}")]
    DuplicateServer {
        server: String,
        first: String,
        second: String,
    },
    #[error("component {component} is not a constant of sort ID")]
    BadComponentId { component: String },
    #[error("{process} already contains interface actions ({atom}); it must not be wrapped again")]
    AlreadyWrapped { process: String, atom: String },
    #[error("process {0} is not declared by any module")]
    NoDeclaringModule(String),
    #[error("generated module {0} collides with an existing module")]
    ModuleClash(String),
    #[error("{path}:{line}: {message}")]
    Manifest {
        path: String,
        line: usize,
        message: String,
    },
}

/// The client/server library modules.
pub fn client_server_library() -> Vec<ModuleDef> {
    parse_spec_file(CLIENT_SERVER_LIBRARY, Some("library/v1/clientserver.psf"))
        .expect("shipped library parses")
}

/// The architecture library modules.
pub fn architecture_library() -> Vec<ModuleDef> {
    parse_spec_file(ARCHITECTURE_LIBRARY, Some("library/v1/architecture.psf"))
        .expect("shipped library parses")
}

/// Both libraries, architecture first.
pub fn library_modules() -> Vec<ModuleDef> {
    let mut out = architecture_library();
    out.extend(client_server_library());
    out
}

/// Prepends the libraries to user modules, rejecting name clashes.
pub fn with_library(user: Vec<ModuleDef>) -> Result<Vec<ModuleDef>, CsError> {
    let mut out = library_modules();
    for m in &user {
        if out.iter().any(|l| l.name.name == m.name.name) {
            return Err(CsError::LibraryClash(m.name.name.clone()));
        }
    }
    out.extend(user);
    Ok(out)
}

/// Parses user sources and prepends the libraries.
pub fn load_sources(sources: &[(String, String)]) -> Result<Vec<ModuleDef>, CsError> {
    let mut user = Vec::new();
    for (path, text) in sources {
        user.extend(parse_spec_file(text, Some(path))?);
    }
    with_library(user)
}

/// `name : process`, one component of a generated application.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentDecl {
    pub name: String,
    pub process: String,
}

impl ComponentDecl {
    pub fn new(name: &str, process: &str) -> ComponentDecl {
        ComponentDecl {
            name: name.to_string(),
            process: process.to_string(),
        }
    }
}

/// Parses a component manifest: one `name : process` per line, `--` comments.
pub fn parse_manifest(text: &str, path: &str) -> Result<Vec<ComponentDecl>, CsError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split("--").next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: &str| CsError::Manifest {
            path: path.to_string(),
            line: i + 1,
            message: message.to_string(),
        };
        let (n, p) = line.split_once(':').ok_or_else(|| err("expected `name : process`"))?;
        let (n, p) = (n.trim(), p.trim());
        if n.is_empty() || p.is_empty() || p.contains(char::is_whitespace) {
            return Err(err("expected `name : process`"));
        }
        out.push(ComponentDecl::new(n, p));
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Roles {
    /// Server IDs this component calls.
    pub client_of: BTreeSet<Name>,
    pub is_server: bool,
}

impl Roles {
    pub fn is_empty(&self) -> bool {
        self.client_of.is_empty() && !self.is_server
    }
}

/// Atoms that only appear once a component has been wrapped in interfaces.
fn interface_atom(a: &str) -> bool {
    a.starts_with("cs-")
        || matches!(
            a,
            "c-rec-call" | "c-snd-return" | "c-call" | "c-return" | "s-snd-call" | "s-rec-return" | "s-call" | "s-return"
        )
}

fn reachable_processes(spec: &FlatSpec, root: &str) -> Result<Vec<Name>, CsError> {
    let mut seen: Vec<Name> = Vec::new();
    let mut todo = vec![crate::terms::name(root)];
    while let Some(p) = todo.pop() {
        if seen.contains(&p) {
            continue;
        }
        let Some(d) = spec.def(&p) else {
            if spec.process(&p).is_some() {
                seen.push(p);
                continue;
            }
            return Err(CsError::UnknownProcess(p.to_string()));
        };
        seen.push(p);
        let mut called = Vec::new();
        d.body.called_processes(&mut called);
        todo.extend(called.into_iter().rev());
    }
    Ok(seen)
}

/// Servers called through `c-snd-call`, and whether `s-rec-call` occurs,
/// following instantiations transitively.
pub fn detect_roles(spec: &FlatSpec, process: &str) -> Result<Roles, CsError> {
    let mut roles = Roles::default();
    let mut err = None;
    for p in reachable_processes(spec, process)? {
        let Some(d) = spec.def(&p) else { continue };
        d.body.walk(&mut |e| match e {
            ProcExpr::Atom(a, args) if &**a == "c-snd-call" => match args.first() {
                Some(Term::App { ctor, args, .. }) if args.is_empty() => {
                    roles.client_of.insert(ctor.clone());
                }
                other => {
                    err.get_or_insert(CsError::DynamicServer {
                        process: p.to_string(),
                        arg: other.map(|t| t.to_string()).unwrap_or_default(),
                    });
                }
            },
            ProcExpr::Atom(a, _) if &**a == "s-rec-call" => roles.is_server = true,
            _ => {}
        });
    }
    match err {
        Some(e) => Err(e),
        None => Ok(roles),
    }
}

fn check_unwrapped(spec: &FlatSpec, process: &str) -> Result<(), CsError> {
    for p in reachable_processes(spec, process)? {
        if matches!(&*p, "C-I" | "S-I" | "CS-Client" | "CS-Server") {
            return Err(CsError::AlreadyWrapped {
                process: process.to_string(),
                atom: p.to_string(),
            });
        }
        let Some(d) = spec.def(&p) else { continue };
        let mut found = None;
        d.body.walk(&mut |e| {
            if let ProcExpr::Atom(a, _) = e {
                if interface_atom(a) && found.is_none() {
                    found = Some(a.to_string());
                }
            }
        });
        if let Some(atom) = found {
            return Err(CsError::AlreadyWrapped {
                process: process.to_string(),
                atom,
            });
        }
    }
    Ok(())
}

/// Generated modules plus what the generator learned on the way.
#[derive(Clone, Debug)]
pub struct GeneratedComposition {
    pub modules: Vec<ModuleDef>,
    /// Module to link and process to run: the system inside the
    /// client/server environment.
    pub root: String,
    pub roles: Vec<(ComponentDecl, Roles)>,
    pub warnings: Vec<String>,
}

/// Name of the module declaring `process` in its exports or hidden part.
fn declaring_module<'a>(mods: &'a [ModuleDef], process: &str) -> Result<&'a str, CsError> {
    mods.iter()
        .find(|m| {
            m.exports
                .processes
                .iter()
                .chain(&m.hidden.processes)
                .any(|p| p.name.name == process)
        })
        .map(|m| m.name.name.as_str())
        .ok_or_else(|| CsError::NoDeclaringModule(process.to_string()))
}

fn module_text(name: &str, exported: &str, imports: &[String], body: &str) -> String {
    format!(
        "process module {name}\nbegin\n  exports\n  begin\n    processes\n      {exported}\n  end\n  \
         imports\n    {}\n  definitions\n    {exported} =\n      {body}\nend {name}\n",
        imports.join(",\n    ")
    )
}

fn wrap_import(lib: &str, section: &str, formal: &str, actual: &str, from: &str, to: &str) -> String {
    format!(
        "{lib} {{\n      {section} bound by [\n        {formal} -> {actual}\n      ] to {actual}\n      \
         renamed by [\n        {from} -> {to}\n      ]\n    }}"
    )
}

/// Client and server interfaces for each component, the wrapped
/// components composed in parallel as `ApplicationSystem`, and that system
/// inside the client/server environment as `Application`.
///
/// `mods` are the user modules (with or without the libraries) and `spec`
/// is their linked form, used for role detection.
pub fn generate_interfaces(
    mods: &[ModuleDef],
    spec: &FlatSpec,
    components: &[ComponentDecl],
) -> Result<GeneratedComposition, CsError> {
    let mut roles = Vec::new();
    let mut servers: BTreeMap<Name, String> = BTreeMap::new();
    for c in components {
        match spec.function(&c.name, 0) {
            Some(f) if &*f.result_sort == "ID" => {}
            _ => {
                return Err(CsError::BadComponentId {
                    component: c.name.clone(),
                })
            }
        }
        check_unwrapped(spec, &c.process)?;
        let r = detect_roles(spec, &c.process)?;
        if r.is_empty() {
            return Err(CsError::NoRoles(c.name.clone()));
        }
        if r.is_server {
            let id = crate::terms::name(&c.name);
            if let Some(prev) = servers.insert(id, c.process.clone()) {
                return Err(CsError::DuplicateServer {
                    server: c.name.clone(),
                    first: prev,
                    second: c.process.clone(),
                });
            }
        }
        roles.push((c.clone(), r));
    }

    let mut warnings = Vec::new();
    for (c, r) in &roles {
        for s in &r.client_of {
            if !servers.contains_key(s) {
                warnings.push(format!("{} calls {s}, which no component serves", c.name));
            }
        }
    }
    if let Some(cycle) = client_cycle(&roles) {
        warnings.push(format!("client/server cycle: {}", cycle.join(" -> ")));
    }

    let mut text = String::new();
    let mut system_imports = Vec::new();
    let mut system_parts = Vec::new();
    for (c, r) in &roles {
        let p = &c.process;
        let pm = declaring_module(mods, p)?;
        let me = &c.name;
        let mut client = None;
        if !r.client_of.is_empty() {
            let mut imports = vec![pm.to_string()];
            let mut parts = Vec::new();
            for s in &r.client_of {
                imports.push(format!(
                    "NewC-I {{\n      Name bound by [\n        client -> {me},\n        server -> {s}\n      ] to {pm}\n    }}"
                ));
                parts.push(format!("C-I({me}, {s})"));
            }
            parts.push(p.clone());
            let name = format!("C-{p}");
            text.push_str(&module_text(&name, &name, &imports, &parts.join("\n      || ")));
            text.push('\n');
            client = Some(name);
        }
        if r.is_server {
            let name = format!("S-{p}");
            let mut imports = vec![format!(
                "S-I {{\n      Name bound by [\n        server -> {me}\n      ] to {pm}\n    }}"
            )];
            let inner = match &client {
                Some(cm) => {
                    let sc = format!("SC-{p}");
                    imports.push(wrap_import("NewClient", "Client", "Client", cm, "CS-Client", &sc));
                    sc
                }
                None => {
                    imports.push(pm.to_string());
                    p.clone()
                }
            };
            text.push_str(&module_text(&name, &name, &imports, &format!("S-I({me})\n      || {inner}")));
            text.push('\n');
            system_imports.push(wrap_import("NewServer", "Server", "Server", &name, "CS-Server", &format!("CS-{p}")));
        } else {
            let cm = client.expect("a component without server role is a client");
            system_imports.push(wrap_import("NewClient", "Client", "Client", &cm, "CS-Client", &format!("CS-{p}")));
        }
        system_parts.push(format!("CS-{p}"));
    }
    text.push_str(&module_text(
        "ApplicationSystem",
        "ApplicationSystem",
        &system_imports,
        &system_parts.join("\n      || "),
    ));
    text.push_str(
        "\nprocess module Application\nbegin\n  imports\n    ClientServer {\n      System bound by [\n        \
         System -> ApplicationSystem\n      ] to ApplicationSystem\n      renamed by [\n        \
         ClientServer -> Application\n      ]\n    }\nend Application\n",
    );
    let modules = parse_spec(&text)?;
    for m in &modules {
        if mods.iter().any(|u| u.name.name == m.name.name) {
            return Err(CsError::ModuleClash(m.name.name.clone()));
        }
    }
    Ok(GeneratedComposition {
        modules,
        root: "Application".into(),
        roles,
        warnings,
    })
}

fn client_cycle(roles: &[(ComponentDecl, Roles)]) -> Option<Vec<String>> {
    let edges: BTreeMap<&str, Vec<&str>> = roles
        .iter()
        .map(|(c, r)| (c.name.as_str(), r.client_of.iter().map(|s| &**s).collect()))
        .collect();
    fn dfs<'a>(
        n: &'a str,
        edges: &BTreeMap<&'a str, Vec<&'a str>>,
        stack: &mut Vec<&'a str>,
        done: &mut BTreeSet<&'a str>,
    ) -> Option<Vec<String>> {
        if let Some(i) = stack.iter().position(|s| *s == n) {
            let mut cyc: Vec<String> = stack[i..].iter().map(|s| s.to_string()).collect();
            cyc.push(n.to_string());
            return Some(cyc);
        }
        if !done.insert(n) {
            return None;
        }
        stack.push(n);
        for m in edges.get(n).into_iter().flatten() {
            if let Some(c) = dfs(m, edges, stack, done) {
                return Some(c);
            }
        }
        stack.pop();
        None
    }
    let mut done = BTreeSet::new();
    for n in edges.keys() {
        if let Some(c) = dfs(n, &edges, &mut Vec::new(), &mut done) {
            return Some(c);
        }
    }
    None
}

/// Result of [`quit_shutdown_closure`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShutdownReport {
    /// Maximum number of steps allowed from a quit to termination.
    pub bound: usize,
    pub quit_transitions: usize,
    /// Targets of quit transitions whose nearest termination is further
    /// than `bound` steps, or unreachable.
    pub slow_quits: Vec<usize>,
    /// States after a quit from which termination is unreachable.
    pub trapped: Vec<usize>,
    /// Non-terminated states without successors that no quit leads to.
    pub deadlocks: Vec<usize>,
    /// Reachable states from which no quit and no termination is reachable.
    pub unquittable: Vec<usize>,
}

impl ShutdownReport {
    /// Quits lead to termination within the bound and nothing deadlocks.
    pub fn clean(&self) -> bool {
        self.slow_quits.is_empty() && self.trapped.is_empty() && self.deadlocks.is_empty()
    }
}

fn is_quit(l: &ActionLabel) -> bool {
    matches!(l, ActionLabel::Act { atom, args } if &**atom == "quit" && args.is_empty())
}

/// Checks that every quit leads to termination within `bound` steps, that
/// termination stays reachable after a quit, and that no state outside the
/// shutdown region deadlocks.
pub fn quit_shutdown_closure(lts: &Lts, bound: usize) -> ShutdownReport {
    let n = lts.num_states();
    let succ = lts.successors();
    let mut pred = vec![Vec::new(); n];
    for t in &lts.transitions {
        pred[t.to].push(t.from);
    }
    let terminal = |s: usize| lts.terminating.contains(&s) || matches!(lts.states[s], Config::Terminated);
    // distance to termination, backwards BFS
    let mut dist = vec![usize::MAX; n];
    let mut q = VecDeque::new();
    for s in 0..n {
        if terminal(s) {
            dist[s] = 0;
            q.push_back(s);
        }
    }
    while let Some(s) = q.pop_front() {
        for &p in &pred[s] {
            if dist[p] == usize::MAX {
                dist[p] = dist[s] + 1;
                q.push_back(p);
            }
        }
    }
    let quit_targets: Vec<usize> = lts
        .transitions
        .iter()
        .filter(|t| is_quit(&t.label))
        .map(|t| t.to)
        .collect();
    let mut region = vec![false; n];
    let mut stack = quit_targets.clone();
    while let Some(s) = stack.pop() {
        if !std::mem::replace(&mut region[s], true) {
            stack.extend(succ[s].iter().map(|(_, t)| *t));
        }
    }
    // states that can still reach a quit or termination
    let mut exits = vec![false; n];
    let mut q: VecDeque<usize> = (0..n).filter(|&s| dist[s] == 0).collect();
    for t in &lts.transitions {
        if is_quit(&t.label) {
            q.push_back(t.from);
        }
    }
    for &s in &q {
        exits[s] = true;
    }
    while let Some(s) = q.pop_front() {
        for &p in &pred[s] {
            if !exits[p] {
                exits[p] = true;
                q.push_back(p);
            }
        }
    }
    let mut slow: Vec<usize> = quit_targets.iter().copied().filter(|&t| dist[t] > bound).collect();
    slow.sort();
    slow.dedup();
    ShutdownReport {
        bound,
        quit_transitions: quit_targets.len(),
        slow_quits: slow,
        trapped: (0..n).filter(|&s| region[s] && dist[s] == usize::MAX).collect(),
        deadlocks: (0..n)
            .filter(|&s| !region[s] && !terminal(s) && succ[s].is_empty())
            .collect(),
        unquittable: (0..n).filter(|&s| !exits[s]).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linker::flatten;

    #[test]
    fn library_has_the_nine_modules_in_order() {
        let names: Vec<String> = client_server_library().into_iter().map(|m| m.name.name).collect();
        assert_eq!(names, CLIENT_SERVER_MODULES);
    }

    #[test]
    fn manifest_lines_and_comments() {
        let m = parse_manifest("-- app\noperator : Operator\n\nprimitive: Primitive -- server\n", "m").unwrap();
        assert_eq!(m, vec![ComponentDecl::new("operator", "Operator"), ComponentDecl::new("primitive", "Primitive")]);
        assert!(matches!(parse_manifest("operator Operator", "m"), Err(CsError::Manifest { line: 1, .. })));
    }

    fn spec(src: &str) -> FlatSpec {
        let mods = with_library(parse_spec(src).unwrap()).unwrap();
        flatten(&mods, "M").unwrap()
    }

    const SRC: &str = "process module M begin imports ClientPrimitives, ServerPrimitives \
         functions a, b : ID  x : SERVICE  r : RESULT \
         atoms go processes P, Q, N D : ID \
         definitions P = c-snd-call(a, x) . c-rec-return(r) . Q \
         Q = s-rec-call(x) . s-snd-return(r) N = go \
         D(d) = c-snd-call(d, x) end M";

    #[test]
    fn roles_follow_called_processes() {
        let s = spec(SRC);
        let r = detect_roles(&s, "P").unwrap();
        assert_eq!(r.client_of.iter().map(|n| n.to_string()).collect::<Vec<_>>(), ["a"]);
        assert!(r.is_server);
        assert!(detect_roles(&s, "N").unwrap().is_empty());
        assert!(matches!(detect_roles(&s, "D"), Err(CsError::DynamicServer { .. })));
    }

    #[test]
    fn quit_report_on_synthetic_systems() {
        let q = ActionLabel::act("quit", vec![]);
        let a = ActionLabel::act("a", vec![]);
        let sh = ActionLabel::act("shutdown", vec![]);
        let mut ok = Lts::synthetic(3, 0, &[(0, a.clone(), 0), (0, q.clone(), 1), (1, sh.clone(), 2)]);
        ok.terminating.insert(2);
        let r = quit_shutdown_closure(&ok, 2);
        assert!(r.clean(), "{r:?}");
        let stuck = Lts::synthetic(2, 0, &[(0, a, 0), (0, q, 1)]);
        let r = quit_shutdown_closure(&stuck, 2);
        assert_eq!(r.trapped, vec![1]);
        let none = Lts::synthetic(1, 0, &[]);
        assert_eq!(quit_shutdown_closure(&none, 2).quit_transitions, 0);
    }
}
