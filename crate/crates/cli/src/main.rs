//! `psfcs`: command-line front end of the workbench.
//!
//! Exit codes: 0 success, 1 verification failure (not equivalent, not
//! refining), 2 usage errors and diagnostics.

use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use psfcs::bisim::{check as bisim_check, minimize, replay, BisimResult, Kind, Side};
use psfcs::cslib::{generate_interfaces, load_sources, parse_manifest};
use psfcs::linker::flatten_many;
use psfcs::refine::{apply_mapping, parse_mapping_file, verify_refinement};
use psfcs::runtime::{calculator_demo, parse_script, Handlers, Policy, Session};
use psfcs::semantics::{build_lts, entry, BuildOptions, Lts};
use psfcs::service::{serve, Catalog, Service};
use psfcs::syntax::{parse_spec_file, pretty_print_all};
use psfcs::{FlatSpec, ModuleDef};

/// Writes to stdout and exits quietly once the reader has gone away.
fn out(s: &str) {
    if let Err(e) = io::stdout().write_all(s.as_bytes()) {
        if e.kind() == io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("failed printing to stdout: {e}");
    }
}

macro_rules! println {
    () => { out("\n") };
    ($($t:tt)*) => { out(&format!("{}\n", format_args!($($t)*))) };
}

macro_rules! print {
    ($($t:tt)*) => { out(&format!($($t)*)) };
}

#[derive(Parser)]
#[command(name = "psfcs", version, about = "Process-algebra workbench for client/server architectures")]
struct Cli {
    /// State bound for transition system construction.
    #[arg(long, global = true, default_value_t = 100_000)]
    max_states: usize,
    /// Constructor nesting bound when enumerating values of infinite sorts.
    #[arg(long, global = true, default_value_t = 6)]
    depth_bound: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and link specification files.
    Check(Sources),
    /// Print the transition system of a process in Aldebaran format.
    Lts {
        #[command(flatten)]
        src: Sources,
        /// Process to explore.
        #[arg(long)]
        entry: String,
        /// Minimize before printing.
        #[arg(long)]
        minimize: Option<KindArg>,
    },
    /// Compare two processes.
    Bisim {
        #[command(flatten)]
        src: Sources,
        #[arg(long)]
        left: String,
        /// Defaults to the left entry.
        #[arg(long)]
        right: Option<String>,
        /// Files for the right-hand process (default: the same files).
        #[arg(long, num_args = 1..)]
        against: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = KindArg::Strong)]
        kind: KindArg,
    },
    /// Apply a refinement mapping and print the rewritten definitions.
    Refine(RefineArgs),
    /// Check that a refinement mapping is correct up to rooted weak bisimulation.
    Verify {
        #[command(flatten)]
        refine: RefineArgs,
        /// Process of the source specification.
        #[arg(long)]
        entry: String,
        /// Process of the target specification.
        #[arg(long)]
        target_entry: String,
    },
    /// Generate client/server interfaces for the components of a manifest.
    Csgen {
        files: Vec<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Simulate a process.
    Sim {
        #[command(flatten)]
        src: Sources,
        /// Process to simulate (default: the manifest root).
        #[arg(long)]
        root: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Simulate the handler-backed calculator.
    Demo(RunArgs),
    /// Serve sessions over line-delimited JSON.
    Serve {
        #[arg(long, default_value_t = 7357)]
        port: u16,
        /// Directory with one subdirectory of .psf files per specification.
        #[arg(long)]
        specs: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Sources {
    /// Specification files (the client/server and architecture libraries are always available).
    files: Vec<PathBuf>,
    /// Component manifest; adds the generated interface modules.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct RefineArgs {
    /// Source specification files.
    files: Vec<PathBuf>,
    #[arg(long)]
    map: PathBuf,
    /// Target specification files.
    #[arg(long, num_args = 1.., required = true)]
    target: Vec<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value_t = PolicyArg::Interactive)]
    policy: PolicyArg,
    /// Scenario script; implies `--policy script`.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Seed for random choices of steps and values.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step limit for random runs.
    #[arg(long, default_value_t = 1000)]
    steps: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Strong,
    Weak,
    Rweak,
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Kind {
        match k {
            KindArg::Strong => Kind::Strong,
            KindArg::Weak => Kind::Weak,
            KindArg::Rweak => Kind::RootedWeak,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Interactive,
    Random,
    Script,
}

/// Failure carrying its exit code.
struct Fail(u8, String);

type Res<T> = Result<T, Fail>;

fn diag(e: impl std::fmt::Display) -> Fail {
    Fail(2, e.to_string())
}

fn read(p: &Path) -> Res<String> {
    std::fs::read_to_string(p).map_err(|e| Fail(2, format!("{}: {e}", p.display())))
}

struct Loaded {
    mods: Vec<ModuleDef>,
    spec: FlatSpec,
    /// Interface modules and root generated from a manifest.
    generated: Vec<ModuleDef>,
    root: Option<String>,
}

/// Parses `files` with the libraries, adds generated interfaces when a
/// manifest is given, and links every user module.
fn load(files: &[PathBuf], manifest: Option<&Path>) -> Res<Loaded> {
    let mut sources = Vec::new();
    for f in files {
        sources.push((f.display().to_string(), read(f)?));
    }
    let mut mods = load_sources(&sources).map_err(diag)?;
    let mut user = Vec::new();
    for (p, t) in &sources {
        user.extend(parse_spec_file(t, Some(p)).map_err(diag)?.into_iter().map(|m| m.name.name));
    }
    let mut root = None;
    let mut generated = Vec::new();
    if let Some(m) = manifest {
        let roots: Vec<&str> = user.iter().map(String::as_str).collect();
        let comps_spec = flatten_many(&mods, &roots).map_err(diag)?;
        let comps = parse_manifest(&read(m)?, &m.display().to_string()).map_err(diag)?;
        let g = generate_interfaces(&mods, &comps_spec, &comps).map_err(diag)?;
        for w in &g.warnings {
            eprintln!("warning: {w}");
        }
        user.extend(g.modules.iter().map(|m| m.name.name.clone()));
        mods.extend(g.modules.iter().cloned());
        generated = g.modules;
        root = Some(g.root);
    }
    let roots: Vec<&str> = user.iter().map(String::as_str).collect();
    if roots.is_empty() {
        return Err(Fail(2, "no specification modules given".into()));
    }
    let spec = flatten_many(&mods, &roots).map_err(diag)?;
    Ok(Loaded {
        mods,
        spec,
        generated,
        root,
    })
}

fn lts_of(spec: &FlatSpec, process: &str, max_states: usize) -> Res<Lts> {
    let init = entry(spec, process, vec![]).map_err(diag)?;
    let l = build_lts(spec, &init, &BuildOptions { max_states }).map_err(diag)?;
    if l.truncated {
        return Err(Fail(
            2,
            format!("{process}: transition system truncated at {max_states} states; raise --max-states"),
        ));
    }
    Ok(l)
}

fn print_verdict(r: &BisimResult, a: &Lts, b: &Lts, kind: Kind) -> u8 {
    if r.equivalent {
        println!("equivalent");
        return 0;
    }
    println!("NOT equivalent");
    if let Some(w) = &r.witness {
        let side = match w.holds_in {
            Side::Left => "left",
            Side::Right => "right",
        };
        println!("witness (holds in the {side} system only): {}", w.formula);
        for (i, o) in w.formula.spine().iter().enumerate() {
            println!("{}\t{o}", i + 1);
        }
        if !replay(w, a, b, kind) {
            eprintln!("warning: witness did not replay");
        }
    }
    1
}

fn run(cli: Cli) -> Res<u8> {
    let max = cli.max_states;
    match cli.command {
        Command::Check(src) => {
            let l = load(&src.files, src.manifest.as_deref())?;
            println!(
                "ok: {} modules, {} processes, {} atoms",
                l.mods.len(),
                l.spec.defs.len(),
                l.spec.atoms.len()
            );
            Ok(0)
        }
        Command::Lts { src, entry, minimize: m } => {
            let l = load(&src.files, src.manifest.as_deref())?;
            let mut lts = lts_of(&l.spec, &entry, max)?;
            if let Some(k) = m {
                lts = minimize(&lts, k.into());
            }
            print!("{}", lts.to_aut());
            Ok(0)
        }
        Command::Bisim {
            src,
            left,
            right,
            against,
            kind,
        } => {
            let l = load(&src.files, src.manifest.as_deref())?;
            let a = lts_of(&l.spec, &left, max)?;
            let right = right.unwrap_or(left);
            let b = if against.is_empty() {
                lts_of(&l.spec, &right, max)?
            } else {
                lts_of(&load(&against, None)?.spec, &right, max)?
            };
            let r = bisim_check(kind.into(), &a, &b).map_err(diag)?;
            Ok(print_verdict(&r, &a, &b, kind.into()))
        }
        Command::Refine(args) => {
            let (src, _, m) = mapping(&args)?;
            let defs = apply_mapping(&src.spec.defs, &m).map_err(diag)?;
            for d in defs.values() {
                let formals: Vec<String> = d.formals.iter().map(|(v, _)| v.to_string()).collect();
                if formals.is_empty() {
                    println!("{} = {}", d.name, d.body);
                } else {
                    println!("{}({}) = {}", d.name, formals.join(", "), d.body);
                }
            }
            Ok(0)
        }
        Command::Verify {
            refine,
            entry,
            target_entry,
        } => {
            let (src, tgt, m) = mapping(&refine)?;
            let v = verify_refinement(
                &src.spec,
                &m,
                &tgt.spec,
                &entry,
                &target_entry,
                &BuildOptions { max_states: max },
            )
            .map_err(diag)?;
            if v.source.truncated || v.target.truncated {
                return Err(Fail(2, format!("transition system truncated at {max} states; raise --max-states")));
            }
            Ok(print_verdict(&v.result, &v.source, &v.target, Kind::RootedWeak))
        }
        Command::Csgen { files, manifest } => {
            let l = load(&files, Some(&manifest))?;
            print!("{}", pretty_print_all(&l.generated));
            Ok(0)
        }
        Command::Sim { src, root, run } => {
            let l = load(&src.files, src.manifest.as_deref())?;
            let root = root
                .or(l.root)
                .ok_or_else(|| Fail(2, "--root is required without --manifest".into()))?;
            let s = Session::new(Arc::new(l.spec), &root, Handlers::default(), run.seed, cli.depth_bound)
                .map_err(diag)?;
            simulate(s, &run)
        }
        Command::Demo(run) => {
            let d = calculator_demo().map_err(diag)?;
            let s = Session::new(d.spec, &d.root, d.handlers, run.seed, cli.depth_bound).map_err(diag)?;
            simulate(s, &run)
        }
        Command::Serve { port, specs } => {
            let mut catalog = Catalog::builtin();
            if let Some(dir) = specs {
                catalog.load_dir(&dir).map_err(diag)?;
            }
            let ids: Vec<String> = catalog.entries().map(|e| e.id.clone()).collect();
            let service = Arc::new(Service::new(catalog, 0, cli.depth_bound));
            let listener = std::net::TcpListener::bind(("127.0.0.1", port)).map_err(diag)?;
            eprintln!(
                "listening on {} (specifications: {})",
                listener.local_addr().map_err(diag)?,
                ids.join(", ")
            );
            serve(service, listener).map_err(diag)?;
            Ok(0)
        }
    }
}

fn mapping(args: &RefineArgs) -> Res<(Loaded, Loaded, psfcs::refine::ResolvedMap)> {
    let src = load(&args.files, None)?;
    let tgt = load(&args.target, None)?;
    let text = read(&args.map)?;
    let m = parse_mapping_file(&text, Some(&args.map.display().to_string()))
        .map_err(diag)?
        .resolve(&src.spec, &tgt.spec)
        .map_err(diag)?;
    Ok((src, tgt, m))
}

fn simulate(mut s: Session, run: &RunArgs) -> Res<u8> {
    let policy = if run.script.is_some() { PolicyArg::Script } else { run.policy };
    match policy {
        PolicyArg::Script => {
            let path = run
                .script
                .as_ref()
                .ok_or_else(|| Fail(2, "--policy script needs --script FILE".into()))?;
            let lines = parse_script(&read(path)?);
            let r = s.run_auto(&Policy::Script(lines), usize::MAX);
            print!("{}", s.export_trace());
            let out = r.map_err(diag)?;
            report(&s, out.error.as_deref())
        }
        PolicyArg::Random => {
            let out = s.run_auto(&Policy::Random, run.steps).map_err(diag)?;
            print!("{}", s.export_trace());
            report(&s, out.error.as_deref())
        }
        PolicyArg::Interactive => interactive(s),
    }
}

fn report(s: &Session, error: Option<&str>) -> Res<u8> {
    if let Some(e) = error {
        return Err(Fail(2, e.to_string()));
    }
    if s.terminated() {
        eprintln!("terminated after {} steps", s.trace().len());
    } else if s.enabled().is_empty() {
        eprintln!("deadlock after {} steps", s.trace().len());
    } else {
        eprintln!("stopped after {} steps", s.trace().len());
    }
    Ok(0)
}

const HELP: &str = "commands: <index> [value ...] | <index> ?k=value | <label> | u(ndo) | r(eset) | t(race) | q(uit)";

fn interactive(mut s: Session) -> Res<u8> {
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    eprintln!("{HELP}");
    loop {
        if let Some(e) = s.error() {
            println!("error: {e} (undo to continue)");
        } else if s.terminated() {
            println!("terminated");
        } else if s.enabled().is_empty() {
            println!("deadlock");
        }
        for d in s.enabled() {
            let open: Vec<String> = d.open.iter().map(|(v, sort)| format!("{v} : {sort}")).collect();
            if open.is_empty() {
                println!("  [{}] {}", d.index, d.label);
            } else {
                println!("  [{}] {}   needs {}", d.index, d.label, open.join(", "));
            }
        }
        print!("> ");
        io::stdout().flush().map_err(diag)?;
        let Some(line) = lines.next() else {
            return Ok(0);
        };
        let line = line.map_err(diag)?;
        let line = line.trim();
        let r = match line {
            "" => continue,
            "q" | "quit" => return Ok(0),
            "u" | "undo" => s.undo().map_err(|e| e.to_string()),
            "r" | "reset" => s.reset().map_err(|e| e.to_string()),
            "t" | "trace" => {
                print!("{}", s.export_trace());
                continue;
            }
            "h" | "help" | "?" => {
                println!("{HELP}");
                continue;
            }
            _ => fire_command(&mut s, line).map(|()| {
                if let Some(e) = s.trace().last() {
                    println!("fired {}", e.label);
                }
            }),
        };
        if let Err(e) = r {
            println!("error: {e}");
        }
    }
}

fn fire_command(s: &mut Session, line: &str) -> Result<(), String> {
    let mut words = line.split_whitespace();
    let first = words.next().unwrap_or_default();
    let Ok(i) = first.parse::<usize>() else {
        return s.fire_label(line).map_err(|e| e.to_string());
    };
    let Some(d) = s.enabled().get(i).cloned() else {
        return Err(format!("no enabled transition with index {i}"));
    };
    // positional values fill the open variables in order; `?k=v` names one
    let mut values = psfcs::terms::Binding::new();
    let mut next = d.open.iter();
    for w in words {
        let (slot, text) = match w.split_once('=') {
            Some((v, text)) => (d.open.iter().find(|(x, _)| &**x == v), text),
            None => (next.next(), w),
        };
        let Some((var, sort)) = slot else {
            return Err(format!("no open variable for `{w}`"));
        };
        let t = psfcs::resolve::parse_value(s.spec(), text, sort).map_err(|e| e.to_string())?;
        values.insert(var.clone(), t);
    }
    s.fire_with(i, &values).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
