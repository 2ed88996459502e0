use std::path::PathBuf;
use std::time::Instant;

use psfcs::bisim::{strong_bisim, minimize, Kind};
use psfcs::cslib::{
    generate_interfaces, load_sources, parse_manifest, quit_shutdown_closure, CsError,
};
use psfcs::flat::FlatSpec;
use psfcs::linker::{flatten, flatten_many};
use psfcs::semantics::{build_lts, entry, BuildOptions, Lts};
use psfcs::syntax::ModuleDef;

fn specs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn read(f: &str) -> String {
    std::fs::read_to_string(specs_dir().join(f)).unwrap()
}

fn modules(files: &[&str]) -> Vec<ModuleDef> {
    let sources: Vec<(String, String)> = files.iter().map(|f| (f.to_string(), read(f))).collect();
    load_sources(&sources).unwrap()
}

fn lts(spec: &FlatSpec, root: &str) -> Lts {
    build_lts(spec, &entry(spec, root, vec![]).unwrap(), &BuildOptions::default()).unwrap()
}

const COMPONENTS: &[&str] = &["clientserver/data.psf", "clientserver/components.psf"];

fn generated(manifest: &str) -> (Vec<ModuleDef>, String) {
    let mods = modules(COMPONENTS);
    let comps = parse_manifest(&read(manifest), manifest).unwrap();
    let roots: Vec<&str> = comps.iter().map(|c| c.process.as_str()).collect();
    let spec = flatten_many(&mods, &roots).unwrap();
    let g = generate_interfaces(&mods, &spec, &comps).unwrap();
    assert!(g.warnings.is_empty(), "{:?}", g.warnings);
    let mut all = mods;
    all.extend(g.modules);
    (all, g.root)
}

#[test]
fn hand_written_application_links_and_runs() {
    let mut files = COMPONENTS.to_vec();
    files.push("clientserver/application.psf");
    let spec = flatten(&modules(&files), "Application").unwrap();
    let l = lts(&spec, "Application");
    eprintln!("hand-written: {} states, {} transitions", l.num_states(), l.transitions.len());
    assert!(!l.truncated);
}

#[test]
fn generated_two_component_system_matches_hand_written() {
    let mut files = COMPONENTS.to_vec();
    files.push("clientserver/application.psf");
    let hand = flatten(&modules(&files), "Application").unwrap();
    let (mods, root) = generated("clientserver/two.manifest");
    let gen = flatten(&mods, &root).unwrap();
    let (a, b) = (lts(&hand, "Application"), lts(&gen, "Application"));
    assert!(strong_bisim(&a, &b).unwrap().equivalent);
    let sa = (lts(&hand, "ApplicationSystem"), lts(&gen, "ApplicationSystem"));
    assert!(strong_bisim(&sa.0, &sa.1).unwrap().equivalent);
}

#[test]
fn full_application_is_finite_and_encapsulated() {
    let t = Instant::now();
    let (mods, root) = generated("clientserver/full.manifest");
    let spec = flatten(&mods, &root).unwrap();
    let l = lts(&spec, "Application");
    eprintln!(
        "full: {} states, {} transitions, minimized {} in {:?}",
        l.num_states(),
        l.transitions.len(),
        minimize(&l, Kind::Strong).num_states(),
        t.elapsed()
    );
    assert!(!l.truncated);
    for tr in &l.transitions {
        let s = tr.label.to_string();
        assert!(!s.starts_with("cs-snd-") && !s.starts_with("cs-rec-"), "{s}");
    }
    let r = quit_shutdown_closure(&l, 4 + 2);
    assert!(r.clean(), "{r:?}");
    assert!(r.quit_transitions > 0);
}

#[test]
fn rewrapping_is_rejected() {
    let (mods, _) = generated("clientserver/two.manifest");
    let spec = flatten_many(&mods, &["S-Primitive"]).unwrap();
    let comps = vec![psfcs::cslib::ComponentDecl::new("primitive", "S-Primitive")];
    let err = generate_interfaces(&mods, &spec, &comps).unwrap_err();
    assert!(matches!(err, CsError::AlreadyWrapped { .. }), "{err}");
}
