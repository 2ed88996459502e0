use std::collections::BTreeMap;
use std::path::PathBuf;

use psfcs::bisim::{replay, Kind, Obs};
use psfcs::cslib::load_sources;
use psfcs::flat::{FlatSpec, ProcessDef};
use psfcs::linker::{flatten, flatten_many};
use psfcs::refine::{
    abstract_source, abstract_target, apply_mapping, parse_mapping, verify_refinement, RefineError,
};
use psfcs::semantics::BuildOptions;
use psfcs::terms::{name, Name};

fn specs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn load(files: &[&str], root: &str) -> FlatSpec {
    load_many(files, &[root])
}

fn load_many(files: &[&str], roots: &[&str]) -> FlatSpec {
    let sources: Vec<(String, String)> = files
        .iter()
        .map(|f| {
            let p = specs_dir().join(f);
            (f.to_string(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    flatten_many(&load_sources(&sources).unwrap(), roots).unwrap()
}

fn read(f: &str) -> String {
    std::fs::read_to_string(specs_dir().join(f)).unwrap()
}

fn component1() -> FlatSpec {
    load(&["messaging/application.psf"], "ApplicationSystem")
}

fn pt1() -> FlatSpec {
    load(&["messaging/application.psf", "messaging/toolbus.psf"], "PT1")
}

#[test]
fn component1_maps_onto_pt1() {
    let (a, b) = (component1(), pt1());
    let m = parse_mapping(&read("messaging/component1.map")).unwrap().resolve(&a, &b).unwrap();
    let out = apply_mapping(&a.defs, &m).unwrap();
    assert_eq!(out["PT1"].body.canonical(), b.defs["PT1"].body.canonical());
}

#[test]
fn abstractions_have_the_expected_tau_counts() {
    let (a, b) = (component1(), pt1());
    let m = parse_mapping(&read("messaging/component1.map")).unwrap().resolve(&a, &b).unwrap();
    let src = abstract_source(&a.defs, &m).unwrap();
    let tgt = abstract_target(&b.defs, &m);
    let text = src["PT1"].body.canonical().to_string();
    assert_eq!(text.matches("skip").count(), 3, "{text}");
    let text = tgt["PT1"].body.canonical().to_string();
    assert_eq!(text.matches("skip").count(), 4, "{text}");
}

#[test]
fn refinement_verifies() {
    let (a, b) = (component1(), pt1());
    let m = parse_mapping(&read("messaging/component1.map")).unwrap().resolve(&a, &b).unwrap();
    let v = verify_refinement(&a, &m, &b, "Component1", "PT1", &BuildOptions::default()).unwrap();
    assert!(v.result.equivalent);
}

fn ack_deleted(b: &FlatSpec) -> FlatSpec {
    let mut m = b.clone();
    let src = read("messaging/toolbus.psf").replace(
        "tb-rec-msg(t2, t1, tbterm(ack)) .\n      tb-snd-ack-event(T1, tbterm(message)) .\n      PT1\n",
        "delta\n",
    );
    let sources = vec![
        ("application.psf".to_string(), read("messaging/application.psf")),
        ("toolbus.psf".to_string(), src),
    ];
    let mutant = flatten(&load_sources(&sources).unwrap(), "PT1").unwrap();
    m.defs = mutant.defs;
    m
}

#[test]
fn ack_deleted_mutant_is_caught_with_replayable_witness() {
    let (a, b) = (component1(), pt1());
    let mutant = ack_deleted(&b);
    assert_ne!(mutant.defs["PT1"], b.defs["PT1"]);
    let m = parse_mapping(&read("messaging/component1.map")).unwrap().resolve(&a, &b).unwrap();
    let v = verify_refinement(&a, &m, &mutant, "Component1", "PT1", &BuildOptions::default()).unwrap();
    assert!(!v.result.equivalent);
    let w = v.result.witness.as_ref().unwrap();
    assert!(replay(w, &v.source, &v.target, Kind::RootedWeak));
    let first = &w.formula.spine()[0];
    let msg = "tb-rec-event(T1, tbterm(message))";
    assert!(matches!(first, Obs::Act(l) if l.to_string() == msg), "{}", w.formula);
}

fn client_server_level() -> FlatSpec {
    load_many(
        &["clientserver/data.psf", "clientserver/components.psf"],
        &["Operator", "Primitive"],
    )
}

#[test]
fn operator_maps_onto_client_operator() {
    let a = load(&["operator/operator.psf"], "ApplicationSystem");
    let b = client_server_level();
    let m = parse_mapping(&read("operator/operator.map")).unwrap().resolve(&a, &b).unwrap();
    let out = apply_mapping(&a.defs, &m).unwrap();
    assert_eq!(out["Operator"].body.canonical(), b.defs["Operator"].body.canonical());
}

#[test]
fn primitive_maps_onto_server_up_to_rooted_weak_bisimulation() {
    let a = load(&["operator/operator.psf"], "ApplicationSystem");
    let b = client_server_level();
    let m = parse_mapping(&read("operator/operator.map")).unwrap().resolve(&a, &b).unwrap();
    let v = verify_refinement(&a, &m, &b, "Primitive", "Primitive", &BuildOptions::default()).unwrap();
    assert!(v.result.equivalent);
}

#[test]
fn call_graph_is_preserved_by_abstraction() {
    let (a, b) = (component1(), pt1());
    let m = parse_mapping(&read("messaging/component1.map")).unwrap().resolve(&a, &b).unwrap();
    let calls = |defs: &BTreeMap<Name, ProcessDef>| -> Vec<(Name, Vec<Name>)> {
        defs.values()
            .map(|d| {
                let mut c = Vec::new();
                d.body.called_processes(&mut c);
                (d.name.clone(), c)
            })
            .collect()
    };
    let rename = |n: &Name| if &**n == "Component1" { name("PT1") } else { n.clone() };
    let expected: Vec<(Name, Vec<Name>)> = {
        let mut v: Vec<_> = calls(&a.defs)
            .into_iter()
            .map(|(n, c)| (rename(&n), c.iter().map(rename).collect()))
            .collect();
        v.sort();
        v
    };
    assert_eq!(calls(&abstract_source(&a.defs, &m).unwrap()), expected);
    assert_eq!(calls(&apply_mapping(&a.defs, &m).unwrap()), expected);
}

#[test]
fn unknown_entry_is_reported() {
    let (a, b) = (component1(), pt1());
    let m = parse_mapping("").unwrap().resolve(&a, &b).unwrap();
    let err = verify_refinement(&a, &m, &b, "Nope", "PT1", &BuildOptions::default()).unwrap_err();
    assert!(matches!(err, RefineError::UnknownProcess(_)));
}
