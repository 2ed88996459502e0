mod common;

use std::sync::Arc;

use proptest::prelude::*;
use psfcs::bisim::{check, minimize, replay, Kind};
use psfcs::semantics::{build_lts, entry, BuildOptions, Lts};
use psfcs::terms::{
    match_action, normalize_binding, unify, AtomPattern, Binding, Proc, ProcExpr, Term,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{naive_rooted, naive_strong, naive_weak, random_lts, split_state};

fn term(depth: u32) -> BoxedStrategy<Term> {
    let leaf = prop_oneof![
        Just(Term::constant("a", "D")),
        Just(Term::constant("b", "D")),
        prop::sample::select(vec!["x", "y", "z"]).prop_map(|v| Term::var(v, "D")),
    ];
    leaf.prop_recursive(depth, 16, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|t| Term::app("f", "D", vec![t])),
            (inner.clone(), inner).prop_map(|(l, r)| Term::app("g", "D", vec![l, r])),
        ]
    })
    .boxed()
}

fn ground(depth: u32) -> BoxedStrategy<Term> {
    term(depth).prop_filter("ground", |t| t.is_ground()).boxed()
}

fn grounding() -> impl Strategy<Value = Binding> {
    (ground(2), ground(2), ground(2)).prop_map(|(x, y, z)| {
        [("x", x), ("y", y), ("z", z)]
            .into_iter()
            .map(|(v, t)| (psfcs::terms::name(v), t))
            .collect()
    })
}

fn process(depth: u32) -> BoxedStrategy<Proc> {
    let leaf = prop_oneof![
        4 => prop::sample::select(vec!["a", "b", "c"]).prop_map(|a| ProcExpr::atom(a, vec![])),
        1 => Just(ProcExpr::delta()),
        1 => Just(ProcExpr::skip()),
    ];
    leaf.prop_recursive(depth, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| ProcExpr::alt(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| ProcExpr::seq(l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| ProcExpr::par(l, r)),
            (inner.clone(), inner).prop_map(|(l, r)| ProcExpr::star(l, r)),
        ]
    })
    .boxed()
}

fn spec_of(defs: &[(&str, &Proc)]) -> Arc<psfcs::FlatSpec> {
    let names: Vec<&str> = defs.iter().map(|(n, _)| *n).collect();
    let mut text = format!(
        "process module M\nbegin\nexports\nbegin\n  atoms a, b, c\n  processes {}\nend\ndefinitions\n",
        names.join(", ")
    );
    for (n, p) in defs {
        text.push_str(&format!("  {n} = {p}\n"));
    }
    text.push_str("end M\n");
    let mods = psfcs::cslib::load_sources(&[("m.psf".into(), text.clone())]).unwrap_or_else(|e| panic!("{e}\n{text}"));
    Arc::new(psfcs::linker::flatten_many(&mods, &["M"]).unwrap_or_else(|e| panic!("{e}\n{text}")))
}

fn lts(spec: &psfcs::FlatSpec, p: &str) -> Lts {
    let init = entry(spec, p, vec![]).unwrap();
    let l = build_lts(spec, &init, &BuildOptions { max_states: 20_000 }).unwrap();
    assert!(!l.truncated);
    l
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn grounding_substitution_is_idempotent(t in term(3), g in grounding()) {
        let once = t.apply(&g);
        prop_assert!(once.is_ground());
        prop_assert_eq!(once.apply(&g), once.clone());
        prop_assert_eq!(t.substitute(&g).unwrap(), once);
    }

    #[test]
    fn unifiers_unify(s in term(3), t in term(3)) {
        let mut b = Binding::new();
        if unify(&s, &t, &mut b) {
            let b = normalize_binding(&b);
            prop_assert_eq!(s.apply(&b), t.apply(&b));
        }
    }

    #[test]
    fn instances_unify_with_their_pattern(t in term(3), g in grounding()) {
        let inst = t.apply(&g);
        let mut b = Binding::new();
        prop_assert!(unify(&t, &inst, &mut b));
        prop_assert_eq!(t.apply(&normalize_binding(&b)), inst);
    }

    #[test]
    fn matching_recovers_an_instance(args in prop::collection::vec(term(2), 0..3), g in grounding()) {
        let pattern = AtomPattern::new("p", args);
        let label = pattern.apply(&g).to_label();
        let qs: Vec<_> = ["x", "y", "z"].iter().map(|v| (psfcs::terms::name(v), psfcs::terms::name("D"))).collect();
        let b = match_action(&pattern, &qs, &label).expect("instance matches");
        prop_assert_eq!(pattern.apply(&b).to_label(), label);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_processes_parse_back(p in process(3)) {
        let spec = spec_of(&[("P", &p)]);
        let body = &spec.defs.get("P").unwrap().body;
        prop_assert_eq!(body.canonical(), p.canonical());
    }

    #[test]
    fn canonical_form_is_stable(p in process(4)) {
        let c = p.canonical();
        prop_assert_eq!(c.canonical(), c);
    }

    #[test]
    fn choice_and_merge_commute(p in process(2), q in process(2)) {
        let spec = spec_of(&[
            ("A", &ProcExpr::alt(p.clone(), q.clone())),
            ("B", &ProcExpr::alt(q.clone(), p.clone())),
            ("C", &ProcExpr::par(p.clone(), q.clone())),
            ("D", &ProcExpr::par(q, p)),
        ]);
        prop_assert!(check(Kind::Strong, &lts(&spec, "A"), &lts(&spec, "B")).unwrap().equivalent);
        prop_assert!(check(Kind::Strong, &lts(&spec, "C"), &lts(&spec, "D")).unwrap().equivalent);
    }

    #[test]
    fn checker_agrees_with_the_fixpoint_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_lts(&mut rng, 6);
        let b = if seed % 2 == 0 { split_state(&mut rng, &a) } else { random_lts(&mut rng, 6) };
        for (kind, oracle) in [
            (Kind::Strong, naive_strong(&a, &b)),
            (Kind::Weak, naive_weak(&a, &b)),
            (Kind::RootedWeak, naive_rooted(&a, &b)),
        ] {
            let r = check(kind, &a, &b).unwrap();
            prop_assert_eq!(r.equivalent, oracle, "{:?}", kind);
            if let Some(w) = &r.witness {
                prop_assert!(replay(w, &a, &b, kind), "{:?} witness {}", kind, w.formula);
            }
        }
    }

    #[test]
    fn minimization_preserves_behaviour(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_lts(&mut rng, 8);
        for kind in [Kind::Strong, Kind::Weak] {
            let m = minimize(&a, kind);
            prop_assert!(m.states.len() <= a.states.len());
            prop_assert!(check(kind, &a, &m).unwrap().equivalent);
            prop_assert_eq!(minimize(&m, kind).states.len(), m.states.len());
        }
    }

    #[test]
    fn state_splitting_preserves_strong_bisimilarity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_lts(&mut rng, 8);
        let b = split_state(&mut rng, &a);
        prop_assert!(naive_strong(&a, &b));
        prop_assert!(check(Kind::Strong, &a, &b).unwrap().equivalent);
    }
}
