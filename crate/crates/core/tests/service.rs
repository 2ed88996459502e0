use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::sync::Arc;

use proptest::prelude::*;
use psfcs::service::{spawn, Catalog, Request, Service};
use serde_json::{json, Value};

fn service() -> Service {
    let mut c = Catalog::builtin();
    c.load_dir(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs")).unwrap();
    Service::new(c, 0, 6)
}

fn call(s: &Service, req: Value) -> Value {
    serde_json::from_str(&s.handle_line(&req.to_string())).unwrap()
}

fn ok(s: &Service, req: Value) -> Value {
    let r = call(s, req);
    assert_eq!(r["ok"], true, "{r}");
    r["result"].clone()
}

fn err(s: &Service, req: Value) -> String {
    let r = call(s, req);
    assert_eq!(r["ok"], false, "{r}");
    r["error"].as_str().unwrap().to_string()
}

fn node_labels(b: &Value, out: &mut Vec<String>) {
    for n in b["nodes"].as_array().unwrap() {
        out.push(n["label"].as_str().unwrap().to_string());
    }
    for c in b["boxes"].as_array().unwrap() {
        node_labels(c, out);
    }
}

fn enabled_nodes(b: &Value, out: &mut Vec<String>) {
    for n in b["nodes"].as_array().unwrap() {
        if n["enabled"] == true {
            out.push(n["label"].as_str().unwrap().to_string());
        }
    }
    for c in b["boxes"].as_array().unwrap() {
        enabled_nodes(c, out);
    }
}

#[test]
fn hello_lists_the_catalog() {
    let s = service();
    let r = call(&s, json!({"op": "hello", "id": 42}));
    assert_eq!(r["id"], 42);
    assert_eq!(r["result"]["version"], 1);
    let specs: Vec<&str> = r["result"]["specs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(specs, ["calculator", "clientserver", "messaging", "operator"]);
}

#[test]
fn calculator_view_has_the_component_boxes() {
    let s = service();
    let v = ok(&s, json!({"op": "create", "spec": "calculator"}));
    assert_eq!(v["layout"]["label"], "Application");
    assert_eq!(v["layout"]["set"], "ClientServerH");
    let mut labels = Vec::new();
    node_labels(&v["layout"], &mut labels);
    for l in ["Calculator", "S-I(primitive)", "C-I(operator, complex)", "Primitive", "Basic", "Complex"] {
        assert!(labels.iter().any(|x| x == l), "{l} missing from {labels:?}");
    }
    let mut on = Vec::new();
    enabled_nodes(&v["layout"], &mut on);
    assert_eq!(on, ["Calculator"]);
}

#[test]
fn firing_with_values_and_undo() {
    let s = service();
    let v = ok(&s, json!({"op": "create", "spec": "calculator"}));
    let id = v["session"].as_str().unwrap();
    let enter = v["enabled"]
        .as_array()
        .unwrap()
        .iter()
        .find(|d| d["label"].as_str().unwrap().starts_with("enter"))
        .unwrap()
        .clone();
    let var = enter["open"][0]["var"].as_str().unwrap();
    let e = err(&s, json!({"op": "fire", "session": id, "index": enter["index"]}));
    assert!(e.contains("needs a value"), "{e}");
    let v = ok(
        &s,
        json!({"op": "fire", "session": id, "index": enter["index"], "revision": v["revision"], "values": {var: "5"}}),
    );
    assert_eq!(v["last"]["label"], "enter(5)");
    assert_eq!(v["trace_len"], 1);
    let stale = err(&s, json!({"op": "fire", "session": id, "index": 0, "revision": 0}));
    assert!(stale.contains("index out of date"), "{stale}");
    let v = ok(&s, json!({"op": "fire_label", "session": id, "label": "mul-op(2)"}));
    assert_eq!(v["trace_len"], 2);
    ok(&s, json!({"op": "undo", "session": id}));
    let v = ok(&s, json!({"op": "undo", "session": id}));
    assert_eq!(v["trace_len"], 0);
    assert_eq!(v["can_undo"], false);
    assert!(err(&s, json!({"op": "undo", "session": id})).contains("nothing to undo"));
}

#[test]
fn messaging_comm_enables_the_receiver() {
    let s = service();
    let v = ok(&s, json!({"op": "create", "spec": "messaging"}));
    let id = v["session"].as_str().unwrap();
    let mut on = Vec::new();
    enabled_nodes(&v["layout"], &mut on);
    assert_eq!(on, ["Component1"]);
    let v = ok(&s, json!({"op": "fire_label", "session": id, "label": "send-message"}));
    let mut on = Vec::new();
    enabled_nodes(&v["layout"], &mut on);
    assert_eq!(on, ["Component1", "Component2"]);
    let comm = &v["enabled"][0];
    assert_eq!(comm["comm"], true);
    assert_eq!(comm["nodes"], json!([0, 1]));
}

#[test]
fn trace_reset_and_errors() {
    let s = service();
    let v = ok(&s, json!({"op": "create", "spec": "calculator", "seed": 3, "depth_bound": 3}));
    let id = v["session"].as_str().unwrap();
    let r = ok(&s, json!({"op": "run", "session": id, "steps": 40}));
    let n = r["view"]["trace_len"].as_u64().unwrap();
    assert!(n >= 40, "{n}");
    let t = ok(&s, json!({"op": "trace", "session": id}));
    assert_eq!(t["events"].as_array().unwrap().len() as u64, n);
    let v = ok(&s, json!({"op": "reset", "session": id}));
    assert_eq!(v["trace_len"], 0);
    assert!(err(&s, json!({"op": "view", "session": "nope"})).contains("unknown session"));
    assert!(err(&s, json!({"op": "create", "spec": "nope"})).contains("unknown specification"));
    assert!(err(&s, json!({"op": "launch"})).contains("malformed request"));
    let bad: Value = serde_json::from_str(&s.handle_line("{not json")).unwrap();
    assert_eq!(bad["ok"], false);
    ok(&s, json!({"op": "close", "session": id}));
    assert!(err(&s, json!({"op": "view", "session": id})).contains("unknown session"));
}

#[test]
fn tcp_clients_run_independent_sessions() {
    let svc = Arc::new(service());
    let (addr, _h) = spawn(svc, "127.0.0.1:0").unwrap();
    let client = |label: &'static str| {
        std::thread::spawn(move || {
            let stream = TcpStream::connect(addr).unwrap();
            let mut w = stream.try_clone().unwrap();
            let mut r = BufReader::new(stream);
            let mut ask = |v: Value| {
                writeln!(w, "{v}").unwrap();
                let mut line = String::new();
                r.read_line(&mut line).unwrap();
                serde_json::from_str::<Value>(&line).unwrap()
            };
            let v = ask(json!({"op": "create", "spec": "calculator"}));
            let id = v["result"]["session"].as_str().unwrap().to_string();
            let v = ask(json!({"op": "fire_label", "session": id, "label": label}));
            assert_eq!(v["result"]["last"]["label"], label);
            assert_eq!(v["result"]["trace_len"], 1);
            id
        })
    };
    let a = client("inc").join().unwrap();
    let b = client("dec").join().unwrap();
    assert_ne!(a, b);
}

fn session_name() -> impl Strategy<Value = String> {
    "[a-z0-9-]{1,8}"
}

fn request() -> impl Strategy<Value = Request> {
    prop_oneof![
        Just(Request::Hello),
        Just(Request::Specs),
        (
            "[a-z]{1,8}",
            proptest::option::of("[A-Z][a-z]{0,6}"),
            proptest::option::of(any::<u64>()),
            proptest::option::of(0usize..10)
        )
            .prop_map(|(spec, root, seed, depth_bound)| Request::Create {
                spec,
                root,
                seed,
                depth_bound
            }),
        session_name().prop_map(|session| Request::View { session }),
        session_name().prop_map(|session| Request::Enabled { session }),
        (
            session_name(),
            0usize..100,
            proptest::option::of(0u64..1000),
            proptest::collection::btree_map("\\?[0-9]{1,3}", "[0-9]{1,3}", 0..3)
        )
            .prop_map(|(session, index, revision, values)| Request::Fire {
                session,
                index,
                revision,
                values
            }),
        (session_name(), "[a-z-]{1,6}\\([0-9_]\\)", proptest::option::of(0u64..1000))
            .prop_map(|(session, label, revision)| Request::FireLabel { session, label, revision }),
        (session_name(), 0usize..100).prop_map(|(session, steps)| Request::Run { session, steps }),
        session_name().prop_map(|session| Request::Undo { session }),
        session_name().prop_map(|session| Request::Reset { session }),
        session_name().prop_map(|session| Request::Trace { session }),
        session_name().prop_map(|session| Request::Close { session }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn requests_round_trip(req in request()) {
        let text = serde_json::to_string(&req).unwrap();
        prop_assert!(!text.contains('\n'));
        let back: Request = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, req);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn undo_restores_the_view(picks in proptest::collection::vec(0usize..16, 0..12), last in 0usize..16) {
        let s = service();
        let v = ok(&s, json!({"op": "create", "spec": "messaging"}));
        let id = v["session"].as_str().unwrap().to_string();
        for p in picks {
            let v = ok(&s, json!({"op": "view", "session": id}));
            let n = v["enabled"].as_array().unwrap().len();
            if n == 0 {
                break;
            }
            ok(&s, json!({"op": "fire", "session": id, "index": p % n}));
        }
        let before = ok(&s, json!({"op": "view", "session": id}));
        let n = before["enabled"].as_array().unwrap().len();
        prop_assume!(n > 0);
        ok(&s, json!({"op": "fire", "session": id, "index": last % n}));
        let after = ok(&s, json!({"op": "undo", "session": id}));
        let strip = |mut v: Value| {
            v.as_object_mut().unwrap().remove("revision");
            v
        };
        prop_assert_eq!(strip(after), strip(before));
    }
}
