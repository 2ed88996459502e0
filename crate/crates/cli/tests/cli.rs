use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn specs(rel: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "specs", rel].iter().collect();
    p.display().to_string()
}

fn psfcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psfcs"))
        .args(args)
        .output()
        .expect("run psfcs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(text: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".psf").tempfile().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

const LAWS: &str = "process module T
begin
exports
begin
  atoms a, b, c
  processes P, Q, R, U
end
definitions
  P = a + a
  Q = a
  R = a . (b + c)
  U = a . b + a . c
end T
";

#[test]
fn check_accepts_the_messaging_example() {
    let o = psfcs(&["check", &specs("messaging/application.psf"), &specs("messaging/toolbus.psf")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("ok:"));
}

#[test]
fn check_reports_diagnostics_with_exit_two() {
    let f = scratch("process module M\nbegin\nexports\nbegin\n  processes P\nend\ndefinitions\n  P = undefined-atom\nend M\n");
    let o = psfcs(&["check", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("undefined-atom"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(psfcs(&["bisim"]).status.code(), Some(2));
    assert_eq!(psfcs(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn verify_messaging_refinement() {
    let o = psfcs(&[
        "verify",
        &specs("messaging/application.psf"),
        "--map",
        &specs("messaging/component1.map"),
        "--target",
        &specs("messaging/application.psf"),
        &specs("messaging/toolbus.psf"),
        "--entry",
        "Component1",
        "--target-entry",
        "PT1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "equivalent");
}

#[test]
fn refine_prints_mapped_definitions() {
    let o = psfcs(&[
        "refine",
        &specs("messaging/application.psf"),
        "--map",
        &specs("messaging/component1.map"),
        "--target",
        &specs("messaging/application.psf"),
        &specs("messaging/toolbus.psf"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().any(|l| l.starts_with("PT1 = tb-rec-event(T1, tbterm(message))")));
}

#[test]
fn bisim_verdicts_and_exit_codes() {
    let f = scratch(LAWS);
    let path = f.path().to_str().unwrap();
    let same = psfcs(&["bisim", path, "--left", "P", "--right", "Q"]);
    assert_eq!(same.status.code(), Some(0));
    assert_eq!(stdout(&same).trim(), "equivalent");

    let diff = psfcs(&["bisim", path, "--left", "R", "--right", "U", "--kind", "weak"]);
    assert_eq!(diff.status.code(), Some(1));
    let out = stdout(&diff);
    assert!(out.starts_with("NOT equivalent\nwitness"), "{out}");
}

#[test]
fn lts_export_is_stable() {
    let f = scratch(LAWS);
    let path = f.path().to_str().unwrap();
    let a = psfcs(&["lts", path, "--entry", "U"]);
    let b = psfcs(&["lts", path, "--entry", "U"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), "des (0, 4, 4)\n(0,\"a\",1)\n(0,\"a\",2)\n(1,\"b\",3)\n(2,\"c\",3)\n");
    assert_eq!(a.stdout, b.stdout);
    let unknown = psfcs(&["lts", path, "--entry", "Nope"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn lts_truncation_is_a_diagnostic() {
    let o = psfcs(&[
        "lts",
        &specs("messaging/application.psf"),
        &specs("messaging/toolbus.psf"),
        "--entry",
        "Application",
        "--max-states",
        "2",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("truncated"));
}

#[test]
fn generated_interfaces_match_the_hand_written_system() {
    let data = specs("clientserver/data.psf");
    let comps = specs("clientserver/components.psf");
    let gen = psfcs(&["csgen", &data, &comps, "--manifest", &specs("clientserver/two.manifest")]);
    assert_eq!(gen.status.code(), Some(0), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(stdout(&gen).contains("process module ApplicationSystem"));

    let o = psfcs(&[
        "bisim",
        &data,
        &comps,
        "--manifest",
        &specs("clientserver/two.manifest"),
        "--left",
        "Application",
        "--against",
        &data,
        &comps,
        &specs("clientserver/application.psf"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "equivalent");
}

#[test]
fn demo_script_computes_the_product() {
    let o = psfcs(&["demo", "--script", &specs("calculator/multiply.script")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.trim_end().ends_with("display(12)"), "{out}");
    assert_eq!(out.lines().filter(|l| l.contains("s-call(primitive, succ(")).count(), 12);
}

#[test]
fn demo_random_runs_repeat_per_seed() {
    let a = psfcs(&["demo", "--policy", "random", "--steps", "40", "--seed", "9"]);
    let b = psfcs(&["demo", "--policy", "random", "--steps", "40", "--seed", "9"]);
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn demo_interactive_session() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_psfcs"))
        .arg("demo")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"0 5\ninc\nu\n99\nq\n")
        .unwrap();
    let out = String::from_utf8(child.wait_with_output().unwrap().stdout).unwrap();
    assert!(out.contains("fired enter(5)"), "{out}");
    assert!(out.contains("fired inc"), "{out}");
    assert!(out.contains("error: no enabled transition with index 99"), "{out}");
}

#[test]
fn serve_answers_hello() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_psfcs"))
        .args(["serve", "--port", "0", "--specs", &specs("")])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line
        .strip_prefix("listening on ")
        .and_then(|r| r.split_whitespace().next())
        .unwrap_or_else(|| panic!("{line}"))
        .to_string();
    let mut conn = TcpStream::connect(&addr).unwrap();
    conn.write_all(b"{\"id\":1,\"op\":\"hello\"}\n").unwrap();
    let mut reply = String::new();
    BufReader::new(&conn).read_line(&mut reply).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(reply.contains("\"ok\":true"), "{reply}");
    assert!(reply.contains("calculator") && reply.contains("messaging"), "{reply}");
}
