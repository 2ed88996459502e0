//! Test-side oracles: a naive fixpoint bisimulation checker that shares no
//! code with the partition-refinement implementation, random systems, and
//! calculator drivers.

#![allow(dead_code)]

use std::collections::BTreeSet;

use psfcs::runtime::{Policy, Session};
use psfcs::semantics::Lts;
use psfcs::terms::{ActionLabel, Term};
use rand::Rng;

const TICK: &str = "<tick>";

/// Edges of `lts` as strings, with termination as a tick into an extra
/// sink state. Silent steps are `None`.
fn explicit(lts: &Lts) -> (usize, Vec<(usize, Option<String>, usize)>) {
    let n = lts.states.len();
    let mut edges: Vec<(usize, Option<String>, usize)> = lts
        .transitions
        .iter()
        .map(|t| (t.from, (!t.label.is_tau()).then(|| t.label.to_string()), t.to))
        .collect();
    for &s in &lts.terminating {
        edges.push((s, Some(TICK.to_string()), n));
    }
    (n + 1, edges)
}

fn closure(n: usize, edges: &[(usize, Option<String>, usize)]) -> Vec<BTreeSet<usize>> {
    (0..n)
        .map(|s| {
            let mut seen = BTreeSet::from([s]);
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for (f, l, t) in edges {
                    if *f == u && l.is_none() && seen.insert(*t) {
                        stack.push(*t);
                    }
                }
            }
            seen
        })
        .collect()
}

/// `tau*` for silent labels, `tau* l tau*` otherwise.
fn saturate(n: usize, edges: &[(usize, Option<String>, usize)]) -> Vec<(usize, Option<String>, usize)> {
    let c = closure(n, edges);
    let mut out = BTreeSet::new();
    for s in 0..n {
        for &u in &c[s] {
            out.insert((s, None, u));
            for (f, l, v) in edges {
                if *f == u && l.is_some() {
                    for &w in &c[*v] {
                        out.insert((s, l.clone(), w));
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Greatest bisimulation on one edge set, as a matrix.
fn greatest(n: usize, edges: &[(usize, Option<String>, usize)]) -> Vec<Vec<bool>> {
    let mut succ = vec![Vec::new(); n];
    for (f, l, t) in edges {
        succ[*f].push((l.clone(), *t));
    }
    let mut r = vec![vec![true; n]; n];
    loop {
        let mut changed = false;
        for p in 0..n {
            for q in 0..n {
                if !r[p][q] {
                    continue;
                }
                let sim = |x: usize, y: usize, r: &Vec<Vec<bool>>, flip: bool| {
                    succ[x].iter().all(|(l, x2)| {
                        succ[y]
                            .iter()
                            .any(|(m, y2)| l == m && if flip { r[*y2][*x2] } else { r[*x2][*y2] })
                    })
                };
                if !sim(p, q, &r, false) || !sim(q, p, &r, true) {
                    r[p][q] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            return r;
        }
    }
}

fn union(a: &Lts, b: &Lts) -> (usize, usize, Vec<(usize, Option<String>, usize)>) {
    let (na, ea) = explicit(a);
    let (nb, eb) = explicit(b);
    let mut edges = ea;
    edges.extend(eb.into_iter().map(|(f, l, t)| (f + na, l, t + na)));
    (na + nb, na, edges)
}

pub fn naive_strong(a: &Lts, b: &Lts) -> bool {
    let (n, off, edges) = union(a, b);
    greatest(n, &edges)[a.initial][off + b.initial]
}

pub fn naive_weak(a: &Lts, b: &Lts) -> bool {
    let (n, off, edges) = union(a, b);
    greatest(n, &saturate(n, &edges))[a.initial][off + b.initial]
}

/// Weak bisimilarity plus the root condition: every initial move, silent
/// ones included, is answered by at least one step of the same kind.
pub fn naive_rooted(a: &Lts, b: &Lts) -> bool {
    let (n, off, edges) = union(a, b);
    let sat = saturate(n, &edges);
    let w = greatest(n, &sat);
    let c = closure(n, &edges);
    let answers = |p: usize, q: usize| {
        edges.iter().filter(|(f, _, _)| *f == p).all(|(_, l, p2)| match l {
            None => edges
                .iter()
                .filter(|(f, m, _)| *f == q && m.is_none())
                .any(|(_, _, q1)| c[*q1].iter().any(|q2| w[*p2][*q2] && w[*q2][*p2])),
            Some(_) => sat
                .iter()
                .any(|(f, m, q2)| *f == q && m == l && w[*p2][*q2]),
        })
    };
    let (p, q) = (a.initial, off + b.initial);
    answers(p, q) && answers(q, p)
}

pub fn act(a: &str) -> ActionLabel {
    ActionLabel::act(a, vec![])
}

/// Random system over labels `tau`, `a`, `b` with `1..=max_states` states.
pub fn random_lts(rng: &mut impl Rng, max_states: usize) -> Lts {
    let n = rng.gen_range(1..=max_states);
    let m = rng.gen_range(0..=2 * n);
    let edges: Vec<(usize, ActionLabel, usize)> = (0..m)
        .map(|_| {
            let l = match rng.gen_range(0..3) {
                0 => ActionLabel::Tau,
                1 => act("a"),
                _ => act("b"),
            };
            (rng.gen_range(0..n), l, rng.gen_range(0..n))
        })
        .collect();
    let mut l = Lts::synthetic(n, 0, &edges);
    for s in 0..n {
        if rng.gen_bool(0.25) {
            l.terminating.insert(s);
        }
    }
    l
}

/// A strongly bisimilar variant: one state is split into two copies with
/// the same outgoing steps, and incoming steps are shared out at random.
pub fn split_state(rng: &mut impl Rng, l: &Lts) -> Lts {
    let n = l.states.len();
    let s = rng.gen_range(0..n);
    let mut edges = Vec::new();
    for t in &l.transitions {
        let to = if t.to == s && rng.gen_bool(0.5) { n } else { t.to };
        edges.push((t.from, t.label.clone(), to));
        if t.from == s {
            edges.push((n, t.label.clone(), to));
        }
    }
    let mut out = Lts::synthetic(n + 1, l.initial, &edges);
    out.terminating = l.terminating.clone();
    if l.terminating.contains(&s) {
        out.terminating.insert(n);
    }
    out
}

/// Fires `request` followed by the protocol round trip to `server` and
/// returns the displayed result.
pub fn compute(s: &mut Session, request: &[String], server: &str) -> u64 {
    let mut lines = request.to_vec();
    for l in [
        format!("c-call(operator, {server}, _)"),
        format!("cs-request(operator, {server}, _)"),
        format!("s-call({server}, _)"),
        format!("s-return({server}, _)"),
        format!("cs-result({server}, operator, _)"),
        format!("c-return({server}, operator, _)"),
        "display(_)".to_string(),
    ] {
        lines.push(l);
    }
    let out = s.run_auto(&Policy::Script(lines), usize::MAX).unwrap();
    assert!(out.error.is_none(), "{out:?}");
    match &s.trace().last().unwrap().label.args()[0] {
        Term::Lit { value, .. } => *value,
        t => panic!("unexpected display {t}"),
    }
}

pub fn binary(s: &mut Session, op: &str, a: u64, b: u64) -> u64 {
    let server = match op {
        "add-op" | "sub-op" => "basic",
        _ => "complex",
    };
    compute(s, &[format!("enter({a})"), format!("{op}({b})")], server)
}

/// Random process over atoms `a`, `b`, `c` built from the sequential,
/// choice, merge and iteration operators.
pub fn random_proc(rng: &mut impl Rng, depth: u32) -> psfcs::Proc {
    use psfcs::ProcExpr;
    if depth == 0 || rng.gen_bool(0.3) {
        return match rng.gen_range(0..8) {
            0 => ProcExpr::delta(),
            1 => ProcExpr::skip(),
            k => ProcExpr::atom(["a", "b", "c"][k % 3], vec![]),
        };
    }
    let l = random_proc(rng, depth - 1);
    let r = random_proc(rng, depth - 1);
    match rng.gen_range(0..4) {
        0 => ProcExpr::alt(l, r),
        1 => ProcExpr::seq(l, r),
        2 => ProcExpr::par(l, r),
        _ => ProcExpr::star(l, r),
    }
}
