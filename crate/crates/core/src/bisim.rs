//! Strong and rooted weak bisimulation by partition refinement.
//!
//! Successful termination is treated as an observable `tick` into a sink, so
//! `a` and `a . delta` are told apart. Weak equivalence is strong
//! equivalence of the tau-saturated systems; the rooted variant adds the
//! root condition (an initial silent step must be answered by at least one
//! silent step). Non-equivalent verdicts carry a distinguishing formula that
//! holds in one system and fails in the other.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::semantics::{Config, Lts, Transition};
use crate::terms::ActionLabel;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BisimError {
    #[error("cannot compare a truncated transition system")]
    Truncated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Strong,
    /// Weak bisimulation without the root condition.
    Weak,
    RootedWeak,
}

/// What a modality observes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Obs {
    /// Strong: one step with this label. Weak: `tau* label tau*`, where a
    /// silent label means `tau*` (possibly no step at all).
    Act(ActionLabel),
    /// Strong: the state has terminated. Weak: it can terminate silently.
    Tick,
    /// At least one silent step (the root modality of the rooted check).
    TauPlus,
}

impl fmt::Display for Obs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Obs::Act(l) => write!(f, "{l}"),
            Obs::Tick => write!(f, "terminate"),
            Obs::TauPlus => write!(f, "tau+"),
        }
    }
}

/// Hennessy-Milner formula.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Hml {
    True,
    Diamond(Obs, Box<Hml>),
    Not(Box<Hml>),
    And(Vec<Hml>),
}

impl fmt::Display for Hml {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hml::True => write!(f, "true"),
            Hml::Diamond(o, phi) => match **phi {
                Hml::True => write!(f, "<{o}>true"),
                _ => write!(f, "<{o}>{phi}"),
            },
            Hml::Not(phi) => write!(f, "!{phi}"),
            Hml::And(cs) => {
                write!(f, "(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " & ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Hml {
    /// The observations along the formula's main branch: diamonds reached
    /// through negations and first conjuncts.
    pub fn spine(&self) -> Vec<Obs> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            match cur {
                Hml::True => break,
                Hml::Diamond(o, phi) => {
                    out.push(o.clone());
                    cur = phi;
                }
                Hml::Not(phi) => cur = phi,
                Hml::And(cs) => match cs.first() {
                    Some(c) => cur = c,
                    None => break,
                },
            }
        }
        out
    }

    /// Evaluates the formula at the initial state of `lts`, with strong or
    /// weak modalities.
    pub fn holds(&self, lts: &Lts, weak: bool) -> bool {
        let ev = Evaluator::new(lts, weak);
        ev.eval(self, lts.initial)
    }
}

struct Evaluator<'a> {
    lts: &'a Lts,
    weak: bool,
    succ: Vec<Vec<(ActionLabel, usize)>>,
    closure: Vec<Vec<usize>>,
}

impl<'a> Evaluator<'a> {
    fn new(lts: &'a Lts, weak: bool) -> Evaluator<'a> {
        let succ = lts.successors();
        let closure = if weak { tau_closures(lts, &succ) } else { Vec::new() };
        Evaluator {
            lts,
            weak,
            succ,
            closure,
        }
    }

    fn targets(&self, s: usize, o: &Obs) -> Vec<usize> {
        let mut out = BTreeSet::new();
        match (o, self.weak) {
            (Obs::Act(l), false) => {
                out.extend(self.succ[s].iter().filter(|(x, _)| x == l).map(|(_, t)| *t))
            }
            (Obs::TauPlus, false) => out.extend(
                self.succ[s]
                    .iter()
                    .filter(|(x, _)| x.is_tau())
                    .map(|(_, t)| *t),
            ),
            (Obs::Tick, _) => {
                let reach: Vec<usize> = if self.weak {
                    self.closure[s].clone()
                } else {
                    vec![s]
                };
                if reach.iter().any(|r| self.lts.terminating.contains(r)) {
                    out.insert(usize::MAX);
                }
            }
            (Obs::Act(l), true) if l.is_tau() => out.extend(self.closure[s].iter().copied()),
            (Obs::Act(l), true) => {
                for &u in &self.closure[s] {
                    for (x, v) in &self.succ[u] {
                        if x == l {
                            out.extend(self.closure[*v].iter().copied());
                        }
                    }
                }
            }
            (Obs::TauPlus, true) => {
                for (x, v) in &self.succ[s] {
                    if x.is_tau() {
                        out.extend(self.closure[*v].iter().copied());
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    fn eval(&self, phi: &Hml, s: usize) -> bool {
        match phi {
            Hml::True => true,
            Hml::Not(p) => !self.eval(p, s),
            Hml::And(cs) => cs.iter().all(|c| self.eval(c, s)),
            Hml::Diamond(o, p) => self.targets(s, o).into_iter().any(|t| {
                if t == usize::MAX {
                    matches!(**p, Hml::True)
                } else {
                    self.eval(p, t)
                }
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub formula: Hml,
    /// The system whose initial state satisfies the formula.
    pub holds_in: Side,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BisimResult {
    pub equivalent: bool,
    pub witness: Option<Witness>,
}

impl BisimResult {
    fn equivalent() -> BisimResult {
        BisimResult {
            equivalent: true,
            witness: None,
        }
    }
}

/// Checks a witness against both systems: it must hold on its side only.
pub fn replay(w: &Witness, a: &Lts, b: &Lts, kind: Kind) -> bool {
    let weak = kind != Kind::Strong;
    let (ha, hb) = (w.formula.holds(a, weak), w.formula.holds(b, weak));
    match w.holds_in {
        Side::Left => ha && !hb,
        Side::Right => hb && !ha,
    }
}

const TICK: u32 = 0;
const TAU: u32 = 1;

/// Observation graph over integer state and label ids.
struct Graph {
    succ: Vec<Vec<(u32, usize)>>,
    labels: Vec<Obs>,
}

struct Interner {
    ids: HashMap<ActionLabel, u32>,
    labels: Vec<Obs>,
}

impl Interner {
    fn new() -> Interner {
        let mut ids = HashMap::new();
        ids.insert(ActionLabel::Tau, TAU);
        Interner {
            ids,
            labels: vec![Obs::Tick, Obs::Act(ActionLabel::Tau)],
        }
    }

    fn id(&mut self, l: &ActionLabel) -> u32 {
        if let Some(&i) = self.ids.get(l) {
            return i;
        }
        let i = self.labels.len() as u32;
        self.ids.insert(l.clone(), i);
        self.labels.push(Obs::Act(l.clone()));
        i
    }
}

/// Reflexive tau closure of every state, in ascending state order.
fn tau_closures(lts: &Lts, succ: &[Vec<(ActionLabel, usize)>]) -> Vec<Vec<usize>> {
    (0..lts.num_states())
        .map(|s| {
            let mut seen = BTreeSet::new();
            let mut todo = vec![s];
            while let Some(u) = todo.pop() {
                if seen.insert(u) {
                    for (l, v) in &succ[u] {
                        if l.is_tau() {
                            todo.push(*v);
                        }
                    }
                }
            }
            seen.into_iter().collect()
        })
        .collect()
}

/// Weak transition closure: `tau` steps become `tau*` (including the
/// reflexive step) and visible steps become `tau* a tau*`. States that can
/// terminate silently become terminating.
pub fn tau_saturate(lts: &Lts) -> Lts {
    let succ = lts.successors();
    let closure = tau_closures(lts, &succ);
    let mut transitions = BTreeSet::new();
    let mut terminating = BTreeSet::new();
    for s in 0..lts.num_states() {
        for &u in &closure[s] {
            transitions.insert(Transition {
                from: s,
                label: ActionLabel::Tau,
                to: u,
            });
            if lts.terminating.contains(&u) {
                terminating.insert(s);
            }
            for (l, v) in &succ[u] {
                if l.is_tau() {
                    continue;
                }
                for &w in &closure[*v] {
                    transitions.insert(Transition {
                        from: s,
                        label: l.clone(),
                        to: w,
                    });
                }
            }
        }
    }
    Lts {
        states: lts.states.clone(),
        transitions: transitions.into_iter().collect(),
        initial: lts.initial,
        terminating,
        truncated: lts.truncated,
    }
}

/// Disjoint union of observation graphs; the last state is the tick sink.
fn union_graph(parts: &[&Lts]) -> (Graph, Vec<usize>) {
    let mut interner = Interner::new();
    let total: usize = parts.iter().map(|l| l.num_states()).sum();
    let sink = total;
    let mut succ = vec![Vec::new(); total + 1];
    let mut offsets = Vec::new();
    let mut off = 0;
    for lts in parts {
        offsets.push(off);
        for t in &lts.transitions {
            let id = interner.id(&t.label);
            succ[off + t.from].push((id, off + t.to));
        }
        for &s in &lts.terminating {
            succ[off + s].push((TICK, sink));
        }
        off += lts.num_states();
    }
    for s in succ.iter_mut() {
        s.sort();
        s.dedup();
    }
    (
        Graph {
            succ,
            labels: interner.labels,
        },
        offsets,
    )
}

/// Refinement history: `levels[k][s]` is the block of `s` after `k` rounds.
struct Refinement {
    levels: Vec<Vec<usize>>,
}

impl Refinement {
    fn run(g: &Graph) -> Refinement {
        let n = g.succ.len();
        let mut levels = vec![vec![0usize; n]];
        let mut count = 1;
        loop {
            let cur = levels.last().expect("at least one level");
            let mut ids: HashMap<(usize, Vec<(u32, usize)>), usize> = HashMap::new();
            let mut next = Vec::with_capacity(n);
            for s in 0..n {
                let mut sig: Vec<(u32, usize)> =
                    g.succ[s].iter().map(|&(l, t)| (l, cur[t])).collect();
                sig.sort_unstable();
                sig.dedup();
                let fresh = ids.len();
                next.push(*ids.entry((cur[s], sig)).or_insert(fresh));
            }
            let new_count = ids.len();
            levels.push(next);
            if new_count == count {
                break;
            }
            count = new_count;
        }
        Refinement { levels }
    }

    fn finest(&self) -> &[usize] {
        self.levels.last().expect("at least one level")
    }

    /// First level at which `s` and `t` are in different blocks.
    fn split_level(&self, s: usize, t: usize) -> Option<usize> {
        self.levels.iter().position(|l| l[s] != l[t])
    }
}

struct WitnessBuilder<'a> {
    g: &'a Graph,
    r: &'a Refinement,
    memo: HashMap<(usize, usize), Hml>,
}

impl<'a> WitnessBuilder<'a> {
    /// A formula true at `s` and false at `t`; the two must be separated.
    fn distinguish(&mut self, s: usize, t: usize) -> Hml {
        if let Some(f) = self.memo.get(&(s, t)) {
            return f.clone();
        }
        let k = self.r.split_level(s, t).expect("states are separated");
        let prev = &self.r.levels[k - 1];
        let sig = |u: usize| -> BTreeSet<(u32, usize)> {
            self.g.succ[u].iter().map(|&(l, v)| (l, prev[v])).collect()
        };
        let (ss, st) = (sig(s), sig(t));
        let f = if let Some(&(l, b)) = ss.difference(&st).next() {
            self.diamond(s, t, l, b, prev)
        } else {
            let &(l, b) = st.difference(&ss).next().expect("signatures differ");
            Hml::Not(Box::new(self.diamond(t, s, l, b, prev)))
        };
        self.memo.insert((s, t), f.clone());
        f
    }

    /// `<l>` into block `b` (of the previous level) from `s`, which `t`
    /// cannot match.
    fn diamond(&mut self, s: usize, t: usize, l: u32, b: usize, prev: &[usize]) -> Hml {
        let s2 = self.g.succ[s]
            .iter()
            .find(|&&(x, v)| x == l && prev[v] == b)
            .map(|&(_, v)| v)
            .expect("signature entry has a transition");
        let mut conj = Vec::new();
        let mut seen = BTreeSet::new();
        for &(x, v) in &self.g.succ[t] {
            if x == l && seen.insert(prev[v]) {
                let f = self.distinguish(s2, v);
                if !conj.contains(&f) {
                    conj.push(f);
                }
            }
        }
        let body = match conj.len() {
            0 => Hml::True,
            1 => conj.pop().expect("one conjunct"),
            _ => Hml::And(conj),
        };
        Hml::Diamond(self.g.labels[l as usize].clone(), Box::new(body))
    }
}

fn compare(a: &Lts, b: &Lts) -> (bool, Option<Witness>) {
    let (g, off) = union_graph(&[a, b]);
    let r = Refinement::run(&g);
    let (sa, sb) = (off[0] + a.initial, off[1] + b.initial);
    if r.finest()[sa] == r.finest()[sb] {
        return (true, None);
    }
    let mut wb = WitnessBuilder {
        g: &g,
        r: &r,
        memo: HashMap::new(),
    };
    let formula = wb.distinguish(sa, sb);
    (
        false,
        Some(Witness {
            formula,
            holds_in: Side::Left,
        }),
    )
}

pub fn strong_bisim(a: &Lts, b: &Lts) -> Result<BisimResult, BisimError> {
    if a.truncated || b.truncated {
        return Err(BisimError::Truncated);
    }
    let (eq, witness) = compare(a, b);
    Ok(BisimResult {
        equivalent: eq,
        witness,
    })
}

pub fn weak_bisim(a: &Lts, b: &Lts) -> Result<BisimResult, BisimError> {
    if a.truncated || b.truncated {
        return Err(BisimError::Truncated);
    }
    let (eq, witness) = compare(&tau_saturate(a), &tau_saturate(b));
    Ok(BisimResult {
        equivalent: eq,
        witness,
    })
}

/// Observational congruence: weak bisimilarity of all derivatives plus the
/// root condition on the initial states.
pub fn rooted_weak_bisim(a: &Lts, b: &Lts) -> Result<BisimResult, BisimError> {
    if a.truncated || b.truncated {
        return Err(BisimError::Truncated);
    }
    let (sat_a, sat_b) = (tau_saturate(a), tau_saturate(b));
    let (g, off) = union_graph(&[&sat_a, &sat_b]);
    let r = Refinement::run(&g);
    let block = r.finest();
    let (succ_a, succ_b) = (a.successors(), b.successors());
    let (sa_succ, sb_succ) = (sat_a.successors(), sat_b.successors());
    // a root move of one side must be answered by the other under the weak
    // partition; a silent root move needs at least one silent answer
    let answered = |from: &[(ActionLabel, usize)],
                    from_off: usize,
                    orig_other: &[Vec<(ActionLabel, usize)>],
                    sat_other: &[Vec<(ActionLabel, usize)>],
                    other_init: usize,
                    other_off: usize|
     -> Option<(ActionLabel, usize)> {
        for (l, t) in from {
            let target = block[from_off + t];
            let ok = if l.is_tau() {
                orig_other[other_init]
                    .iter()
                    .filter(|(x, _)| x.is_tau())
                    .any(|(_, v)| {
                        sat_other[*v]
                            .iter()
                            .any(|(x, w)| x.is_tau() && block[other_off + w] == target)
                    })
            } else {
                sat_other[other_init]
                    .iter()
                    .any(|(x, w)| x == l && block[other_off + w] == target)
            };
            if !ok {
                return Some((l.clone(), *t));
            }
        }
        None
    };
    let a_fail = answered(&succ_a[a.initial], off[0], &succ_b, &sb_succ, b.initial, off[1]);
    let b_fail = answered(&succ_b[b.initial], off[1], &succ_a, &sa_succ, a.initial, off[0]);
    let tick_a = a.terminating.contains(&a.initial);
    let tick_b = b.terminating.contains(&b.initial);
    let tick_fail = (tick_a && !sat_b.terminating.contains(&b.initial))
        || (tick_b && !sat_a.terminating.contains(&a.initial));
    let roots_equal = block[off[0] + a.initial] == block[off[1] + b.initial];
    if a_fail.is_none() && b_fail.is_none() && !tick_fail {
        debug_assert!(roots_equal);
        return Ok(BisimResult::equivalent());
    }
    let mut wb = WitnessBuilder {
        g: &g,
        r: &r,
        memo: HashMap::new(),
    };
    // a root move unmatched by the other side gives a rooted formula
    let witness = if let Some((l, t)) = a_fail {
        root_witness(&mut wb, &l, off[0] + t, b, &succ_b, &sb_succ, off[1], Side::Left)
    } else if let Some((l, t)) = b_fail {
        root_witness(&mut wb, &l, off[1] + t, a, &succ_a, &sa_succ, off[0], Side::Right)
    } else {
        Witness {
            formula: Hml::Diamond(Obs::Tick, Box::new(Hml::True)),
            holds_in: if tick_a { Side::Left } else { Side::Right },
        }
    };
    Ok(BisimResult {
        equivalent: false,
        witness: Some(witness),
    })
}

/// `<l>phi` where `l` is the unmatched root move (silent moves use the
/// strict `tau+` modality) and `phi` separates its target from every
/// candidate answer of the other system.
#[allow(clippy::too_many_arguments)]
fn root_witness(
    wb: &mut WitnessBuilder<'_>,
    l: &ActionLabel,
    target: usize,
    other: &Lts,
    orig_other: &[Vec<(ActionLabel, usize)>],
    sat_other: &[Vec<(ActionLabel, usize)>],
    other_off: usize,
    side: Side,
) -> Witness {
    let mut answers = BTreeSet::new();
    if l.is_tau() {
        for (x, v) in &orig_other[other.initial] {
            if x.is_tau() {
                answers.extend(sat_other[*v].iter().filter(|(y, _)| y.is_tau()).map(|(_, w)| *w));
            }
        }
    } else {
        answers.extend(
            sat_other[other.initial]
                .iter()
                .filter(|(x, _)| x == l)
                .map(|(_, w)| *w),
        );
    }
    let mut conj = Vec::new();
    for w in answers {
        let f = wb.distinguish(target, other_off + w);
        if !conj.contains(&f) {
            conj.push(f);
        }
    }
    let body = match conj.len() {
        0 => Hml::True,
        1 => conj.pop().expect("one conjunct"),
        _ => Hml::And(conj),
    };
    let obs = if l.is_tau() {
        Obs::TauPlus
    } else {
        Obs::Act(l.clone())
    };
    Witness {
        formula: Hml::Diamond(obs, Box::new(body)),
        holds_in: side,
    }
}

pub fn check(kind: Kind, a: &Lts, b: &Lts) -> Result<BisimResult, BisimError> {
    match kind {
        Kind::Strong => strong_bisim(a, b),
        Kind::Weak => weak_bisim(a, b),
        Kind::RootedWeak => rooted_weak_bisim(a, b),
    }
}

/// Quotient by strong or weak bisimilarity. Blocks are numbered in
/// breadth-first order from the initial state; under weak equivalence,
/// silent steps inside a block are dropped.
pub fn minimize(lts: &Lts, kind: Kind) -> Lts {
    let weak = kind != Kind::Strong;
    let base = if weak { tau_saturate(lts) } else { lts.clone() };
    let (g, _) = union_graph(&[&base]);
    let r = Refinement::run(&g);
    let block = r.finest();
    let succ = lts.successors();
    let mut number: BTreeMap<usize, usize> = BTreeMap::new();
    let mut queue = VecDeque::from([lts.initial]);
    let mut visited = BTreeSet::from([lts.initial]);
    number.insert(block[lts.initial], 0);
    while let Some(s) = queue.pop_front() {
        for (_, t) in &succ[s] {
            if !number.contains_key(&block[*t]) {
                let n = number.len();
                number.insert(block[*t], n);
            }
            if visited.insert(*t) {
                queue.push_back(*t);
            }
        }
    }
    let mut transitions = BTreeSet::new();
    let mut terminating = BTreeSet::new();
    for s in &visited {
        let from = number[&block[*s]];
        if lts.terminating.contains(s) || (weak && base.terminating.contains(s)) {
            terminating.insert(from);
        }
        for (l, t) in &succ[*s] {
            let to = number[&block[*t]];
            if weak && l.is_tau() && from == to {
                continue;
            }
            transitions.insert(Transition {
                from,
                label: l.clone(),
                to,
            });
        }
    }
    let mut out = Lts {
        states: (0..number.len()).map(Config::Abstract).collect(),
        transitions: transitions.into_iter().collect(),
        initial: 0,
        terminating,
        truncated: lts.truncated,
    };
    out.transitions.sort_by_key(|t| (t.from, t.to, t.label.clone()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(s: &str) -> ActionLabel {
        ActionLabel::act(s, vec![])
    }

    fn term(mut l: Lts, states: &[usize]) -> Lts {
        l.terminating.extend(states.iter().copied());
        l
    }

    #[test]
    fn choice_idempotence() {
        // a + a versus a
        let l = term(Lts::synthetic(2, 0, &[(0, act("a"), 1), (0, act("a"), 1)]), &[1]);
        let r = term(Lts::synthetic(2, 0, &[(0, act("a"), 1)]), &[1]);
        assert!(strong_bisim(&l, &r).unwrap().equivalent);
    }

    #[test]
    fn distributivity_fails_with_witness() {
        // a.(b + c) versus a.b + a.c
        let l = term(
            Lts::synthetic(3, 0, &[(0, act("a"), 1), (1, act("b"), 2), (1, act("c"), 2)]),
            &[2],
        );
        let r = term(
            Lts::synthetic(
                4,
                0,
                &[(0, act("a"), 1), (0, act("a"), 2), (1, act("b"), 3), (2, act("c"), 3)],
            ),
            &[3],
        );
        let res = strong_bisim(&l, &r).unwrap();
        assert!(!res.equivalent);
        let w = res.witness.unwrap();
        assert_eq!(w.formula.spine()[0], Obs::Act(act("a")));
        assert!(replay(&w, &l, &r, Kind::Strong));
    }

    #[test]
    fn saturation_adds_direct_step() {
        let l = Lts::synthetic(3, 0, &[(0, ActionLabel::Tau, 1), (1, act("a"), 2)]);
        let s = tau_saturate(&l);
        assert!(s.transitions.contains(&Transition {
            from: 0,
            label: act("a"),
            to: 2
        }));
        let plain = Lts::synthetic(2, 0, &[(0, act("a"), 1)]);
        let sp = tau_saturate(&plain);
        assert_eq!(sp.transitions.len(), 3);
    }

    #[test]
    fn root_condition_separates_leading_tau() {
        // skip . a versus a
        let l = term(Lts::synthetic(3, 0, &[(0, ActionLabel::Tau, 1), (1, act("a"), 2)]), &[2]);
        let r = term(Lts::synthetic(2, 0, &[(0, act("a"), 1)]), &[1]);
        assert!(weak_bisim(&l, &r).unwrap().equivalent);
        let res = rooted_weak_bisim(&l, &r).unwrap();
        assert!(!res.equivalent);
        let w = res.witness.unwrap();
        assert_eq!(w.formula.spine()[0], Obs::TauPlus);
        assert!(replay(&w, &l, &r, Kind::RootedWeak));
    }

    #[test]
    fn trailing_tau_is_absorbed() {
        // a . skip versus a
        let l = term(Lts::synthetic(3, 0, &[(0, act("a"), 1), (1, ActionLabel::Tau, 2)]), &[2]);
        let r = term(Lts::synthetic(2, 0, &[(0, act("a"), 1)]), &[1]);
        assert!(rooted_weak_bisim(&l, &r).unwrap().equivalent);
    }

    #[test]
    fn minimize_merges_duplicate_branches() {
        let l = term(Lts::synthetic(3, 0, &[(0, act("a"), 1), (0, act("a"), 2)]), &[1, 2]);
        let m = minimize(&l, Kind::Strong);
        assert_eq!(m.num_states(), 2);
        assert_eq!(m.transitions.len(), 1);
    }

    #[test]
    fn truncated_input_is_rejected() {
        let mut l = Lts::synthetic(1, 0, &[]);
        l.truncated = true;
        assert_eq!(strong_bisim(&l, &l.clone()), Err(BisimError::Truncated));
    }
}
