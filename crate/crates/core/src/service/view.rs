//! Box-and-node layout of a running system.
//!
//! The layout is read off the entry expression once: process instances
//! are unfolded through `||`, `disrupt`, `encaps` and `hide` until a
//! sequential process is reached. Each `encaps` becomes a box, each
//! sequential process a node. Node positions are the same `||`/`disrupt`
//! paths the stepper reports as participants, which is how enabled flags
//! are attached at run time.

use serde::Serialize;

use crate::flat::FlatSpec;
use crate::runtime::{Descriptor, Session};
use crate::semantics::Path;
use crate::terms::{Binding, Name, Proc, ProcExpr, SetRef};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoxView {
    /// Process whose definition opens the box, or the set name.
    pub label: String,
    /// Encapsulated set.
    pub set: String,
    pub boxes: Vec<BoxView>,
    pub nodes: Vec<NodeView>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NodeView {
    pub id: usize,
    pub label: String,
    pub path: String,
    pub enabled: bool,
    /// Took part in the last fired transition.
    pub last: bool,
}

/// Static layout of a session's entry expression.
#[derive(Clone, Debug)]
pub struct Layout {
    pub root: BoxView,
    paths: Vec<Path>,
}

pub fn path_text(p: &Path) -> String {
    p.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(".")
}

impl Layout {
    pub fn of(spec: &FlatSpec, entry: &Proc) -> Layout {
        let mut root = BoxView {
            label: label_of(entry),
            set: String::new(),
            boxes: Vec::new(),
            nodes: Vec::new(),
        };
        let mut paths = Vec::new();
        let mut b = Builder {
            spec,
            paths: &mut paths,
            stack: Vec::new(),
        };
        b.place(entry, Vec::new(), None, &mut root);
        // an entry that is itself one encapsulation needs no extra frame
        if root.nodes.is_empty() && root.boxes.len() == 1 {
            root = root.boxes.pop().expect("one box");
        }
        Layout { root, paths }
    }

    /// Node ids whose component takes part in `participants`.
    pub fn nodes_of(&self, participants: &[Path]) -> Vec<usize> {
        (0..self.paths.len())
            .filter(|&i| {
                let np = &self.paths[i];
                participants.iter().any(|p| p.starts_with(np) || np.starts_with(p))
            })
            .collect()
    }

    /// The layout with enabled and last-fired flags for `session`.
    pub fn render(&self, session: &Session) -> BoxView {
        let enabled: Vec<usize> = session
            .enabled()
            .iter()
            .flat_map(|d: &Descriptor| self.nodes_of(&d.participants))
            .collect();
        let last: Vec<usize> = session
            .trace()
            .last()
            .map(|e| self.nodes_of(&e.participants))
            .unwrap_or_default();
        let mut root = self.root.clone();
        mark(&mut root, &enabled, &last);
        root
    }
}

fn mark(b: &mut BoxView, enabled: &[usize], last: &[usize]) {
    for n in &mut b.nodes {
        n.enabled = enabled.contains(&n.id);
        n.last = last.contains(&n.id);
    }
    for c in &mut b.boxes {
        mark(c, enabled, last);
    }
}

fn label_of(p: &Proc) -> String {
    match &**p {
        ProcExpr::Inst(..) => p.to_string(),
        _ => {
            let s = p.to_string();
            match s.char_indices().nth(40) {
                Some((i, _)) => format!("{}...", &s[..i]),
                None => s,
            }
        }
    }
}

fn set_name(h: &SetRef) -> String {
    match h {
        SetRef::Named(n) => n.to_string(),
        other => other.to_string(),
    }
}

struct Builder<'a> {
    spec: &'a FlatSpec,
    paths: &'a mut Vec<Path>,
    /// Processes being unfolded, to stop at recursion.
    stack: Vec<Name>,
}

impl Builder<'_> {
    fn structural(&self, p: &Proc, depth: usize) -> bool {
        match &**p {
            ProcExpr::Par(..) | ProcExpr::Disrupt(..) | ProcExpr::Encaps(..) | ProcExpr::Hide(..) => true,
            ProcExpr::Inst(n, _) if depth < 16 && !self.stack.contains(n) => self
                .spec
                .def(n)
                .is_some_and(|d| self.structural(&d.body, depth + 1)),
            _ => false,
        }
    }

    fn leaf(&mut self, label: String, path: Path, into: &mut BoxView) {
        into.nodes.push(NodeView {
            id: self.paths.len(),
            label,
            path: path_text(&path),
            enabled: false,
            last: false,
        });
        self.paths.push(path);
    }

    fn place(&mut self, p: &Proc, path: Path, owner: Option<String>, into: &mut BoxView) {
        match &**p {
            ProcExpr::Inst(n, args) if self.structural(p, 0) => {
                let Some(d) = self.spec.def(n) else {
                    return self.leaf(p.to_string(), path, into);
                };
                let b: Binding = d
                    .formals
                    .iter()
                    .map(|(v, _)| v.clone())
                    .zip(args.iter().cloned())
                    .collect();
                let body = d.body.apply(&b);
                self.stack.push(n.clone());
                self.place(&body, path, Some(p.to_string()), into);
                self.stack.pop();
            }
            ProcExpr::Par(l, r) | ProcExpr::Disrupt(l, r) => {
                let mut lp = path.clone();
                lp.push(0);
                let mut rp = path;
                rp.push(1);
                self.place(l, lp, None, into);
                self.place(r, rp, None, into);
            }
            ProcExpr::Encaps(h, body) => {
                let mut b = BoxView {
                    label: owner.unwrap_or_else(|| match &**body {
                        ProcExpr::Inst(..) => body.to_string(),
                        _ => set_name(h),
                    }),
                    set: set_name(h),
                    boxes: Vec::new(),
                    nodes: Vec::new(),
                };
                self.place(body, path, None, &mut b);
                into.boxes.push(b);
            }
            ProcExpr::Hide(_, body) => self.place(body, path, owner, into),
            _ => {
                let label = owner.unwrap_or_else(|| label_of(p));
                self.leaf(label, path, into)
            }
        }
    }
}
