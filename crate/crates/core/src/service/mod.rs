//! Session service: line-delimited JSON requests and responses over TCP.
//!
//! Each request is one JSON object with an `op` field and an optional
//! `id`, echoed in the response. Responses are `{"id", "ok": true,
//! "result"}` or `{"id", "ok": false, "error"}`. The full message list
//! is in `docs/protocol.md`.

mod server;
mod view;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::cslib::{load_sources, CsError};
use crate::flat::FlatSpec;
use crate::linker::flatten_many;
use crate::resolve::parse_value;
use crate::runtime::{calculator_demo, Descriptor, Handlers, Policy, Session, SessionError};
use crate::terms::{name, Binding};

pub use server::{serve, spawn};
pub use view::{path_text, BoxView, Layout, NodeView};

pub const PROTOCOL: &str = "psfcs-session";
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("unknown specification {0}")]
    UnknownSpec(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("index out of date: request is for revision {requested}, session is at {current}")]
    Stale { requested: u64, current: u64 },
    #[error("no open variable {0} on this transition")]
    UnknownVariable(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("{path}: {source}")]
    Catalog { path: String, source: CsError },
    #[error("{0}")]
    Io(String),
}

/// A linked specification sessions can be created on.
#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub id: String,
    pub spec: Arc<FlatSpec>,
    pub default_root: String,
    /// Parameterless defined processes, any of which can be a root.
    pub roots: Vec<String>,
    pub handlers: Handlers,
}

#[derive(Clone, Debug, Default)]
pub struct Catalog {
    entries: BTreeMap<String, CatalogEntry>,
}

fn runnable(spec: &FlatSpec) -> Vec<String> {
    spec.processes
        .iter()
        .filter(|p| p.arg_sorts.is_empty() && spec.def(&p.name).is_some())
        .map(|p| p.name.to_string())
        .collect()
}

impl Catalog {
    /// The calculator demo, with its handlers.
    pub fn builtin() -> Catalog {
        let mut c = Catalog::default();
        let demo = calculator_demo().expect("calculator demo links");
        c.insert(CatalogEntry {
            id: "calculator".into(),
            roots: runnable(&demo.spec),
            default_root: demo.root.clone(),
            spec: demo.spec,
            handlers: demo.handlers,
        });
        c
    }

    pub fn insert(&mut self, e: CatalogEntry) {
        self.entries.insert(e.id.clone(), e);
    }

    pub fn get(&self, id: &str) -> Option<&CatalogEntry> {
        self.entries.get(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CatalogEntry> {
        self.entries.values()
    }

    /// Adds one entry per subdirectory of `dir` holding `.psf` files. All
    /// modules of a directory are linked together; the entry is named
    /// after the directory.
    pub fn load_dir(&mut self, dir: &Path) -> Result<(), ServiceError> {
        let io = |e: std::io::Error| ServiceError::Io(format!("{}: {e}", dir.display()));
        let mut subdirs: Vec<_> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        subdirs.sort();
        for d in subdirs {
            let mut files: Vec<_> = std::fs::read_dir(&d)
                .map_err(io)?
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "psf"))
                .collect();
            if files.is_empty() {
                continue;
            }
            files.sort();
            let mut sources = Vec::new();
            for f in &files {
                let text = std::fs::read_to_string(f).map_err(io)?;
                sources.push((f.display().to_string(), text));
            }
            let path = d.display().to_string();
            let wrap = |source: CsError| ServiceError::Catalog {
                path: path.clone(),
                source,
            };
            let mods = load_sources(&sources).map_err(wrap)?;
            let user: Vec<String> = sources
                .iter()
                .flat_map(|(p, t)| crate::syntax::parse_spec_file(t, Some(p)).unwrap_or_default())
                .map(|m| m.name.name)
                .collect();
            let roots: Vec<&str> = user.iter().map(String::as_str).collect();
            let spec = flatten_many(&mods, &roots).map_err(|e| wrap(CsError::Link(e)))?;
            let procs = runnable(&spec);
            let default_root = ["Application", "ApplicationSystem"]
                .iter()
                .find(|r| procs.iter().any(|p| p == *r))
                .map(|r| r.to_string())
                .or_else(|| procs.last().cloned())
                .unwrap_or_default();
            let id = d
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            self.insert(CatalogEntry {
                id,
                spec: Arc::new(spec),
                default_root,
                roots: procs,
                handlers: Handlers::default(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    Hello,
    Specs,
    Create {
        spec: String,
        root: Option<String>,
        seed: Option<u64>,
        depth_bound: Option<usize>,
    },
    View {
        session: String,
    },
    Enabled {
        session: String,
    },
    Fire {
        session: String,
        index: usize,
        revision: Option<u64>,
        #[serde(default)]
        values: BTreeMap<String, String>,
    },
    FireLabel {
        session: String,
        label: String,
        revision: Option<u64>,
    },
    Run {
        session: String,
        steps: usize,
    },
    Undo {
        session: String,
    },
    Reset {
        session: String,
    },
    Trace {
        session: String,
    },
    Close {
        session: String,
    },
}

#[derive(Debug, Serialize)]
pub struct OpenVar {
    pub var: String,
    pub sort: String,
}

#[derive(Debug, Serialize)]
pub struct DescriptorView {
    pub index: usize,
    pub label: String,
    pub open: Vec<OpenVar>,
    pub target: String,
    pub participants: Vec<String>,
    /// Layout nodes taking part.
    pub nodes: Vec<usize>,
    pub comm: bool,
}

#[derive(Debug, Serialize)]
pub struct EventView {
    pub index: usize,
    pub label: String,
    pub nesting: usize,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Serialize)]
pub struct AnimationView {
    pub session: String,
    pub spec: String,
    pub root: String,
    pub revision: u64,
    pub terminated: bool,
    pub error: Option<String>,
    pub can_undo: bool,
    pub trace_len: usize,
    pub last: Option<EventView>,
    pub layout: BoxView,
    pub enabled: Vec<DescriptorView>,
}

struct Live {
    spec_id: String,
    root: String,
    session: Session,
    layout: Layout,
}

impl Live {
    fn descriptor(&self, d: &Descriptor) -> DescriptorView {
        DescriptorView {
            index: d.index,
            label: d.label.to_string(),
            open: d
                .open
                .iter()
                .map(|(v, s)| OpenVar {
                    var: v.to_string(),
                    sort: s.to_string(),
                })
                .collect(),
            target: d.target(),
            participants: d.participants.iter().map(path_text).collect(),
            nodes: self.layout.nodes_of(&d.participants),
            comm: d.comm,
        }
    }

    fn view(&self, id: &str) -> AnimationView {
        let s = &self.session;
        AnimationView {
            session: id.to_string(),
            spec: self.spec_id.clone(),
            root: self.root.clone(),
            revision: s.revision(),
            terminated: s.terminated(),
            error: s.error().map(str::to_string),
            can_undo: s.can_undo(),
            trace_len: s.trace().len(),
            last: s.trace().last().map(|e| EventView {
                index: s.trace().len() - 1,
                label: e.label.to_string(),
                nesting: e.nesting,
                nodes: self.layout.nodes_of(&e.participants),
            }),
            layout: self.layout.render(s),
            enabled: s.enabled().iter().map(|d| self.descriptor(d)).collect(),
        }
    }

    fn check_revision(&self, r: Option<u64>) -> Result<(), ServiceError> {
        match r {
            Some(requested) if requested != self.session.revision() => Err(ServiceError::Stale {
                requested,
                current: self.session.revision(),
            }),
            _ => Ok(()),
        }
    }
}

/// Shared state of the service: the catalog and the live sessions.
pub struct Service {
    catalog: Catalog,
    sessions: Mutex<BTreeMap<String, Arc<Mutex<Live>>>>,
    next: AtomicU64,
    pub default_seed: u64,
    pub default_depth_bound: usize,
}

fn to_value<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("view types serialize")
}

impl Service {
    pub fn new(catalog: Catalog, default_seed: u64, default_depth_bound: usize) -> Service {
        Service {
            catalog,
            sessions: Mutex::new(BTreeMap::new()),
            next: AtomicU64::new(1),
            default_seed,
            default_depth_bound,
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    fn live(&self, id: &str) -> Result<Arc<Mutex<Live>>, ServiceError> {
        self.sessions
            .lock()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    fn with_live<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut Live) -> Result<T, ServiceError>,
    ) -> Result<T, ServiceError> {
        let l = self.live(id)?;
        let mut g = l.lock().expect("session lock");
        f(&mut g)
    }

    pub fn handle(&self, req: Request) -> Result<Value, ServiceError> {
        match req {
            Request::Hello => Ok(json!({
                "protocol": PROTOCOL,
                "version": PROTOCOL_VERSION,
                "specs": self.catalog.entries().map(|e| e.id.clone()).collect::<Vec<_>>(),
            })),
            Request::Specs => Ok(Value::Array(
                self.catalog
                    .entries()
                    .map(|e| json!({"id": e.id, "default_root": e.default_root, "roots": e.roots}))
                    .collect(),
            )),
            Request::Create {
                spec,
                root,
                seed,
                depth_bound,
            } => {
                let e = self
                    .catalog
                    .get(&spec)
                    .ok_or_else(|| ServiceError::UnknownSpec(spec.clone()))?;
                let root = root.unwrap_or_else(|| e.default_root.clone());
                let session = Session::new(
                    e.spec.clone(),
                    &root,
                    e.handlers.clone(),
                    seed.unwrap_or(self.default_seed),
                    depth_bound.unwrap_or(self.default_depth_bound),
                )?;
                let layout = Layout::of(&e.spec, session.initial());
                let id = format!("s{}", self.next.fetch_add(1, Ordering::SeqCst));
                let live = Live {
                    spec_id: spec,
                    root,
                    session,
                    layout,
                };
                let v = to_value(live.view(&id));
                self.sessions
                    .lock()
                    .expect("session table lock")
                    .insert(id, Arc::new(Mutex::new(live)));
                Ok(v)
            }
            Request::View { session } => self.with_live(&session, |l| Ok(to_value(l.view(&session)))),
            Request::Enabled { session } => self.with_live(&session, |l| {
                let ds: Vec<DescriptorView> = l.session.enabled().iter().map(|d| l.descriptor(d)).collect();
                Ok(to_value(ds))
            }),
            Request::Fire {
                session,
                index,
                revision,
                values,
            } => self.with_live(&session, |l| {
                l.check_revision(revision)?;
                let d = l
                    .session
                    .enabled()
                    .get(index)
                    .ok_or(SessionError::NoSuchIndex(index))?;
                let mut b = Binding::new();
                for (var, text) in &values {
                    let (_, sort) = d
                        .open
                        .iter()
                        .find(|(v, _)| &**v == var)
                        .ok_or_else(|| ServiceError::UnknownVariable(var.clone()))?;
                    let t = parse_value(&l.session.spec().clone(), text, sort).map_err(SessionError::from)?;
                    b.insert(name(var), t);
                }
                l.session.fire_with(index, &b)?;
                Ok(to_value(l.view(&session)))
            }),
            Request::FireLabel {
                session,
                label,
                revision,
            } => self.with_live(&session, |l| {
                l.check_revision(revision)?;
                l.session.fire_label(&label)?;
                Ok(to_value(l.view(&session)))
            }),
            Request::Run { session, steps } => self.with_live(&session, |l| {
                let out = l.session.run_auto(&Policy::Random, steps)?;
                Ok(json!({"fired": out.fired, "view": to_value(l.view(&session))}))
            }),
            Request::Undo { session } => self.with_live(&session, |l| {
                l.session.undo()?;
                Ok(to_value(l.view(&session)))
            }),
            Request::Reset { session } => self.with_live(&session, |l| {
                l.session.reset()?;
                Ok(to_value(l.view(&session)))
            }),
            Request::Trace { session } => self.with_live(&session, |l| {
                let events: Vec<EventView> = l
                    .session
                    .trace()
                    .iter()
                    .enumerate()
                    .map(|(i, e)| EventView {
                        index: i,
                        label: e.label.to_string(),
                        nesting: e.nesting,
                        nodes: l.layout.nodes_of(&e.participants),
                    })
                    .collect();
                Ok(json!({ "events": events, "stats": l.session.trace_stats() }))
            }),
            Request::Close { session } => {
                self.sessions
                    .lock()
                    .expect("session table lock")
                    .remove(&session)
                    .ok_or(ServiceError::UnknownSession(session))?;
                Ok(json!({"closed": true}))
            }
        }
    }

    /// Handles one request line and returns the response line (without
    /// the trailing newline).
    pub fn handle_line(&self, line: &str) -> String {
        let (id, result) = match serde_json::from_str::<Value>(line) {
            Err(e) => (Value::Null, Err(ServiceError::Malformed(e.to_string()))),
            Ok(mut v) => {
                let id = v
                    .as_object_mut()
                    .and_then(|o| o.remove("id"))
                    .unwrap_or(Value::Null);
                let r = serde_json::from_value::<Request>(v)
                    .map_err(|e| ServiceError::Malformed(e.to_string()))
                    .and_then(|req| self.handle(req));
                (id, r)
            }
        };
        let resp = match result {
            Ok(result) => json!({"id": id, "ok": true, "result": result}),
            Err(e) => json!({"id": id, "ok": false, "error": e.to_string()}),
        };
        resp.to_string()
    }
}
