//! Remote debugging endpoint.
//!
//! Clients connect over TCP and receive the rule tree and the current
//! logging states, then a stream of rule log records filtered by those
//! states. Each client has a bounded queue; when a client falls behind the
//! oldest messages are dropped and the client is told how many.
//!
//! The server is a [`LogSink`]: attach it with `Engine::add_sink`. State
//! changes and filtering both happen under one lock, so a change takes
//! effect between two records and never in the middle of one.

mod protocol;
mod tree;

use std::collections::VecDeque;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread;

use crate::engine::{LogSink, RuleLogRecord};
use crate::lower::Program;

pub use protocol::{Command, LoggingState, ServerMsg, StateMap, PROTOCOL_VERSION};
pub use tree::{ModuleNode, RuleNode, RuleTree};

#[derive(Clone, Debug)]
pub struct ServerOptions {
    /// Messages buffered per client before the oldest are dropped.
    pub queue_capacity: usize,
    /// Base directory for relative config paths.
    pub config_dir: PathBuf,
}

impl Default for ServerOptions {
    fn default() -> Self {
        ServerOptions {
            queue_capacity: 4096,
            config_dir: PathBuf::from("."),
        }
    }
}

/// Rule tree plus logging states; shared by the server threads and the
/// engine-side sink.
pub struct DebugState {
    tree: RuleTree,
    states: Mutex<StateMap>,
}

impl DebugState {
    pub fn new(tree: RuleTree) -> DebugState {
        let states = tree
            .all_ids()
            .into_iter()
            .map(|id| (id, LoggingState::Never))
            .collect();
        DebugState {
            tree,
            states: Mutex::new(states),
        }
    }

    pub fn tree(&self) -> &RuleTree {
        &self.tree
    }

    pub fn states(&self) -> StateMap {
        self.states.lock().unwrap().clone()
    }

    pub fn state_of(&self, rule: u32) -> Option<LoggingState> {
        self.states.lock().unwrap().get(&rule).copied()
    }

    pub fn admits(&self, rec: &RuleLogRecord) -> bool {
        self.states
            .lock()
            .unwrap()
            .get(&rec.rule)
            .is_some_and(|s| s.admits(rec.result))
    }

    /// Sets `state` on a rule or module target. Nothing changes on error.
    pub fn set(
        &self,
        rule: Option<u32>,
        module: Option<&str>,
        state: LoggingState,
        recursive: bool,
    ) -> Result<(), String> {
        let ids = match (rule, module) {
            (Some(id), None) => {
                let node = self
                    .tree
                    .rule(id)
                    .ok_or_else(|| format!("unknown rule id {id}"))?;
                let mut ids = Default::default();
                if recursive {
                    node.subtree_ids(&mut ids);
                } else {
                    ids.insert(id);
                }
                ids
            }
            (None, Some(m)) => self
                .tree
                .module_ids(m, recursive)
                .ok_or_else(|| format!("unknown module `{m}`"))?,
            _ => return Err("set-state needs exactly one of `rule` or `module`".into()),
        };
        let mut states = self.states.lock().unwrap();
        for id in ids {
            states.insert(id, state);
        }
        Ok(())
    }

    /// Replaces the whole map; unmentioned rules go back to NEVER.
    pub fn replace(&self, new: &StateMap) -> Result<(), String> {
        if let Some(bad) = new.keys().find(|id| self.tree.rule(**id).is_none()) {
            return Err(format!("unknown rule id {bad}"));
        }
        let mut states = self.states.lock().unwrap();
        for (id, s) in states.iter_mut() {
            *s = new.get(id).copied().unwrap_or_default();
        }
        Ok(())
    }

    pub fn state_msg(&self) -> ServerMsg {
        ServerMsg::State {
            v: PROTOCOL_VERSION,
            states: self.states(),
        }
    }

    pub fn tree_msg(&self) -> ServerMsg {
        ServerMsg::Tree {
            v: PROTOCOL_VERSION,
            root: self.tree.root.clone(),
            modules: self.tree.modules.clone(),
        }
    }
}

struct Queue {
    items: VecDeque<String>,
    dropped: u64,
    reported: u64,
    closed: bool,
}

struct Client {
    queue: Mutex<Queue>,
    ready: Condvar,
    capacity: usize,
    stream: TcpStream,
}

impl Client {
    /// Never blocks on the network.
    fn push(&self, line: String) -> bool {
        let mut q = self.queue.lock().unwrap();
        if q.closed {
            return false;
        }
        if q.items.len() >= self.capacity {
            q.items.pop_front();
            q.dropped += 1;
        }
        q.items.push_back(line);
        self.ready.notify_one();
        true
    }

    fn close(&self) {
        self.queue.lock().unwrap().closed = true;
        self.ready.notify_all();
        let _ = self.stream.shutdown(Shutdown::Both);
    }

    fn writer(self: Arc<Self>) {
        let mut out = match self.stream.try_clone() {
            Ok(s) => io::BufWriter::new(s),
            Err(_) => return self.close(),
        };
        loop {
            let (drops, line) = {
                let mut q = self.queue.lock().unwrap();
                while q.items.is_empty() && !q.closed {
                    q = self.ready.wait(q).unwrap();
                }
                if q.closed {
                    return;
                }
                let drops = (q.dropped != q.reported).then_some(q.dropped);
                q.reported = q.dropped;
                (drops, q.items.pop_front().expect("non-empty"))
            };
            let mut res = Ok(());
            if let Some(count) = drops {
                let msg = ServerMsg::Drops {
                    v: PROTOCOL_VERSION,
                    count,
                };
                res = out.write_all(msg.to_line().as_bytes());
            }
            let res = res
                .and_then(|_| out.write_all(line.as_bytes()))
                .and_then(|_| {
                    if self.queue.lock().unwrap().items.is_empty() {
                        out.flush()
                    } else {
                        Ok(())
                    }
                });
            if res.is_err() {
                return self.close();
            }
        }
    }
}

struct Shared {
    state: Arc<DebugState>,
    clients: Mutex<Vec<Arc<Client>>>,
    options: ServerOptions,
    shutdown: AtomicBool,
    published: AtomicU64,
}

impl Shared {
    fn broadcast(&self, msg: &ServerMsg) {
        let line = msg.to_line();
        self.clients
            .lock()
            .unwrap()
            .retain(|c| c.push(line.clone()));
    }

    fn handle(&self, cmd: Command, client: &Client) {
        let req = cmd.req();
        let mut state_changed = false;
        let mut reply = None;
        let result = match cmd {
            Command::SetState {
                rule,
                module,
                state,
                recursive,
                ..
            } => self
                .state
                .set(rule, module.as_deref(), state, recursive)
                .map(|_| state_changed = true),
            Command::GetState { .. } => {
                reply = Some(self.state.state_msg());
                Ok(())
            }
            Command::GetTree { .. } => {
                reply = Some(self.state.tree_msg());
                Ok(())
            }
            Command::SaveConfig { path, .. } => {
                let p = self.options.config_dir.join(path);
                fs::write(&p, self.state.state_msg().to_line())
                    .map_err(|e| format!("{}: {e}", p.display()))
            }
            Command::LoadConfig { path, states, .. } => self
                .load_config(path, states)
                .map(|_| state_changed = true),
            Command::Recompile { .. } => Err("recompile is disabled on this server".into()),
        };
        let ack = ServerMsg::Ack {
            v: PROTOCOL_VERSION,
            req,
            ok: result.is_ok(),
            error: result.err(),
        };
        client.push(ack.to_line());
        if let Some(r) = reply {
            client.push(r.to_line());
        }
        if state_changed {
            self.broadcast(&self.state.state_msg());
        }
    }

    fn load_config(&self, path: Option<String>, states: Option<StateMap>) -> Result<(), String> {
        let states = match (path, states) {
            (None, Some(s)) => s,
            (Some(path), None) => {
                let p = self.options.config_dir.join(path);
                let text = fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
                match serde_json::from_str(&text) {
                    Ok(ServerMsg::State { states, .. }) => states,
                    Ok(_) => return Err(format!("{}: not a state message", p.display())),
                    Err(e) => return Err(format!("{}: {e}", p.display())),
                }
            }
            _ => return Err("load-config needs exactly one of `path` or `states`".into()),
        };
        self.state.replace(&states)
    }
}

/// TCP debug server. Dropping it stops the accept loop and disconnects
/// every client.
pub struct DebugServer {
    shared: Arc<Shared>,
    addr: SocketAddr,
}

impl DebugServer {
    pub fn bind(addr: impl ToSocketAddrs, program: &Program, options: ServerOptions) -> io::Result<DebugServer> {
        let state = Arc::new(DebugState::new(RuleTree::from_program(program)));
        DebugServer::with_state(addr, state, options)
    }

    pub fn with_state(
        addr: impl ToSocketAddrs,
        state: Arc<DebugState>,
        options: ServerOptions,
    ) -> io::Result<DebugServer> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            state,
            clients: Mutex::new(Vec::new()),
            options,
            shutdown: AtomicBool::new(false),
            published: AtomicU64::new(0),
        });
        let s = shared.clone();
        thread::Builder::new()
            .name("debugsrv-accept".into())
            .spawn(move || accept_loop(listener, s))?;
        Ok(DebugServer { shared, addr })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn state(&self) -> &Arc<DebugState> {
        &self.shared.state
    }

    pub fn client_count(&self) -> usize {
        self.shared.clients.lock().unwrap().len()
    }

    /// Records forwarded to clients since start.
    pub fn published(&self) -> u64 {
        self.shared.published.load(Ordering::Relaxed)
    }

    /// Applies a command as if a client had sent it; the ack is returned
    /// instead of sent.
    pub fn apply(&self, cmd: Command) -> Result<(), String> {
        match cmd {
            Command::SetState {
                rule,
                module,
                state,
                recursive,
                ..
            } => {
                self.shared.state.set(rule, module.as_deref(), state, recursive)?;
            }
            Command::LoadConfig { path, states, .. } => self.shared.load_config(path, states)?,
            Command::SaveConfig { path, .. } => {
                let p = self.shared.options.config_dir.join(path);
                fs::write(&p, self.shared.state.state_msg().to_line())
                    .map_err(|e| format!("{}: {e}", p.display()))?;
                return Ok(());
            }
            Command::Recompile { .. } => return Err("recompile is disabled on this server".into()),
            Command::GetState { .. } | Command::GetTree { .. } => return Ok(()),
        }
        self.shared.broadcast(&self.shared.state.state_msg());
        Ok(())
    }

    pub fn shutdown(&self) {
        if self.shared.shutdown.swap(true, Ordering::SeqCst) {
            return;
        }
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        for c in self.shared.clients.lock().unwrap().drain(..) {
            c.close();
        }
    }
}

impl Drop for DebugServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl LogSink for DebugServer {
    fn publish(&self, rec: &RuleLogRecord) {
        // the states lock is held while queueing so that a state change
        // cannot land between the filter decision and the handoff
        let states = self.shared.state.states.lock().unwrap();
        if !states.get(&rec.rule).is_some_and(|s| s.admits(rec.result)) {
            return;
        }
        let line = ServerMsg::Log {
            v: PROTOCOL_VERSION,
            record: rec.clone(),
        }
        .to_line();
        self.shared.published.fetch_add(1, Ordering::Relaxed);
        self.shared
            .clients
            .lock()
            .unwrap()
            .retain(|c| c.push(line.clone()));
        drop(states);
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>) {
    for conn in listener.incoming() {
        if shared.shutdown.load(Ordering::SeqCst) {
            return;
        }
        let stream = match conn {
            Ok(s) => s,
            Err(e) => {
                log::warn!("debug server accept failed: {e}");
                continue;
            }
        };
        if let Err(e) = connect(stream, &shared) {
            log::warn!("debug client setup failed: {e}");
        }
    }
}

fn connect(stream: TcpStream, shared: &Arc<Shared>) -> io::Result<()> {
    let _ = stream.set_nodelay(true);
    let reader = stream.try_clone()?;
    let client = Arc::new(Client {
        queue: Mutex::new(Queue {
            items: VecDeque::new(),
            dropped: 0,
            reported: 0,
            closed: false,
        }),
        ready: Condvar::new(),
        capacity: shared.options.queue_capacity.max(1),
        stream,
    });
    {
        // hold the states lock so no record or state change slips in
        // between the initial state message and registration
        let states = shared.state.states.lock().unwrap();
        client.push(shared.state.tree_msg().to_line());
        client.push(
            ServerMsg::State {
                v: PROTOCOL_VERSION,
                states: states.clone(),
            }
            .to_line(),
        );
        shared.clients.lock().unwrap().push(client.clone());
    }
    let w = client.clone();
    thread::Builder::new()
        .name("debugsrv-write".into())
        .spawn(move || w.writer())?;
    let s = shared.clone();
    thread::Builder::new()
        .name("debugsrv-read".into())
        .spawn(move || read_loop(reader, client, s))?;
    Ok(())
}

fn read_loop(stream: TcpStream, client: Arc<Client>, shared: Arc<Shared>) {
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Command>(&line) {
            Ok(cmd) => shared.handle(cmd, &client),
            Err(e) => {
                let req = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("req").and_then(|r| r.as_u64()));
                let nack = ServerMsg::Ack {
                    v: PROTOCOL_VERSION,
                    req,
                    ok: false,
                    error: Some(format!("bad command: {e}")),
                };
                client.push(nack.to_line());
            }
        }
    }
    client.close();
    shared
        .clients
        .lock()
        .unwrap()
        .retain(|c| !Arc::ptr_eq(c, &client));
}

#[cfg(test)]
mod tests;
