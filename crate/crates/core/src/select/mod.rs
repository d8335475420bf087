//! Proposal selection: picks one of the frozen proposals of a round.
//!
//! Built-ins are `first` (lowest rule id, then creation order) and a seeded
//! uniform `random`. An external selector speaks newline-delimited JSON over
//! a child process's pipes or a TCP connection:
//!
//! ```text
//! -> {"v":1,"id":7,"proposals":[{"label":"greet","rule":1,"iteration":1}],"features":{"user.name":"Joe"}}
//! <- {"v":1,"id":7,"label":"greet"}
//! ```
//!
//! A missing, late or invalid answer falls back to `first`.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Protocol version of the external selection exchange.
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalInfo {
    pub label: String,
    /// Id of the rule that created the proposal.
    pub rule: u32,
    /// Iteration of the round in which it was created.
    pub iteration: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionRequest {
    /// In creation order; never empty.
    pub proposals: Vec<ProposalInfo>,
    pub features: BTreeMap<String, serde_json::Value>,
}

pub trait Selector: Send {
    /// Returns the label of the chosen proposal.
    fn select(&mut self, req: &SelectionRequest) -> String;
}

/// Lowest rule id; ties go to the proposal created first.
pub fn first(req: &SelectionRequest) -> String {
    req.proposals
        .iter()
        .enumerate()
        .min_by_key(|(i, p)| (p.rule, *i))
        .map(|(_, p)| p.label.clone())
        .expect("selection request without proposals")
}

#[derive(Clone, Debug, Default)]
pub struct First;

impl Selector for First {
    fn select(&mut self, req: &SelectionRequest) -> String {
        first(req)
    }
}

/// Uniform choice from a ChaCha8 stream seeded once.
#[derive(Clone, Debug)]
pub struct SeededRandom {
    rng: ChaCha8Rng,
}

impl SeededRandom {
    pub fn new(seed: u64) -> Self {
        SeededRandom {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Selector for SeededRandom {
    fn select(&mut self, req: &SelectionRequest) -> String {
        let i = self.rng.random_range(0..req.proposals.len());
        req.proposals[i].label.clone()
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    v: u32,
    id: u64,
    proposals: &'a [ProposalInfo],
    features: &'a BTreeMap<String, serde_json::Value>,
}

#[derive(Deserialize)]
struct WireResponse {
    v: u32,
    id: u64,
    label: String,
}

enum Transport {
    Process { child: Child, stdin: ChildStdin },
    Tcp { addr: String, stream: Option<TcpStream> },
}

/// Selector in another process. Any failure falls back to [`first`] and is
/// logged as a warning; the engine never waits longer than the timeout.
pub struct External {
    transport: Transport,
    rx: Option<Receiver<String>>,
    timeout: Duration,
    next_id: u64,
    fallbacks: u64,
}

fn spawn_reader<R: std::io::Read + Send + 'static>(r: R) -> Receiver<String> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in BufReader::new(r).lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    rx
}

impl External {
    /// Starts `command` (program and arguments) as a child process.
    pub fn spawn(command: &[String], timeout: Duration) -> std::io::Result<External> {
        let (prog, args) = command.split_first().ok_or_else(|| {
            std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty selector command")
        })?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let rx = spawn_reader(child.stdout.take().expect("piped stdout"));
        Ok(External {
            transport: Transport::Process { child, stdin },
            rx: Some(rx),
            timeout,
            next_id: 1,
            fallbacks: 0,
        })
    }

    /// Connects to a selector listening on `addr`. Connection failures are
    /// not fatal: the selector reconnects on the next request.
    pub fn connect(addr: &str, timeout: Duration) -> External {
        let mut ext = External {
            transport: Transport::Tcp {
                addr: addr.to_string(),
                stream: None,
            },
            rx: None,
            timeout,
            next_id: 1,
            fallbacks: 0,
        };
        ext.reconnect();
        ext
    }

    /// How often the fallback was used.
    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    fn reconnect(&mut self) {
        let Transport::Tcp { addr, stream } = &mut self.transport else {
            return;
        };
        let Some(sock) = addr.to_socket_addrs().ok().and_then(|mut a| a.next()) else {
            return;
        };
        match TcpStream::connect_timeout(&sock, self.timeout) {
            Ok(s) => {
                let _ = s.set_nodelay(true);
                match s.try_clone() {
                    Ok(r) => {
                        self.rx = Some(spawn_reader(r));
                        *stream = Some(s);
                    }
                    Err(e) => log::warn!("selector {addr}: {e}"),
                }
            }
            Err(e) => log::warn!("selector {addr}: {e}"),
        }
    }

    fn send(&mut self, line: &str) -> std::io::Result<()> {
        if let Transport::Tcp { stream: None, .. } = self.transport {
            self.reconnect();
        }
        let w: &mut dyn Write = match &mut self.transport {
            Transport::Process { stdin, .. } => stdin,
            Transport::Tcp {
                stream: Some(s), ..
            } => s,
            Transport::Tcp { stream: None, .. } => {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::NotConnected,
                    "selector not connected",
                ))
            }
        };
        w.write_all(line.as_bytes())?;
        w.write_all(b"\n")?;
        w.flush()
    }

    fn ask(&mut self, req: &SelectionRequest) -> Result<String, String> {
        let id = self.next_id;
        self.next_id += 1;
        let line = serde_json::to_string(&WireRequest {
            v: PROTOCOL_VERSION,
            id,
            proposals: &req.proposals,
            features: &req.features,
        })
        .map_err(|e| e.to_string())?;
        if let Err(e) = self.send(&line) {
            if let Transport::Tcp { stream, .. } = &mut self.transport {
                *stream = None;
            }
            return Err(e.to_string());
        }
        let rx = self.rx.as_ref().ok_or("selector not connected")?;
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match rx.recv_timeout(left) {
                Ok(text) => {
                    let Ok(resp) = serde_json::from_str::<WireResponse>(&text) else {
                        log::warn!("selector sent malformed response: {text}");
                        continue;
                    };
                    if resp.id != id {
                        // answer to an earlier, timed-out request
                        continue;
                    }
                    if resp.v != PROTOCOL_VERSION {
                        return Err(format!("unsupported protocol version {}", resp.v));
                    }
                    return Ok(resp.label);
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(format!("no answer within {} ms", self.timeout.as_millis()))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.rx = None;
                    if let Transport::Tcp { stream, .. } = &mut self.transport {
                        *stream = None;
                    }
                    return Err("selector closed the connection".into());
                }
            }
        }
    }
}

impl Selector for External {
    fn select(&mut self, req: &SelectionRequest) -> String {
        match self.ask(req) {
            Ok(label) if req.proposals.iter().any(|p| p.label == label) => label,
            Ok(label) => {
                log::warn!("selector chose unknown proposal `{label}`, using first");
                self.fallbacks += 1;
                first(req)
            }
            Err(e) => {
                log::warn!("selector failed ({e}), using first");
                self.fallbacks += 1;
                first(req)
            }
        }
    }
}

impl Drop for External {
    fn drop(&mut self) {
        if let Transport::Process { child, .. } = &mut self.transport {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Selection component as written in a project file.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SelectionConfig {
    #[default]
    First,
    Random {
        seed: u64,
    },
    External {
        /// Program and arguments of a child process.
        #[serde(default)]
        command: Vec<String>,
        /// `host:port` of a listening selector; used when `command` is empty.
        #[serde(default)]
        connect: Option<String>,
        #[serde(default = "default_timeout_ms", rename = "timeout-ms")]
        timeout_ms: u64,
    },
}

fn default_timeout_ms() -> u64 {
    500
}

impl SelectionConfig {
    pub fn build(&self) -> std::io::Result<Box<dyn Selector>> {
        Ok(match self {
            SelectionConfig::First => Box::new(First),
            SelectionConfig::Random { seed } => Box::new(SeededRandom::new(*seed)),
            SelectionConfig::External {
                command,
                connect,
                timeout_ms,
            } => {
                let timeout = Duration::from_millis(*timeout_ms);
                if !command.is_empty() {
                    Box::new(External::spawn(command, timeout)?)
                } else if let Some(addr) = connect {
                    Box::new(External::connect(addr, timeout))
                } else {
                    return Err(std::io::Error::new(
                        std::io::ErrorKind::InvalidInput,
                        "external selection needs `command` or `connect`",
                    ));
                }
            }
        })
    }
}
