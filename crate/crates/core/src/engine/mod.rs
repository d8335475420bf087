//! The information-state update loop.
//!
//! Every event runs a round: all rules are evaluated in link order until an
//! iteration changes neither the store nor a global and adds no proposal.
//! One proposal is then selected and executed; if that changed the state,
//! another round follows. Timers fire in fire-at order, each followed by a
//! fresh round.

mod eval;
mod value;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dacts::{DialogueAct, Direction, History};
use crate::lower::{IrItem, IrRule, Instr, Program};
use crate::select::{ProposalInfo, SelectionRequest, Selector};
use crate::store::{Resource, Store, StoreError, Value};

pub use value::Val;

/// Local variables of one rule evaluation or frozen block.
pub type Env = BTreeMap<String, Val>;

/// Host implementation of a declared extension function.
pub type ExtensionFn = Box<dyn FnMut(&[Val]) -> Result<Val, String> + Send>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Maximum iterations of one round.
    pub iteration_cap: u32,
    /// Maximum rounds (proposal executions) per event.
    pub round_cap: u32,
    pub call_depth_cap: u32,
    /// After each fixed point, run one more iteration on a copy of the state
    /// and fail if it changes anything.
    pub check_idempotence: bool,
    /// Dotted paths (`user.name`) sent to the selector as state features.
    pub features: Vec<String>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            iteration_cap: 100,
            round_cap: 10,
            call_depth_cap: 64,
            check_idempotence: false,
            features: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("no fixed point after {cap} iterations")]
    IterationLimitExceeded { cap: u32 },
    #[error("state still changing after {cap} rounds")]
    RoundLimitExceeded { cap: u32 },
    #[error("fixed point is not idempotent: one more iteration changed the state")]
    NotIdempotent,
    #[error("clock cannot move back from {now} to {to}")]
    ClockBackwards { now: u64, to: u64 },
    #[error("{}", runtime_text(*.rule, .message))]
    Runtime { rule: Option<u32>, message: String },
}

fn runtime_text(rule: Option<u32>, message: &str) -> String {
    match rule {
        Some(r) => format!("rule {r}: {message}"),
        None => message.to_string(),
    }
}

/// Something that happened outside the agent.
#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Received(DialogueAct),
    /// Assertion from an external source: sensor data, application state.
    StoreUpdate {
        subject: Resource,
        predicate: Resource,
        value: Value,
    },
    NewSession,
}

/// A dialogue act sent by the agent.
#[derive(Clone, Debug, PartialEq)]
pub struct Emission {
    pub t: u64,
    pub da: DialogueAct,
}

impl fmt::Display for Emission {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} emit {}", self.t, self.da)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermValue {
    True,
    False,
    /// Not evaluated because shortcut logic already decided the result.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermLog {
    pub id: u32,
    pub text: String,
    pub value: TermValue,
}

/// One evaluation of one rule condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleLogRecord {
    pub t: u64,
    pub iteration: u32,
    pub rule: u32,
    pub label: String,
    pub module: String,
    pub result: bool,
    pub terms: Vec<TermLog>,
}

/// Receiver of rule log records, called on the engine thread.
pub trait LogSink: Send + Sync {
    fn publish(&self, rec: &RuleLogRecord);
}

#[derive(Clone, Debug)]
pub struct Proposal {
    pub label: String,
    pub rule: u32,
    pub iteration: u32,
    pub t: u64,
    /// Locals captured when the proposal was made.
    pub env: Env,
    pub body: Vec<Instr>,
}

#[derive(Clone, Debug)]
pub struct TimeoutEntry {
    pub name: String,
    pub fire_at: u64,
    pub rule: u32,
    pub env: Env,
    pub body: Vec<Instr>,
    seq: u64,
}

/// The mutable part of an agent: store, history, globals and timers.
#[derive(Clone, Debug)]
pub struct AgentState {
    pub store: Store,
    pub history: History,
    pub globals: BTreeMap<(String, String), Val>,
    pub timeouts: Vec<TimeoutEntry>,
    /// Name of the timeout whose body and round are running; it counts as
    /// active until the round ends.
    pub firing: Option<String>,
    pub clock: u64,
    globals_version: u64,
    timeout_seq: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub rounds: u64,
    pub iterations: u64,
    /// Iterations of the most recent round.
    pub last_round_iterations: u32,
    pub timeouts_registered: u64,
    pub timeouts_rejected: u64,
    pub timeouts_fired: u64,
    pub proposals_executed: u64,
}

pub struct Engine {
    program: Arc<Program>,
    functions: HashMap<(String, String), (usize, usize)>,
    state: AgentState,
    selector: Box<dyn Selector>,
    extensions: BTreeMap<String, ExtensionFn>,
    config: EngineConfig,
    sinks: Vec<Arc<dyn LogSink>>,
    logs: Vec<RuleLogRecord>,
    keep_logs: bool,
    quiet: bool,
    pending: Vec<Proposal>,
    outbox: Vec<Emission>,
    stats: Stats,
    current_rule: Option<u32>,
    iteration: u32,
    depth: u32,
}

type R<T> = Result<T, EngineError>;

impl Engine {
    /// Creates an engine over `store`. The interaction history is rebuilt
    /// from the store, so a loaded snapshot continues in a new session.
    pub fn new(
        program: Program,
        store: Store,
        selector: Box<dyn Selector>,
        config: EngineConfig,
    ) -> R<Engine> {
        let history = History::from_store(&store).map_err(|message| EngineError::Runtime {
            rule: None,
            message,
        })?;
        let mut functions = HashMap::new();
        for (mi, m) in program.modules.iter().enumerate() {
            for (ii, item) in m.items.iter().enumerate() {
                if let IrItem::Function(f) = item {
                    functions.insert((m.name.clone(), f.name.clone()), (mi, ii));
                }
            }
        }
        Ok(Engine {
            program: Arc::new(program),
            functions,
            state: AgentState {
                store,
                history,
                globals: BTreeMap::new(),
                timeouts: Vec::new(),
                firing: None,
                clock: 0,
                globals_version: 0,
                timeout_seq: 0,
            },
            selector,
            extensions: BTreeMap::new(),
            config,
            sinks: Vec::new(),
            logs: Vec::new(),
            keep_logs: false,
            quiet: false,
            pending: Vec::new(),
            outbox: Vec::new(),
            stats: Stats::default(),
            current_rule: None,
            iteration: 0,
            depth: 0,
        })
    }

    /// Engine over a fresh store loaded from the program's ontology.
    pub fn from_program(
        program: Program,
        selector: Box<dyn Selector>,
        config: EngineConfig,
    ) -> R<Engine> {
        let store = Store::load(&program.ontology).map_err(store_err(None))?;
        Engine::new(program, store, selector, config)
    }

    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn store(&self) -> &Store {
        &self.state.store
    }

    pub fn clock(&self) -> u64 {
        self.state.clock
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn global(&self, module: &str, name: &str) -> Option<&Val> {
        self.state
            .globals
            .get(&(module.to_string(), name.to_string()))
    }

    pub fn register_extension(&mut self, name: &str, f: ExtensionFn) {
        self.extensions.insert(name.to_string(), f);
    }

    pub fn add_sink(&mut self, sink: Arc<dyn LogSink>) {
        self.sinks.push(sink);
    }

    /// Keeps every log record in memory for [`Engine::take_logs`].
    pub fn keep_logs(&mut self, keep: bool) {
        self.keep_logs = keep;
    }

    pub fn take_logs(&mut self) -> Vec<RuleLogRecord> {
        std::mem::take(&mut self.logs)
    }

    /// Active timeouts as `(name, fire-at)`.
    pub fn active_timeouts(&self) -> Vec<(&str, u64)> {
        self.state
            .timeouts
            .iter()
            .map(|t| (t.name.as_str(), t.fire_at))
            .collect()
    }

    /// Runs the top-level definitions of all modules, then one round.
    pub fn start(&mut self) -> R<Vec<Emission>> {
        let program = Arc::clone(&self.program);
        self.state.store.set_time(self.state.clock);
        for r in &program.order {
            if let IrItem::Init(block) = program.item(*r) {
                let mut env = Env::new();
                self.exec_block(block, &mut env)?;
            }
        }
        self.pending.clear();
        self.round()?;
        Ok(std::mem::take(&mut self.outbox))
    }

    /// Applies `event` at the current time and runs rounds until the state
    /// settles. Returns the acts emitted meanwhile.
    pub fn process_event(&mut self, event: Event) -> R<Vec<Emission>> {
        self.state.store.set_time(self.state.clock);
        match event {
            Event::Received(da) => {
                self.state
                    .history
                    .record(&mut self.state.store, &da, Direction::Received)
                    .map_err(store_err(None))?;
            }
            Event::StoreUpdate {
                subject,
                predicate,
                value,
            } => {
                let value = if value == Value::Retracted {
                    None
                } else {
                    Some(value)
                };
                match value {
                    Some(v) => self.state.store.assert_value(subject, predicate, v),
                    None => self.state.store.clear(subject, predicate),
                }
                .map_err(store_err(None))?;
            }
            Event::NewSession => {
                self.state.history.new_session();
            }
        }
        self.pending.clear();
        self.round()?;
        Ok(std::mem::take(&mut self.outbox))
    }

    /// Moves the clock to `to`, firing due timeouts in fire-at order (ties in
    /// registration order). Each fired body is followed by a fresh round.
    pub fn advance_clock(&mut self, to: u64) -> R<Vec<Emission>> {
        if to < self.state.clock {
            return Err(EngineError::ClockBackwards {
                now: self.state.clock,
                to,
            });
        }
        while let Some(i) = self
            .state
            .timeouts
            .iter()
            .enumerate()
            .filter(|(_, t)| t.fire_at <= to)
            .min_by_key(|(_, t)| (t.fire_at, t.seq))
            .map(|(i, _)| i)
        {
            let entry = self.state.timeouts.remove(i);
            self.state.clock = entry.fire_at;
            self.state.store.set_time(entry.fire_at);
            self.stats.timeouts_fired += 1;
            log::debug!("timeout `{}` fired at {}", entry.name, entry.fire_at);
            self.pending.clear();
            self.iteration = 0;
            self.current_rule = Some(entry.rule);
            self.state.firing = Some(entry.name.clone());
            let mut env = entry.env;
            let r = self.exec_block(&entry.body, &mut env);
            self.current_rule = None;
            let r = r.and_then(|_| self.round());
            self.state.firing = None;
            r?;
        }
        self.state.clock = to;
        self.state.store.set_time(to);
        Ok(std::mem::take(&mut self.outbox))
    }

    /// Registers a named timeout unless one with that name is active.
    pub fn register_timeout(&mut self, name: &str, delay_ms: u64, env: Env, body: Vec<Instr>) -> bool {
        if self.timeout_active(name) {
            self.stats.timeouts_rejected += 1;
            return false;
        }
        self.state.timeout_seq += 1;
        self.state.timeouts.push(TimeoutEntry {
            name: name.to_string(),
            fire_at: self.state.clock + delay_ms,
            rule: self.current_rule.unwrap_or(u32::MAX),
            env,
            body,
            seq: self.state.timeout_seq,
        });
        self.stats.timeouts_registered += 1;
        true
    }

    fn timeout_active(&self, name: &str) -> bool {
        self.state.firing.as_deref() == Some(name)
            || self.state.timeouts.iter().any(|t| t.name == name)
    }

    fn round(&mut self) -> R<()> {
        for _ in 0..self.config.round_cap {
            self.stats.rounds += 1;
            self.fixed_point()?;
            if self.pending.is_empty() {
                return Ok(());
            }
            let chosen = self.choose();
            self.pending.clear();
            let before = self.fingerprint();
            self.stats.proposals_executed += 1;
            log::debug!("executing proposal `{}`", chosen.label);
            self.current_rule = Some(chosen.rule);
            let mut env = chosen.env;
            let r = self.exec_block(&chosen.body, &mut env);
            self.current_rule = None;
            r?;
            if self.fingerprint() == before {
                return Ok(());
            }
        }
        Err(EngineError::RoundLimitExceeded {
            cap: self.config.round_cap,
        })
    }

    fn fingerprint(&self) -> (usize, u64) {
        (self.state.store.len(), self.state.globals_version)
    }

    fn fixed_point(&mut self) -> R<()> {
        self.iteration = 0;
        loop {
            let changed = self.iterate()?;
            if !changed {
                break;
            }
            if self.iteration >= self.config.iteration_cap {
                self.stats.last_round_iterations = self.iteration;
                return Err(EngineError::IterationLimitExceeded {
                    cap: self.config.iteration_cap,
                });
            }
        }
        self.stats.last_round_iterations = self.iteration;
        if self.config.check_idempotence {
            self.check_idempotent()?;
        }
        Ok(())
    }

    /// One pass over all top-level rules; true if it changed anything.
    fn iterate(&mut self) -> R<bool> {
        let program = Arc::clone(&self.program);
        let before = (self.fingerprint(), self.pending.len());
        self.iteration += 1;
        self.stats.iterations += 1;
        for rule in program.rules() {
            let mut env = Env::new();
            self.eval_rule(rule, &mut env)?;
        }
        Ok((self.fingerprint(), self.pending.len()) != before)
    }

    fn check_idempotent(&mut self) -> R<()> {
        let saved = (
            self.state.clone(),
            self.pending.clone(),
            self.outbox.clone(),
            self.stats.clone(),
            self.iteration,
        );
        self.quiet = true;
        let changed = self.iterate();
        self.quiet = false;
        let (state, pending, outbox, stats, iteration) = saved;
        self.state = state;
        self.pending = pending;
        self.outbox = outbox;
        self.stats = stats;
        self.iteration = iteration;
        if changed? {
            return Err(EngineError::NotIdempotent);
        }
        Ok(())
    }

    fn choose(&mut self) -> Proposal {
        let req = SelectionRequest {
            proposals: self
                .pending
                .iter()
                .map(|p| ProposalInfo {
                    label: p.label.clone(),
                    rule: p.rule,
                    iteration: p.iteration,
                })
                .collect(),
            features: self.features(),
        };
        let label = self.selector.select(&req);
        let i = match self.pending.iter().position(|p| p.label == label) {
            Some(i) => i,
            None => {
                log::warn!("selector returned unknown proposal `{label}`, using first");
                let first = crate::select::first(&req);
                self.pending
                    .iter()
                    .position(|p| p.label == first)
                    .expect("first is a member")
            }
        };
        self.pending.swap_remove(i)
    }

    /// Values of the configured feature paths. The first segment names a
    /// global, the rest are property local names.
    fn features(&self) -> BTreeMap<String, serde_json::Value> {
        let mut out = BTreeMap::new();
        for path in &self.config.features {
            let mut segs = path.split('.');
            let head = segs.next().unwrap_or_default();
            let mut v = self
                .state
                .globals
                .iter()
                .find(|((_, n), _)| n == head)
                .map(|(_, v)| v.clone())
                .unwrap_or_default();
            for seg in segs {
                v = match v {
                    Val::Object(r) => self
                        .state
                        .store
                        .schema()
                        .lookup_properties(seg)
                        .iter()
                        .find_map(|p| self.state.store.latest_value(&r, p))
                        .map(Val::from_store)
                        .unwrap_or_default(),
                    Val::Da(d) => d.arg(seg).map(|s| Val::Str(s.to_string())).unwrap_or_default(),
                    _ => Val::Absent,
                };
            }
            out.insert(path.clone(), v.to_json());
        }
        out
    }

    fn publish(&mut self, rec: RuleLogRecord) {
        if self.quiet {
            return;
        }
        for s in &self.sinks {
            s.publish(&rec);
        }
        if self.keep_logs {
            self.logs.push(rec);
        }
    }

    fn emit(&mut self, da: DialogueAct) -> R<()> {
        let rule = self.current_rule;
        self.state
            .history
            .record(&mut self.state.store, &da, Direction::Emitted)
            .map_err(store_err(rule))?;
        self.outbox.push(Emission {
            t: self.state.clock,
            da,
        });
        Ok(())
    }

    fn rule_of(&self, rule: &IrRule) -> RuleLogRecord {
        RuleLogRecord {
            t: self.state.clock,
            iteration: self.iteration,
            rule: rule.id,
            label: rule.label.clone(),
            module: rule.module.clone(),
            result: false,
            terms: Vec::new(),
        }
    }
}

fn store_err(rule: Option<u32>) -> impl Fn(StoreError) -> EngineError {
    move |e| EngineError::Runtime {
        rule,
        message: e.to_string(),
    }
}
