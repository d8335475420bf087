//! Dialogue acts: construction, text form, subsumption and the interaction
//! history.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::parser::pretty::{is_bare_const, quote};
use crate::parser::{parse_expr, DaArgValue, ExprKind};
use crate::store::{vocab, Lookup, OntologySchema, Resource, Store, StoreError, Value};

/// Token and frame hierarchy shipped with the compiler. Project ontologies
/// are loaded on top of it.
pub const DEFAULT_ONTOLOGY: &str = include_str!("dialogue_acts.nt");

/// A token, an optional frame and flat string arguments in insertion order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DialogueAct {
    pub token: Resource,
    pub frame: Option<Resource>,
    args: Vec<(String, String)>,
}

impl DialogueAct {
    pub fn new(token: Resource) -> Self {
        DialogueAct {
            token,
            frame: None,
            args: Vec::new(),
        }
    }

    pub fn with_frame(mut self, frame: Resource) -> Self {
        self.frame = Some(frame);
        self
    }

    pub fn with_arg(mut self, key: &str, value: &str) -> Self {
        self.set_arg(key, value);
        self
    }

    /// Sets `key`, replacing an earlier value in place.
    pub fn set_arg(&mut self, key: &str, value: &str) {
        match self.args.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => *v = value.to_string(),
            None => self.args.push((key.to_string(), value.to_string())),
        }
    }

    pub fn arg(&self, key: &str) -> Option<&str> {
        self.args
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn args(&self) -> &[(String, String)] {
        &self.args
    }

    /// Parses the textual form `#Token(Frame, k=v, ...)`, resolving names
    /// against the schema. Argument values must be constants.
    pub fn parse(text: &str, schema: &OntologySchema) -> Result<DialogueAct, String> {
        let e = parse_expr(text.trim()).map_err(|e| e.to_string())?;
        let ExprKind::Da(lit) = e.kind else {
            return Err(format!("not a dialogue act: {text}"));
        };
        let token = resolve(schema, &lit.token)?;
        if !schema.is_da_token(&token) {
            return Err(format!("`{}` is not a dialogue act type", lit.token));
        }
        let mut da = DialogueAct::new(token);
        if let Some(f) = &lit.frame {
            let frame = resolve(schema, f)?;
            if !schema.is_frame(&frame) {
                return Err(format!("`{f}` is not a frame"));
            }
            da.frame = Some(frame);
        }
        for a in &lit.args {
            match &a.value {
                DaArgValue::Const(v) => da.set_arg(&a.key, v),
                DaArgValue::Expr(_) => {
                    return Err(format!("argument `{}` must be a constant", a.key))
                }
            }
        }
        Ok(da)
    }

    /// Parses only the arguments of a textual act; token and frame names
    /// are ignored.
    fn parse_args(text: &str) -> Result<Vec<(String, String)>, String> {
        let e = parse_expr(text).map_err(|e| e.to_string())?;
        let ExprKind::Da(lit) = e.kind else {
            return Err(format!("not a dialogue act: {text}"));
        };
        lit.args
            .into_iter()
            .map(|a| match a.value {
                DaArgValue::Const(v) => Ok((a.key, v)),
                DaArgValue::Expr(_) => Err(format!("argument `{}` must be a constant", a.key)),
            })
            .collect()
    }
}

fn resolve(schema: &OntologySchema, name: &str) -> Result<Resource, String> {
    match schema.lookup_class(name) {
        Lookup::Found(c) => Ok(c.clone()),
        Lookup::Missing => Err(format!("unknown class `{name}`")),
        Lookup::Ambiguous(_) => Err(format!("class name `{name}` is ambiguous")),
    }
}

impl fmt::Display for DialogueAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.token.local_name())?;
        if self.frame.is_none() && self.args.is_empty() {
            return Ok(());
        }
        f.write_str("(")?;
        let mut parts = Vec::new();
        if let Some(fr) = &self.frame {
            parts.push(fr.local_name().to_string());
        }
        for (k, v) in &self.args {
            if is_bare_const(v) {
                parts.push(format!("{k}={v}"));
            } else {
                parts.push(format!("{k}={}", quote(v)));
            }
        }
        write!(f, "{})", parts.join(", "))
    }
}

/// `general` subsumes `specific` when the token and frame of `specific` are
/// subclasses of those of `general` and every argument of `general` occurs
/// in `specific` with the same value.
pub fn subsumes(general: &DialogueAct, specific: &DialogueAct, schema: &OntologySchema) -> bool {
    schema.subsumed_by(&specific.token, &general.token)
        && match (&general.frame, &specific.frame) {
            (None, _) => true,
            (Some(g), Some(s)) => schema.subsumed_by(s, g),
            (Some(_), None) => false,
        }
        && general
            .args
            .iter()
            .all(|(k, v)| specific.arg(k) == Some(v.as_str()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Emitted,
    Received,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Emitted => "emitted",
            Direction::Received => "received",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistoryEntry {
    pub subject: Resource,
    pub da: DialogueAct,
    pub direction: Direction,
    pub t: u64,
    pub session: i64,
}

/// Interaction history. Entries live in the store as reified acts (type,
/// frame, direction, session and canonical text); this keeps an in-memory
/// copy for fast session queries.
#[derive(Clone, Debug)]
pub struct History {
    entries: Vec<HistoryEntry>,
    session: i64,
}

impl Default for History {
    fn default() -> Self {
        History::new()
    }
}

impl History {
    pub fn new() -> Self {
        History {
            entries: Vec::new(),
            session: 1,
        }
    }

    /// Rebuilds the history from a store snapshot. The current session is
    /// one past the highest session found.
    pub fn from_store(store: &Store) -> Result<History, String> {
        let direction = Resource::new(vocab::RUDI_DIRECTION);
        let session_p = Resource::new(vocab::RUDI_SESSION);
        let frame_p = Resource::new(vocab::RUDI_FRAME);
        let text_p = Resource::new(vocab::RUDI_DA);
        let mut entries = Vec::new();
        for t in store.tuples() {
            if t.predicate != direction {
                continue;
            }
            let s = &t.subject;
            let dir = match &t.object {
                Value::Str(d) if d == "emitted" => Direction::Emitted,
                Value::Str(d) if d == "received" => Direction::Received,
                other => return Err(format!("{s}: bad direction {other}")),
            };
            let token = store
                .types_of(s)
                .into_iter()
                .find(|c| store.schema().is_da_token(c))
                .ok_or_else(|| format!("{s}: no dialogue act type"))?;
            let mut da = DialogueAct::new(token);
            if let Some(Value::Resource(f)) = store.latest_value(s, &frame_p) {
                da.frame = Some(f.clone());
            }
            if let Some(Value::Str(text)) = store.latest_value(s, &text_p) {
                da.args = DialogueAct::parse_args(text)?;
            }
            let session = match store.latest_value(s, &session_p) {
                Some(Value::Int(n)) => *n,
                _ => return Err(format!("{s}: missing session")),
            };
            entries.push(HistoryEntry {
                subject: s.clone(),
                da,
                direction: dir,
                t: t.t,
                session,
            });
        }
        let session = entries.iter().map(|e| e.session).max().unwrap_or(0) + 1;
        Ok(History { entries, session })
    }

    pub fn session(&self) -> i64 {
        self.session
    }

    pub fn new_session(&mut self) -> i64 {
        self.session += 1;
        self.session
    }

    pub fn entries(&self) -> &[HistoryEntry] {
        &self.entries
    }

    /// Appends `da` to the history and reifies it in the store.
    pub fn record(
        &mut self,
        store: &mut Store,
        da: &DialogueAct,
        direction: Direction,
    ) -> Result<HistoryEntry, StoreError> {
        let subject = store.create_instance(&da.token)?;
        if let Some(f) = &da.frame {
            store.insert(
                subject.clone(),
                Resource::new(vocab::RUDI_FRAME),
                Value::Resource(f.clone()),
            )?;
        }
        store.insert(
            subject.clone(),
            Resource::new(vocab::RUDI_SESSION),
            Value::Int(self.session),
        )?;
        store.insert(
            subject.clone(),
            Resource::new(vocab::RUDI_DA),
            Value::Str(da.to_string()),
        )?;
        let t = store.insert(
            subject.clone(),
            Resource::new(vocab::RUDI_DIRECTION),
            Value::Str(direction.as_str().to_string()),
        )?;
        let entry = HistoryEntry {
            subject,
            da: da.clone(),
            direction,
            t: t.t,
            session: self.session,
        };
        self.entries.push(entry.clone());
        Ok(entry)
    }

    /// Whether an act with `direction` in the current session is subsumed
    /// by `pattern`.
    pub fn in_session(
        &self,
        pattern: &DialogueAct,
        direction: Direction,
        schema: &OntologySchema,
    ) -> bool {
        self.entries.iter().rev().any(|e| {
            e.session == self.session
                && e.direction == direction
                && subsumes(pattern, &e.da, schema)
        })
    }

    pub fn said_in_session(&self, pattern: &DialogueAct, schema: &OntologySchema) -> bool {
        self.in_session(pattern, Direction::Emitted, schema)
    }

    pub fn received_in_session(&self, pattern: &DialogueAct, schema: &OntologySchema) -> bool {
        self.in_session(pattern, Direction::Received, schema)
    }
}
