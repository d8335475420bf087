//! Newline-delimited JSON messages. Every message carries `"v"` and
//! `"kind"` (server to client) or `"cmd"` (client to server).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::tree::ModuleNode;
use crate::engine::RuleLogRecord;

pub const PROTOCOL_VERSION: u32 = 1;

/// Per-rule logging state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LoggingState {
    Always,
    #[default]
    Never,
    IfTrue,
    IfFalse,
}

impl LoggingState {
    pub fn admits(self, result: bool) -> bool {
        match self {
            LoggingState::Always => true,
            LoggingState::Never => false,
            LoggingState::IfTrue => result,
            LoggingState::IfFalse => !result,
        }
    }
}

pub type StateMap = BTreeMap<u32, LoggingState>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ServerMsg {
    Tree {
        v: u32,
        root: String,
        modules: Vec<ModuleNode>,
    },
    /// Effective state of every rule. Also the format of saved
    /// logging configuration files.
    State {
        v: u32,
        #[serde(with = "id_keys")]
        states: StateMap,
    },
    Log {
        v: u32,
        #[serde(flatten)]
        record: RuleLogRecord,
    },
    Ack {
        v: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        req: Option<u64>,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    /// Total number of messages dropped for this client so far; sent just
    /// before the first message after a gap.
    Drops { v: u32, count: u64 },
}

impl ServerMsg {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("messages serialize");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "kebab-case")]
pub enum Command {
    /// Targets exactly one of `rule` or `module`. With `recursive` (the
    /// default) nested rules, or imported modules, are included.
    SetState {
        #[serde(default)]
        req: Option<u64>,
        #[serde(default)]
        rule: Option<u32>,
        #[serde(default)]
        module: Option<String>,
        state: LoggingState,
        #[serde(default = "yes")]
        recursive: bool,
    },
    GetState {
        #[serde(default)]
        req: Option<u64>,
    },
    GetTree {
        #[serde(default)]
        req: Option<u64>,
    },
    SaveConfig {
        #[serde(default)]
        req: Option<u64>,
        path: String,
    },
    /// Loads from `path`, or from inline `states`. Rules missing from the
    /// configuration go back to NEVER.
    LoadConfig {
        #[serde(default)]
        req: Option<u64>,
        #[serde(default)]
        path: Option<String>,
        #[serde(default, with = "opt_id_keys")]
        states: Option<StateMap>,
    },
    Recompile {
        #[serde(default)]
        req: Option<u64>,
    },
}

fn yes() -> bool {
    true
}

impl Command {
    pub fn req(&self) -> Option<u64> {
        match self {
            Command::SetState { req, .. }
            | Command::GetState { req }
            | Command::GetTree { req }
            | Command::SaveConfig { req, .. }
            | Command::LoadConfig { req, .. }
            | Command::Recompile { req } => *req,
        }
    }
}

// Maps inside internally tagged enums are buffered with string keys, which
// integer keys do not parse from; go through strings explicitly.
mod id_keys {
    use std::collections::BTreeMap;

    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::{LoggingState, StateMap};

    pub fn serialize<S: Serializer>(m: &StateMap, s: S) -> Result<S::Ok, S::Error> {
        let m: BTreeMap<String, LoggingState> = m.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        m.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<StateMap, D::Error> {
        BTreeMap::<String, LoggingState>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| {
                k.parse()
                    .map(|k| (k, v))
                    .map_err(|_| D::Error::custom(format!("bad rule id `{k}`")))
            })
            .collect()
    }
}

mod opt_id_keys {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::StateMap;

    pub fn serialize<S: Serializer>(m: &Option<StateMap>, s: S) -> Result<S::Ok, S::Error> {
        match m {
            Some(m) => super::id_keys::serialize(m, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<StateMap>, D::Error> {
        #[derive(Deserialize)]
        struct W(#[serde(with = "super::id_keys")] StateMap);
        Ok(Option::<W>::deserialize(d)?.map(|w| w.0))
    }
}
