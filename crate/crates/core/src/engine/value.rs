use std::fmt;

use crate::dacts::DialogueAct;
use crate::lower::Const;
use crate::parser::pretty::decimal_text;
use crate::store::{Resource, Value};

/// Runtime value. `Absent` is the result of reading something that does not
/// exist: an unset variable, property or argument.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum Val {
    #[default]
    Absent,
    Int(i64),
    Decimal(f64),
    Str(String),
    Bool(bool),
    /// Milliseconds.
    Time(i64),
    Object(Resource),
    Class(Resource),
    Da(DialogueAct),
    /// Current values of a non-functional property.
    List(Vec<Val>),
}

impl Val {
    /// Absent values and empty collections do not exist.
    pub fn exists(&self) -> bool {
        match self {
            Val::Absent => false,
            Val::List(v) => !v.is_empty(),
            _ => true,
        }
    }

    pub fn from_store(v: &Value) -> Val {
        match v {
            Value::Resource(r) => Val::Object(r.clone()),
            Value::Str(s) => Val::Str(s.clone()),
            Value::Int(n) => Val::Int(*n),
            Value::Decimal(d) => Val::Decimal(*d),
            Value::Bool(b) => Val::Bool(*b),
            Value::Timestamp(t) => Val::Time(*t),
            Value::Retracted => Val::Absent,
        }
    }

    /// Store form of a scalar or object; `None` for values the store cannot
    /// hold.
    pub fn to_store(&self) -> Option<Value> {
        Some(match self {
            Val::Int(n) => Value::Int(*n),
            Val::Decimal(d) => Value::Decimal(*d),
            Val::Str(s) => Value::Str(s.clone()),
            Val::Bool(b) => Value::Bool(*b),
            Val::Time(t) => Value::Timestamp(*t),
            Val::Object(r) | Val::Class(r) => Value::Resource(r.clone()),
            Val::Absent | Val::Da(_) | Val::List(_) => return None,
        })
    }

    /// Text used in interpolation, concatenation and act arguments. Objects
    /// and classes render as their local name.
    pub fn render(&self) -> String {
        match self {
            Val::Absent => String::new(),
            Val::Int(n) | Val::Time(n) => n.to_string(),
            Val::Decimal(d) => decimal_text(*d),
            Val::Str(s) => s.clone(),
            Val::Bool(b) => b.to_string(),
            Val::Object(r) | Val::Class(r) => r.local_name().to_string(),
            Val::Da(d) => d.to_string(),
            Val::List(items) => items.iter().map(Val::render).collect::<Vec<_>>().join(", "),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::Value as J;
        match self {
            Val::Absent => J::Null,
            Val::Int(n) | Val::Time(n) => J::from(*n),
            Val::Decimal(d) => J::from(*d),
            Val::Bool(b) => J::Bool(*b),
            Val::List(items) => J::Array(items.iter().map(Val::to_json).collect()),
            other => J::String(other.render()),
        }
    }

    pub(crate) fn kind(&self) -> &'static str {
        match self {
            Val::Absent => "absent",
            Val::Int(_) => "int",
            Val::Decimal(_) => "decimal",
            Val::Str(_) => "string",
            Val::Bool(_) => "boolean",
            Val::Time(_) => "datetime",
            Val::Object(_) => "object",
            Val::Class(_) => "class",
            Val::Da(_) => "dialogue act",
            Val::List(_) => "collection",
        }
    }
}

impl From<&Const> for Val {
    fn from(c: &Const) -> Val {
        match c {
            Const::Int(n) => Val::Int(*n),
            Const::Decimal(d) => Val::Decimal(*d),
            Const::Str(s) => Val::Str(s.clone()),
            Const::Bool(b) => Val::Bool(*b),
            Const::Time(t) => Val::Time(*t),
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Absent => f.write_str("<absent>"),
            Val::Str(s) => write!(f, "{s:?}"),
            other => f.write_str(&other.render()),
        }
    }
}
