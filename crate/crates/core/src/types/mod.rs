//! Type checking and inference against the ontology schema.

mod check;
mod program;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::parser::{BinOp, ExprId, ModuleAst, Span};
use crate::store::{OntologySchema, PropertySpec, Range, Resource, XsdType};

pub use check::{check_module, infer_expr_type};
pub use program::{check_program, CheckedProgram, MapSources, SourceProvider};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SemType {
    Int,
    Decimal,
    String,
    Boolean,
    DateTime,
    /// An individual of the class.
    Object(Resource),
    /// The class itself, used as a value (`x <= Animate`).
    Class(Resource),
    DialogueAct,
    Collection(Box<SemType>),
    Function(Box<Signature>),
    Void,
    Unknown,
}

impl SemType {
    pub fn is_numeric(&self) -> bool {
        matches!(self, SemType::Int | SemType::Decimal)
    }

    pub fn is_scalar(&self) -> bool {
        matches!(
            self,
            SemType::Int | SemType::Decimal | SemType::String | SemType::Boolean | SemType::DateTime
        )
    }

    pub fn from_xsd(x: XsdType) -> SemType {
        match x {
            XsdType::Int => SemType::Int,
            XsdType::Decimal => SemType::Decimal,
            XsdType::String => SemType::String,
            XsdType::Boolean => SemType::Boolean,
            XsdType::DateTime => SemType::DateTime,
        }
    }

    /// Type of a read of property `spec`.
    pub fn of_property(spec: &PropertySpec) -> SemType {
        let elem = match &spec.range {
            Range::Xsd(x) => SemType::from_xsd(*x),
            Range::Class(c) => SemType::Object(c.clone()),
        };
        if spec.functional {
            elem
        } else {
            SemType::Collection(Box::new(elem))
        }
    }

    /// Resolves a type name as written in declarations.
    pub fn from_name(name: &str, schema: &OntologySchema) -> Result<SemType, String> {
        Ok(match name {
            "int" | "Integer" | "long" | "Long" => SemType::Int,
            "decimal" | "double" | "Double" | "float" => SemType::Decimal,
            "String" | "string" => SemType::String,
            "boolean" | "bool" | "Boolean" => SemType::Boolean,
            "DateTime" => SemType::DateTime,
            "DialogueAct" => SemType::DialogueAct,
            "void" => SemType::Void,
            _ => match schema.lookup_class(name) {
                crate::store::Lookup::Found(c) => SemType::Object(c.clone()),
                crate::store::Lookup::Missing => return Err(format!("unknown type `{name}`")),
                crate::store::Lookup::Ambiguous(cs) => {
                    return Err(format!(
                        "type name `{name}` is ambiguous ({})",
                        join_iris(cs)
                    ))
                }
            },
        })
    }
}

pub(crate) fn join_iris(cs: &[Resource]) -> String {
    cs.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for SemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemType::Int => f.write_str("int"),
            SemType::Decimal => f.write_str("decimal"),
            SemType::String => f.write_str("String"),
            SemType::Boolean => f.write_str("boolean"),
            SemType::DateTime => f.write_str("DateTime"),
            SemType::Object(c) => f.write_str(c.local_name()),
            SemType::Class(c) => write!(f, "class {}", c.local_name()),
            SemType::DialogueAct => f.write_str("DialogueAct"),
            SemType::Collection(t) => write!(f, "Collection<{t}>"),
            SemType::Function(sig) => {
                let params: Vec<String> = sig.params.iter().map(|p| p.to_string()).collect();
                write!(f, "({}) -> {}", params.join(", "), sig.ret)
            }
            SemType::Void => f.write_str("void"),
            SemType::Unknown => f.write_str("unknown"),
        }
    }
}

/// Whether a value of type `value` may be stored where `target` is expected.
pub fn assignable(target: &SemType, value: &SemType, schema: &OntologySchema) -> bool {
    match (target, value) {
        (SemType::Unknown, _) | (_, SemType::Unknown) => true,
        (a, b) if a == b => true,
        (SemType::Decimal, SemType::Int) | (SemType::DateTime, SemType::Int) => true,
        (SemType::Object(t), SemType::Object(v)) => schema.subsumed_by(v, t),
        (SemType::Collection(t), v) => assignable(t, v, schema),
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature {
    pub params: Vec<SemType>,
    pub ret: SemType,
    /// Side-effect free; only pure functions may be called in conditions.
    pub pure: bool,
}

/// Runtime-provided functions available to every module.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Builtin {
    SaidInSession,
    ReceivedInSession,
    Now,
    EmitDa,
    NewSession,
    Log,
}

impl Builtin {
    pub const ALL: [Builtin; 6] = [
        Builtin::SaidInSession,
        Builtin::ReceivedInSession,
        Builtin::Now,
        Builtin::EmitDa,
        Builtin::NewSession,
        Builtin::Log,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::SaidInSession => "saidInSession",
            Builtin::ReceivedInSession => "receivedInSession",
            Builtin::Now => "now",
            Builtin::EmitDa => "emitDA",
            Builtin::NewSession => "newSession",
            Builtin::Log => "log",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn signature(self) -> Signature {
        let (params, ret, pure) = match self {
            Builtin::SaidInSession | Builtin::ReceivedInSession => {
                (vec![SemType::DialogueAct], SemType::Boolean, true)
            }
            Builtin::Now => (vec![], SemType::DateTime, true),
            Builtin::EmitDa => (vec![SemType::DialogueAct], SemType::Void, false),
            Builtin::NewSession => (vec![], SemType::Void, false),
            Builtin::Log => (vec![SemType::String], SemType::Void, false),
        };
        Signature { params, ret, pure }
    }
}

/// Extension function declared in the project file and implemented by the
/// host through the engine's extension registry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExtensionDecl {
    pub name: String,
    #[serde(default)]
    pub params: Vec<String>,
    #[serde(default = "void_name")]
    pub returns: String,
    #[serde(default)]
    pub pure: bool,
}

fn void_name() -> String {
    "void".to_string()
}

impl ExtensionDecl {
    pub fn signature(&self, schema: &OntologySchema) -> Result<Signature, String> {
        let params = self
            .params
            .iter()
            .map(|p| SemType::from_name(p, schema))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Signature {
            params,
            ret: SemType::from_name(&self.returns, schema)?,
            pure: self.pure,
        })
    }
}

/// Operator meaning selected by overload resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResolvedOp {
    /// `&&`, `||` over truth values.
    Logic,
    /// Ordering or equality of numbers (int widened to decimal) or times.
    NumericCmp,
    /// Equality of strings or booleans.
    ValueEq,
    /// Equality of resources or classes by IRI.
    Identity,
    /// `==` on dialogue acts: subsumption in both directions.
    DaEquivalence,
    /// `obj <= Class`: some asserted type of obj is a subclass of Class.
    InstanceOfTest,
    /// `C1 <= C2`.
    SubclassTest,
    /// `d1 <= d2`: d2 subsumes d1.
    DaSubsumption,
    IntArith,
    DecimalArith,
    /// `+` with a string operand; the other side is rendered as text.
    Concat,
    /// DateTime plus or minus milliseconds, or the difference of two times.
    TimeArith,
}

impl ResolvedOp {
    pub fn result_type(self, op: BinOp, lhs: &SemType, rhs: &SemType) -> SemType {
        match self {
            ResolvedOp::IntArith => SemType::Int,
            ResolvedOp::DecimalArith => SemType::Decimal,
            ResolvedOp::Concat => SemType::String,
            ResolvedOp::TimeArith => {
                if op == BinOp::Sub && lhs == &SemType::DateTime && rhs == &SemType::DateTime {
                    SemType::Int
                } else {
                    SemType::DateTime
                }
            }
            _ => SemType::Boolean,
        }
    }
}

/// Resolves a binary operator for the operand types. `>=` is the mirror of
/// `<=`: `Class >= obj` is an instance test.
pub fn resolve_overload(op: BinOp, lhs: &SemType, rhs: &SemType) -> Result<ResolvedOp, String> {
    use SemType as T;
    let numeric = lhs.is_numeric() && rhs.is_numeric();
    let times = lhs == &T::DateTime && rhs == &T::DateTime;
    let found = match op {
        BinOp::And | BinOp::Or => (lhs == &T::Boolean && rhs == &T::Boolean).then_some(ResolvedOp::Logic),
        BinOp::Lt | BinOp::Gt => (numeric || times).then_some(ResolvedOp::NumericCmp),
        BinOp::Le | BinOp::Ge => {
            let (a, b) = if op == BinOp::Le { (lhs, rhs) } else { (rhs, lhs) };
            match (a, b) {
                _ if numeric || times => Some(ResolvedOp::NumericCmp),
                (T::Object(_), T::Class(_)) => Some(ResolvedOp::InstanceOfTest),
                (T::Class(_), T::Class(_)) => Some(ResolvedOp::SubclassTest),
                (T::DialogueAct, T::DialogueAct) => Some(ResolvedOp::DaSubsumption),
                _ => None,
            }
        }
        BinOp::Eq | BinOp::Ne => match (lhs, rhs) {
            _ if numeric || times => Some(ResolvedOp::NumericCmp),
            (T::String, T::String) | (T::Boolean, T::Boolean) => Some(ResolvedOp::ValueEq),
            (T::Object(_), T::Object(_)) | (T::Class(_), T::Class(_)) => Some(ResolvedOp::Identity),
            (T::DialogueAct, T::DialogueAct) => Some(ResolvedOp::DaEquivalence),
            _ => None,
        },
        BinOp::Add => match (lhs, rhs) {
            (T::Int, T::Int) => Some(ResolvedOp::IntArith),
            _ if numeric => Some(ResolvedOp::DecimalArith),
            (T::DateTime, T::Int) | (T::Int, T::DateTime) => Some(ResolvedOp::TimeArith),
            (T::String, o) | (o, T::String) if renderable(o) => Some(ResolvedOp::Concat),
            _ => None,
        },
        BinOp::Sub => match (lhs, rhs) {
            (T::Int, T::Int) => Some(ResolvedOp::IntArith),
            _ if numeric => Some(ResolvedOp::DecimalArith),
            (T::DateTime, T::Int) | (T::DateTime, T::DateTime) => Some(ResolvedOp::TimeArith),
            _ => None,
        },
        BinOp::Mul | BinOp::Div | BinOp::Rem => match (lhs, rhs) {
            (T::Int, T::Int) => Some(ResolvedOp::IntArith),
            _ if numeric => Some(ResolvedOp::DecimalArith),
            _ => None,
        },
    };
    found.ok_or_else(|| {
        format!(
            "operator `{}` is not defined for {lhs} and {rhs}",
            op.symbol()
        )
    })
}

/// Types that have a textual rendering (string interpolation, DA arguments,
/// concatenation).
pub fn renderable(t: &SemType) -> bool {
    t.is_scalar()
        || matches!(
            t,
            SemType::Object(_) | SemType::Class(_) | SemType::DialogueAct | SemType::Unknown
        )
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarRef {
    Local(String),
    Global { module: String, name: String },
    /// The identifier names an ontology class.
    Class(Resource),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FieldRef {
    Property(PropertySpec),
    /// Argument of a dialogue-act value.
    DaArg(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CallTarget {
    Builtin(Builtin),
    Extension(String),
    User { module: String, name: String },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DaInfo {
    pub token: Resource,
    pub frame: Option<Resource>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// One compiler message; `Display` gives `file:line:col: severity: message`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file: String,
    pub line: u32,
    pub col: u32,
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    pub fn error(file: &str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            file: file.to_string(),
            line: span.line,
            col: span.col,
            severity: Severity::Error,
            message: message.into(),
        }
    }

    pub fn warning(file: &str, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            ..Diagnostic::error(file, span, message)
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}: {}",
            self.file, self.line, self.col, self.severity, self.message
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalDef {
    pub module: String,
    pub ty: SemType,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionDef {
    pub module: String,
    pub sig: Signature,
}

/// Definitions visible to importers of a module, including everything the
/// module itself imports.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModuleEnv {
    pub name: String,
    pub globals: BTreeMap<String, GlobalDef>,
    pub functions: BTreeMap<String, FunctionDef>,
}

/// Settings shared by every module of a program.
#[derive(Clone, Debug, Default)]
pub struct CheckContext {
    pub schema: OntologySchema,
    pub extensions: Vec<ExtensionDecl>,
}

/// A module with every expression annotated.
#[derive(Clone, Debug)]
pub struct TypedModule {
    pub ast: ModuleAst,
    pub file: String,
    pub types: BTreeMap<ExprId, SemType>,
    pub ops: BTreeMap<ExprId, ResolvedOp>,
    pub vars: BTreeMap<ExprId, VarRef>,
    pub fields: BTreeMap<ExprId, FieldRef>,
    pub classes: BTreeMap<ExprId, Resource>,
    pub calls: BTreeMap<ExprId, CallTarget>,
    pub das: BTreeMap<ExprId, DaInfo>,
    pub diagnostics: Vec<Diagnostic>,
    pub env: ModuleEnv,
}

impl TypedModule {
    pub fn type_of(&self, id: ExprId) -> &SemType {
        self.types.get(&id).unwrap_or(&SemType::Unknown)
    }

    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(Diagnostic::is_error)
    }
}
