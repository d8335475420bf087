//! Lowering of checked modules to a portable, serializable IR.
//!
//! Conditions become trees of base terms. A field chain compared against a
//! value is guarded: `a.b.c <= 0` evaluates `exists(a.b)`, then
//! `exists(a.b.c)`, then the comparison, stopping at the first false term.
//! Under negation absence counts as falsity, so `!a.b` is `!exists(a.b)`.

mod expand;
mod link;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::parser::BinOp;
use crate::store::Resource;
use crate::types::{CallTarget, ResolvedOp};

pub use expand::{expand_boolean, lower_module};
pub use link::{lower_program, ArtifactError};

/// Format version of serialized programs.
pub const IR_VERSION: u32 = 1;

/// How comparisons over field chains treat missing values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardMode {
    /// Every chain link is tested for existence before the comparison.
    #[default]
    Strict,
    /// No guards in comparisons; a missing value reads as the default of
    /// its type (0, "", false).
    Defaulting,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Const {
    Int(i64),
    Decimal(f64),
    Str(String),
    Bool(bool),
    Time(i64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropRef {
    pub iri: Resource,
    pub functional: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DaArgOp {
    Const(String),
    Expr(Operand),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InterpOp {
    Lit(String),
    Expr(Operand),
}

/// Expression in value position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    Absent,
    Const(Const),
    Local(String),
    Global { module: String, name: String },
    Class(Resource),
    /// Store read: latest value, or all current values when non-functional.
    Prop { base: Box<Operand>, prop: PropRef },
    DaArg { base: Box<Operand>, key: String },
    Call { target: CallTarget, args: Vec<Operand> },
    New(Resource),
    MakeDa {
        token: Resource,
        frame: Option<Resource>,
        args: Vec<(String, DaArgOp)>,
    },
    Interp(Vec<InterpOp>),
    Neg(Box<Operand>),
    Binary {
        op: ResolvedOp,
        bin: BinOp,
        lhs: Box<Operand>,
        rhs: Box<Operand>,
    },
    /// A boolean expression with shortcut semantics.
    Cond(Box<Condition>),
    /// `value`, or `default` when it is absent.
    Default { value: Box<Operand>, default: Const },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    /// True when the operand is present (for collections: non-empty).
    Exists,
    /// True when the operand evaluates to `true`.
    Test,
}

/// An atomic part of a condition, logged individually.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseTerm {
    pub id: u32,
    pub kind: TermKind,
    /// Source text of the tested expression.
    pub text: String,
    pub line: u32,
    pub col: u32,
    pub operand: Operand,
}

impl BaseTerm {
    /// `exists(a.b)` or the test expression itself.
    pub fn display(&self) -> String {
        match self.kind {
            TermKind::Exists => format!("exists({})", self.text),
            TermKind::Test => self.text.clone(),
        }
    }
}

/// Shortcut combinators over base terms; `Term` indexes
/// [`Condition::terms`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CondTree {
    Const(bool),
    Term(u32),
    Not(Box<CondTree>),
    And(Vec<CondTree>),
    Or(Vec<CondTree>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub tree: CondTree,
    pub terms: Vec<BaseTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Place {
    Local(String),
    Global { module: String, name: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Instr {
    SetLocal {
        name: String,
        value: Operand,
    },
    SetGlobal {
        module: String,
        name: String,
        value: Operand,
    },
    StoreWrite {
        subject: Operand,
        prop: PropRef,
        value: Operand,
    },
    SetDaArg {
        place: Place,
        key: String,
        value: Operand,
    },
    Eval(Operand),
    If {
        cond: Condition,
        then: Vec<Instr>,
        els: Vec<Instr>,
    },
    Rule(Box<IrRule>),
    /// Records a proposal; `captures` are the locals copied at freeze time.
    Propose {
        label: String,
        captures: Vec<String>,
        body: Vec<Instr>,
    },
    Timeout {
        name: String,
        delay: Operand,
        captures: Vec<String>,
        body: Vec<Instr>,
    },
    Return(Option<Operand>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrRule {
    /// Program-wide id in evaluation order; assigned when linking.
    pub id: u32,
    pub label: String,
    pub module: String,
    pub line: u32,
    pub col: u32,
    pub cond: Condition,
    pub then: Vec<Instr>,
    pub els: Vec<Instr>,
}

impl IrRule {
    /// Rules nested in this rule's branches, outermost first.
    pub fn children(&self) -> Vec<&IrRule> {
        let mut out = Vec::new();
        collect_rules(&self.then, &mut out);
        collect_rules(&self.els, &mut out);
        out
    }

    pub(crate) fn children_mut(&mut self) -> Vec<&mut IrRule> {
        let mut out = Vec::new();
        collect_rules_mut(&mut self.then, &mut out);
        collect_rules_mut(&mut self.els, &mut out);
        out
    }
}

fn collect_rules<'a>(block: &'a [Instr], out: &mut Vec<&'a IrRule>) {
    for i in block {
        match i {
            Instr::Rule(r) => out.push(r),
            Instr::If { then, els, .. } => {
                collect_rules(then, out);
                collect_rules(els, out);
            }
            _ => {}
        }
    }
}

fn collect_rules_mut<'a>(block: &'a mut [Instr], out: &mut Vec<&'a mut IrRule>) {
    for i in block {
        match i {
            Instr::Rule(r) => out.push(r),
            Instr::If { then, els, .. } => {
                collect_rules_mut(then, out);
                collect_rules_mut(els, out);
            }
            _ => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrFunction {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Instr>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum IrItem {
    Import(String),
    /// One top-level statement, run once at startup.
    Init(Vec<Instr>),
    Rule(IrRule),
    Function(IrFunction),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrModule {
    pub name: String,
    pub file: String,
    pub items: Vec<IrItem>,
}

impl IrModule {
    pub fn rules(&self) -> impl Iterator<Item = &IrRule> {
        self.items.iter().filter_map(|i| match i {
            IrItem::Rule(r) => Some(r),
            _ => None,
        })
    }
}

/// Position of a top-level item: module index and item index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemRef {
    pub module: usize,
    pub item: usize,
}

/// A linked program: the compiled artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub version: u32,
    pub root: String,
    pub guards: GuardMode,
    /// Ontology text the program was checked against.
    pub ontology: String,
    pub modules: Vec<IrModule>,
    /// Init blocks and rules in evaluation order: each import is expanded at
    /// its first occurrence.
    pub order: Vec<ItemRef>,
    /// Source text by file name, for debuggers.
    pub sources: BTreeMap<String, String>,
}

impl Program {
    pub fn module(&self, name: &str) -> Option<&IrModule> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn item(&self, r: ItemRef) -> &IrItem {
        &self.modules[r.module].items[r.item]
    }

    /// Top-level rules in evaluation order.
    pub fn rules(&self) -> impl Iterator<Item = &IrRule> {
        self.order.iter().filter_map(|r| match self.item(*r) {
            IrItem::Rule(rule) => Some(rule),
            _ => None,
        })
    }

    /// Every rule including nested ones, in id order.
    pub fn all_rules(&self) -> Vec<&IrRule> {
        fn walk<'a>(r: &'a IrRule, out: &mut Vec<&'a IrRule>) {
            out.push(r);
            for c in r.children() {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        for r in self.rules() {
            walk(r, &mut out);
        }
        out
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, &IrFunction)> {
        self.modules.iter().flat_map(|m| {
            m.items.iter().filter_map(move |i| match i {
                IrItem::Function(f) => Some((m.name.as_str(), f)),
                _ => None,
            })
        })
    }

    /// Serializes to the `.rudic` artifact format (stable JSON).
    pub fn to_artifact(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("program serializes");
        s.push('\n');
        s
    }

    pub fn from_artifact(text: &str) -> Result<Program, ArtifactError> {
        #[derive(Deserialize)]
        struct Header {
            version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.version != IR_VERSION {
            return Err(ArtifactError::Version(header.version));
        }
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests;
