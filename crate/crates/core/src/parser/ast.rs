use std::fmt;

use serde::{Deserialize, Serialize};

/// Source position. Spans never take part in structural equality, so two
/// ASTs that differ only in layout compare equal.
#[derive(Clone, Copy, Default, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Debug for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

impl Span {
    pub fn to(self, end: Span) -> Span {
        Span {
            start: self.start,
            end: end.end,
            line: self.line,
            col: self.col,
        }
    }
}

/// Identifies an expression within one module; side tables produced by the
/// type checker are keyed by it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExprId(pub u32);

#[derive(Clone, Debug, PartialEq)]
pub struct ModuleAst {
    pub name: String,
    pub items: Vec<Item>,
}

impl ModuleAst {
    pub fn imports(&self) -> impl Iterator<Item = &Import> {
        self.items.iter().filter_map(|i| match i {
            Item::Import(imp) => Some(imp),
            _ => None,
        })
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.items.iter().filter_map(|i| match i {
            Item::Rule(r) => Some(r),
            _ => None,
        })
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunDef> {
        self.items.iter().filter_map(|i| match i {
            Item::Function(f) => Some(f),
            _ => None,
        })
    }

    /// Top-level statements (variable definitions and initialization).
    pub fn definitions(&self) -> impl Iterator<Item = &Stmt> {
        self.items.iter().filter_map(|i| match i {
            Item::Stmt(s) => Some(s),
            _ => None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Item {
    Import(Import),
    Function(FunDef),
    Rule(Rule),
    Stmt(Stmt),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Import {
    pub module: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypeName {
    pub name: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub ty: TypeName,
    pub name: String,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunDef {
    pub ret: TypeName,
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

/// A labelled if-then-else.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    pub label: String,
    pub cond: Expr,
    pub then: Box<Stmt>,
    pub els: Option<Box<Stmt>>,
    pub span: Span,
}

impl Rule {
    /// Rules nested directly or indirectly in this rule's branches.
    pub fn children(&self) -> Vec<&Rule> {
        let mut out = Vec::new();
        self.then.collect_rules(&mut out);
        if let Some(e) = &self.els {
            e.collect_rules(&mut out);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Block(Vec<Stmt>),
    If {
        cond: Expr,
        then: Box<Stmt>,
        els: Option<Box<Stmt>>,
    },
    Rule(Rule),
    Expr(Expr),
    Assign {
        target: Expr,
        op: AssignOp,
        value: Expr,
    },
    VarDecl {
        ty: TypeName,
        name: String,
        init: Option<Expr>,
    },
    Propose {
        label: String,
        body: Box<Stmt>,
    },
    Timeout {
        name: String,
        delay: Expr,
        body: Box<Stmt>,
    },
    Return(Option<Expr>),
}

impl Stmt {
    /// Outermost rules contained in this statement, in document order.
    fn collect_rules<'a>(&'a self, out: &mut Vec<&'a Rule>) {
        match &self.kind {
            StmtKind::Rule(r) => out.push(r),
            StmtKind::Block(stmts) => stmts.iter().for_each(|s| s.collect_rules(out)),
            StmtKind::If { then, els, .. } => {
                then.collect_rules(out);
                if let Some(e) = els {
                    e.collect_rules(out);
                }
            }
            StmtKind::Propose { body, .. } | StmtKind::Timeout { body, .. } => {
                body.collect_rules(out)
            }
            _ => {}
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "||",
            BinOp::And => "&&",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Literal {
    Int(i64),
    Decimal(f64),
    Str(String),
    Bool(bool),
}

#[derive(Clone, Debug, PartialEq)]
pub enum InterpPart {
    Lit(String),
    Expr(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DaLiteral {
    pub token: String,
    pub frame: Option<String>,
    pub args: Vec<DaArg>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DaArg {
    pub key: String,
    pub value: DaArgValue,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DaArgValue {
    /// The default: a constant, written bare or quoted.
    Const(String),
    /// `{expr}`: evaluated when the act is constructed.
    Expr(Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub id: ExprId,
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Lit(Literal),
    /// String literal containing `{expr}` segments.
    Interp(Vec<InterpPart>),
    Var(String),
    Field {
        base: Box<Expr>,
        name: String,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
    New(String),
    Da(DaLiteral),
    Unary {
        op: UnOp,
        expr: Box<Expr>,
    },
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

impl Expr {
    /// Calls `f` on this expression and every subexpression, parents first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Lit(_) | ExprKind::Var(_) | ExprKind::New(_) => {}
            ExprKind::Interp(parts) => {
                for p in parts {
                    if let InterpPart::Expr(e) = p {
                        e.walk(f);
                    }
                }
            }
            ExprKind::Field { base, .. } => base.walk(f),
            ExprKind::Call { args, .. } => args.iter().for_each(|a| a.walk(f)),
            ExprKind::Da(da) => {
                for a in &da.args {
                    if let DaArgValue::Expr(e) = &a.value {
                        e.walk(f);
                    }
                }
            }
            ExprKind::Unary { expr, .. } => expr.walk(f),
            ExprKind::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
        }
    }

    pub fn is_field(&self) -> bool {
        matches!(self.kind, ExprKind::Field { .. })
    }
}
