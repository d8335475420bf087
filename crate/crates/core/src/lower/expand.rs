use std::collections::BTreeSet;

use super::*;
use crate::parser::{
    pretty_expr, AssignOp, DaArgValue, Expr, ExprKind, InterpPart, Item, Literal, Rule, Stmt,
    StmtKind, UnOp,
};
use crate::types::{resolve_overload, FieldRef, SemType, TypedModule, VarRef};

/// Expands a condition into a tree of base terms with existence guards.
pub fn expand_boolean(expr: &Expr, typed: &TypedModule, mode: GuardMode) -> Condition {
    Lowerer::new(typed, mode).condition(expr)
}

/// Lowers one checked module. Rule ids are left at zero until linking.
pub fn lower_module(typed: &TypedModule, mode: GuardMode) -> IrModule {
    let mut l = Lowerer::new(typed, mode);
    let items = typed
        .ast
        .items
        .iter()
        .map(|item| match item {
            Item::Import(i) => IrItem::Import(i.module.clone()),
            Item::Stmt(s) => {
                l.init = true;
                let mut out = Vec::new();
                l.stmt(s, &mut out);
                l.init = false;
                IrItem::Init(out)
            }
            Item::Rule(r) => IrItem::Rule(l.rule(r)),
            Item::Function(f) => {
                l.scopes = vec![f.params.iter().map(|p| p.name.clone()).collect()];
                let body = l.block(&f.body);
                l.scopes.clear();
                IrItem::Function(IrFunction {
                    name: f.name.clone(),
                    params: f.params.iter().map(|p| p.name.clone()).collect(),
                    body,
                })
            }
        })
        .collect();
    IrModule {
        name: typed.ast.name.clone(),
        file: typed.file.clone(),
        items,
    }
}

struct Lowerer<'a> {
    typed: &'a TypedModule,
    mode: GuardMode,
    init: bool,
    /// Locals declared so far, innermost scope last.
    scopes: Vec<BTreeSet<String>>,
}

struct TermBuilder {
    terms: Vec<BaseTerm>,
}

impl TermBuilder {
    fn push(&mut self, kind: TermKind, e: &Expr, operand: Operand) -> CondTree {
        let id = self.terms.len() as u32;
        self.terms.push(BaseTerm {
            id,
            kind,
            text: pretty_expr(e),
            line: e.span.line,
            col: e.span.col,
            operand,
        });
        CondTree::Term(id)
    }
}

fn and(mut parts: Vec<CondTree>) -> CondTree {
    if parts.len() == 1 {
        parts.pop().expect("one part")
    } else {
        CondTree::And(parts)
    }
}

/// Field nodes whose value feeds a comparison operand, innermost first.
fn chain_fields<'e>(e: &'e Expr, out: &mut Vec<&'e Expr>) {
    match &e.kind {
        ExprKind::Field { base, .. } => {
            chain_fields(base, out);
            out.push(e);
        }
        ExprKind::Unary {
            op: UnOp::Neg,
            expr,
        } => chain_fields(expr, out),
        ExprKind::Binary { op, lhs, rhs } if !op.is_comparison() && !is_logic(*op) => {
            chain_fields(lhs, out);
            chain_fields(rhs, out);
        }
        _ => {}
    }
}

fn is_logic(op: BinOp) -> bool {
    matches!(op, BinOp::And | BinOp::Or)
}

fn type_default(t: &SemType) -> Option<Const> {
    Some(match t {
        SemType::Int => Const::Int(0),
        SemType::Decimal => Const::Decimal(0.0),
        SemType::String => Const::Str(String::new()),
        SemType::Boolean => Const::Bool(false),
        SemType::DateTime => Const::Time(0),
        _ => return None,
    })
}

impl<'a> Lowerer<'a> {
    fn new(typed: &'a TypedModule, mode: GuardMode) -> Self {
        Lowerer {
            typed,
            mode,
            init: false,
            scopes: Vec::new(),
        }
    }

    // ---- conditions --------------------------------------------------

    fn condition(&mut self, e: &Expr) -> Condition {
        let mut b = TermBuilder { terms: Vec::new() };
        let tree = self.cond(e, &mut b);
        Condition { tree, terms: b.terms }
    }

    fn cond(&mut self, e: &Expr, b: &mut TermBuilder) -> CondTree {
        match &e.kind {
            ExprKind::Lit(Literal::Bool(v)) => CondTree::Const(*v),
            ExprKind::Unary {
                op: UnOp::Not,
                expr,
            } => CondTree::Not(Box::new(self.cond(expr, b))),
            ExprKind::Binary { op, lhs, rhs } if is_logic(*op) => {
                let mut parts = Vec::new();
                for side in [lhs, rhs] {
                    match self.cond(side, b) {
                        CondTree::And(inner) if *op == BinOp::And => parts.extend(inner),
                        CondTree::Or(inner) if *op == BinOp::Or => parts.extend(inner),
                        other => parts.push(other),
                    }
                }
                if *op == BinOp::And {
                    CondTree::And(parts)
                } else {
                    CondTree::Or(parts)
                }
            }
            ExprKind::Binary { op, lhs, rhs } if op.is_comparison() => {
                let mut parts = Vec::new();
                if self.mode == GuardMode::Strict {
                    let mut fields = Vec::new();
                    chain_fields(lhs, &mut fields);
                    chain_fields(rhs, &mut fields);
                    let mut seen = BTreeSet::new();
                    for f in fields {
                        let text = pretty_expr(f);
                        if seen.insert(text) {
                            let operand = self.expr(f);
                            parts.push(b.push(TermKind::Exists, f, operand));
                        }
                    }
                }
                let test = self.comparison(e);
                parts.push(b.push(TermKind::Test, e, test));
                and(parts)
            }
            ExprKind::Field { .. } => {
                let mut fields = Vec::new();
                chain_fields(e, &mut fields);
                let mut parts: Vec<CondTree> = fields
                    .into_iter()
                    .map(|f| {
                        let operand = self.expr(f);
                        b.push(TermKind::Exists, f, operand)
                    })
                    .collect();
                if self.typed.type_of(e.id) == &SemType::Boolean {
                    let operand = self.expr(e);
                    parts.push(b.push(TermKind::Test, e, operand));
                }
                and(parts)
            }
            _ => {
                let kind = if self.typed.type_of(e.id) == &SemType::Boolean {
                    TermKind::Test
                } else {
                    TermKind::Exists
                };
                let operand = self.expr(e);
                b.push(kind, e, operand)
            }
        }
    }

    /// The unguarded comparison; in defaulting mode missing field values
    /// are replaced by the default of their type.
    fn comparison(&mut self, e: &Expr) -> Operand {
        let ExprKind::Binary { op, lhs, rhs } = &e.kind else {
            unreachable!("comparison expected")
        };
        let (l, r) = (self.operand(lhs), self.operand(rhs));
        Operand::Binary {
            op: self.op_of(e),
            bin: *op,
            lhs: Box::new(l),
            rhs: Box::new(r),
        }
    }

    fn operand(&mut self, e: &Expr) -> Operand {
        if self.mode == GuardMode::Defaulting {
            if let ExprKind::Field { .. } = e.kind {
                let v = self.expr(e);
                return match type_default(self.typed.type_of(e.id)) {
                    Some(d) => Operand::Default {
                        value: Box::new(v),
                        default: d,
                    },
                    None => v,
                };
            }
        }
        self.expr(e)
    }

    fn op_of(&self, e: &Expr) -> ResolvedOp {
        self.typed
            .ops
            .get(&e.id)
            .copied()
            .unwrap_or(ResolvedOp::ValueEq)
    }

    // ---- values ------------------------------------------------------

    fn expr(&mut self, e: &Expr) -> Operand {
        match &e.kind {
            ExprKind::Lit(l) => Operand::Const(match l {
                Literal::Int(n) => Const::Int(*n),
                Literal::Decimal(d) => Const::Decimal(*d),
                Literal::Str(s) => Const::Str(s.clone()),
                Literal::Bool(b) => Const::Bool(*b),
            }),
            ExprKind::Interp(parts) => Operand::Interp(
                parts
                    .iter()
                    .map(|p| match p {
                        InterpPart::Lit(s) => InterpOp::Lit(s.clone()),
                        InterpPart::Expr(x) => InterpOp::Expr(self.expr(x)),
                    })
                    .collect(),
            ),
            ExprKind::Var(name) => match self.typed.vars.get(&e.id) {
                Some(VarRef::Local(n)) => Operand::Local(n.clone()),
                Some(VarRef::Global { module, name }) => Operand::Global {
                    module: module.clone(),
                    name: name.clone(),
                },
                Some(VarRef::Class(c)) => Operand::Class(c.clone()),
                None => Operand::Local(name.clone()),
            },
            ExprKind::Field { base, .. } => {
                let b = Box::new(self.expr(base));
                match self.typed.fields.get(&e.id) {
                    Some(FieldRef::Property(spec)) => Operand::Prop {
                        base: b,
                        prop: PropRef {
                            iri: spec.property.clone(),
                            functional: spec.functional,
                        },
                    },
                    Some(FieldRef::DaArg(k)) => Operand::DaArg {
                        base: b,
                        key: k.clone(),
                    },
                    None => Operand::Absent,
                }
            }
            ExprKind::Call { args, .. } => {
                let args = args.iter().map(|a| self.expr(a)).collect();
                match self.typed.calls.get(&e.id) {
                    Some(t) => Operand::Call {
                        target: t.clone(),
                        args,
                    },
                    None => Operand::Absent,
                }
            }
            ExprKind::New(_) => match self.typed.classes.get(&e.id) {
                Some(c) => Operand::New(c.clone()),
                None => Operand::Absent,
            },
            ExprKind::Da(lit) => {
                let Some(info) = self.typed.das.get(&e.id) else {
                    return Operand::Absent;
                };
                let args = lit
                    .args
                    .iter()
                    .map(|a| {
                        let v = match &a.value {
                            DaArgValue::Const(s) => DaArgOp::Const(s.clone()),
                            DaArgValue::Expr(x) => DaArgOp::Expr(self.expr(x)),
                        };
                        (a.key.clone(), v)
                    })
                    .collect();
                Operand::MakeDa {
                    token: info.token.clone(),
                    frame: info.frame.clone(),
                    args,
                }
            }
            ExprKind::Unary {
                op: UnOp::Neg,
                expr,
            } => Operand::Neg(Box::new(self.expr(expr))),
            ExprKind::Unary { op: UnOp::Not, .. } => Operand::Cond(Box::new(self.condition(e))),
            ExprKind::Binary { op, .. } if op.is_comparison() || is_logic(*op) => {
                Operand::Cond(Box::new(self.condition(e)))
            }
            ExprKind::Binary { op, lhs, rhs } => Operand::Binary {
                op: self.op_of(e),
                bin: *op,
                lhs: Box::new(self.expr(lhs)),
                rhs: Box::new(self.expr(rhs)),
            },
        }
    }

    // ---- statements --------------------------------------------------

    fn rule(&mut self, r: &Rule) -> IrRule {
        let top = self.scopes.is_empty();
        if top {
            self.scopes.push(BTreeSet::new());
        }
        let cond = self.condition(&r.cond);
        let then = self.branch(&r.then);
        let els = r.els.as_ref().map(|e| self.branch(e)).unwrap_or_default();
        if top {
            self.scopes.clear();
        }
        IrRule {
            id: 0,
            label: r.label.clone(),
            module: self.typed.ast.name.clone(),
            line: r.span.line,
            col: r.span.col,
            cond,
            then,
            els,
        }
    }

    fn branch(&mut self, s: &Stmt) -> Vec<Instr> {
        self.scopes.push(BTreeSet::new());
        let mut out = Vec::new();
        self.stmt(s, &mut out);
        self.scopes.pop();
        out
    }

    fn block(&mut self, stmts: &[Stmt]) -> Vec<Instr> {
        let mut out = Vec::new();
        for s in stmts {
            self.stmt(s, &mut out);
        }
        out
    }

    fn declare_local(&mut self, name: &str) {
        if self.scopes.is_empty() {
            self.scopes.push(BTreeSet::new());
        }
        self.scopes
            .last_mut()
            .expect("scope")
            .insert(name.to_string());
    }

    fn visible(&self) -> BTreeSet<String> {
        self.scopes.iter().flatten().cloned().collect()
    }

    fn deferred(&mut self, body: &Stmt) -> (Vec<String>, Vec<Instr>) {
        let outside = self.visible();
        let instrs = self.branch(body);
        let mut reads = BTreeSet::new();
        locals_read(&instrs, &mut reads);
        let captures = reads.intersection(&outside).cloned().collect();
        (captures, instrs)
    }

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<Instr>) {
        match &s.kind {
            StmtKind::Block(stmts) => {
                if self.init {
                    out.extend(self.block(stmts));
                } else {
                    self.scopes.push(BTreeSet::new());
                    let b = self.block(stmts);
                    self.scopes.pop();
                    out.extend(b);
                }
            }
            StmtKind::If { cond, then, els } => {
                let cond = self.condition(cond);
                let then = self.branch(then);
                let els = els.as_ref().map(|e| self.branch(e)).unwrap_or_default();
                out.push(Instr::If { cond, then, els });
            }
            StmtKind::Rule(r) => out.push(Instr::Rule(Box::new(self.rule(r)))),
            StmtKind::Expr(e) => out.push(Instr::Eval(self.expr(e))),
            StmtKind::Assign { target, op, value } => self.assign(target, *op, value, out),
            StmtKind::VarDecl { name, init, .. } => {
                let value = init.as_ref().map_or(Operand::Absent, |e| self.expr(e));
                if self.init {
                    out.push(Instr::SetGlobal {
                        module: self.typed.ast.name.clone(),
                        name: name.clone(),
                        value,
                    });
                } else {
                    self.declare_local(name);
                    out.push(Instr::SetLocal {
                        name: name.clone(),
                        value,
                    });
                }
            }
            StmtKind::Propose { label, body } => {
                let (captures, body) = self.deferred(body);
                out.push(Instr::Propose {
                    label: label.clone(),
                    captures,
                    body,
                });
            }
            StmtKind::Timeout { name, delay, body } => {
                let delay = self.expr(delay);
                let (captures, body) = self.deferred(body);
                out.push(Instr::Timeout {
                    name: name.clone(),
                    delay,
                    captures,
                    body,
                });
            }
            StmtKind::Return(v) => out.push(Instr::Return(v.as_ref().map(|e| self.expr(e)))),
        }
    }

    /// `x += v` becomes `x = x + v` with the operator resolved for the
    /// target's type.
    fn compound(&self, op: AssignOp, target: &Expr, read: Operand, value: &Expr, v: Operand) -> Operand {
        let bin = match op {
            AssignOp::Set => return v,
            AssignOp::Add => BinOp::Add,
            AssignOp::Sub => BinOp::Sub,
        };
        let resolved = resolve_overload(
            bin,
            self.typed.type_of(target.id),
            self.typed.type_of(value.id),
        )
        .unwrap_or(ResolvedOp::IntArith);
        Operand::Binary {
            op: resolved,
            bin,
            lhs: Box::new(read),
            rhs: Box::new(v),
        }
    }

    fn assign(&mut self, target: &Expr, op: AssignOp, value: &Expr, out: &mut Vec<Instr>) {
        let v = self.expr(value);
        match &target.kind {
            ExprKind::Var(name) => match self.typed.vars.get(&target.id) {
                Some(VarRef::Global { module, name }) => {
                    let read = Operand::Global {
                        module: module.clone(),
                        name: name.clone(),
                    };
                    out.push(Instr::SetGlobal {
                        module: module.clone(),
                        name: name.clone(),
                        value: self.compound(op, target, read, value, v),
                    });
                }
                _ => {
                    if !self.visible().contains(name) {
                        self.declare_local(name);
                    }
                    let read = Operand::Local(name.clone());
                    out.push(Instr::SetLocal {
                        name: name.clone(),
                        value: self.compound(op, target, read, value, v),
                    });
                }
            },
            ExprKind::Field { base, .. } => match self.typed.fields.get(&target.id) {
                Some(FieldRef::Property(spec)) => {
                    let prop = PropRef {
                        iri: spec.property.clone(),
                        functional: spec.functional,
                    };
                    let subject = self.expr(base);
                    let read = Operand::Prop {
                        base: Box::new(subject.clone()),
                        prop: prop.clone(),
                    };
                    out.push(Instr::StoreWrite {
                        subject,
                        prop,
                        value: self.compound(op, target, read, value, v),
                    });
                }
                Some(FieldRef::DaArg(key)) => {
                    let place = match self.expr(base) {
                        Operand::Global { module, name } => Place::Global { module, name },
                        Operand::Local(n) => Place::Local(n),
                        _ => return,
                    };
                    out.push(Instr::SetDaArg {
                        place,
                        key: key.clone(),
                        value: v,
                    });
                }
                None => {}
            },
            _ => {}
        }
    }
}

/// Names of locals read anywhere in `block`, including nested bodies.
pub(crate) fn locals_read(block: &[Instr], out: &mut BTreeSet<String>) {
    for i in block {
        match i {
            Instr::SetLocal { value, .. } | Instr::SetGlobal { value, .. } => {
                operand_locals(value, out)
            }
            Instr::StoreWrite { subject, value, .. } => {
                operand_locals(subject, out);
                operand_locals(value, out);
            }
            Instr::SetDaArg { place, value, .. } => {
                if let Place::Local(n) = place {
                    out.insert(n.clone());
                }
                operand_locals(value, out);
            }
            Instr::Eval(v) | Instr::Return(Some(v)) => operand_locals(v, out),
            Instr::Return(None) => {}
            Instr::If { cond, then, els } => {
                condition_locals(cond, out);
                locals_read(then, out);
                locals_read(els, out);
            }
            Instr::Rule(r) => {
                condition_locals(&r.cond, out);
                locals_read(&r.then, out);
                locals_read(&r.els, out);
            }
            Instr::Propose { body, .. } => locals_read(body, out),
            Instr::Timeout { delay, body, .. } => {
                operand_locals(delay, out);
                locals_read(body, out);
            }
        }
    }
}

fn condition_locals(c: &Condition, out: &mut BTreeSet<String>) {
    for t in &c.terms {
        operand_locals(&t.operand, out);
    }
}

fn operand_locals(o: &Operand, out: &mut BTreeSet<String>) {
    match o {
        Operand::Local(n) => {
            out.insert(n.clone());
        }
        Operand::Prop { base, .. } | Operand::DaArg { base, .. } => operand_locals(base, out),
        Operand::Call { args, .. } => args.iter().for_each(|a| operand_locals(a, out)),
        Operand::MakeDa { args, .. } => {
            for (_, a) in args {
                if let DaArgOp::Expr(e) = a {
                    operand_locals(e, out);
                }
            }
        }
        Operand::Interp(parts) => {
            for p in parts {
                if let InterpOp::Expr(e) = p {
                    operand_locals(e, out);
                }
            }
        }
        Operand::Neg(x) => operand_locals(x, out),
        Operand::Default { value, .. } => operand_locals(value, out),
        Operand::Binary { lhs, rhs, .. } => {
            operand_locals(lhs, out);
            operand_locals(rhs, out);
        }
        Operand::Cond(c) => condition_locals(c, out),
        Operand::Absent
        | Operand::Const(_)
        | Operand::Global { .. }
        | Operand::Class(_)
        | Operand::New(_) => {}
    }
}
