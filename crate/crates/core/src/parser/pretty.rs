use std::fmt::Write;

use super::ast::*;

const KEYWORDS: &[&str] = &[
    "if", "else", "import", "new", "propose", "timeout", "return", "true", "false",
];

/// Renders a module as source text that parses back to an equal AST.
pub fn pretty_module(m: &ModuleAst) -> String {
    let mut p = Printer::default();
    for item in &m.items {
        match item {
            Item::Import(i) => {
                p.line(&format!("import {};", i.module));
            }
            Item::Function(f) => p.function(f),
            Item::Rule(r) => p.rule(r),
            Item::Stmt(s) => p.stmt(s),
        }
    }
    p.out
}

/// Renders an expression with the minimum parentheses needed to preserve
/// its structure.
pub fn pretty_expr(e: &Expr) -> String {
    let mut s = String::new();
    expr(&mut s, e);
    s
}

#[derive(Default)]
struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn function(&mut self, f: &FunDef) {
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| format!("{} {}", p.ty.name, p.name))
            .collect();
        self.line(&format!("{} {}({}) {{", f.ret.name, f.name, params.join(", ")));
        self.indent += 1;
        for s in &f.body {
            self.stmt(s);
        }
        self.indent -= 1;
        self.line("}");
    }

    fn rule(&mut self, r: &Rule) {
        self.line(&format!("{}:", r.label));
        self.if_stmt(&r.cond, &r.then, r.els.as_deref());
    }

    fn if_stmt(&mut self, cond: &Expr, then: &Stmt, els: Option<&Stmt>) {
        self.line(&format!("if ({})", pretty_expr(cond)));
        self.branch(then);
        if let Some(e) = els {
            self.line("else");
            self.branch(e);
        }
    }

    /// Statement in a nested position, indented unless it is a block.
    fn branch(&mut self, s: &Stmt) {
        if matches!(s.kind, StmtKind::Block(_)) {
            self.stmt(s);
        } else {
            self.indent += 1;
            self.stmt(s);
            self.indent -= 1;
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Block(stmts) => {
                self.line("{");
                self.indent += 1;
                for s in stmts {
                    self.stmt(s);
                }
                self.indent -= 1;
                self.line("}");
            }
            StmtKind::If { cond, then, els } => self.if_stmt(cond, then, els.as_deref()),
            StmtKind::Rule(r) => self.rule(r),
            StmtKind::Expr(e) => self.line(&format!("{};", pretty_expr(e))),
            StmtKind::Assign { target, op, value } => {
                let op = match op {
                    AssignOp::Set => "=",
                    AssignOp::Add => "+=",
                    AssignOp::Sub => "-=",
                };
                self.line(&format!(
                    "{} {op} {};",
                    pretty_expr(target),
                    pretty_expr(value)
                ));
            }
            StmtKind::VarDecl { ty, name, init } => match init {
                Some(e) => self.line(&format!("{} {name} = {};", ty.name, pretty_expr(e))),
                None => self.line(&format!("{} {name};", ty.name)),
            },
            StmtKind::Propose { label, body } => {
                self.line(&format!("propose({})", quote(label)));
                self.branch(body);
            }
            StmtKind::Timeout { name, delay, body } => {
                self.line(&format!("timeout({}, {})", quote(name), pretty_expr(delay)));
                self.branch(body);
            }
            StmtKind::Return(None) => self.line("return;"),
            StmtKind::Return(Some(e)) => self.line(&format!("return {};", pretty_expr(e))),
        }
    }
}

fn escape_into(out: &mut String, s: &str) {
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '{' => out.push_str("\\{"),
            '}' => out.push_str("\\}"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

pub(crate) fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    escape_into(&mut out, s);
    out.push('"');
    out
}

/// Whether a DA constant can be written unquoted and still read back as the
/// same string.
pub(crate) fn is_bare_const(s: &str) -> bool {
    let mut chars = s.chars();
    let ident = matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_');
    if ident {
        return !KEYWORDS.contains(&s) || s == "true" || s == "false";
    }
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_digit()) {
        return s.parse::<i64>().is_ok_and(|i| i.to_string() == s);
    }
    false
}

pub(crate) fn decimal_text(d: f64) -> String {
    let mut s = d.to_string();
    if !s.contains('.') {
        s.push_str(".0");
    }
    s
}

fn expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Lit(Literal::Int(i)) => {
            let _ = write!(out, "{i}");
        }
        ExprKind::Lit(Literal::Decimal(d)) => out.push_str(&decimal_text(*d)),
        ExprKind::Lit(Literal::Bool(b)) => {
            let _ = write!(out, "{b}");
        }
        ExprKind::Lit(Literal::Str(s)) => out.push_str(&quote(s)),
        ExprKind::Interp(parts) => {
            out.push('"');
            for p in parts {
                match p {
                    InterpPart::Lit(s) => escape_into(out, s),
                    InterpPart::Expr(e) => {
                        out.push('{');
                        expr(out, e);
                        out.push('}');
                    }
                }
            }
            out.push('"');
        }
        ExprKind::Var(v) => out.push_str(v),
        ExprKind::Field { base, name } => {
            operand(out, base, matches!(base.kind, ExprKind::Binary { .. } | ExprKind::Unary { .. }));
            out.push('.');
            out.push_str(name);
        }
        ExprKind::Call { name, args } => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                expr(out, a);
            }
            out.push(')');
        }
        ExprKind::New(c) => {
            let _ = write!(out, "new {c}");
        }
        ExprKind::Da(da) => da_literal(out, da),
        ExprKind::Unary { op, expr: inner } => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            operand(out, inner, matches!(inner.kind, ExprKind::Binary { .. }));
        }
        ExprKind::Binary { op, lhs, rhs } => {
            let prec = op.precedence();
            operand(out, lhs, binary_prec(lhs).is_some_and(|p| p < prec));
            let _ = write!(out, " {} ", op.symbol());
            operand(out, rhs, binary_prec(rhs).is_some_and(|p| p <= prec));
        }
    }
}

fn binary_prec(e: &Expr) -> Option<u8> {
    match &e.kind {
        ExprKind::Binary { op, .. } => Some(op.precedence()),
        _ => None,
    }
}

fn operand(out: &mut String, e: &Expr, parens: bool) {
    if parens {
        out.push('(');
        expr(out, e);
        out.push(')');
    } else {
        expr(out, e);
    }
}

fn da_literal(out: &mut String, da: &DaLiteral) {
    out.push('#');
    out.push_str(&da.token);
    if da.frame.is_none() && da.args.is_empty() {
        return;
    }
    out.push('(');
    let mut first = true;
    if let Some(f) = &da.frame {
        out.push_str(f);
        first = false;
    }
    for a in &da.args {
        if !first {
            out.push_str(", ");
        }
        first = false;
        out.push_str(&a.key);
        out.push('=');
        match &a.value {
            DaArgValue::Const(s) if is_bare_const(s) => out.push_str(s),
            DaArgValue::Const(s) => out.push_str(&quote(s)),
            DaArgValue::Expr(e) => {
                out.push('{');
                expr(out, e);
                out.push('}');
            }
        }
    }
    out.push(')');
}
