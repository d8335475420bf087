use std::collections::{BTreeMap, BTreeSet};

use super::*;
use crate::parser::{
    AssignOp, DaArgValue, DaLiteral, Expr, ExprKind, FunDef, InterpPart, Item, Literal, Rule,
    Stmt, StmtKind, UnOp,
};
use crate::store::Lookup;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Top-level statements: first assignment declares a module global.
    Init,
    Rule,
    Function,
}

struct Checker<'a> {
    schema: &'a OntologySchema,
    extensions: BTreeMap<String, Signature>,
    file: String,
    module: String,
    out: TypedModule,
    scopes: Vec<BTreeMap<String, SemType>>,
    mode: Mode,
    fn_ret: Option<SemType>,
    in_propose: bool,
    in_deferred: bool,
    labels: BTreeSet<String>,
    /// Roots of all conditions, checked for purity once function purity is
    /// known.
    conditions: Vec<Expr>,
}

/// Type-checks one module. `imports` are the environments of the modules it
/// imports, in import order.
pub fn check_module(
    ast: &ModuleAst,
    file: &str,
    ctx: &CheckContext,
    imports: &[&ModuleEnv],
) -> TypedModule {
    let mut c = Checker::new(ast, file, ctx);
    c.import_envs(ast, imports);
    c.run(ast);
    c.finish()
}

/// Infers the type of a standalone expression with `env` as the local
/// variables in scope.
pub fn infer_expr_type(
    expr: &Expr,
    env: &BTreeMap<String, SemType>,
    schema: &OntologySchema,
) -> Result<SemType, String> {
    let ctx = CheckContext {
        schema: schema.clone(),
        extensions: Vec::new(),
    };
    let ast = ModuleAst {
        name: "expr".into(),
        items: Vec::new(),
    };
    let mut c = Checker::new(&ast, "<expr>", &ctx);
    c.mode = Mode::Rule;
    c.scopes.push(env.clone());
    let t = c.infer(expr);
    match c.out.diagnostics.iter().find(|d| d.is_error()) {
        Some(d) => Err(d.message.clone()),
        None => Ok(t),
    }
}

impl<'a> Checker<'a> {
    fn new(ast: &ModuleAst, file: &str, ctx: &'a CheckContext) -> Self {
        let mut out = TypedModule {
            ast: ast.clone(),
            file: file.to_string(),
            types: BTreeMap::new(),
            ops: BTreeMap::new(),
            vars: BTreeMap::new(),
            fields: BTreeMap::new(),
            classes: BTreeMap::new(),
            calls: BTreeMap::new(),
            das: BTreeMap::new(),
            diagnostics: Vec::new(),
            env: ModuleEnv {
                name: ast.name.clone(),
                ..ModuleEnv::default()
            },
        };
        let mut extensions = BTreeMap::new();
        for ext in &ctx.extensions {
            match ext.signature(&ctx.schema) {
                Ok(sig) => {
                    extensions.insert(ext.name.clone(), sig);
                }
                Err(e) => out.diagnostics.push(Diagnostic::error(
                    file,
                    Span::default(),
                    format!("extension `{}`: {e}", ext.name),
                )),
            }
        }
        Checker {
            schema: &ctx.schema,
            extensions,
            file: file.to_string(),
            module: ast.name.clone(),
            out,
            scopes: Vec::new(),
            mode: Mode::Init,
            fn_ret: None,
            in_propose: false,
            in_deferred: false,
            labels: BTreeSet::new(),
            conditions: Vec::new(),
        }
    }

    fn error(&mut self, span: Span, message: impl Into<String>) {
        self.out
            .diagnostics
            .push(Diagnostic::error(&self.file, span, message));
    }

    fn import_envs(&mut self, ast: &ModuleAst, imports: &[&ModuleEnv]) {
        let spans: BTreeMap<&str, Span> = ast.imports().map(|i| (i.module.as_str(), i.span)).collect();
        for env in imports {
            let span = spans.get(env.name.as_str()).copied().unwrap_or_default();
            for (name, def) in &env.globals {
                match self.out.env.globals.get(name) {
                    Some(prev) if prev.module != def.module => self.error(
                        span,
                        format!(
                            "`{name}` is defined in both `{}` and `{}`",
                            prev.module, def.module
                        ),
                    ),
                    _ => {
                        self.out.env.globals.insert(name.clone(), def.clone());
                    }
                }
            }
            for (name, def) in &env.functions {
                match self.out.env.functions.get(name) {
                    Some(prev) if prev.module != def.module => self.error(
                        span,
                        format!(
                            "function `{name}` is defined in both `{}` and `{}`",
                            prev.module, def.module
                        ),
                    ),
                    _ => {
                        self.out.env.functions.insert(name.clone(), def.clone());
                    }
                }
            }
        }
    }

    fn run(&mut self, ast: &ModuleAst) {
        for f in ast.functions() {
            self.register_function(f);
        }
        for item in &ast.items {
            if let Item::Stmt(s) = item {
                self.mode = Mode::Init;
                self.stmt(s);
            }
        }
        for f in ast.functions() {
            self.function_body(f);
        }
        for r in ast.rules() {
            self.mode = Mode::Init;
            self.rule(r);
        }
        self.infer_purity(ast);
        let conditions = std::mem::take(&mut self.conditions);
        for c in &conditions {
            self.check_pure(c);
        }
    }

    fn finish(mut self) -> TypedModule {
        self.out.diagnostics.sort();
        self.out.diagnostics.dedup();
        self.out
    }

    // ---- definitions -------------------------------------------------

    fn type_name(&mut self, name: &str, span: Span) -> SemType {
        match SemType::from_name(name, self.schema) {
            Ok(t) => t,
            Err(e) => {
                self.error(span, e);
                SemType::Unknown
            }
        }
    }

    fn register_function(&mut self, f: &FunDef) {
        let params = f
            .params
            .iter()
            .map(|p| self.type_name(&p.ty.name, p.ty.span))
            .collect();
        let ret = self.type_name(&f.ret.name, f.ret.span);
        if Builtin::from_name(&f.name).is_some() || self.extensions.contains_key(&f.name) {
            self.error(f.span, format!("function `{}` redefines a built-in", f.name));
            return;
        }
        if let Some(prev) = self.out.env.functions.get(&f.name) {
            let msg = if prev.module == self.module {
                format!("function `{}` is defined twice", f.name)
            } else {
                format!("function `{}` is already defined in `{}`", f.name, prev.module)
            };
            self.error(f.span, msg);
            return;
        }
        self.out.env.functions.insert(
            f.name.clone(),
            FunctionDef {
                module: self.module.clone(),
                sig: Signature {
                    params,
                    ret,
                    pure: true,
                },
            },
        );
    }

    fn function_body(&mut self, f: &FunDef) {
        let Some(def) = self.out.env.functions.get(&f.name) else {
            return;
        };
        if def.module != self.module {
            return;
        }
        let sig = def.sig.clone();
        self.mode = Mode::Function;
        self.fn_ret = Some(sig.ret.clone());
        let mut scope = BTreeMap::new();
        for (p, t) in f.params.iter().zip(sig.params) {
            if scope.insert(p.name.clone(), t).is_some() {
                self.error(p.span, format!("duplicate parameter `{}`", p.name));
            }
        }
        self.scopes.push(scope);
        for s in &f.body {
            self.stmt(s);
        }
        self.scopes.pop();
        self.fn_ret = None;
        self.mode = Mode::Init;
    }

    /// A function is impure if it writes the store or a global, creates an
    /// instance, or calls something impure.
    fn infer_purity(&mut self, ast: &ModuleAst) {
        let own: Vec<&FunDef> = ast
            .functions()
            .filter(|f| {
                self.out
                    .env
                    .functions
                    .get(&f.name)
                    .is_some_and(|d| d.module == self.module)
            })
            .collect();
        loop {
            let mut changed = false;
            for f in &own {
                let pure = f.body.iter().all(|s| self.stmt_pure(s));
                let def = self.out.env.functions.get_mut(&f.name).expect("registered");
                if def.sig.pure && !pure {
                    def.sig.pure = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    fn stmt_pure(&self, s: &Stmt) -> bool {
        let expr_pure = |e: &Expr| self.impurity(e).is_none();
        match &s.kind {
            StmtKind::Block(ss) => ss.iter().all(|s| self.stmt_pure(s)),
            StmtKind::If { cond, then, els } => {
                expr_pure(cond)
                    && self.stmt_pure(then)
                    && els.as_ref().is_none_or(|e| self.stmt_pure(e))
            }
            StmtKind::Expr(e) => expr_pure(e),
            StmtKind::Assign { target, value, .. } => {
                let target_ok = match &target.kind {
                    ExprKind::Field { base, .. } => {
                        matches!(self.out.fields.get(&target.id), Some(FieldRef::DaArg(_)))
                            && expr_pure(base)
                    }
                    _ => !matches!(self.out.vars.get(&target.id), Some(VarRef::Global { .. })),
                };
                target_ok && expr_pure(value)
            }
            StmtKind::VarDecl { init, .. } => init.as_ref().is_none_or(expr_pure),
            StmtKind::Return(v) => v.as_ref().is_none_or(expr_pure),
            StmtKind::Rule(_) | StmtKind::Propose { .. } | StmtKind::Timeout { .. } => false,
        }
    }

    /// Name of the first impure operation in `e`, if any.
    fn impurity(&self, e: &Expr) -> Option<String> {
        let mut found = None;
        e.walk(&mut |x| {
            if found.is_some() {
                return;
            }
            match &x.kind {
                ExprKind::New(c) => found = Some(format!("new {c}")),
                ExprKind::Call { name, .. } => {
                    let pure = match self.out.calls.get(&x.id) {
                        Some(CallTarget::Builtin(b)) => b.signature().pure,
                        Some(CallTarget::Extension(n)) => {
                            self.extensions.get(n).is_some_and(|s| s.pure)
                        }
                        Some(CallTarget::User { .. }) => self
                            .out
                            .env
                            .functions
                            .get(name)
                            .is_some_and(|d| d.sig.pure),
                        None => true,
                    };
                    if !pure {
                        found = Some(name.clone());
                    }
                }
                _ => {}
            }
        });
        found
    }

    fn check_pure(&mut self, cond: &Expr) {
        let mut spans = Vec::new();
        cond.walk(&mut |x| {
            if matches!(x.kind, ExprKind::New(_) | ExprKind::Call { .. }) {
                if let Some(what) = self.impurity(x) {
                    if !spans.iter().any(|(w, _): &(String, Span)| *w == what) {
                        spans.push((what, x.span));
                    }
                }
            }
        });
        for (what, span) in spans {
            self.error(
                span,
                format!("conditions must be side-effect free, but `{what}` is not"),
            );
        }
    }

    // ---- variables ---------------------------------------------------

    fn lookup_var(&self, name: &str) -> Option<(VarRef, SemType)> {
        for scope in self.scopes.iter().rev() {
            if let Some(t) = scope.get(name) {
                return Some((VarRef::Local(name.to_string()), t.clone()));
            }
        }
        self.out.env.globals.get(name).map(|g| {
            (
                VarRef::Global {
                    module: g.module.clone(),
                    name: name.to_string(),
                },
                g.ty.clone(),
            )
        })
    }

    fn declare(&mut self, name: &str, ty: SemType, span: Span) -> VarRef {
        if let Some((prev, _)) = self.lookup_var(name) {
            let msg = match prev {
                VarRef::Global { module, .. } if module != self.module => {
                    format!("`{name}` is already defined in module `{module}`")
                }
                _ => format!("`{name}` is already defined"),
            };
            self.error(span, msg);
        }
        if self.mode == Mode::Init {
            self.out.env.globals.insert(
                name.to_string(),
                GlobalDef {
                    module: self.module.clone(),
                    ty,
                },
            );
            VarRef::Global {
                module: self.module.clone(),
                name: name.to_string(),
            }
        } else {
            if self.scopes.is_empty() {
                self.scopes.push(BTreeMap::new());
            }
            self.scopes
                .last_mut()
                .expect("scope")
                .insert(name.to_string(), ty);
            VarRef::Local(name.to_string())
        }
    }

    fn with_scope(&mut self, f: impl FnOnce(&mut Self)) {
        self.scopes.push(BTreeMap::new());
        f(self);
        self.scopes.pop();
    }

    // ---- statements --------------------------------------------------

    fn rule(&mut self, r: &Rule) {
        if !self.labels.insert(r.label.clone()) {
            self.error(r.span, format!("duplicate rule label `{}`", r.label));
        }
        if self.mode == Mode::Function {
            self.error(r.span, "rules cannot appear inside functions");
        }
        if self.in_deferred {
            self.error(
                r.span,
                "rules cannot appear inside propose or timeout blocks",
            );
        }
        let saved = self.mode;
        self.mode = Mode::Rule;
        self.with_scope(|c| {
            c.cond_root(&r.cond);
            c.with_scope(|c| c.stmt(&r.then));
            if let Some(e) = &r.els {
                c.with_scope(|c| c.stmt(e));
            }
        });
        self.mode = saved;
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Block(stmts) => self.with_scope(|c| stmts.iter().for_each(|s| c.stmt(s))),
            StmtKind::If { cond, then, els } => {
                self.cond_root(cond);
                self.with_scope(|c| c.stmt(then));
                if let Some(e) = els {
                    self.with_scope(|c| c.stmt(e));
                }
            }
            StmtKind::Rule(r) => self.rule(r),
            StmtKind::Expr(e) => {
                self.infer(e);
            }
            StmtKind::Assign { target, op, value } => self.assign(target, *op, value),
            StmtKind::VarDecl { ty, name, init } => {
                let t = self.type_name(&ty.name, ty.span);
                if t == SemType::Void {
                    self.error(ty.span, "variables cannot have type void");
                }
                if let Some(init) = init {
                    let vt = self.infer(init);
                    if !assignable(&t, &vt, self.schema) {
                        self.error(
                            init.span,
                            format!("cannot initialize `{name}` of type {t} with {vt}"),
                        );
                    }
                }
                self.declare(name, t, s.span);
            }
            StmtKind::Propose { body, .. } => {
                if self.mode != Mode::Rule {
                    self.error(s.span, "`propose` is only allowed inside rules");
                }
                if self.in_propose {
                    self.error(s.span, "`propose` blocks cannot be nested");
                }
                let (p, d) = (self.in_propose, self.in_deferred);
                self.in_propose = true;
                self.in_deferred = true;
                self.with_scope(|c| c.stmt(body));
                self.in_propose = p;
                self.in_deferred = d;
            }
            StmtKind::Timeout { delay, body, .. } => {
                if self.mode != Mode::Rule {
                    self.error(s.span, "`timeout` is only allowed inside rules");
                }
                let dt = self.infer(delay);
                if !matches!(dt, SemType::Int | SemType::Unknown) {
                    self.error(delay.span, format!("timeout delay must be int, found {dt}"));
                }
                if let ExprKind::Lit(Literal::Int(ms)) = delay.kind {
                    if ms < 0 {
                        self.error(delay.span, "timeout delay must not be negative");
                    }
                }
                let d = self.in_deferred;
                self.in_deferred = true;
                self.with_scope(|c| c.stmt(body));
                self.in_deferred = d;
            }
            StmtKind::Return(v) => {
                let Some(ret) = self.fn_ret.clone().filter(|_| self.mode == Mode::Function)
                else {
                    self.error(s.span, "`return` outside of a function");
                    if let Some(v) = v {
                        self.infer(v);
                    }
                    return;
                };
                match v {
                    None if ret != SemType::Void => {
                        self.error(s.span, format!("missing return value of type {ret}"))
                    }
                    None => {}
                    Some(v) => {
                        let vt = self.infer(v);
                        if ret == SemType::Void {
                            self.error(v.span, "void function cannot return a value");
                        } else if !assignable(&ret, &vt, self.schema) {
                            self.error(v.span, format!("expected return type {ret}, found {vt}"));
                        }
                    }
                }
            }
        }
    }

    fn assign(&mut self, target: &Expr, op: AssignOp, value: &Expr) {
        match &target.kind {
            ExprKind::Var(name) => {
                let existing = self.lookup_var(name);
                let vt = self.infer(value);
                let (var, ty) = match existing {
                    Some((var, ty)) => {
                        self.check_store(&ty, op, &vt, value.span, name);
                        (var, ty)
                    }
                    None => {
                        if let Lookup::Found(_) | Lookup::Ambiguous(_) =
                            self.schema.lookup_class(name)
                        {
                            self.error(target.span, format!("cannot assign to class `{name}`"));
                        }
                        if op != AssignOp::Set {
                            self.error(target.span, format!("`{name}` is not defined"));
                        }
                        if vt == SemType::Void {
                            self.error(value.span, "cannot assign a void value");
                        }
                        let var = self.declare(name, vt.clone(), target.span);
                        (var, vt)
                    }
                };
                self.out.vars.insert(target.id, var);
                self.out.types.insert(target.id, ty);
            }
            ExprKind::Field { base, name } => {
                let bt = self.infer(base);
                let ft = self.field(&bt, name, target);
                self.out.types.insert(target.id, ft.clone());
                let vt = self.infer(value);
                match self.out.fields.get(&target.id) {
                    Some(FieldRef::DaArg(_)) => {
                        if !matches!(base.kind, ExprKind::Var(_)) {
                            self.error(
                                target.span,
                                "dialogue act arguments can only be set through a variable",
                            );
                        }
                        if op != AssignOp::Set {
                            self.error(target.span, "dialogue act arguments only support `=`");
                        }
                        if !renderable(&vt) {
                            self.error(
                                value.span,
                                format!("a value of type {vt} cannot be a dialogue act argument"),
                            );
                        }
                    }
                    Some(FieldRef::Property(_)) => {
                        if matches!(ft, SemType::Collection(_)) && op != AssignOp::Set {
                            self.error(
                                target.span,
                                format!("`{name}` holds several values and only supports `=`"),
                            );
                        } else {
                            self.check_store(&ft, op, &vt, value.span, name);
                        }
                    }
                    None => {}
                }
            }
            _ => self.error(target.span, "invalid assignment target"),
        }
    }

    fn check_store(&mut self, target: &SemType, op: AssignOp, vt: &SemType, span: Span, what: &str) {
        let result = match op {
            AssignOp::Set => vt.clone(),
            AssignOp::Add | AssignOp::Sub => {
                let bop = if op == AssignOp::Add { BinOp::Add } else { BinOp::Sub };
                if *target == SemType::Unknown || *vt == SemType::Unknown {
                    return;
                }
                match resolve_overload(bop, target, vt) {
                    Ok(r) => r.result_type(bop, target, vt),
                    Err(e) => {
                        self.error(span, e);
                        return;
                    }
                }
            }
        };
        if !assignable(target, &result, self.schema) {
            self.error(span, format!("cannot assign {result} to `{what}` of type {target}"));
        }
    }

    // ---- expressions -------------------------------------------------

    fn cond_root(&mut self, e: &Expr) {
        self.cond(e);
        self.conditions.push(e.clone());
    }

    /// Checks an expression in truth position: booleans are tested, anything
    /// else is tested for existence.
    fn cond(&mut self, e: &Expr) {
        let t = self.infer(e);
        match (&t, &e.kind) {
            (SemType::Boolean | SemType::Unknown, _) => {}
            (SemType::Void, _) => self.error(e.span, "a void expression cannot be a condition"),
            (_, ExprKind::Lit(_) | ExprKind::Interp(_) | ExprKind::Da(_)) => {
                self.error(e.span, format!("a constant of type {t} cannot be a condition"))
            }
            (SemType::Class(_), _) => self.error(e.span, "a class cannot be a condition"),
            _ => {}
        }
    }

    pub(super) fn infer(&mut self, e: &Expr) -> SemType {
        let t = self.infer_inner(e);
        self.out.types.insert(e.id, t.clone());
        t
    }

    fn infer_inner(&mut self, e: &Expr) -> SemType {
        match &e.kind {
            ExprKind::Lit(Literal::Int(_)) => SemType::Int,
            ExprKind::Lit(Literal::Decimal(_)) => SemType::Decimal,
            ExprKind::Lit(Literal::Str(_)) => SemType::String,
            ExprKind::Lit(Literal::Bool(_)) => SemType::Boolean,
            ExprKind::Interp(parts) => {
                for p in parts {
                    if let InterpPart::Expr(x) = p {
                        let t = self.infer(x);
                        if !renderable(&t) {
                            self.error(x.span, format!("cannot insert a value of type {t} into a string"));
                        }
                    }
                }
                SemType::String
            }
            ExprKind::Var(name) => self.var(name, e),
            ExprKind::Field { base, name } => {
                let bt = self.infer(base);
                self.field(&bt, name, e)
            }
            ExprKind::Call { name, args } => self.call(name, args, e),
            ExprKind::New(class) => match self.class(class, e.span) {
                Some(c) => {
                    self.out.classes.insert(e.id, c.clone());
                    SemType::Object(c)
                }
                None => SemType::Unknown,
            },
            ExprKind::Da(da) => self.da(da, e),
            ExprKind::Unary { op: UnOp::Not, expr } => {
                self.cond(expr);
                SemType::Boolean
            }
            ExprKind::Unary { op: UnOp::Neg, expr } => {
                let t = self.infer(expr);
                match t {
                    SemType::Int | SemType::Decimal | SemType::Unknown => t,
                    other => {
                        self.error(e.span, format!("cannot negate a value of type {other}"));
                        SemType::Unknown
                    }
                }
            }
            ExprKind::Binary { op: BinOp::And | BinOp::Or, lhs, rhs } => {
                self.cond(lhs);
                self.cond(rhs);
                self.out.ops.insert(e.id, ResolvedOp::Logic);
                SemType::Boolean
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let lt = self.infer(lhs);
                let rt = self.infer(rhs);
                let fallback = if op.is_comparison() {
                    SemType::Boolean
                } else {
                    SemType::Unknown
                };
                if lt == SemType::Unknown || rt == SemType::Unknown {
                    return fallback;
                }
                match resolve_overload(*op, &lt, &rt) {
                    Ok(r) => {
                        self.out.ops.insert(e.id, r);
                        r.result_type(*op, &lt, &rt)
                    }
                    Err(msg) => {
                        self.error(e.span, msg);
                        fallback
                    }
                }
            }
        }
    }

    fn class(&mut self, name: &str, span: Span) -> Option<Resource> {
        match self.schema.lookup_class(name) {
            Lookup::Found(c) => Some(c.clone()),
            Lookup::Missing => {
                self.error(span, format!("unknown class `{name}`"));
                None
            }
            Lookup::Ambiguous(cs) => {
                let msg = format!("class name `{name}` is ambiguous ({})", join_iris(cs));
                self.error(span, msg);
                None
            }
        }
    }

    fn var(&mut self, name: &str, e: &Expr) -> SemType {
        if let Some((var, t)) = self.lookup_var(name) {
            self.out.vars.insert(e.id, var);
            return t;
        }
        match self.schema.lookup_class(name) {
            Lookup::Found(c) => {
                let c = c.clone();
                self.out.vars.insert(e.id, VarRef::Class(c.clone()));
                SemType::Class(c)
            }
            Lookup::Ambiguous(_) => {
                self.class(name, e.span);
                SemType::Unknown
            }
            Lookup::Missing => {
                self.error(e.span, format!("unknown variable `{name}`"));
                SemType::Unknown
            }
        }
    }

    fn field(&mut self, base: &SemType, name: &str, e: &Expr) -> SemType {
        match base {
            SemType::Object(class) => {
                let candidates: Vec<PropertySpec> = self
                    .schema
                    .lookup_properties(name)
                    .iter()
                    .filter_map(|p| self.schema.property(p).cloned())
                    .collect();
                if candidates.is_empty() {
                    self.error(e.span, format!("unknown property `{name}`"));
                    return SemType::Unknown;
                }
                let applicable: Vec<&PropertySpec> = candidates
                    .iter()
                    .filter(|p| self.schema.subsumed_by(class, &p.domain))
                    .collect();
                match applicable.as_slice() {
                    [spec] => {
                        let t = SemType::of_property(spec);
                        self.out.fields.insert(e.id, FieldRef::Property((*spec).clone()));
                        t
                    }
                    [] => {
                        let domains: Vec<&str> =
                            candidates.iter().map(|p| p.domain.local_name()).collect();
                        self.error(
                            e.span,
                            format!(
                                "domain mismatch: property `{name}` applies to {}, not to {}",
                                domains.join(" or "),
                                class.local_name()
                            ),
                        );
                        SemType::Unknown
                    }
                    many => {
                        let iris: Vec<Resource> = many.iter().map(|p| p.property.clone()).collect();
                        self.error(
                            e.span,
                            format!("property name `{name}` is ambiguous ({})", join_iris(&iris)),
                        );
                        SemType::Unknown
                    }
                }
            }
            SemType::DialogueAct => {
                self.out.fields.insert(e.id, FieldRef::DaArg(name.to_string()));
                SemType::String
            }
            SemType::Unknown => SemType::Unknown,
            SemType::Collection(_) => {
                self.error(e.span, format!("cannot access `{name}`: a collection has no properties"));
                SemType::Unknown
            }
            SemType::Class(c) => {
                self.error(
                    e.span,
                    format!("cannot access `{name}`: class {} has no properties", c.local_name()),
                );
                SemType::Unknown
            }
            other => {
                self.error(
                    e.span,
                    format!("cannot access `{name}`: a scalar has no properties (found {other})"),
                );
                SemType::Unknown
            }
        }
    }

    fn call(&mut self, name: &str, args: &[Expr], e: &Expr) -> SemType {
        let arg_types: Vec<SemType> = args.iter().map(|a| self.infer(a)).collect();
        let (target, sig) = if let Some(def) = self.out.env.functions.get(name) {
            (
                CallTarget::User {
                    module: def.module.clone(),
                    name: name.to_string(),
                },
                def.sig.clone(),
            )
        } else if let Some(sig) = self.extensions.get(name) {
            (CallTarget::Extension(name.to_string()), sig.clone())
        } else if let Some(b) = Builtin::from_name(name) {
            (CallTarget::Builtin(b), b.signature())
        } else {
            self.error(e.span, format!("unknown function `{name}`"));
            return SemType::Unknown;
        };
        if sig.params.len() != args.len() {
            self.error(
                e.span,
                format!(
                    "`{name}` takes {} argument(s), found {}",
                    sig.params.len(),
                    args.len()
                ),
            );
        } else {
            for (i, ((p, a), arg)) in sig.params.iter().zip(&arg_types).zip(args).enumerate() {
                if !assignable(p, a, self.schema) {
                    self.error(
                        arg.span,
                        format!("argument {} of `{name}` expects {p}, found {a}", i + 1),
                    );
                }
            }
        }
        self.out.calls.insert(e.id, target);
        sig.ret
    }

    fn da(&mut self, da: &DaLiteral, e: &Expr) -> SemType {
        let token = match self.schema.lookup_class(&da.token) {
            Lookup::Found(c) if self.schema.is_da_token(c) => Some(c.clone()),
            Lookup::Found(_) => {
                self.error(e.span, format!("`{}` is not a dialogue act type", da.token));
                None
            }
            Lookup::Missing => {
                self.error(e.span, format!("unknown dialogue act type `{}`", da.token));
                None
            }
            Lookup::Ambiguous(_) => self.class(&da.token, e.span),
        };
        let frame = da.frame.as_ref().and_then(|f| match self.schema.lookup_class(f) {
            Lookup::Found(c) if self.schema.is_frame(c) => Some(c.clone()),
            Lookup::Found(_) => {
                self.error(e.span, format!("`{f}` is not a frame"));
                None
            }
            Lookup::Missing => {
                self.error(e.span, format!("unknown frame `{f}`"));
                None
            }
            Lookup::Ambiguous(_) => self.class(f, e.span),
        });
        for a in &da.args {
            if let DaArgValue::Expr(x) = &a.value {
                let t = self.infer(x);
                if !renderable(&t) {
                    self.error(
                        x.span,
                        format!("a value of type {t} cannot be a dialogue act argument"),
                    );
                }
            }
        }
        if let Some(token) = token {
            if da.frame.is_none() || frame.is_some() {
                self.out.das.insert(e.id, DaInfo { token, frame });
            }
        }
        SemType::DialogueAct
    }
}
