use super::ast::*;
use super::lexer::{position, tokenize_at, StrSegment, Token, TokenKind};
use super::ParseError;

const MAX_DEPTH: usize = 96;

pub(crate) struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    next_id: u32,
    depth: usize,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    pub(crate) fn new(src: &'a str, toks: Vec<Token>) -> Self {
        Parser {
            src,
            toks,
            pos: 0,
            next_id: 0,
            depth: 0,
        }
    }

    fn peek(&self) -> Option<&TokenKind> {
        self.toks.get(self.pos).map(|t| &t.kind)
    }

    fn peek_at(&self, n: usize) -> Option<&TokenKind> {
        self.toks.get(self.pos + n).map(|t| &t.kind)
    }

    fn span(&self) -> Span {
        match self.toks.get(self.pos) {
            Some(t) => t.span,
            None => self.eof_span(),
        }
    }

    fn eof_span(&self) -> Span {
        let (line, col) = position(self.src, self.src.len());
        Span {
            start: self.src.len(),
            end: self.src.len(),
            line,
            col,
        }
    }

    fn prev_span(&self) -> Span {
        if self.pos == 0 {
            return self.span();
        }
        self.toks[self.pos - 1].span
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at(&self, kind: &TokenKind) -> bool {
        self.peek() == Some(kind)
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.at(kind) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let at = self.span();
        let found = match self.peek() {
            Some(k) => k.to_string(),
            None => "end of input".to_string(),
        };
        ParseError {
            line: at.line,
            col: at.col,
            message: format!("unexpected {found}"),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn error_at(&self, at: Span, message: impl Into<String>) -> ParseError {
        ParseError {
            line: at.line,
            col: at.col,
            message: message.into(),
            expected: Vec::new(),
        }
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Span> {
        if self.at(&kind) {
            Ok(self.bump().map(|t| t.span).unwrap_or_default())
        } else {
            Err(self.unexpected(&[&kind.to_string()]))
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek() {
            Some(TokenKind::Ident(_)) => match self.bump() {
                Some(Token {
                    kind: TokenKind::Ident(s),
                    span,
                }) => Ok((s, span)),
                _ => unreachable!(),
            },
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    /// A plain (non-interpolated) string literal.
    fn plain_string(&mut self) -> PResult<String> {
        let at = self.span();
        match self.peek() {
            Some(TokenKind::Str(segs)) => {
                let s = match segs.as_slice() {
                    [StrSegment::Lit(s)] => s.clone(),
                    _ => return Err(self.error_at(at, "expected a constant string")),
                };
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected(&["string"])),
        }
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error_at(self.span(), "nesting too deep"));
        }
        Ok(())
    }

    fn fresh_id(&mut self) -> ExprId {
        let id = ExprId(self.next_id);
        self.next_id += 1;
        id
    }

    fn mk(&mut self, kind: ExprKind, span: Span) -> Expr {
        Expr {
            id: self.fresh_id(),
            kind,
            span,
        }
    }

    pub(crate) fn finish(&self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.unexpected(&["end of input"])),
        }
    }

    pub(crate) fn module(&mut self, name: &str) -> PResult<ModuleAst> {
        let mut items = Vec::new();
        while self.peek().is_some() {
            items.push(self.item()?);
        }
        Ok(ModuleAst {
            name: name.to_string(),
            items,
        })
    }

    fn is_rule_start(&self) -> bool {
        matches!(self.peek(), Some(TokenKind::Ident(_)))
            && self.peek_at(1) == Some(&TokenKind::Colon)
    }

    fn item(&mut self) -> PResult<Item> {
        let start = self.span();
        match self.peek() {
            Some(TokenKind::Import) => {
                self.bump();
                let (module, _) = self.ident()?;
                self.expect(TokenKind::Semi)?;
                Ok(Item::Import(Import {
                    module,
                    span: start.to(self.prev_span()),
                }))
            }
            Some(TokenKind::If) => Err(self.error_at(
                start,
                "top-level `if` must be a labelled rule (`label: if (...)`)",
            )),
            Some(TokenKind::Propose | TokenKind::Timeout | TokenKind::Return) => Err(self
                .error_at(
                    start,
                    "`propose`, `timeout` and `return` are only allowed inside rules and functions",
                )),
            Some(TokenKind::Ident(_)) if self.is_rule_start() => Ok(Item::Rule(self.rule()?)),
            Some(TokenKind::Ident(_))
                if matches!(self.peek_at(1), Some(TokenKind::Ident(_)))
                    && self.peek_at(2) == Some(&TokenKind::LParen) =>
            {
                Ok(Item::Function(self.function()?))
            }
            _ => Ok(Item::Stmt(self.statement()?)),
        }
    }

    fn function(&mut self) -> PResult<FunDef> {
        let start = self.span();
        let (ret, ret_span) = self.ident()?;
        let (name, _) = self.ident()?;
        self.expect(TokenKind::LParen)?;
        let mut params = Vec::new();
        if !self.at(&TokenKind::RParen) {
            loop {
                let pstart = self.span();
                let (ty, ty_span) = self.ident()?;
                let (pname, _) = self.ident()?;
                params.push(Param {
                    ty: TypeName { name: ty, span: ty_span },
                    name: pname,
                    span: pstart.to(self.prev_span()),
                });
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
        }
        self.expect(TokenKind::RParen)?;
        if !self.at(&TokenKind::LBrace) {
            return Err(self.unexpected(&["`{`"]));
        }
        let body = match self.statement()?.kind {
            StmtKind::Block(stmts) => stmts,
            _ => unreachable!(),
        };
        Ok(FunDef {
            ret: TypeName {
                name: ret,
                span: ret_span,
            },
            name,
            params,
            body,
            span: start.to(self.prev_span()),
        })
    }

    fn rule(&mut self) -> PResult<Rule> {
        let start = self.span();
        let (label, _) = self.ident()?;
        self.expect(TokenKind::Colon)?;
        if !self.at(&TokenKind::If) {
            return Err(self.unexpected(&["`if`"]));
        }
        let (cond, then, els) = self.if_parts()?;
        Ok(Rule {
            label,
            cond,
            then,
            els,
            span: start.to(self.prev_span()),
        })
    }

    #[allow(clippy::type_complexity)]
    fn if_parts(&mut self) -> PResult<(Expr, Box<Stmt>, Option<Box<Stmt>>)> {
        self.expect(TokenKind::If)?;
        self.expect(TokenKind::LParen)?;
        let cond = self.expr()?;
        self.expect(TokenKind::RParen)?;
        let then = Box::new(self.statement()?);
        let els = if self.eat(&TokenKind::Else) {
            Some(Box::new(self.statement()?))
        } else {
            None
        };
        Ok((cond, then, els))
    }

    fn statement(&mut self) -> PResult<Stmt> {
        self.enter()?;
        let r = self.statement_inner();
        self.depth -= 1;
        r
    }

    fn statement_inner(&mut self) -> PResult<Stmt> {
        let start = self.span();
        let kind = match self.peek() {
            None => {
                return Err(self.unexpected(&["statement"]));
            }
            Some(TokenKind::LBrace) => {
                self.bump();
                let mut stmts = Vec::new();
                while !self.at(&TokenKind::RBrace) {
                    if self.peek().is_none() {
                        return Err(self.unexpected(&["`}`", "statement"]));
                    }
                    stmts.push(self.statement()?);
                }
                self.bump();
                StmtKind::Block(stmts)
            }
            Some(TokenKind::If) => {
                let (cond, then, els) = self.if_parts()?;
                StmtKind::If { cond, then, els }
            }
            Some(TokenKind::Ident(_)) if self.is_rule_start() => StmtKind::Rule(self.rule()?),
            Some(TokenKind::Propose) => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let label = self.plain_string()?;
                self.expect(TokenKind::RParen)?;
                let body = Box::new(self.statement()?);
                StmtKind::Propose { label, body }
            }
            Some(TokenKind::Timeout) => {
                self.bump();
                self.expect(TokenKind::LParen)?;
                let name = self.plain_string()?;
                self.expect(TokenKind::Comma)?;
                let delay = self.expr()?;
                self.expect(TokenKind::RParen)?;
                let body = Box::new(self.statement()?);
                StmtKind::Timeout { name, delay, body }
            }
            Some(TokenKind::Return) => {
                self.bump();
                let value = if self.at(&TokenKind::Semi) {
                    None
                } else {
                    Some(self.expr()?)
                };
                self.expect(TokenKind::Semi)?;
                StmtKind::Return(value)
            }
            Some(TokenKind::Ident(_))
                if matches!(self.peek_at(1), Some(TokenKind::Ident(_)))
                    && matches!(
                        self.peek_at(2),
                        Some(TokenKind::Assign | TokenKind::Semi)
                    ) =>
            {
                let (ty, ty_span) = self.ident()?;
                let (name, _) = self.ident()?;
                let init = if self.eat(&TokenKind::Assign) {
                    Some(self.expr()?)
                } else {
                    None
                };
                self.expect(TokenKind::Semi)?;
                StmtKind::VarDecl {
                    ty: TypeName { name: ty, span: ty_span },
                    name,
                    init,
                }
            }
            Some(_) => {
                let target = self.expr()?;
                let op = match self.peek() {
                    Some(TokenKind::Assign) => Some(AssignOp::Set),
                    Some(TokenKind::PlusAssign) => Some(AssignOp::Add),
                    Some(TokenKind::MinusAssign) => Some(AssignOp::Sub),
                    _ => None,
                };
                let kind = match op {
                    Some(op) => {
                        if !matches!(target.kind, ExprKind::Var(_) | ExprKind::Field { .. }) {
                            return Err(self.error_at(
                                target.span,
                                "left side of an assignment must be a variable or field",
                            ));
                        }
                        self.bump();
                        let value = self.expr()?;
                        StmtKind::Assign { target, op, value }
                    }
                    None => StmtKind::Expr(target),
                };
                if !self.at(&TokenKind::Semi) {
                    let expected: &[&str] = if op.is_some() {
                        &["`;`"]
                    } else {
                        &["`;`", "`=`", "`+=`", "`-=`"]
                    };
                    return Err(self.unexpected(expected));
                }
                self.bump();
                kind
            }
        };
        Ok(Stmt {
            kind,
            span: start.to(self.prev_span()),
        })
    }

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.enter()?;
        let r = self.binary(1);
        self.depth -= 1;
        r
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek()? {
            TokenKind::OrOr => BinOp::Or,
            TokenKind::AndAnd => BinOp::And,
            TokenKind::EqEq => BinOp::Eq,
            TokenKind::Ne => BinOp::Ne,
            TokenKind::Lt => BinOp::Lt,
            TokenKind::Le => BinOp::Le,
            TokenKind::Gt => BinOp::Gt,
            TokenKind::Ge => BinOp::Ge,
            TokenKind::Plus => BinOp::Add,
            TokenKind::Minus => BinOp::Sub,
            TokenKind::Star => BinOp::Mul,
            TokenKind::Slash => BinOp::Div,
            TokenKind::Percent => BinOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            if op.precedence() < min_prec {
                break;
            }
            self.bump();
            self.enter()?;
            let rhs = self.binary(op.precedence() + 1);
            self.depth -= 1;
            let rhs = rhs?;
            let span = lhs.span.to(rhs.span);
            lhs = self.mk(
                ExprKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
                span,
            );
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let op = match self.peek() {
            Some(TokenKind::Not) => UnOp::Not,
            Some(TokenKind::Minus) => UnOp::Neg,
            _ => return self.postfix(),
        };
        self.bump();
        self.enter()?;
        let inner = self.unary();
        self.depth -= 1;
        let inner = inner?;
        let span = start.to(inner.span);
        Ok(self.mk(
            ExprKind::Unary {
                op,
                expr: Box::new(inner),
            },
            span,
        ))
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while self.at(&TokenKind::Dot) {
            self.bump();
            let (name, nspan) = self.ident()?;
            if self.at(&TokenKind::LParen) {
                return Err(self.error_at(nspan, "method calls are not supported"));
            }
            let span = e.span.to(nspan);
            e = self.mk(
                ExprKind::Field {
                    base: Box::new(e),
                    name,
                },
                span,
            );
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.span();
        let Some(kind) = self.peek().cloned() else {
            return Err(self.unexpected(&["expression"]));
        };
        match kind {
            TokenKind::Int(i) => {
                self.bump();
                Ok(self.mk(ExprKind::Lit(Literal::Int(i)), start))
            }
            TokenKind::Decimal(d) => {
                self.bump();
                Ok(self.mk(ExprKind::Lit(Literal::Decimal(d)), start))
            }
            TokenKind::True | TokenKind::False => {
                self.bump();
                Ok(self.mk(
                    ExprKind::Lit(Literal::Bool(kind == TokenKind::True)),
                    start,
                ))
            }
            TokenKind::Str(segs) => {
                self.bump();
                self.string_expr(segs, start)
            }
            TokenKind::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::New => {
                self.bump();
                let (class, cspan) = self.ident()?;
                Ok(self.mk(ExprKind::New(class), start.to(cspan)))
            }
            TokenKind::Hash => self.da_literal(),
            TokenKind::Ident(name) => {
                self.bump();
                if self.at(&TokenKind::LParen) {
                    self.bump();
                    let mut args = Vec::new();
                    if !self.at(&TokenKind::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat(&TokenKind::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect(TokenKind::RParen)?;
                    let span = start.to(self.prev_span());
                    Ok(self.mk(ExprKind::Call { name, args }, span))
                } else {
                    Ok(self.mk(ExprKind::Var(name), start))
                }
            }
            _ => Err(self.unexpected(&["expression"])),
        }
    }

    fn string_expr(&mut self, segs: Vec<StrSegment>, span: Span) -> PResult<Expr> {
        if let [StrSegment::Lit(s)] = segs.as_slice() {
            return Ok(self.mk(ExprKind::Lit(Literal::Str(s.clone())), span));
        }
        let mut parts = Vec::new();
        for seg in segs {
            match seg {
                StrSegment::Lit(s) => parts.push(InterpPart::Lit(s)),
                StrSegment::Expr { src, offset } => {
                    parts.push(InterpPart::Expr(self.embedded(&src, offset)?))
                }
            }
        }
        Ok(self.mk(ExprKind::Interp(parts), span))
    }

    /// Parses an expression embedded in a string literal, continuing this
    /// parser's id sequence.
    fn embedded(&mut self, src: &str, offset: usize) -> PResult<Expr> {
        let (line, col) = position(self.src, offset);
        let toks = tokenize_at(src, offset, line, col)?;
        let mut sub = Parser {
            src: self.src,
            toks,
            pos: 0,
            next_id: self.next_id,
            depth: self.depth,
        };
        let e = sub.expr()?;
        if sub.peek().is_some() {
            return Err(sub.unexpected(&["`}`"]));
        }
        self.next_id = sub.next_id;
        Ok(e)
    }

    fn da_literal(&mut self) -> PResult<Expr> {
        let start = self.expect(TokenKind::Hash)?;
        let (token, tspan) = self.ident()?;
        let mut da = DaLiteral {
            token,
            frame: None,
            args: Vec::new(),
        };
        let mut end = tspan;
        if self.eat(&TokenKind::LParen) {
            let mut first = true;
            while !self.at(&TokenKind::RParen) {
                let astart = self.span();
                let (key, _) = self.ident()?;
                if self.eat(&TokenKind::Assign) {
                    let value = self.da_value()?;
                    if da.args.iter().any(|a| a.key == key) {
                        return Err(self.error_at(astart, format!("duplicate argument `{key}`")));
                    }
                    da.args.push(DaArg {
                        key,
                        value,
                        span: astart.to(self.prev_span()),
                    });
                } else if first {
                    da.frame = Some(key);
                } else {
                    return Err(self.unexpected(&["`=`"]));
                }
                first = false;
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            end = self.expect(TokenKind::RParen)?;
        }
        Ok(self.mk(ExprKind::Da(da), start.to(end)))
    }

    fn da_value(&mut self) -> PResult<DaArgValue> {
        let at = self.span();
        match self.peek().cloned() {
            Some(TokenKind::Ident(s)) => {
                self.bump();
                Ok(DaArgValue::Const(s))
            }
            Some(TokenKind::Int(i)) => {
                self.bump();
                Ok(DaArgValue::Const(i.to_string()))
            }
            Some(TokenKind::Decimal(d)) => {
                self.bump();
                Ok(DaArgValue::Const(d.to_string()))
            }
            Some(TokenKind::True | TokenKind::False) => {
                let t = self.bump().map(|t| t.kind == TokenKind::True);
                Ok(DaArgValue::Const(t.unwrap_or_default().to_string()))
            }
            Some(TokenKind::Str(segs)) => {
                self.bump();
                match segs.as_slice() {
                    [StrSegment::Lit(s)] => Ok(DaArgValue::Const(s.clone())),
                    _ => Ok(DaArgValue::Expr(Box::new(self.string_expr(segs, at)?))),
                }
            }
            Some(TokenKind::LBrace) => {
                self.bump();
                let e = self.expr()?;
                self.expect(TokenKind::RBrace)?;
                Ok(DaArgValue::Expr(Box::new(e)))
            }
            _ => Err(self.unexpected(&["identifier", "string", "number", "`{`"])),
        }
    }
}
