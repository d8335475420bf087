use std::fmt;

use super::ast::Span;
use super::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub enum StrSegment {
    Lit(String),
    /// Source of an embedded `{expr}`; `offset` is the byte position of the
    /// expression text in the enclosing source.
    Expr { src: String, offset: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Decimal(f64),
    Str(Vec<StrSegment>),
    If,
    Else,
    Import,
    New,
    Propose,
    Timeout,
    Return,
    True,
    False,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Dot,
    Hash,
    Assign,
    PlusAssign,
    MinusAssign,
    EqEq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Not,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenKind::Ident(_) => "identifier",
            TokenKind::Int(_) => "integer",
            TokenKind::Decimal(_) => "decimal",
            TokenKind::Str(_) => "string",
            TokenKind::If => "`if`",
            TokenKind::Else => "`else`",
            TokenKind::Import => "`import`",
            TokenKind::New => "`new`",
            TokenKind::Propose => "`propose`",
            TokenKind::Timeout => "`timeout`",
            TokenKind::Return => "`return`",
            TokenKind::True => "`true`",
            TokenKind::False => "`false`",
            TokenKind::LParen => "`(`",
            TokenKind::RParen => "`)`",
            TokenKind::LBrace => "`{`",
            TokenKind::RBrace => "`}`",
            TokenKind::Comma => "`,`",
            TokenKind::Semi => "`;`",
            TokenKind::Colon => "`:`",
            TokenKind::Dot => "`.`",
            TokenKind::Hash => "`#`",
            TokenKind::Assign => "`=`",
            TokenKind::PlusAssign => "`+=`",
            TokenKind::MinusAssign => "`-=`",
            TokenKind::EqEq => "`==`",
            TokenKind::Ne => "`!=`",
            TokenKind::Lt => "`<`",
            TokenKind::Le => "`<=`",
            TokenKind::Gt => "`>`",
            TokenKind::Ge => "`>=`",
            TokenKind::AndAnd => "`&&`",
            TokenKind::OrOr => "`||`",
            TokenKind::Not => "`!`",
            TokenKind::Plus => "`+`",
            TokenKind::Minus => "`-`",
            TokenKind::Star => "`*`",
            TokenKind::Slash => "`/`",
            TokenKind::Percent => "`%`",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

struct Lexer<'a> {
    src: &'a str,
    /// Added to every byte offset (non-zero when lexing an embedded expression).
    base: usize,
    pos: usize,
    line: u32,
    col: u32,
}

/// Splits `text` into tokens, skipping whitespace and comments.
pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    tokenize_at(text, 0, 1, 1)
}

pub(crate) fn tokenize_at(
    text: &str,
    base: usize,
    line: u32,
    col: u32,
) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        src: text,
        base,
        pos: 0,
        line,
        col,
    };
    let mut out = Vec::new();
    while let Some(tok) = lx.next_token()? {
        out.push(tok);
    }
    Ok(out)
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.src[self.pos..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn here(&self) -> Span {
        Span {
            start: self.base + self.pos,
            end: self.base + self.pos,
            line: self.line,
            col: self.col,
        }
    }

    fn error(&self, at: Span, message: impl Into<String>) -> ParseError {
        ParseError {
            line: at.line,
            col: at.col,
            message: message.into(),
            expected: Vec::new(),
        }
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match (self.peek(), self.peek2()) {
                (Some(c), _) if c.is_whitespace() => {
                    self.bump();
                }
                (Some('/'), Some('/')) => {
                    while !matches!(self.peek(), None | Some('\n')) {
                        self.bump();
                    }
                }
                (Some('/'), Some('*')) => {
                    let start = self.here();
                    self.bump();
                    self.bump();
                    loop {
                        match (self.peek(), self.peek2()) {
                            (None, _) => return Err(self.error(start, "unterminated comment")),
                            (Some('*'), Some('/')) => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            _ => {
                                self.bump();
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn next_token(&mut self) -> Result<Option<Token>, ParseError> {
        self.skip_trivia()?;
        let start = self.here();
        let Some(c) = self.bump() else {
            return Ok(None);
        };
        let two = |lx: &mut Self, next: char, yes: TokenKind, no: TokenKind| {
            if lx.peek() == Some(next) {
                lx.bump();
                yes
            } else {
                no
            }
        };
        let kind = match c {
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            '{' => TokenKind::LBrace,
            '}' => TokenKind::RBrace,
            ',' => TokenKind::Comma,
            ';' => TokenKind::Semi,
            ':' => TokenKind::Colon,
            '.' => TokenKind::Dot,
            '#' => TokenKind::Hash,
            '*' => TokenKind::Star,
            '/' => TokenKind::Slash,
            '%' => TokenKind::Percent,
            '=' => two(self, '=', TokenKind::EqEq, TokenKind::Assign),
            '!' => two(self, '=', TokenKind::Ne, TokenKind::Not),
            '<' => two(self, '=', TokenKind::Le, TokenKind::Lt),
            '>' => two(self, '=', TokenKind::Ge, TokenKind::Gt),
            '+' => two(self, '=', TokenKind::PlusAssign, TokenKind::Plus),
            '-' => two(self, '=', TokenKind::MinusAssign, TokenKind::Minus),
            '&' if self.peek() == Some('&') => {
                self.bump();
                TokenKind::AndAnd
            }
            '|' if self.peek() == Some('|') => {
                self.bump();
                TokenKind::OrOr
            }
            '"' => self.string(start)?,
            c if c.is_ascii_digit() => self.number(start)?,
            c if c.is_alphabetic() || c == '_' => {
                while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                    self.bump();
                }
                let word = &self.src[start.start - self.base..self.pos];
                match word {
                    "if" => TokenKind::If,
                    "else" => TokenKind::Else,
                    "import" => TokenKind::Import,
                    "new" => TokenKind::New,
                    "propose" => TokenKind::Propose,
                    "timeout" => TokenKind::Timeout,
                    "return" => TokenKind::Return,
                    "true" => TokenKind::True,
                    "false" => TokenKind::False,
                    _ => TokenKind::Ident(word.to_string()),
                }
            }
            other => return Err(self.error(start, format!("unexpected character {other:?}"))),
        };
        let mut span = start;
        span.end = self.base + self.pos;
        Ok(Some(Token { kind, span }))
    }

    fn number(&mut self, start: Span) -> Result<TokenKind, ParseError> {
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        let is_decimal = self.peek() == Some('.') && self.peek2().is_some_and(|c| c.is_ascii_digit());
        if is_decimal {
            self.bump();
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.bump();
            }
        }
        let text = &self.src[start.start - self.base..self.pos];
        if is_decimal {
            text.parse()
                .map(TokenKind::Decimal)
                .map_err(|_| self.error(start, "invalid decimal literal"))
        } else {
            text.parse()
                .map(TokenKind::Int)
                .map_err(|_| self.error(start, "integer literal out of range"))
        }
    }

    /// String literal; `{...}` starts an embedded expression, `\{` is a
    /// literal brace.
    fn string(&mut self, start: Span) -> Result<TokenKind, ParseError> {
        let mut segments = Vec::new();
        let mut lit = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(self.error(start, "unterminated string literal"));
            };
            match c {
                '"' => break,
                '\\' => {
                    let esc = self.bump();
                    lit.push(match esc {
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('r') => '\r',
                        Some(c @ ('"' | '\\' | '{' | '}')) => c,
                        _ => return Err(self.error(start, "invalid escape sequence in string")),
                    });
                }
                '{' => {
                    if !lit.is_empty() {
                        segments.push(StrSegment::Lit(std::mem::take(&mut lit)));
                    }
                    let offset = self.base + self.pos;
                    let expr_start = self.pos;
                    let mut depth = 0usize;
                    loop {
                        match self.peek() {
                            None => return Err(self.error(start, "unterminated string literal")),
                            Some('}') if depth == 0 => break,
                            Some('}') => depth -= 1,
                            Some('{') => depth += 1,
                            Some('"') => {
                                return Err(self.error(
                                    self.here(),
                                    "string literals are not allowed inside interpolation",
                                ))
                            }
                            _ => {}
                        }
                        self.bump();
                    }
                    let src = self.src[expr_start..self.pos].to_string();
                    self.bump();
                    segments.push(StrSegment::Expr { src, offset });
                }
                c => lit.push(c),
            }
        }
        if !lit.is_empty() || segments.is_empty() {
            segments.push(StrSegment::Lit(lit));
        }
        Ok(TokenKind::Str(segments))
    }
}

/// Line and column of byte `offset` in `src`.
pub(crate) fn position(src: &str, offset: usize) -> (u32, u32) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() as u32 + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32 + 1;
    (line, col)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(text).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn comparison() {
        assert_eq!(
            kinds("user.age <= 0"),
            vec![
                TokenKind::Ident("user".into()),
                TokenKind::Dot,
                TokenKind::Ident("age".into()),
                TokenKind::Le,
                TokenKind::Int(0)
            ]
        );
    }

    #[test]
    fn empty_and_comments() {
        assert!(kinds("").is_empty());
        assert!(kinds("  // line\n /* block\n */ ").is_empty());
    }

    #[test]
    fn interpolated_string() {
        let toks = kinds("\"a{user.name}b\"");
        assert_eq!(
            toks,
            vec![TokenKind::Str(vec![
                StrSegment::Lit("a".into()),
                StrSegment::Expr {
                    src: "user.name".into(),
                    offset: 3
                },
                StrSegment::Lit("b".into()),
            ])]
        );
    }

    #[test]
    fn unterminated() {
        let e = tokenize("x = \"abc").unwrap_err();
        assert_eq!((e.line, e.col), (1, 5));
        let e = tokenize("\n  /* never").unwrap_err();
        assert_eq!((e.line, e.col), (2, 3));
    }

    #[test]
    fn positions() {
        let toks = tokenize("a\n  bc").unwrap();
        assert_eq!((toks[1].span.line, toks[1].span.col), (2, 3));
        assert_eq!(position("a\n  bc", 4), (2, 3));
    }
}
