//! Line-oriented tuple format: a strict subset of N-Triples with `@prefix`
//! directives and an optional transaction time as fourth field.
//!
//! ```text
//! document  := line*
//! line      := ws* ( directive | tuple )? ws* comment? EOL
//! directive := "@prefix" ws+ NAME? ":" ws* IRIREF ws* "."
//! tuple     := term ws+ term ws+ term ( ws+ TIME )? ws* "."
//! term      := IRIREF | PNAME | BNODE | literal
//! literal   := STRING ( "^^" ( IRIREF | PNAME ) )?
//! TIME      := [0-9]+
//! comment   := "#" any*
//! ```
//!
//! Literals are always quoted. Untyped literals are strings. The object
//! `rudi:retracted` denotes a tombstone. The prefixes `rdf`, `rdfs`, `xsd`,
//! `owl`, `rudi` and `dial` are predeclared.

use std::fmt::Write as _;

use super::schema::XsdType;
use super::{vocab, Resource, StoreError, Tuple, Value};

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedTuple {
    pub subject: Resource,
    pub predicate: Resource,
    pub object: Value,
    pub time: Option<u64>,
    pub line: usize,
}

/// One parsed source file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Document {
    pub prefixes: Vec<(String, String)>,
    pub tuples: Vec<ParsedTuple>,
}

/// Namespace table used for expanding and abbreviating IRIs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Prefixes {
    declared: Vec<(String, String)>,
}

impl Prefixes {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declared(&self) -> &[(String, String)] {
        &self.declared
    }

    /// Adds a declaration; an existing binding for `name` is kept.
    pub fn declare(&mut self, name: &str, ns: &str) {
        if !self.declared.iter().any(|(n, _)| n == name) {
            self.declared.push((name.to_string(), ns.to_string()));
        }
    }

    pub fn expand(&self, name: &str) -> Option<&str> {
        self.declared
            .iter()
            .map(|(n, ns)| (n.as_str(), ns.as_str()))
            .chain(vocab::BUILTIN_PREFIXES.iter().copied())
            .find(|(n, _)| *n == name)
            .map(|(_, ns)| ns)
    }

    /// Shortest textual form of `iri` in this table.
    pub fn abbreviate(&self, iri: &str) -> String {
        if iri.starts_with("_:") {
            return iri.to_string();
        }
        let best = self
            .declared
            .iter()
            .map(|(n, ns)| (n.as_str(), ns.as_str()))
            .chain(vocab::BUILTIN_PREFIXES.iter().copied())
            .filter(|(_, ns)| iri.len() > ns.len() && iri.starts_with(ns))
            .filter(|(_, ns)| is_local_name(&iri[ns.len()..]))
            .max_by_key(|(_, ns)| ns.len());
        match best {
            Some((name, ns)) => format!("{name}:{}", &iri[ns.len()..]),
            None => format!("<{iri}>"),
        }
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.'
}

fn is_local_name(s: &str) -> bool {
    !s.is_empty() && !s.ends_with('.') && !s.starts_with('.') && s.chars().all(is_name_char)
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    line_start: usize,
}

impl<'a> Cursor<'a> {
    fn col(&self) -> usize {
        self.pos - self.line_start + 1
    }

    fn err(&self, message: impl Into<String>) -> StoreError {
        StoreError::Parse {
            line: self.line,
            col: self.col(),
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) -> bool {
        let start = self.pos;
        while matches!(self.peek(), Some(' ' | '\t' | '\r')) {
            self.bump();
        }
        self.pos > start
    }

    fn at_line_end(&self) -> bool {
        matches!(self.peek(), None | Some('\n' | '#'))
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.text[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }
}

/// A term before datatype/prefix resolution has been applied.
enum RawTerm {
    Iri(String),
    Literal(String, Option<String>),
    Time(u64),
}

pub fn parse(text: &str) -> Result<Document, StoreError> {
    let mut doc = Document::default();
    let mut prefixes = Prefixes::new();
    let mut cur = Cursor {
        text,
        pos: 0,
        line: 1,
        line_start: 0,
    };
    loop {
        cur.skip_ws();
        if !cur.at_line_end() {
            if cur.eat("@prefix") {
                let (name, ns) = parse_prefix(&mut cur)?;
                prefixes.declare(&name, &ns);
                if !doc.prefixes.iter().any(|(n, _)| *n == name) {
                    doc.prefixes.push((name, ns));
                }
            } else {
                let line = cur.line;
                let t = parse_tuple(&mut cur, &prefixes, line)?;
                doc.tuples.push(t);
            }
            cur.skip_ws();
        }
        if cur.peek() == Some('#') {
            while !matches!(cur.peek(), None | Some('\n')) {
                cur.bump();
            }
        }
        match cur.bump() {
            None => break,
            Some('\n') => {
                cur.line += 1;
                cur.line_start = cur.pos;
            }
            Some(_) => return Err(cur.err("expected end of line")),
        }
    }
    Ok(doc)
}

fn parse_prefix(cur: &mut Cursor<'_>) -> Result<(String, String), StoreError> {
    if !cur.skip_ws() {
        return Err(cur.err("expected whitespace after @prefix"));
    }
    let start = cur.pos;
    while cur.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        cur.bump();
    }
    let name = cur.text[start..cur.pos].to_string();
    if !cur.eat(":") {
        return Err(cur.err("expected ':' in prefix declaration"));
    }
    cur.skip_ws();
    let ns = parse_iriref(cur)?;
    cur.skip_ws();
    if !cur.eat(".") {
        return Err(cur.err("expected '.' after prefix declaration"));
    }
    Ok((name, ns))
}

fn parse_iriref(cur: &mut Cursor<'_>) -> Result<String, StoreError> {
    if !cur.eat("<") {
        return Err(cur.err("expected '<'"));
    }
    let start = cur.pos;
    loop {
        match cur.peek() {
            Some('>') => break,
            Some(c) if c == '\n' || c == ' ' || c == '<' || c == '"' => {
                return Err(cur.err("invalid character in IRI"))
            }
            None => return Err(cur.err("unterminated IRI")),
            Some(_) => {
                cur.bump();
            }
        }
    }
    let iri = cur.text[start..cur.pos].to_string();
    cur.bump();
    if iri.is_empty() {
        return Err(cur.err("empty IRI"));
    }
    Ok(iri)
}

fn parse_raw_term(cur: &mut Cursor<'_>, prefixes: &Prefixes) -> Result<RawTerm, StoreError> {
    match cur.peek() {
        Some('<') => Ok(RawTerm::Iri(parse_iriref(cur)?)),
        Some('"') => {
            let lex = parse_string(cur)?;
            if cur.eat("^^") {
                let dt = if cur.peek() == Some('<') {
                    parse_iriref(cur)?
                } else {
                    parse_pname(cur, prefixes)?
                };
                Ok(RawTerm::Literal(lex, Some(dt)))
            } else if cur.peek() == Some('@') {
                Err(cur.err("language-tagged literals are not supported"))
            } else {
                Ok(RawTerm::Literal(lex, None))
            }
        }
        Some('_') if cur.text[cur.pos..].starts_with("_:") => {
            let start = cur.pos;
            cur.pos += 2;
            while cur.peek().is_some_and(is_name_char) {
                cur.bump();
            }
            Ok(RawTerm::Iri(cur.text[start..cur.pos].to_string()))
        }
        Some(c) if c.is_ascii_digit() => {
            let start = cur.pos;
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
            cur.text[start..cur.pos]
                .parse()
                .map(RawTerm::Time)
                .map_err(|_| cur.err("transaction time out of range"))
        }
        Some(_) => Ok(RawTerm::Iri(parse_pname(cur, prefixes)?)),
        None => Err(cur.err("unexpected end of input")),
    }
}

fn parse_pname(cur: &mut Cursor<'_>, prefixes: &Prefixes) -> Result<String, StoreError> {
    let start = cur.pos;
    let (line, col) = (cur.line, cur.col());
    while cur.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
        cur.bump();
    }
    let name = cur.text[start..cur.pos].to_string();
    if !cur.eat(":") {
        return Err(cur.err("expected a term"));
    }
    let lstart = cur.pos;
    while cur.peek().is_some_and(is_name_char) {
        cur.bump();
    }
    // A trailing '.' terminates the tuple rather than belonging to the name.
    while cur.pos > lstart && cur.text[..cur.pos].ends_with('.') {
        cur.pos -= 1;
    }
    let local = &cur.text[lstart..cur.pos];
    if local.is_empty() {
        return Err(cur.err("empty local name"));
    }
    match prefixes.expand(&name) {
        Some(ns) => Ok(format!("{ns}{local}")),
        None => Err(StoreError::Parse {
            line,
            col,
            message: format!("undeclared prefix '{name}'"),
        }),
    }
}

fn parse_string(cur: &mut Cursor<'_>) -> Result<String, StoreError> {
    cur.bump();
    let mut out = String::new();
    loop {
        match cur.bump() {
            None | Some('\n') => return Err(cur.err("unterminated string literal")),
            Some('"') => return Ok(out),
            Some('\\') => match cur.bump() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('r') => out.push('\r'),
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                _ => return Err(cur.err("invalid escape sequence")),
            },
            Some(c) => out.push(c),
        }
    }
}

fn parse_tuple(
    cur: &mut Cursor<'_>,
    prefixes: &Prefixes,
    line: usize,
) -> Result<ParsedTuple, StoreError> {
    let mut terms = Vec::with_capacity(4);
    let mut positions = Vec::with_capacity(4);
    loop {
        cur.skip_ws();
        if cur.eat(".") {
            break;
        }
        if cur.at_line_end() {
            return Err(cur.err("expected '.' at end of tuple"));
        }
        if terms.len() == 4 {
            return Err(cur.err("too many terms"));
        }
        positions.push((cur.line, cur.col()));
        terms.push(parse_raw_term(cur, prefixes)?);
        if !matches!(cur.peek(), Some(' ' | '\t' | '.' | '\r')) && !cur.at_line_end() {
            return Err(cur.err("expected whitespace between terms"));
        }
    }
    if terms.len() < 3 {
        return Err(cur.err("a tuple needs at least three terms"));
    }
    let at = |i: usize, message: &str| StoreError::Parse {
        line: positions[i].0,
        col: positions[i].1,
        message: message.to_string(),
    };
    let mut it = terms.into_iter();
    let subject = match it.next() {
        Some(RawTerm::Iri(s)) => Resource::new(s),
        _ => return Err(at(0, "subject must be an IRI")),
    };
    let predicate = match it.next() {
        Some(RawTerm::Iri(p)) if !p.starts_with("_:") => Resource::new(p),
        _ => return Err(at(1, "predicate must be an IRI")),
    };
    let object = match it.next() {
        Some(RawTerm::Iri(o)) if o == vocab::RUDI_RETRACTED => Value::Retracted,
        Some(RawTerm::Iri(o)) => Value::Resource(Resource::new(o)),
        Some(RawTerm::Literal(lex, dt)) => {
            literal_value(&lex, dt.as_deref()).map_err(|m| at(2, &m))?
        }
        _ => return Err(at(2, "object must be an IRI or a literal")),
    };
    let time = match it.next() {
        None => None,
        Some(RawTerm::Time(t)) => Some(t),
        Some(_) => return Err(at(3, "fourth term must be a transaction time")),
    };
    Ok(ParsedTuple {
        subject,
        predicate,
        object,
        time,
        line,
    })
}

/// Converts a lexical form and optional datatype IRI into a [`Value`].
pub fn literal_value(lex: &str, datatype: Option<&str>) -> Result<Value, String> {
    let Some(dt) = datatype else {
        return Ok(Value::Str(lex.to_string()));
    };
    let ty = XsdType::from_iri(dt).ok_or_else(|| format!("unsupported datatype <{dt}>"))?;
    let bad = || format!("'{lex}' is not a valid {ty}");
    Ok(match ty {
        XsdType::Int => Value::Int(lex.trim().parse().map_err(|_| bad())?),
        XsdType::Decimal => Value::Decimal(lex.trim().parse().map_err(|_| bad())?),
        XsdType::String => Value::Str(lex.to_string()),
        XsdType::Boolean => match lex.trim() {
            "true" | "1" => Value::Bool(true),
            "false" | "0" => Value::Bool(false),
            _ => return Err(bad()),
        },
        XsdType::DateTime => Value::Timestamp(lex.trim().parse().map_err(|_| bad())?),
    })
}

pub(crate) fn escape_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Writes a value as a term in canonical form.
pub fn write_value(v: &Value, prefixes: &Prefixes, out: &mut String) {
    let typed = |out: &mut String, lex: &str, ty: XsdType| {
        escape_string(lex, out);
        out.push_str("^^");
        out.push_str(&prefixes.abbreviate(ty.iri()));
    };
    match v {
        Value::Resource(r) => out.push_str(&prefixes.abbreviate(r.as_str())),
        Value::Str(s) => escape_string(s, out),
        Value::Int(i) => typed(out, &i.to_string(), XsdType::Int),
        Value::Decimal(d) => typed(out, &d.to_string(), XsdType::Decimal),
        Value::Bool(b) => typed(out, &b.to_string(), XsdType::Boolean),
        Value::Timestamp(t) => typed(out, &t.to_string(), XsdType::DateTime),
        Value::Retracted => out.push_str(&prefixes.abbreviate(vocab::RUDI_RETRACTED)),
    }
}

/// Serializes prefixes and tuples; `t = 0` is left implicit.
pub fn dump<'a>(prefixes: &Prefixes, tuples: impl IntoIterator<Item = &'a Tuple>) -> String {
    let mut out = String::new();
    for (name, ns) in prefixes.declared() {
        let _ = writeln!(out, "@prefix {name}: <{ns}> .");
    }
    for t in tuples {
        out.push_str(&prefixes.abbreviate(t.subject.as_str()));
        out.push(' ');
        out.push_str(&prefixes.abbreviate(t.predicate.as_str()));
        out.push(' ');
        write_value(&t.object, prefixes, &mut out);
        if t.t > 0 {
            let _ = write!(out, " {}", t.t);
        }
        out.push_str(" .\n");
    }
    out
}

/// Parses a single object term, as used by event scripts.
///
/// Besides the strict tuple syntax this accepts bare integers, decimals and
/// `true`/`false`.
pub fn parse_value(text: &str, prefixes: &Prefixes) -> Result<Value, StoreError> {
    let text = text.trim();
    if let Ok(i) = text.parse::<i64>() {
        return Ok(Value::Int(i));
    }
    if text.contains('.') && text.parse::<f64>().is_ok() {
        return Ok(Value::Decimal(text.parse().unwrap_or_default()));
    }
    match text {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    let mut cur = Cursor {
        text,
        pos: 0,
        line: 1,
        line_start: 0,
    };
    let v = match parse_raw_term(&mut cur, prefixes)? {
        RawTerm::Iri(o) if o == vocab::RUDI_RETRACTED => Value::Retracted,
        RawTerm::Iri(o) => Value::Resource(Resource::new(o)),
        RawTerm::Literal(lex, dt) => literal_value(&lex, dt.as_deref()).map_err(|m| cur.err(m))?,
        RawTerm::Time(t) => Value::Int(t as i64),
    };
    cur.skip_ws();
    if cur.peek().is_some() {
        return Err(cur.err("trailing characters after value"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_prefixes_and_tuples() {
        let doc = parse(
            "@prefix ex: <http://e#> .\n\
             ex:a ex:p \"x\" .  # comment\n\
             \n\
             <http://e#a> ex:q \"15\"^^xsd:int 42 .\n",
        )
        .unwrap();
        assert_eq!(doc.prefixes, vec![("ex".into(), "http://e#".into())]);
        assert_eq!(doc.tuples.len(), 2);
        assert_eq!(doc.tuples[1].object, Value::Int(15));
        assert_eq!(doc.tuples[1].time, Some(42));
        assert_eq!(doc.tuples[1].line, 4);
    }

    #[test]
    fn errors_carry_position() {
        let err = parse("ex:a ex:b ex:c .").unwrap_err();
        assert_eq!(
            err,
            StoreError::Parse {
                line: 1,
                col: 1,
                message: "undeclared prefix 'ex'".into()
            }
        );
        let err = parse("\n  <a> <b> \"oops .").unwrap_err();
        assert!(matches!(err, StoreError::Parse { line: 2, .. }), "{err:?}");
        let err = parse("<a> <b> .").unwrap_err();
        assert!(matches!(err, StoreError::Parse { line: 1, .. }));
    }

    #[test]
    fn name_ending_in_dot() {
        let doc = parse("@prefix e: <http://e#> .\ne:a e:b e:c.\n").unwrap();
        assert_eq!(
            doc.tuples[0].object,
            Value::Resource(Resource::new("http://e#c"))
        );
    }

    #[test]
    fn abbreviation_prefers_longest_namespace() {
        let mut p = Prefixes::new();
        p.declare("a", "http://x/");
        p.declare("b", "http://x/y#");
        assert_eq!(p.abbreviate("http://x/y#z"), "b:z");
        assert_eq!(p.abbreviate("http://x/q"), "a:q");
        assert_eq!(p.abbreviate("http://other/q r"), "<http://other/q r>");
        assert_eq!(p.abbreviate(&format!("{}int", vocab::XSD)), "xsd:int");
    }

    #[test]
    fn escapes_round_trip() {
        let mut s = String::new();
        escape_string("a\"b\\c\nd", &mut s);
        let doc = parse(&format!("<s> <p> {s} .")).unwrap();
        assert_eq!(doc.tuples[0].object, Value::Str("a\"b\\c\nd".into()));
    }

    #[test]
    fn script_values() {
        let p = Prefixes::new();
        assert_eq!(parse_value("15", &p).unwrap(), Value::Int(15));
        assert_eq!(parse_value("1.5", &p).unwrap(), Value::Decimal(1.5));
        assert_eq!(parse_value("\"Bob\"", &p).unwrap(), Value::Str("Bob".into()));
        assert_eq!(parse_value("true", &p).unwrap(), Value::Bool(true));
        assert!(parse_value("\"a\" x", &p).is_err());
    }
}
