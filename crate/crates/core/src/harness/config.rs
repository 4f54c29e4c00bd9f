//! Structured-text configuration.
//!
//! ```text
//! # comment
//! scheme { kind = lagrangian, T = 0.4, dt = 0.1, dx = 0.1 }
//! velocity {
//!     desired = { kind = constant, u = [0.5, 0] }
//!     kernel = { shape = cone, R = 0.5, peak = 1 }
//!     alpha = 1
//! }
//! populations [ { ... }, { ... } ]
//! ```
//!
//! Entries are separated by commas or newlines. Values are numbers,
//! quoted strings, bare words, `{ key = value }` tables and `[ ... ]` lists.
//! Every node keeps the line it started on for diagnostics.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Str(String),
    Word(String),
    Table(Table),
    List(Vec<Node>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub line: usize,
    pub value: Value,
}

/// Ordered key-value entries; keys are unique.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub line: usize,
    pub entries: Vec<(String, Node)>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open(char),
    Close(char),
    Eq,
    Sep,
    Number(f64),
    Str(String),
    Word(String),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut chars = raw.char_indices().peekable();
        while let Some(&(start, c)) = chars.peek() {
            match c {
                '#' => break,
                c if c.is_whitespace() => {
                    chars.next();
                }
                '{' | '[' => {
                    out.push((line, Tok::Open(c)));
                    chars.next();
                }
                '}' | ']' => {
                    out.push((line, Tok::Close(c)));
                    chars.next();
                }
                '=' => {
                    out.push((line, Tok::Eq));
                    chars.next();
                }
                ',' => {
                    out.push((line, Tok::Sep));
                    chars.next();
                }
                '"' => {
                    chars.next();
                    let mut s = String::new();
                    let mut closed = false;
                    for (_, ch) in chars.by_ref() {
                        if ch == '"' {
                            closed = true;
                            break;
                        }
                        s.push(ch);
                    }
                    if !closed {
                        return Err(parse_error(line, "unterminated string"));
                    }
                    out.push((line, Tok::Str(s)));
                }
                _ => {
                    let mut end = raw.len();
                    while let Some(&(j, ch)) = chars.peek() {
                        if ch.is_whitespace() || "{}[]=,#\"".contains(ch) {
                            end = j;
                            break;
                        }
                        chars.next();
                    }
                    let word = &raw[start..end];
                    let tok = match word.parse::<f64>() {
                        Ok(v) if word.starts_with(|ch: char| ch.is_ascii_digit() || "+-.".contains(ch)) => {
                            Tok::Number(v)
                        }
                        _ => Tok::Word(word.to_string()),
                    };
                    out.push((line, tok));
                }
            }
        }
        out.push((line, Tok::Sep));
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(usize, Tok)> {
        self.toks.get(self.pos)
    }

    fn last_line(&self) -> usize {
        self.toks.last().map_or(1, |(l, _)| *l)
    }

    fn skip_seps(&mut self) {
        while matches!(self.peek(), Some((_, Tok::Sep))) {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(usize, Tok)> {
        let t = self
            .toks
            .get(self.pos)
            .cloned()
            .ok_or_else(|| parse_error(self.last_line(), "unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn value(&mut self) -> Result<Node> {
        self.skip_seps();
        let (line, tok) = self.next()?;
        let value = match tok {
            Tok::Number(v) => Value::Number(v),
            Tok::Str(s) => Value::Str(s),
            Tok::Word(w) => Value::Word(w),
            Tok::Open('{') => Value::Table(self.table_body(line)?),
            Tok::Open(_) => Value::List(self.list_body()?),
            other => return Err(parse_error(line, format!("expected a value, found {}", describe(&other)))),
        };
        Ok(Node { line, value })
    }

    fn table_body(&mut self, line: usize) -> Result<Table> {
        let mut table = Table {
            line,
            entries: Vec::new(),
        };
        loop {
            self.skip_seps();
            let (kline, tok) = self.next()?;
            let key = match tok {
                Tok::Close('}') => return Ok(table),
                Tok::Word(w) => w,
                other => return Err(parse_error(kline, format!("expected a key, found {}", describe(&other)))),
            };
            match self.next()? {
                (_, Tok::Eq) => {}
                (l, other) => return Err(parse_error(l, format!("expected '=' after {key:?}, found {}", describe(&other)))),
            }
            if table.entries.iter().any(|(k, _)| *k == key) {
                return Err(parse_error(kline, format!("duplicate key {key:?}")));
            }
            let v = self.value()?;
            table.entries.push((key, v));
            match self.peek() {
                Some((_, Tok::Sep)) | Some((_, Tok::Close('}'))) => {}
                Some((l, other)) => {
                    return Err(parse_error(*l, format!("expected ',' or newline, found {}", describe(other))))
                }
                None => return Err(parse_error(self.last_line(), "unclosed '{'")),
            }
        }
    }

    fn list_body(&mut self) -> Result<Vec<Node>> {
        let mut items = Vec::new();
        loop {
            self.skip_seps();
            if let Some((_, Tok::Close(']'))) = self.peek() {
                self.pos += 1;
                return Ok(items);
            }
            items.push(self.value()?);
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Open(c) | Tok::Close(c) => format!("'{c}'"),
        Tok::Eq => "'='".into(),
        Tok::Sep => "end of entry".into(),
        Tok::Number(v) => format!("number {v}"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Word(w) => format!("{w:?}"),
    }
}

/// Parses a whole document into its top-level sections, in order.
pub fn parse_document(text: &str) -> Result<Table> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let mut doc = Table {
        line: 1,
        entries: Vec::new(),
    };
    loop {
        p.skip_seps();
        let Some((line, tok)) = p.peek().cloned() else {
            return Ok(doc);
        };
        p.pos += 1;
        let Tok::Word(name) = tok else {
            return Err(parse_error(line, format!("expected a section name, found {}", describe(&tok))));
        };
        if doc.entries.iter().any(|(k, _)| *k == name) {
            return Err(parse_error(line, format!("duplicate section {name:?}")));
        }
        let v = p.value()?;
        if !matches!(v.value, Value::Table(_) | Value::List(_)) {
            return Err(parse_error(line, format!("section {name:?} must be a table or a list")));
        }
        doc.entries.push((name, v));
    }
}

impl Node {
    pub fn as_f64(&self, what: &str) -> Result<f64> {
        match &self.value {
            Value::Number(v) => Ok(*v),
            _ => Err(parse_error(self.line, format!("{what} must be a number"))),
        }
    }

    pub fn as_usize(&self, what: &str) -> Result<usize> {
        let v = self.as_f64(what)?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(parse_error(self.line, format!("{what} must be a nonnegative integer, got {v}")));
        }
        Ok(v as usize)
    }

    /// Quoted string or bare word.
    pub fn as_str(&self, what: &str) -> Result<&str> {
        match &self.value {
            Value::Str(s) | Value::Word(s) => Ok(s),
            _ => Err(parse_error(self.line, format!("{what} must be a string"))),
        }
    }

    pub fn as_bool(&self, what: &str) -> Result<bool> {
        match self.as_str(what) {
            Ok("true") => Ok(true),
            Ok("false") => Ok(false),
            _ => Err(parse_error(self.line, format!("{what} must be true or false"))),
        }
    }

    pub fn as_table(&self, what: &str) -> Result<&Table> {
        match &self.value {
            Value::Table(t) => Ok(t),
            _ => Err(parse_error(self.line, format!("{what} must be a table"))),
        }
    }

    pub fn as_list(&self, what: &str) -> Result<&[Node]> {
        match &self.value {
            Value::List(l) => Ok(l),
            _ => Err(parse_error(self.line, format!("{what} must be a list"))),
        }
    }

    pub fn as_f64_list(&self, what: &str) -> Result<Vec<f64>> {
        self.as_list(what)?.iter().map(|n| n.as_f64(what)).collect()
    }
}

impl Table {
    pub fn get(&self, key: &str) -> Option<&Node> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn require(&self, key: &str, what: &str) -> Result<&Node> {
        self.get(key)
            .ok_or_else(|| parse_error(self.line, format!("{what} is missing required key {key:?}")))
    }

    /// Rejects any key outside `allowed`, naming the line of the first one.
    pub fn check_keys(&self, allowed: &[&str], what: &str) -> Result<()> {
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        for (k, v) in &self.entries {
            if !allowed.contains(k.as_str()) {
                return Err(parse_error(
                    v.line,
                    format!("unknown key {k:?} in {what}; expected one of {allowed:?}"),
                ));
            }
        }
        Ok(())
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map_or(Ok(default), |n| n.as_f64(key))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.get(key).map_or(Ok(default), |n| n.as_usize(key))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        self.get(key).map_or(Ok(default), |n| n.as_bool(key))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_values_and_lines() {
        let doc = parse_document(
            "# header\nscheme { kind = lagrangian, T = 0.4 }\nvelocity {\n  kernel = { R = 0.5 }\n  u = [1, -2.5e-1]\n}\n",
        )
        .unwrap();
        let scheme = doc.get("scheme").unwrap().as_table("scheme").unwrap();
        assert_eq!(scheme.get("kind").unwrap().as_str("kind").unwrap(), "lagrangian");
        assert_eq!(scheme.get("T").unwrap().as_f64("T").unwrap(), 0.4);
        let v = doc.get("velocity").unwrap().as_table("v").unwrap();
        assert_eq!(v.get("u").unwrap().as_f64_list("u").unwrap(), vec![1.0, -0.25]);
        assert_eq!(v.get("u").unwrap().line, 5);
    }

    #[test]
    fn errors_carry_lines() {
        let err = parse_document("a {\n  x = \n}").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_document("a { x = 1 y = 2 }").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let doc = parse_document("a {\n x = 1\n bogus = 2\n}").unwrap();
        let err = doc.get("a").unwrap().as_table("a").unwrap().check_keys(&["x"], "a").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }
}
