//! Recursive-descent parser for keyword-only call expressions:
//!
//! ```text
//! calls   := call | '[' (call (',' call)* ','?)? ']'
//! call    := name ('.' name)* '(' (kwarg (',' kwarg)* ','?)? ')'
//! kwarg   := name '=' literal
//! literal := string | number | True | False | None | true | false | null
//!          | '[' literals ']' | '(' literals ')' | '{' string ':' literal, ... '}'
//! ```

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CallExpr, Literal};
use crate::codec::FunctionCall;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum GrammarError {
    #[error("syntax error at byte {position}: expected {expected}, found {found}")]
    Syntax { position: usize, expected: String, found: String },
    #[error("duplicate keyword argument {name:?} at byte {position}")]
    DuplicateArgument { name: String, position: usize },
}

/// Parses one call or a bracketed list of calls.
pub fn parse_call_expressions(text: &str) -> Result<Vec<CallExpr>, GrammarError> {
    let mut p = Parser { src: text, pos: 0 };
    p.skip_ws();
    let calls = if p.peek() == Some('[') {
        p.bump();
        p.sequence(']', Parser::call)?
    } else {
        vec![p.call()?]
    };
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error("end of input"));
    }
    Ok(calls)
}

/// Parses the JSON-array call form `[{"name": ..., "arguments": {...}}, ...]`.
pub fn parse_call_json(text: &str) -> Result<Vec<CallExpr>, serde_json::Error> {
    let calls: Vec<FunctionCall> = serde_json::from_str(text)?;
    Ok(calls.iter().map(CallExpr::from).collect())
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    fn found(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(c) => format!("{c:?}"),
        }
    }

    fn error(&self, expected: &str) -> GrammarError {
        GrammarError::Syntax { position: self.pos, expected: expected.into(), found: self.found() }
    }

    fn expect(&mut self, c: char) -> Result<(), GrammarError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&format!("{c:?}")))
        }
    }

    /// Comma-separated items up to `close`; a trailing comma is allowed.
    /// The opening delimiter has already been consumed.
    fn sequence<T>(
        &mut self,
        close: char,
        mut item: impl FnMut(&mut Self) -> Result<T, GrammarError>,
    ) -> Result<Vec<T>, GrammarError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            if self.peek() == Some(close) {
                self.bump();
                return Ok(out);
            }
            out.push(item(self)?);
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.bump();
                }
                Some(c) if c == close => {}
                _ => return Err(self.error(&format!("',' or {close:?}"))),
            }
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_ascii_alphabetic() || c == '_' => {
                self.bump();
            }
            _ => return None,
        }
        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
            self.bump();
        }
        Some(&self.src[start..self.pos])
    }

    fn call(&mut self) -> Result<CallExpr, GrammarError> {
        self.skip_ws();
        let start = self.pos;
        self.ident().ok_or_else(|| self.error("function name"))?;
        while self.peek() == Some('.') {
            self.bump();
            self.ident().ok_or_else(|| self.error("name after '.'"))?;
        }
        let name = self.src[start..self.pos].to_string();
        self.expect('(')?;

        let mut kwargs: Vec<(String, Literal)> = Vec::new();
        let pairs = self.sequence(')', |p| {
            p.skip_ws();
            let at = p.pos;
            let key = p.ident().ok_or_else(|| p.error("keyword argument"))?.to_string();
            p.expect('=')?;
            p.skip_ws();
            Ok((at, key, p.literal()?))
        })?;
        for (at, key, value) in pairs {
            if kwargs.iter().any(|(k, _)| *k == key) {
                return Err(GrammarError::DuplicateArgument { name: key, position: at });
            }
            kwargs.push((key, value));
        }
        Ok(CallExpr { name, kwargs })
    }

    fn literal(&mut self) -> Result<Literal, GrammarError> {
        self.skip_ws();
        match self.peek() {
            Some('"') | Some('\'') => self.string().map(Literal::Str),
            Some('[') => {
                self.bump();
                self.sequence(']', Parser::literal).map(Literal::List)
            }
            Some('(') => {
                self.bump();
                self.sequence(')', Parser::literal).map(Literal::List)
            }
            Some('{') => {
                self.bump();
                let entries = self.sequence('}', |p| {
                    p.skip_ws();
                    if !matches!(p.peek(), Some('"') | Some('\'')) {
                        return Err(p.error("string key"));
                    }
                    let k = p.string()?;
                    p.expect(':')?;
                    Ok((k, p.literal()?))
                })?;
                Ok(Literal::Map(entries.into_iter().collect::<IndexMap<_, _>>()))
            }
            Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let at = self.pos;
                match self.ident() {
                    Some("True") | Some("true") => Ok(Literal::Bool(true)),
                    Some("False") | Some("false") => Ok(Literal::Bool(false)),
                    Some("None") | Some("null") => Ok(Literal::Null),
                    _ => {
                        self.pos = at;
                        Err(self.error("literal value"))
                    }
                }
            }
            _ => Err(self.error("literal value")),
        }
    }

    fn number(&mut self) -> Result<Literal, GrammarError> {
        let start = self.pos;
        if matches!(self.peek(), Some('+') | Some('-')) {
            self.bump();
        }
        let digits = |p: &mut Self| {
            let s = p.pos;
            while matches!(p.peek(), Some(c) if c.is_ascii_digit()) {
                p.bump();
            }
            p.pos - s
        };
        let int_digits = digits(self);
        let mut is_float = false;
        if self.peek() == Some('.') {
            self.bump();
            is_float = true;
            if int_digits + digits(self) == 0 {
                self.pos = start;
                return Err(self.error("number"));
            }
        } else if int_digits == 0 {
            self.pos = start;
            return Err(self.error("number"));
        }
        if matches!(self.peek(), Some('e') | Some('E')) {
            self.bump();
            if matches!(self.peek(), Some('+') | Some('-')) {
                self.bump();
            }
            if digits(self) == 0 {
                return Err(self.error("exponent digits"));
            }
            is_float = true;
        }
        let text = &self.src[start..self.pos];
        let bad =
            || GrammarError::Syntax { position: start, expected: "finite number".into(), found: format!("{text:?}") };
        if !is_float {
            if let Ok(i) = text.parse::<i64>() {
                return Ok(Literal::Int(i));
            }
        }
        match text.parse::<f64>() {
            Ok(f) if f.is_finite() => Ok(Literal::Float(f)),
            _ => Err(bad()),
        }
    }

    fn string(&mut self) -> Result<String, GrammarError> {
        let quote = self.bump().expect("caller checked for a quote");
        let mut out = String::new();
        loop {
            let at = self.pos;
            match self.bump() {
                None => return Err(self.error("closing quote")),
                Some(c) if c == quote => return Ok(out),
                Some('\\') => {
                    let esc = self.bump().ok_or_else(|| self.error("escape character"))?;
                    match esc {
                        'n' => out.push('\n'),
                        't' => out.push('\t'),
                        'r' => out.push('\r'),
                        'b' => out.push('\u{8}'),
                        'f' => out.push('\u{c}'),
                        '0' => out.push('\0'),
                        '\\' | '"' | '\'' | '/' => out.push(esc),
                        'u' => out.push(self.unicode_escape(at)?),
                        other => {
                            return Err(GrammarError::Syntax {
                                position: at,
                                expected: "escape sequence".into(),
                                found: format!("\\{other}"),
                            })
                        }
                    }
                }
                Some(c) => out.push(c),
            }
        }
    }

    fn hex4(&mut self) -> Result<u32, GrammarError> {
        let start = self.pos;
        let s = self.src.get(start..start + 4).filter(|s| s.chars().all(|c| c.is_ascii_hexdigit()));
        match s {
            Some(h) => {
                self.pos += 4;
                Ok(u32::from_str_radix(h, 16).expect("validated hex"))
            }
            None => Err(self.error("four hex digits")),
        }
    }

    fn unicode_escape(&mut self, at: usize) -> Result<char, GrammarError> {
        let hi = self.hex4()?;
        let code = if (0xD800..0xDC00).contains(&hi) {
            if !self.src[self.pos..].starts_with("\\u") {
                return Err(self.error("low surrogate escape"));
            }
            self.pos += 2;
            let lo = self.hex4()?;
            if !(0xDC00..0xE000).contains(&lo) {
                return Err(self.error("low surrogate escape"));
            }
            0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00)
        } else {
            hi
        };
        char::from_u32(code).ok_or(GrammarError::Syntax {
            position: at,
            expected: "unicode scalar value".into(),
            found: format!("\\u{hi:04x}"),
        })
    }
}
