//! The N-Triples subset used for graph dumps: IRIs and literals only, no
//! blank nodes. Language-tagged literals are accepted on input and read as
//! plain text.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::iri::Iri;
use super::term::{Datatype, Literal, Term};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("reading input: {0}")]
    Io(#[from] io::Error),
}

/// One parsed statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Term,
}

pub fn escape_literal(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

pub fn format_term(term: &Term) -> String {
    match term {
        Term::Iri { value } => format!("<{value}>"),
        Term::Literal { value } => {
            let mut s = format!("\"{}\"", escape_literal(&value.lexical));
            if let Some(dt) = value.datatype.xsd_iri() {
                let _ = write!(s, "^^<{dt}>");
            }
            s
        }
    }
}

pub fn format_statement(subject: &Iri, predicate: &Iri, object: &Term) -> String {
    format!("<{subject}> <{predicate}> {} .", format_term(object))
}

pub fn write_statement<W: Write>(out: &mut W, subject: &Iri, predicate: &Iri, object: &Term) -> io::Result<()> {
    writeln!(out, "{}", format_statement(subject, predicate, object))
}

/// Parses every statement in `input`; blank lines and `#` comments are
/// skipped.
pub fn parse_ntriples<R: BufRead>(input: R) -> Result<Vec<Statement>, ParseError> {
    let mut out = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if let Some(stmt) = parse_line(&line).map_err(|message| ParseError::Syntax { line: idx + 1, message })? {
            out.push(stmt);
        }
    }
    Ok(out)
}

pub fn parse_ntriples_str(input: &str) -> Result<Vec<Statement>, ParseError> {
    parse_ntriples(input.as_bytes())
}

/// Parses a single line; `Ok(None)` for blank or comment lines.
pub fn parse_line(line: &str) -> Result<Option<Statement>, String> {
    let mut cur = Cursor { chars: line.chars().collect(), pos: 0 };
    cur.skip_ws();
    if cur.at_end() || cur.peek() == Some('#') {
        return Ok(None);
    }
    let subject = cur.iri().map_err(|e| format!("subject: {e}"))?;
    cur.skip_ws();
    let predicate = cur.iri().map_err(|e| format!("predicate: {e}"))?;
    cur.skip_ws();
    let object = cur.object().map_err(|e| format!("object: {e}"))?;
    cur.skip_ws();
    if cur.next() != Some('.') {
        return Err("expected '.' terminating the statement".into());
    }
    cur.skip_ws();
    if !cur.at_end() && cur.peek() != Some('#') {
        return Err("trailing content after '.'".into());
    }
    Ok(Some(Statement { subject, predicate, object }))
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
}

impl Cursor {
    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.pos += 1;
        }
    }

    fn iri(&mut self) -> Result<Iri, String> {
        match self.next() {
            Some('<') => {}
            Some('_') => return Err("blank nodes are not supported".into()),
            _ => return Err("expected '<'".into()),
        }
        let mut value = String::new();
        loop {
            match self.next() {
                None => return Err("unterminated IRI".into()),
                Some('>') => break,
                Some('\\') => match self.next() {
                    Some('u') => value.push(self.hex(4)?),
                    Some('U') => value.push(self.hex(8)?),
                    _ => return Err("invalid escape in IRI".into()),
                },
                Some(c) => value.push(c),
            }
        }
        Iri::new(value).map_err(|e| e.to_string())
    }

    fn hex(&mut self, digits: usize) -> Result<char, String> {
        let mut code = 0u32;
        for _ in 0..digits {
            let d = self.next().and_then(|c| c.to_digit(16)).ok_or("invalid hex escape")?;
            code = code * 16 + d;
        }
        char::from_u32(code).ok_or_else(|| format!("invalid code point U+{code:X}"))
    }

    fn object(&mut self) -> Result<Term, String> {
        match self.peek() {
            Some('<') => Ok(Term::iri(self.iri()?)),
            Some('"') => {
                self.pos += 1;
                let lexical = self.literal_body()?;
                let datatype = match self.peek() {
                    Some('^') => {
                        self.pos += 1;
                        if self.next() != Some('^') {
                            return Err("expected '^^'".into());
                        }
                        Datatype::from_xsd_iri(self.iri()?.as_str())
                    }
                    Some('@') => {
                        self.pos += 1;
                        while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '-') {
                            self.pos += 1;
                        }
                        Datatype::Text
                    }
                    _ => Datatype::Text,
                };
                Ok(Term::literal(Literal { lexical, datatype }))
            }
            _ => Err("expected IRI or literal".into()),
        }
    }

    fn literal_body(&mut self) -> Result<String, String> {
        let mut value = String::new();
        loop {
            match self.next() {
                None => return Err("unterminated literal".into()),
                Some('"') => return Ok(value),
                Some('\\') => match self.next() {
                    Some('t') => value.push('\t'),
                    Some('b') => value.push('\u{8}'),
                    Some('n') => value.push('\n'),
                    Some('r') => value.push('\r'),
                    Some('f') => value.push('\u{c}'),
                    Some('"') => value.push('"'),
                    Some('\'') => value.push('\''),
                    Some('\\') => value.push('\\'),
                    Some('u') => value.push(self.hex(4)?),
                    Some('U') => value.push(self.hex(8)?),
                    _ => return Err("invalid escape in literal".into()),
                },
                Some(c) => value.push(c),
            }
        }
    }
}
