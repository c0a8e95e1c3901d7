//! Textbook segmentation over a small, well-nested markup subset.
//!
//! Accepted input: `h1`..`h6`, `p`, `li`, `div` and other block or inline
//! tags that nest properly, the void tags `br img hr meta link input wbr
//! source col area`, comments, a doctype, and the named entities `amp lt gt
//! quot apos nbsp` plus numeric character references. `script` and `style`
//! bodies are dropped. Unknown named entities are kept verbatim.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ValidationMode;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SegmentError {
    #[error("malformed markup at line {line}: {message}")]
    MalformedMarkup { line: usize, message: String },
    #[error("section {title:?} at line {line} appears before any lesson")]
    OrphanSection { line: usize, title: String },
    #[error("lesson {title:?} at line {line} appears before any unit")]
    OrphanLesson { line: usize, title: String },
    #[error("heading levels must be distinct values in 1..=6")]
    InvalidRules,
}

/// Which heading level opens a unit, a lesson, and a section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadingRules {
    pub unit: u8,
    pub lesson: u8,
    pub section: u8,
}

impl Default for HeadingRules {
    fn default() -> Self {
        HeadingRules { unit: 1, lesson: 2, section: 3 }
    }
}

impl HeadingRules {
    fn validate(&self) -> Result<(), SegmentError> {
        let levels = [self.unit, self.lesson, self.section];
        let in_range = levels.iter().all(|l| (1..=6).contains(l));
        let distinct = self.unit != self.lesson && self.lesson != self.section && self.unit != self.section;
        if in_range && distinct {
            Ok(())
        } else {
            Err(SegmentError::InvalidRules)
        }
    }

    fn role(&self, level: u8) -> Option<Level> {
        match level {
            l if l == self.unit => Some(Level::Unit),
            l if l == self.lesson => Some(Level::Lesson),
            l if l == self.section => Some(Level::Section),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub id: String,
    pub title: String,
    pub paragraphs: Vec<String>,
    pub ordinal: usize,
}

impl Section {
    /// Title and paragraphs joined by newlines; the document d_i that topic
    /// scoring works on.
    pub fn text(&self) -> String {
        let mut out = self.title.clone();
        for p in &self.paragraphs {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(p);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lesson {
    pub title: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intro: Vec<String>,
    pub sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unit {
    pub title: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intro: Vec<String>,
    pub lessons: Vec<Lesson>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocTree {
    pub book_id: String,
    /// Text before the first unit heading.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preamble: Vec<String>,
    pub units: Vec<Unit>,
}

impl DocTree {
    /// Sections in reading order; position k holds ordinal k + 1.
    pub fn sections(&self) -> impl Iterator<Item = &Section> {
        self.units.iter().flat_map(|u| u.lessons.iter()).flat_map(|l| l.sections.iter())
    }

    pub fn section_count(&self) -> usize {
        self.sections().count()
    }

    pub fn lesson_count(&self) -> usize {
        self.units.iter().map(|u| u.lessons.len()).sum()
    }

    pub fn section(&self, ordinal: usize) -> Option<&Section> {
        ordinal.checked_sub(1).and_then(|k| self.sections().nth(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    Unit,
    Lesson,
    Section,
}

#[derive(Debug, PartialEq)]
enum Token {
    Open { name: String, self_closing: bool },
    Close(String),
    Text(String),
}

const VOID_TAGS: &[&str] = &["br", "img", "hr", "meta", "link", "input", "wbr", "source", "col", "area"];
const RAW_TEXT_TAGS: &[&str] = &["script", "style"];
/// Tags whose boundaries end the current paragraph.
const BLOCK_TAGS: &[&str] = &[
    "p", "div", "li", "ul", "ol", "table", "tr", "td", "th", "blockquote", "section", "article", "body", "html",
    "header", "footer", "main", "figure", "figcaption", "pre", "dl", "dt", "dd", "h1", "h2", "h3", "h4", "h5", "h6",
];

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn line(&self, at: usize) -> usize {
        self.src[..at].matches('\n').count() + 1
    }

    fn malformed(&self, at: usize, message: impl Into<String>) -> SegmentError {
        SegmentError::MalformedMarkup { line: self.line(at), message: message.into() }
    }

    /// Next token with its starting byte offset.
    fn next(&mut self) -> Result<Option<(usize, Token)>, SegmentError> {
        let rest = &self.src[self.pos..];
        if rest.is_empty() {
            return Ok(None);
        }
        let start = self.pos;
        let starts_tag = rest.starts_with('<')
            && rest[1..].starts_with(|c: char| c.is_ascii_alphabetic() || matches!(c, '/' | '!' | '?'));
        if !starts_tag {
            let first = rest.chars().next().map_or(1, char::len_utf8);
            let end = rest[first..].find('<').map_or(rest.len(), |e| e + first);
            self.pos += end;
            return Ok(Some((start, Token::Text(decode_entities(&rest[..end])))));
        }
        if let Some(body) = rest.strip_prefix("<!--") {
            let end = body.find("-->").ok_or_else(|| self.malformed(start, "unterminated comment"))?;
            self.pos += 4 + end + 3;
            return self.next();
        }
        let close = rest.find('>').ok_or_else(|| self.malformed(start, "unterminated tag"))?;
        let inner = &rest[1..close];
        self.pos += close + 1;
        if inner.starts_with('!') || inner.starts_with('?') {
            return self.next();
        }
        if let Some(name) = inner.strip_prefix('/') {
            let name = tag_name(name).ok_or_else(|| self.malformed(start, "empty closing tag"))?;
            return Ok(Some((start, Token::Close(name))));
        }
        let self_closing = inner.ends_with('/');
        let name = tag_name(inner.trim_end_matches('/')).ok_or_else(|| self.malformed(start, "empty tag"))?;
        if RAW_TEXT_TAGS.contains(&name.as_str()) && !self_closing {
            let needle = format!("</{name}");
            let body_end = self.src[self.pos..]
                .to_ascii_lowercase()
                .find(&needle)
                .ok_or_else(|| self.malformed(start, format!("unclosed <{name}>")))?;
            self.pos += body_end;
        }
        Ok(Some((start, Token::Open { name, self_closing })))
    }
}

fn tag_name(inner: &str) -> Option<String> {
    let name: String = inner.trim_start().chars().take_while(|c| c.is_ascii_alphanumeric()).collect();
    (!name.is_empty()).then(|| name.to_ascii_lowercase())
}

fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let decoded = rest.find(';').filter(|&semi| semi <= 10).and_then(|semi| {
            let name = &rest[1..semi];
            let c = match name {
                "amp" => Some('&'),
                "lt" => Some('<'),
                "gt" => Some('>'),
                "quot" => Some('"'),
                "apos" => Some('\''),
                "nbsp" => Some('\u{a0}'),
                _ => name.strip_prefix('#').and_then(|num| {
                    let code = match num.strip_prefix(['x', 'X']) {
                        Some(hex) => u32::from_str_radix(hex, 16).ok(),
                        None => num.parse().ok(),
                    };
                    code.and_then(char::from_u32)
                }),
            };
            c.map(|c| (c, semi))
        });
        match decoded {
            Some((c, semi)) => {
                out.push(c);
                rest = &rest[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

struct Builder {
    book_id: String,
    mode: ValidationMode,
    tree: DocTree,
    has_lesson: bool,
    ordinal: usize,
}

impl Builder {
    fn unit(&mut self) -> &mut Unit {
        if self.tree.units.is_empty() {
            self.tree.units.push(Unit { title: String::new(), intro: Vec::new(), lessons: Vec::new() });
        }
        self.tree.units.last_mut().expect("unit present")
    }

    fn open(&mut self, level: Level, title: String, line: usize) -> Result<(), SegmentError> {
        let strict = self.mode == ValidationMode::Strict;
        match level {
            Level::Unit => {
                self.tree.units.push(Unit { title, intro: Vec::new(), lessons: Vec::new() });
                self.has_lesson = false;
            }
            Level::Lesson => {
                if self.tree.units.is_empty() && strict {
                    return Err(SegmentError::OrphanLesson { line, title });
                }
                self.unit().lessons.push(Lesson { title, intro: Vec::new(), sections: Vec::new() });
                self.has_lesson = true;
            }
            Level::Section => {
                if !self.has_lesson {
                    if strict {
                        return Err(SegmentError::OrphanSection { line, title });
                    }
                    self.unit().lessons.push(Lesson { title: String::new(), intro: Vec::new(), sections: Vec::new() });
                    self.has_lesson = true;
                }
                self.ordinal += 1;
                let section =
                    Section { id: format!("{}/s{}", self.book_id, self.ordinal), title, paragraphs: Vec::new(), ordinal: self.ordinal };
                self.unit().lessons.last_mut().expect("lesson present").sections.push(section);
            }
        }
        Ok(())
    }

    fn paragraph(&mut self, text: String) {
        let Some(unit) = self.tree.units.last_mut() else {
            self.tree.preamble.push(text);
            return;
        };
        match unit.lessons.last_mut().filter(|_| self.has_lesson) {
            None => unit.intro.push(text),
            Some(lesson) => match lesson.sections.last_mut() {
                Some(section) => section.paragraphs.push(text),
                None => lesson.intro.push(text),
            },
        }
    }
}

/// Splits markup into units, lessons, and sections. Section ordinals run
/// 1..N across the whole book; section ids are `{book_id}/s{ordinal}`.
pub fn segment_textbook(book_id: &str, markup: &str, rules: &HeadingRules, mode: ValidationMode) -> Result<DocTree, SegmentError> {
    rules.validate()?;
    let mut lexer = Lexer { src: markup, pos: 0 };
    let mut builder = Builder {
        book_id: book_id.to_owned(),
        mode,
        tree: DocTree { book_id: book_id.to_owned(), preamble: Vec::new(), units: Vec::new() },
        has_lesson: false,
        ordinal: 0,
    };
    let mut stack: Vec<(String, usize)> = Vec::new();
    let mut buffer = String::new();
    // Open structural heading: its level, start offset, and title buffer.
    let mut heading: Option<(Level, usize, String)> = None;
    let mut saw_content = false;

    let flush = |buffer: &mut String, builder: &mut Builder| {
        let text = collapse_whitespace(buffer);
        buffer.clear();
        if !text.is_empty() {
            builder.paragraph(text);
        }
    };

    while let Some((at, token)) = lexer.next()? {
        match token {
            Token::Text(text) => {
                if !text.trim().is_empty() {
                    saw_content = true;
                }
                match &mut heading {
                    Some((_, _, title)) => title.push_str(&text),
                    None => buffer.push_str(&text),
                }
            }
            Token::Open { name, self_closing } => {
                saw_content = true;
                let level = heading_level(&name).and_then(|l| rules.role(l));
                if let Some(level) = level {
                    if heading.is_some() {
                        return Err(lexer.malformed(at, format!("<{name}> nested inside a heading")));
                    }
                    flush(&mut buffer, &mut builder);
                    heading = Some((level, at, String::new()));
                } else if BLOCK_TAGS.contains(&name.as_str()) {
                    if heading.is_none() {
                        flush(&mut buffer, &mut builder);
                    }
                } else if name == "br" {
                    match &mut heading {
                        Some((_, _, title)) => title.push(' '),
                        None => buffer.push(' '),
                    }
                }
                if !self_closing && !VOID_TAGS.contains(&name.as_str()) {
                    stack.push((name, at));
                }
            }
            Token::Close(name) => {
                if VOID_TAGS.contains(&name.as_str()) {
                    continue;
                }
                match stack.pop() {
                    Some((open, _)) if open == name => {}
                    Some((open, _)) => {
                        return Err(lexer.malformed(at, format!("</{name}> closes <{open}>")));
                    }
                    None => return Err(lexer.malformed(at, format!("</{name}> without matching open tag"))),
                }
                let closes_heading = heading_level(&name).and_then(|l| rules.role(l)).is_some();
                if closes_heading {
                    let (level, start, title) = heading.take().expect("heading open");
                    builder.open(level, collapse_whitespace(&title), lexer.line(start))?;
                } else if BLOCK_TAGS.contains(&name.as_str()) && heading.is_none() {
                    flush(&mut buffer, &mut builder);
                }
            }
        }
    }
    if let Some((name, at)) = stack.pop() {
        return Err(lexer.malformed(at, format!("unclosed <{name}>")));
    }
    if !saw_content {
        return Err(SegmentError::MalformedMarkup { line: 1, message: "empty document".into() });
    }
    flush(&mut buffer, &mut builder);
    Ok(builder.tree)
}

fn heading_level(name: &str) -> Option<u8> {
    let digit = name.strip_prefix('h')?;
    match digit.parse::<u8>() {
        Ok(l @ 1..=6) => Some(l),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(markup: &str) -> Result<DocTree, SegmentError> {
        segment_textbook("bio", markup, &HeadingRules::default(), ValidationMode::Strict)
    }

    #[test]
    fn basic_tree() {
        let tree = seg("<h1>Cells</h1><h2>Structure</h2><h3>Membrane</h3><p>Lipid bilayer.</p><h3>Nucleus</h3><p>Holds DNA.</p>")
            .unwrap();
        assert_eq!(tree.units.len(), 1);
        assert_eq!(tree.lesson_count(), 1);
        assert_eq!(tree.section_count(), 2);
        let s2 = tree.section(2).unwrap();
        assert_eq!((s2.id.as_str(), s2.title.as_str(), s2.ordinal), ("bio/s2", "Nucleus", 2));
        assert_eq!(s2.text(), "Nucleus\nHolds DNA.");
    }

    #[test]
    fn empty_and_unclosed_are_malformed() {
        assert!(matches!(seg(""), Err(SegmentError::MalformedMarkup { .. })));
        assert!(matches!(seg("  \n "), Err(SegmentError::MalformedMarkup { .. })));
        assert!(matches!(seg("<h1>A</h1><p>text"), Err(SegmentError::MalformedMarkup { line: 1, .. })));
        assert!(matches!(seg("<h1>A</h2>"), Err(SegmentError::MalformedMarkup { .. })));
        assert!(matches!(seg("<p>x</p></div>"), Err(SegmentError::MalformedMarkup { .. })));
    }

    #[test]
    fn orphan_section_strict_vs_lax() {
        let markup = "<h1>U</h1>\n<h3>Loose</h3><p>body</p>";
        assert_eq!(seg(markup), Err(SegmentError::OrphanSection { line: 2, title: "Loose".into() }));
        let tree = segment_textbook("b", markup, &HeadingRules::default(), ValidationMode::Lax).unwrap();
        assert_eq!(tree.units[0].lessons[0].title, "");
        assert_eq!(tree.section(1).unwrap().paragraphs, vec!["body"]);
    }

    #[test]
    fn body_text_is_preserved() {
        let tree = seg(
            "<!DOCTYPE html><html><body>Foreword<h1>U &amp; V</h1>unit intro<h2>L</h2><p>lesson intro</p>\
             <h3>S</h3><p>One <b>bold</b><br/>line</p>tail text<!-- note --><script>var x = '<p>';</script></body></html>",
        )
        .unwrap();
        assert_eq!(tree.preamble, vec!["Foreword"]);
        assert_eq!(tree.units[0].title, "U & V");
        assert_eq!(tree.units[0].intro, vec!["unit intro"]);
        assert_eq!(tree.units[0].lessons[0].intro, vec!["lesson intro"]);
        assert_eq!(tree.section(1).unwrap().paragraphs, vec!["One bold line", "tail text"]);
    }

    #[test]
    fn custom_rules_and_entities() {
        let rules = HeadingRules { unit: 2, lesson: 3, section: 4 };
        let tree = segment_textbook("b", "<h2>U</h2><h3>L</h3><h4>S &#x3b1; &#946;</h4><h1>ignored</h1>", &rules, ValidationMode::Strict)
            .unwrap();
        assert_eq!(tree.section(1).unwrap().title, "S α β");
        assert_eq!(tree.section(1).unwrap().paragraphs, vec!["ignored"]);
        assert!(segment_textbook("b", "<p>x</p>", &HeadingRules { unit: 1, lesson: 1, section: 3 }, ValidationMode::Strict).is_err());
    }

    #[test]
    fn deterministic_serialization() {
        let markup = "<h1>力</h1><h2>牛顿定律</h2><h3>第一定律</h3><p>惯性。</p>";
        let a = serde_json::to_string(&seg(markup).unwrap()).unwrap();
        let b = serde_json::to_string(&seg(markup).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
