//! Exercise parsing driven by per-locale marker strings.

use std::collections::BTreeSet;
use std::io::BufRead;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Iri;
use crate::textindex::Gazetteer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ExerciseKind {
    Choice,
    TextFilling,
    NumberFilling,
    QuestionAnswer,
    Writing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Choice {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Exercise {
    pub id: String,
    pub kind: ExerciseKind,
    pub background: String,
    pub question: String,
    pub answer: String,
    pub analysis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choices: Option<Vec<Choice>>,
    #[serde(default)]
    pub linked_topics: BTreeSet<Iri>,
}

/// Two or more kind signals fired; the exercise falls back to
/// `QuestionAnswer`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguousKind {
    pub signals: Vec<ExerciseKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedExercise {
    pub exercise: Exercise,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambiguous: Option<AmbiguousKind>,
}

#[derive(Debug, Error)]
pub enum ExerciseError {
    #[error("exercise {id:?} has no question marker or empty question")]
    MissingQuestion { id: String },
    #[error("invalid marker pattern {pattern:?}: {source}")]
    BadPattern { pattern: String, source: regex::Error },
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Marker strings matched case-insensitively, plus regexes for kind signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct ExerciseMarkers {
    pub background: Vec<String>,
    pub question: Vec<String>,
    pub answer: Vec<String>,
    pub analysis: Vec<String>,
    /// Phrases that mark a writing task.
    pub essay: Vec<String>,
    /// Option label; capture group 1 is the letter.
    pub option_pattern: String,
    pub blank_pattern: String,
    /// Blank that expects a number, e.g. followed by a unit.
    pub numeric_blank_pattern: String,
    /// An answer matching this after a plain blank also means numberFilling.
    pub numeric_answer_pattern: String,
}

impl Default for ExerciseMarkers {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        ExerciseMarkers {
            background: v(&["Background:", "背景：", "材料：", "【材料】"]),
            question: v(&["Question:", "问题：", "题目：", "【题目】"]),
            answer: v(&["Answer:", "答案：", "【答案】"]),
            analysis: v(&["Analysis:", "解析：", "【解析】"]),
            essay: v(&["write an essay", "write a composition", "in no less than", "作文", "写一篇"]),
            option_pattern: r"(?:^|[^A-Za-z0-9])\(?((?-i:[A-H]))(?:[.．、:：]|\))\s*".into(),
            blank_pattern: r"_{3,}|（\s*）|\(\s*\)".into(),
            numeric_blank_pattern: r"=\s*_{3,}|_{3,}\s*(?-i:%|°|℃|(?:mm|cm|km|m|kg|g|mg|s|min|h|N|J|kJ|W|V|Ω|Pa|mol|mL|K|Hz)(?:/[a-zA-Z]{1,3})?(?:\W|$))".into(),
            numeric_answer_pattern: r"^\s*[-+−]?\d+(?:[.,]\d+)?(?:\s*\S{0,6})?\s*$".into(),
        }
    }
}

/// Markers with their regexes compiled.
#[derive(Debug, Clone)]
pub struct ExerciseParser {
    markers: ExerciseMarkers,
    option: Regex,
    blank: Regex,
    numeric_blank: Regex,
    numeric_answer: Regex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum FieldName {
    Background,
    Question,
    Answer,
    Analysis,
}

impl ExerciseParser {
    pub fn new(markers: ExerciseMarkers) -> Result<Self, ExerciseError> {
        let compile = |pattern: &str| {
            RegexBuilder::new(pattern)
                .case_insensitive(true)
                .build()
                .map_err(|source| ExerciseError::BadPattern { pattern: pattern.to_owned(), source })
        };
        let option = compile(&markers.option_pattern)?;
        let blank = compile(&markers.blank_pattern)?;
        let numeric_blank = compile(&markers.numeric_blank_pattern)?;
        let numeric_answer = compile(&markers.numeric_answer_pattern)?;
        Ok(ExerciseParser { markers, option, blank, numeric_blank, numeric_answer })
    }

    pub fn markers(&self) -> &ExerciseMarkers {
        &self.markers
    }

    pub fn parse(&self, id: &str, raw: &str) -> Result<ParsedExercise, ExerciseError> {
        let fields = self.split_fields(raw);
        let get = |name| fields.iter().find(|(n, _)| *n == name).map(|(_, text)| text.clone());
        let question_raw = get(FieldName::Question).filter(|q| !q.is_empty());
        let Some(question_raw) = question_raw else {
            return Err(ExerciseError::MissingQuestion { id: id.to_owned() });
        };
        let answer = get(FieldName::Answer).unwrap_or_default();
        let options = self.options(&question_raw);

        let lowered = raw.to_lowercase();
        let mut signals = Vec::new();
        if options.is_some() {
            signals.push(ExerciseKind::Choice);
        }
        if self.numeric_blank.is_match(&question_raw) {
            signals.push(ExerciseKind::NumberFilling);
        } else if self.blank.is_match(&question_raw) {
            let numeric = !answer.is_empty() && self.numeric_answer.is_match(&answer);
            signals.push(if numeric { ExerciseKind::NumberFilling } else { ExerciseKind::TextFilling });
        }
        if self.markers.essay.iter().any(|m| lowered.contains(&m.to_lowercase())) {
            signals.push(ExerciseKind::Writing);
        }

        let (kind, ambiguous) = match signals.as_slice() {
            [] => (ExerciseKind::QuestionAnswer, None),
            [one] => (*one, None),
            _ => (ExerciseKind::QuestionAnswer, Some(AmbiguousKind { signals })),
        };
        let (question, choices) = match (kind, options) {
            (ExerciseKind::Choice, Some((stem, choices))) => (stem, Some(choices)),
            _ => (question_raw, None),
        };
        if question.is_empty() {
            return Err(ExerciseError::MissingQuestion { id: id.to_owned() });
        }
        let exercise = Exercise {
            id: id.to_owned(),
            kind,
            background: get(FieldName::Background).unwrap_or_default(),
            question,
            answer,
            analysis: get(FieldName::Analysis).unwrap_or_default(),
            choices,
            linked_topics: BTreeSet::new(),
        };
        Ok(ParsedExercise { exercise, ambiguous })
    }

    /// Each field starts at the first occurrence of any of its markers and
    /// runs to the next field's marker. Unmarked leading text counts as
    /// background when no background marker is present.
    fn split_fields(&self, raw: &str) -> Vec<(FieldName, String)> {
        let lowered = lowercase_with_offsets(raw);
        let sets = [
            (FieldName::Background, &self.markers.background),
            (FieldName::Question, &self.markers.question),
            (FieldName::Answer, &self.markers.answer),
            (FieldName::Analysis, &self.markers.analysis),
        ];
        let mut starts: Vec<(usize, usize, FieldName)> = Vec::new();
        for (name, markers) in sets {
            let first = markers
                .iter()
                .filter(|m| !m.is_empty())
                .filter_map(|m| lowered.find(&m.to_lowercase()))
                .min();
            if let Some((s, e)) = first {
                starts.push((s, e, name));
            }
        }
        starts.sort();
        let mut out = Vec::new();
        let leading = starts.first().map_or(raw.len(), |s| s.0);
        if !starts.iter().any(|s| s.2 == FieldName::Background) && !raw[..leading].trim().is_empty() {
            out.push((FieldName::Background, raw[..leading].trim().to_owned()));
        }
        for (k, &(_, body_start, name)) in starts.iter().enumerate() {
            let body_end = starts.get(k + 1).map_or(raw.len(), |next| next.0).max(body_start);
            out.push((name, raw[body_start..body_end].trim().to_owned()));
        }
        out
    }

    /// Splits the stem from options labelled A, B, C… in order; needs at
    /// least two consecutive labels starting at A.
    fn options(&self, question: &str) -> Option<(String, Vec<Choice>)> {
        let mut found: Vec<(usize, usize, char)> = Vec::new();
        let mut expected = 'A';
        for caps in self.option.captures_iter(question) {
            let whole = caps.get(0).expect("match");
            let label = caps.get(1)?;
            let letter = label.as_str().chars().next()?.to_ascii_uppercase();
            if letter == expected {
                let start = if question[..label.start()].ends_with('(') { label.start() - 1 } else { label.start() };
                found.push((start, whole.end(), letter));
                expected = char::from(expected as u8 + 1);
            }
        }
        if found.len() < 2 {
            return None;
        }
        let choices = found
            .iter()
            .enumerate()
            .map(|(k, &(_, text_start, label))| {
                let text_end = found.get(k + 1).map_or(question.len(), |n| n.0);
                Choice { label: label.to_string(), text: question[text_start..text_end].trim().to_owned() }
            })
            .collect();
        Some((question[..found[0].0].trim().to_owned(), choices))
    }
}

/// Lowercased copy of a string that maps match positions back to byte
/// offsets in the original.
struct Lowered {
    text: String,
    /// Original byte offset for each byte of `text`, plus the end.
    origin: Vec<usize>,
}

fn lowercase_with_offsets(raw: &str) -> Lowered {
    let mut text = String::with_capacity(raw.len());
    let mut origin = Vec::with_capacity(raw.len() + 1);
    for (at, c) in raw.char_indices() {
        for lc in c.to_lowercase() {
            let before = text.len();
            text.push(lc);
            origin.extend(std::iter::repeat_n(at, text.len() - before));
        }
    }
    origin.push(raw.len());
    Lowered { text, origin }
}

impl Lowered {
    /// Original (start, end) byte range of the first occurrence of `needle`.
    fn find(&self, needle: &str) -> Option<(usize, usize)> {
        let s = self.text.find(needle)?;
        let e = s + needle.len();
        let end = if e == self.text.len() { *self.origin.last()? } else { self.origin[e] };
        Some((self.origin[s], end))
    }
}

pub fn parse_exercise(id: &str, raw: &str, markers: &ExerciseMarkers) -> Result<ParsedExercise, ExerciseError> {
    ExerciseParser::new(markers.clone())?.parse(id, raw)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawExercise {
    pub id: String,
    pub raw: String,
}

/// Reads `{id, raw}` lines; blank lines are skipped. Per-exercise failures
/// are returned in place so one bad item does not stop a batch.
pub fn parse_exercises_jsonl<R: BufRead>(
    reader: R,
    parser: &ExerciseParser,
) -> Result<Vec<Result<ParsedExercise, ExerciseError>>, ExerciseError> {
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: RawExercise = serde_json::from_str(&line).map_err(|source| ExerciseError::Json { line: k + 1, source })?;
        out.push(parser.parse(&item.id, &item.raw));
    }
    Ok(out)
}

/// Fills `linked_topics` with every gazetteer concept mentioned in any text
/// field of the exercise.
pub fn link_exercise_topics(exercise: &mut Exercise, gazetteer: &Gazetteer<Iri>) {
    let choice_texts = exercise.choices.iter().flatten().map(|c| c.text.as_str());
    let texts: Vec<&str> = [exercise.background.as_str(), &exercise.question, &exercise.answer, &exercise.analysis]
        .into_iter()
        .chain(choice_texts)
        .collect();
    for text in texts {
        for m in gazetteer.find_all(text) {
            exercise.linked_topics.extend(m.payloads.iter().cloned());
        }
    }
}
