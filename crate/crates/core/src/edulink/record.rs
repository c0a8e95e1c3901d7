use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{EduLinkError, Mention};
use crate::model::Iri;
use crate::textindex::{char_slice, sentence_of, split_sentences};

/// An ingested record, tagged by shape. Each shape has its own linking
/// context rule; see [`build_context`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HeteroRecord {
    /// Free text; an image record carries only its caption.
    #[serde(rename_all = "camelCase")]
    Unstructured {
        id: String,
        #[serde(default)]
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        caption: Option<String>,
    },
    /// Ordered `(column, value)` pairs; mentions are read from the focus column.
    #[serde(rename_all = "camelCase")]
    SemiStructured { id: String, fields: Vec<(String, String)>, focus_field: String },
    /// An entity from another graph; mentions are read from its label.
    #[serde(rename_all = "camelCase")]
    Structured {
        id: String,
        external_iri: Iri,
        label: String,
        #[serde(default)]
        description: String,
    },
}

impl HeteroRecord {
    pub fn id(&self) -> &str {
        match self {
            HeteroRecord::Unstructured { id, .. }
            | HeteroRecord::SemiStructured { id, .. }
            | HeteroRecord::Structured { id, .. } => id,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            HeteroRecord::Unstructured { .. } => "unstructured",
            HeteroRecord::SemiStructured { .. } => "semi_structured",
            HeteroRecord::Structured { .. } => "structured",
        }
    }

    pub fn validate(&self) -> Result<(), EduLinkError> {
        if self.id().trim().is_empty() {
            return Err(EduLinkError::InvalidRecord { id: String::new(), reason: "empty id".into() });
        }
        if let HeteroRecord::SemiStructured { id, fields, focus_field } = self {
            if fields.is_empty() {
                return Err(EduLinkError::InvalidRecord { id: id.clone(), reason: "no fields".into() });
            }
            if !fields.iter().any(|(c, _)| c == focus_field) {
                return Err(EduLinkError::InvalidRecord {
                    id: id.clone(),
                    reason: format!("focus field {focus_field:?} is not a column"),
                });
            }
        }
        Ok(())
    }

    /// The text mentions are detected in. Mention offsets are char offsets
    /// into this text.
    pub fn mention_text(&self) -> &str {
        match self {
            HeteroRecord::Unstructured { text, caption, .. } => {
                if text.trim().is_empty() {
                    caption.as_deref().unwrap_or("")
                } else {
                    text
                }
            }
            HeteroRecord::SemiStructured { fields, focus_field, .. } => {
                fields.iter().find(|(c, _)| c == focus_field).map_or("", |(_, v)| v)
            }
            HeteroRecord::Structured { label, .. } => label,
        }
    }

    /// Short human-readable label for the stored datum.
    pub fn display_label(&self) -> String {
        match self {
            HeteroRecord::Unstructured { text, caption, .. } => match caption {
                Some(c) if !c.trim().is_empty() => c.clone(),
                _ => {
                    let mut s: String = text.chars().take(80).collect();
                    if text.chars().count() > 80 {
                        s.push('…');
                    }
                    s
                }
            },
            HeteroRecord::SemiStructured { .. } | HeteroRecord::Structured { .. } => self.mention_text().to_owned(),
        }
    }

    /// The whole record flattened to one text.
    pub fn full_text(&self) -> String {
        match self {
            HeteroRecord::Unstructured { text, caption, .. } => match caption {
                Some(c) if !text.is_empty() => format!("{c}\n{text}"),
                Some(c) => c.clone(),
                None => text.clone(),
            },
            HeteroRecord::SemiStructured { fields, .. } => render_fields(fields.iter()),
            HeteroRecord::Structured { label, description, .. } => {
                crate::model::join_label_description(label, description)
            }
        }
    }
}

fn render_fields<'a>(fields: impl Iterator<Item = &'a (String, String)>) -> String {
    fields.map(|(c, v)| format!("{c}: {v}")).collect::<Vec<_>>().join("; ")
}

/// Context compared against candidate descriptions: the sentence holding the
/// mention (or the caption of an image record), the non-focus columns as
/// `col: value` pairs, or the external description.
pub fn build_context(record: &HeteroRecord, mention: &Mention) -> String {
    match record {
        HeteroRecord::Unstructured { text, caption, .. } => {
            if text.trim().is_empty() {
                return caption.clone().unwrap_or_default();
            }
            let sentences = split_sentences(text);
            match sentence_of(&sentences, mention.start) {
                Some(i) => char_slice(text, sentences[i].0, sentences[i].1).trim().to_owned(),
                None => text.clone(),
            }
        }
        HeteroRecord::SemiStructured { fields, focus_field, .. } => {
            render_fields(fields.iter().filter(|(c, _)| c != focus_field))
        }
        HeteroRecord::Structured { description, .. } => description.clone(),
    }
}

pub fn parse_records_jsonl<R: BufRead>(input: R) -> Result<Vec<HeteroRecord>, EduLinkError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| EduLinkError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: HeteroRecord =
            serde_json::from_str(&line).map_err(|e| EduLinkError::Json { line: n + 1, message: e.to_string() })?;
        record.validate()?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edulink::MentionKind;

    fn mention(start: usize, end: usize) -> Mention {
        Mention { start, end, surface: String::new(), query: String::new(), kind: MentionKind::Concept, source_record_id: "r".into() }
    }

    #[test]
    fn context_rules() {
        let text = "Capacitors are everywhere. Capacitance is measured in farads.";
        let r = HeteroRecord::Unstructured { id: "r".into(), text: text.into(), caption: None };
        assert_eq!(build_context(&r, &mention(27, 38)), "Capacitance is measured in farads.");
        let r = HeteroRecord::SemiStructured {
            id: "r".into(),
            fields: vec![("name".into(), "Beijing".into()), ("population".into(), "21M".into())],
            focus_field: "name".into(),
        };
        assert_eq!(build_context(&r, &mention(0, 7)), "population: 21M");
        assert_eq!(r.mention_text(), "Beijing");
        let r = HeteroRecord::Structured {
            id: "r".into(),
            external_iri: Iri::new("http://x/Y").unwrap(),
            label: "Y".into(),
            description: "A thing called Y.".into(),
        };
        assert_eq!(build_context(&r, &mention(0, 1)), "A thing called Y.");
        let img = HeteroRecord::Unstructured { id: "i".into(), text: String::new(), caption: Some("A plant cell".into()) };
        assert_eq!(build_context(&img, &mention(2, 7)), "A plant cell");
        assert_eq!(img.mention_text(), "A plant cell");
    }

    #[test]
    fn jsonl_arms_and_validation() {
        let input = concat!(
            r#"{"type":"unstructured","id":"a","text":"hello"}"#, "\n",
            r#"{"type":"semi_structured","id":"b","fields":[["name","Beijing"]],"focusField":"name"}"#, "\n",
            r#"{"type":"structured","id":"c","externalIri":"http://x/C","label":"C","description":"d"}"#, "\n",
        );
        let recs = parse_records_jsonl(input.as_bytes()).unwrap();
        assert_eq!(recs.iter().map(HeteroRecord::kind_name).collect::<Vec<_>>(), ["unstructured", "semi_structured", "structured"]);
        let bad = r#"{"type":"semi_structured","id":"b","fields":[["name","x"]],"focusField":"city"}"#;
        assert!(matches!(parse_records_jsonl(bad.as_bytes()), Err(EduLinkError::InvalidRecord { .. })));
        let empty = r#"{"type":"semi_structured","id":"b","fields":[],"focusField":"city"}"#;
        assert!(parse_records_jsonl(empty.as_bytes()).is_err());
    }
}
