//! Exact-span precision, recall and F1 against gold links.

use std::collections::BTreeSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::{EduLinkError, LinkResult};
use crate::model::Iri;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GoldLink {
    pub record_id: String,
    pub start: usize,
    pub end: usize,
    pub entity_iri: Iri,
}

/// Percentages in [0, 100].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl EvalReport {
    /// Builds a report from raw counts; empty denominators give 0.
    pub fn from_counts(correct: usize, predicted: usize, gold: usize) -> Self {
        let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
        let precision = pct(correct, predicted);
        let recall = pct(correct, gold);
        EvalReport { precision, recall, f1: f1(precision, recall), correct, predicted, gold }
    }
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// A non-NIL prediction is correct when (record, start, end, iri) equals a
/// gold link. Duplicate gold links count once.
pub fn evaluate_linking(gold: &[GoldLink], predicted: &[LinkResult]) -> EvalReport {
    let gold: BTreeSet<&GoldLink> = gold.iter().collect();
    let keys: BTreeSet<GoldLink> = predicted
        .iter()
        .filter_map(|p| {
            Some(GoldLink {
                record_id: p.mention.source_record_id.clone(),
                start: p.mention.start,
                end: p.mention.end,
                entity_iri: p.resolved.clone()?,
            })
        })
        .collect();
    let correct = keys.iter().filter(|k| gold.contains(k)).count();
    EvalReport::from_counts(correct, keys.len(), gold.len())
}

pub fn parse_gold_jsonl<R: BufRead>(input: R) -> Result<Vec<GoldLink>, EduLinkError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| EduLinkError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| EduLinkError::Json { line: n + 1, message: e.to_string() })?);
    }
    Ok(out)
}

/// Aligned text table with Subject, Recall, Precision and F1 columns.
pub fn render_table(rows: &[(String, EvalReport)]) -> String {
    let width = rows.iter().map(|(s, _)| s.chars().count()).chain([7]).max().unwrap_or(7);
    let mut out = format!("{:<width$}  {:>9}  {:>9}  {:>9}\n", "Subject", "Recall", "Precision", "F1");
    for (subject, r) in rows {
        out.push_str(&format!("{subject:<width$}  {:>9.2}  {:>9.2}  {:>9.2}\n", r.recall, r.precision, r.f1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_mean_cases() {
        assert_eq!(f1(50.0, 50.0), 50.0);
        assert_eq!(f1(0.0, 0.0), 0.0);
        let r = EvalReport::from_counts(0, 0, 10);
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        let r = EvalReport::from_counts(211, 274, 244);
        assert!((r.f1 - 81.47).abs() < 0.01);
    }

    #[test]
    fn table_has_header_and_rows() {
        let t = render_table(&[("Biology".into(), EvalReport::from_counts(211, 274, 244))]);
        let lines: Vec<&str> = t.lines().collect();
        assert!(lines[0].starts_with("Subject"));
        assert!(lines[1].contains("86.48") && lines[1].contains("77.01") && lines[1].contains("81.47"));
    }

    #[test]
    fn gold_jsonl() {
        let g = parse_gold_jsonl(r#"{"recordId":"r","start":0,"end":3,"entityIri":"edukg://concept/a"}"#.as_bytes()).unwrap();
        assert_eq!(g[0].end, 3);
    }
}
