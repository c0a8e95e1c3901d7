use std::collections::HashMap;

use unicode_normalization::UnicodeNormalization;

/// Dictionary matcher: longest match first, non-overlapping, scanning left to
/// right. Matching is case-insensitive; offsets are char offsets into the
/// text as given.
#[derive(Debug, Clone)]
pub struct Gazetteer<T> {
    by_first: HashMap<char, Vec<Pattern<T>>>,
}

#[derive(Debug, Clone)]
struct Pattern<T> {
    chars: Vec<char>,
    payloads: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazetteerMatch<'a, T> {
    pub start: usize,
    pub end: usize,
    pub payloads: &'a [T],
}

impl<T> Default for Gazetteer<T> {
    fn default() -> Self {
        Gazetteer { by_first: HashMap::new() }
    }
}

fn fold(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

/// Letters and digits outside the CJK ranges; a match may not split a run of
/// these.
fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() && !is_cjk(c)
}

pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF | 0x3400..=0x4DBF | 0x4E00..=0x9FFF | 0xF900..=0xFAFF | 0xAC00..=0xD7AF | 0x20000..=0x2FA1F)
}

impl<T: PartialEq> Gazetteer<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `surface`; blank surfaces are ignored.
    pub fn insert(&mut self, surface: &str, payload: T) {
        let chars: Vec<char> = surface.trim().nfc().map(fold).collect();
        let Some(&first) = chars.first() else { return };
        let bucket = self.by_first.entry(first).or_default();
        match bucket.iter_mut().find(|p| p.chars == chars) {
            Some(p) => {
                if !p.payloads.contains(&payload) {
                    p.payloads.push(payload);
                }
            }
            None => {
                bucket.push(Pattern { chars, payloads: vec![payload] });
                bucket.sort_by_key(|p| std::cmp::Reverse(p.chars.len()));
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.by_first.is_empty()
    }

    pub fn find_all(&self, text: &str) -> Vec<GazetteerMatch<'_, T>> {
        let chars: Vec<char> = text.chars().collect();
        let folded: Vec<char> = chars.iter().copied().map(fold).collect();
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < folded.len() {
            let found = self.by_first.get(&folded[pos]).and_then(|bucket| {
                bucket.iter().find(|p| {
                    let end = pos + p.chars.len();
                    end <= folded.len()
                        && folded[pos..end] == p.chars[..]
                        && boundary_ok(&chars, pos, end)
                })
            });
            match found {
                Some(p) => {
                    let end = pos + p.chars.len();
                    out.push(GazetteerMatch { start: pos, end, payloads: &p.payloads });
                    pos = end;
                }
                None => pos += 1,
            }
        }
        out
    }
}

fn boundary_ok(chars: &[char], start: usize, end: usize) -> bool {
    let left_ok = start == 0 || !(is_word_char(chars[start - 1]) && is_word_char(chars[start]));
    let right_ok = end == chars.len() || !(is_word_char(chars[end - 1]) && is_word_char(chars[end]));
    left_ok && right_ok
}

/// Substring of `text` between char offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> String {
    text.chars().skip(start).take(end.saturating_sub(start)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_match_wins() {
        let mut g = Gazetteer::new();
        g.insert("Industrial Revolution", 1);
        g.insert("Revolution", 2);
        g.insert("wealth gap", 3);
        let text = "The industrial revolution widened the Wealth Gap.";
        let m = g.find_all(text);
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].start, m[0].end, m[0].payloads), (4, 25, &[1][..]));
        assert_eq!(char_slice(text, m[1].start, m[1].end), "Wealth Gap");
    }

    #[test]
    fn respects_word_boundaries_but_not_for_cjk() {
        let mut g = Gazetteer::new();
        g.insert("art", 1);
        g.insert("电容", 2);
        assert!(g.find_all("a particle").is_empty());
        assert_eq!(g.find_all("modern art.").len(), 1);
        let m = g.find_all("平行板电容器");
        assert_eq!((m[0].start, m[0].end), (3, 5));
    }

    #[test]
    fn shared_surface_keeps_all_payloads() {
        let mut g = Gazetteer::new();
        g.insert("capacitance", "quantity");
        g.insert("Capacitance", "component");
        g.insert("capacitance", "quantity");
        let m = g.find_all("capacitance");
        assert_eq!(m[0].payloads, &["quantity", "component"][..]);
    }
}
