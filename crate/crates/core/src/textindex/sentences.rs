/// Sentence boundaries as char-offset ranges `[start, end)`, trimmed of
/// surrounding whitespace. ASCII `.` `!` `?` end a sentence only when
/// followed by whitespace or the end of text; the full-width terminators
/// `。` `．` `！` `？` always end one, since CJK text has no spaces after them.
pub fn split_sentences(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for (k, &c) in chars.iter().enumerate() {
        let ends = match c {
            '。' | '．' | '！' | '？' => true,
            '.' | '!' | '?' => chars.get(k + 1).is_none_or(|n| n.is_whitespace()),
            _ => false,
        };
        if ends {
            push_trimmed(&chars, start, k + 1, &mut out);
            start = k + 1;
        }
    }
    push_trimmed(&chars, start, chars.len(), &mut out);
    out
}

fn push_trimmed(chars: &[char], mut start: usize, mut end: usize, out: &mut Vec<(usize, usize)>) {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    if start < end {
        out.push((start, end));
    }
}

/// Index of the sentence containing char offset `at`.
pub fn sentence_of(sentences: &[(usize, usize)], at: usize) -> Option<usize> {
    sentences.iter().position(|&(s, e)| s <= at && at < e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textindex::char_slice;

    #[test]
    fn splits_on_terminal_punctuation() {
        let text = "Capacitance is 3.5 F. It stores charge!  Why? ok";
        let s: Vec<String> = split_sentences(text).into_iter().map(|(a, b)| char_slice(text, a, b)).collect();
        assert_eq!(s, vec!["Capacitance is 3.5 F.", "It stores charge!", "Why?", "ok"]);
    }

    #[test]
    fn fullwidth_terminators() {
        let text = "电容是物理量。电容器是元件！";
        let s = split_sentences(text);
        assert_eq!(s, vec![(0, 7), (7, 14)]);
        assert_eq!(sentence_of(&s, 8), Some(1));
        assert!(split_sentences("   ").is_empty());
    }
}
