/// Levenshtein distance over Unicode scalar values, or `None` once it
/// provably exceeds `max`.
pub fn bounded_levenshtein(a: &str, b: &str, max: usize) -> Option<usize> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.len().abs_diff(b.len()) > max {
        return None;
    }
    if a.is_empty() || b.is_empty() {
        return Some(a.len().max(b.len()));
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, cb) in b.iter().enumerate() {
            let subst = prev[j] + usize::from(ca != cb);
            cur[j + 1] = subst.min(prev[j + 1] + 1).min(cur[j] + 1);
            row_min = row_min.min(cur[j + 1]);
        }
        if row_min > max {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[b.len()];
    (d <= max).then_some(d)
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    bounded_levenshtein(a, b, usize::MAX).expect("unbounded")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_distances() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("capacitanse", "capacitance"), 1);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("电容", "电荷"), 1);
        assert_eq!(bounded_levenshtein("kitten", "sitting", 2), None);
        assert_eq!(bounded_levenshtein("kitten", "sitting", 3), Some(3));
    }

    proptest! {
        #[test]
        fn bounded_agrees_with_full(a in "[abc]{0,7}", b in "[abc]{0,7}", max in 0usize..5) {
            let full = levenshtein(&a, &b);
            let bounded = bounded_levenshtein(&a, &b, max);
            prop_assert_eq!(bounded, (full <= max).then_some(full));
        }
    }
}
