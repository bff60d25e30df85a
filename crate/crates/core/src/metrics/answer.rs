//! Scoring of multiple-choice and free-form text answers.

use super::reward::answer_region;

/// Option letters recognized by [`extract_option`].
const OPTION_LETTERS: std::ops::RangeInclusive<char> = 'A'..='H';

/// Last option letter mentioned in the answer region (text after any
/// `</think>`).
///
/// An uppercase letter counts when it stands alone (no adjacent letter or
/// digit). A lowercase letter counts only in an option-like form: `(a)`, or
/// `a.`, `a)`, `a:` followed by whitespace or end of text. This keeps the
/// English article "a" from being read as an option.
pub fn extract_option(response: &str) -> Option<char> {
    let chars: Vec<char> = answer_region(response).chars().collect();
    let mut found = None;
    for (i, &c) in chars.iter().enumerate() {
        let upper = c.to_ascii_uppercase();
        if !OPTION_LETTERS.contains(&upper) || !c.is_ascii_alphabetic() {
            continue;
        }
        let prev = if i > 0 { Some(chars[i - 1]) } else { None };
        let next = chars.get(i + 1).copied();
        let after = chars.get(i + 2).copied();
        let prev_free = prev.is_none_or(|p| !p.is_alphanumeric() && p != '.');
        if !prev_free {
            continue;
        }
        let next_free = next.is_none_or(|n| !n.is_alphanumeric());
        let ok = if c.is_ascii_uppercase() {
            next_free
        } else {
            let parenthesized = prev == Some('(') && next == Some(')');
            let marked = matches!(next, Some('.' | ')' | ':')) && after.is_none_or(char::is_whitespace);
            parenthesized || marked
        };
        if ok {
            found = Some(upper);
        }
    }
    found
}

/// 1 when the extracted option equals `gold` (case-insensitive), else 0.
pub fn mcq_accuracy(response: &str, gold: char) -> f64 {
    match extract_option(response) {
        Some(c) if c == gold.to_ascii_uppercase() => 1.0,
        _ => 0.0,
    }
}

/// Pluggable scorer for open-ended and OCR answers.
pub trait TextScorer {
    /// Score in `[0, 1]` for a response against the reference answer.
    fn score(&self, response: &str, reference: &str) -> f64;
}

/// Exact match after trimming, collapsing whitespace and ASCII case folding.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactMatch;

impl TextScorer for ExactMatch {
    fn score(&self, response: &str, reference: &str) -> f64 {
        let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_ascii_lowercase();
        if norm(answer_region(response)) == norm(reference) {
            1.0
        } else {
            0.0
        }
    }
}
