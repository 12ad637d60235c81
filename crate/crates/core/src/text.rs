//! Tokenization shared by entity linking, encoders, n-gram models and ROUGE.
//!
//! A token is a maximal run of alphanumeric characters; everything else is a
//! separator. Tokens are case-folded with full Unicode lowercasing.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

/// A token together with the byte range it occupies in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Range<usize>,
}

pub fn tokenize_with_spans(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    for (pos, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if current.is_empty() {
                start = pos;
            }
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            out.push(Token { text: core::mem::take(&mut current), span: start..pos });
        }
    }
    if !current.is_empty() {
        out.push(Token { text: current, span: start..text.len() });
    }
    out
}

pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_with_spans(text).into_iter().map(|t| t.text).collect()
}

/// Case-folded, token-normalized form of `text` (tokens joined by one space).
pub fn normalize(text: &str) -> String {
    tokenize(text).join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_punctuation_and_folds_case() {
        assert_eq!(tokenize("When I'm Gone?"), ["when", "i", "m", "gone"]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
        assert_eq!(tokenize("release_year"), ["release", "year"]);
    }

    #[test]
    fn spans_point_into_source() {
        let text = "Do you know ÉCOLE 42?";
        for tok in tokenize_with_spans(text) {
            assert_eq!(normalize(&text[tok.span.clone()]), tok.text);
        }
        assert_eq!(tokenize(text), ["do", "you", "know", "école", "42"]);
    }
}
