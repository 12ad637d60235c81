use alloc::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::text::tokenize;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(overlap: usize, candidate: usize, reference: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (precision, recall) = (ratio(overlap, candidate), ratio(overlap, reference));
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        RougeScore { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub r1: RougeScore,
    pub r2: RougeScore,
    pub rl: RougeScore,
    /// Candidate or reference had no tokens; every score is 0.
    pub empty: bool,
}

fn ngram_counts(tokens: &[alloc::string::String], n: usize) -> BTreeMap<&[alloc::string::String], usize> {
    let mut counts = BTreeMap::new();
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

fn ngram_score(cand: &[alloc::string::String], reference: &[alloc::string::String], n: usize) -> RougeScore {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(reference, n);
    let overlap = c.iter().map(|(g, k)| (*k).min(r.get(g).copied().unwrap_or(0))).sum();
    RougeScore::from_counts(overlap, cand.len().saturating_sub(n - 1), reference.len().saturating_sub(n - 1))
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = alloc::vec![0usize; b.len() + 1];
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-1, ROUGE-2 and ROUGE-L of `candidate` against `reference`.
///
/// No stemming or stopword removal; tokens are case-folded alphanumeric runs.
pub fn rouge(candidate: &str, reference: &str) -> RougeScores {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    if c.is_empty() || r.is_empty() {
        return RougeScores { empty: true, ..Default::default() };
    }
    RougeScores {
        r1: ngram_score(&c, &r, 1),
        r2: ngram_score(&c, &r, 2),
        rl: RougeScore::from_counts(lcs_len(&c, &r), c.len(), r.len()),
        empty: false,
    }
}

/// Corpus means of F1 and recall per variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RougeSummary {
    pub n: usize,
    pub empty_pairs: usize,
    pub r1_f1: f64,
    pub r2_f1: f64,
    pub rl_f1: f64,
    pub r1_recall: f64,
    pub r2_recall: f64,
    pub rl_recall: f64,
}

pub fn rouge_corpus(scores: &[RougeScores]) -> Result<RougeSummary> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no ROUGE pairs"));
    }
    let n = scores.len() as f64;
    let mean = |f: fn(&RougeScores) -> f64| scores.iter().map(f).sum::<f64>() / n;
    Ok(RougeSummary {
        n: scores.len(),
        empty_pairs: scores.iter().filter(|s| s.empty).count(),
        r1_f1: mean(|s| s.r1.f1),
        r2_f1: mean(|s| s.r2.f1),
        rl_f1: mean(|s| s.rl.f1),
        r1_recall: mean(|s| s.r1.recall),
        r2_recall: mean(|s| s.r2.recall),
        rl_recall: mean(|s| s.rl.recall),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_pair() {
        let s = rouge("the cat sat", "the cat");
        assert!((s.r1.precision - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.r1.recall, 1.0);
        assert!((s.r1.f1 - 0.8).abs() < 1e-12);
        assert_eq!(s.r2.precision, 0.5);
        assert!((s.r2.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.rl.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn identical_and_empty() {
        let s = rouge("Who wrote it?", "who wrote it");
        for v in [s.r1, s.r2, s.rl] {
            assert_eq!((v.precision, v.recall, v.f1), (1.0, 1.0, 1.0));
        }
        let e = rouge("?!", "a b");
        assert!(e.empty);
        assert_eq!(e.r1.f1, 0.0);
    }

    #[test]
    fn clipping_and_single_token() {
        // candidate "the" x3, reference has one "the"
        let s = rouge("the the the", "the cat");
        assert!((s.r1.precision - 1.0 / 3.0).abs() < 1e-12);
        let one = rouge("cat", "the cat");
        assert_eq!(one.r2.precision, 0.0);
        assert_eq!(one.r2.f1, 0.0);
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(lcs_len(b"abcbdab", b"bdcaba"), 4);
        assert_eq!(lcs_len::<u8>(b"", b"abc"), 0);
    }
}
