//! Interpolated n-gram language model used for clarity scores.
//!
//! Outcomes are the kept vocabulary plus `<unk>` and `</s>`; histories are
//! padded with `<s>`. Each order contributes a maximum-likelihood estimate
//! normalized over the continuations seen after its history, and the
//! unigram estimate is add-alpha smoothed so no outcome gets zero mass.
//! When a history was never seen, the next lower order stands in for it.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::encoder::UNK;
use crate::text::tokenize;
use crate::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NGramConfig {
    pub order: usize,
    /// Interpolation weights, lowest order first; must sum to 1.
    pub lambdas: Vec<f64>,
    /// Words seen fewer times map to `<unk>`.
    pub min_count: u64,
    /// Add-alpha constant of the unigram estimate.
    pub alpha: f64,
}

impl Default for NGramConfig {
    fn default() -> Self {
        NGramConfig { order: 3, lambdas: alloc::vec![0.1, 0.3, 0.6], min_count: 2, alpha: 1.0 }
    }
}

impl NGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.lambdas.len() != self.order {
            return Err(Error::InvalidArgument(format!(
                "need one interpolation weight per order ({} for order {})",
                self.lambdas.len(),
                self.order
            )));
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument("interpolation weights must be non-negative".into()));
        }
        let sum: f64 = self.lambdas.iter().sum();
        if libm::fabs(sum - 1.0) > 1e-9 {
            return Err(Error::InvalidArgument(format!("interpolation weights sum to {sum}, not 1")));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument("alpha must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramLM {
    pub config: NGramConfig,
    /// Kept words, sorted; `<unk>` and `</s>` are implicit outcomes.
    pub vocab: Vec<String>,
    /// `counts[n-1]` maps a space-joined n-gram to its count.
    pub counts: Vec<BTreeMap<String, u64>>,
    /// `context_counts[n-1]` maps a space-joined (n-1)-word history to the
    /// number of n-grams that continue it.
    pub context_counts: Vec<BTreeMap<String, u64>>,
    pub total_unigrams: u64,
}

impl NGramLM {
    /// Fits on `sentences`, each tokenized like every other text in the crate.
    pub fn fit<S: AsRef<str>>(sentences: &[S], config: NGramConfig) -> Result<Self> {
        config.validate()?;
        if sentences.is_empty() {
            return Err(Error::EmptyInput("no sentences to fit the language model on"));
        }
        let tokenized: Vec<Vec<String>> = sentences.iter().map(|s| tokenize(s.as_ref())).collect();
        let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
        for t in tokenized.iter().flatten() {
            *freq.entry(t.as_str()).or_insert(0) += 1;
        }
        let vocab: Vec<String> = freq
            .into_iter()
            .filter(|(w, c)| *c >= config.min_count && *w != UNK && *w != EOS && *w != BOS)
            .map(|(w, _)| w.to_string())
            .collect();
        let mut lm = NGramLM {
            counts: alloc::vec![BTreeMap::new(); config.order],
            context_counts: alloc::vec![BTreeMap::new(); config.order],
            config,
            vocab,
            total_unigrams: 0,
        };
        for sentence in &tokenized {
            let padded = lm.pad(sentence);
            let start = lm.config.order - 1;
            for i in start..padded.len() {
                for n in 1..=lm.config.order {
                    let gram = padded[i + 1 - n..=i].join(" ");
                    let history = padded[i + 1 - n..i].join(" ");
                    *lm.counts[n - 1].entry(gram).or_insert(0) += 1;
                    *lm.context_counts[n - 1].entry(history).or_insert(0) += 1;
                }
                lm.total_unigrams += 1;
            }
        }
        Ok(lm)
    }

    /// Unigram-only model that gives every outcome the same probability.
    /// The vocabulary size counts `words` plus `<unk>` and `</s>`.
    pub fn uniform<S: AsRef<str>>(words: &[S]) -> Self {
        let mut vocab: Vec<String> = words.iter().map(|w| w.as_ref().to_string()).collect();
        vocab.sort();
        vocab.dedup();
        NGramLM {
            config: NGramConfig { order: 1, lambdas: alloc::vec![1.0], min_count: 1, alpha: 1.0 },
            vocab,
            counts: alloc::vec![BTreeMap::new()],
            context_counts: alloc::vec![BTreeMap::new()],
            total_unigrams: 0,
        }
    }

    /// Number of outcomes: kept words, `<unk>` and `</s>`.
    pub fn vocab_size(&self) -> usize {
        self.vocab.len() + 2
    }

    /// Every outcome, for normalization checks.
    pub fn outcomes(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.vocab.iter().map(String::as_str).collect();
        out.push(UNK);
        out.push(EOS);
        out
    }

    fn map_word<'a>(&'a self, w: &'a str) -> &'a str {
        if w == EOS || self.vocab.binary_search_by(|v| v.as_str().cmp(w)).is_ok() {
            w
        } else {
            UNK
        }
    }

    fn pad(&self, tokens: &[String]) -> Vec<String> {
        let mut padded: Vec<String> = alloc::vec![BOS.to_string(); self.config.order - 1];
        padded.extend(tokens.iter().map(|t| self.map_word(t).to_string()));
        padded.push(EOS.to_string());
        padded
    }

    fn unigram(&self, w: &str) -> f64 {
        let c = self.counts[0].get(w).copied().unwrap_or(0) as f64;
        let denom = self.total_unigrams as f64 + self.config.alpha * self.vocab_size() as f64;
        if denom == 0.0 {
            0.0
        } else {
            (c + self.config.alpha) / denom
        }
    }

    /// `p(w | history)`; `history` holds the preceding mapped tokens, most
    /// recent last, and may be shorter than `order - 1`.
    pub fn prob(&self, history: &[&str], w: &str) -> f64 {
        let w = self.map_word(w);
        let mut component = self.unigram(w);
        let mut p = self.config.lambdas[0] * component;
        for n in 2..=self.config.order {
            let h = n - 1;
            let ctx: Vec<&str> = if history.len() >= h {
                history[history.len() - h..].to_vec()
            } else {
                let mut padded = alloc::vec![BOS; h - history.len()];
                padded.extend_from_slice(history);
                padded
            };
            let key = ctx.join(" ");
            if let Some(&total) = self.context_counts[n - 1].get(&key) {
                let c = self.counts[n - 1].get(&format!("{key} {w}")).copied().unwrap_or(0);
                component = c as f64 / total as f64;
            }
            p += self.config.lambdas[n - 1] * component;
        }
        p
    }

    /// Probabilities of each word token of `text` (end marker excluded).
    pub fn token_probs(&self, text: &str) -> Result<Vec<f64>> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Err(Error::EmptyInput("question has no tokens"));
        }
        let mapped: Vec<&str> = tokens.iter().map(|t| self.map_word(t)).collect();
        Ok((0..mapped.len()).map(|i| self.prob(&mapped[..i], mapped[i])).collect())
    }

    /// `exp(-(1/N) sum ln p(w_j | history))` over the N word tokens.
    pub fn perplexity(&self, text: &str) -> Result<f64> {
        let ps = self.token_probs(text)?;
        // a constant sequence is its own geometric mean; skip the log/exp round trip
        if ps.iter().all(|p| *p == ps[0]) {
            return Ok(1.0 / ps[0]);
        }
        let mean_log = ps.iter().map(|p| libm::log(*p)).sum::<f64>() / ps.len() as f64;
        Ok(libm::exp(-mean_log))
    }
}
