//! Bag-of-words context encoder.
//!
//! Stands in for a pretrained sentence encoder: tokens are embedded,
//! mean-pooled, and passed through one `tanh` layer. Any model that needs a
//! fixed-size view of some text (dialogue history, a follow-up question)
//! owns one of these.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{Activation, Dense, DenseCache, Param, Parameterized};
use crate::text::tokenize;
use crate::Result;

pub const UNK: &str = "<unk>";

/// Token vocabulary; index 0 is always `<unk>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
}

impl From<VocabRepr> for Vocabulary {
    fn from(r: VocabRepr) -> Self {
        Vocabulary::from_tokens(r.tokens)
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr { tokens: v.tokens }
    }
}

impl Vocabulary {
    /// Keeps tokens seen at least `min_count` times, in sorted order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            for tok in tokenize(text) {
                *counts.entry(tok).or_insert(0) += 1;
            }
        }
        let tokens = core::iter::once(UNK.to_string())
            .chain(counts.into_iter().filter(|(t, c)| *c >= min_count.max(1) && t != UNK).map(|(t, _)| t))
            .collect();
        Self::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        tokenize(text).iter().map(|t| self.id(t)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextEncoder {
    pub vocab: Vocabulary,
    pub embedding: Param,
    pub output: Dense,
}

/// Forward-pass state needed by [`ContextEncoder::backward`].
#[derive(Debug, Clone)]
pub struct EncoderCache {
    ids: Vec<usize>,
    dense: DenseCache,
}

impl ContextEncoder {
    pub fn new<R: Rng + ?Sized>(vocab: Vocabulary, token_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        let mut embedding = Param::zeros(&[vocab.len(), token_dim]);
        for v in &mut embedding.value {
            *v = rng.gen_range(-0.5..0.5);
        }
        let output = Dense::new(token_dim, output_dim, Activation::Tanh, rng);
        ContextEncoder { vocab, embedding, output }
    }

    pub fn output_dim(&self) -> usize {
        self.output.output_dim()
    }

    pub fn token_dim(&self) -> usize {
        self.embedding.shape[1]
    }

    /// Encodes the concatenation of `segments`.
    pub fn forward(&self, segments: &[&str]) -> Result<(Vec<f64>, EncoderCache)> {
        let ids: Vec<usize> = segments.iter().flat_map(|s| self.vocab.encode(s)).collect();
        self.forward_ids(ids)
    }

    pub fn forward_ids(&self, mut ids: Vec<usize>) -> Result<(Vec<f64>, EncoderCache)> {
        // summation order fixed so token order cannot change the result bits
        ids.sort_unstable();
        let dim = self.token_dim();
        let mut pooled = alloc::vec![0.0; dim];
        if !ids.is_empty() {
            for &id in &ids {
                for (p, v) in pooled.iter_mut().zip(self.embedding.row(id)) {
                    *p += v;
                }
            }
            let n = ids.len() as f64;
            pooled.iter_mut().for_each(|p| *p /= n);
        }
        let dense = self.output.forward(&pooled)?;
        Ok((dense.output.clone(), EncoderCache { ids, dense }))
    }

    pub fn encode(&self, segments: &[&str]) -> Result<Vec<f64>> {
        Ok(self.forward(segments)?.0)
    }

    pub fn backward(&mut self, cache: &EncoderCache, dh: &[f64]) {
        let dpooled = self.output.backward(&cache.dense, dh);
        if cache.ids.is_empty() {
            return;
        }
        let dim = self.token_dim();
        let n = cache.ids.len() as f64;
        for &id in &cache.ids {
            let g = &mut self.embedding.grad[id * dim..(id + 1) * dim];
            for (gi, d) in g.iter_mut().zip(&dpooled) {
                *gi += d / n;
            }
        }
    }
}

impl Parameterized for ContextEncoder {
    fn params(&self) -> Vec<&Param> {
        alloc::vec![&self.embedding, &self.output.weight, &self.output.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        alloc::vec![&mut self.embedding, &mut self.output.weight, &mut self.output.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use crate::rng::substream;

    fn encoder() -> ContextEncoder {
        let vocab = Vocabulary::build(["the cat sat", "a dog ran far", "the dog"], 1);
        ContextEncoder::new(vocab, 6, 4, &mut substream(3, "encoder-test"))
    }

    #[test]
    fn vocabulary_respects_min_count() {
        let v = Vocabulary::build(["a b b c c c"], 2);
        assert_eq!(v.len(), 3);
        assert_eq!(v.id("a"), 0);
        assert_ne!(v.id("b"), 0);
    }

    #[test]
    fn deterministic_and_order_invariant() {
        let enc = encoder();
        let a = enc.encode(&["the cat", "sat"]).unwrap();
        assert_eq!(a, enc.encode(&["the cat", "sat"]).unwrap());
        assert_eq!(a, enc.encode(&["sat cat", "the"]).unwrap());
    }

    #[test]
    fn unknown_and_empty_inputs() {
        let enc = encoder();
        let unk = enc.encode(&["zebra", "quokka"]).unwrap();
        assert!(unk.iter().all(|v| v.is_finite()));
        assert_eq!(unk, enc.encode(&["platypus"]).unwrap());
        let empty = enc.encode(&["", "?!"]).unwrap();
        assert_eq!(empty, enc.output.forward(&[0.0; 6]).unwrap().output);
    }

    #[test]
    fn gradient_reaches_token_embeddings() {
        let mut enc = encoder();
        let target = [0.3, -0.2, 0.1, 0.5];
        let report = grad_check(&mut enc, 1e-5, |e| {
            let (h, cache) = e.forward(&["the dog ran", "the cat"]).unwrap();
            let dh: Vec<f64> = h.iter().zip(&target).map(|(a, b)| a - b).collect();
            e.backward(&cache, &dh);
            h.iter().zip(&target).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum()
        });
        assert!(report.max_relative_error < 1e-5, "{report:?}");
    }
}
