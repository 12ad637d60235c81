//! Next-utterance classifier: does a question follow from its context?
//!
//! Context and question are encoded separately by one shared bag-of-words
//! encoder, and `[h_c; h_q; h_c * h_q]` feeds a small MLP. A single pooled
//! encoding of the concatenated pair cannot tell which words came from which
//! side, so it has no way to detect overlap between the two.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::relpred::ClassifierTrainLog;
use crate::corpus::{CorpusSplit, DialogueExample};
use crate::encoder::{ContextEncoder, Vocabulary};
use crate::nn::{bce_loss, Activation, Dense, Optimizer, Param, Parameterized, TrainConfig};
use crate::rng::substream;
use crate::{Error, Result};

pub const COHERENCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceClassifier {
    pub encoder: ContextEncoder,
    pub hidden: Dense,
    pub output: Dense,
}

/// One labelled (context, question) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherencePair {
    pub question: String,
    pub answer: String,
    pub followup: String,
    pub label: f64,
}

impl CoherenceClassifier {
    pub fn new<R: Rng + ?Sized>(vocab: Vocabulary, cfg: &TrainConfig, rng: &mut R) -> Self {
        let d = cfg.embedding_dim;
        let encoder = ContextEncoder::new(vocab, cfg.embedding_dim, d, rng);
        let hidden = Dense::new(3 * d, cfg.hidden_dim, Activation::Relu, rng);
        let output = Dense::new(cfg.hidden_dim, 1, Activation::Sigmoid, rng);
        CoherenceClassifier { encoder, hidden, output }
    }

    /// `p(next | context, question)`.
    pub fn probability(&self, question: &str, answer: &str, followup: &str) -> Result<f64> {
        let hc = self.encoder.encode(&[question, answer])?;
        let hq = self.encoder.encode(&[followup])?;
        let a = self.hidden.forward(&features(&hc, &hq))?;
        Ok(self.output.forward(&a.output)?.output[0])
    }

    /// 1 when the probability reaches the 0.5 threshold.
    pub fn predict(&self, question: &str, answer: &str, followup: &str) -> Result<(u8, f64)> {
        let p = self.probability(question, answer, followup)?;
        Ok((u8::from(p >= COHERENCE_THRESHOLD), p))
    }

    fn accumulate(&mut self, pair: &CoherencePair, weight: f64) -> Result<f64> {
        let (hc, cc) = self.encoder.forward(&[&pair.question, &pair.answer])?;
        let (hq, cq) = self.encoder.forward(&[&pair.followup])?;
        let a = self.hidden.forward(&features(&hc, &hq))?;
        let b = self.output.forward(&a.output)?;
        let (loss, ds) = bce_loss(b.output[0], pair.label)?;
        let da = self.output.backward(&b, &[ds * weight]);
        let df = self.hidden.backward(&a, &da);
        let d = hc.len();
        let dhc: Vec<f64> = (0..d).map(|i| df[i] + df[2 * d + i] * hq[i]).collect();
        let dhq: Vec<f64> = (0..d).map(|i| df[d + i] + df[2 * d + i] * hc[i]).collect();
        self.encoder.backward(&cc, &dhc);
        self.encoder.backward(&cq, &dhq);
        Ok(loss * weight)
    }

    pub fn loss(&self, pairs: &[CoherencePair]) -> Result<f64> {
        let mut total = 0.0;
        for p in pairs {
            total += bce_loss(self.probability(&p.question, &p.answer, &p.followup)?, p.label)?.0;
        }
        Ok(total / pairs.len().max(1) as f64)
    }

    pub fn accuracy(&self, pairs: &[CoherencePair]) -> Result<f64> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput("no pairs to measure accuracy on"));
        }
        let mut hits = 0usize;
        for p in pairs {
            let (y, _) = self.predict(&p.question, &p.answer, &p.followup)?;
            hits += usize::from(f64::from(y) == p.label);
        }
        Ok(hits as f64 / pairs.len() as f64)
    }
}

fn features(hc: &[f64], hq: &[f64]) -> Vec<f64> {
    let mut f = Vec::with_capacity(3 * hc.len());
    f.extend_from_slice(hc);
    f.extend_from_slice(hq);
    f.extend(hc.iter().zip(hq).map(|(a, b)| a * b));
    f
}

impl Parameterized for CoherenceClassifier {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.encoder.params();
        p.extend([&self.hidden.weight, &self.hidden.bias, &self.output.weight, &self.output.bias]);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.encoder.params_mut();
        p.extend([&mut self.hidden.weight, &mut self.hidden.bias, &mut self.output.weight, &mut self.output.bias]);
        p
    }
}

/// Each example's gold follow-up (label 1) followed by `negative_ratio`
/// follow-ups of uniformly drawn other examples (label 0).
pub fn coherence_pairs<R: Rng + ?Sized>(examples: &[DialogueExample], negative_ratio: usize, rng: &mut R) -> Result<Vec<CoherencePair>> {
    if examples.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 examples to sample negatives".into()));
    }
    let mut pairs = Vec::with_capacity(examples.len() * (1 + negative_ratio));
    for (i, ex) in examples.iter().enumerate() {
        let pair = |followup: &str, label: f64| CoherencePair {
            question: ex.question.clone(),
            answer: ex.answer.clone(),
            followup: followup.into(),
            label,
        };
        pairs.push(pair(&ex.followup, 1.0));
        for _ in 0..negative_ratio {
            // uniform over the other examples
            let mut j = rng.gen_range(0..examples.len() - 1);
            if j >= i {
                j += 1;
            }
            pairs.push(pair(&examples[j].followup, 0.0));
        }
    }
    Ok(pairs)
}

/// Trains on fresh negatives each epoch, early-stopping on validation loss.
pub fn train_coherence(split: &CorpusSplit, cfg: &TrainConfig, negative_ratio: usize) -> Result<(CoherenceClassifier, ClassifierTrainLog)> {
    cfg.validate()?;
    if negative_ratio == 0 {
        return Err(Error::InvalidArgument("negative_ratio must be positive".into()));
    }
    if split.train.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 training examples to sample negatives".into()));
    }
    let mut rng = substream(cfg.seed, "coherence");
    let texts = split.train.iter().flat_map(|e| [e.question.as_str(), e.answer.as_str(), e.followup.as_str()]);
    let vocab = Vocabulary::build(texts, cfg.min_token_count);
    let mut model = CoherenceClassifier::new(vocab, cfg, &mut rng);
    let validation = if split.validation.len() >= 2 {
        coherence_pairs(&split.validation, negative_ratio, &mut substream(cfg.seed, "coherence-validation"))?
    } else {
        Vec::new()
    };

    let mut opt = Optimizer::adamw(cfg.learning_rate, cfg.weight_decay)?;
    let mut log = ClassifierTrainLog { epoch_losses: Vec::new(), validation: Vec::new(), best_epoch: 0, warnings: Vec::new() };
    if !split.validation.is_empty() && validation.is_empty() {
        log.warnings.push("validation split too small for negatives; early stopping disabled".into());
    }
    let mut best: Option<(f64, CoherenceClassifier)> = None;
    let mut since_best = 0;
    for epoch in 0..cfg.epochs {
        let mut pairs = coherence_pairs(&split.train, negative_ratio, &mut rng)?;
        pairs.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in pairs.chunks(cfg.batch_size) {
            let w = 1.0 / batch.len() as f64;
            for p in batch {
                total += model.accumulate(p, w)? / w;
            }
            opt.step(&mut model.params_mut())?;
        }
        log.epoch_losses.push(total / pairs.len() as f64);
        if validation.is_empty() {
            log.best_epoch = epoch;
            continue;
        }
        let loss = model.loss(&validation)?;
        log.validation.push(loss);
        if best.as_ref().map_or(true, |(b, _)| loss < *b) {
            best = Some((loss, model.clone()));
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok((model, log))
}

/// Finite-difference check of the classifier gradient on a small model from `seed`.
pub fn gradient_check(seed: u64) -> Result<crate::nn::GradCheckReport> {
    let vocab = Vocabulary::build(["do you know it", "who wrote it", "a b c"], 1);
    let cfg = TrainConfig { embedding_dim: 3, hidden_dim: 4, ..TrainConfig::desk() };
    let mut m = CoherenceClassifier::new(vocab, &cfg, &mut substream(seed, "gradcheck"));
    let first = (seed % 2) as f64;
    let pairs = [
        CoherencePair { question: "do you know".into(), answer: "a b".into(), followup: "who wrote it".into(), label: first },
        CoherencePair { question: "it".into(), answer: "c".into(), followup: "who b".into(), label: 1.0 - first },
    ];
    Ok(crate::nn::grad_check(&mut m, 1e-5, |m| pairs.iter().map(|p| m.accumulate(p, 0.5).unwrap()).sum()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in [0, 9] {
            let report = gradient_check(seed).unwrap();
            assert!(report.max_relative_error < 1e-5, "{report:?}");
        }
    }

    #[test]
    fn zero_output_sits_on_the_threshold() {
        let vocab = Vocabulary::build(["a"], 1);
        let mut m = CoherenceClassifier::new(vocab, &TrainConfig::desk(), &mut substream(1, "t"));
        m.output = Dense::zeros(m.output.input_dim(), 1, Activation::Sigmoid);
        assert_eq!(m.predict("a", "b", "c").unwrap(), (1, 0.5));
    }

    #[test]
    fn pairs_are_balanced_and_negatives_differ() {
        let w = synth::world(1, 6).unwrap();
        let exs = synth::corpus(&w, 10, 2);
        let pairs = coherence_pairs(&exs, 1, &mut substream(0, "t")).unwrap();
        assert_eq!(pairs.iter().filter(|p| p.label == 1.0).count(), 10);
        assert_eq!(pairs.len(), 20);
        assert!(coherence_pairs(&exs[..1], 1, &mut substream(0, "t")).is_err());
    }

    #[test]
    fn separates_gold_from_shuffled_followups() {
        let w = synth::world(3, 12).unwrap();
        let exs = synth::corpus(&w, 500, 4);
        let split = crate::corpus::build_corpus(exs, &w.graph, &Default::default()).unwrap().split;
        let (m, _) = train_coherence(&split, &TrainConfig::desk(), 1).unwrap();
        let test = coherence_pairs(&split.test, 1, &mut substream(5, "eval")).unwrap();
        let pos: Vec<_> = test.iter().filter(|p| p.label == 1.0).cloned().collect();
        let neg: Vec<_> = test.iter().filter(|p| p.label == 0.0).cloned().collect();
        let acc = m.accuracy(&test).unwrap();
        let (pa, na) = (m.accuracy(&pos).unwrap(), m.accuracy(&neg).unwrap());
        assert!(acc >= 0.85 && pa >= 0.9 && na > 0.5, "acc {acc} pos {pa} neg {na}");
        let (m2, _) = train_coherence(&split, &TrainConfig::desk(), 1).unwrap();
        assert_eq!(m, m2);
    }
}
