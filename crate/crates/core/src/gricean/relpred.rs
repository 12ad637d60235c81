//! Relation predictor: which relation does a question ask about?

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusSplit, DialogueExample};
use crate::encoder::{ContextEncoder, Vocabulary};
use crate::nn::{argmax, cross_entropy, softmax, Activation, Dense, Optimizer, Param, Parameterized, TrainConfig};
use crate::rng::substream;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationPredictor {
    pub encoder: ContextEncoder,
    pub output: Dense,
    /// Output classes, sorted by id.
    pub relations: Vec<String>,
}

impl RelationPredictor {
    pub fn new<R: rand::Rng + ?Sized>(vocab: Vocabulary, relations: Vec<String>, cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        if relations.is_empty() {
            return Err(Error::EmptyInput("relation predictor needs at least one relation"));
        }
        let encoder = ContextEncoder::new(vocab, cfg.embedding_dim, cfg.hidden_dim, rng);
        let output = Dense::new(cfg.hidden_dim, relations.len(), Activation::None, rng);
        Ok(RelationPredictor { encoder, output, relations })
    }

    fn logits(&self, question: &str) -> Result<Vec<f64>> {
        let h = self.encoder.encode(&[question])?;
        Ok(self.output.forward(&h)?.output)
    }

    /// Distribution over [`RelationPredictor::relations`].
    pub fn distribution(&self, question: &str) -> Result<Vec<f64>> {
        softmax(&self.logits(question)?)
    }

    /// Most probable relation; ties go to the smallest id.
    pub fn predict(&self, question: &str) -> Result<&str> {
        let logits = self.logits(question)?;
        let i = argmax(&logits).expect("at least one relation");
        Ok(&self.relations[i])
    }

    /// Cross-entropy for one example; gradients accumulate scaled by `weight`.
    fn accumulate(&mut self, question: &str, target: usize, weight: f64) -> Result<f64> {
        let (h, cache) = self.encoder.forward(&[question])?;
        let out = self.output.forward(&h)?;
        let (loss, mut grad) = cross_entropy(&out.output, target)?;
        grad.iter_mut().for_each(|g| *g *= weight);
        let dh = self.output.backward(&out, &grad);
        self.encoder.backward(&cache, &dh);
        Ok(loss * weight)
    }

    /// Fraction of `examples` whose follow-up is assigned its gold relation.
    pub fn accuracy(&self, examples: &[DialogueExample]) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::EmptyInput("no examples to measure accuracy on"));
        }
        let mut hits = 0usize;
        for ex in examples {
            hits += usize::from(self.predict(&ex.followup)? == ex.gold_relation);
        }
        Ok(hits as f64 / examples.len() as f64)
    }
}

impl Parameterized for RelationPredictor {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.encoder.params();
        p.extend([&self.output.weight, &self.output.bias]);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.encoder.params_mut();
        p.extend([&mut self.output.weight, &mut self.output.bias]);
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierTrainLog {
    pub epoch_losses: Vec<f64>,
    pub validation: Vec<f64>,
    pub best_epoch: usize,
    pub warnings: Vec<String>,
}

/// Trains follow-up text -> gold relation, early-stopping on validation accuracy.
pub fn train_relation_predictor(split: &CorpusSplit, cfg: &TrainConfig) -> Result<(RelationPredictor, ClassifierTrainLog)> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::EmptyInput("training split is empty"));
    }
    let relations: Vec<String> =
        split.train.iter().map(|e| e.gold_relation.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut warnings = Vec::new();
    let unseen: BTreeSet<&str> = split
        .validation
        .iter()
        .map(|e| e.gold_relation.as_str())
        .filter(|r| relations.binary_search_by(|x| x.as_str().cmp(r)).is_err())
        .collect();
    for r in unseen {
        warnings.push(alloc::format!("relation `{r}` appears in validation but never in training"));
    }
    let mut rng = substream(cfg.seed, "relation-predictor");
    let vocab = Vocabulary::build(split.train.iter().map(|e| e.followup.as_str()), cfg.min_token_count);
    let mut model = RelationPredictor::new(vocab, relations, cfg, &mut rng)?;
    let targets: Vec<usize> = split
        .train
        .iter()
        .map(|e| model.relations.binary_search(&e.gold_relation).expect("collected from train"))
        .collect();

    let mut opt = Optimizer::adamw(cfg.learning_rate, cfg.weight_decay)?;
    let mut log = ClassifierTrainLog { epoch_losses: Vec::new(), validation: Vec::new(), best_epoch: 0, warnings };
    let mut best: Option<(f64, RelationPredictor)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..targets.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                total += model.accumulate(&split.train[i].followup, targets[i], w)? / w;
            }
            opt.step(&mut model.params_mut())?;
        }
        log.epoch_losses.push(total / targets.len() as f64);
        if split.validation.is_empty() {
            log.best_epoch = epoch;
            continue;
        }
        let acc = model.accuracy(&split.validation)?;
        log.validation.push(acc);
        if best.as_ref().map_or(true, |(b, _)| acc > *b) {
            best = Some((acc, model.clone()));
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

/// Finite-difference check of the predictor gradient on a small model from `seed`.
pub fn gradient_check(seed: u64) -> Result<crate::nn::GradCheckReport> {
    let vocab = Vocabulary::build(["who wrote it", "when was it released"], 1);
    let cfg = TrainConfig { embedding_dim: 4, hidden_dim: 3, ..TrainConfig::desk() };
    let relations = alloc::vec!["a".into(), "b".into(), "c".into()];
    let mut m = RelationPredictor::new(vocab, relations, &cfg, &mut substream(seed, "gradcheck"))?;
    let targets = [(seed % 3) as usize, ((seed / 3) % 3) as usize];
    let questions = [("who wrote it", targets[0]), ("when released", targets[1])];
    Ok(crate::nn::grad_check(&mut m, 1e-5, |m| questions.iter().map(|(q, t)| m.accumulate(q, *t, 0.5).unwrap()).sum()))
}
