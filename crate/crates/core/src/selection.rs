//! Knowledge selection: pick the salient entity and relation of a dialogue.
//!
//! A [`SelectorModel`] encodes the question-answer history into `h_qa` and
//! scores each candidate embedding with one of two heads:
//!
//! * attention: `softmax(q . k_j / sqrt(d_k))` with `q = Wq h_qa`, `k_j = Wk h_j`
//! * mlp: `sigmoid(MLP([h_qa; h_j]))`, independently per candidate
//!
//! Entities and relations get separate heads over the shared encoder, and
//! both are trained with binary cross-entropy against a one-hot gold label.
//! The attention head's softmax outputs are fed to the BCE directly.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusSplit, DialogueExample, DropRecord};
use crate::embed::{EmbeddingTable, Family};
use crate::encoder::{ContextEncoder, EncoderCache, Vocabulary};
use crate::kg::KnowledgeGraph;
use crate::nn::{bce_loss, dot, matvec, softmax, softmax_backward, Activation, Dense, DenseCache, Optimizer, Param, Parameterized, TrainConfig};
use crate::rng::substream;
use crate::{Error, Result};

pub const SELECTOR_FORMAT_VERSION: u32 = 1;

/// Precomputed `h_qa` vectors keyed by example id.
pub type ContextVectors = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Attention,
    Mlp,
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Variant::Attention => "attention",
            Variant::Mlp => "mlp",
        })
    }
}

impl core::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "attention" => Ok(Variant::Attention),
            "mlp" => Ok(Variant::Mlp),
            other => Err(Error::InvalidArgument(format!("unknown selector variant `{other}`"))),
        }
    }
}

/// Scoring head over `(h_qa, candidate)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum Head {
    Attention { query: Param, key: Param },
    Mlp { hidden: Dense, output: Dense },
}

#[derive(Debug, Clone)]
enum HeadCache {
    Attention { h: Vec<f64>, candidates: Vec<Vec<f64>>, q: Vec<f64>, keys: Vec<Vec<f64>>, probs: Vec<f64> },
    Mlp { layers: Vec<(DenseCache, DenseCache)> },
}

impl Head {
    pub fn new<R: Rng + ?Sized>(variant: Variant, context_dim: usize, input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        match variant {
            Variant::Attention => {
                let mut query = Param::zeros(&[hidden, context_dim]);
                let mut key = Param::zeros(&[hidden, input_dim]);
                for (p, fan) in [(&mut query, context_dim), (&mut key, input_dim)] {
                    let limit = libm::sqrt(6.0 / (fan + hidden) as f64);
                    p.value.iter_mut().for_each(|v| *v = rng.gen_range(-limit..limit));
                }
                Head::Attention { query, key }
            }
            Variant::Mlp => Head::Mlp {
                hidden: Dense::new(context_dim + input_dim, hidden, Activation::Relu, rng),
                output: Dense::new(hidden, 1, Activation::Sigmoid, rng),
            },
        }
    }

    /// A head whose parameters are all zero.
    pub fn zeros(variant: Variant, context_dim: usize, input_dim: usize, hidden: usize) -> Self {
        match variant {
            Variant::Attention => {
                Head::Attention { query: Param::zeros(&[hidden, context_dim]), key: Param::zeros(&[hidden, input_dim]) }
            }
            Variant::Mlp => Head::Mlp {
                hidden: Dense::zeros(context_dim + input_dim, hidden, Activation::Relu),
                output: Dense::zeros(hidden, 1, Activation::Sigmoid),
            },
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            Head::Attention { .. } => Variant::Attention,
            Head::Mlp { .. } => Variant::Mlp,
        }
    }

    fn check_shapes(&self) -> Result<()> {
        let ok = match self {
            Head::Attention { query, key } => {
                query.shape.len() == 2 && key.shape.len() == 2 && query.shape[0] == key.shape[0] && query.shape[0] > 0
            }
            Head::Mlp { hidden, output } => output.input_dim() == hidden.output_dim() && output.output_dim() == 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch { expected: "consistent selector head shapes".into(), found: format!("{self:?}") })
        }
    }

    pub fn score(&self, h: &[f64], candidates: &[&[f64]]) -> Result<Vec<f64>> {
        Ok(self.forward(h, candidates)?.0)
    }

    fn forward(&self, h: &[f64], candidates: &[&[f64]]) -> Result<(Vec<f64>, HeadCache)> {
        if candidates.is_empty() {
            return Err(Error::EmptyInput("no candidates to score"));
        }
        match self {
            Head::Attention { query, key } => {
                let (dk, dctx) = (query.shape[0], query.shape[1]);
                let din = key.shape[1];
                check_len(h.len(), dctx, "context vector")?;
                let q = matvec(&query.value, dk, dctx, h);
                let scale = libm::sqrt(dk as f64);
                let mut keys = Vec::with_capacity(candidates.len());
                let mut logits = Vec::with_capacity(candidates.len());
                for c in candidates {
                    check_len(c.len(), din, "candidate embedding")?;
                    let k = matvec(&key.value, dk, din, c);
                    logits.push(dot(&q, &k) / scale);
                    keys.push(k);
                }
                let probs = softmax(&logits)?;
                let cache = HeadCache::Attention {
                    h: h.to_vec(),
                    candidates: candidates.iter().map(|c| c.to_vec()).collect(),
                    q,
                    keys,
                    probs: probs.clone(),
                };
                Ok((probs, cache))
            }
            Head::Mlp { hidden, output } => {
                let mut layers = Vec::with_capacity(candidates.len());
                let mut scores = Vec::with_capacity(candidates.len());
                for c in candidates {
                    let mut x = h.to_vec();
                    x.extend_from_slice(c);
                    let a = hidden.forward(&x)?;
                    let b = output.forward(&a.output)?;
                    scores.push(b.output[0]);
                    layers.push((a, b));
                }
                Ok((scores, HeadCache::Mlp { layers }))
            }
        }
    }

    /// Accumulates parameter gradients for `ds` (d loss / d scores) and
    /// returns d/dh (for the mlp head, d/dh followed by d/d(candidate)).
    fn backward(&mut self, cache: &HeadCache, ds: &[f64]) -> Vec<f64> {
        match (self, cache) {
            (Head::Attention { query, key }, HeadCache::Attention { h, candidates, q, keys, probs }) => {
                let (dk, dctx) = (query.shape[0], query.shape[1]);
                let din = key.shape[1];
                let scale = libm::sqrt(dk as f64);
                let dz = softmax_backward(probs, ds);
                let mut dq = alloc::vec![0.0; dk];
                for (j, k) in keys.iter().enumerate() {
                    let w = dz[j] / scale;
                    for a in 0..dk {
                        dq[a] += w * k[a];
                        // d logit / d k = q / scale, then through Wk
                        let dka = w * q[a];
                        let row = &mut key.grad[a * din..(a + 1) * din];
                        for (g, e) in row.iter_mut().zip(&candidates[j]) {
                            *g += dka * e;
                        }
                    }
                }
                let mut dh = alloc::vec![0.0; dctx];
                for a in 0..dk {
                    let row = &query.value[a * dctx..(a + 1) * dctx];
                    let grow = &mut query.grad[a * dctx..(a + 1) * dctx];
                    for i in 0..dctx {
                        grow[i] += dq[a] * h[i];
                        dh[i] += dq[a] * row[i];
                    }
                }
                dh
            }
            (Head::Mlp { hidden, output }, HeadCache::Mlp { layers }) => {
                // d/d[h; e] summed over candidates; the caller keeps the h part
                let mut dh: Vec<f64> = Vec::new();
                for ((a, b), d) in layers.iter().zip(ds) {
                    let dhid = output.backward(b, &[*d]);
                    let dx = hidden.backward(a, &dhid);
                    if dh.is_empty() {
                        dh = alloc::vec![0.0; dx.len()];
                    }
                    for (acc, v) in dh.iter_mut().zip(&dx) {
                        *acc += v;
                    }
                }
                dh
            }
            _ => unreachable!("cache produced by a different head"),
        }
    }

    fn params(&self) -> Vec<&Param> {
        match self {
            Head::Attention { query, key } => alloc::vec![query, key],
            Head::Mlp { hidden, output } => alloc::vec![&hidden.weight, &hidden.bias, &output.weight, &output.bias],
        }
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Head::Attention { query, key } => alloc::vec![query, key],
            Head::Mlp { hidden, output } => {
                alloc::vec![&mut hidden.weight, &mut hidden.bias, &mut output.weight, &mut output.bias]
            }
        }
    }
}

fn check_len(found: usize, expected: usize, what: &str) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected: format!("{what} of length {expected}"), found: format!("{found}") })
    }
}

/// Shared encoder plus entity and relation heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorModel {
    pub format_version: u32,
    pub variant: Variant,
    pub embedding_family: Family,
    pub context_dim: usize,
    pub entity_dim: usize,
    pub relation_dim: usize,
    /// `None` when `h_qa` comes from precomputed context vectors.
    pub encoder: Option<ContextEncoder>,
    pub entity_head: Head,
    pub relation_head: Head,
    pub config: TrainConfig,
}

impl SelectorModel {
    /// Fresh model; `encoder` decides the context dimension when present.
    pub fn new<R: Rng + ?Sized>(
        variant: Variant,
        encoder: Option<ContextEncoder>,
        context_dim: usize,
        emb: &EmbeddingTable,
        config: TrainConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let context_dim = encoder.as_ref().map_or(context_dim, |e| e.output_dim());
        if context_dim == 0 {
            return Err(Error::InvalidArgument("context dimension must be positive".into()));
        }
        let hidden = config.hidden_dim;
        let entity_head = Head::new(variant, context_dim, emb.dim(), hidden, rng);
        let relation_head = Head::new(variant, context_dim, emb.relation_dim(), hidden, rng);
        Ok(SelectorModel {
            format_version: SELECTOR_FORMAT_VERSION,
            variant,
            embedding_family: emb.family,
            context_dim,
            entity_dim: emb.dim(),
            relation_dim: emb.relation_dim(),
            encoder,
            entity_head,
            relation_head,
            config,
        })
    }

    /// Structural checks for a model loaded from a checkpoint.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != SELECTOR_FORMAT_VERSION {
            return Err(Error::Mismatch(format!(
                "selector checkpoint version {} (expected {SELECTOR_FORMAT_VERSION})",
                self.format_version
            )));
        }
        for head in [&self.entity_head, &self.relation_head] {
            if head.variant() != self.variant {
                return Err(Error::Mismatch("head variant differs from model variant".into()));
            }
            head.check_shapes()?;
        }
        let expect = [
            (head_dims(&self.entity_head, self.context_dim), (self.context_dim, self.entity_dim)),
            (head_dims(&self.relation_head, self.context_dim), (self.context_dim, self.relation_dim)),
        ];
        for (found, expected) in expect {
            if found != expected {
                return Err(Error::ShapeMismatch {
                    expected: format!("head over {expected:?}"),
                    found: format!("{found:?}"),
                });
            }
        }
        if let Some(enc) = &self.encoder {
            check_len(enc.output_dim(), self.context_dim, "encoder output")?;
            check_len(enc.embedding.shape[0], enc.vocab.len(), "embedding rows")?;
        }
        Ok(())
    }

    /// Checks the model can consume vectors from `emb`.
    pub fn check_embeddings(&self, emb: &EmbeddingTable) -> Result<()> {
        if emb.family != self.embedding_family || emb.dim() != self.entity_dim || emb.relation_dim() != self.relation_dim {
            return Err(Error::Mismatch(format!(
                "selector trained on {} embeddings of dim {}/{}, got {} of dim {}/{}",
                self.embedding_family,
                self.entity_dim,
                self.relation_dim,
                emb.family,
                emb.dim(),
                emb.relation_dim()
            )));
        }
        Ok(())
    }

    pub fn score_entities(&self, h_qa: &[f64], candidates: &[&[f64]]) -> Result<Vec<f64>> {
        self.entity_head.score(h_qa, candidates)
    }

    pub fn score_relations(&self, h_qa: &[f64], candidates: &[&[f64]]) -> Result<Vec<f64>> {
        self.relation_head.score(h_qa, candidates)
    }

    /// `h_qa` for an example, from the side channel when given.
    pub fn context_vector(&self, ex: &DialogueExample, contexts: Option<&ContextVectors>) -> Result<Vec<f64>> {
        match (contexts, &self.encoder) {
            (Some(map), _) => {
                let v = map
                    .get(&ex.id)
                    .ok_or_else(|| Error::InvalidArgument(format!("no context vector for example `{}`", ex.id)))?;
                check_len(v.len(), self.context_dim, "context vector")?;
                Ok(v.clone())
            }
            (None, Some(enc)) => encode_context(enc, &ex.question, &ex.answer),
            (None, None) => Err(Error::InvalidArgument("model has no encoder and no context vectors were given".into())),
        }
    }

    /// Scores every candidate of `ex`.
    pub fn select(&self, inputs: &SelectionInputs<'_>, ex: &DialogueExample) -> Result<SelectionResult> {
        let prepared = prepare(self, inputs, ex).map_err(Error::InvalidArgument)?;
        let h = match &prepared.context {
            Context::External(v) => v.clone(),
            Context::Tokens(ids) => self.encoder.as_ref().expect("tokens imply encoder").forward_ids(ids.clone())?.0,
        };
        let ents: Vec<&[f64]> = prepared.entity_vecs.iter().map(Vec::as_slice).collect();
        let rels: Vec<&[f64]> = prepared.relation_vecs.iter().map(Vec::as_slice).collect();
        let es = self.score_entities(&h, &ents)?;
        let rs = self.score_relations(&h, &rels)?;
        Ok(SelectionResult { entities: ranked(prepared.entities, es), relations: ranked(prepared.relations, rs) })
    }
}

fn head_dims(head: &Head, context_dim: usize) -> (usize, usize) {
    match head {
        Head::Attention { query, key } => (query.shape[1], key.shape[1]),
        Head::Mlp { hidden, .. } => (context_dim, hidden.input_dim().saturating_sub(context_dim)),
    }
}

impl Parameterized for SelectorModel {
    fn params(&self) -> Vec<&Param> {
        let mut out = self.encoder.as_ref().map(|e| e.params()).unwrap_or_default();
        out.extend(self.entity_head.params());
        out.extend(self.relation_head.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.encoder.as_mut().map(|e| e.params_mut()).unwrap_or_default();
        out.extend(self.entity_head.params_mut());
        out.extend(self.relation_head.params_mut());
        out
    }
}

/// Encodes the question followed by the answer.
pub fn encode_context(enc: &ContextEncoder, question: &str, answer: &str) -> Result<Vec<f64>> {
    enc.encode(&[question, answer])
}

/// Deduplicated union of the relations leaving any mentioned entity, sorted by id.
pub fn candidate_relations<S: AsRef<str>>(g: &KnowledgeGraph, mentions: &[S]) -> Result<Vec<String>> {
    if mentions.is_empty() {
        return Err(Error::EmptyInput("no mentions to collect relations from"));
    }
    let mut out = BTreeSet::new();
    for m in mentions {
        for r in g.relations_of(m.as_ref())? {
            out.insert(r.to_string());
        }
    }
    Ok(out.into_iter().collect())
}

/// Candidates with scores, best first; equal scores are ordered by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub entities: Vec<(String, f64)>,
    pub relations: Vec<(String, f64)>,
}

impl SelectionResult {
    pub fn top_entity(&self) -> Option<&str> {
        self.entities.first().map(|(id, _)| id.as_str())
    }

    pub fn top_relation(&self) -> Option<&str> {
        self.relations.first().map(|(id, _)| id.as_str())
    }
}

/// Pairs ids with scores and sorts descending by score, then ascending by id.
pub fn ranked(ids: Vec<String>, scores: Vec<f64>) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = ids.into_iter().zip(scores).collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

/// Graph, frozen embeddings and optional precomputed contexts.
#[derive(Debug, Clone, Copy)]
pub struct SelectionInputs<'a> {
    pub graph: &'a KnowledgeGraph,
    pub embeddings: &'a EmbeddingTable,
    pub contexts: Option<&'a ContextVectors>,
}

#[derive(Debug, Clone)]
enum Context {
    Tokens(Vec<usize>),
    External(Vec<f64>),
}

#[derive(Debug, Clone)]
struct Prepared {
    context: Context,
    entities: Vec<String>,
    entity_vecs: Vec<Vec<f64>>,
    gold_entity: usize,
    relations: Vec<String>,
    relation_vecs: Vec<Vec<f64>>,
    gold_relation: usize,
}

fn prepare(model: &SelectorModel, inputs: &SelectionInputs<'_>, ex: &DialogueExample) -> core::result::Result<Prepared, String> {
    let context = match (inputs.contexts, &model.encoder) {
        (Some(map), _) => match map.get(&ex.id) {
            Some(v) if v.len() == model.context_dim => Context::External(v.clone()),
            Some(v) => return Err(format!("context vector has length {} (expected {})", v.len(), model.context_dim)),
            None => return Err("no context vector".to_string()),
        },
        (None, Some(enc)) => {
            let mut ids = enc.vocab.encode(&ex.question);
            ids.extend(enc.vocab.encode(&ex.answer));
            Context::Tokens(ids)
        }
        (None, None) => return Err("model has no encoder and no context vectors were given".to_string()),
    };
    let entities: Vec<String> = ex.unique_mentions().into_iter().map(str::to_string).collect();
    let mut entity_vecs = Vec::with_capacity(entities.len());
    for e in &entities {
        match inputs.embeddings.entity_vector(e) {
            Some(v) => entity_vecs.push(v.to_vec()),
            None => return Err(format!("entity `{e}` has no embedding")),
        }
    }
    let relations = candidate_relations(inputs.graph, &entities).map_err(|e| e.to_string())?;
    let mut relation_vecs = Vec::with_capacity(relations.len());
    for r in &relations {
        match inputs.embeddings.relation_vector(r) {
            Some(v) => relation_vecs.push(v.to_vec()),
            None => return Err(format!("relation `{r}` has no embedding")),
        }
    }
    let gold_entity = entities
        .iter()
        .position(|e| *e == ex.gold_entity)
        .ok_or_else(|| format!("gold entity `{}` is not a candidate", ex.gold_entity))?;
    let gold_relation = relations
        .iter()
        .position(|r| *r == ex.gold_relation)
        .ok_or_else(|| format!("gold relation `{}` is not a candidate", ex.gold_relation))?;
    Ok(Prepared { context, entities, entity_vecs, gold_entity, relations, relation_vecs, gold_relation })
}

/// Summed binary cross-entropy of `scores` against a one-hot label.
pub fn selection_loss(scores: &[f64], gold: usize) -> Result<(f64, Vec<f64>)> {
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(scores.len());
    for (j, &s) in scores.iter().enumerate() {
        let (l, d) = bce_loss(s, if j == gold { 1.0 } else { 0.0 })?;
        loss += l;
        grad.push(d);
    }
    Ok((loss, grad))
}

/// `L_ent + L_rel` for one example, scaled by `weight`; gradients accumulate.
fn accumulate(model: &mut SelectorModel, p: &Prepared, weight: f64) -> Result<f64> {
    let (h, enc_cache): (Vec<f64>, Option<EncoderCache>) = match &p.context {
        Context::External(v) => (v.clone(), None),
        Context::Tokens(ids) => {
            let (h, c) = model.encoder.as_ref().expect("tokens imply encoder").forward_ids(ids.clone())?;
            (h, Some(c))
        }
    };
    let ents: Vec<&[f64]> = p.entity_vecs.iter().map(Vec::as_slice).collect();
    let rels: Vec<&[f64]> = p.relation_vecs.iter().map(Vec::as_slice).collect();
    let (es, ecache) = model.entity_head.forward(&h, &ents)?;
    let (rs, rcache) = model.relation_head.forward(&h, &rels)?;
    let (le, mut de) = selection_loss(&es, p.gold_entity)?;
    let (lr, mut dr) = selection_loss(&rs, p.gold_relation)?;
    de.iter_mut().chain(dr.iter_mut()).for_each(|d| *d *= weight);
    let mut dh = model.entity_head.backward(&ecache, &de);
    let dh_rel = model.relation_head.backward(&rcache, &dr);
    dh.truncate(model.context_dim);
    for (a, b) in dh.iter_mut().zip(&dh_rel[..model.context_dim]) {
        *a += b;
    }
    if let (Some(cache), Some(enc)) = (enc_cache, model.encoder.as_mut()) {
        enc.backward(&cache, &dh);
    }
    Ok(weight * (le + lr))
}

/// Per-epoch record of a selector run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorTrainLog {
    pub epoch_losses: Vec<f64>,
    /// Validation entity R@1 + relation R@1 per epoch (empty without a validation split).
    pub validation_scores: Vec<f64>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub dropped: Vec<DropRecord>,
}

/// Trains a selector on `split.train`, early-stopping on `split.validation`.
///
/// Without precomputed contexts a fresh [`ContextEncoder`] is built over the
/// training vocabulary and trained jointly; embeddings stay frozen.
pub fn train_selector(
    split: &CorpusSplit,
    inputs: &SelectionInputs<'_>,
    cfg: &TrainConfig,
    variant: Variant,
) -> Result<(SelectorModel, SelectorTrainLog)> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::EmptyInput("training split is empty"));
    }
    inputs.embeddings.check_compatible(inputs.graph)?;
    let mut rng = substream(cfg.seed, "selection");
    let (encoder, context_dim) = match inputs.contexts {
        Some(map) => {
            let dim = split
                .train
                .iter()
                .find_map(|ex| map.get(&ex.id).map(Vec::len))
                .ok_or(Error::EmptyInput("no context vectors for the training split"))?;
            (None, dim)
        }
        None => {
            let vocab = Vocabulary::build(
                split.train.iter().flat_map(|ex| [ex.question.as_str(), ex.answer.as_str()]),
                cfg.min_token_count,
            );
            let enc = ContextEncoder::new(vocab, cfg.embedding_dim, cfg.embedding_dim, &mut rng);
            let dim = enc.output_dim();
            (Some(enc), dim)
        }
    };
    let mut model = SelectorModel::new(variant, encoder, context_dim, inputs.embeddings, cfg.clone(), &mut rng)?;

    let mut dropped = Vec::new();
    let mut train = Vec::new();
    for ex in &split.train {
        match prepare(&model, inputs, ex) {
            Ok(p) => train.push(p),
            Err(reason) => dropped.push(DropRecord { id: ex.id.clone(), reason }),
        }
    }
    if train.is_empty() {
        return Err(Error::TooManyInvalid { dropped: dropped.len(), total: split.train.len() });
    }

    let mut opt = Optimizer::adamw(cfg.learning_rate, cfg.weight_decay)?;
    let mut log = SelectorTrainLog {
        epoch_losses: Vec::new(),
        validation_scores: Vec::new(),
        best_epoch: 0,
        stopped_early: false,
        dropped,
    };
    let mut best: Option<(f64, SelectorModel)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let n = train.len() as f64;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let weight = 1.0 / batch.len() as f64;
            for &i in batch {
                total += accumulate(&mut model, &train[i], weight)? * batch.len() as f64;
            }
            opt.step(&mut model.params_mut())?;
        }
        log.epoch_losses.push(total / n);

        if split.validation.is_empty() {
            log.best_epoch = epoch;
            continue;
        }
        let ent = recall_at_k(&model, &split.validation, inputs, 1)?;
        let score = ent.entity + ent.relation;
        log.validation_scores.push(score);
        if best.as_ref().map_or(true, |(b, _)| score > *b) {
            best = Some((score, model.clone()));
            log.best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    if let Some((_, m)) = best {
        model = m;
    }
    Ok((model, log))
}

/// Entity and relation recall at one cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recall {
    pub entity: f64,
    pub relation: f64,
}

/// Recall@k from already computed results, matched to `examples` by position.
pub fn recall_from_results(results: &[SelectionResult], examples: &[DialogueExample], k: usize) -> Result<Recall> {
    if k < 1 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if results.len() != examples.len() {
        return Err(Error::Mismatch(format!("{} results for {} examples", results.len(), examples.len())));
    }
    if examples.is_empty() {
        return Err(Error::EmptyInput("no examples to evaluate"));
    }
    let hit = |list: &[(String, f64)], gold: &str| list.iter().take(k).any(|(id, _)| id == gold);
    let (mut e, mut r) = (0usize, 0usize);
    for (res, ex) in results.iter().zip(examples) {
        e += usize::from(hit(&res.entities, &ex.gold_entity));
        r += usize::from(hit(&res.relations, &ex.gold_relation));
    }
    let n = examples.len() as f64;
    Ok(Recall { entity: e as f64 / n, relation: r as f64 / n })
}

pub fn recall_at_k(model: &SelectorModel, examples: &[DialogueExample], inputs: &SelectionInputs<'_>, k: usize) -> Result<Recall> {
    let results = examples.iter().map(|ex| model.select(inputs, ex)).collect::<Result<Vec<_>>>()?;
    recall_from_results(&results, examples, k)
}

/// Recall at several cutoffs, computing each example's scores once.
pub fn evaluate(
    model: &SelectorModel,
    examples: &[DialogueExample],
    inputs: &SelectionInputs<'_>,
    ks: &[usize],
) -> Result<Vec<(usize, Recall)>> {
    let results = examples.iter().map(|ex| model.select(inputs, ex)).collect::<Result<Vec<_>>>()?;
    ks.iter().map(|&k| Ok((k, recall_from_results(&results, examples, k)?))).collect()
}

/// Finite-difference check of the full selector gradient (encoder, both
/// heads) on a small synthetic world built from `seed`.
pub fn gradient_check(variant: Variant, seed: u64) -> Result<crate::nn::GradCheckReport> {
    use crate::embed::{train_embeddings, EmbedTrainConfig};
    let w = crate::synth::world(seed, 6)?;
    let exs = crate::synth::corpus(&w, 6, seed.wrapping_add(1));
    let ecfg = EmbedTrainConfig { dim: 6, epochs: 5, seed, ..Default::default() };
    let (emb, _) = train_embeddings(&w.graph, &ecfg)?;
    let inputs = SelectionInputs { graph: &w.graph, embeddings: &emb, contexts: None };
    let vocab = Vocabulary::build(exs.iter().flat_map(|e| [e.question.as_str(), e.answer.as_str()]), 1);
    let mut rng = substream(seed, "gradcheck");
    let enc = ContextEncoder::new(vocab, 4, 5, &mut rng);
    let cfg = TrainConfig { hidden_dim: 3, ..TrainConfig::desk() };
    let mut model = SelectorModel::new(variant, Some(enc), 0, &emb, cfg, &mut rng)?;
    let prepared = exs
        .iter()
        .take(2)
        .map(|e| prepare(&model, &inputs, e).map_err(|_| Error::EmptyInput("example without candidates")))
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::nn::grad_check(&mut model, 1e-5, |m| prepared.iter().map(|p| accumulate(m, p, 0.5).unwrap()).sum()))
}
