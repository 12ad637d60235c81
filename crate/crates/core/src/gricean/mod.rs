//! Reference-free scores for generated follow-up questions.
//!
//! | score | meaning |
//! |-------|---------|
//! | REL   | the question names the intended entity |
//! | INFO  | out-degree centrality of the named entity |
//! | TRUTH | the graph has the (entity, predicted relation) edge |
//! | CLA   | perplexity of the question under a language model |
//! | COH   | a next-utterance classifier accepts it after the context |
//!
//! CLA and COH can come from external score files instead of the built-in
//! models. A question whose entity is not recognized scores 0 on REL, INFO
//! and TRUTH.

pub mod coherence;
pub mod ngram;
pub mod relpred;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use coherence::{coherence_pairs, train_coherence, CoherenceClassifier, CoherencePair, COHERENCE_THRESHOLD};
pub use ngram::{NGramConfig, NGramLM};
pub use relpred::{train_relation_predictor, ClassifierTrainLog, RelationPredictor};

use crate::kg::KnowledgeGraph;
use crate::{Error, Result};

/// Which entities count as relevant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelMode {
    /// Only the gold entity.
    #[default]
    Gold,
    /// Any entity mentioned in the context.
    ContextSet,
}

impl core::str::FromStr for RelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gold" => Ok(RelMode::Gold),
            "context-set" => Ok(RelMode::ContextSet),
            other => Err(Error::InvalidArgument(format!("unknown REL mode `{other}`"))),
        }
    }
}

pub fn score_rel<S: AsRef<str>>(g: &KnowledgeGraph, question: &str, gold_entity: &str, mentions: &[S], mode: RelMode) -> u8 {
    let Some(link) = g.link_entity(question) else { return 0 };
    let hit = match mode {
        RelMode::Gold => link.entity == gold_entity,
        RelMode::ContextSet => mentions.iter().any(|m| m.as_ref() == link.entity),
    };
    u8::from(hit)
}

pub fn score_info(g: &KnowledgeGraph, question: &str) -> Result<f64> {
    match g.link_entity(question) {
        Some(link) => g.centrality(&link.entity),
        None => Ok(0.0),
    }
}

pub fn score_truth(g: &KnowledgeGraph, question: &str, predictor: &RelationPredictor) -> Result<u8> {
    let Some(link) = g.link_entity(question) else { return Ok(0) };
    let r = predictor.predict(question)?;
    Ok(u8::from(g.has_edge(&link.entity, r).unwrap_or(false)))
}

pub fn score_cla(lm: &NGramLM, question: &str) -> Result<f64> {
    lm.perplexity(question)
}

pub fn score_coh(clf: &CoherenceClassifier, question: &str, answer: &str, followup: &str) -> Result<(u8, f64)> {
    clf.predict(question, answer, followup)
}

/// The dialogue turn a question follows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaContext {
    pub question: String,
    pub answer: String,
}

/// A question to score. Gold entity and mentions are needed for REL and are
/// usually joined in from the corpus by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionInput {
    pub id: String,
    pub context: QaContext,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_entity: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mentions: Vec<String>,
}

/// Externally computed token log-probabilities of a question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClarityScore {
    pub id: String,
    pub logprob_sum: f64,
    pub n_tokens: u64,
}

impl ClarityScore {
    /// `exp(-logprob_sum / n_tokens)`.
    pub fn cla(&self) -> Result<f64> {
        if self.n_tokens == 0 {
            return Err(Error::InvalidArgument(format!("clarity score `{}` has zero tokens", self.id)));
        }
        let v = libm::exp(-self.logprob_sum / self.n_tokens as f64);
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::NonFinite(format!("clarity of `{}`", self.id)));
        }
        Ok(v)
    }
}

/// Externally computed next-utterance probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceScore {
    pub id: String,
    pub p_next: f64,
}

/// Overrides for CLA and COH keyed by question id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExternalScores {
    pub clarity: BTreeMap<String, f64>,
    pub coherence: BTreeMap<String, f64>,
    /// Fail instead of falling back to the built-in model for missing ids.
    pub require_clarity: bool,
    pub require_coherence: bool,
}

impl ExternalScores {
    pub fn add_clarity(&mut self, scores: &[ClarityScore]) -> Result<()> {
        for s in scores {
            if self.clarity.insert(s.id.clone(), s.cla()?).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate clarity score for `{}`", s.id)));
            }
        }
        Ok(())
    }

    pub fn add_coherence(&mut self, scores: &[CoherenceScore]) -> Result<()> {
        for s in scores {
            if !(0.0..=1.0).contains(&s.p_next) {
                return Err(Error::InvalidArgument(format!("p_next of `{}` is outside [0, 1]", s.id)));
            }
            if self.coherence.insert(s.id.clone(), s.p_next).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate coherence score for `{}`", s.id)));
            }
        }
        Ok(())
    }
}

/// Built-in models; any may be absent when external scores cover it.
#[derive(Debug, Clone, Copy)]
pub struct Scorers<'a> {
    pub graph: &'a KnowledgeGraph,
    pub lm: Option<&'a NGramLM>,
    pub predictor: Option<&'a RelationPredictor>,
    pub coherence: Option<&'a CoherenceClassifier>,
    pub rel_mode: RelMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    Builtin,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub id: String,
    pub rel: u8,
    pub info: f64,
    pub truth: u8,
    pub cla: f64,
    pub coh: u8,
    pub coh_probability: f64,
    pub recognized_entity: Option<String>,
    pub predicted_relation: Option<String>,
    pub cla_source: ScoreSource,
    pub coh_source: ScoreSource,
}

/// Means over records; REL, TRUTH and COH as percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub n: usize,
    pub rel_pct: f64,
    pub info_mean: f64,
    pub truth_pct: f64,
    pub cla_mean: f64,
    pub coh_pct: f64,
}

impl Aggregates {
    pub fn of(records: &[QuestionRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput("no question records to aggregate"));
        }
        let n = records.len() as f64;
        let mean = |f: &dyn Fn(&QuestionRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        Ok(Aggregates {
            n: records.len(),
            rel_pct: 100.0 * mean(&|r| f64::from(r.rel)),
            info_mean: mean(&|r| r.info),
            truth_pct: 100.0 * mean(&|r| f64::from(r.truth)),
            cla_mean: mean(&|r| r.cla),
            coh_pct: 100.0 * mean(&|r| f64::from(r.coh)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriceanReport {
    pub records: Vec<QuestionRecord>,
    pub aggregates: Aggregates,
}

/// Scores one question.
pub fn score_question(s: &Scorers<'_>, ext: &ExternalScores, q: &QuestionInput) -> Result<QuestionRecord> {
    let g = s.graph;
    let link = g.link_entity(&q.question);
    let recognized_entity = link.map(|l| l.entity);
    let gold = q.gold_entity.as_deref();
    let rel = match (s.rel_mode, gold) {
        (RelMode::Gold, None) => {
            return Err(Error::InvalidArgument(format!("question `{}` has no gold entity for REL", q.id)))
        }
        (RelMode::Gold, Some(gold)) => u8::from(recognized_entity.as_deref() == Some(gold)),
        (RelMode::ContextSet, _) => u8::from(recognized_entity.as_ref().is_some_and(|e| q.mentions.contains(e))),
    };
    let info = match &recognized_entity {
        Some(e) => g.centrality(e)?,
        None => 0.0,
    };
    let (truth, predicted_relation) = match &recognized_entity {
        Some(e) => {
            let predictor = s
                .predictor
                .ok_or_else(|| Error::InvalidArgument("TRUTH needs a relation predictor".into()))?;
            let r = predictor.predict(&q.question)?;
            (u8::from(g.has_edge(e, r).unwrap_or(false)), Some(r.to_string()))
        }
        None => (0, None),
    };
    let (cla, cla_source) = match ext.clarity.get(&q.id) {
        Some(v) => (*v, ScoreSource::External),
        None if ext.require_clarity => {
            return Err(Error::InvalidArgument(format!("no external clarity score for `{}`", q.id)))
        }
        None => {
            let lm = s.lm.ok_or_else(|| Error::InvalidArgument(format!("no clarity score or model for `{}`", q.id)))?;
            (score_cla(lm, &q.question)?, ScoreSource::Builtin)
        }
    };
    let (coh_probability, coh_source) = match ext.coherence.get(&q.id) {
        Some(p) => (*p, ScoreSource::External),
        None if ext.require_coherence => {
            return Err(Error::InvalidArgument(format!("no external coherence score for `{}`", q.id)))
        }
        None => {
            let clf = s
                .coherence
                .ok_or_else(|| Error::InvalidArgument(format!("no coherence score or model for `{}`", q.id)))?;
            (clf.probability(&q.context.question, &q.context.answer, &q.question)?, ScoreSource::Builtin)
        }
    };
    Ok(QuestionRecord {
        id: q.id.clone(),
        rel,
        info,
        truth,
        cla,
        coh: u8::from(coh_probability >= COHERENCE_THRESHOLD),
        coh_probability,
        recognized_entity,
        predicted_relation,
        cla_source,
        coh_source,
    })
}

/// Scores every question; records come back sorted by id.
pub fn score_all(s: &Scorers<'_>, ext: &ExternalScores, questions: &[QuestionInput]) -> Result<GriceanReport> {
    if questions.is_empty() {
        return Err(Error::EmptyInput("no questions to score"));
    }
    let mut seen = BTreeSet::new();
    for q in questions {
        if !seen.insert(q.id.as_str()) {
            return Err(Error::InvalidArgument(format!("duplicate question id `{}`", q.id)));
        }
    }
    let mut records = questions.iter().map(|q| score_question(s, ext, q)).collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let aggregates = Aggregates::of(&records)?;
    Ok(GriceanReport { records, aggregates })
}
