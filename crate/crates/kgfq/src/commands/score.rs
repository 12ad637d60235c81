use std::collections::BTreeSet;
use std::path::Path;

use kgfq_core::corpus::CorpusSplit;
use kgfq_core::gricean::{
    score_all, train_coherence, train_relation_predictor, ClassifierTrainLog, CoherenceClassifier, ExternalScores,
    GriceanReport, NGramLM, RelMode, RelationPredictor, ScoreSource, Scorers,
};
use kgfq_core::metrics::{rouge as rouge_pair, rouge_corpus, RougeScores, RougeSummary};
use serde::{Deserialize, Serialize};

use crate::artifact::{read_artifact, Output};
use crate::cli::{Ctx, GriceanArgs, RougeArgs};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{self, RougePair};

const PREDICTOR: (&str, &str) = ("relation_predictor.json", "relation-predictor");
const COHERENCE: (&str, &str) = ("coherence.json", "coherence-classifier");
const NGRAM: (&str, &str) = ("ngram.json", "ngram-lm");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorArtifact {
    pub model: RelationPredictor,
    pub log: ClassifierTrainLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceArtifact {
    pub model: CoherenceClassifier,
    pub log: ClassifierTrainLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramArtifact {
    pub model: NGramLM,
}

struct Models {
    predictor: (RelationPredictor, ClassifierTrainLog),
    coherence: Option<(CoherenceClassifier, ClassifierTrainLog)>,
    lm: Option<NGramLM>,
}

/// The language model sees every training utterance: questions, answers and follow-ups.
fn fit_lm(split: &CorpusSplit, cfg: &RunConfig) -> Result<NGramLM> {
    let sentences: Vec<&str> =
        split.train.iter().flat_map(|e| [e.question.as_str(), e.answer.as_str(), e.followup.as_str()]).collect();
    Ok(NGramLM::fit(&sentences, cfg.gricean.ngram.clone())?)
}

fn train_models(split: &CorpusSplit, cfg: &RunConfig, coherence: bool, lm: bool) -> Result<Models> {
    log::info!("training relation predictor");
    let predictor = train_relation_predictor(split, &cfg.train)?;
    for w in &predictor.1.warnings {
        log::warn!("{w}");
    }
    let coherence = if coherence {
        log::info!("training coherence classifier");
        Some(train_coherence(split, &cfg.train, cfg.gricean.negative_ratio)?)
    } else {
        None
    };
    let lm = if lm { Some(fit_lm(split, cfg)?) } else { None };
    Ok(Models { predictor, coherence, lm })
}

pub fn train(mut ctx: Ctx) -> Result<Output> {
    let g = ctx.graph()?;
    let corpus = ctx.corpus(&g)?;
    let m = train_models(&corpus.split, &ctx.cfg, true, true)?;
    let (predictor, plog) = m.predictor;
    let (coherence, clog) = m.coherence.expect("requested");
    if !corpus.split.validation.is_empty() {
        println!("relation predictor validation accuracy {:.4}", predictor.accuracy(&corpus.split.validation)?);
    }
    ctx.out.json(PREDICTOR.0, PREDICTOR.1, &PredictorArtifact { model: predictor, log: plog })?;
    ctx.out.json(COHERENCE.0, COHERENCE.1, &CoherenceArtifact { model: coherence, log: clog })?;
    ctx.out.json(NGRAM.0, NGRAM.1, &NGramArtifact { model: m.lm.expect("requested") })?;
    Ok(ctx.out)
}

fn load_models(dir: &Path, coherence: bool, lm: bool) -> Result<Models> {
    let p = read_artifact::<PredictorArtifact>(&dir.join(PREDICTOR.0), PREDICTOR.1)?.body;
    let coherence = if coherence {
        let c = read_artifact::<CoherenceArtifact>(&dir.join(COHERENCE.0), COHERENCE.1)?.body;
        Some((c.model, c.log))
    } else {
        None
    };
    let lm = if lm { Some(read_artifact::<NGramArtifact>(&dir.join(NGRAM.0), NGRAM.1)?.body.model) } else { None };
    Ok(Models { predictor: (p.model, p.log), coherence, lm })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriceanArtifact {
    pub system: String,
    pub rel_mode: RelMode,
    pub questions: usize,
    pub external_clarity: usize,
    pub external_coherence: usize,
    pub warnings: Vec<String>,
    pub report: GriceanReport,
}

pub fn gricean(mut ctx: Ctx, a: &GriceanArgs) -> Result<Output> {
    let g = ctx.graph()?;
    let gcfg = ctx.cfg.gricean.clone();
    let corpus = ctx.corpus_path().map(|_| ctx.corpus(&g)).transpose()?;
    let all: Option<Vec<_>> = corpus.as_ref().map(|c| c.split.iter().collect());
    let questions = io::read_questions(&a.questions, all.as_deref())?;

    let mut ext = ExternalScores { require_clarity: false, require_coherence: false, ..Default::default() };
    let mut warnings = Vec::new();
    if let Some(p) = &gcfg.clarity_external {
        ext.add_clarity(&io::read_clarity(p)?).map_err(|e| Error::schema(p, e))?;
        ext.require_clarity = gcfg.require_external;
    }
    if let Some(p) = &gcfg.coherence_external {
        ext.add_coherence(&io::read_coherence(p)?).map_err(|e| Error::schema(p, e))?;
        ext.require_coherence = gcfg.require_external;
    }
    let ids: BTreeSet<&str> = questions.iter().map(|q| q.id.as_str()).collect();
    for (name, map, path) in [
        ("clarity", &ext.clarity, &gcfg.clarity_external),
        ("coherence", &ext.coherence, &gcfg.coherence_external),
    ] {
        if let Some(p) = path {
            let missing = ids.iter().filter(|id| !map.contains_key(**id)).count();
            let unused = map.keys().filter(|id| !ids.contains(id.as_str())).count();
            if missing > 0 && !gcfg.require_external {
                warnings.push(format!("{missing} questions missing from external {name} file {}; built-in scorer used", p.display()));
            }
            if unused > 0 {
                warnings.push(format!("{unused} ids in external {name} file {} match no question", p.display()));
            }
        }
    }
    let need_lm = !ext.require_clarity;
    let need_coh = !ext.require_coherence;
    let models = match &a.models {
        Some(dir) => load_models(dir, need_coh, need_lm)?,
        None => {
            let c = corpus
                .as_ref()
                .ok_or_else(|| Error::Usage("built-in scorers need --models or a corpus to train on".into()))?;
            train_models(&c.split, &ctx.cfg, need_coh, need_lm)?
        }
    };
    let scorers = Scorers {
        graph: &g,
        lm: models.lm.as_ref(),
        predictor: Some(&models.predictor.0),
        coherence: models.coherence.as_ref().map(|c| &c.0),
        rel_mode: gcfg.rel_mode,
    };
    let report = score_all(&scorers, &ext, &questions)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let count = |f: fn(&kgfq_core::gricean::QuestionRecord) -> ScoreSource| {
        report.records.iter().filter(|r| f(r) == ScoreSource::External).count()
    };
    let ag = &report.aggregates;
    println!(
        "{}: REL {:.2}% INFO {:.4} TRUTH {:.2}% CLA {:.4} COH {:.2}% (n={})",
        a.system, ag.rel_pct, ag.info_mean, ag.truth_pct, ag.cla_mean, ag.coh_pct, ag.n
    );
    let artifact = GriceanArtifact {
        system: a.system.clone(),
        rel_mode: gcfg.rel_mode,
        questions: questions.len(),
        external_clarity: count(|r| r.cla_source),
        external_coherence: count(|r| r.coh_source),
        warnings,
        report,
    };
    ctx.out.json(&format!("gricean-{}.json", super::slug(&a.system)), "gricean", &artifact)?;
    Ok(ctx.out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RougePairScore {
    pub id: String,
    #[serde(flatten)]
    pub scores: RougeScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RougeArtifact {
    pub system: String,
    pub summary: RougeSummary,
    pub pairs: Vec<RougePairScore>,
}

pub fn rouge(mut ctx: Ctx, a: &RougeArgs) -> Result<Output> {
    let mut pairs: Vec<RougePair> = io::read_jsonl(&a.pairs)?;
    pairs.sort_by(|x, y| x.id.cmp(&y.id));
    if let Some(w) = pairs.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::schema(&a.pairs, format!("duplicate id `{}`", w[0].id)));
    }
    let scored: Vec<RougePairScore> =
        pairs.iter().map(|p| RougePairScore { id: p.id.clone(), scores: rouge_pair(&p.candidate, &p.reference) }).collect();
    let all: Vec<RougeScores> = scored.iter().map(|s| s.scores.clone()).collect();
    let summary = rouge_corpus(&all)?;
    println!(
        "{}: ROUGE-1 {:.4} ROUGE-2 {:.4} ROUGE-L {:.4} (F1, n={})",
        a.system, summary.r1_f1, summary.r2_f1, summary.rl_f1, summary.n
    );
    let artifact = RougeArtifact { system: a.system.clone(), summary, pairs: scored };
    ctx.out.json(&format!("rouge-{}.json", super::slug(&a.system)), "rouge", &artifact)?;
    Ok(ctx.out)
}
