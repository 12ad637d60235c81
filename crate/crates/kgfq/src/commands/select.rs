use std::path::Path;

use kgfq_core::embed::{EmbeddingTable, Family};
use kgfq_core::selection::{evaluate, train_selector, ContextVectors, Recall, SelectionInputs, SelectorModel, SelectorTrainLog, Variant};
use serde::{Deserialize, Serialize};

use crate::artifact::{read_artifact, Output};
use crate::cli::{nonempty_split, split_name, Ctx, SelectEvalArgs, SelectTrainArgs};
use crate::error::{Error, Result};
use crate::io;

pub const KIND: &str = "selector";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorArtifact {
    pub model: SelectorModel,
    pub log: SelectorTrainLog,
}

pub fn load(path: &Path, emb: &EmbeddingTable) -> Result<SelectorModel> {
    let model = read_artifact::<SelectorArtifact>(path, KIND)?.body.model;
    model.validate()?;
    model.check_embeddings(emb)?;
    Ok(model)
}

fn contexts(path: Option<&Path>) -> Result<Option<ContextVectors>> {
    path.map(io::read_context_vectors).transpose()
}

pub fn train(mut ctx: Ctx, a: &SelectTrainArgs) -> Result<Output> {
    let g = ctx.graph()?;
    let corpus = ctx.corpus(&g)?;
    let emb = super::embed::load(&a.embeddings)?;
    let vectors = contexts(a.contexts.as_deref())?;
    let inputs = SelectionInputs { graph: &g, embeddings: &emb, contexts: vectors.as_ref() };
    let variant = ctx.cfg.selection.variant;
    let (model, mut log) = train_selector(&corpus.split, &inputs, &ctx.cfg.train, variant)?;
    log.dropped.extend(corpus.dropped);
    println!(
        "{variant} selector over {}: best epoch {} of {}{}",
        emb.family,
        log.best_epoch + 1,
        log.epoch_losses.len(),
        if log.stopped_early { " (stopped early)" } else { "" }
    );
    let name = format!("selector-{variant}-{}.json", emb.family);
    ctx.out.json(&name, KIND, &SelectorArtifact { model, log })?;
    Ok(ctx.out)
}

/// One row of the selection results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub variant: Variant,
    pub embedding_family: Family,
    pub entity_r1: Option<f64>,
    pub relation_r1: Option<f64>,
    pub relation_r3: Option<f64>,
    pub relation_r5: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallAt {
    pub k: usize,
    pub entity: f64,
    pub relation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEvalReport {
    pub split: String,
    pub examples: usize,
    pub rows: Vec<SelectionRow>,
    pub recall: Vec<RecallAt>,
}

pub fn eval(mut ctx: Ctx, a: &SelectEvalArgs) -> Result<Output> {
    if a.k.is_empty() || a.k.contains(&0) {
        return Err(Error::Usage("--k needs cutoffs of at least 1".into()));
    }
    let g = ctx.graph()?;
    let corpus = ctx.corpus(&g)?;
    let emb = super::embed::load(&a.embeddings)?;
    let model = load(&a.selector, &emb)?;
    let vectors = contexts(a.contexts.as_deref())?;
    let inputs = SelectionInputs { graph: &g, embeddings: &emb, contexts: vectors.as_ref() };
    let examples = nonempty_split(&corpus.split, a.split)?;
    let mut ks = a.k.clone();
    ks.sort_unstable();
    ks.dedup();
    let recall: Vec<RecallAt> = evaluate(&model, examples, &inputs, &ks)?
        .into_iter()
        .map(|(k, Recall { entity, relation })| RecallAt { k, entity, relation })
        .collect();
    let at = |k: usize| recall.iter().find(|r| r.k == k);
    let row = SelectionRow {
        variant: model.variant,
        embedding_family: model.embedding_family,
        entity_r1: at(1).map(|r| r.entity),
        relation_r1: at(1).map(|r| r.relation),
        relation_r3: at(3).map(|r| r.relation),
        relation_r5: at(5).map(|r| r.relation),
    };
    for r in &recall {
        println!("R@{}: entity {:.4}, relation {:.4}", r.k, r.entity, r.relation);
    }
    let report = SelectionEvalReport { split: split_name(a.split).into(), examples: examples.len(), rows: vec![row], recall };
    ctx.out.json("selection_eval.json", "selection-eval", &report)?;
    Ok(ctx.out)
}
