use kgfq_core::corpus::{DialogueExample, DropRecord};
use kgfq_core::generation::{build_prompt, export_finetune, serialize, Realizer};
use kgfq_core::kg::KnowledgeGraph;
use kgfq_core::selection::{SelectionInputs, SelectorModel};
use serde::{Deserialize, Serialize};

use crate::artifact::Output;
use crate::cli::{nonempty_split, split_name, Ctx, ExportArgs, GenArgs};
use crate::error::{Error, Result};
use crate::io::{self, QuestionLine};

/// Where an (entity, relation) choice came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChoiceSource {
    Gold,
    Selector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptLine {
    pub id: String,
    pub entity: String,
    pub relation: String,
    pub source: ChoiceSource,
    pub prompt: String,
    /// Inference form: question, answer and prompt, each closed by the end marker.
    pub input: String,
}

struct Chooser {
    model: Option<SelectorModel>,
    embeddings: Option<kgfq_core::embed::EmbeddingTable>,
    contexts: Option<kgfq_core::selection::ContextVectors>,
}

impl Chooser {
    fn new(a: &GenArgs) -> Result<Self> {
        let (model, embeddings) = match (&a.selector, &a.embeddings) {
            (Some(s), Some(e)) => {
                let emb = super::embed::load(e)?;
                (Some(super::select::load(s, &emb)?), Some(emb))
            }
            (None, _) => (None, None),
            (Some(_), None) => return Err(Error::Usage("--selector needs --embeddings".into())),
        };
        let contexts = a.contexts.as_deref().map(io::read_context_vectors).transpose()?;
        Ok(Chooser { model, embeddings, contexts })
    }

    fn source(&self) -> ChoiceSource {
        if self.model.is_some() {
            ChoiceSource::Selector
        } else {
            ChoiceSource::Gold
        }
    }

    /// The selector's top entity with its best-ranked relation that the
    /// graph actually holds for it, so prompts stay truthful.
    fn choose(&self, g: &KnowledgeGraph, ex: &DialogueExample) -> Result<(String, String)> {
        let (Some(model), Some(emb)) = (&self.model, &self.embeddings) else {
            return Ok((ex.gold_entity.clone(), ex.gold_relation.clone()));
        };
        let inputs = SelectionInputs { graph: g, embeddings: emb, contexts: self.contexts.as_ref() };
        let res = model.select(&inputs, ex)?;
        let entity = res.top_entity().ok_or(kgfq_core::Error::EmptyInput("no candidate entities"))?.to_string();
        for (r, _) in &res.relations {
            if g.has_edge(&entity, r)? {
                return Ok((entity, r.clone()));
            }
        }
        Err(Error::Usage(format!("selected entity `{entity}` of `{}` has no relations", ex.id)))
    }
}

pub fn prompt(mut ctx: Ctx, a: &GenArgs) -> Result<Output> {
    let g = ctx.graph()?;
    let corpus = ctx.corpus(&g)?;
    let chooser = Chooser::new(a)?;
    let gen = &ctx.cfg.generation;
    let mut lines = Vec::new();
    for ex in nonempty_split(&corpus.split, a.split)? {
        let (entity, relation) = chooser.choose(&g, ex)?;
        let p = build_prompt(&g, &entity, &relation, Some(&gen.template), false)?;
        let seq = serialize(&ex.question, &ex.answer, &p, None, &gen.eos)?;
        lines.push(PromptLine { id: ex.id.clone(), entity, relation, source: chooser.source(), prompt: p, input: seq.text });
    }
    println!("{} prompts for the {} split", lines.len(), split_name(a.split));
    ctx.out.jsonl("prompts.jsonl", "prompts", &lines)?;
    Ok(ctx.out)
}

pub fn realize(mut ctx: Ctx, a: &GenArgs) -> Result<Output> {
    let g = ctx.graph()?;
    let corpus = ctx.corpus(&g)?;
    let chooser = Chooser::new(a)?;
    let realizer = match &ctx.cfg.generation.rules {
        Some(p) => Realizer::from_tsv(&io::read_text(p)?).map_err(|e| match e {
            kgfq_core::Error::Malformed { line, reason } => Error::Parse { path: p.clone(), line, reason },
            other => other.into(),
        })?,
        None => Realizer::default(),
    };
    let mut lines = Vec::new();
    for ex in nonempty_split(&corpus.split, a.split)? {
        let (entity, relation) = chooser.choose(&g, ex)?;
        let question = realizer.realize(&g, &entity, &relation)?;
        lines.push(QuestionLine { id: ex.id.clone(), question, context: None, gold_entity: None, mentions: None });
    }
    println!("{} questions for the {} split", lines.len(), split_name(a.split));
    ctx.out.jsonl("realized.jsonl", "generated-questions", &lines)?;
    Ok(ctx.out)
}

pub fn export(mut ctx: Ctx, a: &ExportArgs) -> Result<Output> {
    let g = ctx.graph()?;
    let corpus = ctx.corpus(&g)?;
    let gen = &ctx.cfg.generation;
    let ex = export_finetune(nonempty_split(&corpus.split, a.split)?, &g, Some(&gen.template), &gen.eos)?;
    for s in &ex.skipped {
        log::warn!("skipped `{}`: {}", s.id, s.reason);
    }
    println!("{} sequences, {} skipped", ex.lines, ex.skipped.len());
    ctx.out.text("finetune.txt", "finetune-export", &ex.text)?;
    ctx.out.jsonl::<DropRecord>("export_skipped.jsonl", "drop-report", &ex.skipped)?;
    Ok(ctx.out)
}
