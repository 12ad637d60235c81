use kgfq_core::embed::{
    link_prediction_eval, train_embeddings, EmbedTrainLog, EmbeddingFile, EmbeddingTable, Family, LinkPredictionReport,
};
use serde::{Deserialize, Serialize};

use crate::artifact::{read_artifact, Output};
use crate::cli::{Ctx, EmbedEvalArgs};
use crate::error::Result;
use crate::io;

pub const KIND: &str = "embeddings";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingArtifact {
    pub table: EmbeddingFile,
    pub log: EmbedTrainLog,
}

pub fn load(path: &std::path::Path) -> Result<EmbeddingTable> {
    let a = read_artifact::<EmbeddingArtifact>(path, KIND)?;
    Ok(EmbeddingTable::from_file(a.body.table)?)
}

pub fn train(mut ctx: Ctx) -> Result<Output> {
    let g = ctx.graph()?;
    let cfg = &ctx.cfg.embed;
    log::info!("training {} d={} for {} epochs", cfg.family, cfg.dim, cfg.epochs);
    let (table, log) = train_embeddings(&g, cfg)?;
    let last = log.epoch_losses.last().copied().unwrap_or(0.0);
    println!("{}: final epoch loss {last:.6}", cfg.family);
    let name = format!("embeddings-{}.json", cfg.family);
    ctx.out.json(&name, KIND, &EmbeddingArtifact { table: table.to_file(), log })?;
    Ok(ctx.out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPredictionArtifact {
    pub family: Family,
    /// `graph` when the graph's own triples were ranked.
    pub triples: String,
    pub queries: usize,
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_10: f64,
    /// Expectations when the true tail's rank is uniform over its candidates.
    pub random_mrr: f64,
    pub random_hits_at_10: f64,
}

/// `(hits@10, MRR)` expected from a uniformly random ranking of each query's candidates.
pub fn random_baseline(r: &LinkPredictionReport) -> (f64, f64) {
    let n = r.queries.len() as f64;
    let (mut hits, mut mrr) = (0.0, 0.0);
    for q in &r.queries {
        let m = q.candidates as f64;
        hits += (q.candidates.min(10) as f64) / m;
        mrr += (1..=q.candidates).map(|k| 1.0 / k as f64).sum::<f64>() / m;
    }
    (hits / n, mrr / n)
}

pub fn eval(mut ctx: Ctx, a: &EmbedEvalArgs) -> Result<Output> {
    let g = ctx.graph()?;
    let table = load(&a.embeddings)?;
    let (edges, label) = match &a.held_out {
        Some(p) => (io::read_triples_against(p, &g)?, p.display().to_string()),
        None => (g.edges().to_vec(), "graph".to_string()),
    };
    let r = link_prediction_eval(&table, &g, &edges)?;
    let (random_hits_at_10, random_mrr) = random_baseline(&r);
    println!("{}: MRR {:.4} (random {random_mrr:.4}), hits@10 {:.4} (random {random_hits_at_10:.4})", table.family, r.mrr, r.hits_at_10);
    let out = LinkPredictionArtifact {
        family: table.family,
        triples: label,
        queries: r.queries.len(),
        mrr: r.mrr,
        hits_at_1: r.hits_at_1,
        hits_at_3: r.hits_at_3,
        hits_at_10: r.hits_at_10,
        random_mrr,
        random_hits_at_10,
    };
    ctx.out.json("link_prediction.json", "link-prediction", &out)?;
    Ok(ctx.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use kgfq_core::embed::QueryRank;

    #[test]
    fn baseline_of_small_candidate_sets() {
        let r = LinkPredictionReport {
            mrr: 0.0,
            hits_at_1: 0.0,
            hits_at_3: 0.0,
            hits_at_10: 0.0,
            queries: vec![QueryRank { rank: 1, candidates: 2 }, QueryRank { rank: 1, candidates: 20 }],
        };
        let (hits, mrr) = random_baseline(&r);
        assert!((hits - 0.75).abs() < 1e-12);
        let h20: f64 = (1..=20).map(|k| 1.0 / k as f64).sum();
        assert!((mrr - (0.75 + h20 / 20.0) / 2.0).abs() < 1e-12);
    }
}
