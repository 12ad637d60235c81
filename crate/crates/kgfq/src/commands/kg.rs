use kgfq_core::corpus::{corpus_stats, CorpusStats};
use kgfq_core::kg::{GraphStats, KnowledgeGraph, Relation};
use serde::{Deserialize, Serialize};

use crate::artifact::Output;
use crate::cli::Ctx;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityDump {
    pub id: String,
    pub canonical_name: String,
    pub aliases: Vec<String>,
    pub out_degree: usize,
    pub centrality: f64,
}

/// Normalized graph: sorted ids and distinct triples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDump {
    pub stats: GraphStats,
    pub entities: Vec<EntityDump>,
    pub relations: Vec<Relation>,
    pub literals: Vec<String>,
    pub triples: Vec<[String; 3]>,
}

pub fn dump(g: &KnowledgeGraph) -> Result<GraphDump> {
    let entities = g
        .entities()
        .iter()
        .map(|e| {
            Ok(EntityDump {
                id: e.id.clone(),
                canonical_name: e.canonical_name.clone(),
                aliases: e.aliases.clone(),
                out_degree: g.out_degree(&e.id)?,
                centrality: g.centrality(&e.id).unwrap_or(0.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut triples: Vec<[String; 3]> = g
        .edges()
        .iter()
        .map(|e| {
            [g.entities()[e.head].id.clone(), g.relations()[e.relation].id.clone(), g.node_name(e.tail).to_string()]
        })
        .collect();
    triples.sort();
    Ok(GraphDump {
        stats: g.stats(),
        entities,
        relations: g.relations().to_vec(),
        literals: g.literals().to_vec(),
        triples,
    })
}

pub fn build(mut ctx: Ctx) -> Result<Output> {
    let g = ctx.graph()?;
    let d = dump(&g)?;
    println!("graph: {} entities, {} relations, {} literals, {} triples", d.stats.entities, d.stats.relations, d.stats.literals, d.stats.triples);
    ctx.out.json("graph.json", "graph", &d)?;
    Ok(ctx.out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStatsReport {
    #[serde(flatten)]
    pub stats: CorpusStats,
    pub dropped: usize,
}

pub fn stats(mut ctx: Ctx) -> Result<Output> {
    let g = ctx.graph()?;
    let s = g.stats();
    println!("graph: {} entities, {} triples", s.entities, s.triples);
    ctx.out.json("graph_stats.json", "graph-stats", &s)?;
    if ctx.corpus_path().is_some() {
        let loaded = ctx.corpus(&g)?;
        let stats = corpus_stats(&loaded.split, &g);
        for w in &stats.warnings {
            log::warn!("{w}");
        }
        println!(
            "corpus: {}/{}/{} examples, {} dropped",
            stats.train,
            stats.validation,
            stats.test,
            loaded.dropped.len()
        );
        let report = CorpusStatsReport { stats, dropped: loaded.dropped.len() };
        ctx.out.json("corpus_stats.json", "corpus-stats", &report)?;
        ctx.out.jsonl("drops.jsonl", "drop-report", &loaded.dropped)?;
    }
    Ok(ctx.out)
}
