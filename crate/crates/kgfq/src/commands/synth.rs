use kgfq_core::synth;

use crate::artifact::Output;
use crate::cli::{Ctx, SynthArgs};
use crate::error::{Error, Result};

/// Writes `triples.tsv`, `surface.tsv` and `corpus.jsonl` drawn from the seed.
pub fn synth(mut ctx: Ctx, a: &SynthArgs) -> Result<Output> {
    if a.per_kind == 0 || a.examples == 0 {
        return Err(Error::Usage("--per-kind and --examples must be positive".into()));
    }
    let seed = ctx.cfg.seed;
    let world = synth::world(seed, a.per_kind)?;
    let examples = synth::corpus(&world, a.examples, seed);
    ctx.out.text("triples.tsv", "triples", &world.triples_tsv)?;
    ctx.out.text("surface.tsv", "surface-forms", &world.surface_tsv)?;
    ctx.out.jsonl("corpus.jsonl", "corpus", &examples)?;
    println!("synthetic graph with {} entities and {} examples", world.graph.entities().len(), examples.len());
    Ok(ctx.out)
}
