//! One module per command group. Each command applies its own flag
//! overrides to the config, then builds the [`Ctx`] so provenance reflects
//! the overrides.

mod embed;
mod gen;
mod kg;
mod report;
mod score;
mod select;
mod stats;
mod synth;

use std::path::PathBuf;

use crate::artifact::Output;
use crate::cli::{Command, Ctx, EmbedCommand, GenCommand, KgCommand, ScoreCommand, SelectCommand, StatsCommand};
use crate::config::RunConfig;
use crate::error::Result;

pub use report::{render_markdown, ReportTables};
pub use select::SelectionEvalReport;

pub fn dispatch(command: Command, mut cfg: RunConfig, out: PathBuf) -> Result<Output> {
    let ctx = |cfg: RunConfig| Ctx::new(cfg, out.clone());
    match command {
        Command::Kg(KgCommand::Build) => kg::build(ctx(cfg)?),
        Command::Kg(KgCommand::Stats) => kg::stats(ctx(cfg)?),
        Command::Embed(EmbedCommand::Train(a)) => {
            if let Some(f) = a.family {
                cfg.embed.family = f;
            }
            if let Some(d) = a.dim {
                cfg.embed.dim = d;
            }
            if let Some(e) = a.epochs {
                cfg.embed.epochs = e;
            }
            if let Some(m) = a.margin {
                cfg.embed.margin = m;
            }
            embed::train(ctx(cfg)?)
        }
        Command::Embed(EmbedCommand::Eval(a)) => embed::eval(ctx(cfg)?, &a),
        Command::Select(SelectCommand::Train(a)) => {
            if let Some(v) = a.variant {
                cfg.selection.variant = v;
            }
            if let Some(e) = a.epochs {
                cfg.train.epochs = e;
            }
            select::train(ctx(cfg)?, &a)
        }
        Command::Select(SelectCommand::Eval(a)) => select::eval(ctx(cfg)?, &a),
        Command::Gen(GenCommand::Prompt(a)) => gen::prompt(ctx(cfg)?, &a),
        Command::Gen(GenCommand::Realize(a)) => gen::realize(ctx(cfg)?, &a),
        Command::Gen(GenCommand::Export(a)) => gen::export(ctx(cfg)?, &a),
        Command::Score(ScoreCommand::Train) => score::train(ctx(cfg)?),
        Command::Score(ScoreCommand::Gricean(a)) => {
            if let Some(m) = a.rel_mode {
                cfg.gricean.rel_mode = m;
            }
            if a.clarity_external.is_some() {
                cfg.gricean.clarity_external.clone_from(&a.clarity_external);
            }
            if a.coherence_external.is_some() {
                cfg.gricean.coherence_external.clone_from(&a.coherence_external);
            }
            cfg.gricean.require_external |= a.require_external;
            score::gricean(ctx(cfg)?, &a)
        }
        Command::Score(ScoreCommand::Rouge(a)) => score::rouge(ctx(cfg)?, &a),
        Command::Stats(StatsCommand::Anova(a)) => stats::anova(ctx(cfg)?, &a),
        Command::Stats(StatsCommand::Alpha(a)) => stats::alpha(ctx(cfg)?, &a),
        Command::Report(a) => report::report(ctx(cfg)?, &a),
        Command::Synth(a) => synth::synth(ctx(cfg)?, &a),
        Command::Config => {
            print!("{}", RunConfig::default_toml());
            Ok(Output::new(out, crate::artifact::Provenance::of(&cfg)))
        }
    }
}

/// Filesystem-safe version of a user label.
fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect();
    if s.is_empty() {
        "system".into()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn slugs_are_file_safe() {
        assert_eq!(super::slug("gold follow-ups/v2"), "gold-follow-ups-v2");
        assert_eq!(super::slug(""), "system");
    }
}
