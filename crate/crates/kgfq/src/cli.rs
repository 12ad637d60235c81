//! Command-line surface. Flags override the matching config keys before the
//! config hash is taken, so artifacts always record what actually ran.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use kgfq_core::corpus::{CorpusSplit, LoadedCorpus, Split};
use kgfq_core::embed::Family;
use kgfq_core::gricean::RelMode;
use kgfq_core::kg::KnowledgeGraph;
use kgfq_core::metrics::Level;
use kgfq_core::selection::Variant;

use crate::artifact::{Output, Provenance};
use crate::commands;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Parser)]
#[command(name = "kgfq", version, about = "Knowledge selection, follow-up question prompts and Gricean scoring")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for every artifact written.
    #[arg(long, global = true, default_value = "kgfq-out")]
    pub out: PathBuf,
    /// Triples TSV; overrides `paths.triples`.
    #[arg(long, global = true)]
    pub triples: Option<PathBuf>,
    /// Surface-forms TSV; overrides `paths.surface`.
    #[arg(long, global = true)]
    pub surface: Option<PathBuf>,
    /// Dataset JSONL; overrides `paths.corpus`.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Knowledge graph checks and statistics.
    #[command(subcommand)]
    Kg(KgCommand),
    /// Knowledge-graph embeddings.
    #[command(subcommand)]
    Embed(EmbedCommand),
    /// Knowledge selection models.
    #[command(subcommand)]
    Select(SelectCommand),
    /// Prompts, rule-based questions and the fine-tuning export.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Gricean and ROUGE scoring.
    #[command(subcommand)]
    Score(ScoreCommand),
    /// ANOVA and inter-rater agreement.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Joins evaluation artifacts into Markdown and JSON tables.
    Report(ReportArgs),
    /// Writes a synthetic graph and dataset.
    Synth(SynthArgs),
    /// Prints the default configuration as TOML.
    Config,
}

#[derive(Debug, Subcommand)]
pub enum KgCommand {
    /// Validates the graph and writes a normalized dump.
    Build,
    /// Graph statistics, plus corpus statistics and drops when a corpus is configured.
    Stats,
}

#[derive(Debug, Subcommand)]
pub enum EmbedCommand {
    Train(EmbedTrainArgs),
    /// Filtered tail prediction with brute-force random baselines.
    Eval(EmbedEvalArgs),
}

#[derive(Debug, Args)]
pub struct EmbedTrainArgs {
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EmbedEvalArgs {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Triples TSV to rank; the graph's own triples when absent.
    #[arg(long)]
    pub held_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SelectCommand {
    Train(SelectTrainArgs),
    /// Recall@k per selector and embedding family.
    Eval(SelectEvalArgs),
}

#[derive(Debug, Args)]
pub struct SelectTrainArgs {
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Precomputed context vectors, JSONL `{id, vector}`.
    #[arg(long)]
    pub contexts: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectEvalArgs {
    #[arg(long)]
    pub selector: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub contexts: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub k: Vec<usize>,
    #[arg(long, value_parser = parse_split, default_value = "test")]
    pub split: Split,
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Inference-form prompts for a split.
    Prompt(GenArgs),
    /// Rule-based questions for a split, in the generated-output format.
    Realize(GenArgs),
    /// Training sequences for fine-tuning a generator.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_parser = parse_split, default_value = "test")]
    pub split: Split,
    /// Use a trained selector's choices instead of the gold pair.
    #[arg(long, requires = "embeddings")]
    pub selector: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub contexts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_parser = parse_split, default_value = "train")]
    pub split: Split,
}

#[derive(Debug, Subcommand)]
pub enum ScoreCommand {
    /// Trains the built-in relation predictor, coherence classifier and language model.
    Train,
    Gricean(GriceanArgs),
    Rouge(RougeArgs),
}

#[derive(Debug, Args)]
pub struct GriceanArgs {
    /// Questions JSONL: `{id, context, question}` or `{id, question}`.
    #[arg(long)]
    pub questions: PathBuf,
    /// Directory written by `score train`; models are trained in memory when absent.
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// System label used in file names and reports.
    #[arg(long, default_value = "system")]
    pub system: String,
    #[arg(long)]
    pub rel_mode: Option<RelMode>,
    #[arg(long)]
    pub clarity_external: Option<PathBuf>,
    #[arg(long)]
    pub coherence_external: Option<PathBuf>,
    #[arg(long)]
    pub require_external: bool,
}

#[derive(Debug, Args)]
pub struct RougeArgs {
    /// JSONL `{id, candidate, reference}`.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, default_value = "system")]
    pub system: String,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    Anova(AnovaArgs),
    Alpha(AlphaArgs),
}

#[derive(Debug, Args)]
pub struct AnovaArgs {
    /// Gricean reports, one group each.
    #[arg(long = "report", required_unless_present = "groups")]
    pub reports: Vec<PathBuf>,
    #[arg(long, default_value = "rel")]
    pub metric: Metric,
    /// JSON object mapping group name to a list of values.
    #[arg(long, conflicts_with = "reports")]
    pub groups: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Rel,
    Info,
    Truth,
    Cla,
    Coh,
}

#[derive(Debug, Args)]
pub struct AlphaArgs {
    /// CSV, rows = raters, columns = items, blank = missing.
    #[arg(long)]
    pub ratings: PathBuf,
    #[arg(long, default_value = "interval")]
    pub level: Level,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Artifacts from `select eval`, `score gricean`, `score rouge`, `stats anova|alpha`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Items per kind (books, movies, songs, people).
    #[arg(long, default_value_t = 12)]
    pub per_kind: usize,
    #[arg(long, default_value_t = 500)]
    pub examples: usize,
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    match s {
        "train" => Ok(Split::Train),
        "validation" => Ok(Split::Validation),
        "test" => Ok(Split::Test),
        other => Err(format!("unknown split `{other}` (train, validation, test)")),
    }
}

/// Resolved configuration plus the output sink, shared by every command.
pub struct Ctx {
    pub cfg: RunConfig,
    pub out: Output,
}

impl Ctx {
    pub fn new(cfg: RunConfig, out_dir: PathBuf) -> Result<Self> {
        cfg.validate()?;
        let provenance = Provenance::of(&cfg);
        Ok(Ctx { cfg, out: Output::new(out_dir, provenance) })
    }

    pub fn graph(&self) -> Result<KnowledgeGraph> {
        let (Some(t), Some(s)) = (&self.cfg.paths.triples, &self.cfg.paths.surface) else {
            return Err(Error::Usage("no graph configured; set paths.triples and paths.surface or pass --triples/--surface".into()));
        };
        io::load_graph(t, s)
    }

    pub fn corpus_path(&self) -> Option<&std::path::Path> {
        self.cfg.paths.corpus.as_deref()
    }

    pub fn corpus(&self, g: &KnowledgeGraph) -> Result<LoadedCorpus> {
        let path = self
            .corpus_path()
            .ok_or_else(|| Error::Usage("no corpus configured; set paths.corpus or pass --corpus".into()))?;
        io::load_corpus(path, g, &self.cfg.split)
    }
}

pub fn split_name(s: Split) -> &'static str {
    match s {
        Split::Train => "train",
        Split::Validation => "validation",
        Split::Test => "test",
    }
}

pub fn nonempty_split(split: &CorpusSplit, which: Split) -> Result<&[kgfq_core::corpus::DialogueExample]> {
    let part = split.get(which);
    if part.is_empty() {
        return Err(Error::Usage(format!("{} split is empty", split_name(which))));
    }
    Ok(part)
}

/// Loads the config, applies global overrides and runs the command.
pub fn run(cli: Cli) -> Result<Output> {
    let g = &cli.global;
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.set_seed(seed);
    }
    for (slot, flag) in [
        (&mut cfg.paths.triples, &g.triples),
        (&mut cfg.paths.surface, &g.surface),
        (&mut cfg.paths.corpus, &g.corpus),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    commands::dispatch(cli.command, cfg, g.out.clone())
}
