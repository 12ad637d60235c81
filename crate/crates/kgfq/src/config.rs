//! Run configuration: one TOML tree, overridable from the command line.
//!
//! Relative paths are resolved against the directory of the config file.
//! The top-level `seed` is the only seed; every stage derives its own
//! stream from it by name.

use std::path::{Path, PathBuf};

use kgfq_core::corpus::SplitRatios;
use kgfq_core::embed::EmbedTrainConfig;
use kgfq_core::generation::{validate_template, GenerationConfig, DEFAULT_EOS, DEFAULT_TEMPLATE};
use kgfq_core::gricean::{NGramConfig, RelMode};
use kgfq_core::nn::TrainConfig;
use kgfq_core::selection::Variant;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub split: SplitRatios,
    pub train: TrainConfig,
    pub embed: EmbedTrainConfig,
    pub selection: SelectionSection,
    pub generation: GenerationSection,
    pub gricean: GriceanSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub triples: Option<PathBuf>,
    pub surface: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionSection {
    pub variant: Variant,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection { variant: Variant::Mlp }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSection {
    pub template: String,
    pub eos: String,
    /// Realizer rule file; the built-in table when absent.
    pub rules: Option<PathBuf>,
    #[serde(flatten)]
    pub decoding: GenerationConfig,
}

impl Default for GenerationSection {
    fn default() -> Self {
        GenerationSection {
            template: DEFAULT_TEMPLATE.into(),
            eos: DEFAULT_EOS.into(),
            rules: None,
            decoding: GenerationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GriceanSection {
    pub rel_mode: RelMode,
    pub ngram: NGramConfig,
    pub negative_ratio: usize,
    pub clarity_external: Option<PathBuf>,
    pub coherence_external: Option<PathBuf>,
    /// Fail when an external file lacks a question instead of falling back
    /// to the built-in scorer.
    pub require_external: bool,
}

impl Default for GriceanSection {
    fn default() -> Self {
        GriceanSection {
            rel_mode: RelMode::Gold,
            ngram: NGramConfig::default(),
            negative_ratio: 1,
            clarity_external: None,
            coherence_external: None,
            require_external: false,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            paths: Paths::default(),
            split: SplitRatios::default(),
            train: TrainConfig::desk(),
            embed: EmbedTrainConfig { dim: 32, ..EmbedTrainConfig::default() },
            selection: SelectionSection::default(),
            generation: GenerationSection::default(),
            gricean: GriceanSection::default(),
        }
    }
}

impl RunConfig {
    /// Parses `text`; `base` anchors relative paths.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let raw: toml::Value = toml::from_str(text).map_err(|e| Error::Config(one_line(&e.to_string())))?;
        for block in ["train", "embed"] {
            if raw.get(block).and_then(|b| b.get("seed")).is_some() {
                return Err(Error::Config(format!("`{block}.seed` is not configurable; set the top-level `seed`")));
            }
        }
        let mut cfg: RunConfig = raw.clone().try_into().map_err(|e: toml::de::Error| Error::Config(one_line(&e.to_string())))?;
        // nested core blocks accept unknown keys, so compare against what was understood
        let understood = toml::Value::try_from(&cfg).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(key) = unknown_key(&raw, &understood, "") {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        cfg.resolve_paths(base);
        cfg.sync_seeds();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_toml(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.paths.triples);
        fix(&mut self.paths.surface);
        fix(&mut self.paths.corpus);
        fix(&mut self.generation.rules);
        fix(&mut self.gricean.clarity_external);
        fix(&mut self.gricean.coherence_external);
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.sync_seeds();
    }

    fn sync_seeds(&mut self) {
        self.train.seed = self.seed;
        self.embed.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.train.validate()?;
        self.embed.validate()?;
        self.gricean.ngram.validate()?;
        self.generation.decoding.validate()?;
        validate_template(&self.generation.template)?;
        if self.generation.eos.is_empty() {
            return Err(Error::Config("generation.eos must not be empty".into()));
        }
        if self.gricean.negative_ratio == 0 {
            return Err(Error::Config("gricean.negative_ratio must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the resolved configuration, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The documented default configuration as TOML.
    pub fn default_toml() -> String {
        let mut v = toml::Value::try_from(RunConfig::default()).expect("default config serializes");
        for block in ["train", "embed"] {
            if let Some(t) = v.get_mut(block).and_then(toml::Value::as_table_mut) {
                t.remove("seed");
            }
        }
        toml::to_string_pretty(&v).expect("default config serializes")
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// First key present in `given` but absent from `understood`.
fn unknown_key(given: &toml::Value, understood: &toml::Value, prefix: &str) -> Option<String> {
    let (toml::Value::Table(g), toml::Value::Table(u)) = (given, understood) else { return None };
    for (k, v) in g {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match u.get(k) {
            Some(inner) => {
                if let Some(bad) = unknown_key(v, inner, &path) {
                    return Some(bad);
                }
            }
            None => return Some(path),
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        let c = RunConfig::from_toml("", Path::new(".")).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn default_toml_round_trips() {
        let c = RunConfig::from_toml(&RunConfig::default_toml(), Path::new(".")).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn partial_blocks_and_paths() {
        let text = "seed = 7\n[paths]\ntriples = \"kg/t.tsv\"\n[train]\nepochs = 3\n[gricean]\nrel_mode = \"context-set\"\n[gricean.ngram]\norder = 2\nlambdas = [0.5, 0.5]\n";
        let c = RunConfig::from_toml(text, Path::new("/data")).unwrap();
        assert_eq!(c.paths.triples.as_deref(), Some(Path::new("/data/kg/t.tsv")));
        assert_eq!((c.train.epochs, c.train.seed, c.embed.seed), (3, 7, 7));
        assert_eq!(c.gricean.rel_mode, RelMode::ContextSet);
        assert_eq!(c.gricean.ngram.min_count, 2);
    }

    #[test]
    fn unknown_and_invalid_keys_are_rejected() {
        for bad in ["bogus = 1", "[train]\nepoch = 3", "[embed]\nseed = 1", "[train]\nepochs = 0", "[generation]\ntemplate = \"{entity}\""] {
            let err = RunConfig::from_toml(bad, Path::new(".")).unwrap_err();
            assert!(!err.to_string().contains('\n'), "{err}");
        }
        assert!(RunConfig::from_toml("[embed]\nrelation_dim = 8", Path::new(".")).is_ok());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.set_seed(1);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
