//! Dialogue examples, validation against the graph, and split assignment.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kg::KnowledgeGraph;
use crate::rng::stable_hash;
use crate::{Error, Result};

/// One question-answer history with its annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueExample {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub mentions: Vec<String>,
    pub gold_entity: String,
    pub gold_relation: String,
    pub followup: String,
}

impl DialogueExample {
    /// Mentions with repeats removed, first occurrence kept.
    pub fn unique_mentions(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.mentions.iter().map(String::as_str).filter(|m| seen.insert(*m)).collect()
    }

    /// Reason this example cannot be used with `g`, if any.
    pub fn validate(&self, g: &KnowledgeGraph) -> core::result::Result<(), String> {
        if self.question.trim().is_empty() || self.answer.trim().is_empty() {
            return Err("empty question or answer".to_string());
        }
        if let Some(m) = self.mentions.iter().find(|m| g.entity_index(m).is_none()) {
            return Err(alloc::format!("mention `{m}` is not a graph entity"));
        }
        if !self.mentions.contains(&self.gold_entity) {
            return Err(alloc::format!("gold entity `{}` is not among the mentions", self.gold_entity));
        }
        match g.has_edge(&self.gold_entity, &self.gold_relation) {
            Ok(true) => Ok(()),
            Ok(false) => Err(alloc::format!(
                "gold relation `{}` does not leave `{}`",
                self.gold_relation, self.gold_entity
            )),
            Err(e) => Err(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.8, validation: 0.1, test: 0.1 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return Err(Error::InvalidArgument("split ratios must be non-negative".into()));
        }
        if libm::fabs(parts.iter().sum::<f64>() - 1.0) > 1e-9 {
            return Err(Error::InvalidArgument("split ratios must sum to 1".into()));
        }
        Ok(())
    }

    /// Bucket thresholds out of 1000: `[train_end, validation_end]`.
    fn thresholds(&self) -> [u64; 2] {
        let train = libm::round(self.train * 1000.0) as u64;
        let val = libm::round((self.train + self.validation) * 1000.0) as u64;
        [train, val]
    }
}

/// Split of one id: its FNV-1a hash modulo 1000 against cumulative ratio thresholds.
pub fn split_of(id: &str, ratios: &SplitRatios) -> Split {
    let bucket = stable_hash(id.as_bytes()) % 1000;
    let [train, val] = ratios.thresholds();
    if bucket < train {
        Split::Train
    } else if bucket < val {
        Split::Validation
    } else {
        Split::Test
    }
}

pub fn assign_splits<S: AsRef<str>>(ids: &[S], ratios: &SplitRatios) -> Result<BTreeMap<String, Split>> {
    if ids.is_empty() {
        return Err(Error::EmptyInput("no example ids to split"));
    }
    ratios.validate()?;
    Ok(ids.iter().map(|id| (id.as_ref().to_string(), split_of(id.as_ref(), ratios))).collect())
}

/// Examples grouped by split, each group sorted by id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: Vec<DialogueExample>,
    pub validation: Vec<DialogueExample>,
    pub test: Vec<DialogueExample>,
}

impl CorpusSplit {
    pub fn get(&self, split: Split) -> &[DialogueExample] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every example, in train / validation / test order.
    pub fn iter(&self) -> impl Iterator<Item = &DialogueExample> {
        self.train.iter().chain(&self.validation).chain(&self.test)
    }

    /// All examples in one split, for models trained and evaluated on the same set.
    pub fn single(train: Vec<DialogueExample>) -> Self {
        CorpusSplit { train, ..Default::default() }
    }
}

/// An example removed during loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRecord {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCorpus {
    pub split: CorpusSplit,
    pub dropped: Vec<DropRecord>,
}

/// Validates `examples` against `g` and distributes the survivors over splits.
///
/// Invalid or repeated examples are dropped with a reason. If more than half
/// of the input is invalid the graph and dataset are assumed mismatched and
/// loading fails.
pub fn build_corpus(examples: Vec<DialogueExample>, g: &KnowledgeGraph, ratios: &SplitRatios) -> Result<LoadedCorpus> {
    ratios.validate()?;
    let total = examples.len();
    let mut seen = BTreeSet::new();
    let mut dropped = Vec::new();
    let mut split = CorpusSplit::default();
    for ex in examples {
        if !seen.insert(ex.id.clone()) {
            dropped.push(DropRecord { id: ex.id, reason: "duplicate id".to_string() });
            continue;
        }
        if let Err(reason) = ex.validate(g) {
            dropped.push(DropRecord { id: ex.id, reason });
            continue;
        }
        match split_of(&ex.id, ratios) {
            Split::Train => split.train.push(ex),
            Split::Validation => split.validation.push(ex),
            Split::Test => split.test.push(ex),
        }
    }
    if dropped.len() * 2 > total {
        return Err(Error::TooManyInvalid { dropped: dropped.len(), total });
    }
    for part in [&mut split.train, &mut split.validation, &mut split.test] {
        part.sort_by(|a, b| a.id.cmp(&b.id));
    }
    Ok(LoadedCorpus { split, dropped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub unique_entities: usize,
    pub avg_mentions_per_example: f64,
    pub avg_relations_per_mention: f64,
    pub warnings: Vec<String>,
}

pub fn corpus_stats(split: &CorpusSplit, g: &KnowledgeGraph) -> CorpusStats {
    let mut warnings = Vec::new();
    for (name, part) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
        if part.is_empty() {
            warnings.push(alloc::format!("{name} split is empty"));
        }
    }
    let mut entities = BTreeSet::new();
    let mut mention_total = 0usize;
    let mut relation_total = 0usize;
    for ex in split.iter() {
        let mentions = ex.unique_mentions();
        mention_total += mentions.len();
        for m in mentions {
            entities.insert(m);
            relation_total += g.relations_of(m).map(|r| r.len()).unwrap_or(0);
        }
    }
    let n = split.len();
    CorpusStats {
        train: split.train.len(),
        validation: split.validation.len(),
        test: split.test.len(),
        unique_entities: entities.len(),
        avg_mentions_per_example: if n == 0 { 0.0 } else { mention_total as f64 / n as f64 },
        avg_relations_per_mention: if mention_total == 0 { 0.0 } else { relation_total as f64 / mention_total as f64 },
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn graph() -> KnowledgeGraph {
        KnowledgeGraph::from_sources("A\tr1\tB\nA\tr2\tC\nB\tr1\tC\n", "A\tAlpha\nB\tBeta\nC\tGamma\n").unwrap()
    }

    fn ex(id: &str, mentions: &[&str], gold: &str, rel: &str) -> DialogueExample {
        DialogueExample {
            id: id.into(),
            question: "Do you know Alpha?".into(),
            answer: "Yes, Alpha and Beta.".into(),
            mentions: mentions.iter().map(|m| m.to_string()).collect(),
            gold_entity: gold.into(),
            gold_relation: rel.into(),
            followup: "What is the r1 of Alpha?".into(),
        }
    }

    #[test]
    fn loads_valid_examples() {
        let exs = vec![ex("1", &["A", "B"], "A", "r1"), ex("2", &["B"], "B", "r1"), ex("3", &["A"], "A", "r2")];
        let loaded = build_corpus(exs, &graph(), &SplitRatios { train: 1.0, validation: 0.0, test: 0.0 }).unwrap();
        assert_eq!(loaded.split.train.len(), 3);
        assert!(loaded.dropped.is_empty());
    }

    #[test]
    fn drops_invalid_examples_with_reasons() {
        let exs = vec![
            ex("1", &["A", "B"], "A", "r1"),
            ex("2", &["B"], "A", "r1"),
            ex("3", &["A"], "A", "r2"),
            ex("1", &["A"], "A", "r2"),
        ];
        let loaded = build_corpus(exs, &graph(), &SplitRatios::default()).unwrap();
        assert_eq!(loaded.split.len(), 2);
        assert_eq!(loaded.dropped.len(), 2);
        assert!(loaded.dropped[0].reason.contains("not among the mentions"));
        assert_eq!(loaded.dropped[1].reason, "duplicate id");
    }

    #[test]
    fn mostly_invalid_input_is_an_error() {
        let exs = vec![ex("1", &["A"], "A", "r1"), ex("2", &["C"], "C", "r1"), ex("3", &["Z"], "Z", "r1")];
        assert!(matches!(
            build_corpus(exs, &graph(), &SplitRatios::default()),
            Err(Error::TooManyInvalid { dropped: 2, total: 3 })
        ));
    }

    #[test]
    fn split_assignment_examples() {
        let all_train = SplitRatios { train: 1.0, validation: 0.0, test: 0.0 };
        assert_eq!(assign_splits(&["only"], &all_train).unwrap()["only"], Split::Train);
        assert!(assign_splits::<&str>(&[], &all_train).is_err());
        let bad = SplitRatios { train: 0.5, validation: 0.1, test: 0.1 };
        assert!(assign_splits(&["x"], &bad).is_err());
    }

    #[test]
    fn stats_examples() {
        let split = CorpusSplit::single(vec![ex("1", &["A", "B"], "A", "r1"), ex("2", &["B"], "B", "r1")]);
        let stats = corpus_stats(&split, &graph());
        assert_eq!(stats.unique_entities, 2);
        assert_eq!(stats.avg_mentions_per_example, 1.5);
        // A has 2 relations, B has 1, B again 1
        assert!((stats.avg_relations_per_mention - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(stats.warnings.len(), 2);

        let empty = corpus_stats(&CorpusSplit::default(), &graph());
        assert_eq!(empty.avg_mentions_per_example, 0.0);
        assert_eq!(empty.warnings.len(), 3);
    }
}
