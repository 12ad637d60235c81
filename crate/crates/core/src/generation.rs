//! Prompts, sequence serialization for an external generator, and a
//! rule-based question realizer for end-to-end runs without one.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::corpus::{DialogueExample, DropRecord};
use crate::kg::KnowledgeGraph;
use crate::{Error, Result};

pub const DEFAULT_TEMPLATE: &str = "How to ask about the {relation} of {entity}";
pub const DEFAULT_EOS: &str = "<|endoftext|>";

/// Decoding settings handed to the external generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub beam_size: usize,
    pub max_tokens: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig { beam_size: 2, max_tokens: 40 }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 || self.max_tokens == 0 {
            return Err(Error::InvalidArgument("beam_size and max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Checks that `template` has exactly one `{entity}` and one `{relation}` slot.
pub fn validate_template(template: &str) -> Result<()> {
    for slot in ["{entity}", "{relation}"] {
        let n = template.matches(slot).count();
        if n != 1 {
            return Err(Error::InvalidArgument(format!("template must contain {slot} exactly once (found {n})")));
        }
    }
    Ok(())
}

/// Fills the prompt template with the relation label and entity name.
///
/// Refuses pairs that are not an edge of `g` unless `allow_absent` is set,
/// so prompts are truthful by construction.
pub fn build_prompt(
    g: &KnowledgeGraph,
    entity: &str,
    relation: &str,
    template: Option<&str>,
    allow_absent: bool,
) -> Result<String> {
    let template = template.unwrap_or(DEFAULT_TEMPLATE);
    validate_template(template)?;
    let e = g.entity(entity)?;
    let r = g.relation(relation)?;
    if !allow_absent && !g.has_edge(entity, relation)? {
        return Err(Error::InvalidArgument(format!("`{entity}` has no `{relation}` edge")));
    }
    Ok(template.replace("{relation}", &r.label).replace("{entity}", &e.canonical_name))
}

/// Segments joined with an end-of-sequence marker after each one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerializedSequence {
    pub text: String,
    /// Byte spans of Q, A, P and (training form only) Y. Each span is followed
    /// directly by `eos`, so spans plus markers tile `text`.
    pub spans: Vec<Range<usize>>,
    pub eos: String,
}

impl SerializedSequence {
    pub fn segment(&self, i: usize) -> Option<&str> {
        self.spans.get(i).map(|s| &self.text[s.clone()])
    }

    pub fn is_training(&self) -> bool {
        self.spans.len() == 4
    }
}

/// `Q eos A eos P eos [Y eos]`.
pub fn serialize(q: &str, a: &str, p: &str, y: Option<&str>, eos: &str) -> Result<SerializedSequence> {
    if eos.is_empty() {
        return Err(Error::InvalidArgument("eos marker must not be empty".into()));
    }
    let mut text = String::new();
    let mut spans = Vec::with_capacity(4);
    for (name, seg) in [("question", Some(q)), ("answer", Some(a)), ("prompt", Some(p)), ("follow-up", y)] {
        let Some(seg) = seg else { continue };
        if seg.is_empty() {
            return Err(Error::InvalidArgument(format!("{name} segment is empty")));
        }
        if seg.contains(eos) {
            return Err(Error::InvalidArgument(format!("{name} segment contains the eos marker")));
        }
        let start = text.len();
        text.push_str(seg);
        spans.push(start..text.len());
        text.push_str(eos);
    }
    Ok(SerializedSequence { text, spans, eos: eos.to_string() })
}

/// Inverse of [`serialize`]: splits on `eos` and requires a trailing marker.
pub fn parse_sequence(text: &str, eos: &str) -> Result<SerializedSequence> {
    if eos.is_empty() {
        return Err(Error::InvalidArgument("eos marker must not be empty".into()));
    }
    let body = text
        .strip_suffix(eos)
        .ok_or_else(|| Error::Malformed { line: 1, reason: "sequence does not end with the eos marker".into() })?;
    let parts: Vec<&str> = body.split(eos).collect();
    if !(3..=4).contains(&parts.len()) || parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Malformed {
            line: 1,
            reason: format!("expected 3 or 4 non-empty segments, found {}", parts.len()),
        });
    }
    serialize(parts[0], parts[1], parts[2], parts.get(3).copied(), eos)
}

/// One realizer rule: `|`-separated substrings of a relation id and a frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizerRule {
    pub patterns: Vec<String>,
    pub frame: String,
}

impl RealizerRule {
    fn new(patterns: &str, frame: &str) -> Result<Self> {
        if !frame.contains("{entity}") {
            return Err(Error::InvalidArgument(format!("frame `{frame}` has no {{entity}} slot")));
        }
        let patterns: Vec<String> =
            patterns.split('|').map(str::trim).filter(|p| !p.is_empty()).map(str::to_string).collect();
        if patterns.is_empty() {
            return Err(Error::InvalidArgument("rule has no relation pattern".into()));
        }
        Ok(RealizerRule { patterns, frame: frame.to_string() })
    }

    fn matches(&self, relation: &str) -> bool {
        self.patterns.iter().any(|p| relation.contains(p.as_str()))
    }
}

pub const FALLBACK_FRAME: &str = "What is the {relation} of {entity}?";

const DEFAULT_RULES: &str = "\
release_year|released|publication_date|release_date\tWhen was {entity} released?
written_by|author|writer\tWho wrote {entity}?
directed_by|director\tWho directed {entity}?
starred|starring|actor\tWho starred in {entity}?
performed_by|singer|artist|performer\tWho performed {entity}?
born_in|birthplace|place_of_birth\tWhere was {entity} born?
genre\tWhat genre is {entity}?
spouse|parent|child|sibling|father|mother|founder|composer|producer\tWho is the {relation} of {entity}?
";

/// Ordered rule table; the first matching rule wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realizer {
    pub rules: Vec<RealizerRule>,
}

impl Default for Realizer {
    fn default() -> Self {
        Realizer::from_tsv(DEFAULT_RULES).expect("built-in rules parse")
    }
}

impl Realizer {
    /// The built-in table as TSV, a starting point for custom rule files.
    pub fn default_tsv() -> &'static str {
        DEFAULT_RULES
    }

    /// Parses `relation_pattern<TAB>frame` lines; `#` starts a comment line.
    pub fn from_tsv(src: &str) -> Result<Self> {
        let mut rules = Vec::new();
        for (i, line) in src.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let (Some(pattern), Some(frame), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Malformed { line: i + 1, reason: "expected 2 tab-separated columns".into() });
            };
            let rule = RealizerRule::new(pattern, frame.trim())
                .map_err(|e| Error::Malformed { line: i + 1, reason: e.to_string() })?;
            rules.push(rule);
        }
        Ok(Realizer { rules })
    }

    pub fn frame_for(&self, relation: &str) -> &str {
        self.rules.iter().find(|r| r.matches(relation)).map_or(FALLBACK_FRAME, |r| r.frame.as_str())
    }

    /// Question about `relation` of `entity`, always ending in `?`.
    pub fn realize(&self, g: &KnowledgeGraph, entity: &str, relation: &str) -> Result<String> {
        let e = g.entity(entity)?;
        let r = g.relation(relation)?;
        let mut q = self.frame_for(relation).replace("{relation}", &r.label).replace("{entity}", &e.canonical_name);
        if !q.ends_with('?') {
            q = format!("{}?", q.trim_end_matches(['.', '!', ' ']));
        }
        Ok(q)
    }
}

/// Question for `(entity, relation)` using the built-in rules.
pub fn realize_question(g: &KnowledgeGraph, entity: &str, relation: &str) -> Result<String> {
    Realizer::default().realize(g, entity, relation)
}

/// Fine-tuning file contents plus the examples that could not be serialized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinetuneExport {
    pub text: String,
    pub lines: usize,
    pub skipped: Vec<DropRecord>,
}

/// One training sequence per example, ordered by id, one per line.
pub fn export_finetune(
    examples: &[DialogueExample],
    g: &KnowledgeGraph,
    template: Option<&str>,
    eos: &str,
) -> Result<FinetuneExport> {
    let mut sorted: Vec<&DialogueExample> = examples.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = FinetuneExport { text: String::new(), lines: 0, skipped: Vec::new() };
    for ex in sorted {
        let seq = build_prompt(g, &ex.gold_entity, &ex.gold_relation, template, false).and_then(|p| {
            if [&ex.question, &ex.answer, &p, &ex.followup].iter().any(|s| s.contains(['\n', '\r'])) {
                return Err(Error::InvalidArgument("segment contains a line break".into()));
            }
            serialize(&ex.question, &ex.answer, &p, Some(&ex.followup), eos)
        });
        match seq {
            Ok(seq) => {
                out.text.push_str(&seq.text);
                out.text.push('\n');
                out.lines += 1;
            }
            Err(e) => out.skipped.push(DropRecord { id: ex.id.clone(), reason: e.to_string() }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    fn t5() -> (KnowledgeGraph, Vec<DialogueExample>) {
        let (w, exs) = synth::worked_example().unwrap();
        (w.graph, exs)
    }

    #[test]
    fn prompt_examples() {
        let (g, _) = t5();
        assert_eq!(
            build_prompt(&g, "when_im_gone", "release_year", None, false).unwrap(),
            "How to ask about the release year of When I'm Gone"
        );
        assert!(build_prompt(&g, "when_im_gone", "written_by", None, false).is_err());
        assert_eq!(
            build_prompt(&g, "when_im_gone", "written_by", None, true).unwrap(),
            "How to ask about the written by of When I'm Gone"
        );
        assert!(build_prompt(&g, "when_im_gone", "genre", Some("{entity} {entity} {relation}"), false).is_err());
    }

    #[test]
    fn prompt_links_back_to_its_entity() {
        let (g, _) = t5();
        for e in g.entities() {
            for r in g.relations_of(&e.id).unwrap() {
                let p = build_prompt(&g, &e.id, r, None, false).unwrap();
                let link = g.link_entity(&p).unwrap();
                assert_eq!(link.entity, e.id, "{p}");
            }
        }
    }

    #[test]
    fn serialization_layouts() {
        let s = serialize("Q", "A", "P", Some("Y"), "|").unwrap();
        assert_eq!(s.text, "Q|A|P|Y|");
        assert_eq!(serialize("Q", "A", "P", None, "|").unwrap().text, "Q|A|P|");
        assert_eq!(parse_sequence(&s.text, "|").unwrap(), s);
        assert_eq!(s.segment(3), Some("Y"));
        assert!(serialize("Q|x", "A", "P", None, "|").is_err());
        assert!(serialize("", "A", "P", None, "|").is_err());
        assert!(parse_sequence("Q|A|P", "|").is_err());
    }

    #[test]
    fn realizer_examples() {
        let (g, _) = t5();
        assert_eq!(realize_question(&g, "when_im_gone", "release_year").unwrap(), "When was When I'm Gone released?");
        assert_eq!(
            realize_question(&g, "the_runaway_jury_book", "subject").unwrap(),
            "What is the subject of The Runaway Jury?"
        );
        assert_eq!(realize_question(&g, "the_runaway_jury_book", "written_by").unwrap(), "Who wrote The Runaway Jury?");
        assert_eq!(realize_question(&g, "runaway_jury_film", "based_on").unwrap(), "What is the based on of Runaway Jury?");
    }

    #[test]
    fn custom_rules_and_errors() {
        let r = Realizer::from_tsv("# comment\nspouse|partner\tWho married {entity}\n").unwrap();
        assert_eq!(r.frame_for("has_partner"), "Who married {entity}");
        assert_eq!(r.frame_for("genre"), FALLBACK_FRAME);
        assert!(matches!(Realizer::from_tsv("a\tb\tc\n"), Err(Error::Malformed { line: 1, .. })));
        assert!(matches!(Realizer::from_tsv("\nx\tno slot\n"), Err(Error::Malformed { line: 2, .. })));
    }

    #[test]
    fn export_worked_example() {
        let (g, exs) = t5();
        let out = export_finetune(&exs, &g, None, DEFAULT_EOS).unwrap();
        assert_eq!(out.lines, 2);
        assert!(out.skipped.is_empty());
        assert!(out.text.lines().all(|l| l.ends_with(DEFAULT_EOS)));
        let jury = out.text.lines().nth(1).unwrap();
        let parts = [
            "Do you know The Runaway Jury?",
            "The Runaway Jury is written by John Grisham",
            "How to ask about the subject of The Runaway Jury",
            "What is the subject of The Runaway Jury?",
        ];
        let positions: Vec<usize> = parts.iter().map(|p| jury.find(p).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(out, export_finetune(&exs, &g, None, DEFAULT_EOS).unwrap());

        let mut bad = exs.clone();
        bad[0].gold_relation = "genre".into();
        bad[1].followup = "two\nlines".into();
        let out = export_finetune(&bad, &g, None, DEFAULT_EOS).unwrap();
        assert_eq!((out.lines, out.skipped.len()), (1, 1));
    }
}
