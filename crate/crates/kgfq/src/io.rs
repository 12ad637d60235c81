//! Readers for every input format the driver accepts.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use kgfq_core::corpus::{build_corpus, DialogueExample, LoadedCorpus, SplitRatios};
use kgfq_core::gricean::{ClarityScore, CoherenceScore, QaContext, QuestionInput};
use kgfq_core::kg::{parse_surface_forms, parse_triples, Edge, GraphBuilder, KnowledgeGraph, Node};
use kgfq_core::selection::ContextVectors;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn located(path: &Path, e: kgfq_core::Error) -> Error {
    match e {
        kgfq_core::Error::Malformed { line, reason } => Error::Parse { path: path.to_path_buf(), line, reason },
        other => Error::Core(other),
    }
}

/// Builds the graph from a triples TSV and a surface-forms TSV.
pub fn load_graph(triples: &Path, surface: &Path) -> Result<KnowledgeGraph> {
    let t = parse_triples(&read_text(triples)?).map_err(|e| located(triples, e))?;
    let s = parse_surface_forms(&read_text(surface)?).map_err(|e| located(surface, e))?;
    let mut b = GraphBuilder::new();
    b.extend_triples(t);
    b.extend_surface(s).map_err(|e| located(surface, e))?;
    Ok(b.build()?)
}

/// Parses JSON Lines. Blank lines are skipped, as is a metadata line (an
/// object with `header` or `provenance` but no `id`), which external
/// scorers may put first.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse = |reason: String| Error::Parse { path: path.to_path_buf(), line: i + 1, reason };
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| parse(e.to_string()))?;
        if let Some(obj) = v.as_object() {
            if !obj.contains_key("id") && (obj.contains_key("header") || obj.contains_key("provenance")) {
                continue;
            }
        }
        out.push(serde_json::from_value(v).map_err(|e| parse(e.to_string()))?);
    }
    Ok(out)
}

/// Loads, validates and splits a dataset file.
pub fn load_corpus(path: &Path, g: &KnowledgeGraph, ratios: &SplitRatios) -> Result<LoadedCorpus> {
    let examples: Vec<DialogueExample> = read_jsonl(path)?;
    let loaded = build_corpus(examples, g, ratios)?;
    for d in &loaded.dropped {
        log::warn!("dropped example `{}`: {}", d.id, d.reason);
    }
    Ok(loaded)
}

/// One line of a questions file: the full `{id, context, question}` form or
/// the generated-output form `{id, question}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionLine {
    pub id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<QaContext>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_entity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mentions: Option<Vec<String>>,
}

/// Reads questions and fills context, gold entity and mentions from the
/// corpus example with the same id where the line leaves them out.
pub fn read_questions(path: &Path, corpus: Option<&[&DialogueExample]>) -> Result<Vec<QuestionInput>> {
    let lines: Vec<QuestionLine> = read_jsonl(path)?;
    let by_id: BTreeMap<&str, &DialogueExample> =
        corpus.unwrap_or_default().iter().map(|e| (e.id.as_str(), *e)).collect();
    lines
        .into_iter()
        .map(|l| {
            let ex = by_id.get(l.id.as_str());
            let context = match (l.context, ex) {
                (Some(c), _) => c,
                (None, Some(ex)) => QaContext { question: ex.question.clone(), answer: ex.answer.clone() },
                (None, None) => {
                    return Err(Error::schema(path, format!("question `{}` has no context and no corpus example", l.id)))
                }
            };
            Ok(QuestionInput {
                gold_entity: l.gold_entity.or_else(|| ex.map(|e| e.gold_entity.clone())),
                mentions: l.mentions.or_else(|| ex.map(|e| e.mentions.clone())).unwrap_or_default(),
                id: l.id,
                context,
                question: l.question,
            })
        })
        .collect()
}

pub fn read_clarity(path: &Path) -> Result<Vec<ClarityScore>> {
    read_jsonl(path)
}

pub fn read_coherence(path: &Path) -> Result<Vec<CoherenceScore>> {
    read_jsonl(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextVectorLine {
    pub id: String,
    pub vector: Vec<f64>,
}

/// `{id, vector}` lines; ids unique, every vector the same non-zero length.
pub fn read_context_vectors(path: &Path) -> Result<ContextVectors> {
    let lines: Vec<ContextVectorLine> = read_jsonl(path)?;
    let mut out = ContextVectors::new();
    let mut dim = None;
    for l in lines {
        if l.vector.is_empty() || l.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::schema(path, format!("vector of `{}` is empty or non-finite", l.id)));
        }
        if *dim.get_or_insert(l.vector.len()) != l.vector.len() {
            return Err(Error::schema(path, format!("vector of `{}` has a different length", l.id)));
        }
        if out.insert(l.id.clone(), l.vector).is_some() {
            return Err(Error::schema(path, format!("duplicate id `{}`", l.id)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RougePair {
    pub id: String,
    pub candidate: String,
    pub reference: String,
}

/// Rater x item matrix; blank cells are missing. A first row or first column
/// that is not numeric is taken as labels and skipped.
pub fn read_ratings(path: &Path) -> Result<Vec<Vec<Option<f64>>>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_path(path).map_err(|e| csv_error(path, e))?;
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        rows.push((i + 1, rec.iter().map(|c| c.trim().to_string()).collect()));
    }
    let numeric = |c: &str| c.is_empty() || c.parse::<f64>().is_ok();
    if rows.first().is_some_and(|(_, r)| !r.iter().all(|c| numeric(c))) {
        rows.remove(0);
    }
    if !rows.is_empty() && rows.iter().all(|(_, r)| r.first().is_some_and(|c| !numeric(c))) {
        rows.iter_mut().for_each(|(_, r)| {
            r.remove(0);
        });
    }
    rows.iter()
        .map(|(line, r)| {
            r.iter()
                .map(|c| {
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>().map(Some).map_err(|_| Error::Parse {
                            path: path.to_path_buf(),
                            line: *line,
                            reason: format!("rating `{c}` is not a number"),
                        })
                    }
                })
                .collect()
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse { path: path.to_path_buf(), line, reason: e.to_string() }
}

/// Triples TSV resolved against `g`; tails may be entities or literals
/// already in the graph.
pub fn read_triples_against(path: &Path, g: &KnowledgeGraph) -> Result<Vec<Edge>> {
    let records = parse_triples(&read_text(path)?).map_err(|e| located(path, e))?;
    let literal_index: BTreeMap<&str, usize> = g.literals().iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    records
        .iter()
        .map(|r| {
            let bad = |reason: String| Error::Parse { path: path.to_path_buf(), line: r.line, reason };
            let head = g.entity_index(&r.head).ok_or_else(|| bad(format!("unknown entity `{}`", r.head)))?;
            let relation = g.relation_index(&r.relation).ok_or_else(|| bad(format!("unknown relation `{}`", r.relation)))?;
            let tail = match (g.entity_index(&r.tail), literal_index.get(r.tail.as_str())) {
                (Some(i), _) => Node::Entity(i),
                (None, Some(&i)) => Node::Literal(i),
                (None, None) => return Err(bad(format!("unknown tail `{}`", r.tail))),
            };
            Ok(Edge { head, relation, tail })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn jsonl_reports_line_numbers_and_skips_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(dir.path(), "c.jsonl", "{\"header\": {\"tokenizer\": \"gpt2\"}}\n{\"id\": \"a\", \"p_next\": 0.7}\n\n{\"id\": 3}\n");
        match read_coherence(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        let p = file(dir.path(), "d.jsonl", "{\"header\": {}}\n{\"id\": \"a\", \"p_next\": 0.7}\n");
        assert_eq!(read_coherence(&p).unwrap(), vec![CoherenceScore { id: "a".into(), p_next: 0.7 }]);
    }

    #[test]
    fn ratings_with_labels_and_blanks() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(dir.path(), "r.csv", "rater,i1,i2,i3\nann,1,,3\nbob,1,2,\n");
        assert_eq!(read_ratings(&p).unwrap(), vec![vec![Some(1.0), None, Some(3.0)], vec![Some(1.0), Some(2.0), None]]);
        let p = file(dir.path(), "s.csv", "1,2\n1,x\n");
        assert!(matches!(read_ratings(&p), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn graph_errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let t = file(dir.path(), "t.tsv", "a\tr\tb\nbroken line\n");
        let s = file(dir.path(), "s.tsv", "b\tB\n");
        let err = load_graph(&t, &s).unwrap_err().to_string();
        assert!(err.contains("t.tsv:2"), "{err}");
    }

    #[test]
    fn questions_join_the_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let ex = DialogueExample {
            id: "x".into(),
            question: "Q".into(),
            answer: "A".into(),
            mentions: vec!["e".into()],
            gold_entity: "e".into(),
            gold_relation: "r".into(),
            followup: "F".into(),
        };
        let p = file(dir.path(), "q.jsonl", "{\"id\": \"x\", \"question\": \"who?\"}\n");
        let qs = read_questions(&p, Some(&[&ex])).unwrap();
        assert_eq!(qs[0].context.answer, "A");
        assert_eq!(qs[0].gold_entity.as_deref(), Some("e"));
        assert!(read_questions(&p, None).is_err());
    }

    #[test]
    fn context_vectors_must_agree_in_length() {
        let dir = tempfile::tempdir().unwrap();
        let p = file(dir.path(), "v.jsonl", "{\"id\": \"a\", \"vector\": [1.0, 2.0]}\n{\"id\": \"b\", \"vector\": [1.0]}\n");
        assert!(read_context_vectors(&p).is_err());
        let p = file(dir.path(), "w.jsonl", "{\"id\": \"a\", \"vector\": [1.0, 2.0]}\n");
        assert_eq!(read_context_vectors(&p).unwrap()["a"], vec![1.0, 2.0]);
    }
}
