//! Triple store with surface-form entity linking.
//!
//! Entities are every triple head plus every id declared in the surface-form
//! source. A tail that names a known entity is an entity edge; any other tail
//! is a literal node (a year, a date, free text). Literals never count toward
//! the entity total used to normalize centrality.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use crate::text::{normalize, tokenize_with_spans};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub canonical_name: String,
    /// Extra surface forms, deduplicated after case folding. Never repeats the
    /// canonical name.
    pub aliases: Vec<String>,
}

impl Entity {
    /// Canonical name followed by the aliases.
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        core::iter::once(self.canonical_name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub id: String,
    pub label: String,
}

/// Relation ids double as labels, with underscores read as spaces.
pub fn relation_label(id: &str) -> String {
    id.replace('_', " ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Entity(usize),
    Literal(usize),
}

/// A stored triple in index form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub head: usize,
    pub relation: usize,
    pub tail: Node,
}

/// One line of a triples source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleRecord {
    pub line: usize,
    pub head: String,
    pub relation: String,
    pub tail: String,
}

/// One line of a surface-forms source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceRecord {
    pub line: usize,
    pub entity: String,
    pub canonical_name: String,
    pub aliases: Vec<String>,
}

fn data_lines(src: &str) -> impl Iterator<Item = (usize, &str)> {
    src.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Parses `head<TAB>relation<TAB>tail` lines.
pub fn parse_triples(src: &str) -> Result<Vec<TripleRecord>> {
    data_lines(src)
        .map(|(line, l)| {
            let fields: Vec<&str> = l.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Malformed {
                    line,
                    reason: alloc::format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            if fields.iter().any(|f| f.trim().is_empty()) {
                return Err(Error::Malformed { line, reason: "empty field".to_string() });
            }
            Ok(TripleRecord {
                line,
                head: fields[0].trim().to_string(),
                relation: fields[1].trim().to_string(),
                tail: fields[2].trim().to_string(),
            })
        })
        .collect()
}

/// Parses `entity<TAB>canonical_name<TAB>alias...` lines.
pub fn parse_surface_forms(src: &str) -> Result<Vec<SurfaceRecord>> {
    data_lines(src)
        .map(|(line, l)| {
            let mut fields = l.split('\t').map(str::trim);
            let entity = fields.next().unwrap_or_default();
            let canonical_name = fields.next().unwrap_or_default();
            if entity.is_empty() || canonical_name.is_empty() {
                return Err(Error::Malformed {
                    line,
                    reason: "expected entity id and non-empty canonical name".to_string(),
                });
            }
            Ok(SurfaceRecord {
                line,
                entity: entity.to_string(),
                canonical_name: canonical_name.to_string(),
                aliases: fields.filter(|a| !a.is_empty()).map(ToString::to_string).collect(),
            })
        })
        .collect()
}

/// Counts and out-degree histogram of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub entities: usize,
    pub relations: usize,
    pub literals: usize,
    pub triples: usize,
    /// out-degree -> number of entities with that out-degree
    pub degree_histogram: BTreeMap<usize, usize>,
}

/// Result of linking an utterance to the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub entity: String,
    /// Byte range of the matched alias in the input text.
    pub span: Range<usize>,
}

#[derive(Debug, Default)]
pub struct GraphBuilder {
    triples: BTreeSet<(String, String, String)>,
    names: BTreeMap<String, (String, Vec<String>, usize)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_triple(&mut self, head: &str, relation: &str, tail: &str) -> &mut Self {
        self.triples.insert((head.to_string(), relation.to_string(), tail.to_string()));
        self
    }

    /// Declares an entity's surface forms. Repeated declarations with the same
    /// canonical name merge their aliases.
    pub fn add_surface(&mut self, id: &str, canonical_name: &str, aliases: &[&str]) -> Result<&mut Self> {
        self.add_surface_record(SurfaceRecord {
            line: 0,
            entity: id.to_string(),
            canonical_name: canonical_name.to_string(),
            aliases: aliases.iter().map(ToString::to_string).collect(),
        })?;
        Ok(self)
    }

    fn add_surface_record(&mut self, rec: SurfaceRecord) -> Result<()> {
        if rec.canonical_name.trim().is_empty() {
            return Err(Error::Malformed { line: rec.line, reason: "empty canonical name".to_string() });
        }
        match self.names.get_mut(&rec.entity) {
            Some((name, aliases, _)) => {
                if *name != rec.canonical_name {
                    return Err(Error::ConflictingEntity {
                        id: rec.entity,
                        first: name.clone(),
                        second: rec.canonical_name,
                    });
                }
                aliases.extend(rec.aliases);
            }
            None => {
                self.names.insert(rec.entity, (rec.canonical_name, rec.aliases, rec.line));
            }
        }
        Ok(())
    }

    pub fn extend_triples(&mut self, records: impl IntoIterator<Item = TripleRecord>) -> &mut Self {
        for r in records {
            self.triples.insert((r.head, r.relation, r.tail));
        }
        self
    }

    pub fn extend_surface(&mut self, records: impl IntoIterator<Item = SurfaceRecord>) -> Result<&mut Self> {
        for r in records {
            self.add_surface_record(r)?;
        }
        Ok(self)
    }

    pub fn build(&self) -> Result<KnowledgeGraph> {
        let mut referenced: BTreeSet<&str> = BTreeSet::new();
        let mut entity_ids: BTreeSet<&str> = BTreeSet::new();
        let mut relation_ids: BTreeSet<&str> = BTreeSet::new();
        for (h, r, t) in &self.triples {
            entity_ids.insert(h);
            relation_ids.insert(r);
            referenced.insert(h);
            referenced.insert(t);
        }
        for (id, (_, _, line)) in &self.names {
            if !referenced.contains(id.as_str()) {
                return Err(Error::Malformed {
                    line: *line,
                    reason: alloc::format!("surface form for entity `{id}` that no triple references"),
                });
            }
            entity_ids.insert(id);
        }

        let entities: Vec<Entity> = entity_ids
            .iter()
            .map(|id| match self.names.get(*id) {
                Some((name, aliases, _)) => make_entity(id, name, aliases),
                None => make_entity(id, id, &[]),
            })
            .collect();
        let relations: Vec<Relation> = relation_ids
            .iter()
            .map(|id| Relation { id: id.to_string(), label: relation_label(id) })
            .collect();
        let entity_index: BTreeMap<String, usize> =
            entities.iter().enumerate().map(|(i, e)| (e.id.clone(), i)).collect();
        let relation_index: BTreeMap<String, usize> =
            relations.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();

        let literals: Vec<String> = self
            .triples
            .iter()
            .filter(|(_, _, t)| !entity_index.contains_key(t))
            .map(|(_, _, t)| t.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let literal_index: BTreeMap<&str, usize> =
            literals.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

        let mut edges: Vec<Edge> = self
            .triples
            .iter()
            .map(|(h, r, t)| Edge {
                head: entity_index[h],
                relation: relation_index[r],
                tail: match entity_index.get(t) {
                    Some(&e) => Node::Entity(e),
                    None => Node::Literal(literal_index[t.as_str()]),
                },
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();

        let mut adjacency = alloc::vec![BTreeSet::new(); entities.len()];
        let mut out_degree = alloc::vec![0usize; entities.len()];
        for e in &edges {
            adjacency[e.head].insert(e.relation);
            out_degree[e.head] += 1;
        }

        let mut surface: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut max_alias_tokens = 0;
        for (idx, ent) in entities.iter().enumerate() {
            for form in ent.surface_forms() {
                let key = normalize(form);
                if key.is_empty() {
                    continue;
                }
                max_alias_tokens = max_alias_tokens.max(key.split(' ').count());
                let ids = surface.entry(key).or_default();
                if !ids.contains(&idx) {
                    ids.push(idx);
                }
            }
        }

        Ok(KnowledgeGraph {
            entities,
            relations,
            literals,
            edges,
            entity_index,
            relation_index,
            surface,
            max_alias_tokens,
            adjacency,
            out_degree,
        })
    }
}

fn make_entity(id: &str, name: &str, aliases: &[String]) -> Entity {
    let mut seen = BTreeSet::new();
    seen.insert(normalize(name));
    let aliases = aliases
        .iter()
        .filter(|a| {
            let key = normalize(a);
            !key.is_empty() && seen.insert(key)
        })
        .cloned()
        .collect();
    Entity { id: id.to_string(), canonical_name: name.to_string(), aliases }
}

/// Immutable knowledge graph. Build with [`GraphBuilder`] or [`KnowledgeGraph::from_sources`].
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    entities: Vec<Entity>,
    relations: Vec<Relation>,
    literals: Vec<String>,
    edges: Vec<Edge>,
    entity_index: BTreeMap<String, usize>,
    relation_index: BTreeMap<String, usize>,
    surface: BTreeMap<String, Vec<usize>>,
    max_alias_tokens: usize,
    adjacency: Vec<BTreeSet<usize>>,
    out_degree: Vec<usize>,
}

impl KnowledgeGraph {
    /// Builds a graph from the text of a triples source and a surface-forms source.
    pub fn from_sources(triples: &str, surface_forms: &str) -> Result<Self> {
        let mut b = GraphBuilder::new();
        b.extend_triples(parse_triples(triples)?);
        b.extend_surface(parse_surface_forms(surface_forms)?)?;
        b.build()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn literals(&self) -> &[String] {
        &self.literals
    }

    /// Distinct triples, sorted by (head, relation, tail) index.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.entity_index.get(id).copied()
    }

    pub fn relation_index(&self, id: &str) -> Option<usize> {
        self.relation_index.get(id).copied()
    }

    pub fn entity(&self, id: &str) -> Result<&Entity> {
        self.entity_index(id)
            .map(|i| &self.entities[i])
            .ok_or_else(|| Error::UnknownEntity(id.to_string()))
    }

    pub fn relation(&self, id: &str) -> Result<&Relation> {
        self.relation_index(id)
            .map(|i| &self.relations[i])
            .ok_or_else(|| Error::UnknownRelation(id.to_string()))
    }

    fn require_entity(&self, id: &str) -> Result<usize> {
        self.entity_index(id).ok_or_else(|| Error::UnknownEntity(id.to_string()))
    }

    fn require_relation(&self, id: &str) -> Result<usize> {
        self.relation_index(id).ok_or_else(|| Error::UnknownRelation(id.to_string()))
    }

    /// Id of a tail node, entity or literal.
    pub fn node_name(&self, node: Node) -> &str {
        match node {
            Node::Entity(i) => &self.entities[i].id,
            Node::Literal(i) => &self.literals[i],
        }
    }

    pub fn out_degree(&self, id: &str) -> Result<usize> {
        Ok(self.out_degree[self.require_entity(id)?])
    }

    /// Out-degree normalized by the largest possible out-degree, |entities| - 1.
    pub fn centrality(&self, id: &str) -> Result<f64> {
        let idx = self.require_entity(id)?;
        self.centrality_of(idx)
    }

    pub(crate) fn centrality_of(&self, idx: usize) -> Result<f64> {
        if self.entities.len() < 2 {
            return Err(Error::DegenerateGraph("centrality needs at least two entities"));
        }
        let c = self.out_degree[idx] as f64 / (self.entities.len() - 1) as f64;
        Ok(c.clamp(0.0, 1.0))
    }

    /// Ids of the relations leaving `id`, sorted.
    pub fn relations_of(&self, id: &str) -> Result<Vec<&str>> {
        let idx = self.require_entity(id)?;
        Ok(self.adjacency[idx].iter().map(|&r| self.relations[r].id.as_str()).collect())
    }

    pub fn relation_indices_of(&self, entity: usize) -> &BTreeSet<usize> {
        &self.adjacency[entity]
    }

    pub fn has_edge(&self, entity: &str, relation: &str) -> Result<bool> {
        let e = self.require_entity(entity)?;
        let r = self.require_relation(relation)?;
        Ok(self.adjacency[e].contains(&r))
    }

    pub fn contains_edge(&self, edge: &Edge) -> bool {
        self.edges.binary_search(edge).is_ok()
    }

    /// Finds the entity whose surface form gives the longest token-aligned,
    /// case-folded match in `text`. Ties go to the earliest match, then to the
    /// smallest entity id.
    pub fn link_entity(&self, text: &str) -> Option<Link> {
        let tokens = tokenize_with_spans(text);
        let mut best: Option<(usize, usize, usize)> = None; // (len, start, entity)
        for start in 0..tokens.len() {
            let longest = self.max_alias_tokens.min(tokens.len() - start);
            for len in (1..=longest).rev() {
                if best.is_some_and(|(blen, _, _)| len <= blen) {
                    break;
                }
                let key = tokens[start..start + len]
                    .iter()
                    .map(|t| t.text.as_str())
                    .collect::<Vec<_>>()
                    .join(" ");
                if let Some(ids) = self.surface.get(&key) {
                    let entity = *ids.iter().min().expect("surface entries are non-empty");
                    best = Some((len, start, entity));
                    break;
                }
            }
        }
        best.map(|(len, start, entity)| Link {
            entity: self.entities[entity].id.clone(),
            span: tokens[start].span.start..tokens[start + len - 1].span.end,
        })
    }

    pub fn stats(&self) -> GraphStats {
        let mut degree_histogram = BTreeMap::new();
        for &d in &self.out_degree {
            *degree_histogram.entry(d).or_insert(0) += 1;
        }
        GraphStats {
            entities: self.entities.len(),
            relations: self.relations.len(),
            literals: self.literals.len(),
            triples: self.edges.len(),
            degree_histogram,
        }
    }
}
