//! Translational knowledge-graph embeddings (TransE, TransR, TransD).
//!
//! Distances are norms of a translation residual; lower is more plausible.
//! Literal tails are embedded alongside entities so that relations such as
//! `release_year` stay scoreable.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kg::{Edge, KnowledgeGraph, Node};
use crate::nn::{dot, Param, Parameterized};
use crate::rng::substream;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "transE")]
    TransE,
    #[serde(rename = "transR")]
    TransR,
    #[serde(rename = "transD")]
    TransD,
}

impl core::fmt::Display for Family {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            Family::TransE => "transE",
            Family::TransR => "transR",
            Family::TransD => "transD",
        })
    }
}

impl core::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(Family::TransE),
            "transr" => Ok(Family::TransR),
            "transd" => Ok(Family::TransD),
            _ => Err(Error::InvalidArgument(alloc::format!("unknown embedding family `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedTrainConfig {
    pub family: Family,
    /// Entity (and literal) dimension.
    pub dim: usize,
    /// Relation-space dimension; `None` means the same as `dim`.
    pub relation_dim: Option<usize>,
    pub margin: f64,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub norm: Norm,
    pub seed: u64,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        EmbedTrainConfig {
            family: Family::TransE,
            dim: 400,
            relation_dim: None,
            margin: 1.0,
            negatives: 1,
            epochs: 200,
            learning_rate: 0.01,
            norm: Norm::L2,
            seed: 0,
        }
    }
}

impl EmbedTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.relation_dim == Some(0) {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        if !(self.margin > 0.0) {
            return Err(Error::InvalidArgument("margin must be positive".into()));
        }
        if self.negatives == 0 || self.epochs == 0 {
            return Err(Error::InvalidArgument("negatives and epochs must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// `max(0, margin + pos - neg)`.
pub fn margin_loss(pos_dist: f64, neg_dist: f64, margin: f64) -> f64 {
    (margin + pos_dist - neg_dist).max(0.0)
}

/// Learned vectors for every node and relation of a graph.
///
/// Node rows are the graph's entities in index order followed by its literals.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub family: Family,
    pub norm: Norm,
    entity_ids: Vec<String>,
    literal_ids: Vec<String>,
    relation_ids: Vec<String>,
    pub nodes: Param,
    pub relations: Param,
    /// TransR: one `relation_dim x dim` matrix per relation, row-major.
    pub matrices: Option<Param>,
    /// TransD: projection vector per node.
    pub node_projections: Option<Param>,
    /// TransD: projection vector per relation.
    pub relation_projections: Option<Param>,
}

/// Gradient of one distance with respect to the rows it touched.
#[derive(Debug, Clone, Default)]
struct DistanceGrad {
    head: Vec<f64>,
    relation: Vec<f64>,
    tail: Vec<f64>,
    matrix: Vec<f64>,
    head_proj: Vec<f64>,
    relation_proj: Vec<f64>,
    tail_proj: Vec<f64>,
}

fn norm_of(v: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::L1 => v.iter().map(|x| x.abs()).sum(),
        Norm::L2 => libm::sqrt(v.iter().map(|x| x * x).sum()),
    }
}

fn norm_grad(v: &[f64], value: f64, norm: Norm) -> Vec<f64> {
    match norm {
        Norm::L1 => v.iter().map(|&x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 }).collect(),
        Norm::L2 => {
            if value == 0.0 {
                alloc::vec![0.0; v.len()]
            } else {
                v.iter().map(|x| x / value).collect()
            }
        }
    }
}

fn l2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn rescale_rows(p: &mut Param, exact_unit: bool) {
    let cols = p.shape[1];
    for row in p.value.chunks_mut(cols) {
        let n = l2(row);
        if n > 0.0 && (exact_unit || n > 1.0) {
            row.iter_mut().for_each(|x| *x /= n);
        }
    }
}

impl EmbeddingTable {
    /// Random table for `g`, scaled as in the original TransE initialization.
    pub fn init<R: Rng + ?Sized>(g: &KnowledgeGraph, cfg: &EmbedTrainConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let dim = cfg.dim;
        let rdim = cfg.relation_dim.unwrap_or(dim);
        if cfg.family == Family::TransE && rdim != dim {
            return Err(Error::Mismatch("transE needs relation_dim equal to dim".into()));
        }
        let n_nodes = g.entities().len() + g.literals().len();
        let n_rel = g.relations().len();
        let bound = 6.0 / libm::sqrt(dim as f64);
        let mut uniform = |shape: &[usize], bound: f64| {
            let mut p = Param::zeros(shape);
            p.value.iter_mut().for_each(|v| *v = rng.gen_range(-bound..bound));
            p
        };
        let mut nodes = uniform(&[n_nodes, dim], bound);
        let mut relations = uniform(&[n_rel, rdim], 6.0 / libm::sqrt(rdim as f64));
        if n_nodes > 0 {
            rescale_rows(&mut nodes, true);
        }
        if n_rel > 0 {
            rescale_rows(&mut relations, true);
        }
        let (matrices, node_projections, relation_projections) = match cfg.family {
            Family::TransE => (None, None, None),
            Family::TransR => {
                let mut m = Param::zeros(&[n_rel, rdim * dim]);
                for r in 0..n_rel {
                    for i in 0..rdim.min(dim) {
                        m.value[r * rdim * dim + i * dim + i] = 1.0;
                    }
                }
                (Some(m), None, None)
            }
            Family::TransD => {
                let np = uniform(&[n_nodes, dim], 0.1);
                let rp = uniform(&[n_rel, rdim], 0.1);
                (None, Some(np), Some(rp))
            }
        };
        Ok(EmbeddingTable {
            family: cfg.family,
            norm: cfg.norm,
            entity_ids: g.entities().iter().map(|e| e.id.clone()).collect(),
            literal_ids: g.literals().to_vec(),
            relation_ids: g.relations().iter().map(|r| r.id.clone()).collect(),
            nodes,
            relations,
            matrices,
            node_projections,
            relation_projections,
        })
    }

    pub fn dim(&self) -> usize {
        self.nodes.shape[1]
    }

    pub fn relation_dim(&self) -> usize {
        self.relations.shape[1]
    }

    pub fn num_entities(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.entity_ids.len() + self.literal_ids.len()
    }

    pub fn node_row(&self, node: Node) -> usize {
        match node {
            Node::Entity(i) => i,
            Node::Literal(i) => self.entity_ids.len() + i,
        }
    }

    pub fn entity_vector(&self, id: &str) -> Option<&[f64]> {
        let i = self.entity_ids.binary_search_by(|e| e.as_str().cmp(id)).ok()?;
        Some(self.nodes.row(i))
    }

    pub fn relation_vector(&self, id: &str) -> Option<&[f64]> {
        let i = self.relation_ids.binary_search_by(|e| e.as_str().cmp(id)).ok()?;
        Some(self.relations.row(i))
    }

    /// Checks that the table was trained on (a graph with) the same vocabulary as `g`.
    pub fn check_compatible(&self, g: &KnowledgeGraph) -> Result<()> {
        let same = self.entity_ids.iter().map(String::as_str).eq(g.entities().iter().map(|e| e.id.as_str()))
            && self.relation_ids.iter().map(String::as_str).eq(g.relations().iter().map(|r| r.id.as_str()))
            && self.literal_ids == g.literals();
        if same {
            Ok(())
        } else {
            Err(Error::Mismatch("embedding table vocabulary differs from the graph".into()))
        }
    }

    /// Distance of `(head, relation, tail)` under the table's family and norm.
    pub fn score_triple(&self, head: &str, relation: &str, tail: &str) -> Result<f64> {
        let h = self.entity_ids.binary_search_by(|e| e.as_str().cmp(head)).map_err(|_| Error::UnknownEntity(head.to_string()))?;
        let r = self
            .relation_ids
            .binary_search_by(|e| e.as_str().cmp(relation))
            .map_err(|_| Error::UnknownRelation(relation.to_string()))?;
        let t = match self.entity_ids.binary_search_by(|e| e.as_str().cmp(tail)) {
            Ok(i) => i,
            Err(_) => self
                .literal_ids
                .binary_search_by(|e| e.as_str().cmp(tail))
                .map(|i| self.entity_ids.len() + i)
                .map_err(|_| Error::UnknownEntity(tail.to_string()))?,
        };
        self.validate_family()?;
        Ok(self.distance(h, r, t))
    }

    fn validate_family(&self) -> Result<()> {
        let ok = match self.family {
            Family::TransE => {
                self.matrices.is_none() && self.node_projections.is_none() && self.dim() == self.relation_dim()
            }
            Family::TransR => self.matrices.is_some(),
            Family::TransD => self.node_projections.is_some() && self.relation_projections.is_some(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Mismatch(alloc::format!("parameters do not match family {}", self.family)))
        }
    }

    /// Translation residual for node rows `h`, `t` and relation `r`.
    fn residual(&self, h: usize, r: usize, t: usize) -> Vec<f64> {
        let hv = self.nodes.row(h);
        let tv = self.nodes.row(t);
        let rv = self.relations.row(r);
        match self.family {
            // (h - t) + r in every family so identity projections reproduce transE bit for bit
            Family::TransE => (0..rv.len()).map(|i| hv[i] - tv[i] + rv[i]).collect(),
            Family::TransR => {
                let m = self.matrices.as_ref().expect("transR matrices");
                let (rd, d) = (self.relation_dim(), self.dim());
                let mr = &m.value[r * rd * d..(r + 1) * rd * d];
                let diff: Vec<f64> = hv.iter().zip(tv).map(|(a, b)| a - b).collect();
                (0..rd).map(|i| dot(&mr[i * d..(i + 1) * d], &diff) + rv[i]).collect()
            }
            Family::TransD => {
                let np = self.node_projections.as_ref().expect("transD node projections");
                let rp = self.relation_projections.as_ref().expect("transD relation projections").row(r);
                let hp = dot(np.row(h), hv);
                let tp = dot(np.row(t), tv);
                (0..rv.len())
                    .map(|i| {
                        let hi = hv.get(i).copied().unwrap_or(0.0);
                        let ti = tv.get(i).copied().unwrap_or(0.0);
                        rp[i] * (hp - tp) + hi - ti + rv[i]
                    })
                    .collect()
            }
        }
    }

    fn distance(&self, h: usize, r: usize, t: usize) -> f64 {
        norm_of(&self.residual(h, r, t), self.norm)
    }

    fn distance_grad(&self, h: usize, r: usize, t: usize) -> (f64, DistanceGrad) {
        let v = self.residual(h, r, t);
        let d = norm_of(&v, self.norm);
        let gv = norm_grad(&v, d, self.norm);
        let (dim, rdim) = (self.dim(), self.relation_dim());
        let mut out = DistanceGrad { relation: gv.clone(), ..Default::default() };
        match self.family {
            Family::TransE => {
                out.head = gv.clone();
                out.tail = gv.iter().map(|x| -x).collect();
            }
            Family::TransR => {
                let m = self.matrices.as_ref().expect("transR matrices");
                let mr = &m.value[r * rdim * dim..(r + 1) * rdim * dim];
                let mut dh = alloc::vec![0.0; dim];
                for i in 0..rdim {
                    for j in 0..dim {
                        dh[j] += mr[i * dim + j] * gv[i];
                    }
                }
                let diff: Vec<f64> = self.nodes.row(h).iter().zip(self.nodes.row(t)).map(|(a, b)| a - b).collect();
                out.matrix = (0..rdim).flat_map(|i| diff.iter().map(|dj| gv[i] * dj).collect::<Vec<_>>()).collect();
                out.tail = dh.iter().map(|x| -x).collect();
                out.head = dh;
            }
            Family::TransD => {
                let np = self.node_projections.as_ref().expect("transD node projections");
                let rp = self.relation_projections.as_ref().expect("transD relation projections").row(r);
                let (hv, tv) = (self.nodes.row(h), self.nodes.row(t));
                let (hpv, tpv) = (np.row(h), np.row(t));
                let rg = dot(rp, &gv);
                let hp = dot(hpv, hv);
                let tp = dot(tpv, tv);
                let id_t = |j: usize| if j < rdim { gv[j] } else { 0.0 };
                out.head = (0..dim).map(|j| hpv[j] * rg + id_t(j)).collect();
                out.tail = (0..dim).map(|j| -(tpv[j] * rg + id_t(j))).collect();
                out.head_proj = hv.iter().map(|x| x * rg).collect();
                out.tail_proj = tv.iter().map(|x| -x * rg).collect();
                out.relation_proj = gv.iter().map(|g| g * (hp - tp)).collect();
            }
        }
        (d, out)
    }

    fn apply_grad(&mut self, h: usize, r: usize, t: usize, g: &DistanceGrad, scale: f64) {
        let (dim, rdim) = (self.dim(), self.relation_dim());
        let add = |p: &mut Param, row: usize, width: usize, grad: &[f64]| {
            for (v, gi) in p.grad[row * width..(row + 1) * width].iter_mut().zip(grad) {
                *v += scale * gi;
            }
        };
        add(&mut self.nodes, h, dim, &g.head);
        add(&mut self.nodes, t, dim, &g.tail);
        add(&mut self.relations, r, rdim, &g.relation);
        if let Some(m) = self.matrices.as_mut() {
            add(m, r, rdim * dim, &g.matrix);
        }
        if let Some(np) = self.node_projections.as_mut() {
            add(np, h, dim, &g.head_proj);
            add(np, t, dim, &g.tail_proj);
        }
        if let Some(rp) = self.relation_projections.as_mut() {
            add(rp, r, rdim, &g.relation_proj);
        }
    }

    /// Margin loss of one positive/negative pair, accumulating gradients into the
    /// parameters when the margin is violated.
    pub fn pair_loss(&mut self, pos: (usize, usize, usize), neg: (usize, usize, usize), margin: f64) -> f64 {
        let (dp, gp) = self.distance_grad(pos.0, pos.1, pos.2);
        let (dn, gn) = self.distance_grad(neg.0, neg.1, neg.2);
        let loss = margin_loss(dp, dn, margin);
        if loss > 0.0 {
            self.apply_grad(pos.0, pos.1, pos.2, &gp, 1.0);
            self.apply_grad(neg.0, neg.1, neg.2, &gn, -1.0);
        }
        loss
    }

    /// Sparse SGD update on rows that received gradient; clears those gradients.
    fn sgd_rows(&mut self, lr: f64) -> Result<()> {
        for p in self.params_mut() {
            if let Some(k) = p.grad.iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite(alloc::format!("embedding gradient at index {k}")));
            }
            for (v, g) in p.value.iter_mut().zip(p.grad.iter_mut()) {
                if *g != 0.0 {
                    *v -= lr * *g;
                    *g = 0.0;
                }
            }
        }
        Ok(())
    }

    /// Entity and literal vectors back inside the unit ball (on the sphere for transE).
    pub fn apply_norm_constraints(&mut self) {
        let exact = self.family == Family::TransE;
        if self.nodes.len() > 0 {
            rescale_rows(&mut self.nodes, exact);
        }
        if self.family != Family::TransE {
            if let Some(np) = self.node_projections.as_mut().filter(|p| p.len() > 0) {
                rescale_rows(np, false);
            }
            if self.relations.len() > 0 {
                rescale_rows(&mut self.relations, false);
            }
        }
    }

    /// Largest L2 norm among entity and literal vectors.
    pub fn max_node_norm(&self) -> f64 {
        self.nodes.value.chunks(self.dim()).map(l2).fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> EmbeddingFile {
        let rows = |ids: &[String], p: &Param, offset: usize| -> BTreeMap<String, Vec<f64>> {
            ids.iter().enumerate().map(|(i, id)| (id.clone(), p.row(offset + i).to_vec())).collect()
        };
        let n_ent = self.entity_ids.len();
        EmbeddingFile {
            format_version: EMBEDDING_FORMAT_VERSION,
            family: self.family,
            norm: self.norm,
            dim: self.dim(),
            relation_dim: self.relation_dim(),
            entities: rows(&self.entity_ids, &self.nodes, 0),
            literals: rows(&self.literal_ids, &self.nodes, n_ent),
            relations: rows(&self.relation_ids, &self.relations, 0),
            relation_matrices: self.matrices.as_ref().map(|m| rows(&self.relation_ids, m, 0)),
            entity_projections: self.node_projections.as_ref().map(|p| rows(&self.entity_ids, p, 0)),
            literal_projections: self.node_projections.as_ref().map(|p| rows(&self.literal_ids, p, n_ent)),
            relation_projections: self.relation_projections.as_ref().map(|p| rows(&self.relation_ids, p, 0)),
        }
    }

    pub fn from_file(f: EmbeddingFile) -> Result<Self> {
        if f.format_version != EMBEDDING_FORMAT_VERSION {
            return Err(Error::Mismatch(alloc::format!("unsupported embedding format version {}", f.format_version)));
        }
        fn stack(maps: &[&BTreeMap<String, Vec<f64>>], width: usize) -> Result<Param> {
            let mut values = Vec::new();
            let mut rows = 0;
            for m in maps {
                for (id, v) in m.iter() {
                    if v.len() != width {
                        return Err(Error::ShapeMismatch {
                            expected: alloc::format!("vector of length {width} for `{id}`"),
                            found: alloc::format!("{}", v.len()),
                        });
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::NonFinite(alloc::format!("vector for `{id}`")));
                    }
                    values.extend_from_slice(v);
                    rows += 1;
                }
            }
            Ok(Param::from_values(alloc::vec![rows, width], values))
        }
        let keys = |m: &BTreeMap<String, Vec<f64>>| m.keys().cloned().collect::<Vec<_>>();
        let same_keys = |a: &BTreeMap<String, Vec<f64>>, b: &BTreeMap<String, Vec<f64>>| a.keys().eq(b.keys());
        let (d, rd) = (f.dim, f.relation_dim);
        let matrices = match &f.relation_matrices {
            Some(m) if same_keys(m, &f.relations) => Some(stack(&[m], rd * d)?),
            Some(_) => return Err(Error::Mismatch("relation matrices do not cover the relations".into())),
            None => None,
        };
        let node_projections = match (&f.entity_projections, &f.literal_projections) {
            (Some(e), Some(l)) if same_keys(e, &f.entities) && same_keys(l, &f.literals) => Some(stack(&[e, l], d)?),
            (None, None) => None,
            _ => return Err(Error::Mismatch("projection vectors do not cover the nodes".into())),
        };
        let relation_projections = match &f.relation_projections {
            Some(p) if same_keys(p, &f.relations) => Some(stack(&[p], rd)?),
            Some(_) => return Err(Error::Mismatch("relation projections do not cover the relations".into())),
            None => None,
        };
        let table = EmbeddingTable {
            family: f.family,
            norm: f.norm,
            entity_ids: keys(&f.entities),
            literal_ids: keys(&f.literals),
            relation_ids: keys(&f.relations),
            nodes: stack(&[&f.entities, &f.literals], d)?,
            relations: stack(&[&f.relations], rd)?,
            matrices,
            node_projections,
            relation_projections,
        };
        table.validate_family()?;
        Ok(table)
    }
}

impl Parameterized for EmbeddingTable {
    fn params(&self) -> Vec<&Param> {
        let mut v = alloc::vec![&self.nodes, &self.relations];
        v.extend(self.matrices.as_ref());
        v.extend(self.node_projections.as_ref());
        v.extend(self.relation_projections.as_ref());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = alloc::vec![&mut self.nodes, &mut self.relations];
        v.extend(self.matrices.as_mut());
        v.extend(self.node_projections.as_mut());
        v.extend(self.relation_projections.as_mut());
        v
    }
}

pub const EMBEDDING_FORMAT_VERSION: u32 = 1;

/// Serializable form of an [`EmbeddingTable`] keyed by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingFile {
    pub format_version: u32,
    pub family: Family,
    pub norm: Norm,
    pub dim: usize,
    pub relation_dim: usize,
    pub entities: BTreeMap<String, Vec<f64>>,
    pub literals: BTreeMap<String, Vec<f64>>,
    pub relations: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation_matrices: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_projections: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literal_projections: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation_projections: Option<BTreeMap<String, Vec<f64>>>,
}

/// Per-epoch record of embedding training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedTrainLog {
    pub epoch_losses: Vec<f64>,
}

fn as_rows(table: &EmbeddingTable, e: &Edge) -> (usize, usize, usize) {
    (e.head, e.relation, table.node_row(e.tail))
}

/// Draws a filtered corruption of `edge`: head or tail replaced uniformly
/// (tails by a node of the same kind) such that the result is not in `g`.
fn corrupt<R: Rng + ?Sized>(g: &KnowledgeGraph, edge: &Edge, rng: &mut R) -> Option<Edge> {
    let n_ent = g.entities().len();
    let n_lit = g.literals().len();
    for _ in 0..64 {
        let mut c = *edge;
        if rng.gen_bool(0.5) {
            c.head = rng.gen_range(0..n_ent);
        } else {
            c.tail = match edge.tail {
                Node::Entity(_) => Node::Entity(rng.gen_range(0..n_ent)),
                Node::Literal(_) => Node::Literal(rng.gen_range(0..n_lit)),
            };
        }
        if c != *edge && !g.contains_edge(&c) {
            return Some(c);
        }
    }
    None
}

/// Trains an embedding table with per-triple SGD on the margin-ranking loss.
pub fn train_embeddings(g: &KnowledgeGraph, cfg: &EmbedTrainConfig) -> Result<(EmbeddingTable, EmbedTrainLog)> {
    if g.edges().is_empty() {
        return Err(Error::EmptyInput("graph has no triples to embed"));
    }
    let mut rng = substream(cfg.seed, "embed");
    let mut table = EmbeddingTable::init(g, cfg, &mut rng)?;
    let mut order: Vec<Edge> = g.edges().to_vec();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut pairs = 0usize;
        for edge in &order {
            for _ in 0..cfg.negatives {
                let Some(neg) = corrupt(g, edge, &mut rng) else { continue };
                let pos = as_rows(&table, edge);
                let neg = as_rows(&table, &neg);
                total += table.pair_loss(pos, neg, cfg.margin);
                pairs += 1;
                table.sgd_rows(cfg.learning_rate)?;
            }
        }
        let mean = if pairs == 0 { 0.0 } else { total / pairs as f64 };
        if !mean.is_finite() {
            return Err(Error::NonFinite(alloc::format!("embedding loss diverged at epoch {epoch}")));
        }
        epoch_losses.push(mean);
        table.apply_norm_constraints();
    }
    Ok((table, EmbedTrainLog { epoch_losses }))
}

/// Rank of one held-out triple among its candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryRank {
    pub rank: usize,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPredictionReport {
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_10: f64,
    pub queries: Vec<QueryRank>,
}

impl LinkPredictionReport {
    pub fn hits_at(&self, k: usize) -> f64 {
        let n = self.queries.len() as f64;
        self.queries.iter().filter(|q| q.rank <= k).count() as f64 / n
    }
}

/// Filtered tail ranking: each true tail is ranked against every node of the
/// same kind, skipping other tails that make a true triple with the same
/// head and relation. Ties count against the true tail.
pub fn link_prediction_eval(table: &EmbeddingTable, g: &KnowledgeGraph, held_out: &[Edge]) -> Result<LinkPredictionReport> {
    if held_out.is_empty() {
        return Err(Error::EmptyInput("no held-out triples"));
    }
    table.check_compatible(g)?;
    table.validate_family()?;
    let n_ent = g.entities().len();
    let known: alloc::collections::BTreeSet<Edge> = g.edges().iter().chain(held_out).copied().collect();
    let mut queries = Vec::with_capacity(held_out.len());
    for edge in held_out {
        let candidates: Vec<Node> = match edge.tail {
            Node::Entity(_) => (0..n_ent).map(Node::Entity).collect(),
            Node::Literal(_) => (0..g.literals().len()).map(Node::Literal).collect(),
        };
        let truth = table.distance(edge.head, edge.relation, table.node_row(edge.tail));
        let mut rank = 1;
        let mut count = 1;
        for c in candidates {
            if c == edge.tail || known.contains(&Edge { tail: c, ..*edge }) {
                continue;
            }
            count += 1;
            if table.distance(edge.head, edge.relation, table.node_row(c)) <= truth {
                rank += 1;
            }
        }
        queries.push(QueryRank { rank, candidates: count });
    }
    let n = queries.len() as f64;
    let mrr = queries.iter().map(|q| 1.0 / q.rank as f64).sum::<f64>() / n;
    let mut report = LinkPredictionReport { mrr, hits_at_1: 0.0, hits_at_3: 0.0, hits_at_10: 0.0, queries };
    report.hits_at_1 = report.hits_at(1);
    report.hits_at_3 = report.hits_at(3);
    report.hits_at_10 = report.hits_at(10);
    Ok(report)
}

/// Finite-difference check of the pair-loss gradient for `family` and
/// `norm` on a three-triple graph, with parameters drawn from `seed`.
pub fn gradient_check(family: Family, norm: Norm, seed: u64) -> Result<crate::nn::GradCheckReport> {
    let g = KnowledgeGraph::from_sources("a\tr\tb\na\ts\tc\nb\tr\tc\n", "b\tB\nc\tC\n")?;
    let cfg = EmbedTrainConfig {
        family,
        norm,
        dim: 4,
        relation_dim: (family != Family::TransE).then_some(3),
        margin: 5.0,
        ..Default::default()
    };
    let mut t = EmbeddingTable::init(&g, &cfg, &mut substream(seed, "gradcheck"))?;
    // move projections off their identity start so every term contributes
    if let Some(m) = t.matrices.as_mut() {
        m.value.iter_mut().enumerate().for_each(|(i, v)| *v += 0.1 * ((i * 7 % 5) as f64 - 2.0));
    }
    Ok(crate::nn::grad_check(&mut t, 1e-5, |t| t.pair_loss((0, 0, 1), (2, 0, 1), 5.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::KnowledgeGraph;

    fn two_node_graph() -> KnowledgeGraph {
        KnowledgeGraph::from_sources("h\tr\tt\n", "t\tT\n").unwrap()
    }

    fn table_with(family: Family, norm: Norm, dim: usize) -> EmbeddingTable {
        let g = two_node_graph();
        let cfg = EmbedTrainConfig { family, norm, dim, ..Default::default() };
        EmbeddingTable::init(&g, &cfg, &mut substream(1, "t")).unwrap()
    }

    #[test]
    fn trans_e_examples() {
        let mut t = table_with(Family::TransE, Norm::L2, 2);
        t.nodes.value = alloc::vec![0.0, 0.0, 1.0, 0.0];
        t.relations.value = alloc::vec![1.0, 0.0];
        assert_eq!(t.score_triple("h", "r", "t").unwrap(), 0.0);
        t.norm = Norm::L1;
        t.nodes.value = alloc::vec![0.0, 0.0, 0.0, 1.0];
        assert_eq!(t.score_triple("h", "r", "t").unwrap(), 2.0);
        assert!(matches!(t.score_triple("x", "r", "t"), Err(Error::UnknownEntity(_))));
        assert!(matches!(t.score_triple("h", "q", "t"), Err(Error::UnknownRelation(_))));
    }

    #[test]
    fn identity_transr_and_zero_transd_reduce_to_transe() {
        for norm in [Norm::L1, Norm::L2] {
            let e = table_with(Family::TransE, norm, 3);
            let mut r = table_with(Family::TransR, norm, 3);
            r.nodes = e.nodes.clone();
            r.relations = e.relations.clone();
            let mut d = table_with(Family::TransD, norm, 3);
            d.nodes = e.nodes.clone();
            d.relations = e.relations.clone();
            d.node_projections.as_mut().unwrap().value.iter_mut().for_each(|v| *v = 0.0);
            d.relation_projections.as_mut().unwrap().value.iter_mut().for_each(|v| *v = 0.0);
            let base = e.score_triple("h", "r", "t").unwrap();
            assert_eq!(r.score_triple("h", "r", "t").unwrap(), base);
            assert_eq!(d.score_triple("h", "r", "t").unwrap(), base);
        }
    }

    #[test]
    fn family_mismatch_is_reported() {
        let mut t = table_with(Family::TransR, Norm::L2, 2);
        t.matrices = None;
        assert!(matches!(t.score_triple("h", "r", "t"), Err(Error::Mismatch(_))));
    }

    #[test]
    fn margin_loss_examples() {
        assert_eq!(margin_loss(0.0, 2.0, 1.0), 0.0);
        assert_eq!(margin_loss(1.0, 1.0, 1.0), 1.0);
        assert_eq!(margin_loss(0.5, 1.0, 1.0), 0.5);
    }

    #[test]
    fn pair_loss_gradients_match_finite_differences() {
        for family in [Family::TransE, Family::TransR, Family::TransD] {
            for norm in [Norm::L1, Norm::L2] {
                let report = gradient_check(family, norm, 9).unwrap();
                assert!(report.max_relative_error < 1e-5, "{family} {norm:?}: {report:?}");
            }
        }
    }

    #[test]
    fn file_roundtrip_preserves_scores() {
        for family in [Family::TransE, Family::TransR, Family::TransD] {
            let t = table_with(family, Norm::L2, 3);
            let back = EmbeddingTable::from_file(t.to_file()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn empty_graph_cannot_be_embedded() {
        let g = KnowledgeGraph::from_sources("", "").unwrap();
        assert!(matches!(train_embeddings(&g, &EmbedTrainConfig::default()), Err(Error::EmptyInput(_))));
    }
}
