//! Knowledge-graph ingestion, inverse-relation extension, negative sampling
//! and target-set assembly.
//!
//! Entity ids are assigned in order of first appearance in the triplet list
//! (head before tail). Everything downstream breaks ties by id, so two files
//! that differ only in entity names produce identical results.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type EntityId = usize;
pub type RelationId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error)]
pub enum KgError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{path}:{line}: relation `{name}` does not occur in the training vocabulary")]
    UnknownRelation {
        path: PathBuf,
        line: usize,
        name: String,
    },
    #[error("could not find a non-colliding corruption after {attempts} attempts")]
    SamplingExhausted { attempts: usize },
    #[error("negative ratio must be at least 1")]
    InvalidRatio,
    #[error("positive target ({0}, {1}, {2}) is not an edge of the graph")]
    NotInGraph(EntityId, RelationId, EntityId),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A directed, labelled edge `(head, relation, tail)` with its slot in the
/// edge universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
    pub edge_id: EdgeId,
}

impl Triplet {
    pub fn key(&self) -> (EntityId, RelationId, EntityId) {
        (self.head, self.relation, self.tail)
    }

    /// The endpoint across the edge from `v`.
    pub fn other(&self, v: EntityId) -> EntityId {
        if v == self.head {
            self.tail
        } else {
            self.head
        }
    }
}

/// Relation names, indexed by forward relation id. Inverse relations live
/// at `id + len()`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct RelationVocab {
    names: Vec<String>,
    index: HashMap<String, RelationId>,
}

impl From<Vec<String>> for RelationVocab {
    fn from(names: Vec<String>) -> Self {
        let mut v = Self {
            names,
            index: HashMap::new(),
        };
        v.rebuild_index();
        v
    }
}

impl From<RelationVocab> for Vec<String> {
    fn from(v: RelationVocab) -> Self {
        v.names
    }
}

impl RelationVocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I: IntoIterator<Item = S>, S: Into<String>>(names: I) -> Self {
        let mut vocab = Self::new();
        for n in names {
            vocab.intern(&n.into());
        }
        vocab
    }

    pub fn intern(&mut self, name: &str) -> RelationId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<RelationId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: RelationId) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Size of the extended vocabulary (forward + inverse).
    pub fn extended_len(&self) -> usize {
        2 * self.names.len()
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
    }
}

/// Id of `r⁻¹` under the fixed-offset scheme; an involution.
pub fn inverse_id(relation: RelationId, num_relations: usize) -> RelationId {
    if relation < num_relations {
        relation + num_relations
    } else {
        relation - num_relations
    }
}

/// `E ∪ {(v, r⁻¹, u) | (u, r, v) ∈ E}`. An inverse shares the edge id of its
/// forward triplet and is placed directly after it.
pub fn extend_with_inverses(triplets: &[Triplet], num_relations: usize) -> Vec<Triplet> {
    let mut out = Vec::with_capacity(2 * triplets.len());
    for t in triplets {
        out.push(*t);
        out.push(Triplet {
            head: t.tail,
            relation: inverse_id(t.relation, num_relations),
            tail: t.head,
            edge_id: t.edge_id,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    num_entities: usize,
    entity_names: Vec<String>,
    relations: RelationVocab,
    triplets: Vec<Triplet>,
    extended: Vec<Triplet>,
    adjacency: Vec<Vec<EdgeId>>,
}

impl KnowledgeGraph {
    /// Builds a graph from `(head, relation, tail)` triples. Edge ids are the
    /// positions in `triples`.
    pub fn from_triples(
        num_entities: usize,
        relations: RelationVocab,
        triples: impl IntoIterator<Item = (EntityId, RelationId, EntityId)>,
    ) -> Self {
        let triplets: Vec<Triplet> = triples
            .into_iter()
            .enumerate()
            .map(|(edge_id, (head, relation, tail))| Triplet {
                head,
                relation,
                tail,
                edge_id,
            })
            .collect();
        let entity_names = (0..num_entities).map(|i| format!("e{i}")).collect();
        Self::assemble(num_entities, entity_names, relations, triplets)
    }

    fn assemble(
        num_entities: usize,
        entity_names: Vec<String>,
        relations: RelationVocab,
        triplets: Vec<Triplet>,
    ) -> Self {
        let mut adjacency = vec![Vec::new(); num_entities];
        for t in &triplets {
            assert!(t.head < num_entities && t.tail < num_entities);
            assert!(t.relation < relations.len().max(1));
            adjacency[t.head].push(t.edge_id);
            if t.tail != t.head {
                adjacency[t.tail].push(t.edge_id);
            }
        }
        let extended = extend_with_inverses(&triplets, relations.len());
        Self {
            num_entities,
            entity_names,
            relations,
            triplets,
            extended,
            adjacency,
        }
    }

    pub fn with_entity_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.num_entities);
        self.entity_names = names;
        self
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_edges(&self) -> usize {
        self.triplets.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn relations(&self) -> &RelationVocab {
        &self.relations
    }

    pub fn entity_name(&self, e: EntityId) -> &str {
        &self.entity_names[e]
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn triplet(&self, edge: EdgeId) -> &Triplet {
        &self.triplets[edge]
    }

    /// The set E′: every triplet followed by its inverse.
    pub fn extended_triplets(&self) -> &[Triplet] {
        &self.extended
    }

    /// Incident edge ids of `v`, ascending.
    pub fn incident(&self, v: EntityId) -> &[EdgeId] {
        &self.adjacency[v]
    }

    pub fn contains(&self, head: EntityId, relation: RelationId, tail: EntityId) -> bool {
        self.adjacency
            .get(head)
            .map(|edges| {
                edges.iter().any(|&e| {
                    let t = &self.triplets[e];
                    t.head == head && t.relation == relation && t.tail == tail
                })
            })
            .unwrap_or(false)
    }

    pub fn triple_set(&self) -> HashSet<(EntityId, RelationId, EntityId)> {
        self.triplets.iter().map(Triplet::key).collect()
    }

    /// Whether entity ids already follow first appearance in edge order.
    pub fn is_first_appearance_ordered(&self) -> bool {
        let mut next = 0;
        for t in &self.triplets {
            for v in [t.head, t.tail] {
                if v == next {
                    next += 1;
                } else if v > next {
                    return false;
                }
            }
        }
        true
    }

    /// Returns a copy whose entity ids follow first appearance in edge order.
    /// Isolated entities keep their relative order after all others.
    pub fn relabel_by_first_appearance(&self) -> Self {
        let mut map = vec![usize::MAX; self.num_entities];
        let mut next = 0;
        for t in &self.triplets {
            for v in [t.head, t.tail] {
                if map[v] == usize::MAX {
                    map[v] = next;
                    next += 1;
                }
            }
        }
        for slot in map.iter_mut() {
            if *slot == usize::MAX {
                *slot = next;
                next += 1;
            }
        }
        let mut names = vec![String::new(); self.num_entities];
        for (old, &new) in map.iter().enumerate() {
            names[new] = self.entity_names[old].clone();
        }
        let triplets = self
            .triplets
            .iter()
            .map(|t| Triplet {
                head: map[t.head],
                tail: map[t.tail],
                ..*t
            })
            .collect();
        Self::assemble(self.num_entities, names, self.relations.clone(), triplets)
    }

    /// Writes the graph as tab-separated `head relation tail` lines.
    pub fn write_tsv(&self, path: &Path) -> Result<(), KgError> {
        let io = |source| KgError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = fs::File::create(path).map_err(io)?;
        let mut w = BufWriter::new(file);
        for t in &self.triplets {
            writeln!(
                w,
                "{}\t{}\t{}",
                self.entity_names[t.head],
                self.relations.name(t.relation),
                self.entity_names[t.tail]
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Counts of lines dropped while loading a split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub self_loops: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub train: KnowledgeGraph,
    pub test: KnowledgeGraph,
    pub train_report: LoadReport,
    pub test_report: LoadReport,
}

/// Loads `train.txt` and `test.txt` from `dir`. Entity vocabularies are
/// split-local; the relation vocabulary comes from train and is reused for
/// test.
pub fn load_dataset(dir: &Path) -> Result<Dataset, KgError> {
    let mut relations = RelationVocab::new();
    let (train, train_report) = load_split(&dir.join("train.txt"), &mut relations, true)?;
    let (test, test_report) = load_split(&dir.join("test.txt"), &mut relations, false)?;
    Ok(Dataset {
        train,
        test,
        train_report,
        test_report,
    })
}

/// Parses one split. With `grow_vocab` unset, relations missing from
/// `relations` are an error.
pub fn load_split(
    path: &Path,
    relations: &mut RelationVocab,
    grow_vocab: bool,
) -> Result<(KnowledgeGraph, LoadReport), KgError> {
    let text = fs::read_to_string(path).map_err(|source| KgError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut entity_index: HashMap<&str, EntityId> = HashMap::new();
    let mut entity_names: Vec<String> = Vec::new();
    let mut triples = Vec::new();
    let mut seen = HashSet::new();
    let mut report = LoadReport::default();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(KgError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("expected `head<TAB>relation<TAB>tail`, got {line:?}"),
            });
        }
        let rel = if grow_vocab {
            relations.intern(fields[1])
        } else {
            relations.get(fields[1]).ok_or_else(|| KgError::UnknownRelation {
                path: path.to_path_buf(),
                line: lineno + 1,
                name: fields[1].to_string(),
            })?
        };
        if fields[0] == fields[2] {
            report.self_loops += 1;
            continue;
        }
        // ids are assigned here so rejected lines do not mint entities
        let head = intern_entity(&mut entity_index, &mut entity_names, fields[0]);
        let tail = intern_entity(&mut entity_index, &mut entity_names, fields[2]);
        if !seen.insert((head, rel, tail)) {
            report.duplicates += 1;
            continue;
        }
        triples.push((head, rel, tail));
    }
    if report.self_loops > 0 {
        log::warn!("{}: dropped {} self-loop lines", path.display(), report.self_loops);
    }
    if report.duplicates > 0 {
        log::warn!("{}: dropped {} duplicate lines", path.display(), report.duplicates);
    }
    let kg = KnowledgeGraph::from_triples(entity_names.len(), relations.clone(), triples)
        .with_entity_names(entity_names);
    Ok((kg, report))
}

fn intern_entity<'a>(
    index: &mut HashMap<&'a str, EntityId>,
    names: &mut Vec<String>,
    name: &'a str,
) -> EntityId {
    let next = names.len();
    *index.entry(name).or_insert_with(|| {
        names.push(name.to_string());
        next
    })
}

/// A query triplet with its label (1 = exists in the graph).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Target {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
    pub label: bool,
}

impl Target {
    pub fn key(&self) -> (EntityId, RelationId, EntityId) {
        (self.head, self.relation, self.tail)
    }
}

/// Positives first, then `ratio` negatives per positive in positive order.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub targets: Vec<Target>,
    pub num_positives: usize,
    pub ratio: usize,
    pub seed: u64,
}

impl TargetSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.targets.iter().map(|t| t.label).collect()
    }

    pub fn positives(&self) -> &[Target] {
        &self.targets[..self.num_positives]
    }

    pub fn negatives(&self) -> &[Target] {
        &self.targets[self.num_positives..]
    }

    /// Indices (into `targets`) of the negatives sampled for positive `i`.
    pub fn negatives_of(&self, i: usize) -> std::ops::Range<usize> {
        let start = self.num_positives + i * self.ratio;
        start..start + self.ratio
    }

    /// Only the `round`-th negative of every positive, plus all positives.
    pub fn round(&self, round: usize) -> TargetSet {
        assert!(round < self.ratio);
        let mut targets = self.positives().to_vec();
        for i in 0..self.num_positives {
            targets.push(self.targets[self.num_positives + i * self.ratio + round]);
        }
        TargetSet {
            targets,
            num_positives: self.num_positives,
            ratio: 1,
            seed: self.seed,
        }
    }

    /// JSON lines `{head, relation, tail, label}` using the graph's names.
    pub fn write_jsonl(&self, kg: &KnowledgeGraph, path: &Path) -> Result<(), KgError> {
        let io = |source| KgError::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = fs::File::create(path).map_err(io)?;
        let mut w = BufWriter::new(file);
        for t in &self.targets {
            let line = serde_json::json!({
                "head": kg.entity_name(t.head),
                "relation": kg.relations().name(t.relation),
                "tail": kg.entity_name(t.tail),
                "label": u8::from(t.label),
            });
            writeln!(w, "{line}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Corrupts head or tail (fair coin) of each positive with a uniformly drawn
/// entity, `ratio` times per positive. A corruption is redrawn while it is an
/// edge of `kg`, a self-loop, or a repeat of an earlier negative.
pub fn sample_negatives(
    kg: &KnowledgeGraph,
    positives: &[Triplet],
    ratio: usize,
    seed: u64,
) -> Result<TargetSet, KgError> {
    if ratio == 0 {
        return Err(KgError::InvalidRatio);
    }
    let n = kg.num_entities();
    let budget = 10 * n.max(1);
    let existing = kg.triple_set();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken: HashSet<(EntityId, RelationId, EntityId)> = HashSet::new();

    let mut targets: Vec<Target> = positives
        .iter()
        .map(|p| Target {
            head: p.head,
            relation: p.relation,
            tail: p.tail,
            label: true,
        })
        .collect();
    for p in positives {
        for _ in 0..ratio {
            let mut found = None;
            for _ in 0..budget {
                let e = rng.random_range(0..n);
                let cand = if rng.random_bool(0.5) {
                    (e, p.relation, p.tail)
                } else {
                    (p.head, p.relation, e)
                };
                if cand.0 != cand.2 && !existing.contains(&cand) && !taken.contains(&cand) {
                    found = Some(cand);
                    break;
                }
            }
            let (head, relation, tail) =
                found.ok_or(KgError::SamplingExhausted { attempts: budget })?;
            taken.insert((head, relation, tail));
            targets.push(Target {
                head,
                relation,
                tail,
                label: false,
            });
        }
    }
    Ok(TargetSet {
        targets,
        num_positives: positives.len(),
        ratio,
        seed,
    })
}

/// The graph that bases are built on: the split's edges plus every negative
/// target, and the edge id of each target.
#[derive(Debug, Clone)]
pub struct WorkingGraph {
    pub graph: KnowledgeGraph,
    pub target_edges: Vec<EdgeId>,
    pub labels: Vec<bool>,
    pub original_edges: usize,
}

/// Appends negative targets as fresh edges. Positives keep their existing
/// edge ids.
pub fn add_targets_to_graph(
    kg: &KnowledgeGraph,
    targets: &TargetSet,
) -> Result<WorkingGraph, KgError> {
    let index: HashMap<(EntityId, RelationId, EntityId), EdgeId> = kg
        .triplets()
        .iter()
        .map(|t| (t.key(), t.edge_id))
        .collect();
    let mut triples: Vec<(EntityId, RelationId, EntityId)> =
        kg.triplets().iter().map(Triplet::key).collect();
    let mut target_edges = Vec::with_capacity(targets.len());
    for t in &targets.targets {
        if t.label {
            let e = index
                .get(&t.key())
                .ok_or(KgError::NotInGraph(t.head, t.relation, t.tail))?;
            target_edges.push(*e);
        } else {
            target_edges.push(triples.len());
            triples.push(t.key());
        }
    }
    let graph = KnowledgeGraph::from_triples(kg.num_entities(), kg.relations().clone(), triples)
        .with_entity_names(kg.entity_names().to_vec());
    Ok(WorkingGraph {
        graph,
        target_edges,
        labels: targets.labels(),
        original_edges: kg.num_edges(),
    })
}

/// All edges of `kg` as positives, in edge order.
pub fn all_positives(kg: &KnowledgeGraph) -> Vec<Triplet> {
    kg.triplets().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn small() -> KnowledgeGraph {
        let rel = RelationVocab::from_names(["r", "s"]);
        KnowledgeGraph::from_triples(4, rel, [(0, 0, 1), (1, 1, 2), (2, 0, 3), (3, 1, 0)])
    }

    #[test]
    fn parses_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "train.txt", "a\tr\tb\nb\ts\tc\n");
        write(dir.path(), "test.txt", "");
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.train.num_entities(), 3);
        assert_eq!(ds.train.num_relations(), 2);
        assert_eq!(ds.train.num_edges(), 2);
        assert_eq!(ds.test.num_edges(), 0);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "train.txt", "a\tr\tb\nbroken line\n");
        write(dir.path(), "test.txt", "");
        match load_dataset(dir.path()) {
            Err(KgError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_test_relation_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "train.txt", "a\tr\tb\n");
        write(dir.path(), "test.txt", "x\tr\ty\nx\tzzz\ty\n");
        match load_dataset(dir.path()) {
            Err(KgError::UnknownRelation { name, line, .. }) => {
                assert_eq!(name, "zzz");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loops_and_duplicates_dropped() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "train.txt", "a\tr\ta\na\tr\tb\na\tr\tb\n");
        write(dir.path(), "test.txt", "");
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.train.num_edges(), 1);
        assert_eq!(ds.train.num_entities(), 2);
        assert_eq!(ds.train_report.self_loops, 1);
        assert_eq!(ds.train_report.duplicates, 1);
    }

    #[test]
    fn split_local_entities() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "train.txt", "a\tr\tb\n");
        write(dir.path(), "test.txt", "x\tr\ty\ny\tr\tz\n");
        let ds = load_dataset(dir.path()).unwrap();
        assert_eq!(ds.test.num_entities(), 3);
        assert_eq!(ds.test.entity_name(0), "x");
        assert_eq!(ds.test.relations(), ds.train.relations());
    }

    #[test]
    fn inverse_extension() {
        let rel = RelationVocab::from_names(["r"]);
        let kg = KnowledgeGraph::from_triples(2, rel, [(0, 0, 1)]);
        let ext = kg.extended_triplets();
        assert_eq!(ext.len(), 2);
        assert_eq!(ext[1].key(), (1, 1, 0));
        assert_eq!(ext[1].edge_id, ext[0].edge_id);
        assert!(extend_with_inverses(&[], 3).is_empty());
    }

    #[test]
    fn inverse_id_involution() {
        for r in 0..7 {
            assert_eq!(inverse_id(inverse_id(r, 7), 7), r);
        }
    }

    #[test]
    fn parallel_edges_get_distinct_ids() {
        let rel = RelationVocab::from_names(["r", "s"]);
        let kg = KnowledgeGraph::from_triples(2, rel, [(0, 0, 1), (0, 1, 1)]);
        assert_eq!(kg.incident(0), &[0, 1]);
        assert_eq!(kg.incident(1), &[0, 1]);
    }

    #[test]
    fn negatives_count_and_determinism() {
        let kg = small();
        let pos = all_positives(&kg);
        let a = sample_negatives(&kg, &pos, 1, 3).unwrap();
        let b = sample_negatives(&kg, &pos, 1, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8);
        for t in a.negatives() {
            assert!(!kg.contains(t.head, t.relation, t.tail));
            assert_ne!(t.head, t.tail);
        }
        assert_eq!(a.negatives_of(2), 6..7);
    }

    #[test]
    fn sampling_exhausts_on_saturated_graph() {
        let rel = RelationVocab::from_names(["r"]);
        let kg = KnowledgeGraph::from_triples(2, rel, [(0, 0, 1), (1, 0, 0)]);
        let err = sample_negatives(&kg, &all_positives(&kg), 1, 0).unwrap_err();
        assert!(matches!(err, KgError::SamplingExhausted { attempts: 20 }));
    }

    #[test]
    fn zero_ratio_rejected() {
        let kg = small();
        assert!(matches!(
            sample_negatives(&kg, &all_positives(&kg), 0, 0),
            Err(KgError::InvalidRatio)
        ));
    }

    #[test]
    fn working_graph_appends_negatives() {
        let kg = small();
        let ts = sample_negatives(&kg, &all_positives(&kg), 1, 9).unwrap();
        let wg = add_targets_to_graph(&kg, &ts).unwrap();
        assert_eq!(wg.graph.num_edges(), 8);
        assert_eq!(&wg.target_edges[..4], &[0, 1, 2, 3]);
        assert_eq!(&wg.target_edges[4..], &[4, 5, 6, 7]);

        let empty = TargetSet {
            targets: vec![],
            num_positives: 0,
            ratio: 1,
            seed: 0,
        };
        let wg = add_targets_to_graph(&kg, &empty).unwrap();
        assert_eq!(wg.graph.triplets(), kg.triplets());
    }

    #[test]
    fn tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "train.txt", "a\tr\tb\nb\ts\tc\nc\tr\ta\n");
        write(dir.path(), "test.txt", "");
        let ds = load_dataset(dir.path()).unwrap();
        let out = tempfile::tempdir().unwrap();
        ds.train.write_tsv(&out.path().join("train.txt")).unwrap();
        write(out.path(), "test.txt", "");
        let again = load_dataset(out.path()).unwrap();
        assert_eq!(again.train, ds.train);
    }

    #[test]
    fn relabel_is_canonical() {
        let rel = RelationVocab::from_names(["r"]);
        let a = KnowledgeGraph::from_triples(3, rel.clone(), [(2, 0, 0), (0, 0, 1)]);
        let b = a.relabel_by_first_appearance();
        assert!(b.is_first_appearance_ordered());
        assert_eq!(b.relabel_by_first_appearance(), b);
        assert_eq!(b.triplet(0).key(), (0, 0, 1));
        assert_eq!(b.triplet(1).key(), (1, 0, 2));
        assert_eq!(b.entity_name(0), "e2");
    }

    #[test]
    fn vocab_json_keeps_lookup() {
        let v = RelationVocab::from_names(["p", "q"]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["p","q"]"#);
        let back: RelationVocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back.get("q"), Some(1));
        assert_eq!(back, v);
    }
}
