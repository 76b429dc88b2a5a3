//! Shortest-path-tree cycle bases and their cycle incidence matrices.
//!
//! For every connected component with cycles, `k` BFS trees are grown from
//! selected roots; each non-tree edge closes one elementary cycle with the
//! two tree paths down from the endpoints' least common ancestor. Basis
//! slot `i` is the union over components of each component's `i`-th basis
//! (components with fewer roots reuse them cyclically), so every slot spans
//! the full cycle space of the graph.

pub mod cache;
pub mod spectral;
pub mod spt;

use std::collections::HashMap;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::Components;
use crate::kg::{EdgeId, EntityId, KnowledgeGraph};
use crate::par;
use crate::z2::{BitVector, Z2Chain};

pub use spt::{build_spt, build_spt_in, lca, SptTree};

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("vertices {0} and {1} lie in different components")]
    DifferentComponents(EntityId, EntityId),
    #[error("corrupt basis data: {0}")]
    Corrupt(String),
    #[error("basis cache: {0}")]
    Cache(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One elementary cycle per non-tree edge of a component's BFS tree.
#[derive(Debug, Clone)]
pub struct SptCycleBasis {
    tree: SptTree,
    cycles: Vec<Vec<EdgeId>>,
    nontree_edge: Vec<EdgeId>,
}

impl SptCycleBasis {
    pub fn tree(&self) -> &SptTree {
        &self.tree
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }

    /// Edge ids of cycle `j`, ascending.
    pub fn cycle(&self, j: usize) -> &[EdgeId] {
        &self.cycles[j]
    }

    pub fn cycles(&self) -> &[Vec<EdgeId>] {
        &self.cycles
    }

    pub fn nontree_edge(&self, j: usize) -> EdgeId {
        self.nontree_edge[j]
    }

    pub fn nontree_edges(&self) -> &[EdgeId] {
        &self.nontree_edge
    }

    pub fn cycle_length(&self, j: usize) -> usize {
        self.cycles[j].len()
    }

    /// Cycle `j` as a chain over an edge universe of `universe` edges.
    pub fn chain(&self, j: usize, universe: usize) -> Z2Chain {
        Z2Chain::from_edges(universe, self.cycles[j].iter().copied())
    }
}

/// Builds the SPT cycle basis of `tree`'s component. Non-tree edges are
/// visited in ascending id order.
pub fn spt_cycle_basis(kg: &KnowledgeGraph, tree: &SptTree) -> SptCycleBasis {
    let comps = tree.components();
    let mut is_tree = BitVector::zeros(kg.num_edges());
    for e in tree.parent_edges().iter().flatten() {
        is_tree.set(*e, true);
    }
    let mut cycles = Vec::new();
    let mut nontree = Vec::new();
    let mut path = Vec::new();
    for &e in comps.edges(tree.component_id()) {
        if is_tree.get(e) {
            continue;
        }
        let t = kg.triplet(e);
        let top = lca(tree, t.head, t.tail).expect("edge endpoints share a component");
        path.clear();
        path.push(e);
        spt::path_to_ancestor(tree, t.head, top, &mut path);
        spt::path_to_ancestor(tree, t.tail, top, &mut path);
        path.sort_unstable();
        cycles.push(path.clone());
        nontree.push(e);
    }
    SptCycleBasis {
        tree: tree.clone(),
        cycles,
        nontree_edge: nontree,
    }
}

/// Sparse |E|×β binary matrix: entry (i, j) is set iff cycle j contains
/// edge i. Stored both column-wise and row-wise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    num_rows: usize,
    columns: Vec<Vec<EdgeId>>,
    row_ptr: Vec<usize>,
    row_cols: Vec<u32>,
}

impl IncidenceMatrix {
    /// Each column must list distinct edge ids below `num_rows`.
    pub fn from_columns(num_rows: usize, mut columns: Vec<Vec<EdgeId>>) -> Self {
        let mut counts = vec![0usize; num_rows + 1];
        for col in columns.iter_mut() {
            col.sort_unstable();
            for &e in col.iter() {
                assert!(e < num_rows, "edge {e} outside {num_rows} rows");
                counts[e + 1] += 1;
            }
        }
        for i in 0..num_rows {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut fill = counts;
        let mut row_cols = vec![0u32; row_ptr[num_rows]];
        for (j, col) in columns.iter().enumerate() {
            for &e in col {
                row_cols[fill[e]] = j as u32;
                fill[e] += 1;
            }
        }
        Self {
            num_rows,
            columns,
            row_ptr,
            row_cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.num_rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    /// Cycles through edge `e`, ascending.
    pub fn row(&self, e: EdgeId) -> &[u32] {
        &self.row_cols[self.row_ptr[e]..self.row_ptr[e + 1]]
    }

    pub fn column(&self, j: usize) -> &[EdgeId] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<EdgeId>] {
        &self.columns
    }

    pub fn entry(&self, e: EdgeId, j: usize) -> bool {
        self.row(e).binary_search(&(j as u32)).is_ok()
    }

    pub fn nnz(&self) -> usize {
        self.row_cols.len()
    }
}

pub fn cycle_incidence_matrix(basis: &SptCycleBasis, num_edges: usize) -> IncidenceMatrix {
    IncidenceMatrix::from_columns(num_edges, basis.cycles.clone())
}

/// How SPT roots are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum RootMode {
    /// Nearest vertices to spectral-clustering centres.
    Cluster,
    /// Uniformly sampled vertices.
    Random,
}

/// Root set S, per component (components without cycles get their lowest
/// vertex and are never clustered).
pub fn select_roots(
    kg: &KnowledgeGraph,
    comps: &Components,
    k: usize,
    seed: u64,
    mode: RootMode,
) -> Result<Vec<Vec<EntityId>>, BasisError> {
    if k == 0 {
        return Err(BasisError::ZeroK);
    }
    let cyclic: Vec<usize> = (0..comps.len()).filter(|&c| comps.betti(c) > 0).collect();
    let sizes: Vec<usize> = cyclic.iter().map(|&c| comps.members(c).len()).collect();
    let alloc = spectral::allocate_roots(&sizes, k);
    let mut roots: Vec<Vec<EntityId>> = (0..comps.len())
        .map(|c| vec![comps.members(c)[0]])
        .collect();
    let picked = par::map_indexed(cyclic.len(), |i| {
        let c = cyclic[i];
        let cseed = seed ^ (c as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        match mode {
            RootMode::Cluster => spectral::component_roots(kg, comps, c, alloc[i], cseed),
            RootMode::Random => {
                let members = comps.members(c);
                let mut rng = ChaCha8Rng::seed_from_u64(cseed);
                let mut r: Vec<EntityId> = sample(&mut rng, members.len(), alloc[i])
                    .into_iter()
                    .map(|j| members[j])
                    .collect();
                r.sort_unstable();
                r
            }
        }
    });
    for (i, r) in picked.into_iter().enumerate() {
        roots[cyclic[i]] = r;
    }
    Ok(roots)
}

/// Spectral root set S flattened in component order.
pub fn spectral_roots(kg: &KnowledgeGraph, k: usize, seed: u64) -> Result<Vec<EntityId>, BasisError> {
    let comps = Components::of(kg);
    Ok(select_roots(kg, &comps, k, seed, RootMode::Cluster)?
        .into_iter()
        .flatten()
        .collect())
}

/// One basis slot: the union of one SPT basis per cyclic component.
#[derive(Debug, Clone)]
pub struct BasisSlot {
    parts: Vec<usize>,
    offsets: Vec<usize>,
    incidence: IncidenceMatrix,
}

impl BasisSlot {
    /// Indices into [`BasisSet::component_bases`], in component order.
    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn incidence(&self) -> &IncidenceMatrix {
        &self.incidence
    }

    pub fn num_cycles(&self) -> usize {
        self.incidence.cols()
    }

    /// First slot-level cycle index of each part.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}

/// k bases over a graph, sharing the edge universe.
#[derive(Debug, Clone)]
pub struct BasisSet {
    k: usize,
    seed: u64,
    mode: RootMode,
    num_edges: usize,
    comps: Arc<Components>,
    roots: Vec<Vec<EntityId>>,
    bases: Vec<SptCycleBasis>,
    slots: Vec<BasisSlot>,
}

impl BasisSet {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> RootMode {
        self.mode
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn components(&self) -> &Arc<Components> {
        &self.comps
    }

    /// Roots per component.
    pub fn roots(&self) -> &[Vec<EntityId>] {
        &self.roots
    }

    /// Distinct (component, root) bases.
    pub fn component_bases(&self) -> &[SptCycleBasis] {
        &self.bases
    }

    pub fn slots(&self) -> &[BasisSlot] {
        &self.slots
    }

    pub fn slot(&self, i: usize) -> &BasisSlot {
        &self.slots[i]
    }

    /// (component basis, local cycle index) for slot-level cycle `j`.
    pub fn locate(&self, slot: usize, j: usize) -> (&SptCycleBasis, usize) {
        let s = &self.slots[slot];
        let p = s.offsets.partition_point(|&o| o <= j) - 1;
        (&self.bases[s.parts[p]], j - s.offsets[p])
    }

    /// Non-tree edge of slot-level cycle `j`.
    pub fn nontree_edge(&self, slot: usize, j: usize) -> EdgeId {
        let (b, l) = self.locate(slot, j);
        b.nontree_edge(l)
    }

    pub(crate) fn assemble(
        k: usize,
        seed: u64,
        mode: RootMode,
        num_edges: usize,
        comps: Arc<Components>,
        roots: Vec<Vec<EntityId>>,
        bases: Vec<SptCycleBasis>,
    ) -> Self {
        let mut index: HashMap<(usize, EntityId), usize> = HashMap::new();
        for (i, b) in bases.iter().enumerate() {
            index.insert((b.tree().component_id(), b.tree().root()), i);
        }
        let cyclic: Vec<usize> = (0..comps.len()).filter(|&c| comps.betti(c) > 0).collect();
        let slots = par::map_indexed(k, |s| {
            let mut parts = Vec::with_capacity(cyclic.len());
            let mut offsets = Vec::with_capacity(cyclic.len());
            let mut columns = Vec::new();
            for &c in &cyclic {
                let r = &roots[c];
                let root = r[s % r.len()];
                let bi = index[&(c, root)];
                parts.push(bi);
                offsets.push(columns.len());
                columns.extend(bases[bi].cycles().iter().cloned());
            }
            BasisSlot {
                parts,
                offsets,
                incidence: IncidenceMatrix::from_columns(num_edges, columns),
            }
        });
        Self {
            k,
            seed,
            mode,
            num_edges,
            comps,
            roots,
            bases,
            slots,
        }
    }
}

/// Roots, k SPTs per cyclic component, their cycle bases and the k slot
/// incidence matrices.
pub fn build_all_bases(
    kg: &KnowledgeGraph,
    k: usize,
    seed: u64,
    mode: RootMode,
) -> Result<BasisSet, BasisError> {
    let comps = Arc::new(Components::of(kg));
    let roots = select_roots(kg, &comps, k, seed, mode)?;
    build_bases_from_roots(kg, comps, roots, k, seed, mode)
}

pub(crate) fn build_bases_from_roots(
    kg: &KnowledgeGraph,
    comps: Arc<Components>,
    roots: Vec<Vec<EntityId>>,
    k: usize,
    seed: u64,
    mode: RootMode,
) -> Result<BasisSet, BasisError> {
    if k == 0 {
        return Err(BasisError::ZeroK);
    }
    let mut jobs = Vec::new();
    for c in 0..comps.len() {
        if comps.betti(c) == 0 {
            continue;
        }
        // only the roots some slot will actually use
        let used = roots[c].len().min(k);
        for &r in &roots[c][..used] {
            jobs.push(r);
        }
    }
    let bases = par::map_slice(&jobs, |&r| {
        let tree = build_spt_in(kg, &comps, r);
        spt_cycle_basis(kg, &tree)
    });
    let set = BasisSet::assemble(k, seed, mode, kg.num_edges(), comps, roots, bases);
    #[cfg(debug_assertions)]
    debug_check(kg, &set);
    Ok(set)
}

/// Cheap structural checks on every basis (debug builds only).
#[cfg(debug_assertions)]
fn debug_check(kg: &KnowledgeGraph, set: &BasisSet) {
    let comps = set.components();
    for b in set.component_bases() {
        let c = b.tree().component_id();
        debug_assert_eq!(b.len(), comps.betti(c));
        let mut degree: HashMap<EntityId, u32> = HashMap::new();
        for (j, cyc) in b.cycles().iter().enumerate() {
            debug_assert!(cyc.binary_search(&b.nontree_edge(j)).is_ok());
            degree.clear();
            for &e in cyc {
                let t = kg.triplet(e);
                *degree.entry(t.head).or_default() += 1;
                *degree.entry(t.tail).or_default() += 1;
            }
            debug_assert!(degree.values().all(|d| d % 2 == 0));
        }
    }
}
