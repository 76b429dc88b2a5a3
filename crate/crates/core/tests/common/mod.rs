//! Graph generators and brute-force oracles shared by the integration
//! tests. Nothing here calls into the library's algebra.
#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use cyclekit::kg::{EdgeId, KnowledgeGraph, RelationVocab};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RELATIONS: [&str; 3] = ["r0", "r1", "r2"];

/// Connected multigraph: a random spanning tree over `n` shuffled vertices,
/// then extra edges (parallel ones included) up to `m` in total.
pub fn random_connected<R: Rng>(rng: &mut R, n: usize, m: usize) -> KnowledgeGraph {
    assert!(n >= 1 && m + 1 >= n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut seen = HashSet::new();
    let mut triples = Vec::with_capacity(m);
    for i in 1..n {
        let (a, b) = (order[i], order[rng.random_range(0..i)]);
        let (h, t) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
        let r = rng.random_range(0..RELATIONS.len());
        seen.insert((h, r, t));
        triples.push((h, r, t));
    }
    let possible = n * (n - 1) * RELATIONS.len();
    while triples.len() < m.min(possible) {
        let h = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        let r = rng.random_range(0..RELATIONS.len());
        if h != t && seen.insert((h, r, t)) {
            triples.push((h, r, t));
        }
    }
    triples.shuffle(rng);
    KnowledgeGraph::from_triples(n, RelationVocab::from_names(RELATIONS), triples)
}

/// Any multigraph, possibly disconnected, with exactly `m` edges.
pub fn random_multigraph<R: Rng>(rng: &mut R, n: usize, m: usize) -> KnowledgeGraph {
    assert!(n >= 2 && m <= n * (n - 1) * RELATIONS.len());
    let mut seen = HashSet::new();
    let mut triples = Vec::with_capacity(m);
    while triples.len() < m {
        let h = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        let r = rng.random_range(0..RELATIONS.len());
        if h != t && seen.insert((h, r, t)) {
            triples.push((h, r, t));
        }
    }
    KnowledgeGraph::from_triples(n, RelationVocab::from_names(RELATIONS), triples)
}

/// Number of connected components, by union-find.
pub fn count_components(kg: &KnowledgeGraph) -> usize {
    let n = kg.num_entities();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut count = n;
    for t in kg.triplets() {
        let (a, b) = (find(&mut parent, t.head), find(&mut parent, t.tail));
        if a != b {
            parent[a] = b;
            count -= 1;
        }
    }
    count
}

pub fn betti(kg: &KnowledgeGraph) -> usize {
    kg.num_edges() + count_components(kg) - kg.num_entities()
}

/// Every vertex touched an even number of times.
pub fn even_degrees(kg: &KnowledgeGraph, edges: impl IntoIterator<Item = EdgeId>) -> bool {
    let mut deg: HashMap<usize, usize> = HashMap::new();
    for e in edges {
        let t = kg.triplet(e);
        *deg.entry(t.head).or_default() += 1;
        *deg.entry(t.tail).or_default() += 1;
    }
    deg.values().all(|d| d % 2 == 0)
}

/// Edge sets as 0/1 rows, reduced by plain Gaussian elimination.
pub fn gf2_rank(sets: &[Vec<EdgeId>], universe: usize) -> usize {
    let mut rows: Vec<Vec<bool>> = sets
        .iter()
        .map(|s| {
            let mut r = vec![false; universe];
            for &e in s {
                r[e] ^= true;
            }
            r
        })
        .collect();
    let mut rank = 0;
    for col in 0..universe {
        let Some(p) = (rank..rows.len()).find(|&i| rows[i][col]) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && row[col] {
                for (x, &y) in row.iter_mut().zip(&pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// XOR of the selected edge sets, as a sorted list.
pub fn xor_sets<'a>(sets: impl IntoIterator<Item = &'a Vec<EdgeId>>) -> Vec<EdgeId> {
    let mut acc: HashSet<EdgeId> = HashSet::new();
    for s in sets {
        for &e in s {
            if !acc.remove(&e) {
                acc.insert(e);
            }
        }
    }
    let mut v: Vec<EdgeId> = acc.into_iter().collect();
    v.sort_unstable();
    v
}

/// Edges of the 2-core: leaves peeled off until every vertex left has
/// degree at least two.
pub fn two_core_edges(kg: &KnowledgeGraph) -> Vec<bool> {
    let mut alive = vec![true; kg.num_edges()];
    let mut deg: Vec<usize> = (0..kg.num_entities()).map(|v| kg.incident(v).len()).collect();
    let mut stack: Vec<usize> = (0..kg.num_entities()).filter(|&v| deg[v] == 1).collect();
    while let Some(v) = stack.pop() {
        for &e in kg.incident(v) {
            if alive[e] {
                alive[e] = false;
                deg[v] -= 1;
                let w = kg.triplet(e).other(v);
                deg[w] -= 1;
                if deg[w] == 1 {
                    stack.push(w);
                }
            }
        }
    }
    alive
}

/// An elementary cycle found by a random walk on the 2-core that never
/// immediately reuses its last edge: the loop closed at the first revisited
/// vertex. `None` when the graph is a forest.
pub fn random_walk_cycle<R: Rng>(kg: &KnowledgeGraph, rng: &mut R) -> Option<Vec<EdgeId>> {
    let core = two_core_edges(kg);
    let starts: Vec<usize> = (0..kg.num_entities())
        .filter(|&v| kg.incident(v).iter().any(|&e| core[e]))
        .collect();
    if starts.is_empty() {
        return None;
    }
    let mut v = starts[rng.random_range(0..starts.len())];
    let mut pos: HashMap<usize, usize> = HashMap::from([(v, 0)]);
    let mut walk_edges: Vec<EdgeId> = Vec::new();
    loop {
        let options: Vec<EdgeId> = kg
            .incident(v)
            .iter()
            .copied()
            .filter(|&e| core[e] && walk_edges.last() != Some(&e))
            .collect();
        let e = options[rng.random_range(0..options.len())];
        let next = kg.triplet(e).other(v);
        walk_edges.push(e);
        if let Some(&i) = pos.get(&next) {
            let mut cyc = walk_edges[i..].to_vec();
            cyc.sort_unstable();
            return Some(cyc);
        }
        pos.insert(next, walk_edges.len());
        v = next;
    }
}

/// Vertices of an edge set each have degree exactly two and the set is
/// connected: an elementary cycle.
pub fn is_elementary(kg: &KnowledgeGraph, edges: &[EdgeId]) -> bool {
    if edges.is_empty() {
        return false;
    }
    let mut deg: HashMap<usize, Vec<EdgeId>> = HashMap::new();
    for &e in edges {
        let t = kg.triplet(e);
        deg.entry(t.head).or_default().push(e);
        deg.entry(t.tail).or_default().push(e);
    }
    if deg.values().any(|v| v.len() != 2) {
        return false;
    }
    let first = kg.triplet(edges[0]).head;
    let mut seen = HashSet::from([first]);
    let mut stack = vec![first];
    while let Some(v) = stack.pop() {
        for &e in &deg[&v] {
            let w = kg.triplet(e).other(v);
            if seen.insert(w) {
                stack.push(w);
            }
        }
    }
    seen.len() == deg.len()
}

/// `kg` with entity ids shuffled; names travel with their entities and the
/// triple order is kept.
pub fn permute(kg: &KnowledgeGraph, seed: u64) -> KnowledgeGraph {
    let mut perm: Vec<usize> = (0..kg.num_entities()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut names = vec![String::new(); kg.num_entities()];
    for (old, &new) in perm.iter().enumerate() {
        names[new] = kg.entity_name(old).to_string();
    }
    KnowledgeGraph::from_triples(
        kg.num_entities(),
        kg.relations().clone(),
        kg.triplets().iter().map(|t| (perm[t.head], t.relation, perm[t.tail])),
    )
    .with_entity_names(names)
}
