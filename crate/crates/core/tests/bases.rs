mod common;

use std::collections::{HashSet, VecDeque};

use common::*;
use cyclekit::basis::cache::{decode, encode};
use cyclekit::basis::{build_all_bases, build_spt, spt_cycle_basis, RootMode};
use cyclekit::cycle_graph::{build_cycle_graph, cycle_overlap};
use cyclekit::kg::KnowledgeGraph;
use cyclekit::z2::{boundary_matrix, solve_in_span, z2_rank, Z2Chain};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph(seed: u64, n: usize, extra: usize) -> KnowledgeGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_connected(&mut rng, n, n - 1 + extra)
}

fn bfs_depths(kg: &KnowledgeGraph, root: usize) -> Vec<Option<usize>> {
    let mut d = vec![None; kg.num_entities()];
    d[root] = Some(0);
    let mut q = VecDeque::from([root]);
    while let Some(v) = q.pop_front() {
        for &e in kg.incident(v) {
            let w = kg.triplet(e).other(v);
            if d[w].is_none() {
                d[w] = Some(d[v].unwrap() + 1);
                q.push_back(w);
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spt_basis_is_a_fundamental_basis(seed in any::<u64>(), n in 2usize..30, extra in 0usize..40) {
        let kg = graph(seed, n, extra);
        let root = (seed % n as u64) as usize;
        let tree = build_spt(&kg, root);
        let depth = bfs_depths(&kg, root);
        for v in 0..n {
            prop_assert_eq!(Some(tree.depth(v)), depth[v]);
        }
        let basis = spt_cycle_basis(&kg, &tree);
        let beta = betti(&kg);
        prop_assert_eq!(basis.len(), beta);
        let tree_edges: HashSet<usize> = tree.tree_edges().into_iter().collect();
        prop_assert_eq!(tree_edges.len(), n - 1);
        for (j, cyc) in basis.cycles().iter().enumerate() {
            prop_assert!(even_degrees(&kg, cyc.iter().copied()));
            prop_assert!(is_elementary(&kg, cyc));
            let off_tree: Vec<usize> = cyc.iter().copied().filter(|e| !tree_edges.contains(e)).collect();
            prop_assert_eq!(off_tree, vec![basis.nontree_edge(j)]);
        }
        prop_assert_eq!(gf2_rank(basis.cycles(), kg.num_edges()), beta);
    }

    #[test]
    fn boundary_is_linear(seed in any::<u64>(), n in 2usize..25, extra in 0usize..30,
                          a in prop::collection::vec(any::<bool>(), 60),
                          b in prop::collection::vec(any::<bool>(), 60)) {
        let kg = graph(seed, n, extra);
        let m = kg.num_edges();
        // at most 24 + 30 edges, so every edge has a bit
        let pick = |bits: &[bool]| (0..m).filter(|&e| bits[e]).collect::<Vec<_>>();
        let (ea, eb) = (pick(&a), pick(&b));
        let ca = Z2Chain::from_edges(m, ea.iter().copied());
        let cb = Z2Chain::from_edges(m, eb.iter().copied());
        let sum = Z2Chain::from_edges(m, xor_sets([&ea, &eb]));
        let bm = boundary_matrix(&kg);
        let mut lhs = bm.apply(&ca).unwrap();
        lhs.xor_assign(&bm.apply(&cb).unwrap());
        prop_assert!(lhs == bm.apply(&sum).unwrap());
        prop_assert_eq!(bm.is_cycle(&sum).unwrap(), even_degrees(&kg, sum.edges()));
    }

    #[test]
    fn random_walk_cycles_lie_in_every_slot(seed in any::<u64>(), n in 3usize..25, extra in 1usize..30) {
        let kg = graph(seed, n, extra);
        let set = build_all_bases(&kg, 3, seed, RootMode::Random).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for _ in 0..5 {
            let Some(cyc) = random_walk_cycle(&kg, &mut rng) else { continue };
            prop_assert!(is_elementary(&kg, &cyc));
            let target = Z2Chain::from_edges(kg.num_edges(), cyc.iter().copied());
            for slot in set.slots() {
                let cols = slot.incidence().columns();
                let chains: Vec<Z2Chain> =
                    cols.iter().map(|c| Z2Chain::from_edges(kg.num_edges(), c.iter().copied())).collect();
                let alpha = solve_in_span(&chains, &target).unwrap();
                prop_assert!(alpha.is_some());
                let alpha = alpha.unwrap();
                let chosen: Vec<&Vec<usize>> = alpha.ones().map(|i| &cols[i]).collect();
                prop_assert_eq!(xor_sets(chosen), cyc.clone());
            }
        }
    }

    #[test]
    fn overlap_counts_shared_edges(seed in any::<u64>(), n in 3usize..20, extra in 1usize..25, m in 1usize..4) {
        let kg = graph(seed, n, extra);
        let set = build_all_bases(&kg, 1, seed, RootMode::Cluster).unwrap();
        let ct = set.slot(0).incidence();
        let ov = cycle_overlap(ct);
        let cols = ct.columns();
        for i in 0..cols.len() {
            for j in 0..cols.len() {
                let a: HashSet<_> = cols[i].iter().collect();
                let shared = cols[j].iter().filter(|e| a.contains(e)).count();
                prop_assert_eq!(ov.get(i, j) as usize, shared);
                prop_assert_eq!(ov.get(i, j), ov.get(j, i));
            }
        }
        let small = build_cycle_graph(&ov, m);
        let large = build_cycle_graph(&ov, m + 1);
        let big: HashSet<_> = large.edges().iter().collect();
        prop_assert!(small.edges().iter().all(|e| big.contains(e)));
        for (&(a, b), &c) in small.edges().iter().zip(small.overlaps()) {
            prop_assert!(a < b && c > 0);
            prop_assert_eq!(c, ov.get(a as usize, b as usize));
        }
    }
}

#[test]
fn overlap_follows_a_column_permutation() {
    let kg = graph(11, 18, 20);
    let set = build_all_bases(&kg, 1, 0, RootMode::Cluster).unwrap();
    let cols = set.slot(0).incidence().columns().to_vec();
    let ov = cycle_overlap(set.slot(0).incidence());
    let mut perm: Vec<usize> = (0..cols.len()).collect();
    perm.reverse();
    perm.rotate_left(3);
    let permuted = cyclekit::basis::IncidenceMatrix::from_columns(
        kg.num_edges(),
        perm.iter().map(|&p| cols[p].clone()).collect(),
    );
    let pov = cycle_overlap(&permuted);
    for i in 0..cols.len() {
        for j in 0..cols.len() {
            assert_eq!(pov.get(i, j), ov.get(perm[i], perm[j]));
        }
    }
}

#[test]
fn disconnected_graphs_get_one_basis_per_cyclic_component() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let kg = random_multigraph(&mut rng, 12, 14);
        let set = build_all_bases(&kg, 4, 1, RootMode::Cluster).unwrap();
        let beta = betti(&kg);
        for slot in set.slots() {
            assert_eq!(slot.num_cycles(), beta);
            let chains: Vec<Z2Chain> = slot
                .incidence()
                .columns()
                .iter()
                .map(|c| Z2Chain::from_edges(kg.num_edges(), c.iter().copied()))
                .collect();
            assert_eq!(z2_rank(&chains).unwrap(), beta);
            assert_eq!(gf2_rank(slot.incidence().columns(), kg.num_edges()), beta);
        }
    }
}

#[test]
fn construction_is_deterministic_and_cache_round_trips() {
    let kg = graph(5, 30, 35);
    for mode in [RootMode::Cluster, RootMode::Random] {
        let a = build_all_bases(&kg, 5, 9, mode).unwrap();
        let b = build_all_bases(&kg, 5, 9, mode).unwrap();
        assert_eq!(a.roots(), b.roots());
        let mut bytes = Vec::new();
        encode(&a, &kg, &mut bytes).unwrap();
        let mut again = Vec::new();
        encode(&b, &kg, &mut again).unwrap();
        assert_eq!(bytes, again);
        let back = decode(&mut bytes.as_slice(), &kg, 5, 9).unwrap();
        for (x, y) in back.slots().iter().zip(a.slots()) {
            assert_eq!(x.incidence(), y.incidence());
        }
        // a different graph or seed is refused
        assert!(decode(&mut bytes.as_slice(), &graph(6, 30, 35), 5, 9).is_err());
        assert!(decode(&mut bytes.as_slice(), &kg, 5, 10).is_err());
    }
}
