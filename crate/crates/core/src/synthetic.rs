//! Rule-structured random knowledge graphs for tests, benchmarks and
//! offline runs.
//!
//! Two base relations `a` and `b` are drawn at random. Most `a` and `b` edges
//! get an inverse-style partner (`a_inv`, `b_inv`) closing a 2-cycle, and
//! chains `a(x, y) ∧ b(y, z)` often get a shortcut `c(x, z)` closing a
//! triangle. A small fraction of random edges is added as noise.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kg::{EntityId, KgError, KnowledgeGraph, RelationVocab};

pub const RELATIONS: [&str; 5] = ["a", "b", "c", "a_inv", "b_inv"];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub entities: usize,
    /// Chance that an entity gets an outgoing `a` (and, separately, `b`) edge.
    pub base_rate: f64,
    pub inverse_rate: f64,
    pub compose_rate: f64,
    /// Random edges added, as a fraction of the rule-generated ones.
    pub noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            entities: 600,
            base_rate: 0.5,
            inverse_rate: 0.8,
            compose_rate: 0.6,
            noise: 0.03,
        }
    }
}

/// One split with entity names `{prefix}{i}`. Entity ids follow first
/// appearance in the triplet list, as when loading from disk.
pub fn generate(cfg: &SyntheticConfig, prefix: &str, seed: u64) -> KnowledgeGraph {
    let n = cfg.entities;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(EntityId, usize, EntityId)> = Vec::new();
    let mut seen: HashSet<(EntityId, usize, EntityId)> = HashSet::new();
    let mut push = |e: (EntityId, usize, EntityId), edges: &mut Vec<_>| {
        if e.0 != e.2 && seen.insert(e) {
            edges.push(e);
        }
    };
    if n >= 2 {
        let mut out_a: Vec<Vec<EntityId>> = vec![Vec::new(); n];
        let mut out_b: Vec<Vec<EntityId>> = vec![Vec::new(); n];
        for x in 0..n {
            for (rel, out) in [(0usize, &mut out_a), (1, &mut out_b)] {
                if rng.random_bool(cfg.base_rate) {
                    let y = rng.random_range(0..n);
                    if y != x {
                        out[x].push(y);
                        push((x, rel, y), &mut edges);
                    }
                }
            }
        }
        for x in 0..n {
            for &y in &out_a[x] {
                if rng.random_bool(cfg.inverse_rate) {
                    push((y, 3, x), &mut edges);
                }
                for &z in &out_b[y] {
                    if rng.random_bool(cfg.compose_rate) {
                        push((x, 2, z), &mut edges);
                    }
                }
            }
            for &y in &out_b[x] {
                if rng.random_bool(cfg.inverse_rate) {
                    push((y, 4, x), &mut edges);
                }
            }
        }
        let extra = (edges.len() as f64 * cfg.noise).round() as usize;
        for _ in 0..extra {
            let e = (
                rng.random_range(0..n),
                rng.random_range(0..RELATIONS.len()),
                rng.random_range(0..n),
            );
            push(e, &mut edges);
        }
    }
    let names: Vec<String> = (0..n).map(|i| format!("{prefix}{i}")).collect();
    let kg = KnowledgeGraph::from_triples(n, RelationVocab::from_names(RELATIONS), edges)
        .with_entity_names(names)
        .relabel_by_first_appearance();
    // isolated entities sort last; drop them, a file cannot mention them
    let used = kg.triplets().iter().map(|t| t.head.max(t.tail) + 1).max().unwrap_or(0);
    KnowledgeGraph::from_triples(used, kg.relations().clone(), kg.triplets().iter().map(|t| t.key()))
        .with_entity_names(kg.entity_names()[..used].to_vec())
}

/// Writes `train.txt` and `test.txt` with disjoint entities, in the format
/// `load_dataset` reads.
pub fn write_dataset(
    dir: &Path,
    train: &SyntheticConfig,
    test: &SyntheticConfig,
    seed: u64,
) -> Result<(), KgError> {
    let io = |source| KgError::Io {
        path: dir.to_path_buf(),
        source,
    };
    fs::create_dir_all(dir).map_err(io)?;
    for (file, cfg, prefix, s) in [
        ("train.txt", train, "tr", seed),
        ("test.txt", test, "te", seed.wrapping_add(1)),
    ] {
        let kg = generate(cfg, prefix, s);
        let path = dir.join(file);
        let mut w = std::io::BufWriter::new(fs::File::create(&path).map_err(io)?);
        for t in kg.triplets() {
            writeln!(
                w,
                "{}\t{}\t{}",
                kg.entity_name(t.head),
                kg.relations().name(t.relation),
                kg.entity_name(t.tail)
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::load_dataset;

    #[test]
    fn deterministic_and_rule_shaped() {
        let cfg = SyntheticConfig::default();
        let a = generate(&cfg, "x", 4);
        assert_eq!(a, generate(&cfg, "x", 4));
        assert_ne!(a.triplets(), generate(&cfg, "x", 5).triplets());
        assert!(a.num_edges() > cfg.entities);
        // most a-edges have their partner
        let a_edges: Vec<_> = a.triplets().iter().filter(|t| t.relation == 0).collect();
        let paired = a_edges.iter().filter(|t| a.contains(t.tail, 3, t.head)).count();
        assert!(paired * 10 >= a_edges.len() * 6);
        assert!(a.triplets().iter().all(|t| t.head != t.tail));
    }

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SyntheticConfig {
            entities: 80,
            ..Default::default()
        };
        write_dataset(dir.path(), &cfg, &cfg, 9).unwrap();
        let ds = load_dataset(dir.path()).unwrap();
        let named = |kg: &KnowledgeGraph| -> Vec<(String, String, String)> {
            kg.triplets()
                .iter()
                .map(|t| {
                    (
                        kg.entity_name(t.head).to_string(),
                        kg.relations().name(t.relation).to_string(),
                        kg.entity_name(t.tail).to_string(),
                    )
                })
                .collect()
        };
        let mem = generate(&cfg, "tr", 9);
        assert_eq!(named(&ds.train), named(&mem));
        assert_eq!(ds.train.num_entities(), mem.num_entities());
        assert!(ds.test.num_edges() > 0);
    }
}
