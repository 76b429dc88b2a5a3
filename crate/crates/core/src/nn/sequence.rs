//! Relation sequences read off a cycle in both traversal directions.

use std::collections::HashMap;

use super::NnError;
use crate::kg::{inverse_id, EdgeId, KnowledgeGraph};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSequence {
    /// Extended relation ids: `r` when an edge is walked head to tail,
    /// `r⁻¹` otherwise.
    pub tokens: Vec<u32>,
    pub start_edge: EdgeId,
}

/// Orients `cycle` into a closed walk that starts with `start_edge` walked
/// head to tail, and returns it together with the opposite traversal.
pub fn cycle_sequences(
    kg: &KnowledgeGraph,
    cycle: &[EdgeId],
    start_edge: EdgeId,
) -> Result<(RelationSequence, RelationSequence), NnError> {
    let tokens = forward_tokens(kg, cycle, start_edge)?;
    let reverse = reverse_tokens(&tokens, kg.num_relations());
    Ok((
        RelationSequence { tokens, start_edge },
        RelationSequence {
            tokens: reverse,
            start_edge,
        },
    ))
}

/// The opposite traversal: first token inverted, the rest reversed and
/// inverted.
pub fn reverse_tokens(tokens: &[u32], num_relations: usize) -> Vec<u32> {
    let inv = |t: u32| inverse_id(t as usize, num_relations) as u32;
    let mut out = Vec::with_capacity(tokens.len());
    if let Some((&first, rest)) = tokens.split_first() {
        out.push(inv(first));
        out.extend(rest.iter().rev().map(|&t| inv(t)));
    }
    out
}

fn forward_tokens(
    kg: &KnowledgeGraph,
    cycle: &[EdgeId],
    start: EdgeId,
) -> Result<Vec<u32>, NnError> {
    let malformed = || NnError::MalformedCycle { start };
    let Some(start_pos) = cycle.iter().position(|&e| e == start) else {
        return Err(malformed());
    };
    // every vertex of an elementary cycle has degree two
    let mut degree: Vec<(usize, u32)> = Vec::with_capacity(cycle.len());
    for &e in cycle {
        let t = kg.triplet(e);
        for v in [t.head, t.tail] {
            match degree.iter_mut().find(|(u, _)| *u == v) {
                Some((_, d)) => *d += 1,
                None => degree.push((v, 1)),
            }
        }
    }
    if degree.iter().any(|&(_, d)| d != 2) {
        return Err(malformed());
    }
    let r = kg.num_relations();
    let first = kg.triplet(start);
    let mut tokens = Vec::with_capacity(cycle.len());
    tokens.push(first.relation as u32);
    let mut used = vec![false; cycle.len()];
    used[start_pos] = true;
    let mut cur = first.tail;
    for _ in 1..cycle.len() {
        let next = (0..cycle.len()).find(|&i| {
            let t = kg.triplet(cycle[i]);
            !used[i] && (t.head == cur || t.tail == cur)
        });
        let Some(i) = next else {
            return Err(malformed());
        };
        used[i] = true;
        let t = kg.triplet(cycle[i]);
        if t.head == cur {
            tokens.push(t.relation as u32);
            cur = t.tail;
        } else {
            tokens.push(inverse_id(t.relation, r) as u32);
            cur = t.head;
        }
    }
    if cur != first.head {
        return Err(malformed());
    }
    Ok(tokens)
}

/// Distinct forward token sequences, numbered by first insertion.
#[derive(Debug, Clone, Default)]
pub struct SequenceTable {
    offsets: Vec<usize>,
    tokens: Vec<u32>,
    index: HashMap<Vec<u32>, u32>,
}

impl SequenceTable {
    pub fn new() -> Self {
        Self {
            offsets: vec![0],
            ..Default::default()
        }
    }

    pub fn insert(&mut self, seq: Vec<u32>) -> u32 {
        if let Some(&id) = self.index.get(&seq) {
            return id;
        }
        let id = self.len() as u32;
        self.tokens.extend_from_slice(&seq);
        self.offsets.push(self.tokens.len());
        self.index.insert(seq, id);
        id
    }

    pub fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: usize) -> &[u32] {
        &self.tokens[self.offsets[id]..self.offsets[id + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    pub fn total_tokens(&self) -> usize {
        self.tokens.len()
    }
}
