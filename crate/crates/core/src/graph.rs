//! Connected components of the undirected view of a knowledge graph.

use std::collections::VecDeque;

use crate::kg::{EdgeId, EntityId, KnowledgeGraph};

/// Component membership with a dense per-component local index.
///
/// Components are numbered by their smallest vertex id; members and edges
/// are listed in ascending id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    comp_of: Vec<u32>,
    local_of: Vec<u32>,
    members: Vec<Vec<EntityId>>,
    edges: Vec<Vec<EdgeId>>,
}

impl Components {
    pub fn of(kg: &KnowledgeGraph) -> Self {
        let n = kg.num_entities();
        let mut comp_of = vec![u32::MAX; n];
        let mut members: Vec<Vec<EntityId>> = Vec::new();
        let mut queue = VecDeque::new();
        for s in 0..n {
            if comp_of[s] != u32::MAX {
                continue;
            }
            let c = members.len() as u32;
            comp_of[s] = c;
            queue.push_back(s);
            let mut list = Vec::new();
            while let Some(v) = queue.pop_front() {
                list.push(v);
                for &e in kg.incident(v) {
                    let w = kg.triplet(e).other(v);
                    if comp_of[w] == u32::MAX {
                        comp_of[w] = c;
                        queue.push_back(w);
                    }
                }
            }
            list.sort_unstable();
            members.push(list);
        }
        let mut local_of = vec![0u32; n];
        for list in &members {
            for (i, &v) in list.iter().enumerate() {
                local_of[v] = i as u32;
            }
        }
        let mut edges = vec![Vec::new(); members.len()];
        for t in kg.triplets() {
            edges[comp_of[t.head] as usize].push(t.edge_id);
        }
        Self {
            comp_of,
            local_of,
            members,
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn component_of(&self, v: EntityId) -> usize {
        self.comp_of[v] as usize
    }

    pub fn local_index(&self, v: EntityId) -> usize {
        self.local_of[v] as usize
    }

    pub fn members(&self, c: usize) -> &[EntityId] {
        &self.members[c]
    }

    pub fn edges(&self, c: usize) -> &[EdgeId] {
        &self.edges[c]
    }

    /// Betti number of component `c`.
    pub fn betti(&self, c: usize) -> usize {
        self.edges[c].len() + 1 - self.members[c].len()
    }
}
