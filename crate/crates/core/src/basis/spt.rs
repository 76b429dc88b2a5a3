//! Breadth-first shortest-path trees and least common ancestors.

use std::sync::Arc;

use crate::graph::Components;
use crate::kg::{EdgeId, EntityId, KnowledgeGraph};

use super::BasisError;

const NONE: u32 = u32::MAX;

/// A BFS tree spanning one connected component. Per-vertex arrays are
/// indexed by the vertex's local index within its component.
#[derive(Debug, Clone)]
pub struct SptTree {
    root: EntityId,
    component: usize,
    comps: Arc<Components>,
    parent: Vec<u32>,
    parent_edge: Vec<Option<EdgeId>>,
    depth: Vec<u32>,
}

impl SptTree {
    pub fn root(&self) -> EntityId {
        self.root
    }

    pub fn component_id(&self) -> usize {
        self.component
    }

    pub fn components(&self) -> &Arc<Components> {
        &self.comps
    }

    pub fn vertices(&self) -> &[EntityId] {
        self.comps.members(self.component)
    }

    pub fn contains(&self, v: EntityId) -> bool {
        self.comps.component_of(v) == self.component
    }

    fn local(&self, v: EntityId) -> usize {
        debug_assert!(self.contains(v));
        self.comps.local_index(v)
    }

    pub fn depth(&self, v: EntityId) -> usize {
        self.depth[self.local(v)] as usize
    }

    pub fn parent_edge(&self, v: EntityId) -> Option<EdgeId> {
        self.parent_edge[self.local(v)]
    }

    pub fn parent(&self, v: EntityId) -> Option<EntityId> {
        match self.parent[self.local(v)] {
            NONE => None,
            p => Some(self.vertices()[p as usize]),
        }
    }

    /// Parent edge per local vertex index (absent at the root).
    pub fn parent_edges(&self) -> &[Option<EdgeId>] {
        &self.parent_edge
    }

    /// Tree edges in ascending id order.
    pub fn tree_edges(&self) -> Vec<EdgeId> {
        let mut out: Vec<EdgeId> = self.parent_edge.iter().flatten().copied().collect();
        out.sort_unstable();
        out
    }

    /// Rebuilds a tree from a stored parent-edge array.
    pub fn from_parent_edges(
        kg: &KnowledgeGraph,
        comps: Arc<Components>,
        root: EntityId,
        parent_edge: Vec<Option<EdgeId>>,
    ) -> Result<Self, BasisError> {
        let component = comps.component_of(root);
        let members = comps.members(component);
        if parent_edge.len() != members.len() {
            return Err(BasisError::Corrupt("parent array length".into()));
        }
        let mut parent = vec![NONE; members.len()];
        for (i, pe) in parent_edge.iter().enumerate() {
            if let Some(e) = *pe {
                let t = kg.triplets().get(e).ok_or_else(|| {
                    BasisError::Corrupt(format!("edge {e} outside the graph"))
                })?;
                let v = members[i];
                if t.head != v && t.tail != v {
                    return Err(BasisError::Corrupt(format!("edge {e} not incident")));
                }
                parent[i] = comps.local_index(t.other(v)) as u32;
            }
        }
        let root_local = comps.local_index(root);
        if parent[root_local] != NONE {
            return Err(BasisError::Corrupt("root has a parent".into()));
        }
        let mut depth = vec![NONE; members.len()];
        depth[root_local] = 0;
        let mut chain = Vec::new();
        for i in 0..members.len() {
            chain.clear();
            let mut cur = i;
            while depth[cur] == NONE {
                chain.push(cur);
                if parent[cur] == NONE || chain.len() > members.len() {
                    return Err(BasisError::Corrupt("parent array is not a tree".into()));
                }
                cur = parent[cur] as usize;
            }
            let mut d = depth[cur];
            for &c in chain.iter().rev() {
                d += 1;
                depth[c] = d;
            }
        }
        Ok(Self {
            root,
            component,
            comps,
            parent,
            parent_edge,
            depth,
        })
    }
}

/// BFS tree rooted at `root`.
pub fn build_spt(kg: &KnowledgeGraph, root: EntityId) -> SptTree {
    build_spt_in(kg, &Arc::new(Components::of(kg)), root)
}

/// BFS over `root`'s component. Each level is processed in ascending vertex
/// id order and incident edges in ascending edge id order; a vertex's
/// parent edge is the first edge that reaches it.
pub fn build_spt_in(kg: &KnowledgeGraph, comps: &Arc<Components>, root: EntityId) -> SptTree {
    let component = comps.component_of(root);
    let n = comps.members(component).len();
    let mut parent = vec![NONE; n];
    let mut parent_edge = vec![None; n];
    let mut depth = vec![NONE; n];
    depth[comps.local_index(root)] = 0;

    let mut level = vec![root];
    let mut next = Vec::new();
    let mut d = 0u32;
    while !level.is_empty() {
        for &v in &level {
            let lv = comps.local_index(v);
            for &e in kg.incident(v) {
                let w = kg.triplet(e).other(v);
                let lw = comps.local_index(w);
                if depth[lw] == NONE {
                    depth[lw] = d + 1;
                    parent[lw] = lv as u32;
                    parent_edge[lw] = Some(e);
                    next.push(w);
                }
            }
        }
        next.sort_unstable();
        std::mem::swap(&mut level, &mut next);
        next.clear();
        d += 1;
    }
    SptTree {
        root,
        component,
        comps: Arc::clone(comps),
        parent,
        parent_edge,
        depth,
    }
}

/// Least common ancestor by equalising depths and walking up in lockstep.
pub fn lca(tree: &SptTree, u: EntityId, v: EntityId) -> Result<EntityId, BasisError> {
    if !tree.contains(u) || !tree.contains(v) {
        return Err(BasisError::DifferentComponents(u, v));
    }
    let mut a = tree.local(u);
    let mut b = tree.local(v);
    while tree.depth[a] > tree.depth[b] {
        a = tree.parent[a] as usize;
    }
    while tree.depth[b] > tree.depth[a] {
        b = tree.parent[b] as usize;
    }
    while a != b {
        a = tree.parent[a] as usize;
        b = tree.parent[b] as usize;
    }
    Ok(tree.vertices()[a])
}

/// Tree edges on the path from `v` up to its ancestor `anc`.
pub(crate) fn path_to_ancestor(tree: &SptTree, v: EntityId, anc: EntityId, out: &mut Vec<EdgeId>) {
    let mut cur = tree.local(v);
    let stop = tree.local(anc);
    while cur != stop {
        out.push(tree.parent_edge[cur].expect("ancestor not reached"));
        cur = tree.parent[cur] as usize;
    }
}
