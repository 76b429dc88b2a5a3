//! The cycle graph of a basis: one node per basis cycle, joined to its most
//! strongly overlapping peers.

use std::io::Write;

use crate::basis::IncidenceMatrix;

/// Sparse symmetric β×β matrix of shared-edge counts (`C_Tᵀ·C_T`). Each row
/// is sorted by column and includes the diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapMatrix {
    rows: Vec<Vec<(u32, u32)>>,
}

impl OverlapMatrix {
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(u32, u32)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        let row = &self.rows[i];
        row.binary_search_by_key(&(j as u32), |&(c, _)| c)
            .map(|p| row[p].1)
            .unwrap_or(0)
    }
}

/// Shared-edge counts between all pairs of cycles, accumulated row by row
/// with a dense scratch buffer.
pub fn cycle_overlap(ct: &IncidenceMatrix) -> OverlapMatrix {
    let beta = ct.cols();
    let mut counts = vec![0u32; beta];
    let mut touched: Vec<u32> = Vec::new();
    let mut rows = Vec::with_capacity(beta);
    for i in 0..beta {
        for &e in ct.column(i) {
            for &j in ct.row(e) {
                if counts[j as usize] == 0 {
                    touched.push(j);
                }
                counts[j as usize] += 1;
            }
        }
        touched.sort_unstable();
        let row: Vec<(u32, u32)> = touched.iter().map(|&j| (j, counts[j as usize])).collect();
        for &j in &touched {
            counts[j as usize] = 0;
        }
        touched.clear();
        rows.push(row);
    }
    OverlapMatrix { rows }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleGraph {
    num_nodes: usize,
    edges: Vec<(u32, u32)>,
    overlap: Vec<u32>,
    adjacency: Vec<Vec<u32>>,
}

impl CycleGraph {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Undirected edges `(a, b)` with `a < b`, sorted.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Shared-edge count of each edge in [`edges`](Self::edges).
    pub fn overlaps(&self) -> &[u32] {
        &self.overlap
    }

    /// Neighbours of `v`, ascending.
    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Debug export: `src,dst,overlap`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "src,dst,overlap")?;
        for (&(a, b), o) in self.edges.iter().zip(&self.overlap) {
            writeln!(w, "{a},{b},{o}")?;
        }
        Ok(())
    }
}

/// Each node picks its `m` highest-overlap other nodes (ties to the lower
/// index, zero overlap never picked); the edge set is the union of picks.
pub fn build_cycle_graph(overlap: &OverlapMatrix, m: usize) -> CycleGraph {
    assert!(m >= 1, "m must be at least 1");
    let n = overlap.size();
    let mut picks: Vec<(u32, u32, u32)> = Vec::new();
    let mut cand: Vec<(u32, u32)> = Vec::new();
    for i in 0..n {
        cand.clear();
        cand.extend(
            overlap
                .row(i)
                .iter()
                .filter(|&&(j, c)| j as usize != i && c > 0)
                .copied(),
        );
        cand.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(j, c) in cand.iter().take(m) {
            let (a, b) = if (i as u32) < j { (i as u32, j) } else { (j, i as u32) };
            picks.push((a, b, c));
        }
    }
    picks.sort_unstable();
    picks.dedup();
    let mut adjacency = vec![Vec::new(); n];
    for &(a, b, _) in &picks {
        adjacency[a as usize].push(b);
        adjacency[b as usize].push(a);
    }
    for list in adjacency.iter_mut() {
        list.sort_unstable();
    }
    CycleGraph {
        num_nodes: n,
        edges: picks.iter().map(|&(a, b, _)| (a, b)).collect(),
        overlap: picks.iter().map(|&(_, _, c)| c).collect(),
        adjacency,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_triplets_counted() {
        // red = {e1, e4, e5}, green = {e1, e2, e3, e4}: share e1 and e4
        let ct = IncidenceMatrix::from_columns(6, vec![vec![1, 4, 5], vec![1, 2, 3, 4]]);
        let ov = cycle_overlap(&ct);
        assert_eq!(ov.get(0, 1), 2);
        assert_eq!(ov.get(1, 0), 2);
        assert_eq!(ov.get(0, 0), 3);
        assert_eq!(ov.get(1, 1), 4);
    }

    #[test]
    fn disjoint_cycles_do_not_overlap() {
        let ct = IncidenceMatrix::from_columns(6, vec![vec![0, 1], vec![2, 3]]);
        let ov = cycle_overlap(&ct);
        assert_eq!(ov.get(0, 1), 0);
        let g = build_cycle_graph(&ov, 2);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn single_node_graph() {
        let ct = IncidenceMatrix::from_columns(3, vec![vec![0, 1, 2]]);
        let g = build_cycle_graph(&cycle_overlap(&ct), 2);
        assert_eq!(g.num_nodes(), 1);
        assert!(g.edges().is_empty());
    }

    #[test]
    fn mutual_pick_is_one_edge() {
        let ct = IncidenceMatrix::from_columns(4, vec![vec![0, 1], vec![1, 2], vec![3]]);
        let g = build_cycle_graph(&cycle_overlap(&ct), 1);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.overlaps(), &[1]);
    }

    #[test]
    fn csv_export() {
        let ct = IncidenceMatrix::from_columns(3, vec![vec![0, 1], vec![1, 2]]);
        let g = build_cycle_graph(&cycle_overlap(&ct), 2);
        let mut out = Vec::new();
        g.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "src,dst,overlap\n0,1,1\n");
    }
}
