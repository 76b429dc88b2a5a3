//! Versioned binary container for a [`BasisSet`].
//!
//! Layout (all integers little-endian `u64` unless noted):
//!
//! ```text
//! magic "CKBASIS\0" | version u32 | graph fingerprint [32]u8 | k | seed | mode u8
//! num_edges | num_components | per component: n, roots[n]
//! num_bases | per basis: component, root, n, parent_edge[n] (u64::MAX = none),
//!             num_cycles, per cycle: len, edges[len]
//! per slot (k of them): num_parts, parts[..], row_ptr[num_edges + 1], nnz, row_cols[nnz]
//! ```

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use super::{spt_cycle_basis, BasisError, BasisSet, RootMode, SptTree};
use crate::graph::Components;
use crate::kg::KnowledgeGraph;

const MAGIC: &[u8; 8] = b"CKBASIS\0";
pub const VERSION: u32 = 1;
const NONE: u64 = u64::MAX;

/// SHA-256 over the entity count and the ordered triplet list.
pub fn graph_fingerprint(kg: &KnowledgeGraph) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((kg.num_entities() as u64).to_le_bytes());
    h.update((kg.num_relations() as u64).to_le_bytes());
    for t in kg.triplets() {
        h.update((t.head as u64).to_le_bytes());
        h.update((t.relation as u64).to_le_bytes());
        h.update((t.tail as u64).to_le_bytes());
    }
    h.finalize().into()
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> BasisError + '_ {
    move |source| BasisError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_cache(set: &BasisSet, kg: &KnowledgeGraph, path: &Path) -> Result<(), BasisError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    encode(set, kg, &mut w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn encode<W: Write>(set: &BasisSet, kg: &KnowledgeGraph, w: &mut W) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_all(&graph_fingerprint(kg))?;
    w.write_u64::<LE>(set.k() as u64)?;
    w.write_u64::<LE>(set.seed())?;
    w.write_u8(match set.mode() {
        RootMode::Cluster => 0,
        RootMode::Random => 1,
    })?;
    w.write_u64::<LE>(set.num_edges() as u64)?;
    w.write_u64::<LE>(set.roots().len() as u64)?;
    for r in set.roots() {
        write_list(w, r.iter().map(|&v| v as u64), r.len())?;
    }
    w.write_u64::<LE>(set.component_bases().len() as u64)?;
    for b in set.component_bases() {
        let t = b.tree();
        w.write_u64::<LE>(t.component_id() as u64)?;
        w.write_u64::<LE>(t.root() as u64)?;
        let pe = t.parent_edges();
        write_list(w, pe.iter().map(|e| e.map_or(NONE, |e| e as u64)), pe.len())?;
        w.write_u64::<LE>(b.len() as u64)?;
        for c in b.cycles() {
            write_list(w, c.iter().map(|&e| e as u64), c.len())?;
        }
    }
    for s in set.slots() {
        write_list(w, s.parts().iter().map(|&p| p as u64), s.parts().len())?;
        let m = s.incidence();
        let mut ptr = 0u64;
        w.write_u64::<LE>(ptr)?;
        for e in 0..m.rows() {
            ptr += m.row(e).len() as u64;
            w.write_u64::<LE>(ptr)?;
        }
        w.write_u64::<LE>(m.nnz() as u64)?;
        for e in 0..m.rows() {
            for &j in m.row(e) {
                w.write_u64::<LE>(j as u64)?;
            }
        }
    }
    Ok(())
}

fn write_list<W: Write>(w: &mut W, it: impl Iterator<Item = u64>, n: usize) -> std::io::Result<()> {
    w.write_u64::<LE>(n as u64)?;
    for x in it {
        w.write_u64::<LE>(x)?;
    }
    Ok(())
}

/// Loads a cache and checks it against `kg`, `k` and `seed`.
pub fn read_cache(
    path: &Path,
    kg: &KnowledgeGraph,
    k: usize,
    seed: u64,
) -> Result<BasisSet, BasisError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    decode(&mut BufReader::new(file), kg, k, seed)
}

fn corrupt<E: std::fmt::Display>(e: E) -> BasisError {
    BasisError::Cache(e.to_string())
}

fn read_len<R: Read>(r: &mut R, limit: usize) -> Result<usize, BasisError> {
    let n = r.read_u64::<LE>().map_err(corrupt)?;
    if n as usize > limit {
        return Err(BasisError::Cache(format!("length {n} exceeds {limit}")));
    }
    Ok(n as usize)
}

fn read_list<R: Read>(r: &mut R, limit: usize) -> Result<Vec<u64>, BasisError> {
    let n = read_len(r, limit)?;
    (0..n).map(|_| r.read_u64::<LE>().map_err(corrupt)).collect()
}

pub fn decode<R: Read>(
    r: &mut R,
    kg: &KnowledgeGraph,
    k: usize,
    seed: u64,
) -> Result<BasisSet, BasisError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(corrupt)?;
    if &magic != MAGIC {
        return Err(BasisError::Cache("not a basis cache".into()));
    }
    let version = r.read_u32::<LE>().map_err(corrupt)?;
    if version != VERSION {
        return Err(BasisError::Cache(format!("unsupported version {version}")));
    }
    let mut fp = [0u8; 32];
    r.read_exact(&mut fp).map_err(corrupt)?;
    if fp != graph_fingerprint(kg) {
        return Err(BasisError::Cache("built for a different graph".into()));
    }
    let ck = r.read_u64::<LE>().map_err(corrupt)? as usize;
    let cseed = r.read_u64::<LE>().map_err(corrupt)?;
    if ck != k || cseed != seed {
        return Err(BasisError::Cache(format!(
            "key mismatch: cache has k={ck} seed={cseed}, wanted k={k} seed={seed}"
        )));
    }
    let mode = match r.read_u8().map_err(corrupt)? {
        0 => RootMode::Cluster,
        1 => RootMode::Random,
        m => return Err(BasisError::Cache(format!("unknown root mode {m}"))),
    };
    let num_edges = r.read_u64::<LE>().map_err(corrupt)? as usize;
    if num_edges != kg.num_edges() {
        return Err(BasisError::Cache("edge count mismatch".into()));
    }
    let comps = Arc::new(Components::of(kg));
    let nc = read_len(r, kg.num_entities())?;
    if nc != comps.len() {
        return Err(BasisError::Cache("component count mismatch".into()));
    }
    let mut roots = Vec::with_capacity(nc);
    for _ in 0..nc {
        let list = read_list(r, kg.num_entities())?;
        roots.push(list.into_iter().map(|v| v as usize).collect::<Vec<_>>());
    }
    let nb = read_len(r, kg.num_entities().max(1) * k.max(1))?;
    let mut bases = Vec::with_capacity(nb);
    for _ in 0..nb {
        let component = r.read_u64::<LE>().map_err(corrupt)? as usize;
        let root = r.read_u64::<LE>().map_err(corrupt)? as usize;
        if root >= kg.num_entities() || comps.component_of(root) != component {
            return Err(BasisError::Cache("root outside its component".into()));
        }
        let pe: Vec<Option<usize>> = read_list(r, kg.num_entities())?
            .into_iter()
            .map(|e| (e != NONE).then_some(e as usize))
            .collect();
        let tree = SptTree::from_parent_edges(kg, Arc::clone(&comps), root, pe)?;
        let basis = spt_cycle_basis(kg, &tree);
        let ncy = read_len(r, num_edges)?;
        if ncy != basis.len() {
            return Err(BasisError::Cache("cycle count mismatch".into()));
        }
        for j in 0..ncy {
            let edges = read_list(r, num_edges)?;
            if edges.iter().map(|&e| e as usize).ne(basis.cycle(j).iter().copied()) {
                return Err(BasisError::Cache(format!("cycle {j} differs from its tree")));
            }
        }
        bases.push(basis);
    }
    let set = BasisSet::assemble(k, seed, mode, num_edges, comps, roots, bases);
    for s in set.slots() {
        let parts = read_list(r, nb)?;
        if parts.iter().map(|&p| p as usize).ne(s.parts().iter().copied()) {
            return Err(BasisError::Cache("slot layout differs".into()));
        }
        let m = s.incidence();
        let mut expect = 0u64;
        for e in 0..=m.rows() {
            let p = r.read_u64::<LE>().map_err(corrupt)?;
            if p != expect {
                return Err(BasisError::Cache("incidence row pointer differs".into()));
            }
            if e < m.rows() {
                expect += m.row(e).len() as u64;
            }
        }
        let nnz = read_len(r, m.nnz())?;
        if nnz != m.nnz() {
            return Err(BasisError::Cache("incidence nnz differs".into()));
        }
        for e in 0..m.rows() {
            for &j in m.row(e) {
                if r.read_u64::<LE>().map_err(corrupt)? != j as u64 {
                    return Err(BasisError::Cache("incidence entries differ".into()));
                }
            }
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_all_bases;
    use crate::kg::RelationVocab;

    fn graph() -> KnowledgeGraph {
        let rel = RelationVocab::from_names(["r", "s"]);
        let mut e = Vec::new();
        for i in 0..12 {
            e.push((i, i % 2, (i + 1) % 12));
            e.push((i, 1, (i + 5) % 12));
        }
        e.push((12, 0, 13));
        e.push((13, 1, 14));
        e.push((14, 0, 12));
        KnowledgeGraph::from_triples(15, rel, e)
    }

    #[test]
    fn round_trip() {
        let kg = graph();
        let set = build_all_bases(&kg, 3, 5, RootMode::Cluster).unwrap();
        let mut buf = Vec::new();
        encode(&set, &kg, &mut buf).unwrap();
        let back = decode(&mut buf.as_slice(), &kg, 3, 5).unwrap();
        assert_eq!(back.roots(), set.roots());
        for (a, b) in back.slots().iter().zip(set.slots()) {
            assert_eq!(a.incidence(), b.incidence());
        }
        let mut again = Vec::new();
        encode(&back, &kg, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn key_mismatch_rejected() {
        let kg = graph();
        let set = build_all_bases(&kg, 2, 1, RootMode::Cluster).unwrap();
        let mut buf = Vec::new();
        encode(&set, &kg, &mut buf).unwrap();
        assert!(decode(&mut buf.as_slice(), &kg, 2, 2).is_err());
        assert!(decode(&mut buf.as_slice(), &kg, 3, 1).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(decode(&mut bad.as_slice(), &kg, 2, 1).is_err());
        let truncated = &buf[..buf.len() - 3];
        assert!(decode(&mut &truncated[..], &kg, 2, 1).is_err());
    }
}
