//! Chain and cycle algebra over the two-element field.
//!
//! A chain is a set of edges stored as a packed bit vector over the edge
//! universe; addition is XOR. Cycles are chains with zero boundary. The
//! elimination routines here double as the correctness oracle for the basis
//! builder.

use std::fmt;

use thiserror::Error;

use crate::graph::Components;
use crate::kg::{EdgeId, EntityId, KnowledgeGraph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Z2Error {
    #[error("universe mismatch: {left} vs {right}")]
    UniverseMismatch { left: usize, right: usize },
}

const WORD: usize = 64;

/// Fixed-length packed bit vector.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(WORD)],
            len,
        }
    }

    pub fn from_ones(len: usize, ones: impl IntoIterator<Item = usize>) -> Self {
        let mut v = Self::zeros(len);
        for i in ones {
            v.toggle(i);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / WORD] >> (i % WORD) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, on: bool) {
        assert!(i < self.len, "bit {i} outside universe {}", self.len);
        let mask = 1u64 << (i % WORD);
        if on {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn toggle(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} outside universe {}", self.len);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * WORD + w.trailing_zeros() as usize)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let tz = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * WORD + tz)
            })
        })
    }

    /// In-place XOR. Panics on length mismatch.
    #[inline]
    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({}; ", self.len)?;
        f.debug_set().entries(self.ones()).finish()?;
        write!(f, ")")
    }
}

/// A set of edges over a fixed edge universe.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Z2Chain {
    bits: BitVector,
}

impl Z2Chain {
    pub fn empty(universe: usize) -> Self {
        Self {
            bits: BitVector::zeros(universe),
        }
    }

    pub fn from_edges(universe: usize, edges: impl IntoIterator<Item = EdgeId>) -> Self {
        Self {
            bits: BitVector::from_ones(universe, edges),
        }
    }

    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.bits.get(e)
    }

    pub fn toggle(&mut self, e: EdgeId) {
        self.bits.toggle(e)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_zero()
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.bits.ones()
    }

    pub fn bits(&self) -> &BitVector {
        &self.bits
    }

    pub fn add_assign(&mut self, other: &Z2Chain) -> Result<(), Z2Error> {
        check_universe(self.universe(), other.universe())?;
        self.bits.xor_assign(&other.bits);
        Ok(())
    }
}

fn check_universe(left: usize, right: usize) -> Result<(), Z2Error> {
    if left != right {
        Err(Z2Error::UniverseMismatch { left, right })
    } else {
        Ok(())
    }
}

/// Mod-2 sum of two chains.
pub fn chain_add(a: &Z2Chain, b: &Z2Chain) -> Result<Z2Chain, Z2Error> {
    let mut out = a.clone();
    out.add_assign(b)?;
    Ok(out)
}

/// The |V|×|E| vertex–edge incidence matrix, stored column-wise as endpoint
/// pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMatrix {
    num_vertices: usize,
    endpoints: Vec<(EntityId, EntityId)>,
}

impl BoundaryMatrix {
    pub fn rows(&self) -> usize {
        self.num_vertices
    }

    pub fn cols(&self) -> usize {
        self.endpoints.len()
    }

    pub fn entry(&self, v: EntityId, e: EdgeId) -> bool {
        let (a, b) = self.endpoints[e];
        (a == v) ^ (b == v)
    }

    pub fn column(&self, e: EdgeId) -> (EntityId, EntityId) {
        self.endpoints[e]
    }

    /// ∂c over the two-element field.
    pub fn apply(&self, c: &Z2Chain) -> Result<BitVector, Z2Error> {
        check_universe(self.cols(), c.universe())?;
        let mut out = BitVector::zeros(self.num_vertices);
        for e in c.edges() {
            let (a, b) = self.endpoints[e];
            out.toggle(a);
            out.toggle(b);
        }
        Ok(out)
    }

    pub fn is_cycle(&self, c: &Z2Chain) -> Result<bool, Z2Error> {
        Ok(self.apply(c)?.is_zero())
    }
}

pub fn boundary_matrix(kg: &KnowledgeGraph) -> BoundaryMatrix {
    BoundaryMatrix {
        num_vertices: kg.num_entities(),
        endpoints: kg.triplets().iter().map(|t| (t.head, t.tail)).collect(),
    }
}

pub fn apply_boundary(m: &BoundaryMatrix, c: &Z2Chain) -> Result<BitVector, Z2Error> {
    m.apply(c)
}

pub fn is_cycle(m: &BoundaryMatrix, c: &Z2Chain) -> Result<bool, Z2Error> {
    m.is_cycle(c)
}

/// |E| − |V| + #components.
pub fn betti_number(kg: &KnowledgeGraph) -> usize {
    let comps = Components::of(kg);
    kg.num_edges() + comps.len() - kg.num_entities()
}

/// Incremental row-echelon form that remembers, for every stored row, which
/// input vectors were summed to produce it.
#[derive(Debug, Clone)]
pub struct Echelon {
    universe: usize,
    inputs: usize,
    rows: Vec<(usize, BitVector, BitVector)>,
}

impl Echelon {
    pub fn new(universe: usize) -> Self {
        Self {
            universe,
            inputs: 0,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the stored rows; returns the residue and the
    /// combination (over inputs seen so far) that was subtracted.
    fn reduce(&self, v: &BitVector, combo_len: usize) -> (BitVector, BitVector) {
        let mut v = v.clone();
        let mut combo = BitVector::zeros(combo_len);
        for (pivot, row, how) in &self.rows {
            if v.get(*pivot) {
                v.xor_assign(row);
                for i in how.ones() {
                    combo.toggle(i);
                }
            }
        }
        (v, combo)
    }

    /// Adds one input vector. Returns whether it raised the rank.
    pub fn push(&mut self, v: &Z2Chain) -> Result<bool, Z2Error> {
        check_universe(self.universe, v.universe())?;
        let idx = self.inputs;
        self.inputs += 1;
        // stored combinations are as wide as the input count at insertion
        let (residue, mut combo) = self.reduce(v.bits(), idx + 1);
        match residue.first_one() {
            Some(pivot) => {
                combo.toggle(idx);
                self.rows.push((pivot, residue, combo));
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Coefficients α with Σ αᵢ·inputᵢ = target, if target is in the span.
    pub fn solve(&self, target: &Z2Chain) -> Result<Option<BitVector>, Z2Error> {
        check_universe(self.universe, target.universe())?;
        let mut v = target.bits().clone();
        let mut alpha = BitVector::zeros(self.inputs);
        for (pivot, row, how) in &self.rows {
            if v.get(*pivot) {
                v.xor_assign(row);
                for i in how.ones() {
                    alpha.toggle(i);
                }
            }
        }
        Ok(v.is_zero().then_some(alpha))
    }
}

/// Rank over the two-element field.
pub fn z2_rank(chains: &[Z2Chain]) -> Result<usize, Z2Error> {
    let Some(first) = chains.first() else {
        return Ok(0);
    };
    let mut ech = Echelon::new(first.universe());
    for c in chains {
        ech.push(c)?;
    }
    Ok(ech.rank())
}

/// Solves Σ αᵢ·basisᵢ = target. `None` when target is outside the span.
pub fn solve_in_span(basis: &[Z2Chain], target: &Z2Chain) -> Result<Option<BitVector>, Z2Error> {
    let mut ech = Echelon::new(target.universe());
    for c in basis {
        ech.push(c)?;
    }
    ech.solve(target)
}
