//! Spectral root selection: normalized Laplacian, smallest eigenvectors,
//! seeded k-means, and the member nearest each cluster centre.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Components;
use crate::kg::{EntityId, KnowledgeGraph};

/// Components at or above this size use the iterative solver.
pub const DENSE_LIMIT: usize = 3000;
pub const EIGEN_TOL: f64 = 1e-8;
const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 100;
const LANCZOS_MAX_DIM: usize = 400;

/// Symmetric sparse matrix in row-list form.
#[derive(Debug, Clone)]
pub struct SparseSym {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            y[i] = row.iter().map(|&(j, a)| a * x[j]).sum();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                m[(i, j)] += a;
            }
        }
        m
    }
}

/// `I − D^{-1/2} A D^{-1/2}` on component `c`, in local indices. Parallel
/// edges add to the adjacency weight.
pub fn normalized_laplacian(kg: &KnowledgeGraph, comps: &Components, c: usize) -> SparseSym {
    let members = comps.members(c);
    let n = members.len();
    let mut adj: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n];
    let mut deg = vec![0.0; n];
    for &e in comps.edges(c) {
        let t = kg.triplet(e);
        let (a, b) = (comps.local_index(t.head), comps.local_index(t.tail));
        *adj[a].entry(b).or_default() += 1.0;
        *adj[b].entry(a).or_default() += 1.0;
        deg[a] += 1.0;
        deg[b] += 1.0;
    }
    let inv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / f64::sqrt(d) } else { 0.0 })
        .collect();
    let rows = adj
        .into_iter()
        .enumerate()
        .map(|(i, nbrs)| {
            let mut row: Vec<(usize, f64)> = nbrs
                .into_iter()
                .map(|(j, w)| (j, -w * inv_sqrt[i] * inv_sqrt[j]))
                .collect();
            row.push((i, if deg[i] > 0.0 { 1.0 } else { 0.0 }));
            row.sort_unstable_by_key(|&(j, _)| j);
            row
        })
        .collect();
    SparseSym { n, rows }
}

/// The `count` smallest eigenpairs, eigenvalues ascending; eigenvectors are
/// the columns of the returned matrix.
pub fn smallest_eigenpairs(lap: &SparseSym, count: usize, seed: u64) -> (Vec<f64>, DMatrix<f64>) {
    let count = count.min(lap.n());
    if lap.n() < DENSE_LIMIT {
        dense_smallest(lap, count)
    } else {
        lanczos_smallest(lap, count, seed)
    }
}

fn dense_smallest(lap: &SparseSym, count: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(lap.to_dense());
    let mut order: Vec<usize> = (0..lap.n()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let vals = order[..count].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(lap.n(), count, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Lanczos with full reorthogonalization on `2I − L`, whose largest
/// eigenpairs are the smallest of `L` (the spectrum of `L` lies in [0, 2]).
fn lanczos_smallest(lap: &SparseSym, count: usize, seed: u64) -> (Vec<f64>, DMatrix<f64>) {
    let n = lap.n();
    let max_dim = n.min(LANCZOS_MAX_DIM.max(4 * count + 40));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1a2c);
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(max_dim);
    let mut v = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    v /= v.norm();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut result = None;

    for j in 0..max_dim {
        q.push(v.clone());
        lap.mul(q[j].as_slice(), &mut w);
        let mut wv = DVector::from_fn(n, |i, _| 2.0 * q[j][i] - w[i]);
        let a = q[j].dot(&wv);
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for qi in &q {
                let proj = qi.dot(&wv);
                wv.axpy(-proj, qi, 1.0);
            }
        }
        let b = wv.norm();
        let dim = j + 1;
        let check = dim >= count && (dim % 10 == 0 || dim == max_dim || b < 1e-12);
        if check {
            let (vals, s) = tridiag_eigen(&alpha, &beta);
            // largest Ritz values of 2I − L
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]).then(x.cmp(&y)));
            let top = &order[..count];
            let converged = top.iter().all(|&i| (b * s[(dim - 1, i)]).abs() < EIGEN_TOL);
            if converged || dim == max_dim || b < 1e-12 {
                if !converged && b >= 1e-12 {
                    log::warn!("lanczos hit its {max_dim}-vector cap before reaching {EIGEN_TOL:e}");
                }
                let mut vecs = DMatrix::zeros(n, count);
                let mut out_vals = Vec::with_capacity(count);
                for (c, &i) in top.iter().enumerate() {
                    out_vals.push(2.0 - vals[i]);
                    for (k, qk) in q.iter().enumerate() {
                        let coef = s[(k, i)];
                        for r in 0..n {
                            vecs[(r, c)] += coef * qk[r];
                        }
                    }
                }
                result = Some((out_vals, vecs));
                break;
            }
        }
        if b < 1e-12 {
            break;
        }
        beta.push(b);
        v = wv / b;
    }
    result.expect("lanczos produced no Ritz pairs")
}

fn tridiag_eigen(alpha: &[f64], beta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (eig.eigenvalues, eig.eigenvectors)
}

/// Result of a k-means run on row vectors.
#[derive(Debug, Clone)]
pub struct KMeans {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub inertia: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding, best of several restarts.
/// Assignment ties go to the lowest cluster index; an emptied cluster is
/// re-seeded from the point farthest from its centroid (lowest index on
/// ties).
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> KMeans {
    assert!(k >= 1 && k <= points.len());
    let mut best: Option<KMeans> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(restart as u64));
        let run = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    best.unwrap()
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total <= 0.0 {
            // all remaining points coincide with a centre; take the first
            // point not already used
            (0..points.len())
                .find(|&i| !centroids.iter().any(|c| c == &points[i]))
                .unwrap_or(0)
        } else {
            let mut r = rng.random::<f64>() * total;
            let mut idx = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    idx = i;
                    break;
                }
                r -= d;
            }
            idx
        };
        centroids.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(p, &points[pick]));
        }
    }
    centroids
}

fn lloyd(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> KMeans {
    let dim = points[0].len();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for (c, cen) in centroids.iter().enumerate() {
                let d = dist2(p, cen);
                if d < bd {
                    bd = d;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                let far = farthest_point(points, &assignment, &centroids, &counts);
                counts[assignment[far]] -= 1;
                for (s, x) in sums[assignment[far]].iter_mut().zip(&points[far]) {
                    *s -= x;
                }
                assignment[far] = c;
                counts[c] = 1;
                sums[c] = points[far].clone();
                changed = true;
            }
        }
        for c in 0..k {
            centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        }
        if !changed {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(p, &a)| dist2(p, &centroids[a]))
        .sum();
    KMeans {
        centroids,
        assignment,
        inertia,
    }
}

fn farthest_point(
    points: &[Vec<f64>],
    assignment: &[usize],
    centroids: &[Vec<f64>],
    counts: &[usize],
) -> usize {
    let mut best = 0;
    let mut bd = -1.0;
    for (i, p) in points.iter().enumerate() {
        // never empty another cluster
        if counts[assignment[i]] < 2 {
            continue;
        }
        let d = dist2(p, &centroids[assignment[i]]);
        if d > bd {
            bd = d;
            best = i;
        }
    }
    best
}

/// Splits `k` roots across components in proportion to their vertex
/// counts (largest remainder, ties to the lower component id). Every listed
/// component receives at least one root and at most its vertex count.
pub fn allocate_roots(sizes: &[usize], k: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if sizes.is_empty() || total == 0 {
        return vec![0; sizes.len()];
    }
    let quotas: Vec<f64> = sizes
        .iter()
        .map(|&s| k as f64 * s as f64 / total as f64)
        .collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = alloc.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().take(k.saturating_sub(assigned)) {
        alloc[c] += 1;
    }
    for (a, &s) in alloc.iter_mut().zip(sizes) {
        if *a > s {
            log::warn!("component of {s} vertices asked for {a} roots; clamping");
        }
        *a = (*a).clamp(1, s);
    }
    alloc
}

/// Spectral roots for one component: embed with the `count` smallest
/// Laplacian eigenvectors (rows normalized to unit length), cluster, and
/// return the member nearest each centroid, ascending by id.
pub fn component_roots(
    kg: &KnowledgeGraph,
    comps: &Components,
    c: usize,
    count: usize,
    seed: u64,
) -> Vec<EntityId> {
    let members = comps.members(c);
    let count = count.min(members.len());
    if count == 0 {
        return Vec::new();
    }
    if count == members.len() {
        return members.to_vec();
    }
    let points: Vec<Vec<f64>> = if count == 1 {
        // the bottom eigenvector of L_sym is D^{1/2}·1 up to scale
        let mut deg = vec![0.0f64; members.len()];
        for &e in comps.edges(c) {
            let t = kg.triplet(e);
            deg[comps.local_index(t.head)] += 1.0;
            deg[comps.local_index(t.tail)] += 1.0;
        }
        let norm = deg.iter().sum::<f64>().sqrt();
        deg.iter().map(|d| vec![d.sqrt() / norm]).collect()
    } else {
        let lap = normalized_laplacian(kg, comps, c);
        let (_, vecs) = smallest_eigenpairs(&lap, count, seed);
        (0..members.len())
            .map(|r| {
                let row: Vec<f64> = (0..count).map(|j| vecs[(r, j)]).collect();
                let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    row.iter().map(|x| x / norm).collect()
                } else {
                    row
                }
            })
            .collect()
    };
    let km = kmeans(&points, count, seed);
    let mut roots = Vec::with_capacity(count);
    for (cl, cen) in km.centroids.iter().enumerate() {
        let mut best = None;
        let mut bd = f64::INFINITY;
        for (i, p) in points.iter().enumerate() {
            if km.assignment[i] != cl {
                continue;
            }
            let d = dist2(p, cen);
            if d < bd {
                bd = d;
                best = Some(members[i]);
            }
        }
        roots.push(best.expect("k-means left a cluster empty"));
    }
    roots.sort_unstable();
    roots
}
