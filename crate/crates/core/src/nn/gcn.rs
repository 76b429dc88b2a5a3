//! Two-layer graph convolution over a cycle graph with symmetric
//! normalisation and self-loops.

use super::params::{ModelConfig, ModelParams};
use super::tensor::Tensor;
use crate::cycle_graph::CycleGraph;

/// `D̃^{-1/2} (A + I) D̃^{-1/2}` in CSR form. Symmetric, so it is its own
/// transpose in the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct NormAdj {
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl NormAdj {
    pub fn new(cg: &CycleGraph) -> Self {
        let n = cg.num_nodes();
        let inv_sqrt: Vec<f64> = (0..n)
            .map(|v| 1.0 / ((cg.degree(v) + 1) as f64).sqrt())
            .collect();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for v in 0..n {
            let nb = cg.neighbors(v);
            // neighbours are sorted; splice the self-loop in order
            let split = nb.partition_point(|&u| (u as usize) < v);
            for &u in nb[..split].iter() {
                cols.push(u);
                vals.push(inv_sqrt[v] * inv_sqrt[u as usize]);
            }
            cols.push(v as u32);
            vals.push(inv_sqrt[v] * inv_sqrt[v]);
            for &u in nb[split..].iter() {
                cols.push(u);
                vals.push(inv_sqrt[v] * inv_sqrt[u as usize]);
            }
            row_ptr.push(cols.len());
        }
        Self {
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn size(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .position(|&c| c as usize == j)
            .map_or(0.0, |p| self.vals[r.start + p])
    }

    /// `Â · x`.
    pub fn apply(&self, x: &Tensor) -> Tensor {
        assert_eq!(x.rows, self.size());
        let mut out = Tensor::zeros(x.rows, x.cols);
        for i in 0..x.rows {
            let o = &mut out.data[i * x.cols..(i + 1) * x.cols];
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let w = self.vals[p];
                for (ov, &xv) in o.iter_mut().zip(x.row(self.cols[p] as usize)) {
                    *ov += w * xv;
                }
            }
        }
        out
    }
}

/// Values kept from the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct GcnCache {
    x0: Tensor,
    z1: Tensor,
    h1: Tensor,
    masks: Option<(Vec<f64>, Vec<f64>)>,
}

impl GcnCache {
    pub(crate) fn pre_activation(&self) -> &Tensor {
        &self.z1
    }
}

fn apply_mask(t: &mut Tensor, mask: &[f64]) {
    for (v, &m) in t.data.iter_mut().zip(mask) {
        *v *= m;
    }
}

/// Returns the last layer's output. `masks` are dropout masks for the two
/// layer inputs.
pub fn forward(
    p: &ModelParams,
    cfg: &ModelConfig,
    adj: &NormAdj,
    x0: Tensor,
    masks: Option<(Vec<f64>, Vec<f64>)>,
) -> (Tensor, GcnCache) {
    let mut x0 = x0;
    if let Some((m0, _)) = &masks {
        apply_mask(&mut x0, m0);
    }
    let mut z1 = adj.apply(&x0.matmul(&p.gcn_w[0]));
    z1.add_row_bias(&p.gcn_b[0]);
    let act = cfg.gcn_activation;
    let mut h1 = z1.clone();
    h1.data.iter_mut().for_each(|v| *v = act.apply(*v));
    if let Some((_, m1)) = &masks {
        apply_mask(&mut h1, m1);
    }
    let mut z2 = adj.apply(&h1.matmul(&p.gcn_w[1]));
    z2.add_row_bias(&p.gcn_b[1]);
    (z2, GcnCache { x0, z1, h1, masks })
}

/// Accumulates weight gradients and returns the gradient on the input.
pub fn backward(
    p: &ModelParams,
    cfg: &ModelConfig,
    adj: &NormAdj,
    cache: &GcnCache,
    dz2: &Tensor,
    grads: &mut ModelParams,
) -> Tensor {
    dz2.sum_rows_into(&mut grads.gcn_b[1]);
    let du1 = adj.apply(dz2);
    cache.h1.t_matmul_into(&du1, &mut grads.gcn_w[1]);
    let mut dh1 = du1.matmul_t(&p.gcn_w[1]);
    if let Some((_, m1)) = &cache.masks {
        apply_mask(&mut dh1, m1);
    }
    let act = cfg.gcn_activation;
    for (d, &z) in dh1.data.iter_mut().zip(&cache.z1.data) {
        *d *= act.grad(z);
    }
    dh1.sum_rows_into(&mut grads.gcn_b[0]);
    let du0 = adj.apply(&dh1);
    cache.x0.t_matmul_into(&du0, &mut grads.gcn_w[0]);
    let mut dx0 = du0.matmul_t(&p.gcn_w[0]);
    if let Some((m0, _)) = &cache.masks {
        apply_mask(&mut dx0, m0);
    }
    dx0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::IncidenceMatrix;
    use crate::cycle_graph::{build_cycle_graph, cycle_overlap};
    use crate::nn::params::Activation;

    fn path_graph() -> CycleGraph {
        // cycles 0-1 and 1-2 overlap, 0 and 2 do not
        let ct = IncidenceMatrix::from_columns(4, vec![vec![0, 1], vec![1, 2], vec![2, 3]]);
        build_cycle_graph(&cycle_overlap(&ct), 2)
    }

    #[test]
    fn normalisation_entries() {
        let a = NormAdj::new(&path_graph());
        // degrees with self-loop: 2, 3, 2
        assert!((a.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((a.get(0, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!((a.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(a.get(0, 2), 0.0);
        assert_eq!(a.get(1, 0), a.get(0, 1));
    }

    #[test]
    fn single_node_is_plain_affine() {
        let ct = IncidenceMatrix::from_columns(3, vec![vec![0, 1, 2]]);
        let cg = build_cycle_graph(&cycle_overlap(&ct), 2);
        let adj = NormAdj::new(&cg);
        let mut cfg = ModelConfig::new(1, 1);
        cfg.gcn_activation = Activation::Identity;
        let p = ModelParams::init(&cfg, 2);
        let x = Tensor::from_vec(1, 20, (0..20).map(|i| i as f64 * 0.1).collect());
        let (out, _) = forward(&p, &cfg, &adj, x.clone(), None);
        let mut expect = x.matmul(&p.gcn_w[0]).matmul(&p.gcn_w[1]);
        expect.add_row_bias(&p.gcn_b[1]);
        for (a, b) in out.data.iter().zip(&expect.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_zero_output() {
        let cfg = ModelConfig::new(1, 1);
        let p = ModelParams::zeros(&cfg);
        let adj = NormAdj::new(&path_graph());
        let x = Tensor::from_vec(3, 20, vec![1.0; 60]);
        let (out, _) = forward(&p, &cfg, &adj, x, None);
        assert!(out.data.iter().all(|&v| v == 0.0));
    }
}
