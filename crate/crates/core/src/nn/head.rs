//! Cycle confidence readout, max-routed triplet confidence, aggregation over
//! bases, and the loss.

use super::params::ModelParams;
use super::tensor::{sigmoid, Tensor};
use super::NnError;
use crate::basis::IncidenceMatrix;
use crate::kg::EdgeId;

pub const EPS: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct MlpCache {
    x: Tensor,
    pre: Tensor,
    hidden: Tensor,
}

impl MlpCache {
    pub(crate) fn pre_activation(&self) -> &Tensor {
        &self.pre
    }
}

/// `P = sigmoid(MLP(x))` per row of `x`.
pub fn cycle_confidence(p: &ModelParams, x: Tensor) -> (Vec<f64>, MlpCache) {
    let mut pre = x.matmul(&p.mlp_w[0]);
    pre.add_row_bias(&p.mlp_b[0]);
    let mut hidden = pre.clone();
    hidden.data.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut out = hidden.matmul(&p.mlp_w[1]);
    out.add_row_bias(&p.mlp_b[1]);
    let conf = out.data.iter().map(|&o| sigmoid(o)).collect();
    (conf, MlpCache { x, pre, hidden })
}

/// Accumulates readout gradients given `dconf = ∂L/∂P`; returns `∂L/∂x`.
pub fn cycle_confidence_backward(
    p: &ModelParams,
    cache: &MlpCache,
    conf: &[f64],
    dconf: &[f64],
    grads: &mut ModelParams,
) -> Tensor {
    let dout = Tensor::from_vec(
        conf.len(),
        1,
        conf.iter().zip(dconf).map(|(&c, &d)| d * c * (1.0 - c)).collect(),
    );
    dout.sum_rows_into(&mut grads.mlp_b[1]);
    cache.hidden.t_matmul_into(&dout, &mut grads.mlp_w[1]);
    let mut dpre = dout.matmul_t(&p.mlp_w[1]);
    for (d, &a) in dpre.data.iter_mut().zip(&cache.pre.data) {
        if a <= 0.0 {
            *d = 0.0;
        }
    }
    dpre.sum_rows_into(&mut grads.mlp_b[0]);
    cache.x.t_matmul_into(&dpre, &mut grads.mlp_w[0]);
    dpre.matmul_t(&p.mlp_w[0])
}

/// Per target, the highest confidence among the cycles listed in its row
/// and that cycle (lowest index on ties). Empty rows give 0 and `None`.
pub fn max_route<'a>(
    rows: impl Iterator<Item = &'a [u32]>,
    conf: &[f64],
) -> (Vec<f64>, Vec<Option<u32>>) {
    rows.map(|row| {
        let mut best: Option<u32> = None;
        for &j in row {
            match best {
                Some(b)
                    if conf[j as usize] < conf[b as usize]
                        || (conf[j as usize] == conf[b as usize] && j > b) => {}
                _ => best = Some(j),
            }
        }
        (best.map_or(0.0, |b| conf[b as usize]), best)
    })
    .unzip()
}

/// `y_t = max(C_T(t, ·) ⊙ P)` for each target edge.
pub fn triplet_confidence(
    ct: &IncidenceMatrix,
    conf: &[f64],
    targets: &[EdgeId],
) -> (Vec<f64>, Vec<Option<u32>>) {
    max_route(targets.iter().map(|&e| ct.row(e)), conf)
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Convex combination `Σ w_i Y_i` with `w = softmax(logits)`. Returns the
/// combination and the weights.
pub fn aggregate(ys: &[Vec<f64>], logits: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NnError> {
    if ys.is_empty() || logits.is_empty() {
        return Err(NnError::ZeroK);
    }
    if ys.len() != logits.len() {
        return Err(NnError::Shape(format!(
            "{} confidence vectors for {} basis weights",
            ys.len(),
            logits.len()
        )));
    }
    let n = ys[0].len();
    if ys.iter().any(|y| y.len() != n) {
        return Err(NnError::Shape("confidence vectors differ in length".into()));
    }
    let w = softmax(logits);
    let mut out = vec![0.0; n];
    for (y, &wi) in ys.iter().zip(&w) {
        for (o, &v) in out.iter_mut().zip(y) {
            *o += wi * v;
        }
    }
    // rounding can push a convex combination of values in [0,1] just past 1
    out.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok((out, w))
}

/// Mean binary cross-entropy with predictions clamped to `[ε, 1 − ε]`.
pub fn loss(y: &[f64], labels: &[bool]) -> f64 {
    assert_eq!(y.len(), labels.len());
    if y.is_empty() {
        return 0.0;
    }
    let total: f64 = y
        .iter()
        .zip(labels)
        .map(|(&v, &l)| {
            let c = v.clamp(EPS, 1.0 - EPS);
            if l {
                -c.ln()
            } else {
                -(1.0 - c).ln()
            }
        })
        .sum();
    total / y.len() as f64
}

/// `∂loss/∂y`; zero where the clamp is active.
pub fn loss_grad(y: &[f64], labels: &[bool]) -> Vec<f64> {
    let n = y.len() as f64;
    y.iter()
        .zip(labels)
        .map(|(&v, &l)| {
            if !(EPS..=1.0 - EPS).contains(&v) {
                0.0
            } else if l {
                -1.0 / (v * n)
            } else {
                1.0 / ((1.0 - v) * n)
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::ModelConfig;

    #[test]
    fn zero_readout_is_half() {
        let cfg = ModelConfig::new(2, 1);
        let p = ModelParams::zeros(&cfg);
        let (conf, _) = cycle_confidence(&p, Tensor::from_vec(3, 20, vec![0.7; 60]));
        assert_eq!(conf, vec![0.5; 3]);
        let (empty, _) = cycle_confidence(&p, Tensor::zeros(0, 20));
        assert!(empty.is_empty());
    }

    #[test]
    fn max_over_covering_cycles() {
        // row selects cycles {0, 2}; P = (0.3, 0.9, 0.7)
        let ct = IncidenceMatrix::from_columns(2, vec![vec![0], vec![], vec![0]]);
        let (y, arg) = triplet_confidence(&ct, &[0.3, 0.9, 0.7], &[0, 1]);
        assert_eq!(y, vec![0.7, 0.0]);
        assert_eq!(arg, vec![Some(2), None]);
        let (_, tie) = max_route([&[1u32, 0][..]].into_iter(), &[0.4, 0.4]);
        assert_eq!(tie, vec![Some(0)]);
    }

    #[test]
    fn aggregation_cases() {
        let (y, _) = aggregate(&[vec![0.4], vec![0.8]], &[0.0, 0.0]).unwrap();
        assert!((y[0] - 0.6).abs() < 1e-15);
        let (y, _) = aggregate(&[vec![0.3]], &[17.0]).unwrap();
        assert_eq!(y, vec![0.3]);
        let (y, _) = aggregate(&[vec![0.9], vec![0.1]], &[50.0, 0.0]).unwrap();
        assert!((y[0] - 0.9).abs() < 1e-15);
        assert!(matches!(aggregate(&[], &[]), Err(NnError::ZeroK)));
    }

    #[test]
    fn loss_cases() {
        assert!((loss(&[0.5, 0.5], &[true, false]) - 2f64.ln()).abs() < 1e-15);
        assert!(loss(&[1.0, 0.0], &[true, false]) < 1e-6);
        assert!(loss(&[0.0], &[true]).is_finite());
        let g = loss_grad(&[0.5, 0.5], &[true, false]);
        assert_eq!(g, vec![-1.0, 1.0]);
    }
}
