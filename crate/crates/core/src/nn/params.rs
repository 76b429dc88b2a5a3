//! Model configuration, parameter tensors, and the Adam optimizer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Forward relation count; the token vocabulary is twice this.
    pub num_relations: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub gcn_hidden: usize,
    pub gcn_out: usize,
    pub mlp_hidden: usize,
    /// Number of basis slots aggregated.
    pub k: usize,
    pub dropout: f64,
    pub gcn_activation: Activation,
}

impl ModelConfig {
    pub fn new(num_relations: usize, k: usize) -> Self {
        Self {
            num_relations,
            embed_dim: 20,
            hidden: 10,
            gcn_hidden: 20,
            gcn_out: 20,
            mlp_hidden: 20,
            k,
            dropout: 0.2,
            gcn_activation: Activation::Relu,
        }
    }

    /// Width of a cycle feature: hidden and cell sums concatenated.
    pub fn feature_dim(&self) -> usize {
        2 * self.hidden
    }

    pub fn vocab(&self) -> usize {
        2 * self.num_relations
    }
}

/// Weights of one recurrent layer; gate blocks ordered input, forget,
/// candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub w_input: Tensor,
    pub w_hidden: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub embeddings: Tensor,
    pub lstm: [LstmLayer; 2],
    pub gcn_w: [Tensor; 2],
    pub gcn_b: [Tensor; 2],
    pub mlp_w: [Tensor; 2],
    pub mlp_b: [Tensor; 2],
    pub basis_logits: Tensor,
}

pub const TENSOR_NAMES: [&str; 15] = [
    "relation_embeddings",
    "lstm.0.w_input",
    "lstm.0.w_hidden",
    "lstm.0.bias",
    "lstm.1.w_input",
    "lstm.1.w_hidden",
    "lstm.1.bias",
    "gcn.0.weight",
    "gcn.0.bias",
    "gcn.1.weight",
    "gcn.1.bias",
    "mlp.0.weight",
    "mlp.0.bias",
    "mlp.1.weight",
    "mlp.1.bias",
];
pub const LOGITS_NAME: &str = "basis_logits";

fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-limit..limit))
        .collect();
    Tensor::from_vec(rows, cols, data)
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let h = cfg.hidden;
        let layer = |din| LstmLayer {
            w_input: Tensor::zeros(din, 4 * h),
            w_hidden: Tensor::zeros(h, 4 * h),
            bias: Tensor::zeros(1, 4 * h),
        };
        Self {
            embeddings: Tensor::zeros(cfg.vocab(), cfg.embed_dim),
            lstm: [layer(cfg.embed_dim), layer(h)],
            gcn_w: [
                Tensor::zeros(cfg.feature_dim(), cfg.gcn_hidden),
                Tensor::zeros(cfg.gcn_hidden, cfg.gcn_out),
            ],
            gcn_b: [Tensor::zeros(1, cfg.gcn_hidden), Tensor::zeros(1, cfg.gcn_out)],
            mlp_w: [
                Tensor::zeros(cfg.gcn_out, cfg.mlp_hidden),
                Tensor::zeros(cfg.mlp_hidden, 1),
            ],
            mlp_b: [Tensor::zeros(1, cfg.mlp_hidden), Tensor::zeros(1, 1)],
            basis_logits: Tensor::zeros(1, cfg.k),
        }
    }

    /// Xavier-uniform weights, zero biases, equal basis weights.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(cfg);
        p.embeddings = xavier(cfg.vocab(), cfg.embed_dim, &mut rng);
        for (l, din) in [cfg.embed_dim, cfg.hidden].into_iter().enumerate() {
            p.lstm[l].w_input = xavier(din, 4 * cfg.hidden, &mut rng);
            p.lstm[l].w_hidden = xavier(cfg.hidden, 4 * cfg.hidden, &mut rng);
        }
        p.gcn_w[0] = xavier(cfg.feature_dim(), cfg.gcn_hidden, &mut rng);
        p.gcn_w[1] = xavier(cfg.gcn_hidden, cfg.gcn_out, &mut rng);
        p.mlp_w[0] = xavier(cfg.gcn_out, cfg.mlp_hidden, &mut rng);
        p.mlp_w[1] = xavier(cfg.mlp_hidden, 1, &mut rng);
        p
    }

    pub fn zeros_like(&self) -> Self {
        let z = |t: &Tensor| Tensor::zeros(t.rows, t.cols);
        Self {
            embeddings: z(&self.embeddings),
            lstm: [0, 1].map(|l| LstmLayer {
                w_input: z(&self.lstm[l].w_input),
                w_hidden: z(&self.lstm[l].w_hidden),
                bias: z(&self.lstm[l].bias),
            }),
            gcn_w: [z(&self.gcn_w[0]), z(&self.gcn_w[1])],
            gcn_b: [z(&self.gcn_b[0]), z(&self.gcn_b[1])],
            mlp_w: [z(&self.mlp_w[0]), z(&self.mlp_w[1])],
            mlp_b: [z(&self.mlp_b[0]), z(&self.mlp_b[1])],
            basis_logits: z(&self.basis_logits),
        }
    }

    /// Every tensor with its name, in a fixed order.
    pub fn named(&self) -> Vec<(&'static str, &Tensor)> {
        let [l0, l1] = &self.lstm;
        vec![
            (TENSOR_NAMES[0], &self.embeddings),
            (TENSOR_NAMES[1], &l0.w_input),
            (TENSOR_NAMES[2], &l0.w_hidden),
            (TENSOR_NAMES[3], &l0.bias),
            (TENSOR_NAMES[4], &l1.w_input),
            (TENSOR_NAMES[5], &l1.w_hidden),
            (TENSOR_NAMES[6], &l1.bias),
            (TENSOR_NAMES[7], &self.gcn_w[0]),
            (TENSOR_NAMES[8], &self.gcn_b[0]),
            (TENSOR_NAMES[9], &self.gcn_w[1]),
            (TENSOR_NAMES[10], &self.gcn_b[1]),
            (TENSOR_NAMES[11], &self.mlp_w[0]),
            (TENSOR_NAMES[12], &self.mlp_b[0]),
            (TENSOR_NAMES[13], &self.mlp_w[1]),
            (TENSOR_NAMES[14], &self.mlp_b[1]),
            (LOGITS_NAME, &self.basis_logits),
        ]
    }

    pub fn named_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        let [l0, l1] = &mut self.lstm;
        let [g0, g1] = &mut self.gcn_w;
        let [gb0, gb1] = &mut self.gcn_b;
        let [m0, m1] = &mut self.mlp_w;
        let [mb0, mb1] = &mut self.mlp_b;
        vec![
            (TENSOR_NAMES[0], &mut self.embeddings),
            (TENSOR_NAMES[1], &mut l0.w_input),
            (TENSOR_NAMES[2], &mut l0.w_hidden),
            (TENSOR_NAMES[3], &mut l0.bias),
            (TENSOR_NAMES[4], &mut l1.w_input),
            (TENSOR_NAMES[5], &mut l1.w_hidden),
            (TENSOR_NAMES[6], &mut l1.bias),
            (TENSOR_NAMES[7], g0),
            (TENSOR_NAMES[8], gb0),
            (TENSOR_NAMES[9], g1),
            (TENSOR_NAMES[10], gb1),
            (TENSOR_NAMES[11], m0),
            (TENSOR_NAMES[12], mb0),
            (TENSOR_NAMES[13], m1),
            (TENSOR_NAMES[14], mb1),
            (LOGITS_NAME, &mut self.basis_logits),
        ]
    }

    pub fn num_scalars(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        for ((_, a), (_, b)) in self.named_mut().into_iter().zip(other.named()) {
            a.add_assign(b);
        }
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.named()
            .into_iter()
            .find(|(_, t)| !t.is_finite())
            .map(|(n, _)| n)
    }

    pub fn ensure_finite(&self, what: &str) -> Result<(), NnError> {
        match self.first_non_finite() {
            Some(tensor) => Err(NnError::NonFinite {
                what: what.to_string(),
                tensor: tensor.to_string(),
            }),
            None => Ok(()),
        }
    }
}

/// Adam with L2 weight decay folded into the gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ModelParams, lr: f64, weight_decay: f64) -> Self {
        let shapes: Vec<usize> = params.named().iter().map(|(_, t)| t.len()).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, ((_, p), (_, g))) in params.named_mut().into_iter().zip(grads.named()).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.data.len() {
                let grad = g.data[j] + self.weight_decay * p.data[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * grad;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * grad * grad;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                p.data[j] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}
