//! The differentiable part of the model: relation embeddings, the
//! bi-directional relational LSTM cycle encoder, a two-layer GCN over each
//! cycle graph, the MLP readout, max-routed triplet confidence and the
//! softmax-weighted aggregation over bases. Gradients are derived by hand.

pub mod checkpoint;
pub mod gcn;
pub mod gradcheck;
pub mod head;
pub mod lstm;
pub mod model;
pub mod params;
pub mod sequence;
pub mod tensor;

use thiserror::Error;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
pub use gradcheck::{check_gradients, gradient_check, GradCheckReport};
pub use model::{Instance, Mode, PredictionBatch};
pub use params::{Activation, Adam, ModelConfig, ModelParams};
pub use sequence::{cycle_sequences, RelationSequence, SequenceTable};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("non-finite value in {tensor} during {what}")]
    NonFinite { what: String, tensor: String },
    #[error("cycle starting at edge {start} is not a single closed walk")]
    MalformedCycle { start: usize },
    #[error("empty relation sequence")]
    EmptySequence,
    #[error("token {token} outside a vocabulary of {vocab}")]
    TokenOutOfRange { token: usize, vocab: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("need at least one basis")]
    ZeroK,
    #[error("gradient check failed: {0}")]
    GradCheck(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Deterministic 64-bit mixer used to derive per-item RNG seeds.
pub(crate) fn mix_seed(parts: &[u64]) -> u64 {
    let mut x = 0x243f_6a88_85a3_08d3u64;
    for &p in parts {
        x ^= p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = x;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x = z ^ (z >> 31);
    }
    x
}

/// Inverted-dropout mask: each entry is 0 with probability `p`, otherwise
/// `1 / (1 - p)`.
pub(crate) fn dropout_mask<R: rand::Rng>(rng: &mut R, n: usize, p: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    (0..n)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
        .collect()
}
