//! Whole-model forward and backward passes over a prepared instance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gcn::{self, NormAdj};
use super::head;
use super::lstm;
use super::params::{ModelConfig, ModelParams};
use super::sequence::{cycle_sequences, SequenceTable};
use super::tensor::Tensor;
use super::{dropout_mask, mix_seed, NnError};
use crate::basis::BasisSet;
use crate::cycle_graph::{build_cycle_graph, cycle_overlap};
use crate::kg::{EdgeId, KnowledgeGraph};
use crate::par;

const GCN_TAG: u64 = 2;

/// Whether dropout is active. Training masks are a pure function of the
/// seed, the epoch and the item they apply to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64, epoch: u64 },
}

impl Mode {
    pub(crate) fn dropout_rng(self, p: f64, tags: &[u64]) -> Option<ChaCha8Rng> {
        match self {
            Mode::Train { seed, epoch } if p > 0.0 => {
                let mut parts = vec![seed, epoch];
                parts.extend_from_slice(tags);
                Some(ChaCha8Rng::seed_from_u64(mix_seed(&parts)))
            }
            _ => None,
        }
    }
}

/// One basis slot ready for the network.
#[derive(Debug, Clone)]
pub struct SlotInstance {
    /// Row of the sequence table feeding each cycle.
    pub cycle_seq: Vec<u32>,
    pub adj: NormAdj,
    pub num_graph_edges: usize,
    target_ptr: Vec<usize>,
    target_cycles: Vec<u32>,
}

impl SlotInstance {
    pub fn num_cycles(&self) -> usize {
        self.cycle_seq.len()
    }

    /// Cycles of this slot containing target `t`.
    pub fn covering(&self, t: usize) -> &[u32] {
        &self.target_cycles[self.target_ptr[t]..self.target_ptr[t + 1]]
    }

    fn rows(&self) -> impl Iterator<Item = &[u32]> + '_ {
        (0..self.target_ptr.len() - 1).map(|t| self.covering(t))
    }
}

/// Everything the network needs about a graph, its bases and the targets
/// to score. Holds no entity ids.
#[derive(Debug, Clone)]
pub struct Instance {
    pub num_relations: usize,
    pub table: SequenceTable,
    pub slots: Vec<SlotInstance>,
    pub num_targets: usize,
}

impl Instance {
    /// Orients every basis cycle into relation sequences, builds each slot's
    /// cycle graph with `m` neighbours, and records which cycles cover each
    /// target edge.
    pub fn build(
        kg: &KnowledgeGraph,
        bases: &BasisSet,
        m: usize,
        targets: &[EdgeId],
    ) -> Result<Self, NnError> {
        let per_basis = par::map_slice(bases.component_bases(), |b| {
            b.cycles()
                .iter()
                .enumerate()
                .map(|(j, c)| cycle_sequences(kg, c, b.nontree_edge(j)).map(|(s1, _)| s1.tokens))
                .collect::<Result<Vec<_>, _>>()
        });
        let mut table = SequenceTable::new();
        let mut basis_seq = Vec::with_capacity(per_basis.len());
        for seqs in per_basis {
            basis_seq.push(seqs?.into_iter().map(|s| table.insert(s)).collect::<Vec<u32>>());
        }
        let slots = par::map_slice(bases.slots(), |slot| {
            let cycle_seq: Vec<u32> = slot
                .parts()
                .iter()
                .flat_map(|&p| basis_seq[p].iter().copied())
                .collect();
            let ct = slot.incidence();
            let cg = build_cycle_graph(&cycle_overlap(ct), m);
            let mut target_ptr = Vec::with_capacity(targets.len() + 1);
            let mut target_cycles = Vec::new();
            target_ptr.push(0);
            for &e in targets {
                target_cycles.extend_from_slice(ct.row(e));
                target_ptr.push(target_cycles.len());
            }
            SlotInstance {
                cycle_seq,
                adj: NormAdj::new(&cg),
                num_graph_edges: cg.edges().len(),
                target_ptr,
                target_cycles,
            }
        });
        Ok(Self {
            num_relations: kg.num_relations(),
            table,
            slots,
            num_targets: targets.len(),
        })
    }

    pub fn k(&self) -> usize {
        self.slots.len()
    }

    pub fn total_cycles(&self) -> usize {
        self.slots.iter().map(|s| s.num_cycles()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBatch {
    /// `P` per slot.
    pub cycle_conf: Vec<Vec<f64>>,
    /// `Y_i` per slot.
    pub slot_conf: Vec<Vec<f64>>,
    pub final_conf: Vec<f64>,
    /// Routing cycle per slot and target; `None` when uncovered.
    pub argmax: Vec<Vec<Option<u32>>>,
    pub weights: Vec<f64>,
}

fn check_shapes(cfg: &ModelConfig, p: &ModelParams, inst: &Instance) -> Result<(), NnError> {
    if inst.k() == 0 {
        return Err(NnError::ZeroK);
    }
    if p.basis_logits.len() != inst.k() || cfg.k != inst.k() {
        return Err(NnError::Shape(format!(
            "model has {} basis weights, instance has {} slots",
            p.basis_logits.len(),
            inst.k()
        )));
    }
    if inst.num_relations != cfg.num_relations {
        return Err(NnError::Shape(format!(
            "model knows {} relations, graph has {}",
            cfg.num_relations, inst.num_relations
        )));
    }
    Ok(())
}

struct SlotPass {
    conf: Vec<f64>,
    gcn: gcn::GcnCache,
    mlp: head::MlpCache,
}

fn slot_forward(
    p: &ModelParams,
    cfg: &ModelConfig,
    feats: &Tensor,
    slot: &SlotInstance,
    mode: Mode,
    s: usize,
) -> SlotPass {
    let n = slot.num_cycles();
    let fd = feats.cols;
    let mut x0 = Tensor::zeros(n, fd);
    for (j, &q) in slot.cycle_seq.iter().enumerate() {
        x0.row_mut(j).copy_from_slice(feats.row(q as usize));
    }
    let masks = mode.dropout_rng(cfg.dropout, &[GCN_TAG, s as u64]).map(|mut rng| {
        let m0 = dropout_mask(&mut rng, n * fd, cfg.dropout);
        let m1 = dropout_mask(&mut rng, n * cfg.gcn_hidden, cfg.dropout);
        (m0, m1)
    });
    let (z2, gcn) = gcn::forward(p, cfg, &slot.adj, x0, masks);
    let (conf, mlp) = head::cycle_confidence(p, z2);
    SlotPass { conf, gcn, mlp }
}

/// Confidences for every target, with dropout as given by `mode`.
pub fn forward(
    p: &ModelParams,
    cfg: &ModelConfig,
    inst: &Instance,
    mode: Mode,
) -> Result<PredictionBatch, NnError> {
    check_shapes(cfg, p, inst)?;
    let feats = lstm::features(p, cfg, &inst.table, mode);
    forward_from_features(p, cfg, inst, mode, &feats)
}

fn forward_from_features(
    p: &ModelParams,
    cfg: &ModelConfig,
    inst: &Instance,
    mode: Mode,
    feats: &Tensor,
) -> Result<PredictionBatch, NnError> {
    let per_slot = par::map_indexed(inst.k(), |s| {
        let slot = &inst.slots[s];
        let conf = slot_forward(p, cfg, feats, slot, mode, s).conf;
        let (y, arg) = head::max_route(slot.rows(), &conf);
        (conf, y, arg)
    });
    let mut cycle_conf = Vec::with_capacity(inst.k());
    let mut slot_conf = Vec::with_capacity(inst.k());
    let mut argmax = Vec::with_capacity(inst.k());
    for (c, y, a) in per_slot {
        cycle_conf.push(c);
        slot_conf.push(y);
        argmax.push(a);
    }
    let (final_conf, weights) = head::aggregate(&slot_conf, &p.basis_logits.data)?;
    Ok(PredictionBatch {
        cycle_conf,
        slot_conf,
        final_conf,
        argmax,
        weights,
    })
}

/// Which pre-activations are positive, over every slot's GCN hidden layer
/// and readout MLP. Perturbations that flip any of these cross a kink.
pub(crate) fn activation_signs(
    p: &ModelParams,
    cfg: &ModelConfig,
    inst: &Instance,
    mode: Mode,
) -> Result<Vec<bool>, NnError> {
    check_shapes(cfg, p, inst)?;
    let feats = lstm::features(p, cfg, &inst.table, mode);
    let mut signs = Vec::new();
    for (s, slot) in inst.slots.iter().enumerate() {
        let pass = slot_forward(p, cfg, &feats, slot, mode, s);
        signs.extend(pass.gcn.pre_activation().data.iter().map(|&v| v > 0.0));
        signs.extend(pass.mlp.pre_activation().data.iter().map(|&v| v > 0.0));
    }
    Ok(signs)
}

/// Evaluation-mode forward pass.
pub fn predict(p: &ModelParams, cfg: &ModelConfig, inst: &Instance) -> Result<PredictionBatch, NnError> {
    forward(p, cfg, inst, Mode::Eval)
}

/// Loss on `labels` and its gradient with respect to every parameter.
pub fn loss_and_grad(
    p: &ModelParams,
    cfg: &ModelConfig,
    inst: &Instance,
    labels: &[bool],
    mode: Mode,
) -> Result<(f64, ModelParams, PredictionBatch), NnError> {
    check_shapes(cfg, p, inst)?;
    if labels.len() != inst.num_targets {
        return Err(NnError::Shape(format!(
            "{} labels for {} targets",
            labels.len(),
            inst.num_targets
        )));
    }
    let feats = lstm::features(p, cfg, &inst.table, mode);
    let batch = forward_from_features(p, cfg, inst, mode, &feats)?;
    let loss = head::loss(&batch.final_conf, labels);
    if !loss.is_finite() {
        return Err(NnError::NonFinite {
            what: "loss".into(),
            tensor: "loss".into(),
        });
    }
    let dy = head::loss_grad(&batch.final_conf, labels);
    let mut grads = p.zeros_like();
    for (i, w) in batch.weights.iter().enumerate() {
        grads.basis_logits.data[i] = dy
            .iter()
            .zip(&batch.slot_conf[i])
            .zip(&batch.final_conf)
            .map(|((&d, &yi), &y)| d * w * (yi - y))
            .sum();
    }
    let per_slot = par::map_indexed(inst.k(), |s| {
        let slot = &inst.slots[s];
        let w = batch.weights[s];
        let mut dconf = vec![0.0; slot.num_cycles()];
        let mut any = false;
        for (t, a) in batch.argmax[s].iter().enumerate() {
            if let Some(j) = a {
                dconf[*j as usize] += w * dy[t];
                any |= dy[t] != 0.0;
            }
        }
        let mut g = p.zeros_like();
        if !any {
            return (g, None);
        }
        let pass = slot_forward(p, cfg, &feats, slot, mode, s);
        let dz2 = head::cycle_confidence_backward(p, &pass.mlp, &pass.conf, &dconf, &mut g);
        let dx0 = gcn::backward(p, cfg, &slot.adj, &pass.gcn, &dz2, &mut g);
        (g, Some(dx0))
    });
    let mut dfeat = Tensor::zeros(feats.rows, feats.cols);
    for (s, (g, dx0)) in per_slot.into_iter().enumerate() {
        grads.add_assign(&g);
        if let Some(dx0) = dx0 {
            for (j, &q) in inst.slots[s].cycle_seq.iter().enumerate() {
                for (d, &v) in dfeat.row_mut(q as usize).iter_mut().zip(dx0.row(j)) {
                    *d += v;
                }
            }
        }
    }
    lstm::backward(p, cfg, &inst.table, mode, &dfeat, &mut grads);
    grads.ensure_finite("backward pass")?;
    Ok((loss, grads, batch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_all_bases, RootMode};
    use crate::kg::RelationVocab;

    fn tiny() -> (KnowledgeGraph, Vec<EdgeId>) {
        let kg = KnowledgeGraph::from_triples(
            4,
            RelationVocab::from_names(["a", "b"]),
            [(0, 0, 1), (1, 1, 2), (0, 1, 2), (2, 0, 3), (3, 1, 0)],
        );
        (kg, vec![0, 2, 4])
    }

    #[test]
    fn zero_model_predicts_half_on_covered_targets() {
        let (kg, targets) = tiny();
        let bases = build_all_bases(&kg, 2, 1, RootMode::Cluster).unwrap();
        let inst = Instance::build(&kg, &bases, 2, &targets).unwrap();
        let cfg = ModelConfig::new(2, 2);
        let p = ModelParams::zeros(&cfg);
        let out = predict(&p, &cfg, &inst).unwrap();
        assert_eq!(out.final_conf, vec![0.5; 3]);
        assert_eq!(out.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn uncovered_target_scores_zero() {
        // a tree plus one triangle; edge 3 is a bridge
        let kg = KnowledgeGraph::from_triples(
            4,
            RelationVocab::from_names(["a"]),
            [(0, 0, 1), (1, 0, 2), (2, 0, 0), (2, 0, 3)],
        );
        let bases = build_all_bases(&kg, 1, 1, RootMode::Cluster).unwrap();
        let inst = Instance::build(&kg, &bases, 2, &[0, 3]).unwrap();
        let cfg = ModelConfig::new(1, 1);
        let p = ModelParams::init(&cfg, 4);
        let out = predict(&p, &cfg, &inst).unwrap();
        assert_eq!(out.final_conf[1], 0.0);
        assert!(out.final_conf[0] > 0.0 && out.final_conf[0] < 1.0);
    }

    #[test]
    fn eval_is_repeatable_and_train_masks_are_seeded() {
        let (kg, targets) = tiny();
        let bases = build_all_bases(&kg, 2, 1, RootMode::Cluster).unwrap();
        let inst = Instance::build(&kg, &bases, 2, &targets).unwrap();
        let cfg = ModelConfig::new(2, 2);
        let p = ModelParams::init(&cfg, 8);
        assert_eq!(predict(&p, &cfg, &inst).unwrap(), predict(&p, &cfg, &inst).unwrap());
        let labels = [true, true, false];
        let a = loss_and_grad(&p, &cfg, &inst, &labels, Mode::Train { seed: 3, epoch: 1 }).unwrap();
        let b = loss_and_grad(&p, &cfg, &inst, &labels, Mode::Train { seed: 3, epoch: 1 }).unwrap();
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn shape_mismatch_reported() {
        let (kg, targets) = tiny();
        let bases = build_all_bases(&kg, 2, 1, RootMode::Cluster).unwrap();
        let inst = Instance::build(&kg, &bases, 2, &targets).unwrap();
        let cfg = ModelConfig::new(2, 3);
        let p = ModelParams::zeros(&cfg);
        assert!(matches!(predict(&p, &cfg, &inst), Err(NnError::Shape(_))));
    }
}
