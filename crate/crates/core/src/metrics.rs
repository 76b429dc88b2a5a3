//! Ranking metrics, phase timing and the basis shortness statistic.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::BasisSet;
use crate::kg::EdgeId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricError {
    #[error("metric undefined without positive examples")]
    NoPositives,
    #[error("{scores} scores for {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
}

/// Area under the precision-recall curve as average precision: scores are
/// sorted descending (ties keep input order) and precision is averaged over
/// the positions of the positives.
pub fn auc_pr(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(MetricError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

/// `1 + #{neg > pos} + ⌊#{neg = pos} / 2⌋`.
pub fn rank_against(pos: f64, negatives: &[f64]) -> usize {
    let greater = negatives.iter().filter(|&&n| n > pos).count();
    let ties = negatives.iter().filter(|&&n| n == pos).count();
    1 + greater + ties / 2
}

pub fn is_hit(pos: f64, negatives: &[f64], k: usize) -> bool {
    rank_against(pos, negatives) <= k
}

/// Fraction of positives ranked within the top `k` of their negatives.
pub fn hits_at_k(pos: &[f64], negatives: &[Vec<f64>], k: usize) -> Result<f64, MetricError> {
    if pos.is_empty() {
        return Err(MetricError::NoPositives);
    }
    if pos.len() != negatives.len() {
        return Err(MetricError::LengthMismatch {
            scores: negatives.len(),
            labels: pos.len(),
        });
    }
    let hits = pos
        .iter()
        .zip(negatives)
        .filter(|(&p, n)| is_hit(p, n, k))
        .count();
    Ok(hits as f64 / pos.len() as f64)
}

/// Wall-clock seconds per named phase.
#[derive(Debug, Clone, Default)]
pub struct PhaseTimer {
    phases: BTreeMap<String, f64>,
}

impl PhaseTimer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `f`, adding its duration to `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.add(phase, start.elapsed().as_secs_f64());
        out
    }

    pub fn add(&mut self, phase: &str, secs: f64) {
        *self.phases.entry(phase.to_string()).or_default() += secs;
    }

    pub fn get(&self, phase: &str) -> f64 {
        self.phases.get(phase).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.phases.values().sum()
    }

    pub fn phases(&self) -> &BTreeMap<String, f64> {
        &self.phases
    }
}

pub const PREPARATION: &str = "preparation";
pub const TRAINING: &str = "training";
pub const INFERENCE: &str = "inference";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub split: String,
    pub k: usize,
    pub seed: u64,
    pub auc_pr: Option<f64>,
    pub hits_at_10: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Per-repeat values behind the means above.
    pub auc_pr_runs: Vec<f64>,
    pub hits_at_10_runs: Vec<f64>,
    pub phase_times: BTreeMap<String, f64>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    /// The report with timing removed, for reproducibility comparisons.
    pub fn to_json_without_timing(&self) -> String {
        let mut v = serde_json::to_value(self).expect("plain data serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("phase_times");
        }
        serde_json::to_string_pretty(&v).expect("plain data serializes")
    }
}

/// Proportion of targets by the length of the shortest basis cycle through
/// them; `None` collects uncovered targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortnessHistogram {
    pub counts: BTreeMap<usize, usize>,
    pub uncovered: usize,
    pub total: usize,
}

impl ShortnessHistogram {
    pub fn proportions(&self) -> Vec<(Option<usize>, f64)> {
        let n = self.total.max(1) as f64;
        let mut out: Vec<(Option<usize>, f64)> = self
            .counts
            .iter()
            .map(|(&l, &c)| (Some(l), c as f64 / n))
            .collect();
        if self.uncovered > 0 {
            out.push((None, self.uncovered as f64 / n));
        }
        out
    }

    /// Mean minimum length over covered targets.
    pub fn mean_covered(&self) -> Option<f64> {
        let covered: usize = self.counts.values().sum();
        (covered > 0).then(|| {
            self.counts.iter().map(|(&l, &c)| (l * c) as f64).sum::<f64>() / covered as f64
        })
    }

    /// `min_length,proportion`, with `inf` for uncovered targets.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "min_length,proportion")?;
        for (l, p) in self.proportions() {
            match l {
                Some(l) => writeln!(w, "{l},{p}")?,
                None => writeln!(w, "inf,{p}")?,
            }
        }
        Ok(())
    }
}

/// For each target edge, the shortest cycle containing it in any slot of any
/// of `sets`.
pub fn shortness_histogram(sets: &[&BasisSet], targets: &[EdgeId]) -> ShortnessHistogram {
    let mut counts = BTreeMap::new();
    let mut uncovered = 0;
    for &e in targets {
        let best = sets
            .iter()
            .flat_map(|s| s.slots())
            .flat_map(|slot| {
                let ct = slot.incidence();
                ct.row(e).iter().map(move |&j| ct.column(j as usize).len())
            })
            .min();
        match best {
            Some(l) => *counts.entry(l).or_insert(0) += 1,
            None => uncovered += 1,
        }
    }
    ShortnessHistogram {
        counts,
        uncovered,
        total: targets.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_all_bases, RootMode};
    use crate::kg::{KnowledgeGraph, RelationVocab};

    #[test]
    fn ap_by_hand() {
        // ranking: +, -, +  → (1/1 + 2/3) / 2
        let ap = auc_pr(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
        assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(auc_pr(&[0.1, 0.9], &[false, true]).unwrap(), 1.0);
        assert_eq!(auc_pr(&[0.1], &[false]), Err(MetricError::NoPositives));
    }

    #[test]
    fn ties_keep_input_order() {
        assert_eq!(auc_pr(&[0.5, 0.5], &[true, false]).unwrap(), 1.0);
        assert_eq!(auc_pr(&[0.5, 0.5], &[false, true]).unwrap(), 0.5);
    }

    #[test]
    fn half_tie_rank() {
        assert_eq!(rank_against(0.5, &[0.9, 0.5, 0.5, 0.5, 0.1]), 3);
        assert!(is_hit(1.0, &[0.0; 50], 10));
        assert!(!is_hit(0.0, &[1.0; 50], 10));
        // all tied: rank 1 + 25
        assert!(!is_hit(0.3, &[0.3; 50], 10));
    }

    #[test]
    fn timing_accumulates() {
        let mut t = PhaseTimer::new();
        let v = t.time(TRAINING, || 4);
        assert_eq!(v, 4);
        t.add(TRAINING, 1.0);
        assert!(t.get(TRAINING) >= 1.0);
        assert_eq!(t.get(INFERENCE), 0.0);
    }

    #[test]
    fn shortness_bins() {
        // triangle 0-1-2 plus a pendant edge 2-3
        let kg = KnowledgeGraph::from_triples(
            4,
            RelationVocab::from_names(["r"]),
            [(0, 0, 1), (1, 0, 2), (2, 0, 0), (2, 0, 3)],
        );
        let set = build_all_bases(&kg, 1, 0, RootMode::Cluster).unwrap();
        let h = shortness_histogram(&[&set], &[0, 2, 3]);
        assert_eq!(h.counts.get(&3), Some(&2));
        assert_eq!(h.uncovered, 1);
        let total: f64 = h.proportions().iter().map(|p| p.1).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mut out = Vec::new();
        h.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("min_length,proportion\n3,"));
        assert!(text.trim_end().ends_with(&format!("inf,{}", 1.0 / 3.0)));
        assert_eq!(h.mean_covered(), Some(3.0));
    }

    #[test]
    fn report_json_drops_timing() {
        let mut r = MetricsReport {
            dataset: "d".into(),
            split: "test".into(),
            k: 2,
            seed: 1,
            auc_pr: Some(0.5),
            hits_at_10: None,
            n_pos: 1,
            n_neg: 1,
            auc_pr_runs: vec![0.5],
            hits_at_10_runs: vec![],
            phase_times: BTreeMap::new(),
        };
        let a = r.to_json_without_timing();
        r.phase_times.insert(TRAINING.into(), 3.0);
        assert_eq!(a, r.to_json_without_timing());
        assert!(r.to_json().contains("phase_times"));
    }
}
