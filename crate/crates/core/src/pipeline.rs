//! End-to-end runs: target sampling, basis construction, training with
//! early stopping, and the evaluation protocols.

use std::borrow::Cow;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::cache::read_cache;
use crate::basis::{build_all_bases, BasisError, BasisSet, RootMode};
use crate::kg::{
    add_targets_to_graph, all_positives, sample_negatives, KgError, KnowledgeGraph, TargetSet,
    WorkingGraph,
};
use crate::metrics::{
    auc_pr, hits_at_k, shortness_histogram, MetricError, MetricsReport, PhaseTimer,
    ShortnessHistogram, INFERENCE, PREPARATION, TRAINING,
};
use crate::nn::model::{loss_and_grad, predict};
use crate::nn::{Adam, Checkpoint, Instance, Mode, ModelConfig, ModelParams, NnError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    ConfigFile { path: PathBuf, msg: String },
    #[error("non-finite loss at epoch {epoch}")]
    NanLoss { epoch: usize },
    #[error("epoch {epoch}: {source}")]
    Epoch {
        epoch: usize,
        #[source]
        source: NnError,
    },
    #[error("relation vocabulary mismatch: {0}")]
    Vocab(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Every knob of a run. Defaults follow the published hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub k: usize,
    pub m: usize,
    pub epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub d_h: usize,
    pub seed: u64,
    /// Negatives per positive for training and AUC-PR.
    pub neg_ratio: usize,
    /// Negatives per positive for Hits@10.
    pub num_neg: usize,
    pub repeats: usize,
    pub root_mode: RootMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: PathBuf::from("."),
            out: PathBuf::from("out"),
            k: 20,
            m: 2,
            epochs: 100,
            patience: 20,
            lr: 0.005,
            weight_decay: 5e-5,
            dropout: 0.2,
            d_h: 10,
            seed: 0,
            neg_ratio: 1,
            num_neg: 50,
            repeats: 1,
            root_mode: RootMode::Cluster,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        if self.epochs == 0 || self.patience == 0 {
            return bad("epochs and patience must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.d_h == 0 || self.neg_ratio == 0 || self.num_neg == 0 || self.repeats == 0 {
            return bad("d_h, neg_ratio, num_neg and repeats must be positive");
        }
        Ok(())
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse {v:?}"))
        }
        match key {
            "data" => self.data = PathBuf::from(value),
            "out" => self.out = PathBuf::from(value),
            "k" => self.k = num(value)?,
            "m" => self.m = num(value)?,
            "epochs" => self.epochs = num(value)?,
            "patience" => self.patience = num(value)?,
            "lr" => self.lr = num(value)?,
            "weight_decay" => self.weight_decay = num(value)?,
            "dropout" => self.dropout = num(value)?,
            "d_h" => self.d_h = num(value)?,
            "seed" => self.seed = num(value)?,
            "neg_ratio" => self.neg_ratio = num(value)?,
            "num_neg" => self.num_neg = num(value)?,
            "repeats" => self.repeats = num(value)?,
            "root_mode" => {
                self.root_mode = match value {
                    "cluster" => RootMode::Cluster,
                    "random" => RootMode::Random,
                    _ => return Err(format!("unknown root mode {value:?}")),
                }
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Applies a TOML file of top-level `key = value` pairs.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let err = |msg: String| PipelineError::ConfigFile {
            path: path.to_path_buf(),
            msg,
        };
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| err(e.to_string()))?;
        for (key, value) in &table {
            let text = match value {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(_) | toml::Value::Float(_) => value.to_string(),
                _ => return Err(err(format!("{key}: expected a string or a number"))),
            };
            self.set(key, &text).map_err(|m| err(format!("{key}: {m}")))?;
        }
        Ok(())
    }

    pub fn dataset_name(&self) -> String {
        self.data
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }

    pub fn model_config(&self, num_relations: usize, k: usize) -> ModelConfig {
        let mut c = ModelConfig::new(num_relations, k);
        c.hidden = self.d_h;
        c.embed_dim = 2 * self.d_h;
        c.dropout = self.dropout;
        c
    }
}

/// A split with sampled targets, its working graph, bases and network
/// input.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub targets: TargetSet,
    pub working: WorkingGraph,
    pub bases: BasisSet,
    pub instance: Instance,
}

impl Prepared {
    pub fn labels(&self) -> &[bool] {
        &self.working.labels
    }
}

/// Seed of the negatives for repeat `r`; repeat 0 is what training sees.
pub fn negative_seed(seed: u64, repeat: usize) -> u64 {
    seed.wrapping_add(repeat as u64)
}

/// `kg` with entity ids in first-appearance order. Sampling and basis
/// construction break ties by id, so this makes every result independent
/// of how ids were assigned. Loaded splits are already in this order.
pub fn canonical(kg: &KnowledgeGraph) -> Cow<'_, KnowledgeGraph> {
    if kg.is_first_appearance_ordered() {
        Cow::Borrowed(kg)
    } else {
        Cow::Owned(kg.relabel_by_first_appearance())
    }
}

/// All edges of `kg` plus `ratio` negatives each, bases on the resulting
/// working graph, and the network instance. Ids in the result refer to
/// [`canonical`]`(kg)`.
pub fn prepare(
    kg: &KnowledgeGraph,
    k: usize,
    m: usize,
    ratio: usize,
    neg_seed: u64,
    basis_seed: u64,
    mode: RootMode,
) -> Result<Prepared, PipelineError> {
    let kg = &*canonical(kg);
    let targets = sample_negatives(kg, &all_positives(kg), ratio, neg_seed)?;
    prepare_targets(kg, targets, k, m, basis_seed, mode)
}

pub fn prepare_targets(
    kg: &KnowledgeGraph,
    targets: TargetSet,
    k: usize,
    m: usize,
    basis_seed: u64,
    mode: RootMode,
) -> Result<Prepared, PipelineError> {
    let working = add_targets_to_graph(kg, &targets)?;
    let bases = build_all_bases(&working.graph, k, basis_seed, mode)?;
    let instance = Instance::build(&working.graph, &bases, m, &working.target_edges)?;
    Ok(Prepared {
        targets,
        working,
        bases,
        instance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub train_auc_pr: f64,
    pub best_auc_pr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub best_epoch: usize,
    pub best_auc_pr: f64,
    pub log: Vec<EpochLog>,
    pub timer: PhaseTimer,
}

/// Trains on every edge of `train` against sampled negatives. The returned
/// checkpoint holds the parameters with the best training AUC-PR. Each
/// epoch's record is written to `log` as one JSON line.
pub fn train(
    train: &KnowledgeGraph,
    cfg: &RunConfig,
    log: Option<&mut dyn Write>,
) -> Result<TrainOutcome, PipelineError> {
    cfg.validate()?;
    let mut timer = PhaseTimer::new();
    let prepared = timer.time(PREPARATION, || prepare_training(train, cfg, None))?;
    train_prepared(train, &prepared.0, cfg, timer, log)
}

/// The training split's targets and instance. Bases come from `cache` when
/// it holds a set for the same working graph, `k`, seed and root mode;
/// the flag reports whether it did.
pub fn prepare_training(
    train: &KnowledgeGraph,
    cfg: &RunConfig,
    cache: Option<&Path>,
) -> Result<(Prepared, bool), PipelineError> {
    let train = &*canonical(train);
    let targets = sample_negatives(
        train,
        &all_positives(train),
        cfg.neg_ratio,
        negative_seed(cfg.seed, 0),
    )?;
    let working = add_targets_to_graph(train, &targets)?;
    let cached = cache
        .filter(|p| p.exists())
        .and_then(|p| match read_cache(p, &working.graph, cfg.k, cfg.seed) {
            Ok(set) if set.mode() == cfg.root_mode => Some(set),
            Ok(_) => None,
            Err(e) => {
                log::warn!("ignoring basis cache {}: {e}", p.display());
                None
            }
        });
    let hit = cached.is_some();
    let bases = match cached {
        Some(b) => b,
        None => build_all_bases(&working.graph, cfg.k, cfg.seed, cfg.root_mode)?,
    };
    let instance = Instance::build(&working.graph, &bases, cfg.m, &working.target_edges)?;
    Ok((
        Prepared {
            targets,
            working,
            bases,
            instance,
        },
        hit,
    ))
}

pub fn train_prepared(
    train: &KnowledgeGraph,
    prepared: &Prepared,
    cfg: &RunConfig,
    mut timer: PhaseTimer,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainOutcome, PipelineError> {
    let mcfg = cfg.model_config(train.num_relations(), cfg.k);
    let mut params = ModelParams::init(&mcfg, cfg.seed);
    let mut opt = Adam::new(&params, cfg.lr, cfg.weight_decay);
    let labels = prepared.labels();
    let inst = &prepared.instance;
    let mut best = (f64::NEG_INFINITY, 0usize, params.clone());
    let mut records = Vec::new();
    let mut stale = 0;
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let mode = Mode::Train {
            seed: cfg.seed,
            epoch: epoch as u64,
        };
        let (loss, grads, _) = loss_and_grad(&params, &mcfg, inst, labels, mode).map_err(|e| match e {
            NnError::NonFinite { tensor, .. } if tensor == "loss" => PipelineError::NanLoss { epoch },
            e => PipelineError::Epoch { epoch, source: e },
        })?;
        opt.step(&mut params, &grads);
        params
            .ensure_finite("optimizer step")
            .map_err(|e| PipelineError::Epoch { epoch, source: e })?;
        let pred = predict(&params, &mcfg, inst)?;
        let auc = auc_pr(&pred.final_conf, labels)?;
        if auc > best.0 {
            best = (auc, epoch, params.clone());
            stale = 0;
        } else {
            stale += 1;
        }
        let seconds = start.elapsed().as_secs_f64();
        timer.add(TRAINING, seconds);
        let rec = EpochLog {
            epoch,
            loss,
            train_auc_pr: auc,
            best_auc_pr: best.0,
            seconds,
        };
        log::info!("epoch {epoch} loss {loss:.5} train auc-pr {auc:.4}");
        if let Some(w) = log.as_deref_mut() {
            let line = serde_json::to_string(&rec).expect("plain data serializes");
            writeln!(w, "{line}").map_err(|source| PipelineError::Io {
                path: PathBuf::from("<training log>"),
                source,
            })?;
        }
        records.push(rec);
        if stale >= cfg.patience {
            log::info!("early stop after epoch {epoch}");
            break;
        }
    }
    let (best_auc_pr, best_epoch, best_params) = best;
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            config: mcfg,
            params: best_params,
            seed: cfg.seed,
            relations: train.relations().names().to_vec(),
            meta: serde_json::to_value(cfg).expect("plain data serializes"),
        },
        best_epoch,
        best_auc_pr,
        log: records,
        timer,
    })
}

/// Checks that `kg` uses the checkpoint's relation ids.
pub fn check_vocab(ck: &Checkpoint, kg: &KnowledgeGraph) -> Result<(), PipelineError> {
    let names = kg.relations().names();
    if names.len() > ck.relations.len() || names.iter().zip(&ck.relations).any(|(a, b)| a != b) {
        return Err(PipelineError::Vocab(format!(
            "graph relations {:?} are not a prefix of the checkpoint's {:?}",
            names, ck.relations
        )));
    }
    if ck.config.num_relations != names.len() {
        return Err(PipelineError::Vocab(format!(
            "checkpoint was trained on {} relations, graph has {}",
            ck.config.num_relations,
            names.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    AucPr,
    HitsAt10,
}

/// Scores of every target of a prepared split under `ck`.
pub fn score(ck: &Checkpoint, prepared: &Prepared) -> Result<Vec<f64>, PipelineError> {
    Ok(predict(&ck.params, &ck.config, &prepared.instance)?.final_conf)
}

/// Evaluates a checkpoint on `kg`. Settings that shape the instance (k, m,
/// root mode, seed) come from `cfg`; callers pass the training run's.
pub fn evaluate(
    kg: &KnowledgeGraph,
    ck: &Checkpoint,
    cfg: &RunConfig,
    split: &str,
    metrics: &[Metric],
) -> Result<MetricsReport, PipelineError> {
    check_vocab(ck, kg)?;
    let k = ck.config.k;
    let mut timer = PhaseTimer::new();
    let mut report = MetricsReport {
        dataset: cfg.dataset_name(),
        split: split.to_string(),
        k,
        seed: cfg.seed,
        auc_pr: None,
        hits_at_10: None,
        n_pos: kg.num_edges(),
        n_neg: 0,
        auc_pr_runs: Vec::new(),
        hits_at_10_runs: Vec::new(),
        phase_times: Default::default(),
    };
    for r in 0..cfg.repeats {
        let neg_seed = negative_seed(cfg.seed, r);
        if metrics.contains(&Metric::AucPr) {
            let p = timer.time(PREPARATION, || {
                prepare(kg, k, cfg.m, cfg.neg_ratio, neg_seed, cfg.seed, cfg.root_mode)
            })?;
            let scores = timer.time(INFERENCE, || score(ck, &p))?;
            report.auc_pr_runs.push(auc_pr(&scores, p.labels())?);
            report.n_neg = p.targets.negatives().len();
        }
        if metrics.contains(&Metric::HitsAt10) {
            let h = hits_protocol(kg, ck, cfg, neg_seed, &mut timer)?;
            report.hits_at_10_runs.push(h);
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    report.auc_pr = mean(&report.auc_pr_runs);
    report.hits_at_10 = mean(&report.hits_at_10_runs);
    report.phase_times = timer.phases().clone();
    Ok(report)
}

/// Hits@10 against `num_neg` negatives per positive. Round `i` adds the
/// `i`-th negative of every positive to the graph and scores all positives
/// and those negatives; a positive's score is its mean over rounds.
pub fn hits_protocol(
    kg: &KnowledgeGraph,
    ck: &Checkpoint,
    cfg: &RunConfig,
    neg_seed: u64,
    timer: &mut PhaseTimer,
) -> Result<f64, PipelineError> {
    let kg = &*canonical(kg);
    let k = ck.config.k;
    let all = sample_negatives(kg, &all_positives(kg), cfg.num_neg, neg_seed)?;
    let n = all.num_positives;
    let mut pos = vec![0.0; n];
    let mut neg = vec![Vec::with_capacity(cfg.num_neg); n];
    for round in 0..cfg.num_neg {
        let p = timer.time(PREPARATION, || {
            prepare_targets(kg, all.round(round), k, cfg.m, cfg.seed, cfg.root_mode)
        })?;
        let s = timer.time(INFERENCE, || score(ck, &p))?;
        for i in 0..n {
            pos[i] += s[i] / cfg.num_neg as f64;
            neg[i].push(s[n + i]);
        }
    }
    Ok(hits_at_k(&pos, &neg, 10)?)
}

/// Which roots a shortness histogram is computed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShortnessMode {
    Single,
    Random(usize),
    Cluster(usize),
}

impl ShortnessMode {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "single" {
            return Some(Self::Single);
        }
        let (kind, k) = s.split_once('-')?;
        let k: usize = k.parse().ok().filter(|&k| k > 0)?;
        match kind {
            "random" => Some(Self::Random(k)),
            "cluster" => Some(Self::Cluster(k)),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Single => "single".into(),
            Self::Random(k) => format!("random-{k}"),
            Self::Cluster(k) => format!("cluster-{k}"),
        }
    }

    /// Single is one spectrally chosen root, the same as `cluster-1`.
    pub fn roots(&self) -> (usize, RootMode) {
        match *self {
            Self::Single => (1, RootMode::Cluster),
            Self::Random(k) => (k, RootMode::Random),
            Self::Cluster(k) => (k, RootMode::Cluster),
        }
    }
}

/// Shortest covering cycle per target of the split's working graph (every
/// edge plus `neg_ratio` negatives each) under the bases of `mode`.
pub fn shortness(
    kg: &KnowledgeGraph,
    cfg: &RunConfig,
    mode: ShortnessMode,
) -> Result<ShortnessHistogram, PipelineError> {
    let kg = &*canonical(kg);
    let targets = sample_negatives(kg, &all_positives(kg), cfg.neg_ratio, negative_seed(cfg.seed, 0))?;
    let working = add_targets_to_graph(kg, &targets)?;
    let (k, root_mode) = mode.roots();
    let bases = build_all_bases(&working.graph, k, cfg.seed, root_mode)?;
    Ok(shortness_histogram(&[&bases], &working.target_edges))
}

/// Test AUC-PR of a model trained with each `k`.
pub fn sweep_k(
    train_kg: &KnowledgeGraph,
    test_kg: &KnowledgeGraph,
    cfg: &RunConfig,
    ks: &[usize],
) -> Result<Vec<(usize, f64)>, PipelineError> {
    if ks.is_empty() {
        return Err(PipelineError::Config("no k values given".into()));
    }
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let run = RunConfig { k, ..cfg.clone() };
        let trained = train(train_kg, &run, None)?;
        let rep = evaluate(test_kg, &trained.checkpoint, &run, "test", &[Metric::AucPr])?;
        out.push((k, rep.auc_pr.unwrap_or(f64::NAN)));
    }
    Ok(out)
}
