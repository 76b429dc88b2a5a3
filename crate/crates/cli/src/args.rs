use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cyclekit::basis::RootMode;
use cyclekit::pipeline::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "cyclekit", version, about = "Cycle-basis GNN for inductive relation prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the training bases, write the basis cache and per-cycle stats.
    Prepare(RunArgs),
    /// Train on the training split; writes the best checkpoint and a JSONL log.
    Train(RunArgs),
    /// Score a split with a checkpoint; writes metrics JSON.
    Eval(EvalArgs),
    /// Basis statistics.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Train and evaluate once per k; writes `k,auc_pr` CSV.
    SweepK(SweepArgs),
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Histogram of the shortest basis cycle through each target.
    Shortness(ShortnessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Ablation {
    /// One spectrally rooted basis.
    SingleBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RootArg {
    Cluster,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
}

impl SplitArg {
    pub fn name(self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Test => "test",
        }
    }
}

/// Settings shared by every command. Unset flags fall back to the config
/// file, then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// `key = value` file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding `train.txt` and `test.txt`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of shortest path trees.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: Option<u64>,
    /// Overlap neighbours per cycle.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub m: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub epochs: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub patience: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// LSTM hidden size.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub d_h: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Negatives per positive for training and AUC-PR.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub neg_ratio: Option<u64>,
    #[arg(long, value_enum)]
    pub root_mode: Option<RootArg>,
    #[arg(long, value_enum)]
    pub ablation: Option<Ablation>,
}

impl RunArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self, base: RunConfig) -> anyhow::Result<RunConfig> {
        let mut cfg = base;
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() {
                    cfg.$field = v.try_into()?;
                })*
            };
        }
        take!(data, out, k, m, epochs, patience, lr, weight_decay, dropout, d_h, seed, neg_ratio);
        if let Some(r) = self.root_mode {
            cfg.root_mode = match r {
                RootArg::Cluster => RootMode::Cluster,
                RootArg::Random => RootMode::Random,
            };
        }
        if self.ablation == Some(Ablation::SingleBasis) {
            cfg.k = 1;
            cfg.root_mode = RootMode::Cluster;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    #[value(name = "auc-pr")]
    AucPr,
    #[value(name = "hits@10")]
    HitsAt10,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Defaults to `<out>/model.ckpt`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "auc-pr")]
    pub metric: Vec<MetricArg>,
    /// Negative samplings to average over.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub repeats: Option<u64>,
    /// Negatives per positive for Hits@10.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub num_neg: Option<u64>,
    /// Defaults to `<out>/metrics_<split>.json`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ShortnessArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated: `single`, `random-<k>`, `cluster-<k>`.
    #[arg(long, value_delimiter = ',', default_value = "single,random-10,cluster-10")]
    pub modes: Vec<String>,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,5,10,20")]
    pub values: Vec<usize>,
    /// Defaults to `<out>/sweep_k.csv`.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
