mod args;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Parser;
use cyclekit::basis::cache::write_cache;
use cyclekit::kg::{load_dataset, Dataset, KnowledgeGraph};
use cyclekit::metrics::{PhaseTimer, PREPARATION};
use cyclekit::nn::{read_checkpoint, write_checkpoint};
use cyclekit::pipeline::{
    evaluate, prepare_training, shortness, sweep_k, train_prepared, Metric, Prepared, RunConfig,
    ShortnessMode,
};

use args::{Cli, Command, EvalArgs, MetricArg, RunArgs, ShortnessArgs, SplitArg, StatsCommand, SweepArgs};

const CACHE_FILE: &str = "train.basis";
const CHECKPOINT_FILE: &str = "model.ckpt";

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    let result = match cli.command {
        Command::Prepare(a) => cmd_prepare(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Stats(StatsCommand::Shortness(a)) => cmd_shortness(&a),
        Command::SweepK(a) => cmd_sweep_k(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Caps the worker pool at `CYCLEKIT_THREADS`.
fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("CYCLEKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("CYCLEKIT_THREADS must be a positive integer, got {v:?}"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    let ds = load_dataset(&cfg.data)
        .with_context(|| format!("loading dataset from {}", cfg.data.display()))?;
    for (name, kg, rep) in [
        ("train", &ds.train, ds.train_report),
        ("test", &ds.test, ds.test_report),
    ] {
        log::info!(
            "{name}: {} entities, {} edges, {} relations ({} duplicates, {} self-loops dropped)",
            kg.num_entities(),
            kg.num_edges(),
            kg.num_relations(),
            rep.duplicates,
            rep.self_loops
        );
    }
    Ok(ds)
}

fn out_dir(cfg: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .with_context(|| format!("writing {}", path.display()))
}

/// Nearest-rank quantile of sorted values.
fn quantile(sorted: &[usize], q: f64) -> usize {
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn cmd_prepare(a: &RunArgs) -> Result<()> {
    let cfg = a.resolve(RunConfig::default())?;
    let start = Instant::now();
    let ds = load(&cfg)?;
    let dir = out_dir(&cfg)?;
    let (prepared, _) = prepare_training(&ds.train, &cfg, None)?;
    let graph = &prepared.working.graph;
    let bases = &prepared.bases;
    let cache = dir.join(CACHE_FILE);
    write_cache(bases, graph, &cache)?;
    let comps = bases.components();
    let mut acyclic = 0;
    for c in 0..comps.len() {
        let beta = comps.betti(c);
        if beta == 0 {
            acyclic += 1;
            continue;
        }
        println!(
            "component {c}: {} vertices, {} edges, beta {beta}",
            comps.members(c).len(),
            comps.edges(c).len()
        );
    }
    println!("{acyclic} acyclic components skipped");
    let stats = dir.join("basis_stats.csv");
    let mut lengths = Vec::new();
    write_file(&stats, |w| {
        writeln!(w, "cycle_id,root,length")?;
        let mut id = 0usize;
        for b in bases.component_bases() {
            let root = graph.entity_name(b.tree().root());
            for j in 0..b.len() {
                let len = b.cycle_length(j);
                lengths.push(len);
                writeln!(w, "{id},{root},{len}")?;
                id += 1;
            }
        }
        Ok(())
    })?;
    lengths.sort_unstable();
    if lengths.is_empty() {
        println!("no cycles");
    } else {
        println!(
            "{} cycles over {} trees; length min {} p25 {} median {} p75 {} p90 {} max {}",
            lengths.len(),
            bases.component_bases().len(),
            lengths[0],
            quantile(&lengths, 0.25),
            quantile(&lengths, 0.5),
            quantile(&lengths, 0.75),
            quantile(&lengths, 0.9),
            lengths[lengths.len() - 1]
        );
    }
    println!("wrote {} and {}", cache.display(), stats.display());
    println!("elapsed {:.2} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_train(a: &RunArgs) -> Result<()> {
    let cfg = a.resolve(RunConfig::default())?;
    let ds = load(&cfg)?;
    let dir = out_dir(&cfg)?;
    let mut timer = PhaseTimer::new();
    let cache = dir.join(CACHE_FILE);
    let (prepared, hit): (Prepared, bool) =
        timer.time(PREPARATION, || prepare_training(&ds.train, &cfg, Some(&cache)))?;
    if hit {
        log::info!("bases loaded from {}", cache.display());
    }
    log::info!(
        "{} targets, {} cycles over {} slots",
        prepared.instance.num_targets,
        prepared.instance.total_cycles(),
        prepared.instance.k()
    );
    let log_path = dir.join("train_log.jsonl");
    let file = fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?;
    let mut log = BufWriter::new(file);
    let out = train_prepared(&ds.train, &prepared, &cfg, timer, Some(&mut log))?;
    log.flush().with_context(|| format!("writing {}", log_path.display()))?;
    let ck_path = dir.join(CHECKPOINT_FILE);
    write_checkpoint(&out.checkpoint, &ck_path)?;
    println!(
        "best training AUC-PR {:.4} at epoch {} of {}",
        out.best_auc_pr,
        out.best_epoch,
        out.log.len()
    );
    for (phase, secs) in out.timer.phases() {
        println!("{phase}: {secs:.2} s");
    }
    println!("wrote {} and {}", ck_path.display(), log_path.display());
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let defaults = RunConfig::default();
    let ck_path = match &a.checkpoint {
        Some(p) => p.clone(),
        None => a.run.resolve(defaults.clone())?.out.join(CHECKPOINT_FILE),
    };
    let ck = read_checkpoint(&ck_path)?;
    // the training run's settings shape the evaluation instance
    let base = serde_json::from_value::<RunConfig>(ck.meta.clone()).unwrap_or(defaults);
    let mut cfg = a.run.resolve(base)?;
    if let Some(r) = a.repeats {
        cfg.repeats = r.try_into()?;
    }
    if let Some(n) = a.num_neg {
        cfg.num_neg = n.try_into()?;
    }
    cfg.k = ck.config.k;
    let ds = load(&cfg)?;
    let kg: &KnowledgeGraph = match a.split {
        SplitArg::Train => &ds.train,
        SplitArg::Test => &ds.test,
    };
    let metrics: Vec<Metric> = a
        .metric
        .iter()
        .map(|m| match m {
            MetricArg::AucPr => Metric::AucPr,
            MetricArg::HitsAt10 => Metric::HitsAt10,
        })
        .collect();
    let report = evaluate(kg, &ck, &cfg, a.split.name(), &metrics)?;
    let dir = out_dir(&cfg)?;
    let path = a
        .output
        .clone()
        .unwrap_or_else(|| dir.join(format!("metrics_{}.json", a.split.name())));
    write_file(&path, |w| writeln!(w, "{}", report.to_json()))?;
    if let Some(v) = report.auc_pr {
        println!("AUC-PR {v:.4} over {} run(s)", report.auc_pr_runs.len());
    }
    if let Some(v) = report.hits_at_10 {
        println!("Hits@10 {v:.4} over {} run(s)", report.hits_at_10_runs.len());
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_shortness(a: &ShortnessArgs) -> Result<()> {
    let cfg = a.run.resolve(RunConfig::default())?;
    let mut modes = Vec::new();
    for m in &a.modes {
        match ShortnessMode::parse(m.trim()) {
            Some(mode) => modes.push(mode),
            None => bail!("unknown mode {m:?}; expected single, random-<k> or cluster-<k>"),
        }
    }
    let ds = load(&cfg)?;
    let kg = match a.split {
        SplitArg::Train => &ds.train,
        SplitArg::Test => &ds.test,
    };
    let dir = out_dir(&cfg)?;
    for mode in modes {
        let h = shortness(kg, &cfg, mode)?;
        let path: PathBuf = dir.join(format!("shortness_{}.csv", mode.label()));
        write_file(&path, |w| h.write_csv(w))?;
        let mean = h
            .mean_covered()
            .map_or_else(|| "n/a".to_string(), |m| format!("{m:.3}"));
        println!(
            "{}: mean minimum length {mean}, {} of {} targets uncovered; wrote {}",
            mode.label(),
            h.uncovered,
            h.total,
            path.display()
        );
    }
    Ok(())
}

fn cmd_sweep_k(a: &SweepArgs) -> Result<()> {
    let cfg = a.run.resolve(RunConfig::default())?;
    if a.values.iter().any(|&k| k == 0) {
        bail!("k values must be positive");
    }
    let ds = load(&cfg)?;
    let rows = sweep_k(&ds.train, &ds.test, &cfg, &a.values)?;
    let dir = out_dir(&cfg)?;
    let path = a.output.clone().unwrap_or_else(|| dir.join("sweep_k.csv"));
    write_file(&path, |w| {
        writeln!(w, "k,auc_pr")?;
        for (k, auc) in &rows {
            writeln!(w, "{k},{auc}")?;
        }
        Ok(())
    })?;
    for (k, auc) in &rows {
        println!("k={k}: AUC-PR {auc:.4}");
    }
    println!("wrote {}", path.display());
    Ok(())
}
