use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cyclekit::nn::read_checkpoint;
use cyclekit::synthetic::{write_dataset, SyntheticConfig};

fn data_dir(root: &Path) -> PathBuf {
    let dir = root.join("data");
    let cfg = SyntheticConfig {
        entities: 60,
        ..Default::default()
    };
    write_dataset(&dir, &cfg, &cfg, 5).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cyclekit"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn prepare_is_reproducible_and_rejects_zero_k() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let text = ok(&["prepare", "--data", s(&data), "--out", s(out), "--k", "3", "--seed", "7"]);
        assert!(text.contains("beta"), "{text}");
        assert!(text.contains("median"), "{text}");
    }
    assert_eq!(fs::read(a.join("train.basis")).unwrap(), fs::read(b.join("train.basis")).unwrap());
    let stats = fs::read_to_string(a.join("basis_stats.csv")).unwrap();
    assert!(stats.starts_with("cycle_id,root,length\n0,"));

    let out = run(&["prepare", "--data", s(&data), "--out", s(&a), "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn one_epoch_then_eval_reproduces_training_auc() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir(tmp.path());
    let out = tmp.path().join("out");
    ok(&["prepare", "--data", s(&data), "--out", s(&out), "--k", "2"]);
    ok(&["train", "--data", s(&data), "--out", s(&out), "--k", "2", "--epochs", "1"]);
    let log = fs::read_to_string(out.join("train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 1);
    let rec: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(rec["epoch"], 1);

    ok(&["eval", "--out", s(&out), "--split", "train", "--metric", "auc-pr"]);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("metrics_train.json")).unwrap()).unwrap();
    let logged = rec["train_auc_pr"].as_f64().unwrap();
    assert!((m["auc_pr"].as_f64().unwrap() - logged).abs() <= 1e-9);
    assert_eq!(m["k"], 2);

    ok(&[
        "eval", "--out", s(&out), "--metric", "auc-pr,hits@10", "--repeats", "2", "--num-neg", "4",
    ]);
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("metrics_test.json")).unwrap()).unwrap();
    assert_eq!(m["auc_pr_runs"].as_array().unwrap().len(), 2);
    assert!(m["hits_at_10"].as_f64().is_some());
    assert!(m["phase_times"]["inference"].as_f64().is_some());
}

#[test]
fn flags_override_config_file_and_ablation_forces_one_basis() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir(tmp.path());
    let conf = tmp.path().join("run.conf");
    fs::write(&conf, format!("data = {:?}\nk = 2\nepochs = 1\n", s(&data))).unwrap();
    let k_of = |out: &Path| read_checkpoint(&out.join("model.ckpt")).unwrap().config.k;

    let a = tmp.path().join("a");
    ok(&["train", "--config", s(&conf), "--out", s(&a)]);
    assert_eq!(k_of(&a), 2);

    let b = tmp.path().join("b");
    ok(&["train", "--config", s(&conf), "--out", s(&b), "--k", "3"]);
    assert_eq!(k_of(&b), 3);

    let c = tmp.path().join("c");
    ok(&["train", "--config", s(&conf), "--out", s(&c), "--k", "3", "--ablation", "single-basis"]);
    assert_eq!(k_of(&c), 1);
}

#[test]
fn shortness_csvs_sum_to_one_and_single_matches_cluster_one() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir(tmp.path());
    let out = tmp.path().join("out");
    ok(&[
        "stats", "shortness", "--data", s(&data), "--out", s(&out), "--modes",
        "single,random-3,cluster-3,cluster-1",
    ]);
    for label in ["single", "random-3", "cluster-3"] {
        let text = fs::read_to_string(out.join(format!("shortness_{label}.csv"))).unwrap();
        let total: f64 = text
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-9, "{label}: {total}");
    }
    assert_eq!(
        fs::read(out.join("shortness_single.csv")).unwrap(),
        fs::read(out.join("shortness_cluster-1.csv")).unwrap()
    );
    let bad = run(&["stats", "shortness", "--data", s(&data), "--out", s(&out), "--modes", "tree-4"]);
    assert!(!bad.status.success());
}

#[test]
fn sweep_writes_one_row_per_k() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir(tmp.path());
    let out = tmp.path().join("out");
    ok(&["sweep-k", "--data", s(&data), "--out", s(&out), "--values", "1,2", "--epochs", "1"]);
    let text = fs::read_to_string(out.join("sweep_k.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,auc_pr");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,") && lines[2].starts_with("2,"));
}

#[test]
fn failures_exit_nonzero_with_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere");
    let out = run(&["train", "--data", s(&missing), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
    assert!(!tmp.path().join("o").join("model.ckpt").exists());

    let data = data_dir(tmp.path());
    let out = Command::new(env!("CARGO_BIN_EXE_cyclekit"))
        .args(["prepare", "--data", s(&data), "--out", s(&tmp.path().join("p"))])
        .env("CYCLEKIT_THREADS", "lots")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("CYCLEKIT_THREADS"));
}

#[test]
fn repeated_runs_give_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let data = data_dir(tmp.path());
    let mut reports = Vec::new();
    for name in ["x", "y"] {
        let out = tmp.path().join(name);
        ok(&["train", "--data", s(&data), "--out", s(&out), "--k", "2", "--epochs", "2", "--seed", "3"]);
        ok(&["eval", "--out", s(&out)]);
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("metrics_test.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("phase_times");
        reports.push(v.to_string());
        assert!(!fs::read(out.join("model.ckpt")).unwrap().is_empty());
    }
    assert_eq!(reports[0], reports[1]);
}
