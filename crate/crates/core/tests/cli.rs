//! End-to-end runs of the `rhythmlab` binary on a tiny configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rhythmlab::train::{load_checkpoint, save_checkpoint};
use serde_json::Value;

const TINY: &str = r#"{
    "corpus": {"n_songs": 6, "min_seconds": 4.0, "max_seconds": 8.0},
    "net": {"model_width": 16, "n_layers": 1, "n_heads": 2, "max_frames": 32},
    "train": {
        "batch_size": 2,
        "stages": [{"l_max": 16, "steps": 4}, {"l_max": 32, "steps": 2}],
        "checkpoint_every": 3,
        "ema_every": 2,
        "prompt_len": 5
    },
    "sample": {"n_steps": 2},
    "eval": {"frames": 32}
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhythmlab"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn json_ok(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is one JSON document")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        fs::write(dir.path().join("tiny.json"), TINY).expect("write config");
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self) -> PathBuf {
        self.path("tiny.json")
    }

    fn dataset(&self, name: &str) -> PathBuf {
        let out = self.path(name);
        json_ok(&run(&[
            "dataset",
            "--config",
            s(&self.config()),
            "--out",
            s(&out),
        ]));
        out
    }

    fn train(&self, corpus: &Path, name: &str, extra: &[&str]) -> (PathBuf, Value) {
        let out = self.path(name);
        let config = self.config();
        let mut args = vec![
            "train",
            "--config",
            s(&config),
            "--corpus",
            s(corpus),
            "--out",
            s(&out),
        ];
        args.extend_from_slice(extra);
        let report = json_ok(&run(&args));
        (out, report)
    }
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        out.push((
            entry.strip_prefix(dir).unwrap().to_path_buf(),
            fs::read(&entry).unwrap(),
        ));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(walk(&p));
        } else {
            files.push(p);
        }
    }
    files
}

fn losses(metrics: &Path) -> Vec<f64> {
    fs::read_to_string(metrics)
        .unwrap()
        .lines()
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["loss"]
                .as_f64()
                .unwrap()
        })
        .collect()
}

#[test]
fn dataset_is_byte_deterministic() {
    let fx = Fixture::new();
    let a = fx.dataset("a");
    let b = fx.dataset("b");
    let ta = tree(&a);
    assert_eq!(ta, tree(&b));
    assert_eq!(ta.len(), 1 + 6 * 5);

    let other = fx.path("c");
    let report = json_ok(&run(&[
        "dataset",
        "--config",
        s(&fx.config()),
        "--seed",
        "99",
        "--out",
        s(&other),
    ]));
    assert_eq!(report["songs"], 6);
    assert_ne!(ta, tree(&other));
}

#[test]
fn empty_corpus_is_written() {
    let fx = Fixture::new();
    fs::write(fx.path("empty.json"), r#"{"corpus": {"n_songs": 0}}"#).unwrap();
    let out = fx.path("empty");
    let report = json_ok(&run(&[
        "dataset",
        "--config",
        s(&fx.path("empty.json")),
        "--out",
        s(&out),
    ]));
    assert_eq!(report["songs"], 0);
    assert_eq!(report["total_frames"], 0);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn train_resume_matches_uninterrupted_run() {
    let fx = Fixture::new();
    let corpus = fx.dataset("corpus");
    let (full, report) = fx.train(&corpus, "full", &[]);
    assert_eq!(report["steps"], 6);
    assert!(full.join("final.ckpt").exists());
    assert!(full.join("loss.csv").exists());
    assert!(full.join("checkpoints/step_0000003.ckpt").exists());

    let (part, report) = fx.train(&corpus, "part", &["--steps", "3"]);
    assert_eq!(report["steps"], 3);
    let ck = part.join("checkpoints/step_0000003.ckpt");
    let (_, report) = fx.train(&corpus, "part", &["--resume", s(&ck)]);
    assert_eq!(report["steps"], 6);
    assert_eq!(report["steps_run"], 3);
    assert_eq!(
        losses(&part.join("metrics.jsonl")),
        losses(&full.join("metrics.jsonl"))
    );
    assert_eq!(
        fs::read(part.join("final.ckpt")).unwrap(),
        fs::read(full.join("final.ckpt")).unwrap()
    );
}

#[test]
fn sample_and_eval_report_json() {
    let fx = Fixture::new();
    let corpus = fx.dataset("corpus");
    let (run_dir, _) = fx.train(&corpus, "run", &[]);
    let ck = run_dir.join("final.ckpt");
    fs::write(fx.path("song.lrc"), "[00:00.20]hello night\n[00:00.90]go\n").unwrap();
    let style = corpus.join("songs/song_00000.latent");

    let gen = fx.path("gen/out");
    let lrc = fx.path("song.lrc");
    let args = [
        "sample",
        "--checkpoint",
        s(&ck),
        "--lrc",
        s(&lrc),
        "--style",
        s(&style),
        "--steps",
        "1",
        "--length-seconds",
        "1.2",
        "--out",
        s(&gen),
    ];
    let report = json_ok(&run(&args));
    assert_eq!(report["frames"], 25);
    assert_eq!(report["sample"]["n_steps"], 1);
    assert!(gen.with_extension("f32").exists());
    let first = fs::read(gen.with_extension("f32")).unwrap();
    json_ok(&run(&args));
    assert_eq!(fs::read(gen.with_extension("f32")).unwrap(), first);

    let report = json_ok(&run(&[
        "eval",
        "--checkpoint",
        s(&ck),
        "--corpus",
        s(&corpus),
        "--no-ema",
    ]));
    let aligned = &report["aligned"];
    assert!(aligned["mean_per"].as_f64().unwrap() >= 0.0);
    assert_eq!(aligned["ground_truth_mean_per"], 0.0);
}

#[test]
fn exit_codes_classify_failures() {
    let fx = Fixture::new();
    fs::write(fx.path("bad.json"), r#"{"train": {"learning_rate": 1.0}}"#).unwrap();
    let out = run(&[
        "dataset",
        "--config",
        s(&fx.path("bad.json")),
        "--out",
        s(&fx.path("x")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());

    let out = run(&[
        "train",
        "--corpus",
        s(&fx.path("missing")),
        "--out",
        s(&fx.path("y")),
    ]);
    assert_eq!(out.status.code(), Some(3));

    let corpus = fx.dataset("corpus");
    let (run_dir, _) = fx.train(&corpus, "run", &[]);
    let ck = run_dir.join("final.ckpt");
    let mut bytes = fs::read(&ck).unwrap();
    let n = bytes.len();
    bytes[n - 5] ^= 0xFF;
    let broken = fx.path("broken.ckpt");
    fs::write(&broken, bytes).unwrap();
    let out = run(&["eval", "--checkpoint", s(&broken), "--corpus", s(&corpus)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));

    let mut poisoned = load_checkpoint::<f32>(&ck).unwrap();
    for (_, t) in poisoned
        .params
        .iter_mut()
        .chain(poisoned.ema.shadow.iter_mut())
    {
        t.data_mut()[0] = f32::NAN;
    }
    let nan_ck = fx.path("nan.ckpt");
    save_checkpoint(&poisoned, &nan_ck).unwrap();
    fs::write(fx.path("song.lrc"), "[00:00.20]hello night\n").unwrap();
    let out = run(&[
        "sample",
        "--checkpoint",
        s(&nan_ck),
        "--lrc",
        s(&fx.path("song.lrc")),
        "--style",
        s(&corpus.join("songs/song_00001.latent")),
        "--out",
        s(&fx.path("nan")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let (_, _) = fx.train(&corpus, "resumable", &["--steps", "3"]);
    let out = run(&[
        "train",
        "--config",
        s(&fx.config()),
        "--corpus",
        s(&corpus),
        "--out",
        s(&fx.path("resumable")),
        "--resume",
        s(&nan_ck),
        "--steps",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("last good checkpoint") && stderr.contains("step_0000003.ckpt"),
        "{stderr}"
    );
}
