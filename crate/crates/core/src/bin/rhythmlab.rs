use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rhythmlab::experiment::{
    evaluate, latest_checkpoint, load_inference_net, train_experiment, write_eval_csv,
    write_generation, ExperimentConfig,
};
use rhythmlab::latent::LatentSequence;
use rhythmlab::random::SeededRng;
use rhythmlab::sample::generate_song;
use rhythmlab::synth::{extract_style_prompt, load_corpus, save_corpus};
use rhythmlab::train::{load_checkpoint, GridMode, Precision};
use rhythmlab::Error;

/// Desk-scale lyrics-to-latent flow matching experiments.
///
/// Every command prints one JSON document on stdout; logs go to stderr.
/// Exit codes: 0 ok, 2 configuration, 3 I/O, 4 numeric failure.
#[derive(Parser)]
#[command(name = "rhythmlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the relevant seed (corpus, training or sampling).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Dataset {
        #[command(flatten)]
        common: Common,
    },
    /// Train a velocity network on a corpus.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many total steps.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Generate a latent from an LRC file and a style source latent.
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        lrc: PathBuf,
        /// Latent base path (`<base>.f32` + `<base>.json`) to cut the style prompt from.
        #[arg(long)]
        style: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        cfg_scale: Option<f64>,
        #[arg(long)]
        length_seconds: Option<f64>,
        /// Use raw instead of EMA weights.
        #[arg(long)]
        no_ema: bool,
    },
    /// Generate and score the held-out songs of a corpus.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Also train (or load) a model without timestamp placement and report the gap.
        #[arg(long)]
        ablate_align: bool,
        /// Pre-trained ablation checkpoint, skipping ablation training.
        #[arg(long)]
        ablation_checkpoint: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        cfg_scale: Option<f64>,
        #[arg(long)]
        no_ema: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Checkpoint(_) => 3,
        Error::Numeric { .. } => 4,
        _ => 2,
    }
}

fn load_config(common: &Common) -> rhythmlab::Result<ExperimentConfig> {
    match &common.config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn require(path: Option<PathBuf>, what: &str) -> rhythmlab::Result<PathBuf> {
    path.ok_or_else(|| Error::Config(format!("missing --{what} (or paths.{what} in the config)")))
}

fn ensure_exists(path: &Path) -> rhythmlab::Result<()> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not found"),
        ));
    }
    Ok(())
}

fn dataset(common: Common) -> rhythmlab::Result<Value> {
    let mut cfg = load_config(&common)?;
    if let Some(s) = common.seed {
        cfg.synth.seed = s;
    }
    cfg.validate()?;
    let out = require(common.out.or(cfg.paths.out.clone()), "out")?;
    let corpus = cfg.build_corpus()?;
    let manifest = save_corpus(&corpus, &out)?;
    Ok(json!({
        "command": "dataset",
        "out": out,
        "songs": manifest.songs.len(),
        "total_frames": corpus.total_frames(),
        "vocab_size": corpus.world.vocab.size(),
        "config": cfg.to_json(),
    }))
}

fn train(
    common: Common,
    corpus_dir: Option<PathBuf>,
    resume: Option<PathBuf>,
    steps: Option<usize>,
) -> rhythmlab::Result<Value> {
    let mut cfg = load_config(&common)?;
    if let Some(s) = common.seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    let corpus_dir = require(corpus_dir.or(cfg.paths.corpus.clone()), "corpus")?;
    let out = require(common.out.or(cfg.paths.out.clone()), "out")?;
    ensure_exists(&corpus_dir.join("manifest.json"))?;
    let corpus = load_corpus(&corpus_dir)?;
    let started = Instant::now();
    let result = match cfg.train.precision {
        Precision::F32 => {
            let ck = resume.as_deref().map(load_checkpoint::<f32>).transpose()?;
            train_experiment(&cfg, &corpus, &out, ck, steps)
        }
        Precision::F64 => {
            let ck = resume.as_deref().map(load_checkpoint::<f64>).transpose()?;
            train_experiment(&cfg, &corpus, &out, ck, steps)
        }
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            if matches!(e, Error::Numeric { .. }) {
                match latest_checkpoint(&out) {
                    Some(p) => eprintln!("training aborted; last good checkpoint: {}", p.display()),
                    None => eprintln!("training aborted before any checkpoint was written"),
                }
            }
            return Err(e);
        }
    };
    let first = outcome.records.first().map(|r| r.loss);
    let last = outcome.records.last().map(|r| r.loss);
    Ok(json!({
        "command": "train",
        "out": out,
        "steps": outcome.steps,
        "steps_run": outcome.records.len(),
        "initial_loss": first,
        "final_loss": last,
        "final_checkpoint": outcome.final_checkpoint,
        "wall_seconds": started.elapsed().as_secs_f64(),
        "config": cfg.to_json(),
    }))
}

#[allow(clippy::too_many_arguments)]
fn sample(
    common: Common,
    checkpoint: PathBuf,
    lrc: PathBuf,
    style: PathBuf,
    steps: Option<usize>,
    cfg_scale: Option<f64>,
    length_seconds: Option<f64>,
    no_ema: bool,
) -> rhythmlab::Result<Value> {
    let (net, extra) = load_inference_net(&checkpoint, !no_ema)?;
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => extra.experiment.clone(),
    };
    if let Some(s) = steps {
        cfg.sample.n_steps = s;
    }
    if let Some(s) = cfg_scale {
        cfg.sample.cfg_scale = s;
    }
    if let Some(s) = common.seed {
        cfg.sample.seed = s;
    }
    cfg.sample.use_ema = !no_ema;
    cfg.sample.validate()?;
    let out = require(common.out.or(cfg.paths.out.clone()), "out")?;
    let lrc_text = fs::read_to_string(&lrc).map_err(|e| Error::io(&lrc, e))?;
    let (source, _) = LatentSequence::read(&style)?;
    let plen = cfg.train.prompt_len.min(source.frames());
    let (prompt, _) = extract_style_prompt(&source, plen, &mut SeededRng::new(cfg.sample.seed))?;
    let fr = extra.frame_rate;
    let frames = match length_seconds {
        Some(s) => (s * fr).floor() as usize,
        None => net.config.max_frames,
    };
    let started = Instant::now();
    let (z, grid) = generate_song(
        &net,
        &extra.vocab,
        &lrc_text,
        &prompt,
        frames,
        fr,
        &cfg.sample,
    )?;
    let wall = started.elapsed().as_secs_f64();
    write_generation(&out, &z, &grid, fr)?;
    let seconds = frames as f64 / fr;
    Ok(json!({
        "command": "sample",
        "out": out,
        "frames": frames,
        "wall_seconds": wall,
        "frames_per_second": frames as f64 / wall,
        "rtf": wall / seconds,
        "sample": cfg.sample,
        "config": cfg.to_json(),
    }))
}

#[allow(clippy::too_many_arguments)]
fn eval(
    common: Common,
    checkpoint: PathBuf,
    corpus_dir: Option<PathBuf>,
    ablate: bool,
    ablation_checkpoint: Option<PathBuf>,
    steps: Option<usize>,
    cfg_scale: Option<f64>,
    no_ema: bool,
) -> rhythmlab::Result<Value> {
    let (net, extra) = load_inference_net(&checkpoint, !no_ema)?;
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => extra.experiment.clone(),
    };
    if let Some(s) = steps {
        cfg.sample.n_steps = s;
    }
    if let Some(s) = cfg_scale {
        cfg.sample.cfg_scale = s;
    }
    if let Some(s) = common.seed {
        cfg.sample.seed = s;
    }
    cfg.sample.use_ema = !no_ema;
    cfg.validate()?;
    let corpus_dir = require(corpus_dir.or(cfg.paths.corpus.clone()), "corpus")?;
    ensure_exists(&corpus_dir.join("manifest.json"))?;
    let corpus = load_corpus(&corpus_dir)?;
    let held = corpus.held_out_songs();
    let started = Instant::now();
    let aligned = evaluate(
        &net,
        &corpus,
        held,
        GridMode::Sentence,
        &cfg.eval,
        &cfg.sample,
    )?;

    let mut report = json!({
        "command": "eval",
        "checkpoint": checkpoint,
        "held_out_songs": held.len(),
        "aligned": aligned,
    });
    if ablate {
        let ablation_ck = match ablation_checkpoint {
            Some(p) => p,
            None => {
                let dir = common.out.clone().unwrap_or_else(|| {
                    checkpoint
                        .parent()
                        .unwrap_or(Path::new("."))
                        .join("ablation")
                });
                let mut abl_cfg = cfg.clone();
                abl_cfg.train.grid_mode = GridMode::Unaligned;
                log::info!("training the unaligned ablation model in {}", dir.display());
                match abl_cfg.train.precision {
                    Precision::F32 => train_experiment::<f32>(&abl_cfg, &corpus, &dir, None, None)?,
                    Precision::F64 => train_experiment::<f64>(&abl_cfg, &corpus, &dir, None, None)?,
                }
                .final_checkpoint
            }
        };
        let (abl_net, _) = load_inference_net(&ablation_ck, !no_ema)?;
        let ablated = evaluate(
            &abl_net,
            &corpus,
            held,
            GridMode::Unaligned,
            &cfg.eval,
            &cfg.sample,
        )?;
        let ratio = ablated.mean_per / aligned.mean_per.max(1e-12);
        report["ablation_checkpoint"] = json!(ablation_ck);
        report["ablated"] = json!(ablated);
        report["gap"] = json!({
            "ablated_over_aligned": ratio,
            "aligned_below_0_15": aligned.mean_per < 0.15,
            "ablated_above_0_5": ablated.mean_per > 0.5,
            "gap_at_least_3x": ratio >= 3.0,
        });
    }
    if let Some(dir) = &common.out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_eval_csv(&dir.join("per_song.csv"), &aligned)?;
    }
    report["wall_seconds"] = json!(started.elapsed().as_secs_f64());
    report["config"] = cfg.to_json();
    Ok(report)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dataset { common } => dataset(common),
        Command::Train {
            common,
            corpus,
            resume,
            steps,
        } => train(common, corpus, resume, steps),
        Command::Sample {
            common,
            checkpoint,
            lrc,
            style,
            steps,
            cfg_scale,
            length_seconds,
            no_ema,
        } => sample(
            common,
            checkpoint,
            lrc,
            style,
            steps,
            cfg_scale,
            length_seconds,
            no_ema,
        ),
        Command::Eval {
            common,
            checkpoint,
            corpus,
            ablate_align,
            ablation_checkpoint,
            steps,
            cfg_scale,
            no_ema,
        } => eval(
            common,
            checkpoint,
            corpus,
            ablate_align,
            ablation_checkpoint,
            steps,
            cfg_scale,
            no_ema,
        ),
    };
    match result {
        Ok(v) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&v).expect("report is serializable")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
