//! End-to-end experiment plumbing shared by the CLI, examples and tests:
//! one JSON config, training with metrics and checkpoints, and held-out
//! evaluation with the oracle decoder.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::LatentSequence;
use crate::lyrics::{build_unaligned_grid, PhonemeGrid, PhonemeVocab};
use crate::model::{ConditionBundle, NetConfig, VelocityNet};
use crate::random::SeededRng;
use crate::sample::{euler_sample, SampleConfig};
use crate::synth::{
    extract_style_prompt, phoneme_error_rate, Corpus, CorpusConfig, SongRecord, SynthSpec,
};
use crate::tensor::Scalar;
use crate::train::{
    load_checkpoint, prepare_items, save_checkpoint, thread_limit, Checkpoint, GridMode,
    StepRecord, TrainConfig, Trainer,
};

/// Held-out evaluation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Frames generated per song, taken from the start of each song.
    pub frames: usize,
    /// Seeds the choice of style-prompt segment per song.
    pub prompt_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            frames: 256,
            prompt_seed: 1_234,
        }
    }
}

/// Default locations, overridable on the command line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Every knob of an experiment in one JSON document.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub synth: SynthSpec,
    pub corpus: CorpusConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
    pub sample: SampleConfig,
    pub eval: EvalConfig,
    pub paths: Paths,
}

impl ExperimentConfig {
    /// Parses a config file; unknown keys and bad values are config errors.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.corpus.validate()?;
        self.net.validate()?;
        self.train.validate()?;
        self.sample.validate()?;
        if self.net.latent_channels != self.synth.latent_channels {
            return Err(Error::Config(format!(
                "net.latent_channels {} differs from synth.latent_channels {}",
                self.net.latent_channels, self.synth.latent_channels
            )));
        }
        if self.eval.frames == 0 || self.eval.frames > self.net.max_frames {
            return Err(Error::Config(format!(
                "eval.frames {} outside 1..={}",
                self.eval.frames, self.net.max_frames
            )));
        }
        if self.train.max_l() > self.net.max_frames {
            return Err(Error::Config(format!(
                "training windows of {} frames exceed net.max_frames {}",
                self.train.max_l(),
                self.net.max_frames
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is serializable")
    }

    /// Generates the corpus this config describes.
    pub fn build_corpus(&self) -> Result<Corpus> {
        let vocab = PhonemeVocab::default();
        if vocab.size() != self.net.vocab_size {
            return Err(Error::Config(format!(
                "phoneme table has {} symbols but net.vocab_size is {}",
                vocab.size(),
                self.net.vocab_size
            )));
        }
        Corpus::generate(self.synth.clone(), vocab, self.corpus.clone())
    }
}

/// Provenance stored in every checkpoint's `extra` field.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckpointExtra {
    pub experiment: ExperimentConfig,
    pub vocab: PhonemeVocab,
    pub frame_rate: f64,
}

impl CheckpointExtra {
    pub fn from_checkpoint<T>(ck: &Checkpoint<T>) -> Result<Self> {
        serde_json::from_value(ck.extra.clone())
            .map_err(|e| Error::Checkpoint(format!("checkpoint lacks experiment provenance: {e}")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainOutcome {
    pub records: Vec<StepRecord>,
    pub final_checkpoint: PathBuf,
    pub steps: usize,
}

fn checkpoint_dir(out: &Path) -> PathBuf {
    out.join("checkpoints")
}

/// Path of the periodic checkpoint with the highest step under `out`.
pub fn latest_checkpoint(out: &Path) -> Option<PathBuf> {
    let entries = fs::read_dir(checkpoint_dir(out)).ok()?;
    entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
        .max()
}

/// Trains on the corpus's training split, writing `metrics.jsonl`,
/// `loss.csv`, periodic checkpoints and `final.ckpt` under `out`.
///
/// With `resume`, training continues from that state and metrics are
/// appended. `until` overrides the configured total step count.
pub fn train_experiment<T: Scalar>(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    out: &Path,
    resume: Option<Checkpoint<T>>,
    until: Option<usize>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let items = prepare_items(
        corpus.train_songs(),
        &corpus.world.vocab,
        cfg.train.grid_mode,
    )?;
    let mut trainer = match resume {
        Some(ck) => {
            ck.check_net_config(&cfg.net)?;
            Trainer::from_checkpoint(ck)?
        }
        None => Trainer::new(cfg.net.clone(), cfg.train.clone())?,
    };
    let until = until.unwrap_or_else(|| cfg.train.n_steps());
    let ck_dir = checkpoint_dir(out);
    fs::create_dir_all(&ck_dir).map_err(|e| Error::io(&ck_dir, e))?;
    let metrics_path = out.join("metrics.jsonl");
    let mut metrics = OpenOptions::new()
        .create(true)
        .append(trainer.step > 0)
        .write(true)
        .truncate(trainer.step == 0)
        .open(&metrics_path)
        .map_err(|e| Error::io(&metrics_path, e))?;
    let extra = serde_json::to_value(CheckpointExtra {
        experiment: cfg.clone(),
        vocab: corpus.world.vocab.clone(),
        frame_rate: corpus.world.spec.frame_rate,
    })
    .map_err(|e| Error::json(out, e))?;

    let every = cfg.train.checkpoint_every;
    let records = trainer.run(&items, until, |t, rec| {
        let line = serde_json::to_string(rec).map_err(|e| Error::json(&metrics_path, e))?;
        writeln!(metrics, "{line}").map_err(|e| Error::io(&metrics_path, e))?;
        if rec.step % 500 == 0 {
            log::info!(
                "step {} loss {:.5} lr {:.2e} l_max {}",
                rec.step,
                rec.loss,
                rec.lr,
                rec.l_max
            );
        }
        if every > 0 && rec.step % every == 0 {
            let path = ck_dir.join(format!("step_{:07}.ckpt", rec.step));
            save_checkpoint(&t.checkpoint(extra.clone()), &path)?;
        }
        Ok(())
    })?;

    let final_path = out.join("final.ckpt");
    save_checkpoint(&trainer.checkpoint(extra), &final_path)?;
    write_loss_csv(&out.join("loss.csv"), &metrics_path)?;
    Ok(TrainOutcome {
        records,
        final_checkpoint: final_path,
        steps: trainer.step,
    })
}

fn write_loss_csv(csv: &Path, metrics: &Path) -> Result<()> {
    let text = fs::read_to_string(metrics).map_err(|e| Error::io(metrics, e))?;
    let mut out = String::from("step,loss,lr,l_max\n");
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let r: StepRecord = serde_json::from_str(line).map_err(|e| Error::json(metrics, e))?;
        out.push_str(&format!("{},{},{},{}\n", r.step, r.loss, r.lr, r.l_max));
    }
    fs::write(csv, out).map_err(|e| Error::io(csv, e))
}

/// Loads a checkpoint for inference, choosing EMA or raw weights.
pub fn load_inference_net(
    path: &Path,
    use_ema: bool,
) -> Result<(VelocityNet<f64>, CheckpointExtra)> {
    let ck = load_checkpoint::<f64>(path)?;
    let extra = CheckpointExtra::from_checkpoint(&ck)?;
    let params = if use_ema { ck.ema.shadow } else { ck.params };
    Ok((VelocityNet::from_params(ck.net_config, params)?, extra))
}

/// Per-song evaluation outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SongEval {
    pub id: String,
    pub style_id: usize,
    pub frames: usize,
    pub per: f64,
    /// PER of the song's own latent window; 0 unless the oracle is unsound.
    pub ground_truth_per: f64,
    pub gen_seconds: f64,
    pub rtf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub grid_mode: GridMode,
    pub n_songs: usize,
    pub mean_per: f64,
    pub median_per: f64,
    pub per_style: BTreeMap<usize, f64>,
    pub ground_truth_mean_per: f64,
    pub mean_rtf: f64,
    pub songs: Vec<SongEval>,
    /// Songs whose evaluated window contains no sung phoneme.
    pub skipped: Vec<String>,
}

/// Conditioning grid for the first `frames` frames of a song under `mode`.
pub fn eval_grid(
    song: &SongRecord,
    vocab: &PhonemeVocab,
    mode: GridMode,
    frames: usize,
) -> Result<PhonemeGrid> {
    Ok(match mode {
        GridMode::Sentence => song.grid.window(0, frames),
        GridMode::Unaligned => {
            build_unaligned_grid(&song.sheet, vocab, song.grid.len(), song.grid.frame_rate)?
                .window(0, frames)
        }
    })
}

fn eval_song<T: Scalar>(
    net: &VelocityNet<T>,
    corpus: &Corpus,
    song: &SongRecord,
    mode: GridMode,
    eval: &EvalConfig,
    sample: &SampleConfig,
) -> Result<SongEval> {
    let world = &corpus.world;
    let frames = eval.frames.min(song.latent.frames());
    let reference = song.grid.window(0, frames);
    let grid = eval_grid(song, &world.vocab, mode, frames)?;
    let mut rng = SeededRng::derived(eval.prompt_seed, song.index as u64);
    let plen = 22.min(song.latent.frames());
    let (prompt, _) = extract_style_prompt(&song.latent, plen, &mut rng)?;
    let cond = ConditionBundle::new(grid, prompt, 0.0);
    let cfg = SampleConfig {
        seed: sample.seed.wrapping_add(song.index as u64),
        ..sample.clone()
    };
    let started = Instant::now();
    let z = euler_sample(net, &cond, net.config.latent_channels, &cfg)?;
    let gen_seconds = started.elapsed().as_secs_f64();
    let per = phoneme_error_rate(&reference.tokens, &world.oracle_decode(&z)?)?;
    let truth = song.latent.window(0, frames)?;
    let ground_truth_per = phoneme_error_rate(&reference.tokens, &world.oracle_decode(&truth)?)?;
    let audio_seconds = frames as f64 / world.spec.frame_rate;
    Ok(SongEval {
        id: song.id.clone(),
        style_id: song.style_id,
        frames,
        per,
        ground_truth_per,
        gen_seconds,
        rtf: gen_seconds / audio_seconds,
    })
}

/// Generates every song in `songs` from its lyrics and a style prompt cut
/// from its own latent, then scores the result with the oracle decoder.
pub fn evaluate<T: Scalar>(
    net: &VelocityNet<T>,
    corpus: &Corpus,
    songs: &[SongRecord],
    mode: GridMode,
    eval: &EvalConfig,
    sample: &SampleConfig,
) -> Result<EvalReport> {
    sample.validate()?;
    if songs.is_empty() {
        return Err(Error::UndefinedMetric("no songs to evaluate".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let (scored, skipped): (Vec<&SongRecord>, Vec<&SongRecord>) = songs.iter().partition(|s| {
        s.grid
            .window(0, eval.frames.min(s.grid.len()))
            .non_pad_count()
            > 0
    });
    if scored.is_empty() {
        return Err(Error::UndefinedMetric(
            "no evaluated window contains lyrics".into(),
        ));
    }
    let results: Vec<SongEval> = pool.install(|| {
        scored
            .par_iter()
            .map(|s| eval_song(net, corpus, s, mode, eval, sample))
            .collect::<Result<Vec<_>>>()
    })?;

    let n = results.len() as f64;
    let mut pers: Vec<f64> = results.iter().map(|r| r.per).collect();
    pers.sort_by(f64::total_cmp);
    let median = if pers.len() % 2 == 1 {
        pers[pers.len() / 2]
    } else {
        0.5 * (pers[pers.len() / 2 - 1] + pers[pers.len() / 2])
    };
    let mut by_style: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in &results {
        by_style.entry(r.style_id).or_default().push(r.per);
    }
    Ok(EvalReport {
        grid_mode: mode,
        n_songs: results.len(),
        mean_per: results.iter().map(|r| r.per).sum::<f64>() / n,
        median_per: median,
        per_style: by_style
            .into_iter()
            .map(|(k, v)| (k, v.iter().sum::<f64>() / v.len() as f64))
            .collect(),
        ground_truth_mean_per: results.iter().map(|r| r.ground_truth_per).sum::<f64>() / n,
        mean_rtf: results.iter().map(|r| r.rtf).sum::<f64>() / n,
        songs: results,
        skipped: skipped.iter().map(|s| s.id.clone()).collect(),
    })
}

/// Writes a per-song CSV next to a report.
pub fn write_eval_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::from("id,style_id,frames,per,ground_truth_per,gen_seconds,rtf\n");
    for s in &report.songs {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.id, s.style_id, s.frames, s.per, s.ground_truth_per, s.gen_seconds, s.rtf
        ));
    }
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes a generated latent (and the grid it used) next to `base`.
pub fn write_generation(
    base: &Path,
    z: &LatentSequence,
    grid: &PhonemeGrid,
    frame_rate: f64,
) -> Result<()> {
    if let Some(dir) = base.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    z.write(base, frame_rate)?;
    let grid_path = base.with_extension("grid.json");
    let text = serde_json::to_string_pretty(grid).map_err(|e| Error::json(&grid_path, e))?;
    fs::write(&grid_path, text).map_err(|e| Error::io(&grid_path, e))
}
