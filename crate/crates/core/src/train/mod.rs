//! AdamW training with EMA shadow weights, condition dropout and a staged
//! sequence-length curriculum.

mod checkpoint;
mod optim;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use optim::{adamw_step, cfg_dropout, AdamW, EmaState, LrSchedule, OptimizerState};

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{sample_noise, FlowSample};
use crate::latent::LatentSequence;
use crate::lyrics::{build_unaligned_grid, AlignMode, PhonemeGrid, PhonemeVocab};
use crate::model::{ConditionBundle, NetConfig, Params, VelocityNet};
use crate::random::SeededRng;
use crate::synth::{extract_style_prompt, truncate_pair, SongRecord};
use crate::tensor::Scalar;
use crate::timestep::TimestepSchedule;

/// One curriculum stage: `steps` optimizer steps on `l_max`-frame windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub l_max: usize,
    pub steps: usize,
}

/// Storage precision of parameters and optimizer state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// How lyrics become the training phoneme grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// Each sentence placed at its start frame.
    #[default]
    Sentence,
    /// Ablation: all sentence phonemes concatenated from frame 0.
    Unaligned,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub warmup_frac: f64,
    pub final_lr_frac: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub weight_decay: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub stages: Vec<Stage>,
    pub ema_decay: f64,
    pub ema_every: usize,
    pub cond_dropout: f64,
    pub timestep: TimestepSchedule,
    /// Style prompt length in frames.
    pub prompt_len: usize,
    /// Std of the noise frames padding songs shorter than `l_max`.
    pub pad_sigma: f64,
    pub grid_mode: GridMode,
    pub precision: Precision,
    /// Check every tape value for NaN/inf (slow; off by default).
    pub check_finite: bool,
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            warmup_frac: 0.05,
            final_lr_frac: 0.1,
            beta1: 0.9,
            beta2: 0.95,
            weight_decay: 0.01,
            eps: 1e-8,
            batch_size: 8,
            stages: vec![
                Stage {
                    l_max: 64,
                    steps: 16_000,
                },
                Stage {
                    l_max: 256,
                    steps: 4_000,
                },
            ],
            ema_decay: 0.99,
            ema_every: 100,
            cond_dropout: 0.2,
            timestep: TimestepSchedule::default(),
            prompt_len: 22,
            pad_sigma: 1.0,
            grid_mode: GridMode::Sentence,
            precision: Precision::F32,
            check_finite: false,
            checkpoint_every: 2_000,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.cond_dropout) {
            return bad("cond_dropout must be in [0, 1)");
        }
        if !(self.ema_decay > 0.0 && self.ema_decay < 1.0) {
            return bad("ema_decay must be in (0, 1)");
        }
        if self.ema_every == 0 || self.batch_size == 0 || self.prompt_len == 0 {
            return bad("ema_every, batch_size and prompt_len must be >= 1");
        }
        if self.stages.is_empty() || self.stages.iter().any(|s| s.l_max == 0) {
            return bad("need at least one stage, each with l_max >= 1");
        }
        if !(self.weight_decay >= 0.0) || !(self.eps > 0.0) {
            return bad("weight_decay must be >= 0 and eps > 0");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must be in [0, 1)");
        }
        if !(self.pad_sigma >= 0.0) {
            return bad("pad_sigma must be >= 0");
        }
        self.schedule().validate()?;
        self.timestep.validate()
    }

    pub fn n_steps(&self) -> usize {
        self.stages.iter().map(|s| s.steps).sum()
    }

    pub fn max_l(&self) -> usize {
        self.stages.iter().map(|s| s.l_max).max().unwrap_or(0)
    }

    /// Window length used at 0-based `step`; past the end, the last stage's.
    pub fn l_max_at(&self, step: usize) -> usize {
        let mut end = 0;
        for s in &self.stages {
            end += s.steps;
            if step < end {
                return s.l_max;
            }
        }
        self.stages.last().map_or(0, |s| s.l_max)
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            peak: self.lr,
            warmup_frac: self.warmup_frac,
            final_frac: self.final_lr_frac,
        }
    }

    pub fn adamw(&self) -> AdamW {
        AdamW {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

/// A song as seen by the trainer: full latent plus its conditioning grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainItem {
    pub latent: LatentSequence,
    pub grid: PhonemeGrid,
}

/// Builds training items under `mode` from songs of one corpus.
pub fn prepare_items(
    songs: &[SongRecord],
    vocab: &PhonemeVocab,
    mode: GridMode,
) -> Result<Vec<TrainItem>> {
    songs
        .iter()
        .map(|s| {
            let grid = match mode {
                GridMode::Sentence => s.grid.clone(),
                GridMode::Unaligned => {
                    build_unaligned_grid(&s.sheet, vocab, s.grid.len(), s.grid.frame_rate)?
                }
            };
            Ok(TrainItem {
                latent: s.latent.clone(),
                grid,
            })
        })
        .collect()
}

/// One line of the metrics stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    pub lr: f64,
    pub t_mean: f64,
    pub l_max: usize,
    pub wall_ms: f64,
}

/// Worker count from `RHYTHMLAB_THREADS`, if set to a positive integer.
pub fn thread_limit() -> Option<usize> {
    std::env::var("RHYTHMLAB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}

struct Job {
    z_t: LatentSequence,
    cond: ConditionBundle,
    target: LatentSequence,
}

/// Training state: network, optimizer, EMA shadow and data RNG.
pub struct Trainer<T> {
    pub net: VelocityNet<T>,
    pub opt: OptimizerState<T>,
    pub ema: EmaState<T>,
    pub config: TrainConfig,
    pub step: usize,
    rng: SeededRng,
    pool: rayon::ThreadPool,
    perm: Option<(usize, Vec<usize>)>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(net_config: NetConfig, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if config.max_l() > net_config.max_frames {
            return Err(Error::Config(format!(
                "curriculum reaches {} frames but the network covers {}",
                config.max_l(),
                net_config.max_frames
            )));
        }
        let net = VelocityNet::new(net_config, config.seed)?;
        let rng = SeededRng::derived(config.seed, 0xDA7A);
        Self::assemble(net, None, None, config, 0, rng)
    }

    fn assemble(
        net: VelocityNet<T>,
        opt: Option<OptimizerState<T>>,
        ema: Option<EmaState<T>>,
        config: TrainConfig,
        step: usize,
        rng: SeededRng,
    ) -> Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = thread_limit() {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        let opt = opt.unwrap_or_else(|| OptimizerState::new(&net.params));
        let ema = ema.unwrap_or_else(|| EmaState::new(&net.params));
        Ok(Self {
            net,
            opt,
            ema,
            config,
            step,
            rng,
            pool,
            perm: None,
        })
    }

    pub fn from_checkpoint(ck: Checkpoint<T>) -> Result<Self> {
        ck.train_config.validate()?;
        let net = VelocityNet::from_params(ck.net_config, ck.params)?;
        net.params.ensure_same_layout(&ck.ema.shadow)?;
        net.params.ensure_same_layout(&ck.opt.m)?;
        net.params.ensure_same_layout(&ck.opt.v)?;
        Self::assemble(
            net,
            Some(ck.opt),
            Some(ck.ema),
            ck.train_config,
            ck.step,
            SeededRng::from_state(ck.rng),
        )
    }

    pub fn checkpoint(&self, extra: serde_json::Value) -> Checkpoint<T> {
        Checkpoint {
            net_config: self.net.config.clone(),
            train_config: self.config.clone(),
            step: self.step,
            rng: self.rng.state(),
            params: self.net.params.clone(),
            ema: self.ema.clone(),
            opt: self.opt.clone(),
            extra,
        }
    }

    /// EMA weights as a network.
    pub fn ema_net(&self) -> VelocityNet<T> {
        VelocityNet {
            config: self.net.config.clone(),
            params: self.ema.shadow.clone(),
        }
    }

    /// Song indices for the batch at `step`: consecutive slots of a seeded
    /// per-epoch permutation, so the order depends only on the step.
    fn batch_indices(&mut self, step: usize, n: usize) -> Vec<usize> {
        let b = self.config.batch_size;
        (0..b)
            .map(|k| {
                let slot = step * b + k;
                let epoch = slot / n;
                if self.perm.as_ref().map(|p| p.0) != Some(epoch) {
                    let mut order: Vec<usize> = (0..n).collect();
                    SeededRng::derived(self.config.seed, 0xE90C_0000 + epoch as u64)
                        .shuffle(&mut order);
                    self.perm = Some((epoch, order));
                }
                self.perm.as_ref().expect("permutation set above").1[slot % n]
            })
            .collect()
    }

    /// One optimizer step on the next batch drawn from `items`.
    pub fn train_step(&mut self, items: &[TrainItem]) -> Result<StepRecord> {
        if items.is_empty() {
            return Err(Error::Contract("no training songs".into()));
        }
        let started = Instant::now();
        let step = self.step;
        let l_max = self.config.l_max_at(step);
        let batch: Vec<&TrainItem> = self
            .batch_indices(step, items.len())
            .into_iter()
            .map(|i| &items[i])
            .collect();
        let jobs = self.draw_jobs(&batch, l_max)?;
        let t_mean = jobs.iter().map(|j| j.cond.t).sum::<f64>() / jobs.len() as f64;
        let (loss, grads) = self.loss_and_grads(&jobs).map_err(|e| match e {
            Error::Numeric { op, .. } => Error::Numeric {
                op,
                step: Some(step),
            },
            other => other,
        })?;
        let lr = self.config.schedule().lr_at(step, self.config.n_steps());
        adamw_step(
            &mut self.net.params,
            &grads,
            &mut self.opt,
            &self.config.adamw(),
            lr,
        )
        .map_err(|e| match e {
            Error::Numeric { op, .. } => Error::Numeric {
                op,
                step: Some(step),
            },
            other => other,
        })?;
        self.step += 1;
        if self.step.is_multiple_of(self.config.ema_every) {
            self.ema.update(&self.net.params, self.config.ema_decay)?;
        }
        Ok(StepRecord {
            step: self.step,
            loss,
            lr,
            t_mean,
            l_max,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// All random draws for a batch, made sequentially so results do not
    /// depend on the worker count.
    fn draw_jobs(&mut self, batch: &[&TrainItem], l_max: usize) -> Result<Vec<Job>> {
        let c = self.net.config.latent_channels;
        let cfg = &self.config;
        let rng = &mut self.rng;
        batch
            .iter()
            .map(|item| {
                let (z1, grid, _) = truncate_pair(
                    &item.latent,
                    &item.grid,
                    l_max,
                    rng,
                    AlignMode::Lenient,
                    cfg.pad_sigma,
                )?;
                let plen = cfg.prompt_len.min(item.latent.frames());
                let (prompt, _) = extract_style_prompt(&item.latent, plen, rng)?;
                let t = cfg.timestep.sample(rng);
                let z0 = sample_noise(rng, l_max, c);
                let sample = FlowSample::new(z0, z1, t)?;
                let cond =
                    cfg_dropout(ConditionBundle::new(grid, prompt, t), rng, cfg.cond_dropout);
                Ok(Job {
                    z_t: sample.z_t,
                    cond,
                    target: sample.target_v,
                })
            })
            .collect()
    }

    /// Batch-mean loss and gradient; per-element tapes run on the pool and
    /// are reduced in element order.
    fn loss_and_grads(&self, jobs: &[Job]) -> Result<(f64, Params<T>)> {
        let net = &self.net;
        let check = self.config.check_finite;
        let results: Vec<Result<(f64, Params<T>)>> = self.pool.install(|| {
            jobs.par_iter()
                .map(|j| net.loss_and_grads(&j.z_t, &j.cond, &j.target, check))
                .collect()
        });
        let mut total = 0.0;
        let mut acc: Option<Params<T>> = None;
        for r in results {
            let (loss, g) = r?;
            total += loss;
            match acc.as_mut() {
                None => acc = Some(g),
                Some(a) => a.add_assign(&g)?,
            }
        }
        let n = jobs.len() as f64;
        let mut grads = acc.ok_or_else(|| Error::Contract("empty batch".into()))?;
        grads.scale_in_place(T::of(1.0 / n));
        let loss = total / n;
        if !loss.is_finite() {
            return Err(Error::Numeric {
                op: "train_step".into(),
                step: None,
            });
        }
        Ok((loss, grads))
    }

    /// Runs until `until_step` total steps, calling `observe` after each.
    pub fn run<F>(
        &mut self,
        items: &[TrainItem],
        until_step: usize,
        mut observe: F,
    ) -> Result<Vec<StepRecord>>
    where
        F: FnMut(&Self, &StepRecord) -> Result<()>,
    {
        let mut records = Vec::new();
        while self.step < until_step {
            let rec = self.train_step(items)?;
            observe(self, &rec)?;
            records.push(rec);
        }
        Ok(records)
    }
}
