//! Scaled-down version of the full experiment: train with sentence-aligned
//! lyrics and with the alignment-free ablation, then compare held-out
//! phoneme error rates.
//!
//! Takes one to two minutes on one core. The CLI runs the full-size version:
//!
//! ```text
//! rhythmlab dataset --out corpus
//! rhythmlab train --corpus corpus --out run
//! rhythmlab eval --checkpoint run/final.ckpt --corpus corpus --ablate-align
//! ```

use rhythmlab::experiment::{evaluate, train_experiment, ExperimentConfig};
use rhythmlab::model::VelocityNet;
use rhythmlab::train::{load_checkpoint, GridMode, Stage};
use rhythmlab::Result;

fn main() -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.corpus.n_songs = 40;
    cfg.corpus.min_seconds = 8.0;
    cfg.corpus.max_seconds = 16.0;
    cfg.net.max_frames = 64;
    cfg.train.stages = vec![Stage {
        l_max: 64,
        steps: 1500,
    }];
    cfg.train.batch_size = 4;
    cfg.train.ema_every = 10;
    cfg.train.checkpoint_every = 0;
    cfg.eval.frames = 64;
    cfg.sample.use_ema = false;

    let corpus = cfg.build_corpus()?;
    let root = std::env::temp_dir().join(format!("rhythmlab-experiment-{}", std::process::id()));
    for mode in [GridMode::Sentence, GridMode::Unaligned] {
        let mut run = cfg.clone();
        run.train.grid_mode = mode;
        let started = std::time::Instant::now();
        let out =
            train_experiment::<f32>(&run, &corpus, &root.join(format!("{mode:?}")), None, None)?;
        let ck = load_checkpoint::<f64>(&out.final_checkpoint)?;
        let net = VelocityNet::from_params(ck.net_config, ck.params)?;
        let report = evaluate(
            &net,
            &corpus,
            corpus.held_out_songs(),
            mode,
            &run.eval,
            &run.sample,
        )?;
        println!(
            "{mode:?}: final loss {:.4}, held-out PER {:.3} (median {:.3}, {} songs), trained in {:.0} s",
            out.records.last().map_or(f64::NAN, |r| r.loss),
            report.mean_per,
            report.median_per,
            report.n_songs,
            started.elapsed().as_secs_f64()
        );
    }
    std::fs::remove_dir_all(&root).ok();
    Ok(())
}
