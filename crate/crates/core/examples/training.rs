//! Trains a small model on a small corpus for a few hundred steps, saves a
//! checkpoint, resumes from it and confirms the loss trace continues
//! identically.

use rhythmlab::lyrics::PhonemeVocab;
use rhythmlab::model::NetConfig;
use rhythmlab::synth::{Corpus, CorpusConfig, SynthSpec};
use rhythmlab::train::{
    load_checkpoint, prepare_items, save_checkpoint, GridMode, Stage, TrainConfig, Trainer,
};
use rhythmlab::Result;

fn main() -> Result<()> {
    let corpus = Corpus::generate(
        SynthSpec::default(),
        PhonemeVocab::default(),
        CorpusConfig {
            n_songs: 16,
            min_seconds: 10.0,
            max_seconds: 20.0,
            ..CorpusConfig::default()
        },
    )?;
    let items = prepare_items(
        corpus.train_songs(),
        &corpus.world.vocab,
        GridMode::Sentence,
    )?;
    let net = NetConfig {
        model_width: 32,
        n_layers: 1,
        max_frames: 64,
        ..NetConfig::default()
    };
    let config = TrainConfig {
        batch_size: 4,
        stages: vec![
            Stage {
                l_max: 32,
                steps: 200,
            },
            Stage {
                l_max: 64,
                steps: 100,
            },
        ],
        ema_every: 10,
        ..TrainConfig::default()
    };

    let mut trainer = Trainer::<f32>::new(net, config)?;
    let first = trainer.run(&items, 150, |_, r| {
        if r.step % 50 == 0 {
            println!(
                "step {:4}  loss {:.4}  lr {:.2e}  l_max {}",
                r.step, r.loss, r.lr, r.l_max
            );
        }
        Ok(())
    })?;

    let dir = tempfile_dir()?;
    let path = dir.join("mid.ckpt");
    save_checkpoint(&trainer.checkpoint(serde_json::Value::Null), &path)?;
    println!(
        "checkpoint: {} bytes",
        std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0)
    );

    let rest = trainer.run(&items, 300, |_, _| Ok(()))?;
    let mut resumed = Trainer::from_checkpoint(load_checkpoint::<f32>(&path)?)?;
    let again = resumed.run(&items, 300, |_, _| Ok(()))?;
    let same = rest.iter().zip(&again).all(|(a, b)| a.loss == b.loss);
    println!(
        "loss {:.4} -> {:.4}; resumed trace identical: {same}",
        first[0].loss,
        rest.last().map_or(f64::NAN, |r| r.loss)
    );
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}

fn tempfile_dir() -> Result<std::path::PathBuf> {
    let dir = std::env::temp_dir().join(format!("rhythmlab-training-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| rhythmlab::Error::io(&dir, e))?;
    Ok(dir)
}
