//! Generates a latent from LRC lyrics and a style prompt with guided Euler
//! sampling, then reads the lyrics back with the oracle decoder.
//!
//! With a checkpoint from `rhythmlab train`, this shows real generation:
//!
//! ```text
//! cargo run --release --example sampling -- run/final.ckpt
//! ```
//!
//! Without one, an untrained network is used and the decode is noise.

use std::path::Path;

use rhythmlab::experiment::load_inference_net;
use rhythmlab::lyrics::{PhonemeVocab, PAD};
use rhythmlab::model::{NetConfig, VelocityNet};
use rhythmlab::sample::{generate_song, SampleConfig};
use rhythmlab::synth::{normalize_tokens, phoneme_error_rate, SynthSpec, SynthWorld};
use rhythmlab::Result;

const LRC: &str = "\
[00:00.30]low night sing
[00:03.10]we go home
[00:06.80]slow and low
";

fn main() -> Result<()> {
    let (net, vocab, spec) = match std::env::args().nth(1) {
        Some(path) => {
            let (net, extra) = load_inference_net(Path::new(&path), true)?;
            (net, extra.vocab, extra.experiment.synth)
        }
        None => {
            println!("no checkpoint given; using an untrained network");
            (
                VelocityNet::new(NetConfig::default(), 0)?,
                PhonemeVocab::default(),
                SynthSpec::default(),
            )
        }
    };
    let world = SynthWorld::new(spec, vocab.clone())?;

    // A style prompt synthesized from silence in style 2.
    let quiet = rhythmlab::lyrics::PhonemeGrid::empty(22, world.spec.frame_rate);
    let prompt = world.synth_latent(&quiet, 2, 1, 0)?;

    for (steps, scale) in [(8, 1.0), (32, 1.0), (32, 4.0)] {
        let config = SampleConfig {
            n_steps: steps,
            cfg_scale: scale,
            ..SampleConfig::default()
        };
        let started = std::time::Instant::now();
        let (z, grid) = generate_song(
            &net,
            &vocab,
            LRC,
            &prompt,
            200,
            world.spec.frame_rate,
            &config,
        )?;
        let secs = started.elapsed().as_secs_f64();
        let decoded = world.oracle_decode(&z)?;
        let per = phoneme_error_rate(&grid.tokens, &decoded)?;
        let heard: Vec<&str> = normalize_tokens(&decoded)
            .into_iter()
            .filter(|&t| t != PAD)
            .filter_map(|t| vocab.symbol(t))
            .collect();
        println!(
            "{steps:2} steps, cfg {scale}: PER {per:.3}, {secs:.2} s, RTF {:.3}",
            secs / (200.0 / world.spec.frame_rate)
        );
        println!("  heard: {}", heard.join(" "));
    }
    Ok(())
}
