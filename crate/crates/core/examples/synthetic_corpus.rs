//! Generates a small synthetic corpus, decodes one song back to phonemes
//! with the oracle, and optionally writes the corpus to disk.
//!
//! ```text
//! cargo run --release --example synthetic_corpus -- [OUT_DIR]
//! ```

use rhythmlab::latent::LatentSequence;
use rhythmlab::lyrics::PhonemeVocab;
use rhythmlab::synth::{phoneme_error_rate, save_corpus, Corpus, CorpusConfig, SynthSpec};
use rhythmlab::Result;

fn main() -> Result<()> {
    let config = CorpusConfig {
        n_songs: 12,
        ..CorpusConfig::default()
    };
    let corpus = Corpus::generate(SynthSpec::default(), PhonemeVocab::default(), config)?;
    let world = &corpus.world;
    println!(
        "{} songs, {} frames, {} train / {} held out",
        corpus.songs.len(),
        corpus.total_frames(),
        corpus.train_songs().len(),
        corpus.held_out_songs().len()
    );

    let song = &corpus.songs[0];
    println!(
        "{} style {} ({:.1} s)",
        song.id,
        song.style_id,
        song.duration_seconds(world.spec.frame_rate)
    );
    println!(
        "{}",
        song.sheet
            .to_lrc()
            .lines()
            .take(4)
            .collect::<Vec<_>>()
            .join("\n")
    );

    let decoded = world.oracle_decode(&song.latent)?;
    let per = phoneme_error_rate(&song.grid.tokens, &decoded)?;
    println!("oracle PER on the clean song      {per:.4}");

    let mut noisy = song.latent.clone();
    let mut rng = rhythmlab::random::SeededRng::new(1);
    for x in noisy.data_mut() {
        *x += 0.3 * rng.standard_normal();
    }
    let per = phoneme_error_rate(&song.grid.tokens, &world.oracle_decode(&noisy)?)?;
    println!("oracle PER with sigma 0.3 noise   {per:.4}");
    let per = phoneme_error_rate(
        &song.grid.tokens,
        &world.oracle_decode(&LatentSequence::zeros(song.latent.frames(), 16))?,
    )?;
    println!("oracle PER on silence             {per:.4}");

    if let Some(dir) = std::env::args().nth(1) {
        let manifest = save_corpus(&corpus, std::path::Path::new(&dir))?;
        println!("wrote {} songs to {dir}", manifest.songs.len());
    }
    Ok(())
}
