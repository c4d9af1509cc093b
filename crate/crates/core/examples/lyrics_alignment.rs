//! LRC text to a frame-aligned phoneme grid, in strict and lenient modes,
//! next to the alignment-free layout.

use rhythmlab::lyrics::{
    build_phoneme_grid, build_unaligned_grid, parse_lrc, AlignMode, PhonemeGrid, PhonemeVocab,
};
use rhythmlab::Result;

const FRAME_RATE: f64 = 21.5;

const LRC: &str = "\
[ti:demo]
[00:00.50]hello night
[00:02.00]we sing
[00:04.25]slow and low
";

fn show(label: &str, grid: &PhonemeGrid, vocab: &PhonemeVocab) {
    let row: Vec<&str> = grid
        .tokens
        .iter()
        .map(|&t| {
            if t == 0 {
                "."
            } else {
                vocab.symbol(t).unwrap_or("?")
            }
        })
        .collect();
    println!("{label:10} {}", row.join(" "));
}

fn main() -> Result<()> {
    let vocab = PhonemeVocab::default();
    let sheet = parse_lrc(LRC, AlignMode::Strict)?;
    for s in &sheet.sentences {
        let g2p = vocab.g2p(&s.text)?;
        println!(
            "{:5.2}s  frame {:3}  {:12} -> {:?}",
            s.t_start,
            (s.t_start * FRAME_RATE).floor(),
            s.text,
            vocab.render(&g2p.phonemes)
        );
    }

    let aligned = build_phoneme_grid(&sheet, &vocab, 110, FRAME_RATE, AlignMode::Strict)?;
    show("aligned", &aligned, &vocab);
    for span in &aligned.spans {
        println!(
            "  sentence {} at frames {}..{}",
            span.sentence,
            span.start,
            span.start + span.len
        );
    }
    show(
        "unaligned",
        &build_unaligned_grid(&sheet, &vocab, 110, FRAME_RATE)?,
        &vocab,
    );

    // A grid too short for the last line: strict rejects, lenient drops it.
    match build_phoneme_grid(&sheet, &vocab, 60, FRAME_RATE, AlignMode::Strict) {
        Err(e) => println!("strict, 60 frames: {e}"),
        Ok(_) => unreachable!("the last sentence starts at frame 91"),
    }
    let lenient = build_phoneme_grid(&sheet, &vocab, 60, FRAME_RATE, AlignMode::Lenient)?;
    show("lenient", &lenient, &vocab);
    Ok(())
}
