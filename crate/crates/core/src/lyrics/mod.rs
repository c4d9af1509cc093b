//! Timestamped lyrics to latent-aligned phoneme grids.

mod g2p;
mod grid;
mod lrc;

pub use g2p::{G2pOutput, PhonemeVocab, PAD, PAD_SYMBOL};
pub use grid::{build_phoneme_grid, build_unaligned_grid, start_frame, PhonemeGrid, Span};
pub use lrc::{parse_lrc, LyricSheet, Sentence};

use serde::{Deserialize, Serialize};

/// How defects in lyric input are handled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMode {
    /// Defects are errors.
    #[default]
    Strict,
    /// Defects are repaired with a logged warning.
    Lenient,
}
