use serde::{Deserialize, Serialize};

use super::g2p::{PhonemeVocab, PAD};
use super::lrc::LyricSheet;
use super::AlignMode;
use crate::error::{Error, Result};

/// Contiguous run of tokens owned by one sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub len: usize,
    pub sentence: usize,
}

/// Latent-length token sequence: phonemes where sentences were placed, `<pad>` elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhonemeGrid {
    pub tokens: Vec<usize>,
    pub frame_rate: f64,
    pub spans: Vec<Span>,
}

/// Frame index of a timestamp: `floor(t * frame_rate)`.
pub fn start_frame(t_start: f64, frame_rate: f64) -> usize {
    (t_start * frame_rate).floor() as usize
}

impl PhonemeGrid {
    pub fn empty(len: usize, frame_rate: f64) -> Self {
        Self {
            tokens: vec![PAD; len],
            frame_rate,
            spans: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn non_pad_count(&self) -> usize {
        self.tokens.iter().filter(|&&t| t != PAD).count()
    }

    /// Grid whose spans are recomputed from a per-frame owner table.
    fn from_owners(tokens: Vec<usize>, owners: &[Option<usize>], frame_rate: f64) -> Self {
        let mut spans: Vec<Span> = Vec::new();
        for (j, owner) in owners.iter().enumerate() {
            let Some(s) = *owner else { continue };
            match spans.last_mut() {
                Some(last) if last.sentence == s && last.start + last.len == j => last.len += 1,
                _ => spans.push(Span {
                    start: j,
                    len: 1,
                    sentence: s,
                }),
            }
        }
        Self {
            tokens,
            frame_rate,
            spans,
        }
    }

    fn owners(&self) -> Vec<Option<usize>> {
        let mut owners = vec![None; self.tokens.len()];
        for span in &self.spans {
            for o in &mut owners[span.start..span.start + span.len] {
                *o = Some(span.sentence);
            }
        }
        owners
    }

    /// Frames `start..start + len`, right-padded with `<pad>` past the end.
    pub fn window(&self, start: usize, len: usize) -> Self {
        let owners = self.owners();
        let mut tokens = Vec::with_capacity(len);
        let mut win_owners = Vec::with_capacity(len);
        for j in start..start + len {
            tokens.push(self.tokens.get(j).copied().unwrap_or(PAD));
            win_owners.push(owners.get(j).copied().flatten());
        }
        Self::from_owners(tokens, &win_owners, self.frame_rate)
    }

    /// Checks the span bookkeeping: every non-pad token lies in exactly one span.
    pub fn validate(&self) -> Result<()> {
        let mut covered = vec![0usize; self.tokens.len()];
        for span in &self.spans {
            if span.len == 0 || span.start + span.len > self.tokens.len() {
                return Err(Error::Contract(format!("span {span:?} out of range")));
            }
            for c in &mut covered[span.start..span.start + span.len] {
                *c += 1;
            }
        }
        for (j, (&tok, &c)) in self.tokens.iter().zip(&covered).enumerate() {
            if c > 1 || (tok != PAD && c != 1) {
                return Err(Error::Contract(format!(
                    "frame {j}: token {tok} covered by {c} spans"
                )));
            }
        }
        Ok(())
    }
}

fn sentence_phonemes(
    sheet: &LyricSheet,
    vocab: &PhonemeVocab,
    mode: AlignMode,
) -> Result<Vec<Option<Vec<usize>>>> {
    sheet
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| match vocab.g2p(&s.text) {
            Ok(out) => Ok(Some(out.phonemes)),
            Err(Error::EmptyPhonemes { text, .. }) => match mode {
                AlignMode::Strict => Err(Error::EmptyPhonemes { sentence: i, text }),
                AlignMode::Lenient => {
                    log::warn!("sentence {i} has no phonemes; skipped");
                    Ok(None)
                }
            },
            Err(e) => Err(e),
        })
        .collect()
}

/// Sentence-level alignment: each sentence's phonemes overwrite the grid
/// starting at `floor(t_start * frame_rate)`.
///
/// Strict mode rejects sentences that start past the grid, run off its end,
/// or overlap an earlier sentence. Lenient mode skips, truncates, and lets
/// the later sentence overwrite, respectively.
pub fn build_phoneme_grid(
    sheet: &LyricSheet,
    vocab: &PhonemeVocab,
    l_max: usize,
    frame_rate: f64,
    mode: AlignMode,
) -> Result<PhonemeGrid> {
    if l_max == 0 || !(frame_rate > 0.0) {
        return Err(Error::Parameter(format!(
            "grid needs l_max > 0 and frame_rate > 0, got {l_max} and {frame_rate}"
        )));
    }
    let phonemes = sentence_phonemes(sheet, vocab, mode)?;
    let mut tokens = vec![PAD; l_max];
    let mut owners: Vec<Option<usize>> = vec![None; l_max];
    let mut prev_end = 0usize;

    for (i, (sentence, phs)) in sheet.sentences.iter().zip(phonemes).enumerate() {
        let Some(phs) = phs else { continue };
        let start = start_frame(sentence.t_start, frame_rate);
        if start >= l_max {
            match mode {
                AlignMode::Strict => {
                    return Err(Error::Alignment(format!(
                        "sentence {i} starts at frame {start}, past the {l_max}-frame grid"
                    )))
                }
                AlignMode::Lenient => {
                    log::warn!("sentence {i} starts past the grid; skipped");
                    continue;
                }
            }
        }
        let mut len = phs.len();
        if start + len > l_max {
            match mode {
                AlignMode::Strict => {
                    return Err(Error::Alignment(format!(
                        "sentence {i} spans frames {start}..{} beyond the {l_max}-frame grid",
                        start + len
                    )))
                }
                AlignMode::Lenient => {
                    log::warn!("sentence {i} truncated at the grid end");
                    len = l_max - start;
                }
            }
        }
        if mode == AlignMode::Strict && i > 0 && start < prev_end {
            return Err(Error::Alignment(format!(
                "sentence {i} at frame {start} overlaps the previous sentence ending at {prev_end}"
            )));
        }
        tokens[start..start + len].copy_from_slice(&phs[..len]);
        for o in &mut owners[start..start + len] {
            *o = Some(i);
        }
        prev_end = prev_end.max(start + len);
    }
    Ok(PhonemeGrid::from_owners(tokens, &owners, frame_rate))
}

/// Alignment-free variant: all sentence phonemes concatenated from frame 0,
/// ignoring timestamps. Truncated at `l_max`.
pub fn build_unaligned_grid(
    sheet: &LyricSheet,
    vocab: &PhonemeVocab,
    l_max: usize,
    frame_rate: f64,
) -> Result<PhonemeGrid> {
    if l_max == 0 || !(frame_rate > 0.0) {
        return Err(Error::Parameter(format!(
            "grid needs l_max > 0 and frame_rate > 0, got {l_max} and {frame_rate}"
        )));
    }
    let phonemes = sentence_phonemes(sheet, vocab, AlignMode::Lenient)?;
    let mut tokens = vec![PAD; l_max];
    let mut owners = vec![None; l_max];
    let mut pos = 0;
    for (i, phs) in phonemes.into_iter().enumerate() {
        for p in phs.into_iter().flatten() {
            if pos == l_max {
                break;
            }
            tokens[pos] = p;
            owners[pos] = Some(i);
            pos += 1;
        }
    }
    Ok(PhonemeGrid::from_owners(tokens, &owners, frame_rate))
}
