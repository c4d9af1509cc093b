//! Procedural latent songs and a brute-force oracle decoder.
//!
//! Each latent frame is a sum of a phoneme pattern (or nothing on `<pad>`
//! frames), a per-style offset, a per-style sinusoidal accompaniment and
//! Gaussian noise. Because every pattern is known, intelligibility of any
//! latent can be measured by nearest-pattern decoding instead of ASR.

mod corpus;
mod per;

pub use corpus::{
    extract_style_prompt, generate_song, load_corpus, save_corpus, truncate_latent, truncate_pair,
    Corpus, CorpusConfig, CorpusManifest, SongEntry, SongRecord, CORPUS_VERSION,
};
pub use per::{edit_distance, normalize_tokens, phoneme_error_rate};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{LatentSequence, DEFAULT_FRAME_RATE};
use crate::lyrics::{PhonemeGrid, PhonemeVocab, PAD};
use crate::random::SeededRng;

const MAX_COS: f64 = 0.8;
const MAX_TRIES: usize = 10_000;

/// Parameters of the synthetic latent space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_styles: usize,
    pub frame_rate: f64,
    pub latent_channels: usize,
    pub vocal_gain: f64,
    pub style_gain: f64,
    pub instr_gain: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_styles: 4,
            frame_rate: DEFAULT_FRAME_RATE,
            latent_channels: 16,
            vocal_gain: 1.0,
            style_gain: 0.5,
            instr_gain: 0.2,
            noise_sigma: 0.02,
            seed: 20_250_301,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let gains = [
            self.vocal_gain,
            self.style_gain,
            self.instr_gain,
            self.noise_sigma,
        ];
        if gains.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(Error::Config(
                "synth gains and noise_sigma must be >= 0".into(),
            ));
        }
        if self.n_styles == 0 || self.latent_channels == 0 {
            return Err(Error::Config(
                "n_styles and latent_channels must be >= 1".into(),
            ));
        }
        if !(self.frame_rate > 0.0) {
            return Err(Error::Config("frame_rate must be > 0".into()));
        }
        Ok(())
    }
}

/// Fixed patterns of the synthetic latent space.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebooks {
    /// Indexed by token id; `<pad>` is the zero vector.
    pub phonemes: Vec<Vec<f64>>,
    pub styles: Vec<Vec<f64>>,
    /// Accompaniment direction per style (unit norm).
    pub instr_dirs: Vec<Vec<f64>>,
    /// Accompaniment frequency per style, in Hz.
    pub instr_freqs: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit_vector(rng: &mut SeededRng, dim: usize) -> Vec<f64> {
    loop {
        let v = rng.normal_vec(dim);
        let n = dot(&v, &v).sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Draws unit-norm phoneme and style patterns with pairwise `|cos| < 0.8`
/// across the joint set, by rejection.
pub fn make_codebooks(spec: &SynthSpec, vocab_size: usize) -> Result<Codebooks> {
    spec.validate()?;
    let c = spec.latent_channels;
    let mut rng = SeededRng::derived(spec.seed, 0x000C_0DEB_00C5);
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    let wanted = (vocab_size - 1) + spec.n_styles;
    for i in 0..wanted {
        let mut found = None;
        for _ in 0..MAX_TRIES {
            let v = unit_vector(&mut rng, c);
            if accepted.iter().all(|a| dot(a, &v).abs() < MAX_COS) {
                found = Some(v);
                break;
            }
        }
        let v = found.ok_or_else(|| {
            Error::Config(format!(
                "could not place pattern {i} of {wanted} with |cos| < {MAX_COS} in {c} channels"
            ))
        })?;
        accepted.push(v);
    }
    let styles = accepted.split_off(vocab_size - 1);
    let mut phonemes = vec![vec![0.0; c]];
    phonemes.extend(accepted);

    let instr_dirs = (0..spec.n_styles)
        .map(|_| unit_vector(&mut rng, c))
        .collect();
    let instr_freqs = (0..spec.n_styles)
        .map(|_| 0.25 + 1.75 * rng.uniform())
        .collect();
    Ok(Codebooks {
        phonemes,
        styles,
        instr_dirs,
        instr_freqs,
    })
}

/// Latent space shared by corpus generation and oracle decoding.
#[derive(Clone, Debug)]
pub struct SynthWorld {
    pub spec: SynthSpec,
    pub vocab: PhonemeVocab,
    pub codebooks: Codebooks,
}

impl SynthWorld {
    pub fn new(spec: SynthSpec, vocab: PhonemeVocab) -> Result<Self> {
        let codebooks = make_codebooks(&spec, vocab.size())?;
        Ok(Self {
            spec,
            vocab,
            codebooks,
        })
    }

    /// Deterministic latent for a grid; `noise_seed` drives the additive noise.
    ///
    /// `frame_offset` is the absolute index of the grid's first frame, which
    /// sets the accompaniment phase.
    pub fn synth_latent(
        &self,
        grid: &PhonemeGrid,
        style_id: usize,
        noise_seed: u64,
        frame_offset: usize,
    ) -> Result<LatentSequence> {
        let cb = &self.codebooks;
        let s = &self.spec;
        if style_id >= s.n_styles {
            return Err(Error::Contract(format!(
                "style {style_id} outside 0..{}",
                s.n_styles
            )));
        }
        let c = s.latent_channels;
        let mut rng = SeededRng::new(noise_seed);
        let mut z = LatentSequence::zeros(grid.len(), c);
        let omega = std::f64::consts::TAU * cb.instr_freqs[style_id] / s.frame_rate;
        for (j, &tok) in grid.tokens.iter().enumerate() {
            let pattern = cb
                .phonemes
                .get(tok)
                .ok_or_else(|| Error::Contract(format!("token {tok} outside the codebook")))?;
            let wave = s.instr_gain * (omega * (j + frame_offset) as f64).sin();
            let frame = z.frame_mut(j);
            for ch in 0..c {
                let noise = if s.noise_sigma > 0.0 {
                    s.noise_sigma * rng.standard_normal()
                } else {
                    0.0
                };
                frame[ch] = s.vocal_gain * pattern[ch]
                    + s.style_gain * cb.styles[style_id][ch]
                    + wave * cb.instr_dirs[style_id][ch]
                    + noise;
            }
        }
        Ok(z.quantized_f32())
    }

    /// Per-frame nearest explanation: the `(style, token)` pair minimizing
    /// `|frame - style_gain * g_style - vocal_gain * e_token|`, with `<pad>`
    /// meaning no phoneme. Ties go to the lowest token id.
    pub fn oracle_decode(&self, latent: &LatentSequence) -> Result<Vec<usize>> {
        let s = &self.spec;
        if latent.channels() != s.latent_channels {
            return Err(Error::dim(
                "oracle_decode",
                &latent.shape(),
                &[latent.frames(), s.latent_channels],
            ));
        }
        let cb = &self.codebooks;
        let c = s.latent_channels;
        let mut residual = vec![0.0; c];
        let mut out = Vec::with_capacity(latent.frames());
        for j in 0..latent.frames() {
            let x = latent.frame(j);
            let mut best = (f64::INFINITY, PAD);
            for g in &cb.styles {
                for ch in 0..c {
                    residual[ch] = x[ch] - s.style_gain * g[ch];
                }
                for (tok, e) in cb.phonemes.iter().enumerate() {
                    let d: f64 = (0..c)
                        .map(|ch| {
                            let r = residual[ch] - s.vocal_gain * e[ch];
                            r * r
                        })
                        .sum();
                    if d < best.0 || (d == best.0 && tok < best.1) {
                        best = (d, tok);
                    }
                }
            }
            out.push(best.1);
        }
        Ok(out)
    }
}
