use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{SynthSpec, SynthWorld};
use crate::error::{Error, Result};
use crate::latent::LatentSequence;
use crate::lyrics::{
    build_phoneme_grid, AlignMode, LyricSheet, PhonemeGrid, PhonemeVocab, Sentence,
};
use crate::random::SeededRng;

pub const CORPUS_VERSION: u32 = 1;

const WORDS: &[&str] = &[
    "above", "again", "alone", "always", "baby", "back", "beat", "bright", "broken", "burning",
    "call", "chase", "city", "close", "cold", "dance", "dark", "day", "deep", "dream", "drive",
    "echo", "ever", "fade", "fall", "far", "feel", "fire", "flash", "fly", "forever", "free",
    "ghost", "gold", "good", "heart", "high", "hold", "home", "hope", "jump", "keep", "kiss",
    "light", "line", "lost", "love", "low", "magic", "midnight", "mind", "moon", "more", "move",
    "never", "night", "ocean", "open", "pulse", "push", "quiet", "rain", "reach", "rhythm",
    "river", "road", "rock", "run", "shadow", "shine", "shout", "sing", "sky", "slow", "smoke",
    "song", "soul", "sound", "spark", "stay", "storm", "street", "sun", "sweet", "take", "thunder",
    "time", "touch", "turn", "up", "velvet", "voice", "wait", "wake", "walk", "want", "wave",
    "way", "wild", "wind", "wish", "with", "young", "zone",
];

/// Song-level shape of the generated corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub n_songs: usize,
    pub min_seconds: f64,
    pub max_seconds: f64,
    /// Latest start of the first sung line, in seconds.
    pub first_line_max_seconds: f64,
    pub words_min: usize,
    pub words_max: usize,
    pub gap_min_seconds: f64,
    pub gap_max_seconds: f64,
    /// Probability that a gap is a prolonged instrumental break instead.
    pub long_break_prob: f64,
    pub long_break_min_seconds: f64,
    pub long_break_max_seconds: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_songs: 200,
            min_seconds: 30.0,
            max_seconds: 120.0,
            first_line_max_seconds: 4.0,
            words_min: 2,
            words_max: 5,
            gap_min_seconds: 0.5,
            gap_max_seconds: 4.0,
            long_break_prob: 0.15,
            long_break_min_seconds: 8.0,
            long_break_max_seconds: 20.0,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_seconds > 0.0
            && self.max_seconds >= self.min_seconds
            && self.first_line_max_seconds >= 0.0
            && self.words_min >= 1
            && self.words_max >= self.words_min
            && self.gap_min_seconds > 0.0
            && self.gap_max_seconds >= self.gap_min_seconds
            && (0.0..=1.0).contains(&self.long_break_prob)
            && self.long_break_max_seconds >= self.long_break_min_seconds
            && self.long_break_min_seconds >= 0.0;
        if !ok {
            return Err(Error::Config(format!(
                "inconsistent corpus config {self:?}"
            )));
        }
        Ok(())
    }
}

/// One synthetic song.
#[derive(Clone, Debug, PartialEq)]
pub struct SongRecord {
    pub id: String,
    pub index: usize,
    pub seed: u64,
    pub sheet: LyricSheet,
    pub style_id: usize,
    pub latent: LatentSequence,
    pub grid: PhonemeGrid,
}

impl SongRecord {
    pub fn duration_seconds(&self, frame_rate: f64) -> f64 {
        self.latent.frames() as f64 / frame_rate
    }
}

fn uniform_in(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

fn centis(t: f64) -> f64 {
    (t * 100.0).floor() / 100.0
}

/// Generates song `index` from a seed derived from the world seed.
pub fn generate_song(world: &SynthWorld, cfg: &CorpusConfig, index: usize) -> Result<SongRecord> {
    let spec = &world.spec;
    let seed = spec.seed.wrapping_add(1 + index as u64);
    let mut rng = SeededRng::new(seed);
    let fs = spec.frame_rate;

    let duration = uniform_in(&mut rng, cfg.min_seconds, cfg.max_seconds);
    let frames = (duration * fs).floor() as usize;
    let style_id = rng.int_inclusive(0, spec.n_styles - 1);

    let mut sentences = Vec::new();
    let mut t = centis(uniform_in(&mut rng, 0.0, cfg.first_line_max_seconds));
    loop {
        let n_words = rng.int_inclusive(cfg.words_min, cfg.words_max);
        let words: Vec<&str> = (0..n_words)
            .map(|_| WORDS[rng.int_inclusive(0, WORDS.len() - 1)])
            .collect();
        let text = words.join(" ");
        let n_ph = world.vocab.g2p(&text)?.phonemes.len();
        let start = crate::lyrics::start_frame(t, fs);
        if start + n_ph > frames {
            break;
        }
        sentences.push(Sentence { t_start: t, text });
        let gap = if rng.bernoulli(cfg.long_break_prob) {
            uniform_in(
                &mut rng,
                cfg.long_break_min_seconds,
                cfg.long_break_max_seconds,
            )
        } else {
            uniform_in(&mut rng, cfg.gap_min_seconds, cfg.gap_max_seconds)
        };
        // the floor in `centis` never moves the next start before this line ends
        t = centis(t + (n_ph + 1) as f64 / fs + gap);
    }
    let sheet = LyricSheet::new(sentences)?;
    let grid = build_phoneme_grid(&sheet, &world.vocab, frames, fs, AlignMode::Strict)?;
    let latent = world.synth_latent(&grid, style_id, rng.next_u64(), 0)?;
    Ok(SongRecord {
        id: format!("song_{index:05}"),
        index,
        seed,
        sheet,
        style_id,
        latent,
        grid,
    })
}

/// A generated or loaded corpus with the world that produced it.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub world: SynthWorld,
    pub config: CorpusConfig,
    pub songs: Vec<SongRecord>,
}

impl Corpus {
    pub fn generate(spec: SynthSpec, vocab: PhonemeVocab, config: CorpusConfig) -> Result<Self> {
        config.validate()?;
        let world = SynthWorld::new(spec, vocab)?;
        let songs = (0..config.n_songs)
            .map(|i| generate_song(&world, &config, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            world,
            config,
            songs,
        })
    }

    pub fn total_frames(&self) -> usize {
        self.songs.iter().map(|s| s.latent.frames()).sum()
    }

    /// Index at which the held-out tail begins (last 10%, at least one song
    /// when the corpus has two or more).
    pub fn split_index(&self) -> usize {
        let n = self.songs.len();
        let held = ((n as f64) * 0.1).round() as usize;
        let held = if n >= 2 { held.max(1) } else { 0 };
        n - held
    }

    pub fn train_songs(&self) -> &[SongRecord] {
        &self.songs[..self.split_index()]
    }

    pub fn held_out_songs(&self) -> &[SongRecord] {
        &self.songs[self.split_index()..]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SongEntry {
    pub id: String,
    pub index: usize,
    pub seed: u64,
    pub style_id: usize,
    pub frames: usize,
    pub sentences: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub version: u32,
    pub spec: SynthSpec,
    pub config: CorpusConfig,
    pub vocab: PhonemeVocab,
    pub songs: Vec<SongEntry>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

fn song_paths(dir: &Path, id: &str) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
    let songs = dir.join("songs");
    (
        songs.join(format!("{id}.latent")),
        songs.join(format!("{id}.grid.json")),
        songs.join(format!("{id}.sheet.json")),
        songs.join(format!("{id}.lrc")),
    )
}

/// Writes `manifest.json` and one latent/grid/sheet/lrc set per song.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<CorpusManifest> {
    let songs_dir = dir.join("songs");
    fs::create_dir_all(&songs_dir).map_err(|e| Error::io(&songs_dir, e))?;
    let fs_rate = corpus.world.spec.frame_rate;
    let mut entries = Vec::with_capacity(corpus.songs.len());
    for song in &corpus.songs {
        let (latent, grid, sheet, lrc) = song_paths(dir, &song.id);
        song.latent.write(&latent, fs_rate)?;
        write_json(&grid, &song.grid)?;
        write_json(&sheet, &song.sheet)?;
        fs::write(&lrc, song.sheet.to_lrc()).map_err(|e| Error::io(&lrc, e))?;
        entries.push(SongEntry {
            id: song.id.clone(),
            index: song.index,
            seed: song.seed,
            style_id: song.style_id,
            frames: song.latent.frames(),
            sentences: song.sheet.len(),
        });
    }
    let manifest = CorpusManifest {
        version: CORPUS_VERSION,
        spec: corpus.world.spec.clone(),
        config: corpus.config.clone(),
        vocab: corpus.world.vocab.clone(),
        songs: entries,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let manifest: CorpusManifest = read_json(&dir.join("manifest.json"))?;
    if manifest.version != CORPUS_VERSION {
        return Err(Error::Config(format!(
            "corpus version {} (expected {CORPUS_VERSION})",
            manifest.version
        )));
    }
    let world = SynthWorld::new(manifest.spec.clone(), manifest.vocab.clone())?;
    let mut songs = Vec::with_capacity(manifest.songs.len());
    for entry in &manifest.songs {
        let (latent_path, grid_path, sheet_path, _) = song_paths(dir, &entry.id);
        let (latent, _) = LatentSequence::read(&latent_path)?;
        let grid: PhonemeGrid = read_json(&grid_path)?;
        let sheet: LyricSheet = read_json(&sheet_path)?;
        if latent.frames() != grid.len() || latent.frames() != entry.frames {
            return Err(Error::Config(format!(
                "{}: latent has {} frames, grid {}, manifest {}",
                entry.id,
                latent.frames(),
                grid.len(),
                entry.frames
            )));
        }
        songs.push(SongRecord {
            id: entry.id.clone(),
            index: entry.index,
            seed: entry.seed,
            sheet,
            style_id: entry.style_id,
            latent,
            grid,
        });
    }
    Ok(Corpus {
        world,
        config: manifest.config,
        songs,
    })
}

/// Random `l_max`-frame window of `z` and its start frame.
pub fn truncate_latent(
    z: &LatentSequence,
    l_max: usize,
    rng: &mut SeededRng,
) -> Result<(LatentSequence, usize)> {
    if z.frames() < l_max {
        return Err(Error::Contract(format!(
            "cannot take {l_max} frames from a {}-frame latent",
            z.frames()
        )));
    }
    let start = rng.int_inclusive(0, z.frames() - l_max);
    Ok((z.window(start, l_max)?, start))
}

/// Truncates a latent and its grid with one shared start frame.
///
/// Short songs are an error in strict mode; in lenient mode they are
/// right-padded with Gaussian frames of std `pad_sigma` and `<pad>` tokens.
pub fn truncate_pair(
    latent: &LatentSequence,
    grid: &PhonemeGrid,
    l_max: usize,
    rng: &mut SeededRng,
    mode: AlignMode,
    pad_sigma: f64,
) -> Result<(LatentSequence, PhonemeGrid, usize)> {
    if latent.frames() != grid.len() {
        return Err(Error::dim("truncate_pair", &latent.shape(), &[grid.len()]));
    }
    if latent.frames() >= l_max {
        let (seg, start) = truncate_latent(latent, l_max, rng)?;
        return Ok((seg, grid.window(start, l_max), start));
    }
    match mode {
        AlignMode::Strict => Err(Error::Contract(format!(
            "song has {} frames, fewer than l_max = {l_max}",
            latent.frames()
        ))),
        AlignMode::Lenient => {
            let c = latent.channels();
            let mut data = latent.data().to_vec();
            data.extend(
                (0..(l_max - latent.frames()) * c).map(|_| pad_sigma * rng.standard_normal()),
            );
            Ok((
                LatentSequence::new(l_max, c, data)?,
                grid.window(0, l_max),
                0,
            ))
        }
    }
}

/// Random contiguous `prompt_len`-frame segment of `z` and its start frame.
pub fn extract_style_prompt(
    z: &LatentSequence,
    prompt_len: usize,
    rng: &mut SeededRng,
) -> Result<(LatentSequence, usize)> {
    if prompt_len == 0 || z.frames() < prompt_len {
        return Err(Error::Contract(format!(
            "style prompt of {prompt_len} frames from a {}-frame latent",
            z.frames()
        )));
    }
    let start = rng.int_inclusive(0, z.frames() - prompt_len);
    Ok((z.window(start, prompt_len)?, start))
}
