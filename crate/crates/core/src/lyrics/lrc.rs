use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::AlignMode;
use crate::error::{Error, Result};

/// One timestamped lyric line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub t_start: f64,
    pub text: String,
}

/// Ordered timestamped sentences.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LyricSheet {
    pub sentences: Vec<Sentence>,
}

impl LyricSheet {
    /// Builds a sheet, checking ordering and non-empty text.
    pub fn new(sentences: Vec<Sentence>) -> Result<Self> {
        for (i, s) in sentences.iter().enumerate() {
            if !(s.t_start >= 0.0) || !s.t_start.is_finite() {
                return Err(Error::Contract(format!(
                    "sentence {i} has invalid start {}",
                    s.t_start
                )));
            }
            if s.text.trim().is_empty() {
                return Err(Error::Contract(format!("sentence {i} has empty text")));
            }
        }
        if sentences.windows(2).any(|w| w[1].t_start < w[0].t_start) {
            return Err(Error::Contract("sentence start times decrease".into()));
        }
        Ok(Self { sentences })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Renders `[mm:ss.xx]text` lines at centisecond resolution.
    pub fn to_lrc(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            let centis = (s.t_start * 100.0).round() as u64;
            let _ = writeln!(
                out,
                "[{:02}:{:02}.{:02}]{}",
                centis / 6000,
                (centis / 100) % 60,
                centis % 100,
                s.text
            );
        }
        out
    }
}

/// Parses LRC text into a sheet.
///
/// Metadata tags such as `[ar:...]` and blank lines are skipped, as are
/// timestamped lines with no lyric text. A line may carry several leading
/// timestamps. Out-of-order timestamps are an error in strict mode and are
/// stably re-sorted in lenient mode.
pub fn parse_lrc(text: &str, mode: AlignMode) -> Result<LyricSheet> {
    let mut sentences = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut rest = raw.trim();
        if rest.is_empty() {
            continue;
        }
        if !rest.starts_with('[') {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected a [mm:ss.xx] tag, found {rest:?}"),
            });
        }
        let mut times = Vec::new();
        let mut metadata = false;
        while let Some(after) = rest.strip_prefix('[') {
            let close = after.find(']').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "unterminated tag".into(),
            })?;
            let tag = &after[..close];
            rest = after[close + 1..].trim_start();
            if is_metadata_tag(tag) {
                metadata = true;
                break;
            }
            let t = parse_timestamp(tag).map_err(|msg| Error::Parse { line: line_no, msg })?;
            times.push(t);
        }
        if metadata {
            continue;
        }
        let lyric = rest.trim();
        if lyric.is_empty() {
            continue;
        }
        for t in times {
            sentences.push((
                line_no,
                Sentence {
                    t_start: t,
                    text: lyric.to_string(),
                },
            ));
        }
    }

    if let Some(w) = sentences
        .windows(2)
        .find(|w| w[1].1.t_start < w[0].1.t_start)
    {
        match mode {
            AlignMode::Strict => {
                return Err(Error::Parse {
                    line: w[1].0,
                    msg: format!(
                        "timestamp {:.2}s precedes the previous line ({:.2}s)",
                        w[1].1.t_start, w[0].1.t_start
                    ),
                })
            }
            AlignMode::Lenient => {
                log::warn!("lyric timestamps out of order; re-sorting");
                sentences.sort_by(|a, b| a.1.t_start.total_cmp(&b.1.t_start));
            }
        }
    }
    LyricSheet::new(sentences.into_iter().map(|(_, s)| s).collect())
}

fn is_metadata_tag(tag: &str) -> bool {
    match tag.split_once(':') {
        Some((key, _)) => !key.is_empty() && key.chars().all(|c| c.is_ascii_alphabetic()),
        None => tag.chars().all(|c| c.is_ascii_alphabetic()) && !tag.is_empty(),
    }
}

/// `mm:ss`, `mm:ss.f`, `mm:ss.ff` or `mm:ss.fff` (`:` also accepted before the fraction).
fn parse_timestamp(tag: &str) -> std::result::Result<f64, String> {
    let bad = || format!("malformed timestamp [{tag}]");
    let (mm, rest) = tag.split_once(':').ok_or_else(bad)?;
    let (ss, frac) = match rest.find(['.', ':']) {
        Some(i) => (&rest[..i], Some(&rest[i + 1..])),
        None => (rest, None),
    };
    let digits = |s: &str| !s.is_empty() && s.chars().all(|c| c.is_ascii_digit());
    if !digits(mm) || !digits(ss) || ss.len() > 2 {
        return Err(bad());
    }
    let minutes: u64 = mm.parse().map_err(|_| bad())?;
    let seconds: u64 = ss.parse().map_err(|_| bad())?;
    if seconds >= 60 {
        return Err(bad());
    }
    let (num, den) = match frac {
        None => (0u64, 1u64),
        Some(f) if digits(f) && f.len() <= 3 => {
            (f.parse().map_err(|_| bad())?, 10u64.pow(f.len() as u32))
        }
        Some(_) => return Err(bad()),
    };
    // One division, so `[mm:ss.xx]` maps to the nearest double of centis / 100.
    Ok(((minutes * 60 + seconds) * den + num) as f64 / den as f64)
}
