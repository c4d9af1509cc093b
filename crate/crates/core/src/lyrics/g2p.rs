use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const PAD_SYMBOL: &str = "<pad>";

const DEFAULT_RULES: &str = include_str!("phonemes.tsv");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Rule {
    grapheme: String,
    phonemes: Vec<usize>,
}

/// Phoneme inventory plus an ordered grapheme rewrite table.
///
/// Index 0 is always `<pad>`, which no rule can produce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhonemeVocab {
    symbols: Vec<String>,
    rules: Vec<Rule>,
}

/// Result of converting one sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct G2pOutput {
    pub phonemes: Vec<usize>,
    /// Characters with no matching rule, dropped from the output.
    pub unknown: usize,
}

impl Default for PhonemeVocab {
    fn default() -> Self {
        Self::parse_rules(DEFAULT_RULES).expect("built-in phoneme table is valid")
    }
}

impl PhonemeVocab {
    /// Builds a vocabulary from `(grapheme, phonemes)` pairs in priority order.
    pub fn from_rules<S: AsRef<str>>(rules: &[(S, &[S])]) -> Result<Self> {
        let mut vocab = Self {
            symbols: vec![PAD_SYMBOL.to_string()],
            rules: Vec::new(),
        };
        for (g, ps) in rules {
            let phs: Vec<&str> = ps.iter().map(AsRef::as_ref).collect();
            vocab.push_rule(g.as_ref(), &phs)?;
        }
        Ok(vocab)
    }

    /// Parses `grapheme<TAB>PHONEME [PHONEME ...]` lines; `#` starts a comment.
    pub fn parse_rules(text: &str) -> Result<Self> {
        let mut vocab = Self {
            symbols: vec![PAD_SYMBOL.to_string()],
            rules: Vec::new(),
        };
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (g, ps) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: "expected grapheme<TAB>phonemes".into(),
            })?;
            let phs: Vec<&str> = ps.split_whitespace().collect();
            vocab.push_rule(g.trim(), &phs).map_err(|e| Error::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(vocab)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_rules(&text)
    }

    fn push_rule(&mut self, grapheme: &str, phonemes: &[&str]) -> Result<()> {
        let grapheme = grapheme.to_lowercase();
        if grapheme.is_empty() || grapheme.chars().any(char::is_whitespace) {
            return Err(Error::Config(format!("invalid grapheme {grapheme:?}")));
        }
        if phonemes.is_empty() {
            return Err(Error::Config(format!("rule {grapheme:?} has no phonemes")));
        }
        let mut ids = Vec::with_capacity(phonemes.len());
        for &p in phonemes {
            if p == PAD_SYMBOL {
                return Err(Error::Config("rules may not emit <pad>".into()));
            }
            let id = match self.symbols.iter().position(|s| s == p) {
                Some(i) => i,
                None => {
                    self.symbols.push(p.to_string());
                    self.symbols.len() - 1
                }
            };
            ids.push(id);
        }
        self.rules.push(Rule {
            grapheme,
            phonemes: ids,
        });
        Ok(())
    }

    /// Number of token ids including `<pad>`.
    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn id(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    /// Longest-match, left-to-right rewrite of lowercased `text`.
    ///
    /// Whitespace separates nothing (words are concatenated); any other
    /// character without a rule is dropped and counted.
    pub fn g2p(&self, text: &str) -> Result<G2pOutput> {
        let lower = text.to_lowercase();
        let mut phonemes = Vec::new();
        let mut unknown = 0;
        let mut pos = 0;
        while pos < lower.len() {
            let rest = &lower[pos..];
            let best = self
                .rules
                .iter()
                .filter(|r| rest.starts_with(r.grapheme.as_str()))
                .fold(None::<&Rule>, |best, r| match best {
                    Some(b) if b.grapheme.len() >= r.grapheme.len() => Some(b),
                    _ => Some(r),
                });
            match best {
                Some(rule) => {
                    phonemes.extend_from_slice(&rule.phonemes);
                    pos += rule.grapheme.len();
                }
                None => {
                    let ch = rest.chars().next().expect("non-empty remainder");
                    if !ch.is_whitespace() {
                        unknown += 1;
                    }
                    pos += ch.len_utf8();
                }
            }
        }
        if unknown > 0 {
            log::warn!("g2p dropped {unknown} unknown character(s) from {text:?}");
        }
        if phonemes.is_empty() {
            return Err(Error::EmptyPhonemes {
                sentence: 0,
                text: text.to_string(),
            });
        }
        Ok(G2pOutput { phonemes, unknown })
    }

    pub fn render(&self, ids: &[usize]) -> Vec<&str> {
        ids.iter().map(|&i| self.symbol(i).unwrap_or("?")).collect()
    }
}
