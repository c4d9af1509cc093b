use crate::error::{Error, Result};
use crate::lyrics::PAD;

/// Levenshtein distance with unit substitution, insertion and deletion costs.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Collapses runs of identical frame tokens, then drops `<pad>`.
pub fn normalize_tokens(frames: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut last = None;
    for &t in frames {
        if last != Some(t) && t != PAD {
            out.push(t);
        }
        last = Some(t);
    }
    out
}

/// Phoneme error rate between frame-level token sequences: edit distance of
/// the normalized sequences divided by the normalized reference length.
pub fn phoneme_error_rate(reference: &[usize], hypothesis: &[usize]) -> Result<f64> {
    let r = normalize_tokens(reference);
    let h = normalize_tokens(hypothesis);
    if r.is_empty() {
        return Err(Error::UndefinedMetric(
            "reference has no phonemes after removing padding".into(),
        ));
    }
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}
