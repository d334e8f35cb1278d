use std::collections::HashMap;
use std::ops::Range;

use crate::data::EncodedSentence;
use crate::error::{Error, Result};

/// One training sequence: a sentence or a segment of one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainExample {
    pub sentence: EncodedSentence,
    /// Gold label ids. Padding positions hold the end-of-sentence label, so a
    /// padded segment looks like a sentence end to the backward decoder.
    pub gold: Vec<usize>,
    /// `false` at padding positions, which are left out of the loss.
    pub mask: Vec<bool>,
}

impl TrainExample {
    pub fn whole(sentence: EncodedSentence, gold: Vec<usize>) -> Self {
        let mask = vec![true; gold.len()];
        TrainExample {
            sentence,
            gold,
            mask,
        }
    }

    /// The positions `span` of a sentence, padded past its end.
    pub fn segment(sentence: &EncodedSentence, gold: &[usize], span: Range<usize>, pad_label: usize) -> Self {
        let n = sentence.len();
        TrainExample {
            sentence: sentence.window(span.start, span.len()),
            gold: span.clone().map(|i| gold.get(i).copied().unwrap_or(pad_label)).collect(),
            mask: span.map(|i| i < n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.gold.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gold.is_empty()
    }
}

/// Windows `[k, k + len)` for `k = 0, shift, 2·shift, …` over a sentence of
/// `n` tokens. A final window ending at `n` is added when the shift skips it,
/// so every token is covered. A sentence shorter than `len` yields the single
/// window `[0, len)`, to be padded. A shift longer than `len` would skip
/// tokens and is rejected.
pub fn make_segments(n: usize, len: usize, shift: usize) -> Result<Vec<Range<usize>>> {
    if len == 0 || shift == 0 || shift > len {
        return Err(Error::Config(format!(
            "need 0 < shift <= segment length, got shift {shift} and length {len}"
        )));
    }
    if n <= len {
        return Ok(vec![0..len]);
    }
    let mut spans: Vec<Range<usize>> = (0..=n - len).step_by(shift).map(|k| k..k + len).collect();
    if spans.last().is_some_and(|s| s.end < n) {
        spans.push(n - len..n);
    }
    Ok(spans)
}

/// Groups example indices by exact length (in order of first appearance) and
/// splits each group into chunks of at most `cap`.
pub fn cluster_batches(lengths: &[usize], cap: usize) -> Result<Vec<Vec<usize>>> {
    if cap == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut by_len: HashMap<usize, usize> = HashMap::new();
    for (i, &l) in lengths.iter().enumerate() {
        let g = *by_len.entry(l).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    Ok(groups
        .into_iter()
        .flat_map(|g| g.chunks(cap).map(<[usize]>::to_vec).collect::<Vec<_>>())
        .collect())
}

/// Consecutive chunks of at most `cap` indices, for equal-length segments.
pub fn segment_batches(order: &[usize], cap: usize) -> Result<Vec<Vec<usize>>> {
    if cap == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    Ok(order.chunks(cap).map(<[usize]>::to_vec).collect())
}
