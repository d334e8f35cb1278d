//! Generated corpora for smoke tests and small experiments.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Corpus, Sentence};
use crate::error::{Error, Result};

/// Label set of [`rule_corpus`].
pub const RULE_LABELS: [&str; 5] = ["O", "B-A", "I-A", "B-B", "I-B"];

/// Sentences of 4 to 10 words drawn uniformly from `w0 … w{vocab-1}`, where
/// word `wj` always carries label `RULE_LABELS[j % 5]`.
pub fn rule_corpus(sentences: usize, vocab: usize, seed: u64) -> Result<Corpus> {
    if vocab == 0 {
        return Err(Error::Config("vocabulary must not be empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = (0..sentences)
        .map(|_| {
            let n = rng.random_range(4..=10);
            let ids: Vec<usize> = (0..n).map(|_| rng.random_range(0..vocab)).collect();
            Sentence::new(
                ids.iter().map(|j| format!("w{j}")).collect(),
                ids.iter().map(|j| RULE_LABELS[j % RULE_LABELS.len()].to_string()).collect(),
            )
        })
        .collect();
    Ok(Corpus::new(out))
}

/// A first-order HMM over labels with per-label word emissions.
#[derive(Clone, Debug)]
pub struct Hmm {
    pub labels: Vec<String>,
    pub start: Vec<f64>,
    pub transitions: Vec<Vec<f64>>,
    pub emissions: Vec<Vec<(String, f64)>>,
}

impl Hmm {
    /// Two entity types with BIO labels. The words that open an entity are
    /// shared by both types, so their label is only fixed by the word that
    /// follows.
    pub fn ambiguous_entities() -> Self {
        let labels: Vec<String> = ["O", "B-LOC", "I-LOC", "B-PER", "I-PER"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let words = |stem: &str, n: usize| -> Vec<(String, f64)> {
            (0..n).map(|i| (format!("{stem}{i}"), 1.0)).collect()
        };
        let opener = words("open", 4);
        let emissions = vec![
            words("the", 12),
            opener.clone(),
            words("city", 6),
            opener,
            words("name", 6),
        ];
        let transitions = vec![
            vec![0.6, 0.2, 0.0, 0.2, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
            vec![0.5, 0.1, 0.3, 0.1, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0],
            vec![0.5, 0.1, 0.0, 0.1, 0.3],
        ];
        Hmm {
            labels,
            start: vec![0.6, 0.2, 0.0, 0.2, 0.0],
            transitions,
            emissions,
        }
    }

    /// Samples `sentences` label paths of `min_len..=max_len` tokens and their
    /// words.
    pub fn sample(&self, sentences: usize, min_len: usize, max_len: usize, rng: &mut impl Rng) -> Result<Corpus> {
        if min_len == 0 || min_len > max_len {
            return Err(Error::Config(format!("bad length range {min_len}..={max_len}")));
        }
        let bad = |e: rand::distr::weighted::Error| Error::Config(format!("HMM weights: {e}"));
        let start = WeightedIndex::new(&self.start).map_err(bad)?;
        let trans = self
            .transitions
            .iter()
            .map(|row| WeightedIndex::new(row).map_err(bad))
            .collect::<Result<Vec<_>>>()?;
        let emit = self
            .emissions
            .iter()
            .map(|row| WeightedIndex::new(row.iter().map(|(_, w)| *w)).map_err(bad))
            .collect::<Result<Vec<_>>>()?;
        let out = (0..sentences)
            .map(|_| {
                let n = rng.random_range(min_len..=max_len);
                let mut state = start.sample(rng);
                let mut tokens = Vec::with_capacity(n);
                let mut labels = Vec::with_capacity(n);
                for i in 0..n {
                    if i > 0 {
                        state = trans[state].sample(rng);
                    }
                    tokens.push(self.emissions[state][emit[state].sample(rng)].0.clone());
                    labels.push(self.labels[state].clone());
                }
                Sentence::new(tokens, labels)
            })
            .collect();
        Ok(Corpus::new(out))
    }
}

/// `sentences` sentences of 5 to 20 tokens from [`Hmm::ambiguous_entities`].
pub fn hmm_corpus(sentences: usize, seed: u64) -> Result<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Hmm::ambiguous_entities().sample(sentences, 5, 20, &mut rng)
}
