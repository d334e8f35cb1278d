//! Token accuracy, chunk precision/recall/F1, concept error rate, and the
//! approximate-randomization significance test.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn check_aligned<A, B>(what: &'static str, gold: &[A], pred: &[B]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            what,
            expected: gold.len(),
            got: pred.len(),
        });
    }
    Ok(())
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Matching positions and total positions over a corpus.
pub fn token_counts(gold: &[Vec<String>], pred: &[Vec<String>]) -> Result<(usize, usize)> {
    check_aligned("sentences", gold, pred)?;
    let mut correct = 0;
    let mut total = 0;
    for (g, p) in gold.iter().zip(pred) {
        check_aligned("tokens", g, p)?;
        correct += g.iter().zip(p).filter(|(a, b)| a == b).count();
        total += g.len();
    }
    Ok((correct, total))
}

/// Corpus-level percentage of positions whose labels agree.
pub fn token_accuracy(gold: &[Vec<String>], pred: &[Vec<String>]) -> Result<f64> {
    let (c, t) = token_counts(gold, pred)?;
    Ok(percent(c, t))
}

/// Chunk tag of a label after affix normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tag {
    Begin,
    Inside,
    Outside,
}

/// Splits a label into its chunk tag and type. Prefix style (`B-NP`) is
/// checked before suffix style (`Answer-B`); a label with neither affix is
/// outside any chunk.
pub fn split_label(label: &str) -> (Tag, &str) {
    if let Some(t) = label.strip_prefix("B-") {
        (Tag::Begin, t)
    } else if let Some(t) = label.strip_prefix("I-") {
        (Tag::Inside, t)
    } else if let Some(t) = label.strip_suffix("-B") {
        (Tag::Begin, t)
    } else if let Some(t) = label.strip_suffix("-I") {
        (Tag::Inside, t)
    } else {
        (Tag::Outside, "")
    }
}

/// A typed span, `start..=end` in token positions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chunk {
    pub kind: String,
    pub start: usize,
    pub end: usize,
}

/// Chunks of one label sequence. An inside tag that does not continue a
/// chunk of its own type opens a new chunk, as the CoNLL scorer does.
pub fn extract_chunks<S: AsRef<str>>(labels: &[S]) -> Vec<Chunk> {
    let mut chunks: Vec<Chunk> = Vec::new();
    let mut open = false;
    for (i, label) in labels.iter().enumerate() {
        let (tag, kind) = split_label(label.as_ref());
        match tag {
            Tag::Outside => open = false,
            Tag::Inside if open && chunks.last().is_some_and(|c| c.kind == kind) => {
                chunks.last_mut().expect("open chunk").end = i;
            }
            Tag::Begin | Tag::Inside => {
                chunks.push(Chunk {
                    kind: kind.to_string(),
                    start: i,
                    end: i,
                });
                open = true;
            }
        }
    }
    chunks
}

/// Concept sequence of a label sequence: chunk types in order, spans dropped.
pub fn concepts<S: AsRef<str>>(labels: &[S]) -> Vec<String> {
    extract_chunks(labels).into_iter().map(|c| c.kind).collect()
}

/// Chunk counts pooled over a corpus.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChunkCounts {
    pub correct: usize,
    pub gold: usize,
    pub predicted: usize,
}

impl ChunkCounts {
    pub fn precision(&self) -> f64 {
        percent(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        percent(self.correct, self.gold)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

impl std::ops::AddAssign for ChunkCounts {
    fn add_assign(&mut self, o: Self) {
        self.correct += o.correct;
        self.gold += o.gold;
        self.predicted += o.predicted;
    }
}

/// A predicted chunk is correct when a gold chunk of the same sentence has the
/// same type and span.
pub fn chunk_prf(gold: &[Vec<Chunk>], pred: &[Vec<Chunk>]) -> Result<ChunkCounts> {
    check_aligned("sentences", gold, pred)?;
    let mut counts = ChunkCounts::default();
    for (g, p) in gold.iter().zip(pred) {
        counts.correct += p.iter().filter(|c| g.contains(c)).count();
        counts.gold += g.len();
        counts.predicted += p.len();
    }
    Ok(counts)
}

/// Unit-cost edit operations aligning a hypothesis to a reference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EditCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// Length of the reference.
    pub reference: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

impl std::ops::AddAssign for EditCounts {
    fn add_assign(&mut self, o: Self) {
        self.substitutions += o.substitutions;
        self.deletions += o.deletions;
        self.insertions += o.insertions;
        self.reference += o.reference;
    }
}

/// Levenshtein alignment with a backtrace preferring match/substitution, then
/// deletion, then insertion among optimal paths.
pub fn align<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let mut counts = EditCounts {
        reference: n,
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let differ = reference[i - 1] != hypothesis[j - 1];
            if d[i][j] == d[i - 1][j - 1] + usize::from(differ) {
                counts.substitutions += usize::from(differ);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// How per-sentence edit counts are combined into one rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CerMode {
    /// Total errors over total reference concepts.
    #[default]
    Pooled,
    /// Mean of per-sentence rates, over sentences with a non-empty reference.
    SentenceAverage,
}

/// Per-sentence alignments of concept sequences.
pub fn cer_counts(gold: &[Vec<String>], hyp: &[Vec<String>]) -> Result<Vec<EditCounts>> {
    check_aligned("sentences", gold, hyp)?;
    Ok(gold.iter().zip(hyp).map(|(g, h)| align(g, h)).collect())
}

/// Concept error rate in percent over concept sequences.
pub fn cer(gold: &[Vec<String>], hyp: &[Vec<String>], mode: CerMode) -> Result<f64> {
    rate(&cer_counts(gold, hyp)?, mode)
}

fn rate(per_sentence: &[EditCounts], mode: CerMode) -> Result<f64> {
    match mode {
        CerMode::Pooled => {
            let mut total = EditCounts::default();
            for c in per_sentence {
                total += *c;
            }
            if total.reference == 0 {
                return Err(Error::Empty("gold concepts"));
            }
            Ok(percent(total.errors(), total.reference))
        }
        CerMode::SentenceAverage => {
            let rates: Vec<f64> = per_sentence
                .iter()
                .filter(|c| c.reference > 0)
                .map(|c| percent(c.errors(), c.reference))
                .collect();
            if rates.is_empty() {
                return Err(Error::Empty("gold concepts"));
            }
            Ok(rates.iter().sum::<f64>() / rates.len() as f64)
        }
    }
}

/// All metrics of one system output against gold labels.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the gold side has no concepts at all.
    pub cer: Option<f64>,
    pub correct_tokens: usize,
    pub total_tokens: usize,
    pub chunks: ChunkCounts,
    pub edits: EditCounts,
}

pub fn evaluate(gold: &[Vec<String>], pred: &[Vec<String>], mode: CerMode) -> Result<EvalReport> {
    let (correct_tokens, total_tokens) = token_counts(gold, pred)?;
    let gold_chunks: Vec<_> = gold.iter().map(|s| extract_chunks(s)).collect();
    let pred_chunks: Vec<_> = pred.iter().map(|s| extract_chunks(s)).collect();
    let chunks = chunk_prf(&gold_chunks, &pred_chunks)?;
    let concept = |cs: &Vec<Chunk>| cs.iter().map(|c| c.kind.clone()).collect::<Vec<_>>();
    let gc: Vec<_> = gold_chunks.iter().map(concept).collect();
    let pc: Vec<_> = pred_chunks.iter().map(concept).collect();
    let per_sentence = cer_counts(&gc, &pc)?;
    let mut edits = EditCounts::default();
    for c in &per_sentence {
        edits += *c;
    }
    Ok(EvalReport {
        accuracy: percent(correct_tokens, total_tokens),
        precision: chunks.precision(),
        recall: chunks.recall(),
        f1: chunks.f1(),
        cer: rate(&per_sentence, mode).ok(),
        correct_tokens,
        total_tokens,
        chunks,
        edits,
    })
}

fn fmt_cer(cer: Option<f64>) -> String {
    cer.map_or_else(|| "NA".to_string(), |c| format!("{c:.2}"))
}

impl EvalReport {
    /// `accuracy precision recall f1 cer tokens gold_chunks pred_chunks
    /// correct_chunks edits`, tab-separated.
    pub fn tsv_line(&self) -> String {
        format!(
            "{:.2}\t{:.2}\t{:.2}\t{:.2}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            fmt_cer(self.cer),
            self.total_tokens,
            self.chunks.gold,
            self.chunks.predicted,
            self.chunks.correct,
            self.edits.errors()
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "processed {} tokens with {} phrases; found: {} phrases; correct: {}.",
            self.total_tokens, self.chunks.gold, self.chunks.predicted, self.chunks.correct
        )?;
        writeln!(
            f,
            "accuracy: {:6.2}%; precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}",
            self.accuracy, self.precision, self.recall, self.f1
        )?;
        write!(
            f,
            "CER: {} (sub {}, del {}, ins {}, over {} concepts)",
            fmt_cer(self.cer),
            self.edits.substitutions,
            self.edits.deletions,
            self.edits.insertions,
            self.edits.reference
        )
    }
}

/// Metric compared by the significance test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    F1,
    Cer,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acc" | "accuracy" => Ok(Metric::Accuracy),
            "f1" => Ok(Metric::F1),
            "cer" => Ok(Metric::Cer),
            _ => Err(Error::Config(format!("unknown metric {s:?}"))),
        }
    }
}

// Integer sufficient statistics of one sentence, summed before the metric is
// taken so that equal totals always give bit-equal scores.
#[derive(Clone, Copy, Default)]
struct Stats([usize; 3]);

impl Stats {
    fn of(metric: Metric, gold: &[String], pred: &[String]) -> Self {
        match metric {
            Metric::Accuracy => Stats([
                gold.iter().zip(pred).filter(|(a, b)| a == b).count(),
                gold.len(),
                0,
            ]),
            Metric::F1 => {
                let (g, p) = (extract_chunks(gold), extract_chunks(pred));
                Stats([p.iter().filter(|c| g.contains(c)).count(), g.len(), p.len()])
            }
            Metric::Cer => {
                let e = align(&concepts(gold), &concepts(pred));
                Stats([e.errors(), e.reference, 0])
            }
        }
    }

    fn add(&mut self, o: &Stats) {
        for k in 0..3 {
            self.0[k] += o.0[k];
        }
    }

    fn score(&self, metric: Metric) -> f64 {
        let [a, b, c] = self.0;
        match metric {
            Metric::Accuracy | Metric::Cer => percent(a, b),
            Metric::F1 => ChunkCounts {
                correct: a,
                gold: b,
                predicted: c,
            }
            .f1(),
        }
    }
}

/// Outcome of [`approx_randomization_test`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigTest {
    pub p_value: f64,
    /// `|metric(A) − metric(B)|` on the unshuffled outputs.
    pub observed: f64,
    /// Shuffles drawn, or swap patterns enumerated when `exact`.
    pub trials: u64,
    pub exact: bool,
}

/// Largest sentence count for which every swap pattern is enumerated.
const MAX_EXACT_SENTENCES: u32 = 30;

/// Approximate randomization test of the difference between systems `a` and
/// `b` (per-sentence label sequences) against `gold`.
///
/// When `2^n ≤ rounds` for `n` sentences, every swap pattern is enumerated and
/// `p` is the exact fraction with `δ* ≥ δ`. Otherwise `rounds` random patterns
/// are drawn, each sentence swapped with probability ½, and
/// `p = (count + 1) / (rounds + 1)`.
pub fn approx_randomization_test(
    a: &[Vec<String>],
    b: &[Vec<String>],
    gold: &[Vec<String>],
    metric: Metric,
    rounds: u64,
    seed: u64,
) -> Result<SigTest> {
    check_aligned("system A sentences", gold, a)?;
    check_aligned("system B sentences", gold, b)?;
    for ((g, x), y) in gold.iter().zip(a).zip(b) {
        check_aligned("system A tokens", g, x)?;
        check_aligned("system B tokens", g, y)?;
    }
    if rounds == 0 {
        return Err(Error::Config("the test needs at least one round".into()));
    }
    let sa: Vec<Stats> = gold.iter().zip(a).map(|(g, p)| Stats::of(metric, g, p)).collect();
    let sb: Vec<Stats> = gold.iter().zip(b).map(|(g, p)| Stats::of(metric, g, p)).collect();
    let delta = |swap: &mut dyn FnMut(usize) -> bool| {
        let (mut ta, mut tb) = (Stats::default(), Stats::default());
        for i in 0..sa.len() {
            if swap(i) {
                ta.add(&sb[i]);
                tb.add(&sa[i]);
            } else {
                ta.add(&sa[i]);
                tb.add(&sb[i]);
            }
        }
        (ta.score(metric) - tb.score(metric)).abs()
    };
    let observed = delta(&mut |_| false);

    let n = sa.len() as u32;
    if n <= MAX_EXACT_SENTENCES && (1u64 << n) <= rounds {
        let patterns = 1u64 << n;
        let count = (0..patterns)
            .filter(|&bits| delta(&mut |i| bits >> i & 1 == 1) >= observed)
            .count();
        return Ok(SigTest {
            p_value: count as f64 / patterns as f64,
            observed,
            trials: patterns,
            exact: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = 0u64;
    for _ in 0..rounds {
        if delta(&mut |_| rng.random_bool(0.5)) >= observed {
            count += 1;
        }
    }
    Ok(SigTest {
        p_value: (count + 1) as f64 / (rounds + 1) as f64,
        observed,
        trials: rounds,
        exact: false,
    })
}
