use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Graph;
use crate::data::{build_vocab, encode_sentence, Corpus, EncodedSentence, ModelBundle};
use crate::decoders::{run_backward_decoder, run_forward_decoder, LabelSource};
use crate::encoder::encode_lexical;
use crate::error::{Error, Result};
use crate::layers::Phase;
use crate::metrics::{evaluate, CerMode, EvalReport};
use crate::model::{ArchConfig, Seq2Biseq};

use super::batching::{cluster_batches, make_segments, segment_batches, TrainExample};
use super::loss::{loss_and_gradients, sequence_nll, Objective};
use super::optim::{Optimizer, OptimizerKind};

// Dropout masks draw from their own stream so that changing the dropout rate
// leaves the shuffling order alone.
const DROPOUT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// `base · (1 − epoch / total)`.
pub fn lr_at_epoch(base: f64, epoch: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(Error::Config("linear decay needs at least one epoch".into()));
    }
    if epoch > total {
        return Err(Error::Config(format!("epoch {epoch} past the last epoch {total}")));
    }
    Ok(base * (1.0 - epoch as f64 / total as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Batching {
    /// Fixed-length overlapping windows of every sentence.
    Segments,
    /// Whole sentences grouped by exact length.
    Clusters,
}

impl std::str::FromStr for Batching {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "segments" => Ok(Batching::Segments),
            "clusters" => Ok(Batching::Clusters),
            _ => Err(Error::Config(format!("unknown batching {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// One optimizer on the joint loss.
    Single,
    /// A backward-only step with its own optimizer, then a joint step.
    TwoOpt,
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Regime::Single),
            "two-opt" | "two_opt" => Ok(Regime::TwoOpt),
            _ => Err(Error::Config(format!("unknown regime {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    pub momentum: f64,
    pub optimizer: OptimizerKind,
    /// L2 coefficient `λ`.
    pub lambda: f64,
    pub dropout: f64,
    pub segment_len: usize,
    pub shift: usize,
    pub batch_size: usize,
    pub batching: Batching,
    pub seed: u64,
    pub regime: Regime,
    /// Global gradient-norm ceiling applied before every update.
    pub clip_norm: Option<f64>,
    /// Words seen fewer times are encoded as `<unk>`.
    pub min_count: usize,
}

impl TrainConfig {
    /// SGD with momentum and linear decay over segments.
    pub fn media() -> Self {
        TrainConfig {
            epochs: 40,
            base_lr: 0.125,
            momentum: 0.9,
            optimizer: OptimizerKind::Sgd,
            lambda: 1e-4,
            dropout: 0.5,
            segment_len: 10,
            shift: 1,
            batch_size: 100,
            batching: Batching::Segments,
            seed: 1,
            regime: Regime::Single,
            clip_norm: Some(5.0),
            min_count: 1,
        }
    }

    /// Adam at a fixed rate over length clusters.
    pub fn wsj() -> Self {
        TrainConfig {
            epochs: 52,
            base_lr: 0.001,
            optimizer: OptimizerKind::Adam,
            batching: Batching::Clusters,
            ..Self::media()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.segment_len == 0 || self.shift == 0 || self.batch_size == 0 {
            return bad("segment length, shift and batch size must be positive".into());
        }
        if self.shift > self.segment_len {
            return bad(format!(
                "shift {} exceeds segment length {} and would skip tokens",
                self.shift, self.segment_len
            ));
        }
        if self.base_lr.is_nan() || self.base_lr < 0.0 || self.momentum.is_nan() || self.momentum < 0.0 {
            return bad("learning rate and momentum must be non-negative".into());
        }
        if self.clip_norm.is_some_and(|c| c.is_nan() || c <= 0.0) {
            return bad("clip norm must be positive".into());
        }
        if self.min_count == 0 {
            return bad("min_count must be at least 1".into());
        }
        Ok(())
    }

    /// Linear decay for SGD; Adam keeps its base rate.
    pub fn lr_for_epoch(&self, epoch: usize) -> Result<f64> {
        match self.optimizer {
            OptimizerKind::Sgd => lr_at_epoch(self.base_lr, epoch, self.epochs),
            OptimizerKind::Adam => Ok(self.base_lr),
        }
    }
}

fn apply(
    model: &mut Seq2Biseq,
    opt: &mut dyn Optimizer,
    mut grads: crate::autodiff::Gradients,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    if let Some(c) = cfg.clip_norm {
        grads.clip_global_norm(c);
    }
    opt.step(model.params_mut(), &grads, lr)
}

/// One update on the joint loss. Returns the loss before the update.
pub fn train_step_single(
    model: &mut Seq2Biseq,
    batch: &[&TrainExample],
    opt: &mut dyn Optimizer,
    lr: f64,
    cfg: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let layout = *model.layout();
    let mut phase = Phase::train(cfg.dropout, rng)?;
    let (loss, grads) =
        loss_and_gradients(model.params(), &layout, batch, Objective::Joint, cfg.lambda, &mut phase)?;
    apply(model, opt, grads, lr, cfg)?;
    Ok(loss)
}

/// A backward-only update with `opt_bw` (touching exactly the parameters
/// that loss reaches), then a fresh joint pass updated with `opt_global`.
/// Returns both losses, each measured before its own update.
#[allow(clippy::too_many_arguments)]
pub fn train_step_two_opt(
    model: &mut Seq2Biseq,
    batch: &[&TrainExample],
    opt_bw: &mut dyn Optimizer,
    opt_global: &mut dyn Optimizer,
    lr_bw: f64,
    lr_global: f64,
    cfg: &TrainConfig,
    rng: &mut dyn RngCore,
) -> Result<(f64, f64)> {
    if model.arch().fw_only {
        return Err(Error::Config(
            "the two-optimizer regime needs the backward decoder".into(),
        ));
    }
    let layout = *model.layout();
    let (bw_loss, grads) = {
        let mut phase = Phase::train(cfg.dropout, rng)?;
        loss_and_gradients(
            model.params(),
            &layout,
            batch,
            Objective::BackwardOnly,
            cfg.lambda,
            &mut phase,
        )?
    };
    apply(model, opt_bw, grads, lr_bw, cfg)?;
    let (loss, grads) = {
        let mut phase = Phase::train(cfg.dropout, rng)?;
        loss_and_gradients(model.params(), &layout, batch, Objective::Joint, cfg.lambda, &mut phase)?
    };
    apply(model, opt_global, grads, lr_global, cfg)?;
    Ok((bw_loss, loss))
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub lr: f64,
    /// Mean batch loss over the epoch.
    pub train_loss: f64,
    pub dev: EvalReport,
    /// Mean per-sentence joint negative log-likelihood on the dev set, gold
    /// labels fed, dropout off, no L2 term.
    pub dev_loss: f64,
}

impl EpochLog {
    /// `epoch lr train_loss dev_acc dev_f1 dev_cer`, tab-separated.
    pub fn tsv_line(&self) -> String {
        let cer = self.dev.cer.map_or_else(|| "NA".into(), |c| format!("{c:.2}"));
        format!(
            "{}\t{}\t{:.6}\t{:.2}\t{:.2}\t{}",
            self.epoch, self.lr, self.train_loss, self.dev.accuracy, self.dev.f1, cer
        )
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    /// Snapshot with the best dev accuracy (the initial model after 0 epochs).
    pub best: ModelBundle,
    /// Epoch of `best`, 0 for the initial model.
    pub best_epoch: usize,
    /// Model after the last epoch.
    pub last: ModelBundle,
    pub log: Vec<EpochLog>,
}

struct DevSet {
    encoded: Vec<EncodedSentence>,
    gold_ids: Vec<Vec<usize>>,
    masks: Vec<Vec<bool>>,
    gold: Vec<Vec<String>>,
}

impl DevSet {
    fn new(bundle: &ModelBundle, corpus: &Corpus) -> Result<Self> {
        let k = bundle.vocab.labels.len();
        let mut set = DevSet {
            encoded: Vec::new(),
            gold_ids: Vec::new(),
            masks: Vec::new(),
            gold: Vec::new(),
        };
        for s in &corpus.sentences {
            if !s.is_labelled() {
                return Err(Error::MissingGold);
            }
            set.encoded.push(encode_sentence(&bundle.vocab, &s.tokens));
            let ids: Vec<Option<usize>> = s.labels.iter().map(|l| bundle.vocab.label_id(l)).collect();
            set.gold_ids.push(ids.iter().map(|i| i.unwrap_or(k)).collect());
            set.masks.push(ids.iter().map(Option::is_some).collect());
            set.gold.push(s.labels.clone());
        }
        Ok(set)
    }

    fn evaluate(&self, bundle: &ModelBundle) -> Result<(EvalReport, f64)> {
        let model = &bundle.model;
        let layout = model.layout();
        let mut preds = Vec::with_capacity(self.encoded.len());
        let (mut loss, mut counted) = (0.0, 0usize);
        for ((enc, gold), mask) in self.encoded.iter().zip(&self.gold_ids).zip(&self.masks) {
            let mut g = Graph::new(model.params());
            let phase = &mut Phase::Eval;
            let lex = encode_lexical(&mut g, layout, enc, phase)?;
            let mut run = |g: &mut Graph, source: LabelSource| -> Result<_> {
                let bw = if layout.fw_only {
                    Vec::new()
                } else {
                    run_backward_decoder(g, layout, &lex, source, phase)?
                };
                let backward = (!layout.fw_only).then_some(bw.as_slice());
                let fw = run_forward_decoder(g, layout, &lex, backward, source, phase)?;
                Ok((bw, fw))
            };
            let (_, fw) = run(&mut g, LabelSource::Predicted)?;
            let labels = fw
                .iter()
                .map(|s| bundle.vocab.label_name(s.label).to_string())
                .collect();
            preds.push(labels);
            if mask.iter().any(|&m| m) {
                let (bw, fw) = run(&mut g, LabelSource::Gold(gold))?;
                let fw: Vec<_> = fw.iter().map(|s| s.logp).collect();
                let bw: Vec<_> = bw.iter().map(|s| s.logp).collect();
                let nll = sequence_nll(&mut g, &fw, &bw, gold, Some(mask))?;
                loss += g.value(nll).item();
                counted += 1;
            }
        }
        let report = evaluate(&self.gold, &preds, CerMode::Pooled)?;
        Ok((report, if counted == 0 { 0.0 } else { loss / counted as f64 }))
    }
}

/// Scores a bundle on a labelled corpus: the report of its greedy tags and
/// the mean per-sentence dev loss as logged by [`fit`].
pub fn evaluate_corpus(bundle: &ModelBundle, corpus: &Corpus) -> Result<(EvalReport, f64)> {
    DevSet::new(bundle, corpus)?.evaluate(bundle)
}

fn training_examples(bundle: &ModelBundle, corpus: &Corpus, cfg: &TrainConfig) -> Result<Vec<TrainExample>> {
    let pad = bundle.model.layout().eos_label();
    let mut out = Vec::new();
    for s in &corpus.sentences {
        if !s.is_labelled() {
            return Err(Error::MissingGold);
        }
        let enc = encode_sentence(&bundle.vocab, &s.tokens);
        let gold: Vec<usize> = s
            .labels
            .iter()
            .map(|l| bundle.vocab.label_id(l).expect("training labels are in the vocabulary"))
            .collect();
        match cfg.batching {
            Batching::Clusters => out.push(TrainExample::whole(enc, gold)),
            Batching::Segments => {
                for span in make_segments(enc.len(), cfg.segment_len, cfg.shift)? {
                    out.push(TrainExample::segment(&enc, &gold, span, pad));
                }
            }
        }
    }
    Ok(out)
}

/// Trains a fresh model on `train`, evaluating on `dev` after every epoch and
/// keeping the snapshot with the best dev token accuracy. `on_epoch` sees each
/// log line as soon as it is produced.
pub fn fit(
    cfg: &TrainConfig,
    arch: &ArchConfig,
    train: &Corpus,
    dev: &Corpus,
    on_epoch: &mut dyn FnMut(&EpochLog),
) -> Result<FitResult> {
    cfg.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::Empty("training or dev corpus"));
    }
    if cfg.regime == Regime::TwoOpt && arch.fw_only {
        return Err(Error::Config(
            "the two-optimizer regime needs the backward decoder".into(),
        ));
    }
    let vocab = build_vocab(train, cfg.min_count);
    let mut bundle = ModelBundle::init(vocab, arch.clone(), cfg.seed)?;
    let examples = training_examples(&bundle, train, cfg)?;
    let dev_set = DevSet::new(&bundle, dev)?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ DROPOUT_STREAM);
    let mut opt = cfg.optimizer.build(cfg.momentum);
    let mut opt_bw = cfg.optimizer.build(cfg.momentum);

    let mut best = bundle.clone();
    let mut best_epoch = 0;
    let mut best_acc = f64::NEG_INFINITY;
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_for_epoch(epoch)?;
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let batches = match cfg.batching {
            Batching::Segments => segment_batches(&order, cfg.batch_size)?,
            Batching::Clusters => {
                let lengths: Vec<usize> = order.iter().map(|&i| examples[i].len()).collect();
                let mut b: Vec<Vec<usize>> = cluster_batches(&lengths, cfg.batch_size)?
                    .into_iter()
                    .map(|b| b.into_iter().map(|j| order[j]).collect())
                    .collect();
                b.shuffle(&mut shuffle_rng);
                b
            }
        };
        let mut total = 0.0;
        for idx in &batches {
            let batch: Vec<&TrainExample> = idx.iter().map(|&i| &examples[i]).collect();
            total += match cfg.regime {
                Regime::Single => {
                    train_step_single(&mut bundle.model, &batch, opt.as_mut(), lr, cfg, &mut dropout_rng)?
                }
                Regime::TwoOpt => {
                    train_step_two_opt(
                        &mut bundle.model,
                        &batch,
                        opt_bw.as_mut(),
                        opt.as_mut(),
                        lr,
                        lr,
                        cfg,
                        &mut dropout_rng,
                    )?
                    .1
                }
            };
        }
        let (report, dev_loss) = dev_set.evaluate(&bundle)?;
        let entry = EpochLog {
            epoch: epoch + 1,
            lr,
            train_loss: total / batches.len() as f64,
            dev: report,
            dev_loss,
        };
        on_epoch(&entry);
        if entry.dev.accuracy > best_acc {
            best_acc = entry.dev.accuracy;
            best = bundle.clone();
            best_epoch = epoch + 1;
        }
        log.push(entry);
    }
    Ok(FitResult {
        best,
        best_epoch,
        last: bundle,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_difference_check, Tensor};
    use crate::data::{Sentence, WORD_UNK};
    use crate::model::VocabSizes;
    use crate::oracle;
    use crate::training::Adam;
    use crate::training::SgdMomentum;

    const SIZES: VocabSizes = VocabSizes {
        words: 7,
        chars: 6,
        labels: 5,
    };

    fn tiny(fw_only: bool) -> ArchConfig {
        ArchConfig {
            word_emb: 4,
            char_emb: 4,
            label_emb: 4,
            char_layer: 6,
            word_layer: 6,
            decoder_hidden: 6,
            fw_only,
        }
    }

    fn example() -> TrainExample {
        TrainExample::whole(
            EncodedSentence {
                words: vec![3, 5, WORD_UNK],
                chars: vec![vec![2, 3], vec![4], vec![5, 1, 2]],
            },
            vec![1, 4, 0],
        )
    }

    fn quiet(cfg: TrainConfig) -> TrainConfig {
        TrainConfig {
            dropout: 0.0,
            clip_norm: None,
            ..cfg
        }
    }

    #[test]
    fn lr_schedule() {
        assert_eq!(lr_at_epoch(0.125, 0, 40).unwrap(), 0.125);
        assert_eq!(lr_at_epoch(0.125, 20, 40).unwrap(), 0.0625);
        assert_eq!(lr_at_epoch(0.125, 40, 40).unwrap(), 0.0);
        assert!(lr_at_epoch(0.125, 0, 0).is_err());
        assert!(lr_at_epoch(0.125, 41, 40).is_err());
        assert_eq!(TrainConfig::wsj().lr_for_epoch(30).unwrap(), 0.001);
    }

    #[test]
    fn loss_matches_oracle() {
        for fw_only in [false, true] {
            let m = Seq2Biseq::new(tiny(fw_only), SIZES, 17).unwrap();
            let ex = example();
            let (loss, _) = loss_and_gradients(
                m.params(),
                m.layout(),
                &[&ex],
                Objective::Joint,
                1e-3,
                &mut Phase::Eval,
            )
            .unwrap();
            let expected =
                oracle::sentence_loss(m.params(), &ex.sentence.words, &ex.sentence.chars, &ex.gold, 5, 1e-3);
            assert!((loss - expected).abs() < 1e-10, "{loss} vs {expected}");
        }
    }

    #[test]
    fn full_model_gradient_check() {
        for fw_only in [false, true] {
            let m = Seq2Biseq::new(tiny(fw_only), SIZES, 3).unwrap();
            let ex = example();
            let f = |s: &crate::autodiff::ParamStore| {
                loss_and_gradients(s, m.layout(), &[&ex], Objective::Joint, 1e-3, &mut Phase::Eval)
                    .map(|(l, _)| l)
            };
            let (_, grads) = loss_and_gradients(
                m.params(),
                m.layout(),
                &[&ex],
                Objective::Joint,
                1e-3,
                &mut Phase::Eval,
            )
            .unwrap();
            let report = finite_difference_check(m.params(), &grads, None, 1e-5, 1e-4, f).unwrap();
            assert_eq!(report.checked, m.param_count());
            assert!(report.passed(), "{report:?}");
        }
    }

    fn certain_model() -> Seq2Biseq {
        let mut m = Seq2Biseq::new(tiny(false), SIZES, 2).unwrap();
        m.zero_params();
        let mut bias = vec![0.0; 5];
        bias[2] = 1000.0;
        m.set_output_bias(&bias).unwrap();
        let b = m.layout().bw.unwrap().out.b;
        *m.params_mut().get_mut(b) = Tensor::vector(&bias);
        m
    }

    #[test]
    fn certain_gold_gives_zero_loss_and_gradients() {
        let m = certain_model();
        let ex = TrainExample::whole(example().sentence, vec![2, 2, 2]);
        let (loss, grads) =
            loss_and_gradients(m.params(), m.layout(), &[&ex], Objective::Joint, 0.0, &mut Phase::Eval)
                .unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grads.global_norm(), 0.0);
        let mut m2 = m.clone();
        let cfg = quiet(TrainConfig {
            lambda: 0.0,
            ..TrainConfig::media()
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l = train_step_single(&mut m2, &[&ex], &mut SgdMomentum::new(0.9), 0.1, &cfg, &mut rng).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(m2.params(), m.params());
    }

    #[test]
    fn one_small_step_descends() {
        let ex = example();
        let cfg = quiet(TrainConfig::media());
        let mut m = Seq2Biseq::new(tiny(false), SIZES, 8).unwrap();
        let before = loss_and_gradients(m.params(), m.layout(), &[&ex], Objective::Joint, cfg.lambda, &mut Phase::Eval)
            .unwrap()
            .0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        train_step_single(&mut m, &[&ex], &mut SgdMomentum::new(0.9), 0.01, &cfg, &mut rng).unwrap();
        let after = loss_and_gradients(m.params(), m.layout(), &[&ex], Objective::Joint, cfg.lambda, &mut Phase::Eval)
            .unwrap()
            .0;
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn steps_are_deterministic() {
        let ex = example();
        let cfg = TrainConfig::media();
        let run = || {
            let mut m = Seq2Biseq::new(tiny(false), SIZES, 8).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let mut opt = Adam::new();
            let losses: Vec<f64> = (0..3)
                .map(|_| train_step_single(&mut m, &[&ex], &mut opt, 0.01, &cfg, &mut rng).unwrap())
                .collect();
            (losses, m)
        };
        let (la, ma) = run();
        let (lb, mb) = run();
        assert_eq!(la.iter().map(|l| l.to_bits()).collect::<Vec<_>>(), lb.iter().map(|l| l.to_bits()).collect::<Vec<_>>());
        assert_eq!(ma.params(), mb.params());
    }

    fn changed(a: &Seq2Biseq, b: &Seq2Biseq) -> Vec<String> {
        a.params()
            .iter()
            .zip(b.params().iter())
            .filter(|((_, _, x), (_, _, y))| x != y)
            .map(|((_, n, _), _)| n.to_string())
            .collect()
    }

    #[test]
    fn two_opt_with_frozen_global_touches_backward_path_only() {
        let ex = example();
        let cfg = TrainConfig::media();
        let m0 = Seq2Biseq::new(tiny(false), SIZES, 8).unwrap();
        let mut m = m0.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        train_step_two_opt(
            &mut m,
            &[&ex],
            &mut SgdMomentum::new(0.9),
            &mut SgdMomentum::new(0.9),
            0.1,
            0.0,
            &cfg,
            &mut rng,
        )
        .unwrap();
        let names = changed(&m0, &m);
        assert!(names.iter().all(|n| !n.starts_with("dec_fw")), "{names:?}");
        assert!(names.iter().any(|n| n.starts_with("dec_bw")));
        assert!(names.iter().any(|n| n.starts_with("word_gru")));
        assert!(names.iter().any(|n| n == "emb.char"));
    }

    #[test]
    fn two_opt_with_frozen_backward_equals_single() {
        let ex = example();
        let cfg = quiet(TrainConfig::media());
        let m0 = Seq2Biseq::new(tiny(false), SIZES, 8).unwrap();
        let mut a = m0.clone();
        let mut b = m0.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (_, la) = train_step_two_opt(
            &mut a,
            &[&ex],
            &mut SgdMomentum::new(0.9),
            &mut SgdMomentum::new(0.9),
            0.0,
            0.05,
            &cfg,
            &mut rng,
        )
        .unwrap();
        let lb = train_step_single(&mut b, &[&ex], &mut SgdMomentum::new(0.9), 0.05, &cfg, &mut rng).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn two_opt_rejects_ablation() {
        let mut m = Seq2Biseq::new(tiny(true), SIZES, 8).unwrap();
        let ex = example();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = TrainConfig::media();
        assert!(train_step_two_opt(&mut m, &[&ex], &mut Adam::new(), &mut Adam::new(), 0.1, 0.1, &cfg, &mut rng).is_err());
    }

    #[test]
    fn padding_is_masked() {
        let m = Seq2Biseq::new(tiny(false), SIZES, 8).unwrap();
        let ex = example();
        let padded = TrainExample::segment(&ex.sentence, &ex.gold, 0..5, 5);
        let mut unmasked = padded.clone();
        unmasked.mask = vec![true; 5];
        unmasked.gold[3..].fill(0);
        let mut relabelled = padded.clone();
        relabelled.gold[3..].fill(0);
        let loss = |e: &TrainExample| {
            loss_and_gradients(m.params(), m.layout(), &[e], Objective::Joint, 0.0, &mut Phase::Eval)
                .unwrap()
                .0
        };
        assert!(loss(&relabelled) < loss(&unmasked));
        assert!(loss(&padded).is_finite());
        let mut all_pad = padded.clone();
        all_pad.mask = vec![false; 5];
        assert!(loss_and_gradients(m.params(), m.layout(), &[&all_pad], Objective::Joint, 0.0, &mut Phase::Eval).is_err());
    }

    fn toy_corpus() -> Corpus {
        let words = ["le", "chat", "dort", "un", "chien", "mange"];
        let labels = ["B-D", "B-N", "B-V", "B-D", "B-N", "B-V"];
        let sentences = (0..6)
            .map(|i| {
                let idx = [i % 6, (i + 1) % 6, (i + 2) % 6];
                Sentence::new(
                    idx.iter().map(|&j| words[j].to_string()).collect(),
                    idx.iter().map(|&j| labels[j].to_string()).collect(),
                )
            })
            .collect();
        Corpus::new(sentences)
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::media()
        };
        let c = toy_corpus();
        let r = fit(&cfg, &tiny(false), &c, &c, &mut |_| {}).unwrap();
        assert!(r.log.is_empty());
        assert_eq!(r.best_epoch, 0);
        let fresh = ModelBundle::init(build_vocab(&c, 1), tiny(false), cfg.seed).unwrap();
        assert_eq!(r.best.model.params(), fresh.model.params());
    }

    #[test]
    fn fit_logs_every_epoch_and_keeps_the_best() {
        let c = toy_corpus();
        for batching in [Batching::Segments, Batching::Clusters] {
            let cfg = TrainConfig {
                epochs: 4,
                segment_len: 2,
                batch_size: 3,
                batching,
                ..TrainConfig::media()
            };
            let mut seen = 0;
            let r = fit(&cfg, &tiny(false), &c, &c, &mut |_| seen += 1).unwrap();
            assert_eq!(seen, 4);
            assert_eq!(r.log.len(), 4);
            let best = r.log.iter().map(|l| l.dev.accuracy).fold(f64::MIN, f64::max);
            assert_eq!(r.log[r.best_epoch - 1].dev.accuracy, best);
            assert!(best >= r.log.last().unwrap().dev.accuracy);
            assert_eq!(r.log[0].tsv_line().split('\t').count(), 6);
            let (report, _) = evaluate_corpus(&r.best, &c).unwrap();
            assert_eq!(report.accuracy, best);
        }
    }
}
