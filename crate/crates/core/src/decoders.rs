//! Backward and forward label decoders, greedy prediction, and tagging.

use crate::autodiff::{Graph, Var};
use crate::data::{encode_sentence, EncodedSentence, ModelBundle};
use crate::encoder::encode_lexical;
use crate::error::{Error, Result};
use crate::layers::{dropout, EmbeddingTable, Phase};
use crate::model::{DecoderParams, Layout, Seq2Biseq};

/// Where the previous-label input of a decoder comes from.
#[derive(Clone, Copy, Debug)]
pub enum LabelSource<'a> {
    /// Teacher forcing with gold label ids (one per position).
    Gold(&'a [usize]),
    /// The decoder's own previous prediction.
    Predicted,
}

/// One decoder position.
#[derive(Clone, Copy, Debug)]
pub struct DecoderStep {
    /// Recurrent state carried to the next step.
    pub hidden: Var,
    /// `hidden` as seen by the output layers (dropout-masked in training).
    pub exposed: Var,
    pub logits: Var,
    pub logp: Var,
    /// Greedy prediction, ties broken towards the lowest index.
    pub label: usize,
}

/// Index of the largest value, the lowest index among ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn recur(
    g: &mut Graph,
    dec: &DecoderParams,
    labels: &EmbeddingTable,
    h_w: Var,
    prev_label: usize,
    prev_hidden: Var,
) -> Result<Var> {
    let e = labels.lookup(g, prev_label)?;
    let x = g.concat(&[h_w, e])?;
    dec.gru.step(g, x, prev_hidden)
}

fn emit(g: &mut Graph, dec: &DecoderParams, input: Var, hidden: Var, exposed: Var) -> Result<DecoderStep> {
    let logits = dec.out.forward(g, input)?;
    let logp = g.log_softmax(logits)?;
    let label = argmax(g.value(logp).data());
    Ok(DecoderStep {
        hidden,
        exposed,
        logits,
        logp,
        label,
    })
}

/// `←h_i = GRU(concat(h_w_i, E_l(prev)), ←h_{i+1})`, then
/// `o_bw = W_bw [h_w_i, ←h_i] + b_bw`.
pub fn backward_decoder_step(
    g: &mut Graph,
    layout: &Layout,
    h_w: Var,
    prev_label: usize,
    prev_hidden: Var,
    phase: &mut Phase,
) -> Result<DecoderStep> {
    let dec = layout.bw.as_ref().ok_or(Error::MissingBackwardStates)?;
    let hidden = recur(g, dec, &layout.label_emb, h_w, prev_label, prev_hidden)?;
    let exposed = dropout(g, hidden, phase)?;
    let input = g.concat(&[h_w, exposed])?;
    emit(g, dec, input, hidden, exposed)
}

/// `→h_i = GRU(concat(h_w_i, E_l(prev)), →h_{i−1})`, then
/// `o = W_o [→h_i, h_w_i, ←h_i] + b_o` (without `←h_i` in the forward-only
/// ablation, where `backward` must be `None`).
pub fn forward_decoder_step(
    g: &mut Graph,
    layout: &Layout,
    h_w: Var,
    backward: Option<Var>,
    prev_label: usize,
    prev_hidden: Var,
    phase: &mut Phase,
) -> Result<DecoderStep> {
    let dec = &layout.fw;
    let hidden = recur(g, dec, &layout.label_emb, h_w, prev_label, prev_hidden)?;
    let exposed = dropout(g, hidden, phase)?;
    let input = match (layout.fw_only, backward) {
        (false, Some(bw)) => g.concat(&[exposed, h_w, bw])?,
        (false, None) => return Err(Error::MissingBackwardStates),
        (true, None) => g.concat(&[exposed, h_w])?,
        (true, Some(_)) => {
            return Err(Error::Config(
                "backward states given to a forward-only model".into(),
            ))
        }
    };
    emit(g, dec, input, hidden, exposed)
}

fn check_gold(source: LabelSource, n: usize) -> Result<()> {
    match source {
        LabelSource::Gold(gold) if gold.len() != n => Err(Error::LengthMismatch {
            what: "gold labels",
            expected: n,
            got: gold.len(),
        }),
        _ => Ok(()),
    }
}

/// Runs the backward decoder over positions `N−1 … 0`, starting from the
/// end-of-sentence label and a zero state. The result is indexed by position.
pub fn run_backward_decoder(
    g: &mut Graph,
    layout: &Layout,
    lex: &[Var],
    source: LabelSource,
    phase: &mut Phase,
) -> Result<Vec<DecoderStep>> {
    if lex.is_empty() {
        return Err(Error::Empty("run_backward_decoder"));
    }
    check_gold(source, lex.len())?;
    let dec = layout.bw.as_ref().ok_or(Error::MissingBackwardStates)?;
    let mut hidden = g.input(crate::autodiff::Tensor::zeros(&[dec.gru.hidden]))?;
    let mut prev = layout.eos_label();
    let mut steps = Vec::with_capacity(lex.len());
    for i in (0..lex.len()).rev() {
        let step = backward_decoder_step(g, layout, lex[i], prev, hidden, phase)?;
        hidden = step.hidden;
        prev = match source {
            LabelSource::Gold(gold) => gold[i],
            LabelSource::Predicted => step.label,
        };
        steps.push(step);
    }
    steps.reverse();
    Ok(steps)
}

/// Runs the forward decoder over positions `0 … N−1`, starting from the begin
/// label and a zero state, reading the backward state aligned with each
/// position.
pub fn run_forward_decoder(
    g: &mut Graph,
    layout: &Layout,
    lex: &[Var],
    backward: Option<&[DecoderStep]>,
    source: LabelSource,
    phase: &mut Phase,
) -> Result<Vec<DecoderStep>> {
    if lex.is_empty() {
        return Err(Error::Empty("run_forward_decoder"));
    }
    check_gold(source, lex.len())?;
    if let Some(bw) = backward {
        if bw.len() != lex.len() {
            return Err(Error::LengthMismatch {
                what: "backward states",
                expected: lex.len(),
                got: bw.len(),
            });
        }
    }
    let mut hidden = g.input(crate::autodiff::Tensor::zeros(&[layout.fw.gru.hidden]))?;
    let mut prev = layout.bos_label();
    let mut steps = Vec::with_capacity(lex.len());
    for (i, &h_w) in lex.iter().enumerate() {
        let bw = backward.map(|b| b[i].exposed);
        let step = forward_decoder_step(g, layout, h_w, bw, prev, hidden, phase)?;
        hidden = step.hidden;
        prev = match source {
            LabelSource::Gold(gold) => gold[i],
            LabelSource::Predicted => step.label,
        };
        steps.push(step);
    }
    Ok(steps)
}

/// Both decoder passes over one encoded sentence. The backward result is empty
/// for a forward-only model.
pub fn decode(
    g: &mut Graph,
    layout: &Layout,
    sentence: &EncodedSentence,
    source: LabelSource,
    phase: &mut Phase,
) -> Result<(Vec<DecoderStep>, Vec<DecoderStep>)> {
    let lex = encode_lexical(g, layout, sentence, phase)?;
    let bw = if layout.fw_only {
        Vec::new()
    } else {
        run_backward_decoder(g, layout, &lex, source, phase)?
    };
    let backward = (!layout.fw_only).then_some(bw.as_slice());
    let fw = run_forward_decoder(g, layout, &lex, backward, source, phase)?;
    Ok((bw, fw))
}

impl Seq2Biseq {
    /// Greedy label ids for an encoded sentence, dropout off.
    pub fn predict(&self, sentence: &EncodedSentence) -> Result<Vec<usize>> {
        if sentence.is_empty() {
            return Ok(Vec::new());
        }
        let mut g = Graph::new(self.params());
        let (_, fw) = decode(
            &mut g,
            self.layout(),
            sentence,
            LabelSource::Predicted,
            &mut Phase::Eval,
        )?;
        Ok(fw.iter().map(|s| s.label).collect())
    }
}

/// Tags raw tokens with the forward decoder's greedy labels.
pub fn tag_sentence(bundle: &ModelBundle, tokens: &[String]) -> Result<Vec<String>> {
    let enc = encode_sentence(&bundle.vocab, tokens);
    let ids = bundle.model.predict(&enc)?;
    ids.into_iter()
        .map(|id| {
            bundle
                .vocab
                .labels
                .name(id)
                .map(str::to_string)
                .ok_or_else(|| Error::Inconsistent(format!("label id {id} outside the vocabulary")))
        })
        .collect()
}
