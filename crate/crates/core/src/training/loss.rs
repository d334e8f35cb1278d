use crate::autodiff::{Gradients, Graph, ParamStore, Var};
use crate::decoders::{decode, run_backward_decoder, LabelSource};
use crate::encoder::encode_lexical;
use crate::error::{Error, Result};
use crate::layers::Phase;
use crate::model::Layout;

use super::batching::TrainExample;

fn check_lengths(what: &'static str, n: usize, got: usize) -> Result<()> {
    if n != got {
        return Err(Error::LengthMismatch {
            what,
            expected: n,
            got,
        });
    }
    Ok(())
}

/// `Σ_i Σ_d w_d · (−log p_d(e_i))` over unmasked positions `i`, one
/// `(log-probabilities, weight)` pair per decoder `d`.
fn nll_sum(
    g: &mut Graph,
    decoders: &[(&[Var], f64)],
    gold: &[usize],
    mask: Option<&[bool]>,
) -> Result<Var> {
    let mut picks = Vec::new();
    for (i, &label) in gold.iter().enumerate() {
        if mask.is_some_and(|m| !m[i]) {
            continue;
        }
        for &(logp, w) in decoders {
            let nll = g.nll_pick(logp[i], label)?;
            picks.push(if w == 1.0 { nll } else { g.scale(nll, w)? });
        }
    }
    if picks.is_empty() {
        return Err(Error::Empty("loss positions"));
    }
    g.add_n(&picks)
}

/// Data term of the joint objective for one sequence:
/// `−Σ_i ½(log p_fw(e_i) + log p_bw(e_i))`, summed over unmasked positions.
/// With no backward log-probabilities (forward-only model) the forward term
/// gets full weight.
pub fn sequence_nll(
    g: &mut Graph,
    fw_logp: &[Var],
    bw_logp: &[Var],
    gold: &[usize],
    mask: Option<&[bool]>,
) -> Result<Var> {
    check_lengths("forward log-probabilities", gold.len(), fw_logp.len())?;
    if let Some(m) = mask {
        check_lengths("loss mask", gold.len(), m.len())?;
    }
    if bw_logp.is_empty() {
        return nll_sum(g, &[(fw_logp, 1.0)], gold, mask);
    }
    check_lengths("backward log-probabilities", gold.len(), bw_logp.len())?;
    nll_sum(g, &[(fw_logp, 0.5), (bw_logp, 0.5)], gold, mask)
}

/// `λ/2 · ‖Θ‖²` over the parameters the graph has touched so far, or `None`
/// when `λ = 0`.
pub fn l2_penalty(g: &mut Graph, lambda: f64) -> Result<Option<Var>> {
    if lambda < 0.0 {
        return Err(Error::Config(format!("negative L2 coefficient {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(None);
    }
    let params = g.used_params();
    if params.is_empty() {
        return Ok(None);
    }
    let mut norms = Vec::with_capacity(params.len());
    for id in params {
        let v = g.param(id);
        norms.push(g.squared_norm(v)?);
    }
    let total = g.add_n(&norms)?;
    Ok(Some(g.scale(total, 0.5 * lambda)?))
}

fn with_penalty(g: &mut Graph, data: Var, lambda: f64) -> Result<Var> {
    match l2_penalty(g, lambda)? {
        Some(p) => g.add(data, p),
        None => Ok(data),
    }
}

/// Joint loss of one sequence including the L2 term.
pub fn sequence_loss(
    g: &mut Graph,
    fw_logp: &[Var],
    bw_logp: &[Var],
    gold: &[usize],
    mask: Option<&[bool]>,
    lambda: f64,
) -> Result<Var> {
    let data = sequence_nll(g, fw_logp, bw_logp, gold, mask)?;
    with_penalty(g, data, lambda)
}

/// `−Σ_i log p_bw(e_i) + λ/2·‖Θ‖²`, the backward term at full weight.
pub fn backward_only_loss(
    g: &mut Graph,
    bw_logp: &[Var],
    gold: &[usize],
    mask: Option<&[bool]>,
    lambda: f64,
) -> Result<Var> {
    check_lengths("backward log-probabilities", gold.len(), bw_logp.len())?;
    if let Some(m) = mask {
        check_lengths("loss mask", gold.len(), m.len())?;
    }
    let data = nll_sum(g, &[(bw_logp, 1.0)], gold, mask)?;
    with_penalty(g, data, lambda)
}

/// Which loss a training pass optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Both decoders, ½-weighted (forward only in the ablation).
    Joint,
    /// Encoder and backward decoder only.
    BackwardOnly,
}

/// Builds the batch loss on `g`: the mean over examples of each sequence's
/// data term (gold labels fed to both decoders), plus the L2 term once.
pub fn batch_loss(
    g: &mut Graph,
    layout: &Layout,
    batch: &[&TrainExample],
    objective: Objective,
    lambda: f64,
    phase: &mut Phase,
) -> Result<Var> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut terms = Vec::with_capacity(batch.len());
    for ex in batch {
        let source = LabelSource::Gold(&ex.gold);
        let mask = Some(ex.mask.as_slice());
        let data = match objective {
            Objective::Joint => {
                let (bw, fw) = decode(g, layout, &ex.sentence, source, phase)?;
                let fw: Vec<Var> = fw.iter().map(|s| s.logp).collect();
                let bw: Vec<Var> = bw.iter().map(|s| s.logp).collect();
                sequence_nll(g, &fw, &bw, &ex.gold, mask)?
            }
            Objective::BackwardOnly => {
                let lex = encode_lexical(g, layout, &ex.sentence, phase)?;
                let bw = run_backward_decoder(g, layout, &lex, source, phase)?;
                let bw: Vec<Var> = bw.iter().map(|s| s.logp).collect();
                nll_sum(g, &[(&bw, 1.0)], &ex.gold, mask)?
            }
        };
        terms.push(data);
    }
    let total = g.add_n(&terms)?;
    let mean = g.scale(total, 1.0 / batch.len() as f64)?;
    with_penalty(g, mean, lambda)
}

/// Value and parameter gradients of [`batch_loss`] under `store`.
pub fn loss_and_gradients(
    store: &ParamStore,
    layout: &Layout,
    batch: &[&TrainExample],
    objective: Objective,
    lambda: f64,
    phase: &mut Phase,
) -> Result<(f64, Gradients)> {
    let mut g = Graph::new(store);
    let loss = batch_loss(&mut g, layout, batch, objective, lambda, phase)?;
    let value = g.value(loss).item();
    if !value.is_finite() {
        return Err(Error::NonFinite { op: "loss" });
    }
    Ok((value, g.backward(loss)?))
}
