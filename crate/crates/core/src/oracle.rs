//! Plain-`f64` re-implementation of the network, read straight from parameter
//! names, used to cross-check the graph-based code in unit tests.

use crate::autodiff::ParamStore;

pub fn get<'a>(s: &'a ParamStore, name: &str) -> &'a [f64] {
    s.get(s.id(name).unwrap_or_else(|| panic!("no parameter {name}")))
        .data()
}

fn rows(s: &ParamStore, name: &str) -> usize {
    s.get(s.id(name).unwrap()).shape()[0]
}

pub fn mv(s: &ParamStore, name: &str, x: &[f64]) -> Vec<f64> {
    let w = get(s, name);
    let m = rows(s, name);
    let n = w.len() / m;
    assert_eq!(n, x.len(), "{name}");
    (0..m)
        .map(|i| (0..n).map(|j| w[i * n + j] * x[j]).sum())
        .collect()
}

pub fn row(s: &ParamStore, name: &str, i: usize) -> Vec<f64> {
    let w = get(s, name);
    let n = w.len() / rows(s, name);
    w[i * n..(i + 1) * n].to_vec()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn gru(s: &ParamStore, p: &str, x: &[f64], h: &[f64]) -> Vec<f64> {
    let pre = |gate: &str, hh: &[f64]| -> Vec<f64> {
        let a = mv(s, &format!("{p}.w_{gate}"), x);
        let b = mv(s, &format!("{p}.u_{gate}"), hh);
        let c = get(s, &format!("{p}.b_{gate}"));
        (0..a.len()).map(|i| a[i] + b[i] + c[i]).collect()
    };
    let z: Vec<f64> = pre("z", h).into_iter().map(sig).collect();
    let r: Vec<f64> = pre("r", h).into_iter().map(sig).collect();
    let rh: Vec<f64> = r.iter().zip(h).map(|(a, b)| a * b).collect();
    let cand: Vec<f64> = pre("h", &rh).into_iter().map(f64::tanh).collect();
    (0..h.len())
        .map(|i| (1.0 - z[i]) * h[i] + z[i] * cand[i])
        .collect()
}

pub fn bigru(s: &ParamStore, p: &str, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let hid = get(s, &format!("{p}.fwd.b_z")).len();
    let n = seq.len();
    let mut fw = vec![Vec::new(); n];
    let mut h = vec![0.0; hid];
    for i in 0..n {
        h = gru(s, &format!("{p}.fwd"), &seq[i], &h);
        fw[i] = h.clone();
    }
    let mut bw = vec![Vec::new(); n];
    let mut h = vec![0.0; hid];
    for i in (0..n).rev() {
        h = gru(s, &format!("{p}.bwd"), &seq[i], &h);
        bw[i] = h.clone();
    }
    (0..n).map(|i| [fw[i].clone(), bw[i].clone()].concat()).collect()
}

pub fn affine(s: &ParamStore, p: &str, x: &[f64]) -> Vec<f64> {
    let b = get(s, &format!("{p}.b"));
    mv(s, &format!("{p}.w"), x)
        .into_iter()
        .zip(b)
        .map(|(a, b)| a + b)
        .collect()
}

pub fn chars(s: &ParamStore, ids: &[usize]) -> Vec<f64> {
    let seq: Vec<Vec<f64>> = ids.iter().map(|&c| row(s, "emb.char", c)).collect();
    let states = bigru(s, "char_gru", &seq);
    let mut sum = vec![0.0; states[0].len()];
    for st in &states {
        for (a, b) in sum.iter_mut().zip(st) {
            *a += b;
        }
    }
    let hidden: Vec<f64> = affine(s, "char_ffnn.hidden", &sum)
        .into_iter()
        .map(f64::tanh)
        .collect();
    affine(s, "char_ffnn.out", &hidden)
}

pub fn lexical(s: &ParamStore, words: &[usize], char_ids: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let seq: Vec<Vec<f64>> = words
        .iter()
        .zip(char_ids)
        .map(|(&w, c)| [row(s, "emb.word", w), chars(s, c)].concat())
        .collect();
    bigru(s, "word_gru", &seq)
}

pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

pub fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..x.len() {
        if x[i] > x[best] {
            best = i;
        }
    }
    best
}

/// Per-position log-probabilities of both decoders and the forward
/// predictions. `gold` selects teacher forcing; `None` feeds predictions.
pub struct Decoded {
    pub bw_logp: Vec<Vec<f64>>,
    pub fw_logp: Vec<Vec<f64>>,
    pub bw_hidden: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

pub fn decode(s: &ParamStore, hw: &[Vec<f64>], k: usize, gold: Option<&[usize]>) -> Decoded {
    let n = hw.len();
    let fw_only = s.id("dec_bw.out.w").is_none();
    let mut bw_logp = vec![Vec::new(); n];
    let mut bw_hidden = vec![Vec::new(); n];
    if !fw_only {
        let hid = get(s, "dec_bw.gru.b_z").len();
        let mut h = vec![0.0; hid];
        let mut prev = k;
        for i in (0..n).rev() {
            let x = [hw[i].clone(), row(s, "emb.label", prev)].concat();
            h = gru(s, "dec_bw.gru", &x, &h);
            let o = affine(s, "dec_bw.out", &[hw[i].clone(), h.clone()].concat());
            let lp = log_softmax(&o);
            prev = match gold {
                Some(g) => g[i],
                None => argmax(&lp),
            };
            bw_logp[i] = lp;
            bw_hidden[i] = h.clone();
        }
    }
    let hid = get(s, "dec_fw.gru.b_z").len();
    let mut h = vec![0.0; hid];
    let mut prev = k + 1;
    let mut fw_logp = vec![Vec::new(); n];
    let mut labels = vec![0; n];
    for i in 0..n {
        let x = [hw[i].clone(), row(s, "emb.label", prev)].concat();
        h = gru(s, "dec_fw.gru", &x, &h);
        let mut input = [h.clone(), hw[i].clone()].concat();
        if !fw_only {
            input.extend_from_slice(&bw_hidden[i]);
        }
        let lp = log_softmax(&affine(s, "dec_fw.out", &input));
        labels[i] = argmax(&lp);
        prev = match gold {
            Some(g) => g[i],
            None => labels[i],
        };
        fw_logp[i] = lp;
    }
    Decoded {
        bw_logp,
        fw_logp,
        bw_hidden,
        labels,
    }
}

/// Token-summed joint negative log-likelihood of one sentence plus the
/// `λ/2·‖Θ‖²` term over every stored parameter.
pub fn sentence_loss(
    s: &ParamStore,
    words: &[usize],
    char_ids: &[Vec<usize>],
    gold: &[usize],
    k: usize,
    lambda: f64,
) -> f64 {
    let hw = lexical(s, words, char_ids);
    let d = decode(s, &hw, k, Some(gold));
    let fw_only = d.bw_logp[0].is_empty();
    let mut data = 0.0;
    for i in 0..gold.len() {
        data -= if fw_only {
            d.fw_logp[i][gold[i]]
        } else {
            0.5 * (d.fw_logp[i][gold[i]] + d.bw_logp[i][gold[i]])
        };
    }
    let l2: f64 = s
        .iter()
        .map(|(_, _, t)| t.data().iter().map(|v| v * v).sum::<f64>())
        .sum();
    data + 0.5 * lambda * l2
}
