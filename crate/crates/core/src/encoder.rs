//! Character-level word representations and contextual lexical states.

use crate::autodiff::{Graph, Var};
use crate::data::EncodedSentence;
use crate::error::{Error, Result};
use crate::layers::{dropout, Phase};
use crate::model::Layout;

/// `h_c(w) = FFNN(Σ_j GRU_c(E_c(c_{w,j})))`, summing the bidirectional state
/// at every character position.
pub fn encode_characters(g: &mut Graph, layout: &Layout, chars: &[usize]) -> Result<Var> {
    if chars.is_empty() {
        return Err(Error::Empty("encode_characters"));
    }
    let embedded = chars
        .iter()
        .map(|&c| layout.char_emb.lookup(g, c))
        .collect::<Result<Vec<_>>>()?;
    let states = layout.char_gru.forward(g, &embedded)?;
    let summed = g.add_n(&states)?;
    layout.char_ffnn.forward(g, summed)
}

/// Lexical states `h_w`: a bidirectional GRU over `[E_w(w_i), h_c(w_i)]`.
///
/// In training, dropout is applied to each concatenated input and to each
/// output state.
pub fn encode_lexical(
    g: &mut Graph,
    layout: &Layout,
    sentence: &EncodedSentence,
    phase: &mut Phase,
) -> Result<Vec<Var>> {
    if sentence.is_empty() {
        return Err(Error::Empty("encode_lexical"));
    }
    let mut inputs = Vec::with_capacity(sentence.len());
    for (&w, chars) in sentence.words.iter().zip(&sentence.chars) {
        let word = layout.word_emb.lookup(g, w)?;
        let hc = encode_characters(g, layout, chars)?;
        let lex = g.concat(&[word, hc])?;
        inputs.push(dropout(g, lex, phase)?);
    }
    let states = layout.word_gru.forward(g, &inputs)?;
    states.into_iter().map(|h| dropout(g, h, phase)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::model::{ArchConfig, Seq2Biseq, VocabSizes};

    const SIZES: VocabSizes = VocabSizes {
        words: 6,
        chars: 5,
        labels: 3,
    };

    fn arch() -> ArchConfig {
        ArchConfig {
            word_emb: 2,
            char_emb: 2,
            label_emb: 2,
            char_layer: 2,
            word_layer: 2,
            decoder_hidden: 2,
            fw_only: false,
        }
    }

    fn values(g: &Graph, vs: &[Var]) -> Vec<Vec<f64>> {
        vs.iter().map(|&v| g.value(v).data().to_vec()).collect()
    }

    fn close(a: &[f64], b: &[f64]) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-12, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn three_char_word_matches_oracle() {
        let m = Seq2Biseq::new(arch(), SIZES, 21).unwrap();
        let mut g = Graph::new(m.params());
        let h = encode_characters(&mut g, m.layout(), &[4, 2, 3]).unwrap();
        close(g.value(h).data(), &oracle::chars(m.params(), &[4, 2, 3]));
    }

    #[test]
    fn single_char_word_matches_oracle() {
        let m = Seq2Biseq::new(arch(), SIZES, 22).unwrap();
        let mut g = Graph::new(m.params());
        let h = encode_characters(&mut g, m.layout(), &[1]).unwrap();
        close(g.value(h).data(), &oracle::chars(m.params(), &[1]));
    }

    #[test]
    fn two_token_sentence_matches_oracle() {
        let m = Seq2Biseq::new(arch(), SIZES, 23).unwrap();
        let s = EncodedSentence {
            words: vec![5, 2],
            chars: vec![vec![2, 3], vec![4]],
        };
        let mut g = Graph::new(m.params());
        let hw = encode_lexical(&mut g, m.layout(), &s, &mut Phase::Eval).unwrap();
        let expected = oracle::lexical(m.params(), &s.words, &s.chars);
        for (v, e) in hw.iter().zip(&expected) {
            close(g.value(*v).data(), e);
        }
    }

    #[test]
    fn zero_params_give_ffnn_bias() {
        let mut m = Seq2Biseq::new(arch(), SIZES, 1).unwrap();
        m.zero_params();
        let b2 = m.layout().char_ffnn.out.b;
        *m.params_mut().get_mut(b2) = crate::autodiff::Tensor::vector(&[0.5, -1.5]);
        let mut g = Graph::new(m.params());
        let h = encode_characters(&mut g, m.layout(), &[2, 3, 4]).unwrap();
        assert_eq!(g.value(h).data(), &[0.5, -1.5]);
    }

    #[test]
    fn zero_params_give_zero_states() {
        let mut m = Seq2Biseq::new(arch(), SIZES, 1).unwrap();
        m.zero_params();
        let mut g = Graph::new(m.params());
        let s = EncodedSentence {
            words: vec![3, 4],
            chars: vec![vec![2], vec![3, 4]],
        };
        let hw = encode_lexical(&mut g, m.layout(), &s, &mut Phase::Eval).unwrap();
        assert_eq!(values(&g, &hw), vec![vec![0.0; 2]; 2]);
    }

    #[test]
    fn equal_surface_forms_equal_char_vectors() {
        let m = Seq2Biseq::new(arch(), SIZES, 9).unwrap();
        let mut g = Graph::new(m.params());
        let a = encode_characters(&mut g, m.layout(), &[2, 3]).unwrap();
        let _ = encode_characters(&mut g, m.layout(), &[4]).unwrap();
        let b = encode_characters(&mut g, m.layout(), &[2, 3]).unwrap();
        assert_eq!(g.value(a), g.value(b));
    }

    #[test]
    fn last_token_reaches_first_state() {
        let m = Seq2Biseq::new(arch(), SIZES, 4).unwrap();
        let run = |last: usize| {
            let mut g = Graph::new(m.params());
            let s = EncodedSentence {
                words: vec![3, 4, last],
                chars: vec![vec![2], vec![3], vec![4]],
            };
            let hw = encode_lexical(&mut g, m.layout(), &s, &mut Phase::Eval).unwrap();
            g.value(hw[0]).data().to_vec()
        };
        assert_ne!(run(5), run(2));
    }

    #[test]
    fn empty_inputs_are_errors() {
        let m = Seq2Biseq::new(arch(), SIZES, 4).unwrap();
        let mut g = Graph::new(m.params());
        assert!(encode_characters(&mut g, m.layout(), &[]).is_err());
        let s = EncodedSentence {
            words: vec![],
            chars: vec![],
        };
        assert!(encode_lexical(&mut g, m.layout(), &s, &mut Phase::Eval).is_err());
    }
}
