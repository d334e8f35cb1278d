//! Architecture hyperparameters and the parameter layout of the network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::layers::{Affine, BiGru, EmbeddingTable, Ffnn, GruParams};

/// Layer sizes of the network.
///
/// `char_layer` and `word_layer` are the total output sizes of bidirectional
/// layers (half per direction). `decoder_hidden` is the size of each
/// unidirectional label decoder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchConfig {
    pub word_emb: usize,
    pub char_emb: usize,
    pub label_emb: usize,
    pub char_layer: usize,
    pub word_layer: usize,
    pub decoder_hidden: usize,
    /// Drop the backward decoder: the output layer sees only `[→h, h_w]`.
    pub fw_only: bool,
}

impl ArchConfig {
    /// Layer sizes tuned for the French spoken-dialogue (MEDIA) task.
    pub fn media() -> Self {
        ArchConfig {
            word_emb: 200,
            char_emb: 30,
            label_emb: 150,
            char_layer: 100,
            word_layer: 300,
            decoder_hidden: 300,
            fw_only: false,
        }
    }

    /// Layer sizes for POS tagging on the Penn Treebank WSJ split.
    pub fn wsj() -> Self {
        ArchConfig {
            word_emb: 300,
            word_layer: 150,
            decoder_hidden: 150,
            ..Self::media()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("word_emb", self.word_emb),
            ("char_emb", self.char_emb),
            ("label_emb", self.label_emb),
            ("char_layer", self.char_layer),
            ("word_layer", self.word_layer),
            ("decoder_hidden", self.decoder_hidden),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, d)| *d == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        for (name, d) in [("char_layer", self.char_layer), ("word_layer", self.word_layer)] {
            if d % 2 != 0 {
                return Err(Error::Config(format!(
                    "{name} is a bidirectional size and must be even, got {d}"
                )));
            }
        }
        Ok(())
    }
}

/// Row counts of the embedding tables and number of output labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VocabSizes {
    /// Word-table rows, reserved symbols included.
    pub words: usize,
    /// Character-table rows, reserved symbols included.
    pub chars: usize,
    /// Number of real output labels `K`. The label table has `K + 2` rows:
    /// row `K` is the end-of-sentence label and row `K + 1` the begin label.
    pub labels: usize,
}

/// One label decoder: a GRU over `[h_w, E_l(prev)]` and its output layer.
#[derive(Clone, Copy, Debug)]
pub struct DecoderParams {
    pub gru: GruParams,
    pub out: Affine,
}

/// Handles to every parameter of the network.
#[derive(Clone, Copy, Debug)]
pub struct Layout {
    pub word_emb: EmbeddingTable,
    pub char_emb: EmbeddingTable,
    pub label_emb: EmbeddingTable,
    pub char_gru: BiGru,
    pub char_ffnn: Ffnn,
    pub word_gru: BiGru,
    /// Absent in the forward-only ablation.
    pub bw: Option<DecoderParams>,
    pub fw: DecoderParams,
    pub num_labels: usize,
    pub fw_only: bool,
}

impl Layout {
    /// Registers all parameters in a fixed order.
    pub fn register(
        store: &mut ParamStore,
        arch: &ArchConfig,
        sizes: VocabSizes,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        arch.validate()?;
        if sizes.labels == 0 || sizes.words == 0 || sizes.chars == 0 {
            return Err(Error::Config(format!("empty vocabulary: {sizes:?}")));
        }
        let k = sizes.labels;
        let word_emb = EmbeddingTable::register(store, "emb.word", sizes.words, arch.word_emb, rng);
        let char_emb = EmbeddingTable::register(store, "emb.char", sizes.chars, arch.char_emb, rng);
        let label_emb = EmbeddingTable::register(store, "emb.label", k + 2, arch.label_emb, rng);
        let char_gru = BiGru::register(store, "char_gru", arch.char_emb, arch.char_layer, rng);
        let char_ffnn = Ffnn::register(
            store,
            "char_ffnn",
            arch.char_layer,
            arch.char_layer,
            arch.char_layer,
            rng,
        );
        let word_gru = BiGru::register(
            store,
            "word_gru",
            arch.word_emb + arch.char_layer,
            arch.word_layer,
            rng,
        );
        let dec_input = arch.word_layer + arch.label_emb;
        let bw = if arch.fw_only {
            None
        } else {
            Some(DecoderParams {
                gru: GruParams::register(store, "dec_bw.gru", dec_input, arch.decoder_hidden, rng),
                out: Affine::register(
                    store,
                    "dec_bw.out",
                    arch.word_layer + arch.decoder_hidden,
                    k,
                    rng,
                ),
            })
        };
        let fw_out_in = if arch.fw_only {
            arch.decoder_hidden + arch.word_layer
        } else {
            2 * arch.decoder_hidden + arch.word_layer
        };
        let fw = DecoderParams {
            gru: GruParams::register(store, "dec_fw.gru", dec_input, arch.decoder_hidden, rng),
            out: Affine::register(store, "dec_fw.out", fw_out_in, k, rng),
        };
        Ok(Layout {
            word_emb,
            char_emb,
            label_emb,
            char_gru,
            char_ffnn,
            word_gru,
            bw,
            fw,
            num_labels: k,
            fw_only: arch.fw_only,
        })
    }

    /// Label-table row fed to the backward decoder at the right edge.
    pub fn eos_label(&self) -> usize {
        self.num_labels
    }

    /// Label-table row fed to the forward decoder at the left edge.
    pub fn bos_label(&self) -> usize {
        self.num_labels + 1
    }
}

/// The network: architecture, vocabulary sizes, parameter layout and values.
#[derive(Clone, Debug)]
pub struct Seq2Biseq {
    arch: ArchConfig,
    sizes: VocabSizes,
    layout: Layout,
    params: ParamStore,
}

impl Seq2Biseq {
    /// Freshly initialized network. Identical seeds give identical weights.
    pub fn new(arch: ArchConfig, sizes: VocabSizes, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let layout = Layout::register(&mut params, &arch, sizes, &mut rng)?;
        Ok(Seq2Biseq {
            arch,
            sizes,
            layout,
            params,
        })
    }

    /// Wraps existing parameter values, checking names and shapes against the
    /// layout implied by `arch` and `sizes`.
    pub fn from_params(arch: ArchConfig, sizes: VocabSizes, params: ParamStore) -> Result<Self> {
        let mut expected = ParamStore::new();
        let layout = Layout::register(
            &mut expected,
            &arch,
            sizes,
            &mut ChaCha8Rng::seed_from_u64(0),
        )?;
        if expected.len() != params.len() {
            return Err(Error::Inconsistent(format!(
                "expected {} tensors, found {}",
                expected.len(),
                params.len()
            )));
        }
        for ((_, en, et), (_, pn, pt)) in expected.iter().zip(params.iter()) {
            if en != pn || et.shape() != pt.shape() {
                return Err(Error::Inconsistent(format!(
                    "expected tensor {en} {:?}, found {pn} {:?}",
                    et.shape(),
                    pt.shape()
                )));
            }
        }
        Ok(Seq2Biseq {
            arch,
            sizes,
            layout,
            params,
        })
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn sizes(&self) -> VocabSizes {
        self.sizes
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.params.num_scalars()
    }

    /// Sets every parameter to zero.
    pub fn zero_params(&mut self) {
        let ids: Vec<_> = self.params.ids().collect();
        for id in ids {
            self.params.get_mut(id).data_mut().fill(0.0);
        }
    }

    /// Overwrites the output bias of the forward decoder.
    pub fn set_output_bias(&mut self, bias: &[f64]) -> Result<()> {
        let b = self.params.get_mut(self.layout.fw.out.b);
        if b.len() != bias.len() {
            return Err(Error::LengthMismatch {
                what: "output bias",
                expected: b.len(),
                got: bias.len(),
            });
        }
        *b = Tensor::vector(bias);
        Ok(())
    }
}

/// Parameter count of a network without keeping its weights around.
pub fn count_params(arch: &ArchConfig, sizes: VocabSizes) -> Result<usize> {
    Ok(Seq2Biseq::new(arch.clone(), sizes, 0)?.param_count())
}
