//! Corpus ingestion, vocabularies, and model persistence.

mod bundle;
mod conll;
mod vocab;

pub use bundle::{load_model, save_model, ModelBundle, FORMAT_VERSION, MAGIC};
pub use conll::{
    parse_conll, parse_conll_str, read_blocks, write_conll, ColumnPolicy, Corpus, Sentence,
};
pub use vocab::{
    build_vocab, encode_sentence, EncodedSentence, Symbols, Vocabulary, BOS_LABEL, CHAR_PAD,
    CHAR_UNK, EOS_LABEL, WORD_EOS, WORD_PAD, WORD_UNK,
};
