use std::collections::HashMap;

use super::conll::Corpus;
use crate::model::VocabSizes;

/// Padding word, also the filler of short training segments.
pub const WORD_PAD: usize = 0;
pub const WORD_EOS: usize = 1;
pub const WORD_UNK: usize = 2;
pub const CHAR_PAD: usize = 0;
pub const CHAR_UNK: usize = 1;

/// Display names of the two extra label-table rows.
pub const EOS_LABEL: &str = "<EOS>";
pub const BOS_LABEL: &str = "<BOS>";

const WORD_RESERVED: [&str; 3] = ["<s>", "<EOS>", "<unk>"];
const CHAR_RESERVED: [&str; 2] = ["<s>", "<unk>"];

/// An ordered symbol table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Symbols {
    items: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Symbols {
    pub fn new() -> Self {
        Self::default()
    }

    /// Id of `s`, adding it at the end if it is new.
    pub fn intern(&mut self, s: &str) -> usize {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.items.len();
        self.items.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        id
    }

    pub fn id(&self, s: &str) -> Option<usize> {
        self.ids.get(s).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.items.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

impl FromIterator<String> for Symbols {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        let mut s = Symbols::new();
        for item in iter {
            s.intern(&item);
        }
        s
    }
}

/// Word, character and label tables.
///
/// Word ids 0, 1, 2 are `<s>`, `<EOS>`, `<unk>`; char ids 0, 1 are `<s>` and
/// `<unk>`. Labels hold only the real tag set `0..K`; the network adds the
/// end and begin label rows `K` and `K + 1` itself.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    pub words: Symbols,
    pub chars: Symbols,
    pub labels: Symbols,
}

impl Vocabulary {
    /// Tables holding only the reserved symbols.
    pub fn empty() -> Self {
        Vocabulary {
            words: WORD_RESERVED.iter().map(|s| s.to_string()).collect(),
            chars: CHAR_RESERVED.iter().map(|s| s.to_string()).collect(),
            labels: Symbols::new(),
        }
    }

    /// Rebuilds a vocabulary from stored tables, checking the reserved rows.
    pub fn from_tables(words: Vec<String>, chars: Vec<String>, labels: Vec<String>) -> Option<Self> {
        let reserved_ok = |items: &[String], reserved: &[&str]| {
            items.len() >= reserved.len() && items.iter().zip(reserved).all(|(a, b)| a == b)
        };
        if !reserved_ok(&words, &WORD_RESERVED) || !reserved_ok(&chars, &CHAR_RESERVED) {
            return None;
        }
        let (nw, nc, nl) = (words.len(), chars.len(), labels.len());
        let v = Vocabulary {
            words: words.into_iter().collect(),
            chars: chars.into_iter().collect(),
            labels: labels.into_iter().collect(),
        };
        // duplicates collapse in `collect`, which would break the bijection
        (v.words.len() == nw && v.chars.len() == nc && v.labels.len() == nl).then_some(v)
    }

    pub fn sizes(&self) -> VocabSizes {
        VocabSizes {
            words: self.words.len(),
            chars: self.chars.len(),
            labels: self.labels.len(),
        }
    }

    pub fn word_id(&self, w: &str) -> usize {
        self.words.id(w).unwrap_or(WORD_UNK)
    }

    pub fn char_id(&self, c: char) -> usize {
        let mut buf = [0u8; 4];
        self.chars.id(c.encode_utf8(&mut buf)).unwrap_or(CHAR_UNK)
    }

    pub fn label_id(&self, l: &str) -> Option<usize> {
        self.labels.id(l)
    }

    pub fn label_name(&self, id: usize) -> &str {
        let k = self.labels.len();
        match self.labels.name(id) {
            Some(name) => name,
            None if id == k => EOS_LABEL,
            None => BOS_LABEL,
        }
    }
}

/// Builds tables from a training corpus. Words seen fewer than `min_count`
/// times are left out (they encode as `<unk>`); every observed character and
/// label gets an id. Ids follow first occurrence.
pub fn build_vocab(corpus: &Corpus, min_count: usize) -> Vocabulary {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in &corpus.sentences {
        for t in &s.tokens {
            *counts.entry(t.as_str()).or_default() += 1;
        }
    }
    let mut v = Vocabulary::empty();
    for s in &corpus.sentences {
        for t in &s.tokens {
            if counts[t.as_str()] >= min_count {
                v.words.intern(t);
            }
            for c in t.chars() {
                let mut buf = [0u8; 4];
                v.chars.intern(c.encode_utf8(&mut buf));
            }
        }
        for l in &s.labels {
            v.labels.intern(l);
        }
    }
    v
}

/// Word ids and per-token character ids of one sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedSentence {
    pub words: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Positions `start..start + len`, padded on the right with `<s>` tokens
    /// when the sentence is shorter.
    pub fn window(&self, start: usize, len: usize) -> EncodedSentence {
        let mut words = Vec::with_capacity(len);
        let mut chars = Vec::with_capacity(len);
        for i in start..start + len {
            match self.words.get(i) {
                Some(&w) => {
                    words.push(w);
                    chars.push(self.chars[i].clone());
                }
                None => {
                    words.push(WORD_PAD);
                    chars.push(vec![CHAR_PAD]);
                }
            }
        }
        EncodedSentence { words, chars }
    }
}

/// Maps tokens to ids. Unknown words map to `<unk>` but keep their own
/// character ids; unknown characters map to the char `<unk>`. A token with no
/// characters (never produced by the reader) is encoded as the padding char.
pub fn encode_sentence(vocab: &Vocabulary, tokens: &[String]) -> EncodedSentence {
    let words = tokens.iter().map(|t| vocab.word_id(t)).collect();
    let chars = tokens
        .iter()
        .map(|t| {
            let ids: Vec<usize> = t.chars().map(|c| vocab.char_id(c)).collect();
            if ids.is_empty() {
                vec![CHAR_PAD]
            } else {
                ids
            }
        })
        .collect();
    EncodedSentence { words, chars }
}
