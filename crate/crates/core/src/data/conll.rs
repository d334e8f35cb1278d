use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// One sentence: tokens and, when available, their gold labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    /// Empty for unlabelled input, otherwise one label per token.
    pub labels: Vec<String>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, labels: Vec<String>) -> Self {
        Sentence { tokens, labels }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_labelled(&self) -> bool {
        !self.tokens.is_empty() && self.labels.len() == self.tokens.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub source: Option<PathBuf>,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        Corpus {
            sentences,
            source: None,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

/// Which columns of a CoNLL-style file carry what.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnPolicy {
    /// Token in the first column, gold label in the last; anything between is
    /// ignored. At least two columns; at least one sentence.
    TokenLabel,
    /// Token in the first column, the rest ignored. An empty file is a valid
    /// empty corpus.
    TokensOnly,
}

/// Splits text into blank-line-separated blocks of whitespace-separated rows.
///
/// Returns each block with the 1-based line number of its first row. Rows of
/// a block must all have the same number of columns.
pub fn read_blocks(text: &str, source: &Path) -> Result<Vec<(usize, Vec<Vec<String>>)>> {
    let mut blocks = Vec::new();
    let mut current: Vec<Vec<String>> = Vec::new();
    let mut start = 0;
    for (i, line) in text.lines().enumerate() {
        let cols: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if cols.is_empty() {
            if !current.is_empty() {
                blocks.push((start, std::mem::take(&mut current)));
            }
            continue;
        }
        if let Some(first) = current.first() {
            if first.len() != cols.len() {
                return Err(Error::Parse {
                    path: source.to_path_buf(),
                    line: i + 1,
                    msg: format!(
                        "expected {} columns as on line {start}, found {}",
                        first.len(),
                        cols.len()
                    ),
                });
            }
        } else {
            start = i + 1;
        }
        current.push(cols);
    }
    if !current.is_empty() {
        blocks.push((start, current));
    }
    Ok(blocks)
}

/// Parses CoNLL-style text already in memory. `source` is only used in
/// diagnostics.
pub fn parse_conll_str(text: &str, policy: ColumnPolicy, source: &Path) -> Result<Corpus> {
    let mut sentences = Vec::new();
    for (line, rows) in read_blocks(text, source)? {
        let tokens = rows.iter().map(|r| r[0].clone()).collect();
        let labels = match policy {
            ColumnPolicy::TokensOnly => Vec::new(),
            ColumnPolicy::TokenLabel => {
                if rows[0].len() < 2 {
                    return Err(Error::Parse {
                        path: source.to_path_buf(),
                        line,
                        msg: "a label column is required".into(),
                    });
                }
                rows.iter().map(|r| r[r.len() - 1].clone()).collect()
            }
        };
        sentences.push(Sentence::new(tokens, labels));
    }
    if sentences.is_empty() && policy == ColumnPolicy::TokenLabel {
        return Err(Error::Parse {
            path: source.to_path_buf(),
            line: 0,
            msg: "no sentences".into(),
        });
    }
    Ok(Corpus {
        sentences,
        source: Some(source.to_path_buf()),
    })
}

pub fn parse_conll(path: impl AsRef<Path>, policy: ColumnPolicy) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_conll_str(&text, policy, path)
}

/// Renders a corpus as `token<TAB>label` lines (just `token` for unlabelled
/// sentences) with a blank line after each sentence.
pub fn write_conll(corpus: &Corpus) -> String {
    let mut out = String::new();
    for s in &corpus.sentences {
        for (i, tok) in s.tokens.iter().enumerate() {
            match s.labels.get(i) {
                Some(label) => writeln!(out, "{tok}\t{label}"),
                None => writeln!(out, "{tok}"),
            }
            .expect("writing to a String");
        }
        out.push('\n');
    }
    out
}
