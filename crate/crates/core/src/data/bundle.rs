use std::path::Path;

use super::vocab::Vocabulary;
use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::model::{ArchConfig, Seq2Biseq};

pub const MAGIC: &[u8; 4] = b"S2BS";
pub const FORMAT_VERSION: u32 = 1;

/// A trained (or freshly initialized) network together with its vocabulary.
#[derive(Clone, Debug)]
pub struct ModelBundle {
    pub vocab: Vocabulary,
    pub model: Seq2Biseq,
}

impl ModelBundle {
    pub fn new(vocab: Vocabulary, model: Seq2Biseq) -> Result<Self> {
        if vocab.sizes() != model.sizes() {
            return Err(Error::Inconsistent(format!(
                "vocabulary sizes {:?} do not match the network {:?}",
                vocab.sizes(),
                model.sizes()
            )));
        }
        Ok(ModelBundle { vocab, model })
    }

    /// Fresh network sized for `vocab`.
    pub fn init(vocab: Vocabulary, arch: ArchConfig, seed: u64) -> Result<Self> {
        let model = Seq2Biseq::new(arch, vocab.sizes(), seed)?;
        Ok(ModelBundle { vocab, model })
    }

    /// Serialized form. Layout, all integers little-endian:
    ///
    /// ```text
    /// "S2BS" u32:version
    /// u32:n  n × (str:name u64:value)          hyperparameters
    /// 3 × (u32:n  n × str)                     words, chars, labels
    /// u32:n  n × (str:name u32:rank rank × u64:extent  f64 data)
    /// ```
    ///
    /// where `str` is a `u32` byte length followed by UTF-8 bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.0.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        let hyper = hyperparameters(self.model.arch());
        w.u32(hyper.len() as u32);
        for (name, value) in hyper {
            w.str(name);
            w.u64(value);
        }
        for table in [&self.vocab.words, &self.vocab.chars, &self.vocab.labels] {
            w.u32(table.len() as u32);
            for item in table.items() {
                w.str(item);
            }
        }
        let params = self.model.params();
        w.u32(params.len() as u32);
        for (_, name, t) in params.iter() {
            w.str(name);
            w.u32(t.rank() as u32);
            for &e in t.shape() {
                w.u64(e as u64);
            }
            for &v in t.data() {
                w.0.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }

        let n = r.u32("hyperparameter count")?;
        let mut hyper = Vec::new();
        for _ in 0..n {
            let name = r.str("hyperparameter name")?;
            hyper.push((name, r.u64("hyperparameter value")?));
        }
        let arch = arch_from(&hyper)?;

        let mut tables = Vec::new();
        for what in ["word table", "char table", "label table"] {
            let n = r.u32(what)?;
            let items = (0..n).map(|_| r.str(what)).collect::<Result<Vec<_>>>()?;
            tables.push(items);
        }
        let labels = tables.pop().expect("three tables");
        let chars = tables.pop().expect("three tables");
        let words = tables.pop().expect("three tables");
        let vocab = Vocabulary::from_tables(words, chars, labels)
            .ok_or_else(|| Error::Inconsistent("malformed vocabulary tables".into()))?;

        let n = r.u32("tensor count")?;
        let mut store = ParamStore::new();
        for _ in 0..n {
            let name = r.str("tensor name")?;
            let rank = r.u32("tensor rank")? as usize;
            let shape = (0..rank)
                .map(|_| r.u64("tensor extent").map(|e| e as usize))
                .collect::<Result<Vec<_>>>()?;
            let count = shape
                .iter()
                .try_fold(1usize, |acc, &e| acc.checked_mul(e))
                .ok_or_else(|| Error::Inconsistent(format!("tensor {name} is too large")))?;
            let raw = r.take(
                count.checked_mul(8).ok_or(Error::Truncated("tensor data"))?,
                "tensor data",
            )?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let tensor = Tensor::new(shape, data)
                .map_err(|e| Error::Inconsistent(format!("tensor {name}: {e}")))?;
            if store.id(&name).is_some() {
                return Err(Error::Inconsistent(format!("tensor {name} stored twice")));
            }
            store.add(name, tensor);
        }
        if r.pos != bytes.len() {
            return Err(Error::Inconsistent(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        let model = Seq2Biseq::from_params(arch, vocab.sizes(), store)?;
        ModelBundle::new(vocab, model)
    }
}

pub fn save_model(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, bundle.to_bytes())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelBundle> {
    ModelBundle::from_bytes(&std::fs::read(path)?)
}

fn hyperparameters(arch: &ArchConfig) -> Vec<(&'static str, u64)> {
    vec![
        ("word_emb", arch.word_emb as u64),
        ("char_emb", arch.char_emb as u64),
        ("label_emb", arch.label_emb as u64),
        ("char_layer", arch.char_layer as u64),
        ("word_layer", arch.word_layer as u64),
        ("decoder_hidden", arch.decoder_hidden as u64),
        ("fw_only", arch.fw_only as u64),
    ]
}

fn arch_from(pairs: &[(String, u64)]) -> Result<ArchConfig> {
    let get = |key: &str| -> Result<u64> {
        let mut hits = pairs.iter().filter(|(k, _)| k == key);
        match (hits.next(), hits.next()) {
            (Some((_, v)), None) => Ok(*v),
            (None, _) => Err(Error::Inconsistent(format!("missing hyperparameter {key}"))),
            (Some(_), Some(_)) => Err(Error::Inconsistent(format!("hyperparameter {key} repeated"))),
        }
    };
    let known = hyperparameters(&ArchConfig::media());
    if let Some((k, _)) = pairs.iter().find(|(k, _)| !known.iter().any(|(n, _)| n == k)) {
        return Err(Error::Inconsistent(format!("unknown hyperparameter {k}")));
    }
    let size = |key: &str| get(key).map(|v| v as usize);
    let fw_only = match get("fw_only")? {
        0 => false,
        1 => true,
        v => return Err(Error::Inconsistent(format!("fw_only = {v}"))),
    };
    Ok(ArchConfig {
        word_emb: size("word_emb")?,
        char_emb: size("char_emb")?,
        label_emb: size("label_emb")?,
        char_layer: size("char_layer")?,
        word_layer: size("word_layer")?,
        decoder_hidden: size("decoder_hidden")?,
        fw_only,
    })
}

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::Truncated(what))?;
        let out = self.bytes.get(self.pos..end).ok_or(Error::Truncated(what))?;
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn str(&mut self, what: &'static str) -> Result<String> {
        let n = self.u32(what)? as usize;
        let raw = self.take(n, what)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::Inconsistent(format!("{what} is not UTF-8")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_vocab, Corpus, Sentence};

    fn bundle() -> ModelBundle {
        let s = Sentence::new(
            vec!["je".into(), "veux".into()],
            vec!["O".into(), "Command-B".into()],
        );
        let vocab = build_vocab(&Corpus::new(vec![s]), 1);
        let arch = ArchConfig {
            word_emb: 3,
            char_emb: 2,
            label_emb: 2,
            char_layer: 4,
            word_layer: 4,
            decoder_hidden: 3,
            fw_only: false,
        };
        ModelBundle::init(vocab, arch, 5).unwrap()
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let b = bundle();
        let bytes = b.to_bytes();
        let again = ModelBundle::from_bytes(&bytes).unwrap();
        assert_eq!(again.vocab, b.vocab);
        assert_eq!(again.model.params(), b.model.params());
        assert_eq!(again.model.arch(), b.model.arch());
        assert_eq!(again.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_magic() {
        let mut bytes = bundle().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(ModelBundle::from_bytes(&bytes), Err(Error::BadMagic)));
    }

    #[test]
    fn next_version_is_unsupported() {
        let mut bytes = bundle().to_bytes();
        bytes[4..8].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        assert!(matches!(
            ModelBundle::from_bytes(&bytes),
            Err(Error::UnsupportedVersion { found: 2, supported: 1 })
        ));
    }

    #[test]
    fn every_truncation_fails() {
        let bytes = bundle().to_bytes();
        for cut in (0..bytes.len()).step_by(7) {
            assert!(ModelBundle::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(ModelBundle::from_bytes(&longer), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn vocabulary_must_match_tensors() {
        let b = bundle();
        let mut vocab = b.vocab.clone();
        vocab.words.intern("extra");
        assert!(ModelBundle::new(vocab, b.model).is_err());
    }
}
