use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use seq2biseq::model::ArchConfig;
use seq2biseq::training::TrainConfig;

/// Everything a training run needs, built from a profile, then a key=value
/// file, then command-line overrides.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub arch: ArchConfig,
    pub train_path: Option<PathBuf>,
    pub dev_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
}

pub const KEYS: &[&str] = &[
    "profile",
    "train",
    "dev",
    "test",
    "model",
    "log",
    "epochs",
    "lr",
    "momentum",
    "optimizer",
    "lambda",
    "dropout",
    "segment_len",
    "shift",
    "batch_size",
    "batching",
    "seed",
    "regime",
    "clip_norm",
    "min_count",
    "word_emb",
    "char_emb",
    "label_emb",
    "char_layer",
    "word_layer",
    "decoder_hidden",
    "fw_only",
];

impl RunConfig {
    pub fn profile(name: &str) -> Result<Self> {
        let (train, arch) = match name {
            "media" => (TrainConfig::media(), ArchConfig::media()),
            "wsj" => (TrainConfig::wsj(), ArchConfig::wsj()),
            _ => bail!("unknown profile {name:?} (expected media or wsj)"),
        };
        Ok(RunConfig {
            train,
            arch,
            train_path: None,
            dev_path: None,
            test_path: None,
            model_path: None,
            log_path: None,
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e| anyhow::anyhow!("{key}: cannot parse {v:?}: {e}"))
        }
        let t = &mut self.train;
        let a = &mut self.arch;
        match key {
            "profile" => bail!("profile can only be chosen once, before other keys"),
            "train" => self.train_path = Some(value.into()),
            "dev" => self.dev_path = Some(value.into()),
            "test" => self.test_path = Some(value.into()),
            "model" => self.model_path = Some(value.into()),
            "log" => self.log_path = Some(value.into()),
            "epochs" => t.epochs = num(key, value)?,
            "lr" => t.base_lr = num(key, value)?,
            "momentum" => t.momentum = num(key, value)?,
            "optimizer" => t.optimizer = value.parse()?,
            "lambda" => t.lambda = num(key, value)?,
            "dropout" => t.dropout = num(key, value)?,
            "segment_len" => t.segment_len = num(key, value)?,
            "shift" => t.shift = num(key, value)?,
            "batch_size" => t.batch_size = num(key, value)?,
            "batching" => t.batching = value.parse()?,
            "seed" => t.seed = num(key, value)?,
            "regime" => t.regime = value.parse()?,
            "clip_norm" => t.clip_norm = if value == "none" { None } else { Some(num(key, value)?) },
            "min_count" => t.min_count = num(key, value)?,
            "word_emb" => a.word_emb = num(key, value)?,
            "char_emb" => a.char_emb = num(key, value)?,
            "label_emb" => a.label_emb = num(key, value)?,
            "char_layer" => a.char_layer = num(key, value)?,
            "word_layer" => a.word_layer = num(key, value)?,
            "decoder_hidden" => a.decoder_hidden = num(key, value)?,
            "fw_only" => a.fw_only = num(key, value)?,
            _ => bail!("unknown configuration key {key:?}"),
        }
        Ok(())
    }
}

/// `key = value` pairs of a config file; `#` starts a comment.
pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("{}:{}: expected key = value", path.display(), i + 1);
        };
        let k = k.trim().replace('-', "_");
        if !KEYS.contains(&k.as_str()) {
            bail!("{}:{}: unknown configuration key {k:?}", path.display(), i + 1);
        }
        pairs.push((k, v.trim().to_string()));
    }
    Ok(pairs)
}

/// Profile (flag, else file, else media), then file keys, then `overrides`.
pub fn resolve(
    file: Option<&Path>,
    profile_flag: Option<&str>,
    overrides: &[(String, String)],
) -> Result<RunConfig> {
    let pairs = match file {
        Some(p) => read_pairs(p)?,
        None => Vec::new(),
    };
    let file_profile = pairs.iter().rev().find(|(k, _)| k == "profile").map(|(_, v)| v.as_str());
    let mut cfg = RunConfig::profile(profile_flag.or(file_profile).unwrap_or("media"))?;
    for (k, v) in pairs.iter().chain(overrides).filter(|(k, _)| k != "profile") {
        cfg.set(k, v)?;
    }
    Ok(cfg)
}
