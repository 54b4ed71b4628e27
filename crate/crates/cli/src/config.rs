//! `key = value` run configuration with `[section]` headers.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use maskvec::model::{ModelConfig, PretrainConfig};
use maskvec::prompt::ContinuousConfig;
use maskvec::training::Objective;

use crate::UsageError;

/// Keys accepted in each section. Anything else is rejected at parse time.
const SCHEMA: &[(&str, &[&str])] = &[
    ("paths", &["corpus", "vocab", "checkpoint", "dev", "sts_dir", "output_dir", "init_checkpoint"]),
    ("model", &["layers", "heads", "hidden_dim", "ff_dim", "max_positions", "dropout", "tie_mlm_head", "seed"]),
    ("pretrain", &["steps", "batch_size", "mask_prob", "learning_rate", "seed"]),
    (
        "train",
        &[
            "objective",
            "batch_size",
            "temperature",
            "learning_rate",
            "epochs",
            "max_steps",
            "valid_steps",
            "seed",
            "template_a",
            "template_b",
        ],
    ),
    ("continuous", &["template", "steps", "batch_size", "learning_rate", "temperature", "seed"]),
];

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<(String, String), String>,
    base: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config = Self::parse(&text).with_context(|| format!("config {}", path.display()))?;
        config.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        let mut section: Option<&str> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| UsageError(format!("line {line_no}: unterminated section header")))?
                    .trim();
                if !SCHEMA.iter().any(|(s, _)| *s == name) {
                    return Err(UsageError(format!("line {line_no}: unknown section [{name}]")).into());
                }
                section = Some(SCHEMA.iter().find(|(s, _)| *s == name).expect("checked").0);
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| UsageError(format!("line {line_no}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            let section = section.ok_or_else(|| UsageError(format!("line {line_no}: key {key:?} outside a section")))?;
            let keys = SCHEMA.iter().find(|(s, _)| *s == section).expect("known section").1;
            if !keys.contains(&key) {
                return Err(UsageError(format!("line {line_no}: unknown key {key:?} in [{section}]")).into());
            }
            if values.insert((section.to_string(), key.to_string()), value.to_string()).is_some() {
                return Err(UsageError(format!("line {line_no}: duplicate key {key:?} in [{section}]")).into());
            }
        }
        Ok(Self { values, base: PathBuf::new() })
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(&(section.to_string(), key.to_string())).map(String::as_str)
    }

    pub fn get<T>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.raw(section, key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!(UsageError(format!("[{section}] {key} = {v:?}: {e}")))))
            .transpose()
    }

    /// A `[paths]` entry, resolved against the config file's directory.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw("paths", key).map(|p| self.base.join(p))
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf> {
        self.path(key).ok_or_else(|| UsageError(format!("missing [paths] {key}")).into())
    }

    pub fn model(&self, vocab_size: usize) -> Result<ModelConfig> {
        let d = ModelConfig::desk(vocab_size);
        let config = ModelConfig {
            layers: self.get("model", "layers")?.unwrap_or(d.layers),
            heads: self.get("model", "heads")?.unwrap_or(d.heads),
            hidden_dim: self.get("model", "hidden_dim")?.unwrap_or(d.hidden_dim),
            ff_dim: self.get("model", "ff_dim")?.unwrap_or(d.ff_dim),
            max_positions: self.get("model", "max_positions")?.unwrap_or(d.max_positions),
            vocab_size,
            dropout_p: self.get("model", "dropout")?.unwrap_or(d.dropout_p),
            tie_mlm_head: self.get("model", "tie_mlm_head")?.unwrap_or(d.tie_mlm_head),
            seed: self.get("model", "seed")?.unwrap_or(d.seed),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn pretrain(&self) -> Result<PretrainConfig> {
        let d = PretrainConfig::default();
        Ok(PretrainConfig {
            steps: self.get("pretrain", "steps")?.unwrap_or(d.steps),
            batch_size: self.get("pretrain", "batch_size")?.unwrap_or(d.batch_size),
            mask_prob: self.get("pretrain", "mask_prob")?.unwrap_or(d.mask_prob),
            learning_rate: self.get("pretrain", "learning_rate")?.unwrap_or(d.learning_rate),
            seed: self.get("pretrain", "seed")?.unwrap_or(d.seed),
        })
    }

    pub fn objective(&self) -> Result<Objective> {
        Ok(self.get("train", "objective")?.unwrap_or(Objective::TwoTemplatesDenoised))
    }

    pub fn continuous(&self) -> Result<ContinuousConfig> {
        let d = ContinuousConfig::default();
        Ok(ContinuousConfig {
            steps: self.get("continuous", "steps")?.unwrap_or(d.steps),
            batch_size: self.get("continuous", "batch_size")?.unwrap_or(d.batch_size),
            learning_rate: self.get("continuous", "learning_rate")?.unwrap_or(d.learning_rate),
            temperature: self.get("continuous", "temperature")?.unwrap_or(d.temperature),
            seed: self.get("continuous", "seed")?.unwrap_or(d.seed),
        })
    }
}
