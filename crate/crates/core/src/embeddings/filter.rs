use std::fmt;
use std::str::FromStr;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CaseMode {
    Off,
    /// Lowercase sentences before tokenizing; no token is removed.
    #[default]
    LowercaseInput,
    /// Remove every token containing an uppercase character.
    DropUppercase,
}

impl FromStr for CaseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(CaseMode::Off),
            "lowercase" | "lowercase-input" => Ok(CaseMode::LowercaseInput),
            "drop" | "drop-uppercase" => Ok(CaseMode::DropUppercase),
            other => Err(Error::invalid(format!("unknown case mode {other:?}"))),
        }
    }
}

/// Which biased token groups to leave out of a static-average sentence embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiasFilterSpec {
    /// Remove the `top_freq_count` most frequent tokens (0 disables).
    pub top_freq_count: usize,
    pub remove_subwords: bool,
    pub case_mode: CaseMode,
    pub remove_punctuation: bool,
}

impl BiasFilterSpec {
    pub const NONE: BiasFilterSpec = BiasFilterSpec {
        top_freq_count: 0,
        remove_subwords: false,
        case_mode: CaseMode::Off,
        remove_punctuation: false,
    };

    /// Every filter on, with the default lowercase-input case handling.
    pub fn all(top_freq_count: usize) -> Self {
        BiasFilterSpec {
            top_freq_count,
            remove_subwords: true,
            case_mode: CaseMode::LowercaseInput,
            remove_punctuation: true,
        }
    }

    pub fn lowercase_input(&self) -> bool {
        self.case_mode == CaseMode::LowercaseInput
    }

    pub fn is_none(&self) -> bool {
        *self == Self::NONE
    }
}

impl Default for BiasFilterSpec {
    fn default() -> Self {
        Self::NONE
    }
}

impl fmt::Display for BiasFilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.top_freq_count > 0 {
            parts.push(format!("freq{}", self.top_freq_count));
        }
        if self.remove_subwords {
            parts.push("sub".to_string());
        }
        match self.case_mode {
            CaseMode::Off => {}
            CaseMode::LowercaseInput => parts.push("case".to_string()),
            CaseMode::DropUppercase => parts.push("case-drop".to_string()),
        }
        if self.remove_punctuation {
            parts.push("pun".to_string());
        }
        if parts.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&parts.join("+"))
        }
    }
}

/// Membership mask over token ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemovedTokens {
    mask: Vec<bool>,
}

impl RemovedTokens {
    pub fn empty(vocab_size: usize) -> Self {
        Self { mask: vec![false; vocab_size] }
    }

    pub fn contains(&self, id: u32) -> bool {
        self.mask.get(id as usize).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> Vec<u32> {
        self.mask.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i as u32).collect()
    }

    pub fn is_subset_of(&self, other: &RemovedTokens) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }
}

/// Resolves a filter spec to the concrete set of removed token ids. The
/// frequency cut takes the `top_freq_count` highest counts, lower id first on ties.
pub fn resolve_filter(vocab: &Vocabulary, spec: &BiasFilterSpec) -> RemovedTokens {
    let mut removed = RemovedTokens::empty(vocab.len());
    if spec.top_freq_count > 0 {
        let mut by_freq: Vec<&_> = vocab.records().iter().collect();
        by_freq.sort_by(|a, b| b.frequency.cmp(&a.frequency).then(a.id.cmp(&b.id)));
        for r in by_freq.into_iter().take(spec.top_freq_count) {
            removed.mask[r.id as usize] = true;
        }
    }
    for r in vocab.records() {
        let drop = (spec.remove_subwords && r.is_subword)
            || (spec.case_mode == CaseMode::DropUppercase && r.has_uppercase)
            || (spec.remove_punctuation && r.is_punctuation);
        if drop {
            removed.mask[r.id as usize] = true;
        }
    }
    removed
}
